/** Benchmark objectives re-evaluated locally (formulas as documented in the
 * solver package README) for contour backgrounds and curve overlays. */

export type ObjectiveFn = (x: number[]) => number;

export function ackley(x: number[]): number {
  const d = x.length;
  let sq = 0;
  let cs = 0;
  for (const v of x) {
    sq += v * v;
    cs += Math.cos(2 * Math.PI * v);
  }
  sq /= d;
  cs /= d;
  return -20 * Math.exp(-0.2 * Math.sqrt(sq)) - Math.exp(cs) + 21 + Math.E;
}

export function rastrigin(x: number[]): number {
  const d = x.length;
  let acc = 10 * (d + 1);
  for (const v of x) acc += v * v - 10 * Math.cos(2 * Math.PI * v);
  return acc;
}

export function doubleWell(x: number[]): number {
  const t = x[0];
  return (t * t - 2.2) ** 2 - 0.08 * t + 0.5;
}

export function nonsmooth(x: number[]): number {
  const t = x[0];
  if (t < -2) return t * t;
  if (t <= 0) return 4;
  return 4 * (t - 1) ** 2;
}

const REGISTRY: Record<string, { fn: ObjectiveFn; minimizer: (d: number) => number[] }> = {
  ackley: { fn: ackley, minimizer: (d) => new Array(d).fill(0) },
  rastrigin: { fn: rastrigin, minimizer: (d) => new Array(d).fill(0) },
  double_well: { fn: doubleWell, minimizer: () => [1.48776] },
  nonsmooth: { fn: nonsmooth, minimizer: () => [1.0] },
};

export function objectiveByName(name: string): { fn: ObjectiveFn; minimizer: (d: number) => number[] } {
  const entry = REGISTRY[name];
  if (!entry) {
    throw new Error(`unknown objective '${name}' (known: ${Object.keys(REGISTRY).join(", ")})`);
  }
  return entry;
}
