/** Readers for the documented CSV artifacts (run, particles, flow). */
import fs from "node:fs";

export interface RunSeries {
  path: string;
  t: number[];
  consensus: number[][]; // [step][dim]
  variance: number[];
  w2sq: number[];
  lambdaGateCount: number[];
  betaGateCount: number[];
  dim: number;
}

export interface ParticleSeries {
  path: string;
  t: number[]; // per step
  positions: number[][][]; // [step][particle][dim]
  dim: number;
}

export interface FlowSeries {
  path: string;
  t: number[];
  x: number[][]; // [step][dim]
  f: number[];
  dim: number;
  aborted: boolean;
}

function readTable(path: string): { header: string[]; rows: string[][]; trailer: string[] } {
  const text = fs.readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error(`${path}: empty file`);
  const trailer = lines.filter((l) => l.startsWith("#"));
  const data = lines.filter((l) => !l.startsWith("#"));
  const header = data[0].split(",");
  const rows = data.slice(1).map((l) => l.split(","));
  if (rows.length === 0) throw new Error(`${path}: no data rows`);
  return { header, rows, trailer };
}

function expectHeader(path: string, header: string[], fixedPrefix: string[], dimPrefix: string, fixedSuffix: string[]): number {
  for (let i = 0; i < fixedPrefix.length; i++) {
    if (header[i] !== fixedPrefix[i]) {
      throw new Error(`${path}: expected column ${i} to be '${fixedPrefix[i]}', got '${header[i]}'`);
    }
  }
  let dim = 0;
  while (header[fixedPrefix.length + dim] === `${dimPrefix}${dim + 1}`) dim++;
  if (dim === 0) throw new Error(`${path}: no ${dimPrefix}* columns found`);
  const rest = header.slice(fixedPrefix.length + dim);
  if (rest.length !== fixedSuffix.length || rest.some((c, i) => c !== fixedSuffix[i])) {
    throw new Error(`${path}: unexpected trailing columns [${rest.join(",")}]`);
  }
  return dim;
}

export function readRunCsv(path: string): RunSeries {
  const { header, rows } = readTable(path);
  const dim = expectHeader(path, header, ["step", "t"], "v_", [
    "variance",
    "w2sq",
    "lambda_gate_count",
    "beta_gate_count",
  ]);
  const out: RunSeries = {
    path,
    t: [],
    consensus: [],
    variance: [],
    w2sq: [],
    lambdaGateCount: [],
    betaGateCount: [],
    dim,
  };
  for (const r of rows) {
    out.t.push(Number(r[1]));
    out.consensus.push(r.slice(2, 2 + dim).map(Number));
    out.variance.push(Number(r[2 + dim]));
    out.w2sq.push(Number(r[3 + dim]));
    out.lambdaGateCount.push(Number(r[4 + dim]));
    out.betaGateCount.push(Number(r[5 + dim]));
  }
  return out;
}

export function readParticlesCsv(path: string): ParticleSeries {
  const { header, rows } = readTable(path);
  const dim = expectHeader(path, header, ["step", "t", "particle"], "x_", []);
  const bySteps = new Map<number, { t: number; particles: number[][] }>();
  for (const r of rows) {
    const step = Number(r[0]);
    if (!bySteps.has(step)) bySteps.set(step, { t: Number(r[1]), particles: [] });
    bySteps.get(step)!.particles[Number(r[2])] = r.slice(3, 3 + dim).map(Number);
  }
  const steps = [...bySteps.keys()].sort((a, b) => a - b);
  return {
    path,
    t: steps.map((s) => bySteps.get(s)!.t),
    positions: steps.map((s) => bySteps.get(s)!.particles),
    dim,
  };
}

export function readFlowCsv(path: string): FlowSeries {
  const { header, rows, trailer } = readTable(path);
  const dim = expectHeader(path, header, ["t"], "x_", ["f"]);
  return {
    path,
    t: rows.map((r) => Number(r[0])),
    x: rows.map((r) => r.slice(1, 1 + dim).map(Number)),
    f: rows.map((r) => Number(r[1 + dim])),
    dim,
    aborted: trailer.length > 0,
  };
}
