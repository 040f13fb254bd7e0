/** Coefficient-file loading and polynomial evaluation, independent of the
 * solver package: the file is self-describing (family, index list, domain),
 * so rebuilding the basis here doubles as a format validation. */
import fs from "node:fs";

export interface ValueFunctionFile {
  path: string;
  family: "monomial" | "legendre";
  truncation: { kind: string; degree: number };
  lower: number[];
  upper: number[];
  indices: number[][];
  epsilon: number;
  coefficients: number[];
  objectiveProjection: number[] | null;
  dim: number;
}

export function readValueFunction(path: string): ValueFunctionFile {
  const doc = JSON.parse(fs.readFileSync(path, "utf8"));
  if (doc.format !== "controlled-cbo-value-function") {
    throw new Error(`${path}: not a value-function coefficient file`);
  }
  if (doc.format_version !== 1) {
    throw new Error(`${path}: unsupported format version ${doc.format_version}`);
  }
  const indices: number[][] = doc.indices;
  const dim = doc.domain.lower.length;
  if (!indices.every((r) => r.length === dim)) {
    throw new Error(`${path}: index list does not match the domain dimension`);
  }
  if (doc.coefficients.length !== indices.length) {
    throw new Error(`${path}: coefficient count does not match the index list`);
  }
  return {
    path,
    family: doc.family,
    truncation: doc.truncation,
    lower: doc.domain.lower,
    upper: doc.domain.upper,
    indices,
    epsilon: doc.epsilon,
    coefficients: doc.coefficients,
    objectiveProjection: doc.objective_projection ?? null,
    dim,
  };
}

/** Values of P_0..P_max at xi (classical normalization, P_r(1) = 1). */
export function legendreValues(xi: number, maxDegree: number): number[] {
  const v = new Array<number>(maxDegree + 1);
  v[0] = 1;
  if (maxDegree >= 1) v[1] = xi;
  for (let k = 1; k < maxDegree; k++) {
    v[k + 1] = ((2 * k + 1) * xi * v[k] - k * v[k - 1]) / (k + 1);
  }
  return v;
}

/** Derivatives via P'_{k+1} = P'_{k-1} + (2k+1) P_k. */
export function legendreDerivatives(xi: number, maxDegree: number): number[] {
  const v = legendreValues(xi, maxDegree);
  const d = new Array<number>(maxDegree + 1).fill(0);
  if (maxDegree >= 1) d[1] = 1;
  for (let k = 1; k < maxDegree; k++) {
    d[k + 1] = d[k - 1] + (2 * k + 1) * v[k];
  }
  return d;
}

function oneDimTables(vf: ValueFunctionFile, x: number[]): { vals: number[][]; ders: number[][] } {
  const vals: number[][] = [];
  const ders: number[][] = [];
  for (let p = 0; p < vf.dim; p++) {
    const maxDeg = Math.max(...vf.indices.map((r) => r[p]));
    if (vf.family === "monomial") {
      const v = new Array<number>(maxDeg + 1);
      v[0] = 1;
      for (let k = 0; k < maxDeg; k++) v[k + 1] = v[k] * x[p];
      const d = new Array<number>(maxDeg + 1).fill(0);
      if (maxDeg >= 1) d[1] = 1;
      let pw = 1;
      for (let k = 1; k < maxDeg; k++) {
        pw *= x[p];
        d[k + 1] = (k + 1) * pw;
      }
      vals.push(v);
      ders.push(d);
    } else {
      const a = vf.lower[p];
      const b = vf.upper[p];
      const scale = 2 / (b - a);
      const xi = scale * x[p] - (a + b) / (b - a);
      vals.push(legendreValues(xi, maxDeg));
      ders.push(legendreDerivatives(xi, maxDeg).map((v) => v * scale));
    }
  }
  return { vals, ders };
}

export function evalExpansion(vf: ValueFunctionFile, coeffs: number[], x: number[]): number {
  const { vals } = oneDimTables(vf, x);
  let total = 0;
  for (let i = 0; i < vf.indices.length; i++) {
    let prod = coeffs[i];
    for (let p = 0; p < vf.dim; p++) prod *= vals[p][vf.indices[i][p]];
    total += prod;
  }
  return total;
}

export function evalValue(vf: ValueFunctionFile, x: number[]): number {
  return evalExpansion(vf, vf.coefficients, x);
}

/** Feedback field u(x) = -(1/eps) * sum_i c_i grad(phi_i)(x). */
export function evalFeedback(vf: ValueFunctionFile, x: number[]): number[] {
  const { vals, ders } = oneDimTables(vf, x);
  const u = new Array<number>(vf.dim).fill(0);
  for (let i = 0; i < vf.indices.length; i++) {
    const r = vf.indices[i];
    for (let p = 0; p < vf.dim; p++) {
      let term = vf.coefficients[i] * ders[p][r[p]];
      for (let q = 0; q < vf.dim; q++) {
        if (q !== p) term *= vals[q][r[q]];
      }
      u[p] += term;
    }
  }
  return u.map((v) => -v / vf.epsilon);
}
