import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { describe, expect, it } from "vitest";

import { readFlowCsv, readParticlesCsv, readRunCsv } from "../src/csv.js";

const ARTIFACTS = path.resolve(__dirname, "../../artifacts/acceptance");

function tmpFile(content: string): string {
  const p = path.join(fs.mkdtempSync(path.join(os.tmpdir(), "ccbo-plots-")), "f.csv");
  fs.writeFileSync(p, content);
  return p;
}

describe("run CSV reader", () => {
  const runPath = path.join(
    ARTIFACTS,
    "rastrigin_d2/run_rastrigin_controlled_ungated_d2_N50_seed0.csv",
  );

  it("parses the documented schema", () => {
    const run = readRunCsv(runPath);
    expect(run.dim).toBe(2);
    expect(run.t.length).toBe(101); // ceil(T/dt) + 1 including t = 0
    expect(run.t[0]).toBe(0);
    expect(run.t.at(-1)).toBeCloseTo(10, 12);
    expect(run.consensus[0].length).toBe(2);
    expect(run.w2sq.every((v) => v >= 0)).toBe(true);
    expect(run.lambdaGateCount[0]).toBe(0); // no step precedes the first row
  });

  it("rejects a mangled header", () => {
    const p = tmpFile("step,t,vv_1,variance,w2sq,lambda_gate_count,beta_gate_count\n0,0,1,1,1,0,0\n");
    expect(() => readRunCsv(p)).toThrow(/v_/);
  });

  it("rejects an empty file", () => {
    const p = tmpFile("");
    expect(() => readRunCsv(p)).toThrow(/empty/);
  });

  it("rejects a header-only file", () => {
    const p = tmpFile("step,t,v_1,variance,w2sq,lambda_gate_count,beta_gate_count\n");
    expect(() => readRunCsv(p)).toThrow(/no data rows/);
  });
});

describe("particles CSV reader", () => {
  it("reshapes into steps x particles x dim", () => {
    const p = path.join(ARTIFACTS, "rastrigin_d2/run_rastrigin_controlled_d2_N50_seed0_particles.csv");
    const data = readParticlesCsv(p);
    expect(data.dim).toBe(2);
    expect(data.positions.length).toBe(101);
    expect(data.positions[0].length).toBe(50);
    expect(data.positions[0][0].length).toBe(2);
  });
});

describe("flow CSV reader", () => {
  it("parses trajectories and objective values", () => {
    const p = path.join(ARTIFACTS, "double_well/flow_double_well_legendre_td8_feedback.csv");
    const flow = readFlowCsv(p);
    expect(flow.dim).toBe(1);
    expect(flow.t.length).toBe(1001);
    expect(flow.aborted).toBe(false);
    // the feedback flow crosses into the right-hand basin
    expect(flow.x.at(-1)![0]).toBeGreaterThan(1.0);
  });

  it("flags an abort trailer", () => {
    const p = tmpFile("t,x_1,f\n0.0,1.0,2.0\n# aborted at step 1: diverged\n");
    expect(readFlowCsv(p).aborted).toBe(true);
  });
});
