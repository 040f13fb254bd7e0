import fs from "node:fs";
import os from "node:os";
import path from "node:path";
import { describe, expect, it } from "vitest";

import { readValueFunction } from "../src/coeffs.js";
import {
  feedbackQuiver,
  plotConvergence,
  plotFlowComparison,
  plotTrajectories,
  plotValueSurface,
} from "../src/figures.js";
import { ackley, doubleWell, nonsmooth, objectiveByName, rastrigin } from "../src/objectives.js";
import { main, regenerateAll } from "../src/cli.js";

const ARTIFACTS = path.resolve(__dirname, "../../artifacts/acceptance");
const RUN_CONTROLLED = path.join(ARTIFACTS, "rastrigin_d2/run_rastrigin_controlled_ungated_d2_N50_seed0.csv");
const RUN_STANDARD = path.join(ARTIFACTS, "rastrigin_d2/run_rastrigin_standard_d2_N50_seed0.csv");
const PARTICLES = path.join(ARTIFACTS, "rastrigin_d2/run_rastrigin_controlled_d2_N50_seed0_particles.csv");
const QUADRATIC = path.join(ARTIFACTS, "quadratic_d2/hjb_quadratic_d2_monomial_td4.json");
const RASTRIGIN_VF = path.join(ARTIFACTS, "rastrigin_d2/hjb_rastrigin_d2_legendre_hc2.json");

describe("objective formulas", () => {
  it("matches the documented reference values", () => {
    expect(rastrigin([0, 0])).toBeCloseTo(10, 12);
    expect(rastrigin([0.5])).toBeCloseTo(30.25, 12);
    expect(ackley([0, 0])).toBeCloseTo(1, 12);
    expect(ackley([1, 1])).toBeCloseTo(4.625384938440362, 12);
    expect(doubleWell([0])).toBeCloseTo(5.34, 12);
    expect(nonsmooth([-3])).toBe(9);
    expect(nonsmooth([-1])).toBe(4);
    expect(nonsmooth([1])).toBe(0);
  });

  it("rejects unknown names", () => {
    expect(() => objectiveByName("griewank")).toThrow(/unknown objective/);
  });
});

describe("convergence figure", () => {
  it("draws one solid and one dashed curve per input", () => {
    const svg = plotConvergence([RUN_CONTROLLED, RUN_STANDARD]);
    expect(svg).toContain("<svg");
    expect(svg.trim().endsWith("</svg>")).toBe(true);
    const polylines = svg.match(/<polyline /g) ?? [];
    expect(polylines.length).toBe(4);
    expect(svg).toContain("log scale");
  });

  it("is deterministic", () => {
    expect(plotConvergence([RUN_CONTROLLED])).toBe(plotConvergence([RUN_CONTROLLED]));
  });

  it("errors on empty input", () => {
    expect(() => plotConvergence([])).toThrow(/no input/);
  });
});

describe("trajectory overlay", () => {
  it("draws contours and one path per particle", () => {
    const svg = plotTrajectories(PARTICLES, "rastrigin");
    const polylines = svg.match(/<polyline /g) ?? [];
    expect(polylines.length).toBe(50);
    expect((svg.match(/<circle /g) ?? []).length).toBe(100); // starts + ends
    expect((svg.match(/<path /g) ?? []).length).toBeGreaterThan(5); // contour lines
  });

  it("needs a known objective for the background", () => {
    expect(() => plotTrajectories(PARTICLES, "mystery")).toThrow(/unknown objective/);
  });
});

describe("value surface figure", () => {
  it("renders a heatmap with a quiver in 2-D", () => {
    const svg = plotValueSurface(RASTRIGIN_VF);
    expect((svg.match(/<rect /g) ?? []).length).toBeGreaterThan(1000);
    expect((svg.match(/<line /g) ?? []).length).toBeGreaterThan(400); // quiver arrows
  });

  it("quadratic feedback points inward everywhere sampled", () => {
    const vf = readValueFunction(QUADRATIC);
    const samples = feedbackQuiver(vf, 15);
    expect(samples.length).toBe(225);
    for (const { x, u } of samples) {
      const r = Math.hypot(x[0], x[1]);
      if (r < 1e-9) {
        // the minimizer itself is the one stationary sample
        expect(Math.hypot(u[0], u[1])).toBeLessThan(1e-6);
      } else {
        expect(u[0] * x[0] + u[1] * x[1]).toBeLessThan(0);
      }
    }
  });
});

describe("flow comparison figure", () => {
  it("renders both panels with surrogate overlays", () => {
    const flows = [
      path.join(ARTIFACTS, "double_well/flow_double_well_legendre_td2_feedback.csv"),
      path.join(ARTIFACTS, "double_well/flow_double_well_legendre_td8_feedback.csv"),
      path.join(ARTIFACTS, "double_well/flow_double_well_legendre_td8_neg_gradient.csv"),
    ];
    const coeffs = [
      path.join(ARTIFACTS, "double_well/hjb_double_well_d1_legendre_td2.json"),
      path.join(ARTIFACTS, "double_well/hjb_double_well_d1_legendre_td8.json"),
    ];
    const svg = plotFlowComparison(flows, "double_well", coeffs);
    expect(svg).toContain("Flow trajectories");
    expect(svg).toContain("Objective vs value surrogates");
    // objective curve + 2 surrogates + 3 trajectories + legend strokes
    expect((svg.match(/<polyline /g) ?? []).length).toBeGreaterThanOrEqual(6);
  });
});

describe("regenerate-all command", () => {
  it("produces every figure kind from the artifact tree", () => {
    const out = fs.mkdtempSync(path.join(os.tmpdir(), "ccbo-figs-"));
    const written = regenerateAll(ARTIFACTS, out);
    const names = written.map((p) => path.basename(p));
    expect(names.some((n) => n.startsWith("convergence_"))).toBe(true);
    expect(names.some((n) => n.startsWith("trajectories_"))).toBe(true);
    expect(names.some((n) => n.startsWith("surface_"))).toBe(true);
    expect(names.some((n) => n.startsWith("flow_comparison_"))).toBe(true);
    for (const p of written) {
      const text = fs.readFileSync(p, "utf8");
      expect(text.length).toBeGreaterThan(500);
      expect(text).toContain("</svg>");
    }
  });

  it("cli entry returns nonzero on bad usage", () => {
    expect(main(["surface"])).toBe(1); // missing --coeffs
    expect(main(["unknown-command"])).toBe(2);
  });
});
