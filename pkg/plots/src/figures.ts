/** The four figure kinds built from run artifacts. */
import path from "node:path";
import { contours } from "d3-contour";

import { readFlowCsv, readParticlesCsv, readRunCsv } from "./csv.js";
import { evalFeedback, evalValue, readValueFunction, ValueFunctionFile } from "./coeffs.js";
import { objectiveByName } from "./objectives.js";
import { Figure, heatColor, LinearScale, LogScale, PALETTE } from "./svg.js";

const W = 640;
const H = 440;
const M = { top: 30, right: 170, bottom: 50, left: 70 };

function seriesLabel(p: string): string {
  return path.basename(p).replace(/\.csv$/, "").replace(/^run_/, "");
}

/** Log-scale decay curves of the ensemble variance and the squared distance
 * to the minimizer, one pair of curves per run CSV. */
export function plotConvergence(csvPaths: string[]): string {
  if (csvPaths.length === 0) throw new Error("no input CSV files");
  const runs = csvPaths.map(readRunCsv);
  const fig = new Figure(W, H);

  let tMax = 0;
  let yMin = Infinity;
  let yMax = -Infinity;
  for (const r of runs) {
    tMax = Math.max(tMax, r.t[r.t.length - 1]);
    for (const v of [...r.variance, ...r.w2sq]) {
      if (Number.isFinite(v) && v > 0) {
        yMin = Math.min(yMin, v);
        yMax = Math.max(yMax, v);
      }
    }
  }
  if (!Number.isFinite(yMin)) throw new Error("no positive values to plot");
  yMin = Math.max(yMin * 0.5, 1e-300);
  const xs = new LinearScale(0, tMax, M.left, W - M.right);
  const ys = new LogScale(yMin, yMax * 2, H - M.bottom, M.top);

  const legend: { label: string; color: string; dash?: string }[] = [];
  runs.forEach((r, i) => {
    const color = PALETTE[i % PALETTE.length];
    const curve = (vals: number[], dash: string) =>
      fig.polyline(
        r.t.map((t, k) => [xs.map(t), ys.map(vals[k])] as [number, number]),
        color,
        1.6,
        dash,
      );
    curve(r.w2sq, "");
    curve(r.variance, "5,3");
    legend.push({ label: `${seriesLabel(r.path)} (sq. dist)`, color });
    legend.push({ label: `${seriesLabel(r.path)} (variance)`, color, dash: "5,3" });
  });
  fig.axes(xs, ys, { xLabel: "t", yLabel: "value (log scale)", title: "Ensemble decay" });
  fig.legend(legend, W - M.right + 10, M.top + 10);
  return fig.render();
}

function contourPaths(
  fn: (x: number[]) => number,
  box: { x0: number; x1: number; y0: number; y1: number },
  xs: LinearScale,
  ys: LinearScale,
  fig: Figure,
  levels = 12,
): void {
  const n = 96;
  const m = 96;
  const values = new Float64Array(n * m);
  for (let j = 0; j < m; j++) {
    for (let i = 0; i < n; i++) {
      const x = box.x0 + ((i + 0.5) / n) * (box.x1 - box.x0);
      const y = box.y0 + ((j + 0.5) / m) * (box.y1 - box.y0);
      values[j * n + i] = fn([x, y]);
    }
  }
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    lo = Math.min(lo, v);
    hi = Math.max(hi, v);
  }
  const thresholds = Array.from({ length: levels }, (_, k) => lo + ((k + 1) / (levels + 1)) * (hi - lo));
  const gen = contours().size([n, m]).thresholds(thresholds);
  const result = gen(Array.from(values));
  result.forEach((c, ci) => {
    const d = c.coordinates
      .map((poly) =>
        poly
          .map(
            (ring) =>
              "M" +
              ring
                .map(([gx, gy]) => {
                  const x = xs.map(box.x0 + (gx / n) * (box.x1 - box.x0));
                  const y = ys.map(box.y0 + (gy / m) * (box.y1 - box.y0));
                  return `${+x.toFixed(2)},${+y.toFixed(2)}`;
                })
                .join("L") +
              "Z",
          )
          .join(""),
      )
      .join("");
    if (d.length > 0) fig.path(d, heatColor(ci / Math.max(1, levels - 1)), "none", 0.8, 0.65);
  });
}

/** Particle trajectory overlay on objective contours (2-D only). */
export function plotTrajectories(particlesPath: string, objectiveName: string): string {
  const data = readParticlesCsv(particlesPath);
  if (data.dim !== 2) throw new Error(`trajectory overlay needs d=2, file has d=${data.dim}`);
  const { fn, minimizer } = objectiveByName(objectiveName);

  let x0 = Infinity, x1 = -Infinity, y0 = Infinity, y1 = -Infinity;
  for (const step of data.positions) {
    for (const p of step) {
      x0 = Math.min(x0, p[0]); x1 = Math.max(x1, p[0]);
      y0 = Math.min(y0, p[1]); y1 = Math.max(y1, p[1]);
    }
  }
  const star = minimizer(2);
  x0 = Math.min(x0, star[0]); x1 = Math.max(x1, star[0]);
  y0 = Math.min(y0, star[1]); y1 = Math.max(y1, star[1]);
  const padX = 0.15 * (x1 - x0 || 1);
  const padY = 0.15 * (y1 - y0 || 1);
  const box = { x0: x0 - padX, x1: x1 + padX, y0: y0 - padY, y1: y1 + padY };

  const fig = new Figure(W, H);
  const xs = new LinearScale(box.x0, box.x1, M.left, W - M.right);
  const ys = new LinearScale(box.y0, box.y1, H - M.bottom, M.top);
  contourPaths(fn, box, xs, ys, fig);

  const nParticles = data.positions[0].length;
  for (let i = 0; i < nParticles; i++) {
    const pts = data.positions.map(
      (step) => [xs.map(step[i][0]), ys.map(step[i][1])] as [number, number],
    );
    fig.polyline(pts, "#555555", 0.6);
  }
  for (let i = 0; i < nParticles; i++) {
    const first = data.positions[0][i];
    const last = data.positions[data.positions.length - 1][i];
    fig.circle(xs.map(first[0]), ys.map(first[1]), 2.4, "#1f77b4", 0.9);
    fig.circle(xs.map(last[0]), ys.map(last[1]), 2.4, "#d62728", 0.9);
  }
  fig.text(xs.map(star[0]), ys.map(star[1]) + 4, "*", 18, "middle");
  fig.axes(xs, ys, { xLabel: "x1", yLabel: "x2", title: `${objectiveName}: particle paths` });
  fig.legend(
    [
      { label: "initial positions", color: "#1f77b4" },
      { label: "final positions", color: "#d62728" },
      { label: "trajectories", color: "#555555" },
    ],
    W - M.right + 10,
    M.top + 10,
  );
  return fig.render();
}

/** Sample the feedback field on a coarse grid (exported so the inwardness
 * of a quadratic field is directly checkable). */
export function feedbackQuiver(
  vf: ValueFunctionFile,
  nGrid = 15,
): { x: number[]; u: number[] }[] {
  const out: { x: number[]; u: number[] }[] = [];
  for (let i = 0; i < nGrid; i++) {
    for (let j = 0; j < nGrid; j++) {
      const x = [
        vf.lower[0] + ((i + 0.5) / nGrid) * (vf.upper[0] - vf.lower[0]),
        vf.lower[1] + ((j + 0.5) / nGrid) * (vf.upper[1] - vf.lower[1]),
      ];
      out.push({ x, u: evalFeedback(vf, x) });
    }
  }
  return out;
}

/** Value-function surface: a curve in 1-D, a heatmap plus feedback quiver in 2-D. */
export function plotValueSurface(coeffsPath: string, quiver = true): string {
  const vf = readValueFunction(coeffsPath);
  if (vf.dim > 2) throw new Error(`surface plots support d <= 2, file has d=${vf.dim}`);
  const fig = new Figure(W, H);

  if (vf.dim === 1) {
    const n = 400;
    const xsample: number[] = [];
    const vsample: number[] = [];
    for (let i = 0; i <= n; i++) {
      const x = vf.lower[0] + (i / n) * (vf.upper[0] - vf.lower[0]);
      xsample.push(x);
      vsample.push(evalValue(vf, [x]));
    }
    const xs = new LinearScale(vf.lower[0], vf.upper[0], M.left, W - M.right);
    const ys = new LinearScale(Math.min(...vsample), Math.max(...vsample), H - M.bottom, M.top);
    fig.polyline(xsample.map((x, i) => [xs.map(x), ys.map(vsample[i])] as [number, number]), PALETTE[0], 1.8);
    fig.axes(xs, ys, { xLabel: "x", yLabel: "V(x)", title: "Value function" });
    fig.legend([{ label: "V(x)", color: PALETTE[0] }], W - M.right + 10, M.top + 10);
    return fig.render();
  }

  const n = 80;
  const xs = new LinearScale(vf.lower[0], vf.upper[0], M.left, W - M.right);
  const ys = new LinearScale(vf.lower[1], vf.upper[1], H - M.bottom, M.top);
  const vals: number[][] = [];
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < n; i++) {
    vals.push([]);
    for (let j = 0; j < n; j++) {
      const x = vf.lower[0] + ((i + 0.5) / n) * (vf.upper[0] - vf.lower[0]);
      const y = vf.lower[1] + ((j + 0.5) / n) * (vf.upper[1] - vf.lower[1]);
      const v = evalValue(vf, [x, y]);
      vals[i].push(v);
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
  }
  const cellW = (xs.map(vf.upper[0]) - xs.map(vf.lower[0])) / n;
  const cellH = (ys.map(vf.upper[1]) - ys.map(vf.lower[1])) / n;
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const px = xs.map(vf.lower[0] + (i / n) * (vf.upper[0] - vf.lower[0]));
      const py = ys.map(vf.lower[1] + ((j + 1) / n) * (vf.upper[1] - vf.lower[1]));
      fig.rect(px, py, Math.abs(cellW) + 0.5, Math.abs(cellH) + 0.5, heatColor((vals[i][j] - lo) / (hi - lo || 1)));
    }
  }
  if (quiver) {
    const samples = feedbackQuiver(vf);
    let uMax = 0;
    for (const s of samples) uMax = Math.max(uMax, Math.hypot(s.u[0], s.u[1]));
    const scale = (0.9 * Math.abs((xs.r1 - xs.r0) / 15)) / (uMax || 1);
    for (const s of samples) {
      fig.arrow(xs.map(s.x[0]), ys.map(s.x[1]), s.u[0] * scale, -s.u[1] * scale, "#222222", 0.8);
    }
  }
  fig.axes(xs, ys, { xLabel: "x1", yLabel: "x2", title: "Value function and feedback field" });
  return fig.render();
}

/** Two panels: the objective against rescaled value-function curves, and the
 * deterministic flow trajectories x(t) from the flow CSVs. */
export function plotFlowComparison(
  flowPaths: string[],
  objectiveName: string,
  coeffPaths: string[] = [],
): string {
  if (flowPaths.length === 0) throw new Error("no flow CSV inputs");
  const flows = flowPaths.map(readFlowCsv);
  if (flows.some((f) => f.dim !== 1)) throw new Error("flow comparison supports 1-D flows");
  const { fn, minimizer } = objectiveByName(objectiveName);
  const vfs = coeffPaths.map(readValueFunction);

  const width = 900;
  const fig = new Figure(width, H);
  const midGap = 70;
  const panelW = (width - M.left - M.right - midGap) / 2;

  // left panel: f and rescaled V_n over the solve domain
  const a = vfs.length ? vfs[0].lower[0] : -3;
  const b = vfs.length ? vfs[0].upper[0] : 3;
  const n = 400;
  const grid = Array.from({ length: n + 1 }, (_, i) => a + (i / n) * (b - a));
  const fCurve = grid.map((x) => fn([x]));
  const fLo = Math.min(...fCurve);
  const fHi = Math.max(...fCurve);
  const xsL = new LinearScale(a, b, M.left, M.left + panelW);
  const ysL = new LinearScale(fLo, fHi, H - M.bottom, M.top);
  fig.polyline(grid.map((x, i) => [xsL.map(x), ysL.map(fCurve[i])] as [number, number]), "#000000", 2);
  const legendL: { label: string; color: string; dash?: string }[] = [{ label: "objective", color: "#000000" }];
  vfs.forEach((vf, i) => {
    const curve = grid.map((x) => evalValue(vf, [x]));
    const lo = Math.min(...curve);
    const hi = Math.max(...curve);
    const scaled = curve.map((v) => fLo + ((v - lo) / (hi - lo || 1)) * (fHi - fLo));
    const color = PALETTE[(i + 1) % PALETTE.length];
    fig.polyline(grid.map((x, k) => [xsL.map(x), ysL.map(scaled[k])] as [number, number]), color, 1.4, "6,3");
    const deg = Math.max(...vf.indices.map((r) => r[0]));
    legendL.push({ label: `surrogate (degree ${deg}, rescaled)`, color, dash: "6,3" });
  });
  fig.axes(xsL, ysL, { xLabel: "x", yLabel: "objective scale", title: "Objective vs value surrogates" });

  // right panel: trajectories x(t)
  const tMax = Math.max(...flows.map((f) => f.t[f.t.length - 1]));
  let xLo = Infinity;
  let xHi = -Infinity;
  for (const f of flows) {
    for (const row of f.x) {
      xLo = Math.min(xLo, row[0]);
      xHi = Math.max(xHi, row[0]);
    }
  }
  const star = minimizer(1)[0];
  xLo = Math.min(xLo, star) - 0.2;
  xHi = Math.max(xHi, star) + 0.2;
  const xR0 = M.left + panelW + midGap;
  const xsR = new LinearScale(0, tMax, xR0, xR0 + panelW);
  const ysR = new LinearScale(xLo, xHi, H - M.bottom, M.top);
  const legendR: { label: string; color: string; dash?: string }[] = [];
  flows.forEach((f, i) => {
    const color = PALETTE[i % PALETTE.length];
    fig.polyline(f.t.map((t, k) => [xsR.map(t), ysR.map(f.x[k][0])] as [number, number]), color, 1.6);
    legendR.push({ label: seriesLabel(f.path).replace(/^flow_/, ""), color });
  });
  fig.line(xsR.map(0), ysR.map(star), xsR.map(tMax), ysR.map(star), "#888888", 1, "2,3");
  legendR.push({ label: "global minimizer", color: "#888888", dash: "2,3" });
  fig.axes(xsR, ysR, { xLabel: "t", yLabel: "x(t)", title: "Flow trajectories" });
  fig.legend(legendL.concat(legendR), width - M.right + 10, M.top + 10);
  return fig.render();
}
