/** CLI: regenerate figures from run artifacts.
 *
 *   node dist/cli.js convergence     --input run1.csv [run2.csv ...] --out fig.svg
 *   node dist/cli.js trajectories    --input particles.csv --objective rastrigin --out fig.svg
 *   node dist/cli.js surface         --coeffs vf.json [--no-quiver] --out fig.svg
 *   node dist/cli.js flow-comparison --input flow1.csv [...] --objective double_well
 *                                    [--coeffs vf1.json ...] --out fig.svg
 *   node dist/cli.js all             --input <artifacts dir> --out <figures dir>
 */
import fs from "node:fs";
import path from "node:path";

import { plotConvergence, plotFlowComparison, plotTrajectories, plotValueSurface } from "./figures.js";

interface Args {
  command: string;
  input: string[];
  coeffs: string[];
  objective: string | null;
  out: string | null;
  quiver: boolean;
}

export function parseArgs(argv: string[]): Args {
  const args: Args = { command: argv[0] ?? "", input: [], coeffs: [], objective: null, out: null, quiver: true };
  let key: string | null = null;
  for (const token of argv.slice(1)) {
    if (token === "--no-quiver") {
      args.quiver = false;
      key = null;
    } else if (token.startsWith("--")) {
      key = token.slice(2);
    } else if (key === "input") {
      args.input.push(token);
    } else if (key === "coeffs") {
      args.coeffs.push(token);
    } else if (key === "objective") {
      args.objective = token;
    } else if (key === "out") {
      args.out = token;
    } else {
      throw new Error(`unexpected argument '${token}'`);
    }
  }
  return args;
}

function writeFigure(out: string, svg: string): void {
  fs.mkdirSync(path.dirname(path.resolve(out)), { recursive: true });
  fs.writeFileSync(out, svg);
  console.log(`wrote ${out}`);
}

function need<T>(value: T | null, what: string): T {
  if (value === null || (Array.isArray(value) && value.length === 0)) {
    throw new Error(`missing ${what}`);
  }
  return value;
}

function find(dir: string, pattern: RegExp): string[] {
  const hits: string[] = [];
  for (const entry of fs.readdirSync(dir, { recursive: true }) as string[]) {
    if (pattern.test(entry)) hits.push(path.join(dir, entry));
  }
  return hits.sort();
}

/** Regenerate every figure kind from the standard artifact layout. */
export function regenerateAll(artifactsDir: string, outDir: string): string[] {
  const written: string[] = [];
  const emit = (name: string, svg: string) => {
    const p = path.join(outDir, name);
    writeFigure(p, svg);
    written.push(p);
  };

  for (const problem of ["rastrigin_d2", "ackley_d2"]) {
    const dir = path.join(artifactsDir, problem);
    if (!fs.existsSync(dir)) continue;
    const objective = problem.split("_")[0];
    const runs = find(dir, /run_.*seed0\.csv$/).filter((p) => !p.includes("_particles"));
    if (runs.length) emit(`convergence_${problem}.svg`, plotConvergence(runs));
    for (const particles of find(dir, /_particles\.csv$/)) {
      const variant = path.basename(particles).split("_").slice(2, -4).join("_");
      emit(`trajectories_${problem}_${variant}.svg`, plotTrajectories(particles, objective));
    }
    for (const coeffs of find(dir, /^hjb_.*\.json$/).filter((p) => !p.endsWith("_report.json"))) {
      emit(`surface_${problem}.svg`, plotValueSurface(coeffs));
    }
  }

  const quad = find(path.join(artifactsDir, "quadratic_d2"), /^hjb_.*\.json$/).filter(
    (p) => !p.endsWith("_report.json"),
  );
  for (const coeffs of quad) emit("surface_quadratic_d2.svg", plotValueSurface(coeffs));

  for (const problem of ["double_well", "nonsmooth"]) {
    const dir = path.join(artifactsDir, problem);
    if (!fs.existsSync(dir)) continue;
    const flows = find(dir, /^flow_.*\.csv$/);
    const coeffs = find(dir, /^hjb_.*\.json$/).filter((p) => !p.endsWith("_report.json"));
    if (flows.length) emit(`flow_comparison_${problem}.svg`, plotFlowComparison(flows, problem, coeffs));
  }
  if (written.length === 0) throw new Error(`no artifacts found under ${artifactsDir}`);
  return written;
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  try {
    switch (args.command) {
      case "convergence":
        writeFigure(need(args.out, "--out"), plotConvergence(need(args.input, "--input")));
        return 0;
      case "trajectories":
        writeFigure(
          need(args.out, "--out"),
          plotTrajectories(need(args.input, "--input")[0], need(args.objective, "--objective")),
        );
        return 0;
      case "surface":
        writeFigure(need(args.out, "--out"), plotValueSurface(need(args.coeffs, "--coeffs")[0], args.quiver));
        return 0;
      case "flow-comparison":
        writeFigure(
          need(args.out, "--out"),
          plotFlowComparison(need(args.input, "--input"), need(args.objective, "--objective"), args.coeffs),
        );
        return 0;
      case "all":
        regenerateAll(need(args.input, "--input")[0], need(args.out, "--out"));
        return 0;
      default:
        console.error(
          "usage: cli.js <convergence|trajectories|surface|flow-comparison|all> [--input ...] " +
            "[--coeffs ...] [--objective name] [--out path]",
        );
        return 2;
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && path.basename(process.argv[1]).startsWith("cli")) {
  process.exit(main(process.argv.slice(2)));
}
