"""Command-line entry point.

Subcommands mirror the offline/online split of the method:

* ``solve-hjb``  assemble and solve the value function, write the
                 coefficient file and a solve report;
* ``run``        one particle run, written as a per-step CSV;
* ``batch``      many runs with consecutive seeds plus a JSON summary;
* ``flow``       deterministic trajectory comparison (feedback vs
                 finite-difference gradient descent).

Outputs land in ``--out``, falling back to the config's ``output_dir``, the
``CCBO_OUT`` environment variable, and finally ``./outputs``.  Every
invocation drops a ``config_snapshot.json`` (resolved config plus its hash)
next to its outputs so any artifact can be traced to an exact configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ccbo.basis import BasisFamily
from ccbo.cbo import (
    SimulationDiverged,
    Variant,
    run,
    run_batch,
    write_particles_csv,
    write_run_csv,
)
from ccbo.config import ConfigError, ExperimentConfig, load_config
from ccbo.galerkin import GalerkinSolveError, IllConditionedBasisError
from ccbo.hjb import (
    FlowDivergedError,
    ValueFunctionFileError,
    feedback_field,
    integrate_flow,
    load_value_function,
    neg_gradient_field,
    save_value_function,
    solve_hjb,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 3


def _out_dir(args, config: ExperimentConfig) -> Path:
    root = args.out or config.output_dir or os.environ.get("CCBO_OUT") or "outputs"
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_snapshot(out: Path, config: ExperimentConfig) -> None:
    doc = {"config_hash": config.config_hash(), "config": config.to_dict()}
    (out / "config_snapshot.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _trunc_tag(config: ExperimentConfig) -> str:
    short = {"total_degree": "td", "hyperbolic_cross": "hc"}[config.basis.truncation]
    return f"{config.basis.family}_{short}{config.basis.degree}"


def coefficient_path(out: Path, config: ExperimentConfig) -> Path:
    return out / (f"hjb_{config.objective.name}_d{config.objective.dim}_"
                  f"{_trunc_tag(config)}.json")


def _load_coefficients(args, config: ExperimentConfig, out: Path):
    explicit = getattr(args, "coeffs", None) or config.coefficient_file
    path = Path(explicit) if explicit else coefficient_path(out, config)
    if not path.exists():
        raise ConfigError(
            f"coefficient file {path} not found; run `ccbo solve-hjb` first "
            "or point --coeffs at an existing file")
    vfa = load_value_function(path)
    if vfa.basis.dim != config.objective.dim:
        raise ConfigError(
            f"coefficient file {path} was solved in dimension {vfa.basis.dim}, "
            f"but the experiment objective has dimension {config.objective.dim}")
    return vfa


def cmd_solve_hjb(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args, config)
    _write_snapshot(out, config)
    basis = config.build_basis()
    objective = config.build_objective()
    vfa, report = solve_hjb(basis, objective, config.hjb_config())
    path = coefficient_path(out, config)
    save_value_function(vfa, path, config_hash=config.config_hash())
    report_doc = {
        "config_hash": config.config_hash(),
        "basis_size": basis.size,
        "mu_schedule": report.mu_schedule,
        "stages": [
            {"mu": s.mu, "iterations": s.iterations,
             "initial_change": s.initial_change, "final_change": s.final_change,
             "residual_norm": s.residual_norm}
            for s in report.stages
        ],
        "max_monotonicity_violation": report.max_monotonicity_violation(),
    }
    report_path = path.with_name(path.stem + "_report.json")
    report_path.write_text(json.dumps(report_doc, indent=2, sort_keys=True) + "\n")
    total_iters = sum(s.iterations for s in report.stages)
    print(f"solved {objective.name} d={objective.dim} on a basis of {basis.size} "
          f"functions: {len(report.stages)} discount stages, {total_iters} iterations")
    print(f"wrote {path}")
    print(f"wrote {report_path}")
    return 0


def _run_stem(config: ExperimentConfig, seed: int) -> str:
    return (f"run_{config.objective.name}_{config.variant}_d{config.objective.dim}"
            f"_N{config.n_particles}_seed{seed}")


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    out = _out_dir(args, config)
    _write_snapshot(out, config)
    objective = config.build_objective()
    vfa = None
    if Variant(config.variant) != Variant.STANDARD:
        vfa = _load_coefficients(args, config, out)
    record = run(config.cbo_config(), objective, vfa,
                 record_particles=args.save_particles)
    stem = _run_stem(config, config.seed)
    csv_path = out / f"{stem}.csv"
    write_run_csv(record, csv_path)
    print(f"wrote {csv_path}")
    if args.save_particles:
        particles_path = out / f"{stem}_particles.csv"
        write_particles_csv(record, particles_path)
        print(f"wrote {particles_path}")
    print(f"final: t={record.t[-1]:g} variance={record.variance[-1]:.6e} "
          f"w2sq={record.w2sq[-1]:.6e}")
    return 0


def cmd_batch(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    out_root = _out_dir(args, config)
    batch_dir = out_root / (f"batch_{config.objective.name}_{config.variant}_"
                            f"d{config.objective.dim}_N{config.n_particles}_"
                            f"seed{config.seed}")
    batch_dir.mkdir(parents=True, exist_ok=True)
    _write_snapshot(batch_dir, config)
    objective = config.build_objective()
    vfa = None
    if Variant(config.variant) != Variant.STANDARD:
        vfa = _load_coefficients(args, config, out_root)
    summary = run_batch(config.cbo_config(), objective, vfa,
                        n_runs=config.n_runs, base_seed=config.seed,
                        jobs=args.jobs, success_threshold=config.success_threshold)
    for seed, rec in zip(summary.seeds, summary.records):
        if rec is not None:
            write_run_csv(rec, batch_dir / f"{_run_stem(config, seed)}.csv")
    doc = summary.to_dict()
    doc["config_hash"] = config.config_hash()
    (batch_dir / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {batch_dir / 'summary.json'}")
    print(f"{summary.n_runs} runs ({summary.n_failed} failed): "
          f"mean final w2sq = {summary.mean_final_w2sq:.6e}, "
          f"median = {summary.median_final_w2sq:.6e}, "
          f"success rate = {summary.success_rate:.2f}")
    return 0


def cmd_flow(args) -> int:
    config = load_config(args.config)
    if config.flow is None:
        raise ConfigError("config has no `flow` section")
    out = _out_dir(args, config)
    _write_snapshot(out, config)
    objective = config.build_objective()
    spec = config.flow
    status = 0
    for field_name in spec.fields:
        if field_name == "feedback":
            vfa = _load_coefficients(args, config, out)
            field = feedback_field(vfa)
        elif field_name == "neg_gradient":
            field = neg_gradient_field(objective, fd_step=spec.fd_step)
        else:
            raise ConfigError(f"unknown flow field {field_name!r}")
        path = out / f"flow_{config.objective.name}_{_trunc_tag(config)}_{field_name}.csv"
        header = ["t"] + [f"x_{p + 1}" for p in range(objective.dim)] + ["f"]
        try:
            times, traj = integrate_flow(field, np.asarray(spec.x0), spec.dt, spec.t_final)
            rows = [[repr(float(t))] + [repr(float(v)) for v in x]
                    + [repr(float(objective(x)))]
                    for t, x in zip(times, traj)]
            trailer = None
        except FlowDivergedError as exc:
            rows = []
            trailer = f"# aborted at step {exc.step}: {exc}"
            status = RUNTIME_ERROR
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
            if trailer:
                fh.write(trailer + "\n")
        print(f"wrote {path}")
        if rows:
            print(f"  {field_name}: endpoint x = "
                  f"{np.array2string(traj[-1], precision=5)}, f = {float(objective(traj[-1])):.6f}")
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccbo",
        description="Consensus-based optimization with a value-function feedback drift")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--out", default=None, help="output directory")

    p_solve = sub.add_parser("solve-hjb", help="offline value-function solve")
    common(p_solve)

    p_run = sub.add_parser("run", help="single particle run -> per-step CSV")
    common(p_run)
    p_run.add_argument("--seed", type=int, default=None, help="override the run seed")
    p_run.add_argument("--coeffs", default=None, help="coefficient file path")
    p_run.add_argument("--save-particles", action="store_true",
                       help="also write per-particle trajectories")

    p_batch = sub.add_parser("batch", help="many runs with consecutive seeds")
    common(p_batch)
    p_batch.add_argument("--seed", type=int, default=None, help="override the base seed")
    p_batch.add_argument("--coeffs", default=None, help="coefficient file path")
    p_batch.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p_flow = sub.add_parser("flow", help="deterministic flow trajectories")
    common(p_flow)
    p_flow.add_argument("--coeffs", default=None, help="coefficient file path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"solve-hjb": cmd_solve_hjb, "run": cmd_run,
                "batch": cmd_batch, "flow": cmd_flow}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueFunctionFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (SimulationDiverged, GalerkinSolveError, IllConditionedBasisError,
            FlowDivergedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
