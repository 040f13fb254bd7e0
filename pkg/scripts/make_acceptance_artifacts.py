"""Regenerate the checked-in artifacts under artifacts/acceptance/.

Everything goes through the command-line interface, so these files double as
an end-to-end exercise of the external surfaces (config files in, coefficient
files / CSVs / summaries out).  The plotting package consumes only this
directory.

Run from the repo root:
    python3 scripts/make_acceptance_artifacts.py
"""
import shutil
import sys
from pathlib import Path

from ccbo.cli import main

ROOT = Path(__file__).resolve().parent.parent
EXP = ROOT / "experiments"
OUT = ROOT / "artifacts" / "acceptance"


def cli(*args) -> None:
    rc = main([str(a) for a in args])
    if rc != 0:
        sys.exit(f"command failed ({rc}): {' '.join(map(str, args))}")


def run_config(name, out, *, solve=True, batch=False, single_run=True,
               particles=False, flow=False):
    cfg = EXP / name
    if solve:
        cli("solve-hjb", "--config", cfg, "--out", out)
    if single_run:
        args = ["run", "--config", cfg, "--out", out]
        if particles:
            args.append("--save-particles")
        cli(*args)
    if batch:
        cli("batch", "--config", cfg, "--out", out)
    if flow:
        cli("flow", "--config", cfg, "--out", out)


def prune_batch_runs(keep_seeds=(0, 1, 2)):
    # batch summaries carry every run's numbers; keep only a few per-run
    # CSVs as curve exemplars so the artifact tree stays small
    for batch_dir in OUT.rglob("batch_*"):
        if not batch_dir.is_dir():
            continue
        for csv_file in batch_dir.glob("run_*.csv"):
            seed = int(csv_file.stem.rsplit("seed", 1)[1])
            if seed not in keep_seeds:
                csv_file.unlink()


def main_script():
    if OUT.exists():
        shutil.rmtree(OUT)
    OUT.mkdir(parents=True)

    # convergence curves + trajectory overlays + batch summaries (2-D Rastrigin)
    ras = OUT / "rastrigin_d2"
    run_config("rastrigin_d2_table.json", ras, batch=True)
    run_config("rastrigin_d2_gated_unfavorable.json", ras, solve=False, particles=True)
    run_config("rastrigin_d2_standard_unfavorable.json", ras, solve=False,
               particles=True, batch=True)
    run_config("rastrigin_d2_favorable.json", ras, solve=False)
    run_config("rastrigin_d2_standard_favorable.json", ras, solve=False)

    # 2-D Ackley with Monte-Carlo loads
    ack = OUT / "ackley_d2"
    run_config("ackley_d2_table.json", ack, batch=True)
    run_config("ackley_d2_favorable_grid.json", ack, solve=False, particles=True)
    run_config("ackley_d2_standard_favorable_grid.json", ack, solve=False, particles=True)

    # value surfaces: quadratic coefficient file for the quiver direction check
    run_config("quadratic_d2.json", OUT / "quadratic_d2", single_run=False)

    # 1-D flow comparisons across degrees
    for M in (2, 4, 6, 8):
        run_config(f"double_well_flow_M{M}.json", OUT / "double_well",
                   single_run=False, flow=True)
    run_config("nonsmooth_flow_M8.json", OUT / "nonsmooth",
               single_run=False, flow=True)

    prune_batch_runs()
    n = sum(1 for _ in OUT.rglob("*") if _.is_file())
    print(f"\nwrote {n} artifact files under {OUT}")


if __name__ == "__main__":
    main_script()
