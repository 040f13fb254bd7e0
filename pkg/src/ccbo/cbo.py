"""Interacting-particle search with an optional value-function drift.

Particles follow an Euler-Maruyama discretization of

    dX_i = [ -lam_i (X_i - v) + beta_i u(X_i) ] dt
           + sigma Diag(X_i - v) dW_i,

where ``v`` is the softmin-weighted consensus point of the ensemble,
``u`` is the feedback law of a solved value function, and the two drift
gains switch per particle through step gates:

* ``standard``            lam_i = lam (always on), beta_i = 0;
* ``controlled``          lam_i = lam * H(f(X_i) - f(v)),
                          beta_i = beta * H(f(X_i) - fapprox(X_i));
* ``controlled_ungated``  lam_i = lam, beta_i = beta.

``H`` is the Heaviside step with ``H(0) = 1``, and ``fapprox`` is the
projection of the objective onto the value-function basis.  The consensus
point is computed once per step from pre-step positions.

Runs draw all randomness from a counter-based generator (Philox) keyed by
the run seed, with the noise pre-generated in one block, so every run is
bit-reproducible per backend and batch members are independent.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from ccbo import _kernels
from ccbo._kernels import numpy_impl
from ccbo.hjb import ValueFunctionApprox
from ccbo.metrics import ensemble_variance, w2_to_dirac
from ccbo.objectives import Objective

__all__ = [
    "Variant",
    "InitSpec",
    "CBOConfig",
    "ParticleEnsemble",
    "RunRecord",
    "BatchSummary",
    "SimulationDiverged",
    "consensus_point",
    "init_positions",
    "em_step",
    "run",
    "run_batch",
    "write_run_csv",
    "write_particles_csv",
    "run_csv_header",
]

DEFAULT_SUCCESS_THRESHOLD = 0.25 ** 2  # on final squared distance


class Variant(str, Enum):
    STANDARD = "standard"
    CONTROLLED = "controlled"
    CONTROLLED_UNGATED = "controlled_ungated"


_VARIANT_CODES = {
    Variant.STANDARD: _kernels.VARIANT_STANDARD,
    Variant.CONTROLLED: _kernels.VARIANT_CONTROLLED,
    Variant.CONTROLLED_UNGATED: _kernels.VARIANT_CONTROLLED_UNGATED,
}


class SimulationDiverged(RuntimeError):
    def __init__(self, step: int, positions: np.ndarray):
        bad = int(np.count_nonzero(~np.isfinite(positions)))
        super().__init__(f"non-finite particle positions after step {step} "
                         f"({bad} bad entries)")
        self.step = step
        self.positions = positions


@dataclass(frozen=True)
class InitSpec:
    """Initial particle placement: i.i.d. uniform on a box, or the first N
    points of a near-square lattice over it (row-major order)."""

    kind: str  # "uniform_box" | "equidistant_grid"
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("uniform_box", "equidistant_grid"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("init box requires lower_j < upper_j")

    @property
    def dim(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class CBOConfig:
    n_particles: int = 50
    lam: float = 1.0
    beta: float = 1.0
    sigma: float = 0.7
    alpha: float = 40.0
    dt: float = 0.1
    t_final: float = 10.0
    variant: Variant = Variant.CONTROLLED
    init: InitSpec = InitSpec("uniform_box", (-1.0, -1.0), (-0.5, -0.5))
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.lam < 0 or self.beta < 0 or self.sigma < 0:
            raise ValueError("lam, beta and sigma must be nonnegative")
        if self.alpha <= 0 or self.dt <= 0 or self.t_final < 0:
            raise ValueError("alpha and dt must be positive, t_final nonnegative")

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t_final / self.dt))


@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    t: float
    rng: np.random.Generator

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass
class RunRecord:
    """Per-step time series of one run plus its final state."""

    t: np.ndarray
    consensus: np.ndarray
    variance: np.ndarray
    w2sq: np.ndarray
    lambda_gate_count: np.ndarray
    beta_gate_count: np.ndarray
    final_positions: np.ndarray
    seed: int
    variant: Variant
    objective_name: str
    particles: np.ndarray | None = None

    @property
    def final_w2sq(self) -> float:
        return float(self.w2sq[-1])

    @property
    def n_steps(self) -> int:
        return len(self.t) - 1


@dataclass
class BatchSummary:
    n_runs: int
    n_failed: int
    base_seed: int
    success_threshold: float
    seeds: list[int]
    final_w2sq: list[float]        # per completed run, ordered by seed
    successes: list[bool]          # per run (failed runs count as failures)
    records: list["RunRecord | None"]
    mean_final_w2sq: float
    median_final_w2sq: float
    std_final_w2sq: float
    min_final_w2sq: float
    max_final_w2sq: float
    success_rate: float

    def to_dict(self) -> dict:
        return {
            "format": "controlled-cbo-batch-summary",
            "format_version": 1,
            "n_runs": self.n_runs,
            "n_failed": self.n_failed,
            "base_seed": self.base_seed,
            "success_threshold_w2sq": self.success_threshold,
            "success_rate": self.success_rate,
            "final_w2sq": {
                "mean": self.mean_final_w2sq,
                "median": self.median_final_w2sq,
                "std": self.std_final_w2sq,
                "min": self.min_final_w2sq,
                "max": self.max_final_w2sq,
            },
            "per_run": [
                {"seed": s, "final_w2sq": w, "success": ok}
                for s, w, ok in zip(self.seeds,
                                    self._per_run_w2(),
                                    self.successes)
            ],
        }

    def _per_run_w2(self):
        out = []
        it = iter(self.final_w2sq)
        for rec in self.records:
            out.append(next(it) if rec is not None else None)
        return out


def consensus_point(positions: np.ndarray, f, alpha: float) -> np.ndarray:
    """Softmin-weighted average of the particle positions.

    Weights are ``exp(-alpha (f(X_i) - min_j f(X_j)))``; subtracting the
    minimum leaves the average mathematically unchanged and keeps the
    exponentials representable at large ``alpha``.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    fvals = np.asarray(f(positions), dtype=np.float64)
    if not np.all(np.isfinite(fvals)):
        raise ValueError("objective returned non-finite values")
    return numpy_impl.consensus(positions, fvals, alpha)


def init_positions(init: InitSpec, n_particles: int, rng: np.random.Generator) -> np.ndarray:
    lo = np.asarray(init.lower)
    hi = np.asarray(init.upper)
    d = init.dim
    if init.kind == "uniform_box":
        return rng.uniform(lo, hi, size=(n_particles, d))
    # equidistant grid: smallest m with m^d >= N, first N lattice points row-major
    m = max(1, round(n_particles ** (1.0 / d)))
    while m ** d < n_particles:
        m += 1
    while m > 1 and (m - 1) ** d >= n_particles:
        m -= 1
    axes = [np.linspace(lo[p], hi[p], m) for p in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.stack([g.ravel() for g in mesh], axis=1)
    return lattice[:n_particles].copy()


def _basis_args(vfa: ValueFunctionApprox | None, dim: int):
    if vfa is None:
        return (0, np.zeros((0, dim), dtype=np.int64), np.zeros(dim), np.ones(dim),
                np.zeros(0), 1.0)
    basis = vfa.basis
    family_code = _kernels.FAMILY_CODES[basis.family.value]
    return (family_code, basis.exponents, basis.domain.lower_array,
            basis.domain.upper_array, np.asarray(vfa.coeffs, dtype=np.float64),
            float(vfa.epsilon))


def _validate_run_inputs(config: CBOConfig, objective: Objective,
                         vfa: ValueFunctionApprox | None,
                         f_approx_coeffs: np.ndarray | None) -> np.ndarray:
    if config.init.dim != objective.dim:
        raise ValueError(f"init box dimension {config.init.dim} != objective "
                         f"dimension {objective.dim}")
    if config.variant != Variant.STANDARD:
        if vfa is None:
            raise ValueError(f"variant {config.variant.value} requires a value function")
        if vfa.basis.dim != objective.dim:
            raise ValueError(f"value function dimension {vfa.basis.dim} != "
                             f"objective dimension {objective.dim}")
    a = f_approx_coeffs
    if config.variant == Variant.CONTROLLED:
        if a is None and vfa is not None:
            a = vfa.objective_projection
        if a is None:
            raise ValueError("controlled variant requires the projected objective "
                             "(objective_projection on the value function)")
        a = np.asarray(a, dtype=np.float64)
        if a.shape != (vfa.basis.size,):
            raise ValueError("projected-objective coefficients do not match the basis")
    else:
        a = np.zeros(0 if vfa is None else vfa.basis.size)
    return a


def em_step(ensemble: ParticleEnsemble, config: CBOConfig, objective: Objective,
            vfa: ValueFunctionApprox | None = None,
            f_approx_coeffs: np.ndarray | None = None) -> ParticleEnsemble:
    """Advance one Euler-Maruyama step (reference implementation).

    Draws one fresh standard-normal vector per particle from the ensemble's
    generator; the step arithmetic is shared with the run kernels.
    """
    a = _validate_run_inputs(config, objective, vfa, f_approx_coeffs)
    X = ensemble.positions
    noise = ensemble.rng.standard_normal(X.shape)[None, :, :]
    family_code, exps, lo, hi, coeffs, eps = _basis_args(vfa, objective.dim)
    x_star = objective.minimizer_array
    records, final, _, status, bad_step = numpy_impl.simulate(
        X, noise, objective, _VARIANT_CODES[config.variant],
        config.lam, config.beta, config.sigma, config.alpha, config.dt,
        family_code, exps, lo, hi, coeffs, eps, a,
        x_star if x_star is not None else np.zeros(objective.dim),
        x_star is not None, False)
    if status != numpy_impl.STATUS_OK:
        raise SimulationDiverged(bad_step, final)
    return ParticleEnsemble(positions=final, t=ensemble.t + config.dt, rng=ensemble.rng)


def run(config: CBOConfig, objective: Objective,
        vfa: ValueFunctionApprox | None = None,
        f_approx_coeffs: np.ndarray | None = None,
        record_particles: bool = False) -> RunRecord:
    """Simulate one run of ``ceil(t_final / dt)`` steps.

    Emits one record per step including the initial state; deterministic
    for a fixed seed and backend.
    """
    a = _validate_run_inputs(config, objective, vfa, f_approx_coeffs)
    d = objective.dim
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    X0 = init_positions(config.init, config.n_particles, rng)
    noise = rng.standard_normal((config.n_steps, config.n_particles, d))

    family_code, exps, lo, hi, coeffs, eps = _basis_args(vfa, d)
    x_star = objective.minimizer_array
    has_xstar = x_star is not None
    if x_star is None:
        x_star = np.zeros(d)

    impl = _kernels.active()
    if impl.NAME == "numba" and objective.kernel_id >= 0:
        params = np.asarray(objective.kernel_params, dtype=np.float64)
        records, final, particles, status, bad_step = impl.simulate(
            X0, noise, objective.kernel_id, params, _VARIANT_CODES[config.variant],
            config.lam, config.beta, config.sigma, config.alpha, config.dt,
            family_code, exps, lo, hi, coeffs, eps, a, x_star, has_xstar,
            record_particles)
    else:
        records, final, particles, status, bad_step = numpy_impl.simulate(
            X0, noise, objective, _VARIANT_CODES[config.variant],
            config.lam, config.beta, config.sigma, config.alpha, config.dt,
            family_code, exps, lo, hi, coeffs, eps, a, x_star, has_xstar,
            record_particles)
    if status != numpy_impl.STATUS_OK:
        raise SimulationDiverged(bad_step, final)

    return RunRecord(
        t=records[:, 0].copy(),
        consensus=records[:, 1:1 + d].copy(),
        variance=records[:, 1 + d].copy(),
        w2sq=records[:, 2 + d].copy(),
        lambda_gate_count=records[:, 3 + d].astype(np.int64),
        beta_gate_count=records[:, 4 + d].astype(np.int64),
        final_positions=final,
        seed=config.seed,
        variant=config.variant,
        objective_name=objective.name,
        particles=particles if record_particles else None,
    )


def _batch_worker(args):
    config, objective, vfa, f_approx_coeffs, seed = args
    cfg = replace(config, seed=seed)
    try:
        return seed, run(cfg, objective, vfa, f_approx_coeffs), None
    except SimulationDiverged as exc:
        return seed, None, str(exc)


def run_batch(config: CBOConfig, objective: Objective,
              vfa: ValueFunctionApprox | None = None,
              f_approx_coeffs: np.ndarray | None = None,
              n_runs: int = 100, base_seed: int | None = None, jobs: int = 1,
              success_threshold: float = DEFAULT_SUCCESS_THRESHOLD) -> BatchSummary:
    """Run ``n_runs`` independent realizations with seeds ``base_seed + k``.

    Summary statistics cover completed runs; diverged runs are reported in
    ``n_failed`` and count as failures for the success rate.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if base_seed is None:
        base_seed = config.seed
    tasks = [(config, objective, vfa, f_approx_coeffs, base_seed + k)
             for k in range(n_runs)]
    results: list[tuple[int, RunRecord | None, str | None]] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_batch_worker, tasks))
    else:
        results = [_batch_worker(t) for t in tasks]

    seeds = [r[0] for r in results]
    records = [r[1] for r in results]
    finals = [rec.final_w2sq for rec in records if rec is not None]
    successes = [(rec is not None and rec.final_w2sq < success_threshold)
                 for rec in records]
    n_failed = sum(1 for rec in records if rec is None)
    finals_arr = np.asarray(finals) if finals else np.asarray([np.nan])
    return BatchSummary(
        n_runs=n_runs,
        n_failed=n_failed,
        base_seed=base_seed,
        success_threshold=success_threshold,
        seeds=seeds,
        final_w2sq=finals,
        successes=successes,
        records=records,
        mean_final_w2sq=float(finals_arr.mean()),
        median_final_w2sq=float(np.median(finals_arr)),
        std_final_w2sq=float(finals_arr.std()),
        min_final_w2sq=float(finals_arr.min()),
        max_final_w2sq=float(finals_arr.max()),
        success_rate=float(np.mean(successes)) if successes else 0.0,
    )


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def run_csv_header(dim: int) -> list[str]:
    return (["step", "t"] + [f"v_{p + 1}" for p in range(dim)]
            + ["variance", "w2sq", "lambda_gate_count", "beta_gate_count"])


def write_run_csv(record: RunRecord, path) -> None:
    """One row per step: step,t,v_1..v_d,variance,w2sq,lambda_gate_count,beta_gate_count."""
    d = record.consensus.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(run_csv_header(d))
        for k in range(len(record.t)):
            row = [k, repr(float(record.t[k]))]
            row += [repr(float(v)) for v in record.consensus[k]]
            row += [repr(float(record.variance[k])), repr(float(record.w2sq[k])),
                    int(record.lambda_gate_count[k]), int(record.beta_gate_count[k])]
            writer.writerow(row)


def write_particles_csv(record: RunRecord, path) -> None:
    """Companion trajectory file: step,t,particle,x_1..x_d (needs record_particles)."""
    if record.particles is None:
        raise ValueError("run was not recorded with record_particles=True")
    steps, n, d = record.particles.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "particle"] + [f"x_{p + 1}" for p in range(d)])
        for k in range(steps):
            t_repr = repr(float(record.t[k]))
            for i in range(n):
                writer.writerow([k, t_repr, i]
                                + [repr(float(x)) for x in record.particles[k, i]])
