"""Successive approximation for the discounted value function and its feedback law.

The discounted stationary equation is linearized by freezing the control:
given coefficients ``c`` of the previous value iterate (control
``u_c = -(1/eps) grad(Phi)^T c``), the Galerkin projection of the frozen
equation is the linear system

    (-mu * mass + A(c)) c_next = -(F + E(c)),

with ``A`` the advection matrix of ``grad(V) . u_c``, ``F`` the objective
load, and ``E`` the control-energy load.  Iterating to a fixed point solves
one discount level; an outer continuation loop shrinks the discount factor
geometrically, warm-starting each level, so the zero control is an
admissible start at the first (largest) level.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np

from ccbo.basis import (
    BasisFamily,
    BoxDomain,
    HyperbolicCross,
    MultiIndexBasis,
    TotalDegree,
    eval_basis,
    eval_basis_gradient,
)
from ccbo.galerkin import (
    GalerkinSolveError,
    GalerkinWorkspace,
    assemble_load_montecarlo,
    assemble_load_separable,
)
from ccbo.objectives import Objective

__all__ = [
    "HJBConfig",
    "MonteCarloLoad",
    "ValueFunctionApprox",
    "StageReport",
    "SolveReport",
    "NonConvergenceError",
    "DivergenceError",
    "FlowDivergedError",
    "ValueFunctionFileError",
    "value_update_step",
    "successive_approximation",
    "discount_continuation",
    "assemble_objective_load",
    "solve_hjb",
    "integrate_flow",
    "feedback_field",
    "neg_gradient_field",
    "save_value_function",
    "load_value_function",
]

FILE_FORMAT = "controlled-cbo-value-function"
FILE_VERSION = 1
LEGENDRE_NORMALIZATION = "classical P_r with P_r(1)=1, affinely mapped from [-1,1]"

N_MONITOR_POINTS = 50
_MONITOR_SEED = 181818

_GROWTH_LIMIT = 10.0
FLOW_DIVERGENCE_RADIUS = 1e6


class NonConvergenceError(RuntimeError):
    def __init__(self, max_iters: int, last_change: float, mu: float):
        super().__init__(
            f"no convergence after {max_iters} iterations at discount {mu:g} "
            f"(last relative change {last_change:.3e})")
        self.max_iters = max_iters
        self.last_change = last_change
        self.mu = mu


class DivergenceError(RuntimeError):
    def __init__(self, mu: float, iteration: int, norm_before: float, norm_after: float):
        super().__init__(
            f"coefficient norm grew from {norm_before:.3e} to {norm_after:.3e} "
            f"in one update (discount {mu:g}, iteration {iteration})")
        self.mu = mu
        self.iteration = iteration


class FlowDivergedError(RuntimeError):
    def __init__(self, step: int, position: np.ndarray):
        super().__init__(f"flow diverged at step {step}, |x| = {np.linalg.norm(position):.3e}")
        self.step = step
        self.position = position


class ValueFunctionFileError(RuntimeError):
    """Base class for coefficient-file problems."""


class VersionMismatchError(ValueFunctionFileError):
    pass


class MalformedFileError(ValueFunctionFileError):
    pass


class BasisMismatchError(ValueFunctionFileError):
    pass


@dataclass(frozen=True)
class MonteCarloLoad:
    n_samples: int = 1_000_000
    seed: int = 7_041_776


@dataclass
class HJBConfig:
    """Solver parameters; defaults follow the benchmark experiments."""

    mu: float = 0.1
    epsilon: float = 0.1
    tol: float = 1e-8
    max_inner_iters: int = 200
    theta: float = 0.5
    tol_mu: float = 0.01
    load_mode: Literal["auto", "separable"] | MonteCarloLoad = "auto"

    def __post_init__(self):
        if self.mu <= 0 or self.epsilon <= 0 or self.tol <= 0 or self.tol_mu <= 0:
            raise ValueError("mu, epsilon, tol and tol_mu must be positive")
        if not (0.0 < self.theta < 1.0):
            raise ValueError("theta must lie in (0, 1)")
        if self.max_inner_iters < 1:
            raise ValueError("max_inner_iters must be >= 1")


@dataclass
class StageReport:
    mu: float
    iterations: int
    initial_change: float
    final_change: float
    residual_norm: float
    monitored_values: np.ndarray  # (iterations + 1, N_MONITOR_POINTS)
    relaxation: float = 1.0       # update fraction; < 1 when the damped rescue ran


@dataclass
class SolveReport:
    stages: list[StageReport]
    monitor_points: np.ndarray

    @property
    def mu_schedule(self) -> list[float]:
        return [s.mu for s in self.stages]

    def max_monotonicity_violation(self) -> float:
        """Largest pointwise increase of monitored values across solved iterates.

        Row 0 of each stage is the (zero or warm-started) initial guess, not a
        solution of the frozen-control equation, so the comparison starts at
        the first solved iterate.  Exact iterates decrease pointwise; Galerkin
        iterates may violate that by discretization error, so this is a
        logged diagnostic, not an invariant.
        """
        worst = 0.0
        for st in self.stages:
            if st.monitored_values.shape[0] >= 3:
                inc = np.diff(st.monitored_values[1:], axis=0).max()
                worst = max(worst, float(inc))
        return worst


@dataclass
class ValueFunctionApprox:
    """Polynomial value function with its baked-in feedback scaling.

    ``objective_projection`` carries the basis expansion of the objective's
    projection, used as the reference for the gated particle drift.
    """

    basis: MultiIndexBasis
    coeffs: np.ndarray
    epsilon: float
    objective_projection: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def value(self, x) -> np.ndarray:
        return eval_basis(self.basis, x) @ self.coeffs

    def feedback(self, x) -> np.ndarray:
        """Feedback law ``-(1/eps) * sum_i c_i grad(phi_i)``."""
        grad = eval_basis_gradient(self.basis, x)
        return -(1.0 / self.epsilon) * np.tensordot(grad, self.coeffs, axes=([grad.ndim - 2], [0]))

    def approx_objective(self, x) -> np.ndarray:
        if self.objective_projection is None:
            raise ValueError("no objective projection stored on this value function")
        return eval_basis(self.basis, x) @ self.objective_projection


def value_update_step(ws: GalerkinWorkspace, load: np.ndarray, c_prev: np.ndarray,
                      mu: float, epsilon: float) -> np.ndarray:
    """One frozen-control update: solve ``(-mu*mass + A(c_prev)) c = -(F + E(c_prev))``."""
    A = ws.advection_matrix(c_prev, epsilon)
    rhs = -(load + ws.control_energy_load(c_prev, epsilon))
    try:
        return np.linalg.solve(-mu * ws.mass + A, rhs)
    except np.linalg.LinAlgError as exc:
        raise GalerkinSolveError(f"value update failed at discount {mu:g}: {exc}") from exc


def _monitor_points(domain: BoxDomain) -> np.ndarray:
    rng = np.random.default_rng(_MONITOR_SEED)
    return rng.uniform(domain.lower_array, domain.upper_array,
                       size=(N_MONITOR_POINTS, domain.dim))


def _fixed_discount_loop(ws: GalerkinWorkspace, load: np.ndarray, mu: float,
                         config: HJBConfig, c_init: np.ndarray, phi_mon: np.ndarray,
                         relaxation: float) -> tuple[np.ndarray, StageReport]:
    c = c_init.copy()
    monitored = [phi_mon @ c]
    initial_change = np.nan
    change = np.inf
    # damped retries ride out the transient spikes of a limit cycle, so they
    # get a wider growth guard and a longer budget
    growth_limit = _GROWTH_LIMIT if relaxation == 1.0 else 1e3
    budget = config.max_inner_iters if relaxation == 1.0 else 4 * config.max_inner_iters
    for it in range(1, budget + 1):
        c_solve = value_update_step(ws, load, c, mu, config.epsilon)
        c_next = c_solve if relaxation == 1.0 else (1.0 - relaxation) * c + relaxation * c_solve
        norm_before = float(np.linalg.norm(c))
        norm_after = float(np.linalg.norm(c_next))
        if norm_before > 0.0 and norm_after > growth_limit * norm_before:
            raise DivergenceError(mu, it, norm_before, norm_after)
        change = norm_after if norm_before == 0.0 else \
            float(np.linalg.norm(c_next - c)) / max(1.0, norm_before)
        if it == 1:
            initial_change = change
        c = c_next
        monitored.append(phi_mon @ c)
        if change <= config.tol:
            # self-consistent Galerkin residual at the fixed point
            residual = ((-mu * ws.mass + ws.advection_matrix(c, config.epsilon)) @ c
                        + load + ws.control_energy_load(c, config.epsilon))
            report = StageReport(mu=mu, iterations=it, initial_change=initial_change,
                                 final_change=change,
                                 residual_norm=float(np.linalg.norm(residual, ord=np.inf)),
                                 monitored_values=np.asarray(monitored),
                                 relaxation=relaxation)
            return c, report
    raise NonConvergenceError(budget, change, mu)


def successive_approximation(ws: GalerkinWorkspace, load: np.ndarray, mu: float,
                             config: HJBConfig, c_init: np.ndarray | None = None,
                             monitor: np.ndarray | None = None
                             ) -> tuple[np.ndarray, StageReport]:
    """Iterate frozen-control updates at a fixed discount until the control
    stops changing.

    The stopping norm is the coefficient-space surrogate
    ``|c' - c|_2 / max(1, |c|_2)``.  The plain update can enter a limit
    cycle in narrow discount windows (it is a Newton iteration on a
    quadratic system); when it fails, the stage is retried with damped
    updates, recorded through the report's ``relaxation`` field.  Raises
    NonConvergenceError when every attempt runs out of iterations and
    DivergenceError when a single update grows the coefficients tenfold.
    """
    c0 = np.zeros(ws.size) if c_init is None else np.asarray(c_init, dtype=np.float64).copy()
    if monitor is None:
        monitor = _monitor_points(ws.basis.domain)
    phi_mon = eval_basis(ws.basis, monitor)

    last_error: Exception | None = None
    for relaxation in (1.0, 0.5, 0.25):
        try:
            return _fixed_discount_loop(ws, load, mu, config, c0, phi_mon, relaxation)
        except (NonConvergenceError, DivergenceError) as exc:
            last_error = exc
    raise last_error


def discount_continuation(ws: GalerkinWorkspace, load: np.ndarray, config: HJBConfig,
                          c_init: np.ndarray | None = None
                          ) -> tuple[np.ndarray, SolveReport]:
    """Geometric discount continuation, warm-starting each level.

    The first level always runs (even when ``mu <= tol_mu`` already, in which
    case this degenerates to a single fixed-discount solve); subsequent
    levels run while ``theta * mu`` stays above ``tol_mu``.
    """
    monitor = _monitor_points(ws.basis.domain)
    c = np.zeros(ws.size) if c_init is None else np.asarray(c_init, dtype=np.float64).copy()
    stages: list[StageReport] = []
    mu = config.mu
    while True:
        try:
            c, stage = successive_approximation(ws, load, mu, config, c_init=c,
                                                monitor=monitor)
        except (NonConvergenceError, DivergenceError, GalerkinSolveError) as exc:
            exc.args = (f"{exc.args[0]} [continuation stage {len(stages) + 1}]",) + exc.args[1:]
            raise
        stages.append(stage)
        mu = config.theta * mu
        if mu <= config.tol_mu:
            break
    return c, SolveReport(stages=stages, monitor_points=monitor)


def assemble_objective_load(basis: MultiIndexBasis, objective: Objective,
                            config: HJBConfig) -> tuple[np.ndarray, dict]:
    """Build the load vector by the configured mode; 'auto' prefers the exact
    separable route and falls back to Monte Carlo."""
    mode = config.load_mode
    if mode == "auto":
        mode = "separable" if objective.separable is not None else MonteCarloLoad()
    if mode == "separable":
        if objective.separable is None:
            raise ValueError(f"objective {objective.name!r} has no separable form")
        return assemble_load_separable(basis, objective.separable), {"mode": "separable"}
    if isinstance(mode, MonteCarloLoad):
        load = assemble_load_montecarlo(basis, objective, mode.n_samples, mode.seed)
        return load, {"mode": "monte_carlo", "n_samples": mode.n_samples, "seed": mode.seed}
    raise ValueError(f"unknown load mode {mode!r}")


def solve_hjb(basis: MultiIndexBasis, objective: Objective, config: HJBConfig
              ) -> tuple[ValueFunctionApprox, SolveReport]:
    """Offline phase: assemble, run the continuation, and bundle the results.

    The returned approximation carries both the value-function coefficients
    and the projection of the objective onto the same basis.
    """
    if basis.dim != objective.dim:
        raise ValueError(f"basis dimension {basis.dim} != objective dimension {objective.dim}")
    ws = GalerkinWorkspace.build(basis)
    load, load_info = assemble_objective_load(basis, objective, config)
    coeffs, report = discount_continuation(ws, load, config)
    projection = ws.project(load)
    vfa = ValueFunctionApprox(
        basis=basis,
        coeffs=coeffs,
        epsilon=config.epsilon,
        objective_projection=projection,
        provenance={
            "objective": objective.name,
            "dim": objective.dim,
            "mu_schedule": report.mu_schedule,
            "iterations": [s.iterations for s in report.stages],
            "final_changes": [s.final_change for s in report.stages],
            "residual_norms": [s.residual_norm for s in report.stages],
            "load": load_info,
            "tol": config.tol,
        },
    )
    return vfa, report


# ---------------------------------------------------------------------------
# deterministic flows
# ---------------------------------------------------------------------------

def feedback_field(vfa: ValueFunctionApprox) -> Callable[[np.ndarray], np.ndarray]:
    def field(x: np.ndarray) -> np.ndarray:
        return vfa.feedback(x)
    return field


def neg_gradient_field(objective: Objective, fd_step: float = 1e-6
                       ) -> Callable[[np.ndarray], np.ndarray]:
    from ccbo.objectives import finite_diff_gradient

    def field(x: np.ndarray) -> np.ndarray:
        return -finite_diff_gradient(objective, x, step=fd_step)
    return field


def integrate_flow(field: Callable[[np.ndarray], np.ndarray], x0, dt: float,
                   t_final: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward-Euler trajectory of ``dx/dt = field(x)``.

    Returns ``(times, path)`` with ``ceil(t_final / dt) + 1`` rows including
    the start.  Aborts with FlowDivergedError when the state leaves a ball
    of radius 1e6.
    """
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    x = np.atleast_1d(np.asarray(x0, dtype=np.float64)).copy()
    steps = int(np.ceil(t_final / dt))
    path = np.empty((steps + 1, x.size))
    path[0] = x
    for k in range(steps):
        x = x + dt * np.asarray(field(x), dtype=np.float64)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > FLOW_DIVERGENCE_RADIUS:
            raise FlowDivergedError(k + 1, x)
        path[k + 1] = x
    times = dt * np.arange(steps + 1)
    return times, path


# ---------------------------------------------------------------------------
# coefficient files
# ---------------------------------------------------------------------------

def _truncation_to_dict(trunc) -> dict:
    return {"kind": trunc.kind, "degree": trunc.degree}


def _truncation_from_dict(d: dict):
    if d["kind"] == "total_degree":
        return TotalDegree(int(d["degree"]))
    if d["kind"] == "hyperbolic_cross":
        return HyperbolicCross(int(d["degree"]))
    raise MalformedFileError(f"unknown truncation kind {d['kind']!r}")


def save_value_function(vfa: ValueFunctionApprox, path, config_hash: str | None = None) -> None:
    """Write a self-describing coefficient file (documented in the README).

    Serialization is deterministic, so identical solves produce identical
    bytes, and floats use shortest round-trip decimal form, so a
    save/load/save cycle is bit-identical.
    """
    doc = {
        "format": FILE_FORMAT,
        "format_version": FILE_VERSION,
        "family": vfa.basis.family.value,
        "truncation": _truncation_to_dict(vfa.basis.truncation),
        "domain": {"lower": list(vfa.basis.domain.lower),
                   "upper": list(vfa.basis.domain.upper)},
        "indices": [list(map(int, r)) for r in vfa.basis.exponents],
        "epsilon": vfa.epsilon,
        "coefficients": [float(c) for c in vfa.coeffs],
        "objective_projection": (None if vfa.objective_projection is None
                                 else [float(a) for a in vfa.objective_projection]),
        "config_hash": config_hash,
        "provenance": vfa.provenance,
    }
    if vfa.basis.family == BasisFamily.LEGENDRE:
        doc["legendre_normalization"] = LEGENDRE_NORMALIZATION
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_value_function(path) -> ValueFunctionApprox:
    """Read a coefficient file back, validating format, version and basis."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFileError(f"cannot read coefficient file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != FILE_FORMAT:
        raise VersionMismatchError(f"{path} is not a value-function coefficient file")
    if doc.get("format_version") != FILE_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {doc.get('format_version')} != {FILE_VERSION}")
    try:
        family = BasisFamily(doc["family"])
        trunc = _truncation_from_dict(doc["truncation"])
        domain = BoxDomain(tuple(doc["domain"]["lower"]), tuple(doc["domain"]["upper"]))
        indices = np.asarray(doc["indices"], dtype=np.int64)
        coeffs = np.asarray(doc["coefficients"], dtype=np.float64)
        epsilon = float(doc["epsilon"])
        proj = doc.get("objective_projection")
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"{path}: missing or invalid field ({exc})") from exc

    try:
        basis = MultiIndexBasis(family, domain, trunc, exponents=indices)
    except ValueError as exc:
        raise BasisMismatchError(f"{path}: invalid index list ({exc})") from exc
    if not basis.matches_truncation():
        raise BasisMismatchError(
            f"{path}: index list does not match the declared truncation")
    if coeffs.shape != (basis.size,):
        raise BasisMismatchError(
            f"{path}: {coeffs.size} coefficients for a basis of size {basis.size}")
    projection = None
    if proj is not None:
        projection = np.asarray(proj, dtype=np.float64)
        if projection.shape != (basis.size,):
            raise BasisMismatchError(f"{path}: objective projection has wrong length")
    return ValueFunctionApprox(basis=basis, coeffs=coeffs, epsilon=epsilon,
                               objective_projection=projection,
                               provenance=doc.get("provenance") or {})
