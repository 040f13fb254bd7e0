"""Benchmark objective functions.

All objectives evaluate vectorized over the last axis: ``f(x)`` accepts a
single point ``(d,)`` or a batch ``(m, d)``.  Where a function is a sum of
coordinate-wise products it also carries a :class:`SeparableForm`, which the
Galerkin assembly uses for exact load vectors; everything else is integrated
by Monte Carlo.  Gradients are deliberately not part of the objective
interface -- the only derivative access point is
:func:`finite_diff_gradient`, used by the flow-comparison experiment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

__all__ = [
    "Factor1D",
    "SeparableForm",
    "Objective",
    "ackley",
    "rastrigin",
    "double_well_1d",
    "nonsmooth_1d",
    "quadratic",
    "finite_diff_gradient",
    "KERNEL_ACKLEY",
    "KERNEL_RASTRIGIN",
    "KERNEL_QUADRATIC",
    "KERNEL_DOUBLE_WELL",
    "KERNEL_NONSMOOTH",
]

# Numeric ids understood by the compiled simulation kernels; -1 means
# "no compiled form, use the Python callable".
KERNEL_ACKLEY = 0
KERNEL_RASTRIGIN = 1
KERNEL_QUADRATIC = 2
KERNEL_DOUBLE_WELL = 3
KERNEL_NONSMOOTH = 4


@dataclass(frozen=True)
class Factor1D:
    """One-dimensional factor of a separable objective.

    ``gauss_nodes`` declares how many Gauss-Legendre nodes make integrals of
    this factor against low-degree polynomials exact to machine precision
    (the assembler adds nodes for the polynomial part itself).  Piecewise
    factors list their breakpoints so integration can split there.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    gauss_nodes: int = 64
    breakpoints: tuple[float, ...] = ()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class SeparableForm:
    """``f(x) = sum_j prod_p factors[j][p](x_p)`` with separation rank ``len(factors)``."""

    factors: tuple[tuple[Factor1D, ...], ...]

    @property
    def rank(self) -> int:
        return len(self.factors)

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        total = np.zeros(x.shape[0])
        for row in self.factors:
            term = np.ones(x.shape[0])
            for p, factor in enumerate(row):
                term = term * factor(x[:, p])
            total += term
        return total


@dataclass(frozen=True)
class Objective:
    """Black-box objective with optional separable factorization and known minimizer."""

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    separable: SeparableForm | None = None
    minimizer: tuple[float, ...] | None = None
    min_value: float | None = None
    kernel_id: int = -1
    kernel_params: tuple[float, ...] = ()

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name} expects dimension {self.dim}, got {x.shape[-1]}")
        return self.fn(x)

    @property
    def minimizer_array(self) -> np.ndarray | None:
        if self.minimizer is None:
            return None
        return np.asarray(self.minimizer, dtype=np.float64)


def finite_diff_gradient(objective: Objective, x, step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient; the one sanctioned derivative access."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    for j in range(x.shape[-1]):
        e = np.zeros_like(x)
        e[..., j] = step
        grad[..., j] = (objective(x + e) - objective(x - e)) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# concrete objectives
# ---------------------------------------------------------------------------

def _ackley_eval(x: np.ndarray) -> np.ndarray:
    sq = np.mean(x * x, axis=-1)
    cs = np.mean(np.cos(2.0 * np.pi * x), axis=-1)
    return -20.0 * np.exp(-0.2 * np.sqrt(sq)) - np.exp(cs) + 21.0 + np.e


def ackley(dim: int) -> Objective:
    """Ackley function shifted so the global minimum value is 1 at the origin.

    The exponential of coordinate sums couples the coordinates, so there is
    no separable form; load vectors are assembled by Monte Carlo.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    return Objective(
        name="ackley",
        dim=dim,
        fn=_ackley_eval,
        minimizer=(0.0,) * dim,
        min_value=1.0,
        kernel_id=KERNEL_ACKLEY,
    )


def _rastrigin_eval(x: np.ndarray) -> np.ndarray:
    d = x.shape[-1]
    return 10.0 * (d + 1) + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x), axis=-1)


def _one_factor(x: np.ndarray) -> np.ndarray:
    return np.ones_like(x)

def _const_factor(x: np.ndarray, value: float) -> np.ndarray:
    return np.full_like(x, value)

def _rastrigin_factor(x: np.ndarray) -> np.ndarray:
    return x * x - 10.0 * np.cos(2.0 * np.pi * x)


def rastrigin(dim: int) -> Objective:
    """Rastrigin function with a ``10 (d+1)`` offset; minimum value 10 at the origin.

    Separation rank ``d + 1``: one constant term plus one term per coordinate
    carrying ``x_p^2 - 10 cos(2 pi x_p)``.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    one = Factor1D(_one_factor, gauss_nodes=1)
    rows = [tuple(
        Factor1D(partial(_const_factor, value=10.0 * (dim + 1)), gauss_nodes=1) if p == 0 else one
        for p in range(dim))]
    for j in range(dim):
        rows.append(tuple(
            Factor1D(_rastrigin_factor, gauss_nodes=64) if p == j else one
            for p in range(dim)))
    return Objective(
        name="rastrigin",
        dim=dim,
        fn=_rastrigin_eval,
        separable=SeparableForm(tuple(rows)),
        minimizer=(0.0,) * dim,
        min_value=10.0,
        kernel_id=KERNEL_RASTRIGIN,
    )


def _double_well_eval(x: np.ndarray) -> np.ndarray:
    t = x[..., 0]
    return (t * t - 2.2) ** 2 - 0.08 * t + 0.5


def _double_well_factor(x: np.ndarray) -> np.ndarray:
    return (x * x - 2.2) ** 2 - 0.08 * x + 0.5


# Critical points of the quartic, Newton-refined roots of
# 4 x^3 - 8.8 x - 0.08; quoted elsewhere to five decimals as
# 1.48776 (global) and -1.47867 (local).
DOUBLE_WELL_GLOBAL_MIN = 1.4877644263961132
DOUBLE_WELL_GLOBAL_VALUE = 0.3811595598267712
DOUBLE_WELL_LOCAL_MIN = -1.4786731757599838
DOUBLE_WELL_LOCAL_VALUE = 0.6184767969789446


def double_well_1d() -> Objective:
    """Asymmetric 1-D double well ``(x^2 - 2.2)^2 - 0.08 x + 0.5``."""
    return Objective(
        name="double_well",
        dim=1,
        fn=_double_well_eval,
        separable=SeparableForm(((Factor1D(_double_well_factor, gauss_nodes=3),),)),
        minimizer=(DOUBLE_WELL_GLOBAL_MIN,),
        min_value=DOUBLE_WELL_GLOBAL_VALUE,
        kernel_id=KERNEL_DOUBLE_WELL,
    )


def _nonsmooth_eval(x: np.ndarray) -> np.ndarray:
    t = x[..., 0]
    return np.where(t < -2.0, t * t, np.where(t <= 0.0, 4.0, 4.0 * (t - 1.0) ** 2))


def _nonsmooth_factor(x: np.ndarray) -> np.ndarray:
    return np.where(x < -2.0, x * x, np.where(x <= 0.0, 4.0, 4.0 * (x - 1.0) ** 2))


def nonsmooth_1d() -> Objective:
    """Piecewise objective with a flat plateau on ``[-2, 0]``; minimum 0 at 1."""
    return Objective(
        name="nonsmooth",
        dim=1,
        fn=_nonsmooth_eval,
        separable=SeparableForm(((Factor1D(_nonsmooth_factor, gauss_nodes=3,
                                           breakpoints=(-2.0, 0.0)),),)),
        minimizer=(1.0,),
        min_value=0.0,
        kernel_id=KERNEL_NONSMOOTH,
    )


def _quadratic_eval(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.einsum("...i,ij,...j->...", x, q, x)


def _quadratic_diag_factor(x: np.ndarray, weight: float) -> np.ndarray:
    return weight * x * x


def quadratic(q) -> Objective:
    """Quadratic form ``x^T Q x`` for symmetric positive semidefinite ``Q``.

    Diagonal ``Q`` gets a separable form of rank ``d``; general symmetric
    ``Q`` is left to Monte Carlo assembly.
    """
    q = np.atleast_2d(np.asarray(q, dtype=np.float64))
    if q.shape[0] != q.shape[1]:
        raise ValueError("Q must be square")
    if not np.allclose(q, q.T, rtol=0.0, atol=1e-12):
        raise ValueError("Q must be symmetric")
    eigs = np.linalg.eigvalsh(q)
    if eigs.min() < -1e-10 * max(1.0, abs(eigs.max())):
        raise ValueError("Q must be positive semidefinite")
    dim = q.shape[0]

    separable = None
    if np.allclose(q, np.diag(np.diag(q)), rtol=0.0, atol=0.0):
        one = Factor1D(_one_factor, gauss_nodes=1)
        rows = tuple(
            tuple(Factor1D(partial(_quadratic_diag_factor, weight=float(q[j, j])), gauss_nodes=2)
                  if p == j else one for p in range(dim))
            for j in range(dim))
        separable = SeparableForm(rows)

    return Objective(
        name="quadratic",
        dim=dim,
        fn=partial(_quadratic_eval, q=q),
        separable=separable,
        minimizer=(0.0,) * dim,
        min_value=0.0,
        kernel_id=KERNEL_QUADRATIC,
        kernel_params=tuple(float(v) for v in q.ravel()),
    )


_BUILDERS = {
    "ackley": lambda spec: ackley(spec["dim"]),
    "rastrigin": lambda spec: rastrigin(spec["dim"]),
    "double_well": lambda spec: double_well_1d(),
    "nonsmooth": lambda spec: nonsmooth_1d(),
}


def by_name(name: str, dim: int, q=None) -> Objective:
    """Look up an objective by the identifier used in experiment configs."""
    if name == "quadratic":
        if q is None:
            q = np.eye(dim)
        obj = quadratic(q)
        if obj.dim != dim:
            raise ValueError(f"quadratic matrix is {obj.dim}x{obj.dim}, config says dim={dim}")
        return obj
    if name not in _BUILDERS:
        raise ValueError(f"unknown objective {name!r}")
    obj = _BUILDERS[name]({"dim": dim})
    if obj.dim != dim:
        raise ValueError(f"objective {name} is fixed to dimension {obj.dim}")
    return obj
