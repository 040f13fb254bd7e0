"""Galerkin assembly for the projected value-function equation.

Everything reduces to 1-D integral tables because both the basis and the
objective factorizations are separable.  The central object is the
contracted coupling tensor

    S[i, j, k] = sum_p  ( int (d phi_j^p)(d phi_k^p) phi_i^p )
                        * prod_{q != p} ( int phi_i^q phi_j^q phi_k^q ),

stored sparsely as a COO list of its nonzero entries.  The advection matrix
of the frozen-control term and the quadratic control-energy load are both
contractions of this tensor with a coefficient vector, so the dense
``n x n x n x d`` tensor is never materialized.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ccbo import _kernels
from ccbo.basis import (
    BasisFamily,
    Integral1DTables,
    MultiIndexBasis,
    integral_tables,
    one_dim_values,
)
from ccbo.objectives import Factor1D, SeparableForm

__all__ = [
    "IllConditionedBasisError",
    "GalerkinSolveError",
    "GalerkinWorkspace",
    "assemble_mass",
    "assemble_load_separable",
    "assemble_load_montecarlo",
    "project_onto_basis",
]

COND_WARN = 1e12
COND_FAIL = 1e14

MC_CHUNK = 1 << 16


class IllConditionedBasisError(RuntimeError):
    """Mass matrix condition number beyond the hard threshold."""


class GalerkinSolveError(RuntimeError):
    """A linear solve during assembly or iteration failed."""


def assemble_mass(basis: MultiIndexBasis, tables: Integral1DTables | None = None,
                  condition_check: bool = True) -> np.ndarray:
    """Gram matrix ``<phi_i, phi_j>`` over the domain box (no discount factor).

    Warns above a condition number of 1e12 and raises above 1e14: high-degree
    monomial bases are the usual culprit.
    """
    tables = tables if tables is not None else integral_tables(basis)
    exps = basis.exponents
    mass = np.ones((basis.size, basis.size))
    for p in range(basis.dim):
        e = exps[:, p]
        mass *= tables.pair[p][np.ix_(e, e)]
    if condition_check:
        cond = np.linalg.cond(mass)
        if cond > COND_FAIL:
            raise IllConditionedBasisError(
                f"mass matrix condition number {cond:.3e} exceeds {COND_FAIL:.0e}; "
                "reduce the degree or switch to a Legendre family")
        if cond > COND_WARN:
            warnings.warn(
                f"mass matrix condition number {cond:.3e} exceeds {COND_WARN:.0e}; "
                "results may lose accuracy", RuntimeWarning, stacklevel=2)
    return mass


def _triple_tensor_coo(basis: MultiIndexBasis, tables: Integral1DTables):
    """Nonzero entries of the dimension-contracted coupling tensor S[i, j, k]."""
    exps = basis.exponents
    n, d = exps.shape
    ii: list[np.ndarray] = []
    jj: list[np.ndarray] = []
    kk: list[np.ndarray] = []
    vv: list[np.ndarray] = []

    tcols = np.arange(n)
    for j in range(n):
        for k in range(j, n):
            tvec = [tables.triple[q][exps[:, q], exps[j, q], exps[k, q]] for q in range(d)]
            dvec = [tables.deriv_pair[p][exps[j, p], exps[k, p], exps[:, p]] for p in range(d)]
            prefix = np.ones(n)
            pref = [prefix]
            for q in range(d - 1):
                pref.append(pref[-1] * tvec[q])
            suffix = np.ones(n)
            col = np.zeros(n)
            for p in range(d - 1, -1, -1):
                col += dvec[p] * pref[p] * suffix
                suffix = suffix * tvec[p]
            nz = np.nonzero(col)[0]
            if nz.size == 0:
                continue
            ii.append(nz)
            jj.append(np.full(nz.size, j, dtype=np.int64))
            kk.append(np.full(nz.size, k, dtype=np.int64))
            vv.append(col[nz])
            if k != j:
                ii.append(nz)
                jj.append(np.full(nz.size, k, dtype=np.int64))
                kk.append(np.full(nz.size, j, dtype=np.int64))
                vv.append(col[nz])

    if not ii:
        shape = (0,)
        return (np.zeros(shape, dtype=np.int64),) * 3 + (np.zeros(shape),)
    return (np.concatenate(ii), np.concatenate(jj), np.concatenate(kk), np.concatenate(vv))


@dataclass
class GalerkinWorkspace:
    """Immutable assembly bundle for one basis: mass matrix plus the sparse
    coupling tensor, with the contraction helpers the iteration needs."""

    basis: MultiIndexBasis
    tables: Integral1DTables
    mass: np.ndarray
    coup_i: np.ndarray
    coup_j: np.ndarray
    coup_k: np.ndarray
    coup_v: np.ndarray

    @classmethod
    def build(cls, basis: MultiIndexBasis, condition_check: bool = True) -> "GalerkinWorkspace":
        tables = integral_tables(basis)
        mass = assemble_mass(basis, tables, condition_check=condition_check)
        ci, cj, ck, cv = _triple_tensor_coo(basis, tables)
        return cls(basis, tables, mass, ci, cj, ck, cv)

    @property
    def size(self) -> int:
        return self.basis.size

    def advection_matrix(self, coeffs: np.ndarray, epsilon: float) -> np.ndarray:
        """Galerkin matrix of ``<grad(V) . u_c, Phi>`` for the frozen control
        ``u_c = -(1/eps) grad(Phi)^T c``; iterates only cached nonzeros."""
        n = self.size
        w = self.coup_v * coeffs[self.coup_k]
        flat = np.bincount(self.coup_i * n + self.coup_j, weights=w, minlength=n * n)
        return (-1.0 / epsilon) * flat.reshape(n, n)

    def control_energy_load(self, coeffs: np.ndarray, epsilon: float) -> np.ndarray:
        """Load vector of ``<(eps/2) |u_c|^2, Phi>`` for the same frozen control."""
        w = self.coup_v * coeffs[self.coup_j] * coeffs[self.coup_k]
        return (0.5 / epsilon) * np.bincount(self.coup_i, weights=w, minlength=self.size)

    def derivative_triple_entry(self, i: int, j: int, k: int, p: int) -> float:
        """On-demand entry ``<(d_p phi_k)(d_p phi_j), phi_i>`` from the 1-D tables."""
        exps = self.basis.exponents
        val = self.tables.deriv_pair[p][exps[j, p], exps[k, p], exps[i, p]]
        for q in range(self.basis.dim):
            if q == p:
                continue
            val *= self.tables.triple[q][exps[i, q], exps[j, q], exps[k, q]]
        return float(val)

    def project(self, load: np.ndarray) -> np.ndarray:
        """Solve ``mass @ a = load``; the basis expansion of the projection."""
        return project_onto_basis(self.mass, load)


def project_onto_basis(mass: np.ndarray, load: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(mass, load)
    except np.linalg.LinAlgError as exc:
        raise GalerkinSolveError(f"projection solve failed: {exc}") from exc


# ---------------------------------------------------------------------------
# load vectors
# ---------------------------------------------------------------------------

def _factor_integrals(factor: Factor1D, family: BasisFamily, a: float, b: float,
                      max_degree: int) -> np.ndarray:
    """``int_a^b F(x) phi^r(x) dx`` for r = 0..max_degree, split at breakpoints."""
    nodes = factor.gauss_nodes + max_degree // 2 + 1
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    cuts = [a] + [c for c in sorted(factor.breakpoints) if a < c < b] + [b]
    acc = np.zeros(max_degree + 1)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        x = 0.5 * (hi - lo) * xg + 0.5 * (lo + hi)
        w = 0.5 * (hi - lo) * wg
        tab = one_dim_values(family, a, b, x, max_degree)
        acc += tab.T @ (factor(x) * w)
    return acc


def assemble_load_separable(basis: MultiIndexBasis, sep: SeparableForm) -> np.ndarray:
    """Exact load vector ``<f, Phi>`` for a separable objective.

    Each rank-one term contributes a product over dimensions of 1-D
    factor-times-basis integrals, evaluated by (piecewise) Gauss-Legendre
    quadrature at the node count the factor declares.
    """
    exps = basis.exponents
    lo, hi = basis.domain.lower, basis.domain.upper
    load = np.zeros(basis.size)
    for row in sep.factors:
        if len(row) != basis.dim:
            raise ValueError("separable form dimension does not match basis")
        term = np.ones(basis.size)
        for p, factor in enumerate(row):
            ints = _factor_integrals(factor, basis.family, lo[p], hi[p],
                                     int(exps[:, p].max()))
            term = term * ints[exps[:, p]]
        load += term
    return load


def assemble_load_montecarlo(basis: MultiIndexBasis, f, n_samples: int,
                             seed: int) -> np.ndarray:
    """Monte-Carlo load vector ``|Omega| * mean_q f(x_q) phi_i(x_q)``.

    Uniform i.i.d. samples over the box; bit-reproducible for a fixed seed
    (fixed chunk size, fixed accumulation order).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    impl = _kernels.active()
    family_code = _kernels.FAMILY_CODES[basis.family.value]
    exps = basis.exponents
    lo = basis.domain.lower_array
    hi = basis.domain.upper_array
    rng = np.random.default_rng(seed)
    acc = np.zeros(basis.size)
    remaining = n_samples
    while remaining > 0:
        m = min(MC_CHUNK, remaining)
        pts = rng.uniform(lo, hi, size=(m, basis.dim))
        fvals = np.asarray(f(pts), dtype=np.float64)
        acc += impl.mc_load_accumulate(family_code, exps, lo, hi, pts, fvals)
        remaining -= m
    return acc * (basis.domain.volume / n_samples)
