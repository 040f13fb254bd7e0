"""Separable polynomial bases on box domains.

Every basis function is a product of one-dimensional polynomials,
``phi_i(x) = prod_j phi^{r_i^j}(x_j)``, where the multi-index ``r_i``
is drawn from a total-degree or hyperbolic-cross truncation.  Two 1-D
families are supported:

* ``monomial``: plain powers ``x^r`` (no rescaling to the domain);
* ``legendre``: classical Legendre polynomials ``P_r`` with ``P_r(1) = 1``
  (non-orthonormal), affinely mapped from ``[-1, 1]`` onto each
  coordinate interval of the box.

The module also builds per-dimension tables of exact 1-D integrals of
products of basis functions and their derivatives, which is what makes
Galerkin assembly in moderate-to-high dimension affordable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "BasisFamily",
    "BoxDomain",
    "TotalDegree",
    "HyperbolicCross",
    "MultiIndexBasis",
    "Integral1DTables",
    "enumerate_indices",
    "eval_basis",
    "eval_basis_gradient",
    "integral_tables",
    "legendre_values",
    "legendre_derivatives",
    "one_dim_values",
    "one_dim_derivatives",
]


class BasisFamily(str, Enum):
    MONOMIAL = "monomial"
    LEGENDRE = "legendre"


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``prod_j [lower_j, upper_j]``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        if len(lo) == 0:
            raise ValueError("domain dimension must be >= 1")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("domain requires lower_j < upper_j in every coordinate")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper_array - self.lower_array))

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=np.float64)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=np.float64)

    @staticmethod
    def cube(half_width: float, dim: int) -> "BoxDomain":
        return BoxDomain((-half_width,) * dim, (half_width,) * dim)


@dataclass(frozen=True)
class TotalDegree:
    """Keep multi-indices with ``sum_j r_j <= degree``."""

    degree: int
    kind: str = "total_degree"


@dataclass(frozen=True)
class HyperbolicCross:
    """Keep multi-indices with ``prod_j (r_j + 1) <= degree + 1``."""

    degree: int
    kind: str = "hyperbolic_cross"


Truncation = TotalDegree | HyperbolicCross


def _graded_lex_key(exponents: np.ndarray) -> np.ndarray:
    # Sort by total degree, then descending lexicographic on the tuple,
    # matching the ordering (0,0),(1,0),(0,1),(2,0),(1,1),(0,2).
    order = sorted(range(exponents.shape[0]),
                   key=lambda i: (int(exponents[i].sum()), tuple(-exponents[i])))
    return np.asarray(order, dtype=np.int64)


def enumerate_indices(truncation: Truncation, dim: int) -> np.ndarray:
    """Enumerate all multi-indices admitted by *truncation* in *dim* dimensions.

    Returns an ``(n, dim)`` integer array in graded lexicographic order
    (ascending total degree, then descending lexicographic within a degree).
    The enumeration never materialises the full tensor lattice, so
    hyperbolic-cross sets remain cheap even for ``dim`` in the tens.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if truncation.degree < 0:
        raise ValueError("truncation degree must be >= 0")

    out: list[tuple[int, ...]] = []
    prefix = [0] * dim

    if isinstance(truncation, TotalDegree):
        def walk_td(pos: int, budget: int) -> None:
            if pos == dim:
                out.append(tuple(prefix))
                return
            for r in range(budget + 1):
                prefix[pos] = r
                walk_td(pos + 1, budget - r)
            prefix[pos] = 0

        walk_td(0, truncation.degree)
    elif isinstance(truncation, HyperbolicCross):
        def walk_hc(pos: int, budget: int) -> None:
            if pos == dim:
                out.append(tuple(prefix))
                return
            r = 0
            while r + 1 <= budget:
                prefix[pos] = r
                walk_hc(pos + 1, budget // (r + 1))
                r += 1
            prefix[pos] = 0

        walk_hc(0, truncation.degree + 1)
    else:
        raise TypeError(f"unknown truncation {truncation!r}")

    exps = np.asarray(out, dtype=np.int64).reshape(len(out), dim)
    return exps[_graded_lex_key(exps)]


class MultiIndexBasis:
    """Ordered family of separable polynomials over a box domain."""

    def __init__(self, family: BasisFamily, domain: BoxDomain,
                 truncation: Truncation, exponents: np.ndarray | None = None):
        self.family = BasisFamily(family)
        self.domain = domain
        self.truncation = truncation
        if exponents is None:
            exponents = enumerate_indices(truncation, domain.dim)
        exponents = np.ascontiguousarray(exponents, dtype=np.int64)
        if exponents.ndim != 2 or exponents.shape[1] != domain.dim:
            raise ValueError("exponent table must have shape (n, dim)")
        if exponents.shape[0] == 0:
            raise ValueError("basis must contain at least one index")
        if np.any(exponents < 0):
            raise ValueError("exponents must be nonnegative")
        if len({tuple(r) for r in exponents}) != exponents.shape[0]:
            raise ValueError("multi-indices must be distinct")
        exponents.flags.writeable = False
        self.exponents = exponents

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def max_degrees(self) -> np.ndarray:
        """Largest 1-D degree appearing in each coordinate."""
        return self.exponents.max(axis=0)

    def __repr__(self) -> str:
        return (f"MultiIndexBasis({self.family.value}, dim={self.dim}, "
                f"n={self.size}, {self.truncation})")

    def matches_truncation(self) -> bool:
        """True when the stored indices are exactly the canonical enumeration."""
        canon = enumerate_indices(self.truncation, self.dim)
        return canon.shape == self.exponents.shape and bool(np.all(canon == self.exponents))


# ---------------------------------------------------------------------------
# 1-D evaluation
# ---------------------------------------------------------------------------

def legendre_values(xi: np.ndarray, max_degree: int) -> np.ndarray:
    """Values of ``P_0..P_max`` at points *xi*, shape ``(len(xi), max_degree+1)``.

    Three-term recurrence ``(k+1) P_{k+1} = (2k+1) xi P_k - k P_{k-1}``;
    valid for arguments outside ``[-1, 1]`` as well.
    """
    xi = np.asarray(xi, dtype=np.float64)
    vals = np.empty(xi.shape + (max_degree + 1,), dtype=np.float64)
    vals[..., 0] = 1.0
    if max_degree >= 1:
        vals[..., 1] = xi
    for k in range(1, max_degree):
        vals[..., k + 1] = ((2 * k + 1) * xi * vals[..., k] - k * vals[..., k - 1]) / (k + 1)
    return vals


def legendre_derivatives(xi: np.ndarray, max_degree: int) -> np.ndarray:
    """Derivatives ``P'_0..P'_max`` via ``P'_{k+1} = P'_{k-1} + (2k+1) P_k``."""
    xi = np.asarray(xi, dtype=np.float64)
    vals = legendre_values(xi, max_degree)
    ders = np.zeros_like(vals)
    if max_degree >= 1:
        ders[..., 1] = 1.0
    for k in range(1, max_degree):
        ders[..., k + 1] = ders[..., k - 1] + (2 * k + 1) * vals[..., k]
    return ders


def _affine_map(x: np.ndarray, a: float, b: float) -> tuple[np.ndarray, float]:
    # Map [a, b] -> [-1, 1]; second value is d(xi)/dx.
    scale = 2.0 / (b - a)
    return scale * x - (a + b) / (b - a), scale


def one_dim_values(family: BasisFamily, a: float, b: float,
                   x: np.ndarray, max_degree: int) -> np.ndarray:
    """Table of 1-D basis values, shape ``(len(x), max_degree+1)``."""
    x = np.asarray(x, dtype=np.float64)
    if family == BasisFamily.MONOMIAL:
        vals = np.empty(x.shape + (max_degree + 1,), dtype=np.float64)
        vals[..., 0] = 1.0
        for k in range(max_degree):
            vals[..., k + 1] = vals[..., k] * x
        return vals
    xi, _ = _affine_map(x, a, b)
    return legendre_values(xi, max_degree)


def one_dim_derivatives(family: BasisFamily, a: float, b: float,
                        x: np.ndarray, max_degree: int) -> np.ndarray:
    """Table of 1-D basis derivatives d(phi^r)/dx, shape ``(len(x), max_degree+1)``."""
    x = np.asarray(x, dtype=np.float64)
    if family == BasisFamily.MONOMIAL:
        ders = np.zeros(x.shape + (max_degree + 1,), dtype=np.float64)
        if max_degree >= 1:
            ders[..., 1] = 1.0
        powers = np.ones_like(x)
        for k in range(1, max_degree):
            powers = powers * x
            ders[..., k + 1] = (k + 1) * powers
        return ders
    xi, scale = _affine_map(x, a, b)
    return legendre_derivatives(xi, max_degree) * scale


# ---------------------------------------------------------------------------
# multi-dimensional evaluation
# ---------------------------------------------------------------------------

def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, basis has {dim}")
    return pts, single


def eval_basis(basis: MultiIndexBasis, x) -> np.ndarray:
    """Evaluate all basis functions at *x*.

    *x* may be a single point ``(d,)`` or a batch ``(m, d)``; evaluation
    outside the domain box is permitted (the polynomials extend globally).
    """
    pts, single = _as_points(x, basis.dim)
    exps = basis.exponents
    lo, hi = basis.domain.lower, basis.domain.upper
    out = np.ones((pts.shape[0], basis.size))
    for p in range(basis.dim):
        tab = one_dim_values(basis.family, lo[p], hi[p], pts[:, p], int(exps[:, p].max()))
        out *= tab[:, exps[:, p]]
    return out[0] if single else out


def eval_basis_gradient(basis: MultiIndexBasis, x) -> np.ndarray:
    """Gradients of all basis functions at *x*, shape ``(m, n, d)`` (or ``(n, d)``)."""
    pts, single = _as_points(x, basis.dim)
    exps = basis.exponents
    lo, hi = basis.domain.lower, basis.domain.upper
    d, n, m = basis.dim, basis.size, pts.shape[0]

    vals = []
    ders = []
    for p in range(d):
        deg = int(exps[:, p].max())
        vals.append(one_dim_values(basis.family, lo[p], hi[p], pts[:, p], deg)[:, exps[:, p]])
        ders.append(one_dim_derivatives(basis.family, lo[p], hi[p], pts[:, p], deg)[:, exps[:, p]])

    # leave-one-out products of the value factors, zero-safe via prefix/suffix
    prefix = [np.ones((m, n))]
    for p in range(d - 1):
        prefix.append(prefix[-1] * vals[p])
    suffix = np.ones((m, n))
    grad = np.empty((m, n, d))
    for p in range(d - 1, -1, -1):
        grad[:, :, p] = prefix[p] * suffix * ders[p]
        suffix = suffix * vals[p]
    return grad[0] if single else grad


# ---------------------------------------------------------------------------
# exact 1-D integral tables
# ---------------------------------------------------------------------------

@dataclass
class Integral1DTables:
    """Per-dimension exact integrals of 1-D basis products over ``[lower_p, upper_p]``.

    For dimension ``p`` with degrees ``r, s, t <= D_p``:

    * ``single[p][r]            = int phi^r``                   (length ``3 D_p + 1``)
    * ``pair[p][r, s]           = int phi^r phi^s``
    * ``triple[p][r, s, t]      = int phi^r phi^s phi^t``
    * ``deriv_pair[p][r, s, t]  = int (phi^r)' (phi^s)' phi^t``

    Monomial tables are closed form; Legendre tables use Gauss-Legendre
    quadrature with enough nodes to be exact for every stored entry.
    """

    max_degrees: tuple[int, ...]
    single: list[np.ndarray]
    pair: list[np.ndarray]
    triple: list[np.ndarray]
    deriv_pair: list[np.ndarray]


def _monomial_tables_1d(a: float, b: float, max_degree: int):
    top = 3 * max_degree + 1
    ks = np.arange(top + 1, dtype=np.float64)
    single = (b ** (ks + 1) - a ** (ks + 1)) / (ks + 1)
    idx = np.arange(max_degree + 1)
    pair = single[idx[:, None] + idx[None, :]]
    triple = single[idx[:, None, None] + idx[None, :, None] + idx[None, None, :]]
    deriv = np.zeros((max_degree + 1,) * 3)
    r = idx[:, None, None].astype(np.float64)
    s = idx[None, :, None].astype(np.float64)
    sums = idx[:, None, None] + idx[None, :, None] + idx[None, None, :]
    with np.errstate(invalid="ignore"):
        inner = np.where(sums >= 2, single[np.maximum(sums - 2, 0)], 0.0)
    deriv = r * s * inner
    return single[: 3 * max_degree + 1], pair, triple, deriv


def _legendre_tables_1d(a: float, b: float, max_degree: int):
    D = max_degree
    total_degree = 3 * D
    nodes = (total_degree + 1 + 1) // 2 + 1
    xg, wg = np.polynomial.legendre.leggauss(max(nodes, 1))
    x = 0.5 * (b - a) * xg + 0.5 * (a + b)
    w = 0.5 * (b - a) * wg
    vals = one_dim_values(BasisFamily.LEGENDRE, a, b, x, D)      # (q, D+1)
    ders = one_dim_derivatives(BasisFamily.LEGENDRE, a, b, x, D)

    single = np.empty(3 * D + 1)
    vals_hi = one_dim_values(BasisFamily.LEGENDRE, a, b, x, 3 * D)
    for k in range(3 * D + 1):
        single[k] = float(w @ vals_hi[:, k])

    pair = np.empty((D + 1, D + 1))
    for r in range(D + 1):
        for s in range(r, D + 1):
            v = float(np.sum(w * vals[:, r] * vals[:, s]))
            pair[r, s] = pair[s, r] = v

    # fill symmetric orbits from one representative so stored symmetry is exact
    triple = np.empty((D + 1,) * 3)
    for r in range(D + 1):
        for s in range(r, D + 1):
            for t in range(s, D + 1):
                v = float(np.sum(w * vals[:, r] * vals[:, s] * vals[:, t]))
                for (i, j, k) in {(r, s, t), (r, t, s), (s, r, t),
                                  (s, t, r), (t, r, s), (t, s, r)}:
                    triple[i, j, k] = v

    deriv = np.empty((D + 1,) * 3)
    for r in range(D + 1):
        for s in range(r, D + 1):
            for t in range(D + 1):
                v = float(np.sum(w * ders[:, r] * ders[:, s] * vals[:, t]))
                deriv[r, s, t] = deriv[s, r, t] = v
    return single, pair, triple, deriv


_TABLE_CACHE: dict[tuple, tuple] = {}


def integral_tables(basis: MultiIndexBasis, max_degree: int | None = None) -> Integral1DTables:
    """Build (and memoize) the exact 1-D integral tables for *basis*.

    The table degree defaults to the largest 1-D degree present in each
    coordinate; stored single-factor integrals extend to three times that,
    covering every product appearing in Galerkin assembly.
    """
    lo, hi = basis.domain.lower, basis.domain.upper
    degs = basis.max_degrees()
    single, pair, triple, deriv = [], [], [], []
    maxdegs = []
    for p in range(basis.dim):
        D = int(degs[p]) if max_degree is None else int(max_degree)
        key = (basis.family.value, lo[p], hi[p], D)
        if key not in _TABLE_CACHE:
            if basis.family == BasisFamily.MONOMIAL:
                _TABLE_CACHE[key] = _monomial_tables_1d(lo[p], hi[p], D)
            else:
                _TABLE_CACHE[key] = _legendre_tables_1d(lo[p], hi[p], D)
        s1, t2, t3, d2 = _TABLE_CACHE[key]
        single.append(s1)
        pair.append(t2)
        triple.append(t3)
        deriv.append(d2)
        maxdegs.append(D)
    return Integral1DTables(tuple(maxdegs), single, pair, triple, deriv)


def total_degree_cardinality(dim: int, degree: int) -> int:
    """Closed-form count of the total-degree index set."""
    return math.comb(dim + degree, degree)
