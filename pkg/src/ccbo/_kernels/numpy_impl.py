"""Pure-numpy reference implementation of the hot kernels.

The compiled twin in :mod:`ccbo._kernels.numba_impl` follows the same
arithmetic (same recurrences, same update order); the two differ only in
floating-point reduction order.
"""
from __future__ import annotations

import numpy as np

NAME = "numpy"

STATUS_OK = 0
STATUS_NONFINITE = 1


def basis_values(family_code: int, exps: np.ndarray, lower: np.ndarray,
                 upper: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Matrix of basis values, shape ``(m, n)``."""
    m, d = pts.shape
    n = exps.shape[0]
    out = np.ones((m, n))
    for p in range(d):
        tab = _one_dim_values(family_code, lower[p], upper[p], pts[:, p],
                              int(exps[:, p].max()) if n else 0)
        out *= tab[:, exps[:, p]]
    return out


def feedback_values(family_code: int, exps: np.ndarray, lower: np.ndarray,
                    upper: np.ndarray, coeffs: np.ndarray, epsilon: float,
                    pts: np.ndarray) -> np.ndarray:
    """Feedback field ``-(1/eps) * sum_i c_i grad(phi_i)``, shape ``(m, d)``."""
    m, d = pts.shape
    n = exps.shape[0]
    vals = []
    ders = []
    for p in range(d):
        deg = int(exps[:, p].max()) if n else 0
        vtab = _one_dim_values(family_code, lower[p], upper[p], pts[:, p], deg)
        dtab = _one_dim_derivatives(family_code, lower[p], upper[p], pts[:, p], deg)
        vals.append(vtab[:, exps[:, p]])
        ders.append(dtab[:, exps[:, p]])
    prefix = [np.ones((m, n))]
    for p in range(d - 1):
        prefix.append(prefix[-1] * vals[p])
    suffix = np.ones((m, n))
    u = np.empty((m, d))
    for p in range(d - 1, -1, -1):
        u[:, p] = (prefix[p] * suffix * ders[p]) @ coeffs
        suffix = suffix * vals[p]
    return u * (-1.0 / epsilon)


def _one_dim_values(family_code, a, b, x, max_degree):
    vals = np.empty((x.shape[0], max_degree + 1))
    if family_code == 0:
        vals[:, 0] = 1.0
        for k in range(max_degree):
            vals[:, k + 1] = vals[:, k] * x
        return vals
    scale = 2.0 / (b - a)
    xi = scale * x - (a + b) / (b - a)
    vals[:, 0] = 1.0
    if max_degree >= 1:
        vals[:, 1] = xi
    for k in range(1, max_degree):
        vals[:, k + 1] = ((2 * k + 1) * xi * vals[:, k] - k * vals[:, k - 1]) / (k + 1)
    return vals


def _one_dim_derivatives(family_code, a, b, x, max_degree):
    ders = np.zeros((x.shape[0], max_degree + 1))
    if family_code == 0:
        if max_degree >= 1:
            ders[:, 1] = 1.0
        pw = np.ones_like(x)
        for k in range(1, max_degree):
            pw = pw * x
            ders[:, k + 1] = (k + 1) * pw
        return ders
    scale = 2.0 / (b - a)
    xi = scale * x - (a + b) / (b - a)
    vals = np.empty((x.shape[0], max_degree + 1))
    vals[:, 0] = 1.0
    if max_degree >= 1:
        vals[:, 1] = xi
        ders[:, 1] = 1.0
    for k in range(1, max_degree):
        vals[:, k + 1] = ((2 * k + 1) * xi * vals[:, k] - k * vals[:, k - 1]) / (k + 1)
        ders[:, k + 1] = ders[:, k - 1] + (2 * k + 1) * vals[:, k]
    return ders * scale


def consensus(positions: np.ndarray, fvals: np.ndarray, alpha: float) -> np.ndarray:
    """Softmin-weighted mean; the value shift keeps ``exp`` in range at large alpha."""
    shifted = fvals - fvals.min()
    w = np.exp(-alpha * shifted)
    return (w @ positions) / w.sum()


def _stats(positions, x_star, has_xstar):
    mean = positions.mean(axis=0)
    var = 0.5 * float(np.mean(np.sum((positions - mean) ** 2, axis=1)))
    if has_xstar:
        w2 = float(np.mean(np.sum((positions - x_star) ** 2, axis=1)))
    else:
        w2 = np.nan
    return var, w2


def simulate(positions, noise, f, variant, lam, beta, sigma, alpha, dt,
             family_code, exps, lower, upper, v_coeffs, epsilon, a_coeffs,
             x_star, has_xstar, record_particles):
    """Euler-Maruyama particle loop; see the cbo module for the contract.

    Returns ``(records, final_positions, particles, status, bad_step)`` where
    records rows are ``[t, v_1..v_d, variance, w2sq, lam_count, beta_count]``.
    """
    X = positions.copy()
    n_steps, N, d = noise.shape
    records = np.empty((n_steps + 1, d + 5))
    particles = np.empty((n_steps + 1, N, d)) if record_particles else np.empty((1, 1, 1))
    if record_particles:
        particles[0] = X

    fvals = np.asarray(f(X), dtype=np.float64)
    v = consensus(X, fvals, alpha)
    var, w2 = _stats(X, x_star, has_xstar)
    records[0] = np.concatenate(([0.0], v, [var, w2, 0.0, 0.0]))

    sq_dt = np.sqrt(dt)
    for k in range(n_steps):
        if variant == 0:
            lam_vec = np.full(N, lam)
            beta_vec = np.zeros(N)
            control = 0.0
        else:
            control = feedback_values(family_code, exps, lower, upper,
                                      v_coeffs, epsilon, X)
            if variant == 1:
                fv = float(f(v))
                fap = basis_values(family_code, exps, lower, upper, X) @ a_coeffs
                lam_vec = np.where(fvals >= fv, lam, 0.0)
                beta_vec = np.where(fvals >= fap, beta, 0.0)
            else:
                lam_vec = np.full(N, lam)
                beta_vec = np.full(N, beta)

        spread = X - v
        drift = -lam_vec[:, None] * spread + beta_vec[:, None] * control
        X = X + dt * drift + sigma * sq_dt * spread * noise[k]

        if not np.all(np.isfinite(X)):
            return records[: k + 1], X, particles, STATUS_NONFINITE, k + 1

        fvals = np.asarray(f(X), dtype=np.float64)
        v = consensus(X, fvals, alpha)
        var, w2 = _stats(X, x_star, has_xstar)
        lam_count = float(np.count_nonzero(lam_vec))
        beta_count = float(np.count_nonzero(beta_vec))
        records[k + 1] = np.concatenate(([(k + 1) * dt], v, [var, w2, lam_count, beta_count]))
        if record_particles:
            particles[k + 1] = X

    return records, X, particles, STATUS_OK, -1


def mc_load_accumulate(family_code, exps, lower, upper, pts, fvals):
    """One Monte-Carlo chunk of the load vector: ``sum_q f(x_q) phi_i(x_q)``."""
    phi = basis_values(family_code, exps, lower, upper, pts)
    return phi.T @ fvals
