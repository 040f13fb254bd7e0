"""Numba-compiled twins of the hot kernels.

Same arithmetic as :mod:`ccbo._kernels.numpy_impl` (same recurrences, same
update order); reductions run sequentially instead of through BLAS, so the
two backends agree to reduction rounding.  The simulation kernel evaluates
objectives by numeric id, so it only covers objectives that register one;
the dispatcher falls back to the numpy path otherwise.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

NAME = "numba"

STATUS_OK = 0
STATUS_NONFINITE = 1

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def _fill_1d(family_code, a, b, x, max_degree, vals, ders):
    if family_code == 0:
        vals[0] = 1.0
        for k in range(max_degree):
            vals[k + 1] = vals[k] * x
        ders[0] = 0.0
        if max_degree >= 1:
            ders[1] = 1.0
        pw = 1.0
        for k in range(1, max_degree):
            pw = pw * x
            ders[k + 1] = (k + 1) * pw
    else:
        scale = 2.0 / (b - a)
        xi = scale * x - (a + b) / (b - a)
        vals[0] = 1.0
        ders[0] = 0.0
        if max_degree >= 1:
            vals[1] = xi
            ders[1] = 1.0
        for k in range(1, max_degree):
            vals[k + 1] = ((2 * k + 1) * xi * vals[k] - k * vals[k - 1]) / (k + 1)
            ders[k + 1] = ders[k - 1] + (2 * k + 1) * vals[k]
        for k in range(max_degree + 1):
            ders[k] = ders[k] * scale


@njit(**_OPTS)
def _max_degree(exps):
    m = 0
    for i in range(exps.shape[0]):
        for p in range(exps.shape[1]):
            if exps[i, p] > m:
                m = exps[i, p]
    return m


@njit(**_OPTS)
def _basis_values_kernel(family_code, exps, lower, upper, pts, out):
    m, d = pts.shape
    n = exps.shape[0]
    maxdeg = _max_degree(exps)
    vals = np.empty((d, maxdeg + 1))
    ders = np.empty((d, maxdeg + 1))
    for q in range(m):
        for p in range(d):
            _fill_1d(family_code, lower[p], upper[p], pts[q, p], maxdeg, vals[p], ders[p])
        for i in range(n):
            prod = 1.0
            for p in range(d):
                prod *= vals[p, exps[i, p]]
            out[q, i] = prod


def basis_values(family_code, exps, lower, upper, pts):
    out = np.empty((pts.shape[0], exps.shape[0]))
    _basis_values_kernel(family_code, exps, lower, upper, pts, out)
    return out


@njit(**_OPTS)
def _control_at(family_code, exps, lower, upper, v_coeffs, epsilon, a_coeffs,
                want_approx, x, vals, ders, pf, sf, u_row):
    # Fills u_row with -(1/eps) sum_i c_i grad(phi_i)(x); returns the
    # projected-objective value sum_i a_i phi_i(x) when requested.
    d = x.shape[0]
    n = exps.shape[0]
    maxdeg = vals.shape[1] - 1
    for p in range(d):
        _fill_1d(family_code, lower[p], upper[p], x[p], maxdeg, vals[p], ders[p])
        u_row[p] = 0.0
    fap = 0.0
    for i in range(n):
        pf[0] = 1.0
        for p in range(d):
            pf[p + 1] = pf[p] * vals[p, exps[i, p]]
        sf[d] = 1.0
        for p in range(d - 1, -1, -1):
            sf[p] = sf[p + 1] * vals[p, exps[i, p]]
        if want_approx:
            fap += a_coeffs[i] * pf[d]
        ci = v_coeffs[i]
        for p in range(d):
            u_row[p] += ci * ders[p, exps[i, p]] * pf[p] * sf[p + 1]
    inv = -1.0 / epsilon
    for p in range(d):
        u_row[p] *= inv
    return fap


@njit(**_OPTS)
def _feedback_values_kernel(family_code, exps, lower, upper, coeffs, epsilon, pts, out):
    m, d = pts.shape
    maxdeg = _max_degree(exps)
    vals = np.empty((d, maxdeg + 1))
    ders = np.empty((d, maxdeg + 1))
    pf = np.empty(d + 1)
    sf = np.empty(d + 1)
    dummy = np.zeros(exps.shape[0])
    for q in range(m):
        _control_at(family_code, exps, lower, upper, coeffs, epsilon, dummy,
                    False, pts[q], vals, ders, pf, sf, out[q])


def feedback_values(family_code, exps, lower, upper, coeffs, epsilon, pts):
    out = np.empty_like(pts)
    _feedback_values_kernel(family_code, exps, lower, upper, coeffs, epsilon, pts, out)
    return out


@njit(**_OPTS)
def _objective_scalar(f_id, params, x):
    d = x.shape[0]
    if f_id == 0:  # shifted Ackley
        sq = 0.0
        cs = 0.0
        for j in range(d):
            sq += x[j] * x[j]
            cs += math.cos(2.0 * math.pi * x[j])
        sq /= d
        cs /= d
        return -20.0 * math.exp(-0.2 * math.sqrt(sq)) - math.exp(cs) + 21.0 + math.e
    elif f_id == 1:  # Rastrigin with 10 (d+1) offset
        acc = 10.0 * (d + 1)
        for j in range(d):
            acc += x[j] * x[j] - 10.0 * math.cos(2.0 * math.pi * x[j])
        return acc
    elif f_id == 2:  # quadratic form, params = Q.ravel()
        acc = 0.0
        for i in range(d):
            row = 0.0
            for j in range(d):
                row += params[i * d + j] * x[j]
            acc += x[i] * row
        return acc
    elif f_id == 3:  # 1-D double well
        t = x[0]
        return (t * t - 2.2) ** 2 - 0.08 * t + 0.5
    else:  # 1-D piecewise plateau
        t = x[0]
        if t < -2.0:
            return t * t
        elif t <= 0.0:
            return 4.0
        return 4.0 * (t - 1.0) ** 2


@njit(**_OPTS)
def _consensus(X, fvals, alpha, v):
    N, d = X.shape
    fmin = fvals[0]
    for i in range(1, N):
        if fvals[i] < fmin:
            fmin = fvals[i]
    for p in range(d):
        v[p] = 0.0
    sw = 0.0
    for i in range(N):
        w = math.exp(-alpha * (fvals[i] - fmin))
        sw += w
        for p in range(d):
            v[p] += w * X[i, p]
    for p in range(d):
        v[p] /= sw


@njit(**_OPTS)
def _record_row(records, row, t, v, X, x_star, has_xstar, lam_count, beta_count):
    N, d = X.shape
    records[row, 0] = t
    for p in range(d):
        records[row, 1 + p] = v[p]
    var = 0.0
    for p in range(d):
        mean_p = 0.0
        for i in range(N):
            mean_p += X[i, p]
        mean_p /= N
        acc = 0.0
        for i in range(N):
            diff = X[i, p] - mean_p
            acc += diff * diff
        var += acc
    records[row, 1 + d] = 0.5 * var / N
    if has_xstar:
        w2 = 0.0
        for i in range(N):
            for p in range(d):
                diff = X[i, p] - x_star[p]
                w2 += diff * diff
        records[row, 2 + d] = w2 / N
    else:
        records[row, 2 + d] = np.nan
    records[row, 3 + d] = lam_count
    records[row, 4 + d] = beta_count


@njit(**_OPTS)
def _simulate_kernel(X, noise, f_id, f_params, variant, lam, beta, sigma, alpha, dt,
                     family_code, exps, lower, upper, v_coeffs, epsilon, a_coeffs,
                     x_star, has_xstar, record_particles, records, particles):
    n_steps, N, d = noise.shape
    n = exps.shape[0]
    maxdeg = _max_degree(exps)
    vals = np.empty((d, maxdeg + 1))
    ders = np.empty((d, maxdeg + 1))
    pf = np.empty(d + 1)
    sf = np.empty(d + 1)
    fvals = np.empty(N)
    u = np.zeros((N, d))
    fap = np.empty(N)
    v = np.empty(d)
    vbuf = np.empty(d)

    for i in range(N):
        fvals[i] = _objective_scalar(f_id, f_params, X[i])
    _consensus(X, fvals, alpha, v)
    _record_row(records, 0, 0.0, v, X, x_star, has_xstar, 0.0, 0.0)
    if record_particles:
        for i in range(N):
            for p in range(d):
                particles[0, i, p] = X[i, p]

    sq_dt = math.sqrt(dt)
    for k in range(n_steps):
        if variant != 0:
            for i in range(N):
                fap[i] = _control_at(family_code, exps, lower, upper, v_coeffs,
                                     epsilon, a_coeffs, variant == 1,
                                     X[i], vals, ders, pf, sf, u[i])
        fv = 0.0
        if variant == 1:
            fv = _objective_scalar(f_id, f_params, v)

        lam_count = 0.0
        beta_count = 0.0
        for i in range(N):
            if variant == 0:
                lam_i = lam
                beta_i = 0.0
            elif variant == 1:
                lam_i = lam if fvals[i] >= fv else 0.0
                beta_i = beta if fvals[i] >= fap[i] else 0.0
            else:
                lam_i = lam
                beta_i = beta
            if lam_i != 0.0:
                lam_count += 1.0
            if beta_i != 0.0:
                beta_count += 1.0
            for p in range(d):
                spread = X[i, p] - v[p]
                drift = -lam_i * spread
                if variant != 0:
                    drift += beta_i * u[i, p]
                X[i, p] = X[i, p] + dt * drift + sigma * sq_dt * spread * noise[k, i, p]

        for i in range(N):
            for p in range(d):
                if not math.isfinite(X[i, p]):
                    return STATUS_NONFINITE, k + 1

        for i in range(N):
            fvals[i] = _objective_scalar(f_id, f_params, X[i])
        _consensus(X, fvals, alpha, vbuf)
        for p in range(d):
            v[p] = vbuf[p]
        _record_row(records, k + 1, (k + 1) * dt, v, X, x_star, has_xstar,
                    lam_count, beta_count)
        if record_particles:
            for i in range(N):
                for p in range(d):
                    particles[k + 1, i, p] = X[i, p]

    return STATUS_OK, -1


def simulate(positions, noise, f_id, f_params, variant, lam, beta, sigma, alpha, dt,
             family_code, exps, lower, upper, v_coeffs, epsilon, a_coeffs,
             x_star, has_xstar, record_particles):
    """Compiled counterpart of numpy_impl.simulate; objective passed by id."""
    X = positions.copy()
    n_steps, N, d = noise.shape
    records = np.empty((n_steps + 1, d + 5))
    particles = np.empty((n_steps + 1, N, d)) if record_particles else np.empty((1, 1, 1))
    status, bad_step = _simulate_kernel(
        X, noise, f_id, np.asarray(f_params, dtype=np.float64), variant,
        lam, beta, sigma, alpha, dt, family_code, exps, lower, upper,
        v_coeffs, epsilon, a_coeffs, x_star, has_xstar, record_particles,
        records, particles)
    if status != STATUS_OK:
        records = records[:bad_step]
    return records, X, particles, status, bad_step


@njit(**_OPTS)
def _mc_accumulate_kernel(family_code, exps, lower, upper, pts, fvals, out):
    m, d = pts.shape
    n = exps.shape[0]
    maxdeg = _max_degree(exps)
    vals = np.empty((d, maxdeg + 1))
    ders = np.empty((d, maxdeg + 1))
    for q in range(m):
        for p in range(d):
            _fill_1d(family_code, lower[p], upper[p], pts[q, p], maxdeg, vals[p], ders[p])
        fq = fvals[q]
        for i in range(n):
            prod = 1.0
            for p in range(d):
                prod *= vals[p, exps[i, p]]
            out[i] += fq * prod


def mc_load_accumulate(family_code, exps, lower, upper, pts, fvals):
    out = np.zeros(exps.shape[0])
    _mc_accumulate_kernel(family_code, exps, lower, upper, pts, fvals, out)
    return out
