"""Numba inner loops for the VAR recursion and the lasso coordinate descent.

Kernels are written with scalar loops (or fixed-shape BLAS calls) so their
floating-point result depends only on their inputs, never on how callers
batch or parallelize work. All kernels release the GIL.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def var_path(a_stacked, init_state, errors):
    """Iterate ``x_t = [A_1 .. A_K] state_t + e_t`` and return the path.

    ``a_stacked`` is n x (k n); ``init_state`` is the flattened lag vector
    ``(x_0', x_{-1}', .., x_{-K+1}')`` of length k n; ``errors`` is T x n.
    Returns the T x n path ``x_1 .. x_T``.
    """
    t_len, n = errors.shape
    kn = a_stacked.shape[1]
    state = init_state.copy()
    out = np.empty((t_len, n))
    for t in range(t_len):
        x = np.dot(a_stacked, state)
        for i in range(n):
            x[i] += errors[t, i]
            out[t, i] = x[i]
        for j in range(kn - 1, n - 1, -1):
            state[j] = state[j - n]
        for i in range(n):
            state[i] = x[i]
    return out


@njit(cache=True, nogil=True)
def bootstrap_chunk_means(a_stacked, init_state, residuals, gammas, out_means):
    """Per-replicate means of multiplier-bootstrap paths.

    ``gammas`` is (reps, T); replicate b rebuilds the series with errors
    ``residuals[t] * gammas[b, t]`` from the shared initial lag state, and
    ``out_means[b]`` receives its n series means over t = 1..T.
    """
    reps = gammas.shape[0]
    t_len, n = residuals.shape
    kn = a_stacked.shape[1]
    for b in range(reps):
        state = init_state.copy()
        acc = np.zeros(n)
        for t in range(t_len):
            x = np.dot(a_stacked, state)
            g = gammas[b, t]
            for i in range(n):
                x[i] += residuals[t, i] * g
                acc[i] += x[i]
            for j in range(kn - 1, n - 1, -1):
                state[j] = state[j - n]
            for i in range(n):
                state[i] = x[i]
        for i in range(n):
            out_means[b, i] = acc[i] / t_len


@njit(cache=True, nogil=True)
def cd_lasso(x_cols, y, lam, tol, kkt_tol, max_iter, beta):
    """Cyclic coordinate descent on (1/T)||y - X b||^2 + 2 lam ||b||_1.

    ``x_cols`` must be Fortran-ordered for fast column access; ``beta`` is
    the warm start and is updated in place. The coordinate soft-threshold
    level is ``lam * T`` on the unnormalized inner product, which is the
    closed-form minimizer under this objective's 2-lambda parameterization.

    Returns ``(sweeps, converged, kkt_violation, objective, monotone_ok)``.
    Convergence requires both a max coefficient change below ``tol`` and the
    KKT conditions within ``kkt_tol``.
    """
    t_len, p_len = x_cols.shape
    colsq = np.empty(p_len)
    for p in range(p_len):
        s = 0.0
        for t in range(t_len):
            s += x_cols[t, p] * x_cols[t, p]
        colsq[p] = s

    r = y.copy()
    for p in range(p_len):
        bp = beta[p]
        if bp != 0.0:
            for t in range(t_len):
                r[t] -= x_cols[t, p] * bp

    thr = lam * t_len
    # Guard against boundary ties: at lam = lambda_max the inner product and
    # the threshold are equal up to summation order, and rounding must not
    # admit a ~1e-17 ghost coefficient. Multiplicative so that rescaling the
    # problem rescales the guard exactly.
    thr_eps = 1e-12 * thr
    prev_obj = np.inf
    monotone_ok = True
    converged = False
    kkt_viol = np.inf
    sweeps = 0
    for _ in range(max_iter):
        sweeps += 1
        max_change = 0.0
        for p in range(p_len):
            if colsq[p] == 0.0:
                continue
            bp = beta[p]
            z = colsq[p] * bp
            for t in range(t_len):
                z += x_cols[t, p] * r[t]
            if z > thr + thr_eps:
                bnew = (z - thr) / colsq[p]
            elif z < -(thr + thr_eps):
                bnew = (z + thr) / colsq[p]
            else:
                bnew = 0.0
            d = bnew - bp
            if d != 0.0:
                beta[p] = bnew
                for t in range(t_len):
                    r[t] -= d * x_cols[t, p]
                ad = abs(d)
                if ad > max_change:
                    max_change = ad

        obj = 0.0
        for t in range(t_len):
            obj += r[t] * r[t]
        obj /= t_len
        l1 = 0.0
        for p in range(p_len):
            l1 += abs(beta[p])
        obj += 2.0 * lam * l1
        if obj > prev_obj + 1e-10 * max(1.0, abs(prev_obj)):
            monotone_ok = False
        prev_obj = obj

        if max_change < tol:
            kkt_viol = _kkt_violation(x_cols, r, beta, lam, colsq)
            if kkt_viol <= kkt_tol:
                converged = True
                break

    if not converged and np.isinf(kkt_viol):
        kkt_viol = _kkt_violation(x_cols, r, beta, lam, colsq)
    return sweeps, converged, kkt_viol, prev_obj, monotone_ok


@njit(cache=True, nogil=True)
def _kkt_violation(x_cols, r, beta, lam, colsq):
    """Max KKT violation of the 2-lambda lasso objective at ``beta``.

    The smooth-part gradient is g_p = -(2/T) x_p' r; stationarity requires
    |g_p| <= 2 lam at zero coordinates and g_p = -sign(b_p) 2 lam at active
    ones. Zero columns carry no constraint beyond g_p = 0.
    """
    t_len, p_len = x_cols.shape
    worst = 0.0
    for p in range(p_len):
        if colsq[p] == 0.0:
            continue
        g = 0.0
        for t in range(t_len):
            g += x_cols[t, p] * r[t]
        g *= -2.0 / t_len
        if beta[p] == 0.0:
            v = abs(g) - 2.0 * lam
            if v < 0.0:
                v = 0.0
        elif beta[p] > 0.0:
            v = abs(g + 2.0 * lam)
        else:
            v = abs(g - 2.0 * lam)
        if v > worst:
            worst = v
    return worst
