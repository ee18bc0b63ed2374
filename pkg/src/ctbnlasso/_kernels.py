"""Compiled inner loops of the L1 path solver.

Pure float64 numerics, no RNG and no fastmath: results are bit-stable
for fixed inputs.  The accelerated proximal iteration lives here because
a path fit touches it millions of times; everything else in the package
stays in plain numpy.

The iteration runs in column-equilibrated coordinates psi = c * theta
(so the design is Zs = Z / c columnwise), which is a pure
re-parameterization: the objective value, the minimizer and the KKT
residuals reported are all in the original coordinates.  The penalty on
coordinate j becomes lam / c_j, handled exactly by the proximal step.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

EXP_CLAMP = 700.0


@njit(cache=True)
def _loss_from_linpred(u, n, t, T):
    acc = 0.0
    for i in range(u.size):
        if u[i] > EXP_CLAMP:
            return np.inf
        acc += -n[i] * u[i] + t[i] * math.exp(u[i])
    return acc / T


@njit(cache=True)
def _residual(u, n, t):
    r = np.empty(u.size)
    for i in range(u.size):
        r[i] = t[i] * math.exp(u[i]) - n[i]
    return r


@njit(cache=True)
def _penalty(x, lam_col):
    acc = 0.0
    for j in range(1, x.size):
        acc += lam_col[j] * abs(x[j])
    return acc


@njit(cache=True)
def _kkt_parts(gs, psi, c, lam):
    """KKT residuals in original coordinates from scaled quantities."""
    ki = abs(gs[0] * c[0])
    kp = 0.0
    for j in range(1, psi.size):
        g = gs[j] * c[j]
        if psi[j] > 0.0:
            v = abs(g + lam)
        elif psi[j] < 0.0:
            v = abs(g - lam)
        else:
            v = abs(g) - lam
            if v < 0.0:
                v = 0.0
        if v > kp:
            kp = v
    return ki, kp


@njit(cache=True)
def fista_kernel(Zs, ZsT, n, t, T, lam, c, psi0, L0, eta, max_iter, tol):
    """Accelerated proximal gradient with backtracking for one penalty level.

    The intercept (coordinate 0) is never thresholded; momentum is
    dropped whenever it stops decreasing the objective.  Stops when the
    objective change is below tol (relative) and the original-space KKT
    residuals pass 10*tol (intercept) and 10*tol*max(1, lam) (penalized
    coordinates).  Returns (theta, objective, loss, kkt_intercept,
    kkt_penalized, iterations, converged, L).
    """
    D = psi0.size
    lam_col = np.empty(D)
    lam_col[0] = 0.0
    for j in range(1, D):
        lam_col[j] = lam / c[j]

    x = psi0.copy()
    ux = np.dot(Zs, x)
    fx = _loss_from_linpred(ux, n, t, T)
    Fx = fx + _penalty(x, lam_col)
    gx = np.dot(ZsT, _residual(ux, n, t)) / T
    ki, kp = _kkt_parts(gx, x, c, lam)
    tol_i = 10.0 * tol
    tol_p = 10.0 * tol * max(1.0, lam)
    if np.isfinite(Fx) and ki <= tol_i and kp <= tol_p:
        return x / c, Fx, fx, ki, kp, 0, True, L0

    best_x = x.copy()
    best_F = Fx
    y = x.copy()
    tk = 1.0
    L = L0
    F_prev = Fx
    converged = False
    iters = 0
    stalled = False
    for it in range(1, max_iter + 1):
        iters = it
        uy = np.dot(Zs, y)
        fy = _loss_from_linpred(uy, n, t, T)
        if not np.isfinite(fy):
            # momentum overshot the exp clamp: restart from the last iterate
            y = x.copy()
            tk = 1.0
            uy = np.dot(Zs, y)
            fy = _loss_from_linpred(uy, n, t, T)
        gy = np.dot(ZsT, _residual(uy, n, t)) / T

        fc = np.inf
        cand = x
        uc = uy
        while True:
            cand = y - gy / L
            for j in range(1, D):
                v = cand[j]
                thr = lam_col[j] / L
                if v > thr:
                    cand[j] = v - thr
                elif v < -thr:
                    cand[j] = v + thr
                else:
                    cand[j] = 0.0
            uc = np.dot(Zs, cand)
            fc = _loss_from_linpred(uc, n, t, T)
            q = fy
            dsq = 0.0
            for j in range(D):
                dj = cand[j] - y[j]
                q += gy[j] * dj
                dsq += dj * dj
            q += 0.5 * L * dsq
            if fc <= q + 1e-12 * (1.0 + abs(fy)):
                break
            L *= eta
            if L > 1e18:
                stalled = True
                break
        if stalled:
            break
        Fc = fc + _penalty(cand, lam_col)
        if Fc > F_prev:
            # adaptive restart: drop the momentum when it stops helping
            y = cand.copy()
            tk = 1.0
        else:
            tk1 = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            y = cand + ((tk - 1.0) / tk1) * (cand - x)
            tk = tk1
        x = cand
        if Fc < best_F:
            best_F = Fc
            best_x = x.copy()
        if abs(F_prev - Fc) <= tol * max(1.0, abs(Fc)):
            gx = np.dot(ZsT, _residual(uc, n, t)) / T
            ki, kp = _kkt_parts(gx, x, c, lam)
            if ki <= tol_i and kp <= tol_p:
                converged = True
                F_prev = Fc
                break
        F_prev = Fc

    if converged:
        return x / c, F_prev, F_prev - _penalty(x, lam_col), ki, kp, iters, True, L
    # did not certify: report the best iterate seen (never worse than psi0)
    ub = np.dot(Zs, best_x)
    fb = _loss_from_linpred(ub, n, t, T)
    gb = np.dot(ZsT, _residual(np.minimum(ub, EXP_CLAMP), n, t)) / T
    ki, kp = _kkt_parts(gb, best_x, c, lam)
    return best_x / c, best_F, fb, ki, kp, iters, False, L
