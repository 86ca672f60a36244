"""Fused numba kernels for the sweep-critical loops.

The coordinate-ascent inner loops are memory-bound in pure numpy (dozens
of (M, N, K) temporaries per sweep); these kernels walk each edge once
with inlined scalar digamma/trigamma (upward recurrence to 10 plus the
asymptotic Bernoulli series, ~1e-14 relative for positive arguments).
Loop order is fixed and no threading is used, so results are bit-stable
across runs.  Components with exactly zero responsibility are skipped:
their terms are exact zeros on both sides of every difference.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _digamma(x: float) -> float:
    acc = 0.0
    while x < 10.0:
        acc -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    return acc + np.log(x) - 0.5 * inv - inv2 * (
        1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (
            1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))))


@njit(cache=True, inline="always")
def _trigamma(x: float) -> float:
    acc = 0.0
    while x < 10.0:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    return acc + inv + 0.5 * inv2 + inv * inv2 * (
        1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (
            1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))))


@njit(cache=True)
def resp_update(alpha_u, beta_u, alpha_v, beta_v, x, mask, resp_old,
                psi_delta, use_old, out):
    """Softmax responsibility update; returns the free-energy change.

    ``use_old`` toggles the contribution of the pre-update state (False
    when responsibilities are being filled for the first time, making the
    returned value the new lambda-dependent total instead of a change).
    """
    M, K = alpha_u.shape
    N = alpha_v.shape[0]
    e = np.empty(K)
    total = 0.0
    for i in range(M):
        for j in range(N):
            if not mask[i, j]:
                for k in range(K):
                    out[i, j, k] = 0.0
                continue
            xv = x[i, j]
            mx = -np.inf
            old = 0.0
            for k in range(K):
                m = alpha_u[i, k] - alpha_v[j, k]
                v = beta_u[i, k] + beta_v[j, k]
                eta = v + m * m
                zeta = 4.0 * m * m * v + 2.0 * v * v
                ratio = eta / zeta
                ek = _digamma(eta * ratio) - np.log(ratio) - xv * eta + psi_delta[k]
                e[k] = ek
                if ek > mx:
                    mx = ek
                if use_old:
                    lam = resp_old[i, j, k]
                    if lam > 0.0:
                        old += lam * (ek - np.log(lam))
            ssum = 0.0
            for k in range(K):
                w = np.exp(e[k] - mx)
                e[k] = w
                ssum += w
            total += mx + np.log(ssum) - old
            for k in range(K):
                out[i, j, k] = e[k] / ssum
    return total


@njit(cache=True)
def side_gradients(a_mv, b_mv, a_ot, b_ot, lam, x, ab, grad_a, grad_b, lik_old):
    """Free-energy partials and data-term totals for one side's nodes.

    ``lam`` and ``x`` are arranged with the moving side on the first axis;
    ``ab`` is the vector of gamma means (shape/rate).
    """
    P, K = a_mv.shape
    Q = a_ot.shape[0]
    for p in range(P):
        for k in range(K):
            grad_a[p, k] = 0.0
            grad_b[p, k] = 0.0
        acc = 0.0
        for q in range(Q):
            xv = x[p, q]
            for k in range(K):
                lamv = lam[p, q, k]
                if lamv == 0.0:
                    continue
                m = a_mv[p, k] - a_ot[q, k]
                v = b_mv[p, k] + b_ot[q, k]
                eta = v + m * m
                zeta = 4.0 * m * m * v + 2.0 * v * v
                ratio = eta / zeta
                s = eta * ratio
                tri = _trigamma(s)
                acc += lamv * (_digamma(s) - np.log(ratio) - xv * eta)
                dg_de = tri * 2.0 * ratio - 1.0 / eta - xv
                dg_dz = 1.0 / zeta - tri * (s / zeta)
                grad_a[p, k] += lamv * (2.0 * m * dg_de + 8.0 * m * v * dg_dz)
                grad_b[p, k] += lamv * (dg_de + (4.0 * m * m + 4.0 * v) * dg_dz)
        lik_old[p] = acc
        for k in range(K):
            grad_a[p, k] -= ab[k] * a_mv[p, k]
            grad_b[p, k] += 0.5 / b_mv[p, k] - 0.5 * ab[k]


@njit(cache=True)
def position_phase(a_mv, b_mv, a_ot, b_ot, lam, x, ab, steps, eps_floor):
    """Backtracked natural-gradient update of every node on one side.

    Visits nodes in ascending index order; for each node proposes the
    joint K-dimensional move at twice its stored rate, halving until the
    node's free-energy terms do not decrease (or the rate hits the floor,
    leaving the position unchanged).  Mutates positions and stored rates
    in place; returns (total accepted change, floored-step count).
    """
    P, K = a_mv.shape
    Q = a_ot.shape[0]
    grad_a = np.empty(K)
    grad_b = np.empty(K)
    a_new = np.empty(K)
    b_new = np.empty(K)
    total = 0.0
    floored = 0
    for p in range(P):
        lik_old = 0.0
        for k in range(K):
            grad_a[k] = 0.0
            grad_b[k] = 0.0
        for q in range(Q):
            xv = x[p, q]
            for k in range(K):
                lamv = lam[p, q, k]
                if lamv == 0.0:
                    continue
                m = a_mv[p, k] - a_ot[q, k]
                v = b_mv[p, k] + b_ot[q, k]
                eta = v + m * m
                zeta = 4.0 * m * m * v + 2.0 * v * v
                ratio = eta / zeta
                s = eta * ratio
                tri = _trigamma(s)
                lik_old += lamv * (_digamma(s) - np.log(ratio) - xv * eta)
                dg_de = tri * 2.0 * ratio - 1.0 / eta - xv
                dg_dz = 1.0 / zeta - tri * (s / zeta)
                grad_a[k] += lamv * (2.0 * m * dg_de + 8.0 * m * v * dg_dz)
                grad_b[k] += lamv * (dg_de + (4.0 * m * m + 4.0 * v) * dg_dz)
        pen_old = 0.0
        for k in range(K):
            grad_a[k] -= ab[k] * a_mv[p, k]
            grad_b[k] += 0.5 / b_mv[p, k] - 0.5 * ab[k]
            pen_old += (-0.5 * ab[k] * (b_mv[p, k] + a_mv[p, k] ** 2)
                        + 0.5 * np.log(b_mv[p, k]))
        eps = 2.0 * steps[p]
        while True:
            ok = True
            for k in range(K):
                a_new[k] = a_mv[p, k] + eps * b_mv[p, k] * grad_a[k]
                b_new[k] = b_mv[p, k] * np.exp(2.0 * eps * b_mv[p, k] * grad_b[k])
                if not (np.isfinite(a_new[k]) and np.isfinite(b_new[k])
                        and b_new[k] > 0.0):
                    ok = False
                    break
            if ok:
                pen_new = 0.0
                for k in range(K):
                    pen_new += (-0.5 * ab[k] * (b_new[k] + a_new[k] ** 2)
                                + 0.5 * np.log(b_new[k]))
                lik_new = 0.0
                for q in range(Q):
                    xv = x[p, q]
                    for k in range(K):
                        lamv = lam[p, q, k]
                        if lamv == 0.0:
                            continue
                        m = a_new[k] - a_ot[q, k]
                        v = b_new[k] + b_ot[q, k]
                        eta = v + m * m
                        zeta = 4.0 * m * m * v + 2.0 * v * v
                        ratio = eta / zeta
                        lik_new += lamv * (_digamma(eta * ratio)
                                           - np.log(ratio) - xv * eta)
                delta = (lik_new - lik_old) + (pen_new - pen_old)
                if np.isfinite(delta) and delta >= 0.0:
                    for k in range(K):
                        a_mv[p, k] = a_new[k]
                        b_mv[p, k] = b_new[k]
                    steps[p] = eps
                    total += delta
                    break
            eps *= 0.5
            if eps < eps_floor:
                steps[p] = eps_floor
                floored += 1
                break
    return total, floored
