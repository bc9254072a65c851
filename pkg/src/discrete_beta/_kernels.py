"""Hot loops, each in a jitted form (``*_jit``) and a numpy form (``*_np``).

The public wrappers at the bottom pick the jitted form when numba is
available and the potential can be evaluated inside a kernel. The numpy
forms are the reference path and are what runs with
``DISCRETE_BETA_NO_NUMBA=1``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from ._accel import njit, use_numba
from .kernels import log_q_scalar
from .potentials import potential_eval


# ---------------------------------------------------------------------------
# Grid self-interaction: sum_{a != b} w_a w_b log|a - b|
# ---------------------------------------------------------------------------


@njit
def lag_log_sum_jit(w):
    m = w.shape[0]
    s = 0.0
    comp = 0.0
    for k in range(1, m):
        c = 0.0
        for a in range(m - k):
            c += w[a] * w[a + k]
        term = 2.0 * math.log(k) * c
        t = s + term
        if abs(s) >= abs(term):
            comp += (s - t) + term
        else:
            comp += (term - t) + s
        s = t
    return s + comp


def lag_log_sum_np(w):
    m = w.shape[0]
    if m < 2:
        return 0.0
    corr = np.correlate(w, w, mode="full")[m:]  # lags 1..m-1
    return math.fsum(2.0 * np.log(np.arange(1, m)) * corr)


# ---------------------------------------------------------------------------
# Cross sums on the circle: sum_{a,b} m_a n_b log||p_a - q_b||^{-1}, chord > 0 only
# ---------------------------------------------------------------------------


@njit
def chord_cross_jit(p, m, q, n):
    s = 0.0
    comp = 0.0
    for a in range(p.shape[0]):
        if m[a] == 0.0:
            continue
        row = 0.0
        for b in range(q.shape[0]):
            if n[b] == 0.0:
                continue
            dx = p[a, 0] - q[b, 0]
            dy = p[a, 1] - q[b, 1]
            d2 = dx * dx + dy * dy
            if d2 > 0.0:
                row -= 0.5 * n[b] * math.log(d2)
        term = m[a] * row
        t = s + term
        if abs(s) >= abs(term):
            comp += (s - t) + term
        else:
            comp += (term - t) + s
        s = t
    return s + comp


def chord_cross_np(p, m, q, n):
    d2 = (p[:, None, 0] - q[None, :, 0]) ** 2 + (p[:, None, 1] - q[None, :, 1]) ** 2
    with np.errstate(divide="ignore"):
        lg = np.where(d2 > 0, -0.5 * np.log(np.where(d2 > 0, d2, 1.0)), 0.0)
    return math.fsum(m * (lg @ n))


# ---------------------------------------------------------------------------
# Configuration sums
# ---------------------------------------------------------------------------


@njit
def pair_log_q_jit(ell, theta):
    n = ell.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += log_q_scalar(ell[i] - ell[j], theta)
    return s


def pair_log_q_np(ell, theta):
    n = ell.shape[0]
    if n < 2:
        return 0.0
    i, j = np.triu_indices(n, 1)
    d = ell[i] - ell[j]
    return math.fsum(np.log(d) + gammaln(d + theta) - gammaln(d + 1.0 - theta))


@njit
def pair_log_gap_jit(x):
    n = x.shape[0]
    s = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            s += math.log(abs(x[i] - x[j]))
    return s


def pair_log_gap_np(x):
    n = x.shape[0]
    if n < 2:
        return 0.0
    i, j = np.triu_indices(n, 1)
    return math.fsum(np.log(np.abs(x[i] - x[j])))


@njit
def batch_log_weight_jit(lams, theta, kind, params, tx, ty):
    s_count, n = lams.shape
    out = np.empty(s_count)
    ell = np.empty(n)
    for s in range(s_count):
        for i in range(n):
            ell[i] = lams[s, i] + (n - 1 - i) * theta
        acc = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                acc += log_q_scalar(ell[i] - ell[j], theta)
            acc -= theta * n * potential_eval(kind, params, tx, ty, ell[i] / n)
        out[s] = acc
    return out


def batch_log_weight_np(lams, theta, potential):
    s_count, n = lams.shape
    ell = lams + (n - 1 - np.arange(n)) * theta
    acc = -theta * n * potential(ell / n).reshape(s_count, n).sum(axis=1) if n else np.zeros(s_count)
    for i in range(n):
        for j in range(i + 1, n):
            d = ell[:, i] - ell[:, j]
            acc = acc + np.log(d) + gammaln(d + theta) - gammaln(d + 1.0 - theta)
    return acc


# ---------------------------------------------------------------------------
# Metropolis chain with single-site +-1 moves
# ---------------------------------------------------------------------------


@njit
def _local_delta_jit(lam, i, new_li, theta, kind, params, tx, ty):
    n = lam.shape[0]
    old = lam[i] + (n - 1 - i) * theta
    new = new_li + (n - 1 - i) * theta
    d = 0.0
    for j in range(n):
        if j == i:
            continue
        lj = lam[j] + (n - 1 - j) * theta
        if j > i:
            d += log_q_scalar(new - lj, theta) - log_q_scalar(old - lj, theta)
        else:
            d += log_q_scalar(lj - new, theta) - log_q_scalar(lj - old, theta)
    d -= theta * n * (potential_eval(kind, params, tx, ty, new / n) - potential_eval(kind, params, tx, ty, old / n))
    return d


@njit
def mcmc_chunk_jit(lam, theta, lower, upper, idx, signs, logu, keep_every, first_keep,
                   kind, params, tx, ty, out):
    """Run len(idx) proposals in place on ``lam``; store states when step % keep_every == first_keep."""
    n = lam.shape[0]
    accepted = 0
    stored = 0
    for s in range(idx.shape[0]):
        i = idx[s]
        new_li = lam[i] + signs[s]
        ok = True
        if new_li < lower or new_li > upper:
            ok = False
        elif i > 0 and new_li > lam[i - 1]:
            ok = False
        elif i < n - 1 and new_li < lam[i + 1]:
            ok = False
        if ok:
            d = _local_delta_jit(lam, i, new_li, theta, kind, params, tx, ty)
            if d >= 0.0 or logu[s] < d:
                lam[i] = new_li
                accepted += 1
        if s % keep_every == first_keep:
            for k in range(n):
                out[stored, k] = lam[k]
            stored += 1
    return accepted, stored


def local_delta_np(lam, i, new_li, theta, potential):
    n = lam.shape[0]
    shift = (n - 1 - np.arange(n)) * theta
    ell = lam + shift
    old = ell[i]
    new = new_li + shift[i]
    others = np.delete(ell, i)
    sgn = np.where(np.arange(n - 1) < i, -1.0, 1.0)  # earlier particles sit to the right
    d_old = sgn * (old - others)
    d_new = sgn * (new - others)
    lq = lambda d: np.log(d) + gammaln(d + theta) - gammaln(d + 1.0 - theta)
    delta = float(np.sum(lq(d_new) - lq(d_old))) if n > 1 else 0.0
    vals = potential(np.array([new / n, old / n]))
    return delta - theta * n * float(vals[0] - vals[1])


def mcmc_chunk_np(lam, theta, lower, upper, idx, signs, logu, keep_every, first_keep, potential, out):
    n = lam.shape[0]
    accepted = 0
    stored = 0
    for s in range(idx.shape[0]):
        i = int(idx[s])
        new_li = lam[i] + signs[s]
        ok = lower <= new_li <= upper
        if ok and i > 0 and new_li > lam[i - 1]:
            ok = False
        if ok and i < n - 1 and new_li < lam[i + 1]:
            ok = False
        if ok:
            d = local_delta_np(lam, i, new_li, theta, potential)
            if d >= 0.0 or logu[s] < d:
                lam[i] = new_li
                accepted += 1
        if s % keep_every == first_keep:
            out[stored] = lam
            stored += 1
    return accepted, stored


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def lag_log_sum(w, accel=None):
    w = np.ascontiguousarray(w, dtype=float)
    return lag_log_sum_jit(w) if _on(accel) else lag_log_sum_np(w)


def chord_cross(p, m, q, n, accel=None):
    args = [np.ascontiguousarray(a, dtype=float) for a in (p, m, q, n)]
    return chord_cross_jit(*args) if _on(accel) else chord_cross_np(*args)


def pair_log_q(ell, theta, accel=None):
    ell = np.ascontiguousarray(ell, dtype=float)
    return pair_log_q_jit(ell, float(theta)) if _on(accel) else pair_log_q_np(ell, theta)


def pair_log_gap(x, accel=None):
    x = np.ascontiguousarray(x, dtype=float)
    return pair_log_gap_jit(x) if _on(accel) else pair_log_gap_np(x)


def batch_log_weight(lams, theta, potential, accel=None):
    lams = np.ascontiguousarray(lams, dtype=float)
    if _on(accel) and potential.jittable:
        return batch_log_weight_jit(lams, float(theta), *potential.kernel_args())
    return batch_log_weight_np(lams, theta, potential)


def mcmc_chunk(lam, theta, lower, upper, idx, signs, logu, keep_every, first_keep, potential, out, accel=None):
    if _on(accel) and potential.jittable:
        return mcmc_chunk_jit(lam, float(theta), lower, upper, idx, signs, logu, keep_every, first_keep,
                              *potential.kernel_args(), out)
    return mcmc_chunk_np(lam, theta, lower, upper, idx, signs, logu, keep_every, first_keep, potential, out)


def _on(accel):
    return use_numba() if accel is None else (accel and use_numba())
