"""Compiled inner loops shared by the sequential and parallel solvers.

Matrices arrive as raw CSC arrays (indptr, indices, data). ``x`` is the
signed weight vector; a duplicated-space index ``j`` in [0, 2d) refers to the
negative copy of column ``j`` when ``j < d`` and to the positive copy of
column ``j - d`` otherwise, so that ``x[k] = xhat[d + k] - xhat[k]``.
"""

import math

import numpy as np
from numba import njit

from .atomics import atomic_add, atomic_load, compare_and_swap

SQUARED = 0
LOGISTIC = 1

FIXED = 0
CDN = 1

STATUS_OK = 0
STATUS_TARGET = 1
STATUS_NONFINITE = 2

HESSIAN_FLOOR = 1e-12


@njit(cache=True, nogil=True)
def loss_at(z, y, loss):
    if loss == SQUARED:
        r = z - y
        return 0.5 * r * r
    m = y * z
    return math.log1p(math.exp(-abs(m))) + max(0.0, -m)


@njit(cache=True, nogil=True)
def dloss_at(z, y, loss):
    if loss == SQUARED:
        return z - y
    m = y * z
    # -y * sigmoid(-m), evaluated without overflow
    if m >= 0.0:
        e = math.exp(-m)
        return -y * e / (1.0 + e)
    return -y / (1.0 + math.exp(m))


@njit(cache=True, nogil=True)
def d2loss_at(z, y, loss):
    if loss == SQUARED:
        return 1.0
    e = math.exp(-abs(y * z))
    return e / ((1.0 + e) * (1.0 + e))


@njit(cache=True, nogil=True)
def loss_change(z, y, dz, loss):
    """``loss_at(z + dz) - loss_at(z)`` without cancellation for small ``dz``."""
    if loss == SQUARED:
        return dz * (z - y) + 0.5 * dz * dz
    m = y * z
    if m >= 0.0:
        e = math.exp(-m)
        sig = e / (1.0 + e)
    else:
        sig = 1.0 / (1.0 + math.exp(m))
    return math.log1p(sig * math.expm1(-y * dz))


@njit(cache=True, nogil=True)
def penalized_linear(xk, s, g, lam):
    """``g * s + lam * (|xk + s| - |xk|)``, factored when the sign is kept.

    The factored form avoids cancelling ``g * s`` against ``lam * s`` near
    stationarity, where both are large relative to their sum.
    """
    t = xk + s
    if xk > 0.0 and t >= 0.0:
        return s * (g + lam)
    if xk < 0.0 and t <= 0.0:
        return s * (g - lam)
    return g * s + lam * (abs(t) - abs(xk))


@njit(cache=True, nogil=True)
def objective(ax, x, y, loss, lam):
    s = 0.0
    for i in range(ax.shape[0]):
        s += loss_at(ax[i], y[i], loss)
    l1 = 0.0
    for k in range(x.shape[0]):
        l1 += abs(x[k])
    return s + lam * l1


@njit(cache=True, nogil=True)
def count_nonzero(x):
    c = 0
    for k in range(x.shape[0]):
        if x[k] != 0.0:
            c += 1
    return c


@njit(cache=True, nogil=True)
def smooth_grad(k, indptr, indices, data, y, ax, loss):
    g = 0.0
    for p in range(indptr[k], indptr[k + 1]):
        i = indices[p]
        g += data[p] * dloss_at(ax[i], y[i], loss)
    return g


@njit(cache=True, nogil=True)
def fixed_step(j, d, xk, g, lam, beta, scale):
    """Clipped step for duplicated coordinate ``j`` given its column's smooth gradient."""
    s = -1.0 if j < d else 1.0
    xh = max(s * xk, 0.0)
    return max(-xh, -scale * (s * g + lam) / beta)


@njit(cache=True, nogil=True)
def settle(old, pos, neg):
    """Signed weight from updated copies; a copy step may cancel the other copy
    down to zero but never carries the weight through zero."""
    new = pos - neg
    if old > 0.0 and new < 0.0:
        return 0.0
    if old < 0.0 and new > 0.0:
        return 0.0
    return new


@njit(cache=True, nogil=True)
def fold(xk, j, d, delta):
    """Signed weight after adding ``delta`` to one duplicated copy, clamped at 0."""
    pos = max(xk, 0.0)
    neg = max(-xk, 0.0)
    if j < d:
        neg = max(neg + delta, 0.0)
    else:
        pos = max(pos + delta, 0.0)
    return settle(xk, pos, neg)


@njit(cache=True, nogil=True)
def cdn_step(k, xk, indptr, indices, data, y, ax, loss, lam, shrink, sigma, max_bt):
    """Newton step with backtracking on signed coordinate ``k``.

    Returns (step, smooth gradient, backtracks, exhausted).
    """
    lo = indptr[k]
    hi = indptr[k + 1]
    g = 0.0
    h = 0.0
    q = 0.0
    for p in range(lo, hi):
        i = indices[p]
        a = data[p]
        g += a * dloss_at(ax[i], y[i], loss)
        q += a * a
        if loss == LOGISTIC:
            h += a * a * d2loss_at(ax[i], y[i], loss)
    if loss == SQUARED:
        # unit-norm columns: the Newton step coincides with the fixed step
        h = 1.0
    else:
        h += HESSIAN_FLOOR
    if g + lam <= h * xk:
        dd = -(g + lam) / h
    elif g - lam >= h * xk:
        dd = -(g - lam) / h
    else:
        dd = -xk
    if dd == 0.0:
        return 0.0, g, 0, False
    decrease = penalized_linear(xk, dd, g, lam)
    t = 1.0
    for b in range(max_bt + 1):
        step = t * dd
        if loss == SQUARED:
            change = penalized_linear(xk, step, g, lam) + 0.5 * step * step * q
        else:
            change = 0.0
            for p in range(lo, hi):
                i = indices[p]
                change += loss_change(ax[i], y[i], step * data[p], loss)
            change += lam * (abs(xk + step) - abs(xk))
        if change <= sigma * t * decrease:
            return step, g, b, False
        t *= shrink
    return 0.0, g, max_bt, True


@njit(cache=True, nogil=True)
def run_rounds(
    draws, variant, d, indptr, indices, data, y, loss, lam, beta, scale,
    shrink, sigma, max_bt, suspend_slack,
    x, ax, acc, touched_flag, touched, suspended,
    record_every, rec_obj, rec_nnz, rec_round, target,
):
    """Synchronous rounds: every step in a round reads the same pre-round state.

    ``draws`` has one row per round. Fixed-step draws are duplicated indices;
    CDN draws are signed columns. Returns
    (rounds done, max |step|, records written, status, backtracks, exhausted).
    """
    n_rounds, p_width = draws.shape
    max_abs = 0.0
    nrec = 0
    status = STATUS_OK
    backtracks = 0
    exhausted = 0
    rounds = 0
    check_each = target > -np.inf
    for r in range(n_rounds):
        nt = 0
        for a in range(p_width):
            j = draws[r, a]
            if variant == FIXED:
                k = j % d
                g = smooth_grad(k, indptr, indices, data, y, ax, loss)
                delta = fixed_step(j, d, x[k], g, lam, beta, scale)
                acc[j] += delta
            else:
                k = j
                delta, g, bt, ex = cdn_step(
                    k, x[k], indptr, indices, data, y, ax, loss, lam, shrink, sigma, max_bt
                )
                delta *= scale
                backtracks += bt
                if ex:
                    exhausted += 1
                if suspend_slack >= 0.0 and delta == 0.0 and x[k] == 0.0 and lam - abs(g) > suspend_slack:
                    suspended[k] = True
                acc[k] += delta
            if abs(delta) > max_abs:
                max_abs = abs(delta)
            if not touched_flag[k]:
                touched_flag[k] = True
                touched[nt] = k
                nt += 1
        for t in range(nt):
            k = touched[t]
            touched_flag[k] = False
            old = x[k]
            if variant == FIXED:
                pos = max(max(old, 0.0) + acc[d + k], 0.0)
                neg = max(max(-old, 0.0) + acc[k], 0.0)
                acc[d + k] = 0.0
                new = settle(old, pos, neg)
            else:
                new = old + acc[k]
            acc[k] = 0.0
            if new != old:
                x[k] = new
                dx = new - old
                for p in range(indptr[k], indptr[k + 1]):
                    ax[indices[p]] += dx * data[p]
        rounds += 1
        recording = record_every > 0 and rounds % record_every == 0
        if recording or check_each:
            f = objective(ax, x, y, loss, lam)
            if recording and nrec < rec_obj.shape[0]:
                rec_obj[nrec] = f
                rec_nnz[nrec] = count_nonzero(x)
                rec_round[nrec] = rounds
                nrec += 1
            if not np.isfinite(f):
                status = STATUS_NONFINITE
                break
            if check_each and f <= target:
                status = STATUS_TARGET
                break
    return rounds, max_abs, nrec, status, backtracks, exhausted


@njit(nogil=True, cache=True)
def async_worker(
    draws, variant, d, indptr, indices, data, y, loss, lam, beta, scale,
    shrink, sigma, max_bt, x, ax, log_k, log_old, log_new, log_on,
):
    """One asynchronous worker: read (possibly stale) state, step, commit.

    Weight commits are CAS loops on ``x[k]`` that re-apply the nonnegativity
    clamp against the value actually being replaced; the step itself is not
    recomputed. Every ``ax`` entry is updated with an atomic add.
    Returns (commits logged, max |step|, CAS retries).
    """
    max_abs = 0.0
    nlog = 0
    retries = 0
    cap = log_k.shape[0]
    for t in range(draws.shape[0]):
        j = draws[t]
        if variant == FIXED:
            k = j % d
            g = smooth_grad(k, indptr, indices, data, y, ax, loss)
            delta = fixed_step(j, d, atomic_load(x, k), g, lam, beta, scale)
        else:
            k = j
            delta, g, bt, ex = cdn_step(
                k, atomic_load(x, k), indptr, indices, data, y, ax, loss, lam, shrink, sigma, max_bt
            )
            delta *= scale
        if delta == 0.0:
            continue
        if abs(delta) > max_abs:
            max_abs = abs(delta)
        while True:
            cur = atomic_load(x, k)
            if variant == FIXED:
                new = fold(cur, j, d, delta)
            else:
                new = cur + delta
            if new == cur:
                break
            if compare_and_swap(x, k, cur, new):
                dx = new - cur
                if log_on and nlog < cap:
                    log_k[nlog] = k
                    log_old[nlog] = cur
                    log_new[nlog] = new
                    nlog += 1
                for p in range(indptr[k], indptr[k + 1]):
                    retries += atomic_add(ax, indices[p], dx * data[p])
                break
            retries += 1
    return nlog, max_abs, retries
