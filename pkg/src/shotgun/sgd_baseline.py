"""Stochastic gradient descent for L1 losses with lazy shrinkage.

Each step samples one row ``i`` and follows an unbiased estimate of the
gradient of the full objective, ``n * grad L_i(x)``, followed by soft
thresholding by ``eta * lam``. Coordinates outside the row's support only
need the shrinkage, and consecutive soft thresholds compose additively, so
they are brought up to date the next time a sample touches them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K
from ._engine import SolveResult, TraceRow
from .matrix_io import DesignMatrix
from .objective import Problem, objective_at


@njit(cache=True, nogil=True)
def _soft(v, c):
    if v > c:
        return v - c
    if v < -c:
        return v + c
    return 0.0


@njit(cache=True, nogil=True)
def _pending(k, t, last, c, cum, decay):
    if decay:
        return cum[t] - cum[last[k]]
    return (t - last[k]) * c


@njit(cache=True, nogil=True)
def _epoch_lazy(order, indptr, indices, data, y, loss, n_scale, eta, c, cum, decay, x, last, t):
    for i in order:
        t += 1
        lo = indptr[i]
        hi = indptr[i + 1]
        z = 0.0
        for p in range(lo, hi):
            k = indices[p]
            if last[k] < t:
                x[k] = _soft(x[k], _pending(k, t, last, c, cum, decay))
                last[k] = t
            z += data[p] * x[k]
        rate = eta / math.sqrt(t) if decay else eta
        step = rate * n_scale * K.dloss_at(z, y[i], loss)
        for p in range(lo, hi):
            x[indices[p]] -= step * data[p]
    return t


@njit(cache=True, nogil=True)
def _epoch_eager(order, indptr, indices, data, y, loss, n_scale, eta, c, cum, decay, x, t):
    for i in order:
        t += 1
        amount = cum[t] - cum[t - 1] if decay else c
        for k in range(x.shape[0]):
            x[k] = _soft(x[k], amount)
        lo = indptr[i]
        hi = indptr[i + 1]
        z = 0.0
        for p in range(lo, hi):
            z += data[p] * x[indices[p]]
        rate = eta / math.sqrt(t) if decay else eta
        step = rate * n_scale * K.dloss_at(z, y[i], loss)
        for p in range(lo, hi):
            x[indices[p]] -= step * data[p]
    return t


@njit(cache=True, nogil=True)
def _flush(x, last, t, c, cum, decay):
    for k in range(x.shape[0]):
        if last[k] < t:
            x[k] = _soft(x[k], _pending(k, t, last, c, cum, decay))
            last[k] = t


@dataclass
class SgdConfig:
    rates: list[float] = field(default_factory=lambda: list(np.logspace(-4, 0, 14)))
    epochs: int = 50
    seed: int = 0
    lam: float | None = None  # overrides the problem's lambda when set
    lazy: bool = True
    decay: bool = False  # rate / sqrt(t) instead of a constant rate
    workers: int = 1

    def __post_init__(self):
        if not self.rates:
            raise ValueError("rate grid is empty")
        r = np.asarray(self.rates, dtype=float)
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValueError("rates must be positive and increasing")


def sgd_run(problem: Problem, rate: float, epochs: int, rng, *, lazy=True, decay=False):
    """SGD at one learning rate; returns (x, per-epoch objectives)."""
    csr = problem.matrix.csc.tocsr()
    csr.sort_indices()
    indptr = csr.indptr.astype(np.int64)
    indices = csr.indices.astype(np.int64)
    data = csr.data.astype(np.float64)
    n, d = problem.n, problem.d
    total = epochs * n
    c = rate * problem.lam
    if decay:
        cum = np.concatenate([[0.0], np.cumsum(c / np.sqrt(np.arange(1, total + 1)))])
    else:
        cum = np.zeros(1)
    x = np.zeros(d)
    last = np.zeros(d, dtype=np.int64)
    t = 0
    history = []
    for _ in range(epochs):
        order = rng.permutation(n).astype(np.int64)
        if lazy:
            t = _epoch_lazy(order, indptr, indices, data, problem.y, problem.loss_code, float(n),
                            rate, c, cum, decay, x, last, t)
            _flush(x, last, t, c, cum, decay)
        else:
            t = _epoch_eager(order, indptr, indices, data, problem.y, problem.loss_code, float(n),
                             rate, c, cum, decay, x, t)
        f = objective_at(problem, x)
        history.append(f)
        if not math.isfinite(f):
            break
    return x, history


def sgd_solve(problem: Problem, cfg: SgdConfig | None = None) -> SolveResult:
    """Run every grid rate and keep the one with the lowest training objective."""
    cfg = cfg or SgdConfig()
    if cfg.lam is not None:
        problem = problem.with_lambda(cfg.lam)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(len(cfg.rates))]

    def one(i):
        return sgd_run(problem, cfg.rates[i], cfg.epochs, streams[i], lazy=cfg.lazy, decay=cfg.decay)

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        runs = list(pool.map(one, range(len(cfg.rates))))

    finals = [h[-1] if h and math.isfinite(h[-1]) else math.inf for _, h in runs]
    if all(math.isinf(f) for f in finals):
        raise FloatingPointError("SGD diverged at every rate in the grid")
    best = int(np.argmin(finals))
    x, history = runs[best]
    n = problem.n
    trace = [TraceRow(math.nan, (e + 1) * n, f, 0, e + 1) for e, f in enumerate(history)]
    meta = {
        "rate": cfg.rates[best],
        "grid": {float(r): (None if math.isinf(f) else f) for r, f in zip(cfg.rates, finals)},
        "diverged_rates": [float(r) for r, f in zip(cfg.rates, finals) if math.isinf(f)],
    }
    return SolveResult(x, finals[best], len(history), len(history) * n, "max-iters", trace, 0, meta)


def held_out_error(problem: Problem, x, holdout: tuple[DesignMatrix, np.ndarray]) -> float:
    """Misclassification rate on held-out rows; a zero margin predicts +1."""
    m, y = holdout
    pred = np.where(m.matvec(x) >= 0.0, 1.0, -1.0)
    return float(np.mean(pred != np.asarray(y)))
