"""Shotgun: P coordinate updates per round.

Two execution modes share one configuration:

``sync``
    Exact simulation. Each round draws P duplicated coordinates i.i.d.,
    computes every step from the same pre-round state and applies the summed
    update at once. Deterministic given the seed.
``async``
    P worker threads running compiled, GIL-free loops against shared ``x``
    and ``ax``. Reads may be stale; every write is an atomic
    compare-and-swap, so no addition is lost. Workers run one epoch's draws
    between coordinator checkpoints, where the objective snapshot feeds the
    convergence test and the divergence guard.
"""

from __future__ import annotations

import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from ._engine import SolveResult, TraceRow, Workspace, apply_rounds, certify, run_sync, variant_code
from .objective import (
    Problem,
    SolverState,
    duplicated_gradient,
    objective_value,
    to_duplicated,
)
from .spectral import SpectralEstimate, power_iteration

MODES = {"sync": "sync", "sync-sim": "sync", "async": "async"}


@dataclass
class ParConfig:
    p: int = 1
    mode: str = "sync"
    seed: int = 0
    tol: float = 1e-5
    max_epochs: int = 1000
    max_updates: int | None = None
    variant: str = "fixed"
    guard_period: int = 1
    blowup: float = 10.0
    damping: bool = False  # scale steps by 1/P
    shrink: float = 0.5
    sigma: float = 0.01
    max_backtracks: int = 30
    active_set: bool = False  # CDN, sync mode only
    trace_every: int = 0
    log_commits: bool = False  # async only

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not self.blowup > 1:
            raise ValueError("blow-up factor must exceed 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.mode = MODES[self.mode]
        variant_code(self.variant)

    @property
    def step_scale(self) -> float:
        return 1.0 / self.p if self.damping else 1.0


@dataclass
class RoundUpdate:
    """The multiset of drawn duplicated indices and their individual steps."""

    indices: np.ndarray
    deltas: np.ndarray
    d: int

    @property
    def collective(self) -> np.ndarray:
        """Summed (unclamped) update over all 2d duplicated coordinates."""
        out = np.zeros(2 * self.d)
        np.add.at(out, self.indices, self.deltas)
        return out


def _fixed_steps(problem: Problem, state: SolverState, idx, scale: float = 1.0) -> np.ndarray:
    indptr, indices, data = problem.csc_arrays()
    d = problem.d
    out = np.empty(len(idx))
    for a, j in enumerate(idx):
        k = j % d
        g = K.smooth_grad(k, indptr, indices, data, problem.y, state.ax, problem.loss_code)
        out[a] = K.fixed_step(j, d, state.x[k], g, problem.lam, problem.beta, scale)
    return out


def shotgun_round_sync(problem: Problem, state: SolverState, cfg: ParConfig, rng) -> RoundUpdate:
    """Draw P duplicated coordinates, step each from the same state, apply the sum.

    Colliding draws of one duplicated coordinate are summed and the resulting
    weight is clamped at zero.
    """
    idx = rng.integers(0, 2 * problem.d, size=cfg.p)
    deltas = _fixed_steps(problem, state, idx, cfg.step_scale)
    apply_rounds(problem, state, idx.reshape(1, -1), variant=K.FIXED, ws=Workspace(problem.d),
                 scale=cfg.step_scale)
    return RoundUpdate(idx, deltas, problem.d)


def interference_decomposition(problem: Problem, x, update: RoundUpdate) -> tuple[float, float]:
    """Split the round's objective change bound into progress and interference.

    Returns ``(-1/2 sum delta^2, 1/2 sum_{a != b} G[i_a, i_b] delta_a delta_b)``
    where G is the Gram matrix of the duplicated columns.
    """
    if problem.loss != "squared":
        raise ValueError("the progress/interference split is stated for the squared loss")
    d = problem.d
    idx = np.asarray(update.indices)
    delta = np.asarray(update.deltas, dtype=np.float64)
    signs = np.where(idx < d, -1.0, 1.0)
    cols = idx % d
    a = problem.matrix.csc[:, cols]
    combined = a @ (signs * delta)
    diag = np.asarray(a.multiply(a).sum(axis=0)).ravel() * delta**2
    progress = -0.5 * float(np.sum(delta**2))
    interference = 0.5 * (float(combined @ combined) - float(np.sum(diag)))
    return progress, interference


def lemma4_empirical_check(problem: Problem, x, pp: int, trials: int, rng, rho: float | None = None):
    """Compare a Monte-Carlo estimate of a round's expected objective change to its bound.

    ``rho`` is the spectral radius of ``A^T A``; the duplicated Gram matrix
    has radius ``2 * rho``, which is what the interference bound uses.
    Returns ``(lhs_mc, rhs, stderr)``.
    """
    d = problem.d
    if rho is None:
        rho = power_iteration(problem.matrix, tol=1e-10, max_iters=10_000, seed=0).rho
    rho_dup = 2.0 * rho
    if not pp < 2 * d / rho_dup + 1:
        raise ValueError(f"P={pp} violates P < d/rho + 1 = {d / rho + 1:.3f}")
    state = SolverState.from_weights(problem, x)
    xhat = to_duplicated(state.x)
    grad = duplicated_gradient(problem, xhat)
    delta = np.maximum(-xhat, -grad / problem.beta)
    factor = 1.0 + (pp - 1) * rho_dup / (2 * d)
    rhs = pp * float(np.mean(delta * grad + 0.5 * problem.beta * factor * delta**2))

    draws = rng.integers(0, 2 * d, size=(trials, pp))
    coll = np.zeros((trials, 2 * d))
    np.add.at(coll, (np.repeat(np.arange(trials), pp), draws.ravel()), delta[draws].ravel())
    signed = coll[:, d:] - coll[:, :d]
    ax1 = state.ax[None, :] + (problem.matrix.csc @ signed.T).T
    y = problem.y
    if problem.loss == "squared":
        loss1 = 0.5 * np.sum((ax1 - y) ** 2, axis=1)
        loss0 = 0.5 * np.sum((state.ax - y) ** 2)
    else:
        loss1 = np.sum(np.logaddexp(0.0, -y * ax1), axis=1)
        loss0 = np.sum(np.logaddexp(0.0, -y * state.ax))
    change = loss1 - loss0 + problem.lam * coll.sum(axis=1)
    return float(change.mean()), rhs, float(change.std(ddof=1) / math.sqrt(trials))


def shotgun_suboptimality_bound(d, beta, xstar_sq_norm, f0, t, p) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    return d * (beta * xstar_sq_norm + 2.0 * f0) / ((t + 1.0) * p)


def theory_annotation(d: int, p: int, est: SpectralEstimate) -> dict:
    return {
        "rho": est.rho,
        "pstar": est.pstar,
        "p_below_d_over_rho_plus_1": bool(p < d / est.rho + 1),
        "p_below_2d_over_rho_plus_1": bool(p < 2 * d / est.rho + 1),
        "spectral_converged": est.converged,
    }


def solve_shotgun(problem: Problem, cfg: ParConfig | None = None, x0=None, *,
                  spectral: SpectralEstimate | None = None, target=None) -> SolveResult:
    cfg = cfg or ParConfig()
    if cfg.mode == "sync":
        max_epochs = cfg.max_epochs
        if cfg.max_updates is not None:
            per_epoch = (2 * problem.d if cfg.variant != "cdn" else problem.d)
            max_epochs = min(max_epochs, max(1, math.ceil(cfg.max_updates / per_epoch)))
        res = run_sync(
            problem, p=cfg.p, variant=cfg.variant, tol=cfg.tol, max_epochs=max_epochs,
            seed=cfg.seed, scale=cfg.step_scale, shrink=cfg.shrink, sigma=cfg.sigma,
            max_backtracks=cfg.max_backtracks, active_set=cfg.active_set,
            trace_every=cfg.trace_every, target=target, guard_period=cfg.guard_period,
            blowup=cfg.blowup, x0=x0,
        )
    else:
        res = _solve_async(problem, cfg, x0, target)
    res.meta["mode"] = cfg.mode
    if spectral is not None:
        res.meta["theory"] = theory_annotation(problem.d, cfg.p, spectral)
    return res


@dataclass
class CommitLog:
    """Every successful weight commit: coordinate, value replaced, value written."""

    k: list = field(default_factory=list)
    old: list = field(default_factory=list)
    new: list = field(default_factory=list)

    def extend(self, k, old, new):
        self.k.append(np.asarray(k, dtype=np.int64))
        self.old.append(np.asarray(old, dtype=np.float64))
        self.new.append(np.asarray(new, dtype=np.float64))

    def arrays(self):
        if not self.k:
            return np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0)
        return np.concatenate(self.k), np.concatenate(self.old), np.concatenate(self.new)

    def __len__(self):
        return sum(len(a) for a in self.k)

    def deltas(self) -> np.ndarray:
        k, old, new = self.arrays()
        return new - old


def verify_commit_log(x0, x_final, log: CommitLog) -> bool:
    """True iff each coordinate's commits chain from ``x0[k]`` to ``x_final[k]``.

    Commits replace the exact value they read, so the (old -> new) pairs of
    one coordinate must form a single trail through every logged commit. A
    lost or phantom update breaks the degree balance or the connectivity.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x_final = np.asarray(x_final, dtype=np.float64)
    k, old, new = log.arrays()
    by_coord = defaultdict(list)
    for kk, a, b in zip(k.tolist(), old.tolist(), new.tolist()):
        by_coord[kk].append((a, b))
    for kk in range(len(x0)):
        edges = by_coord.get(kk, [])
        start, end = float(x0[kk]), float(x_final[kk])
        if not edges:
            if start != end:
                return False
            continue
        balance = defaultdict(int)
        parent = {}

        def find(v):
            while parent.setdefault(v, v) != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for a, b in edges:
            balance[a] += 1
            balance[b] -= 1
            parent[find(a)] = find(b)
        balance[start] -= 1
        balance[end] += 1
        if any(balance.values()):
            return False
        if start not in parent or len({find(v) for v in parent}) != 1:
            return False
    return True


def _solve_async(problem: Problem, cfg: ParConfig, x0, target) -> SolveResult:
    code = variant_code(cfg.variant)
    d = problem.d
    state = SolverState.zeros(problem) if x0 is None else SolverState.from_weights(problem, x0)
    indptr, indices, data = problem.csc_arrays()
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.p)]
    m = 2 * d if code == K.FIXED else d
    per_worker = math.ceil(m / cfg.p)
    budget = cfg.max_updates
    ws = Workspace(d)
    ls = dict(shrink=cfg.shrink, sigma=cfg.sigma, max_bt=cfg.max_backtracks)
    log = CommitLog() if cfg.log_commits else None

    t0 = time.perf_counter()
    f0 = objective_value(problem, state)
    best = f0
    trace = [TraceRow(0.0, 0, f0, int(np.count_nonzero(state.x)), 0)]
    meta = {"variant": cfg.variant, "p": cfg.p, "cas_retries": 0, "certifications": 0}
    updates = 0
    epoch = 0
    termination = "max-iters"

    def work(w, n_draws):
        draws = streams[w].integers(0, m, size=n_draws)
        cap = n_draws if log is not None else 0
        lk = np.empty(cap, dtype=np.int64)
        lo = np.empty(cap)
        ln = np.empty(cap)
        nlog, max_abs, retries = K.async_worker(
            draws, code, d, indptr, indices, data, problem.y, problem.loss_code, problem.lam,
            problem.beta, cfg.step_scale, cfg.shrink, cfg.sigma, cfg.max_backtracks,
            state.x, state.ax, lk, lo, ln, log is not None,
        )
        return nlog, max_abs, retries, lk, lo, ln

    with ThreadPoolExecutor(max_workers=cfg.p) as pool:
        while epoch < cfg.max_epochs:
            if budget is not None and updates >= budget:
                break
            epoch += 1
            quota = [per_worker] * cfg.p
            if budget is not None:
                left = budget - updates
                quota = [min(per_worker, max(0, left - w * per_worker)) for w in range(cfg.p)]
            results = list(pool.map(work, range(cfg.p), quota))
            max_abs = 0.0
            for nlog, mx, retries, lk, lo, ln in results:
                max_abs = max(max_abs, mx)
                meta["cas_retries"] += int(retries)
                if log is not None:
                    log.extend(lk[:nlog], lo[:nlog], ln[:nlog])
            updates += sum(quota)

            f = objective_value(problem, state)
            trace.append(TraceRow(1e3 * (time.perf_counter() - t0), updates, f,
                                  int(np.count_nonzero(state.x)), epoch))
            if not np.isfinite(f) or (cfg.guard_period and epoch % cfg.guard_period == 0
                                      and f > cfg.blowup * max(f0, best)):
                termination = "diverged"
                break
            best = min(best, f)
            if target is not None and f <= target:
                termination = "target"
                break
            if max_abs < cfg.tol:
                meta["certifications"] += 1
                before = state.x.copy()
                cert_abs, cert_updates = certify(problem, state, variant=code, ws=ws,
                                                 scale=cfg.step_scale, **ls)
                updates += cert_updates
                if log is not None:
                    moved = np.flatnonzero(before != state.x)
                    log.extend(moved, before[moved], state.x[moved])
                if cert_abs < cfg.tol:
                    termination = "converged"
                    break

    f = objective_value(problem, state)
    if trace[-1].updates != updates:
        trace.append(TraceRow(1e3 * (time.perf_counter() - t0), updates, f,
                              int(np.count_nonzero(state.x)), epoch))
    if termination == "diverged":
        trace = [r for r in trace if np.isfinite(r.objective)]
    res = SolveResult(state.x, f, epoch, updates, termination, trace, epoch, meta)
    res.meta["ax"] = state.ax
    if log is not None:
        res.meta["commit_log"] = log
    return res
