"""Epoch loop shared by Shooting (P = 1) and the synchronous Shotgun simulator."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .objective import Problem, SolverState, objective_value

VARIANTS = {"fixed": K.FIXED, "fixed-step": K.FIXED, "cdn": K.CDN}


class TraceRow(NamedTuple):
    wall_ms: float
    updates: int
    objective: float
    nnz: int
    rounds: int


@dataclass
class SolveResult:
    x: np.ndarray
    objective: float
    epochs: int
    updates: int
    termination: str  # converged | max-iters | diverged | target
    trace: list[TraceRow] = field(default_factory=list)
    rounds: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    @property
    def diverged(self) -> bool:
        return self.termination == "diverged"

    def trace_array(self) -> np.ndarray:
        return np.array([tuple(r) for r in self.trace], dtype=float).reshape(-1, 5)


def variant_code(variant: str) -> int:
    try:
        return VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown variant {variant!r}") from None


class Workspace:
    """Scratch arrays reused across ``run_rounds`` calls."""

    def __init__(self, d: int):
        self.acc = np.zeros(2 * d)
        self.touched_flag = np.zeros(d, dtype=np.bool_)
        self.touched = np.zeros(d, dtype=np.int64)
        self.suspended = np.zeros(d, dtype=np.bool_)
        self.empty_f = np.zeros(0)
        self.empty_i = np.zeros(0, dtype=np.int64)


def apply_rounds(problem, state, draws, *, variant, ws, beta=None, scale=1.0,
                 shrink=0.5, sigma=0.01, max_bt=30, suspend_slack=-1.0,
                 record_every=0, target=-np.inf):
    """Run ``draws`` (rounds x P) through the compiled kernel.

    Returns the kernel tuple plus the three record buffers.
    """
    indptr, indices, data = problem.csc_arrays()
    n_rounds = draws.shape[0]
    cap = n_rounds // record_every + 1 if record_every > 0 else 0
    rec_obj = np.empty(cap)
    rec_nnz = np.empty(cap, dtype=np.int64)
    rec_round = np.empty(cap, dtype=np.int64)
    out = K.run_rounds(
        np.ascontiguousarray(draws, dtype=np.int64), variant, problem.d, indptr, indices, data,
        problem.y, problem.loss_code, problem.lam,
        problem.beta if beta is None else beta, scale,
        shrink, sigma, max_bt, suspend_slack,
        state.x, state.ax, ws.acc, ws.touched_flag, ws.touched, ws.suspended,
        record_every, rec_obj, rec_nnz, rec_round, target,
    )
    state.objective = None
    return out, (rec_obj, rec_nnz, rec_round)


def certify(problem, state, *, variant, ws, scale=1.0, **ls) -> tuple[float, int]:
    """One ordered, applied pass over every coordinate; returns (max |step|, updates)."""
    m = 2 * problem.d if variant == K.FIXED else problem.d
    draws = np.arange(m, dtype=np.int64).reshape(-1, 1)
    (rounds, max_abs, *_), _ = apply_rounds(problem, state, draws, variant=variant, ws=ws, scale=scale, **ls)
    return max_abs, rounds


def run_sync(
    problem: Problem,
    *,
    p: int = 1,
    variant: str = "fixed",
    tol: float = 1e-5,
    max_epochs: int = 1000,
    seed: int = 0,
    scale: float = 1.0,
    shrink: float = 0.5,
    sigma: float = 0.01,
    max_backtracks: int = 30,
    active_set: bool = False,
    trace_every: int = 0,
    target: float | None = None,
    guard_period: int = 0,
    blowup: float = 10.0,
    x0=None,
) -> SolveResult:
    """Randomized coordinate descent with ``p`` synchronous updates per round.

    With ``p = 1`` this is sequential stochastic coordinate descent. An epoch
    is 2d draws for fixed steps and (active) d draws for CDN.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    code = variant_code(variant)
    rng = np.random.default_rng(seed)
    state = SolverState.zeros(problem) if x0 is None else SolverState.from_weights(problem, x0)
    ws = Workspace(problem.d)
    ls = dict(shrink=shrink, sigma=sigma, max_bt=max_backtracks)
    suspend_slack = 2.0 * tol if (active_set and code == K.CDN) else -1.0
    tgt = -np.inf if target is None else float(target)

    t0 = time.perf_counter()
    f0 = objective_value(problem, state)
    best = f0
    updates = rounds_total = 0
    trace = [TraceRow(0.0, 0, f0, int(np.count_nonzero(state.x)), 0)]
    meta = {"variant": variant, "p": p, "backtracks": 0, "exhausted": 0, "certifications": 0,
            "epoch_draws": "2d" if code == K.FIXED else "d (active set)" if active_set else "d"}
    termination = "max-iters"
    epoch = 0

    def wall():
        return 1e3 * (time.perf_counter() - t0)

    while epoch < max_epochs:
        epoch += 1
        if code == K.FIXED:
            pool = None
            m = 2 * problem.d
        else:
            pool = np.flatnonzero(~ws.suspended)
            m = len(pool)
        if m:
            n_rounds = math.ceil(m / p)
            draws = rng.integers(0, m, size=(n_rounds, p))
            if pool is not None:
                draws = pool[draws]
            (done, max_abs, nrec, status, bt, ex), (ro, rn, rr) = apply_rounds(
                problem, state, draws, variant=code, ws=ws, scale=scale,
                suspend_slack=suspend_slack, record_every=trace_every, target=tgt, **ls,
            )
            meta["backtracks"] += int(bt)
            meta["exhausted"] += int(ex)
            w = wall()
            for q in range(nrec):
                trace.append(TraceRow(w, updates + int(rr[q]) * p, float(ro[q]), int(rn[q]),
                                      rounds_total + int(rr[q])))
            updates += int(done) * p
            rounds_total += int(done)
        else:
            status, max_abs = K.STATUS_OK, 0.0

        f = objective_value(problem, state)
        if trace_every == 0:
            trace.append(TraceRow(wall(), updates, f, int(np.count_nonzero(state.x)), rounds_total))
        if status == K.STATUS_NONFINITE or not np.isfinite(f):
            termination = "diverged"
            break
        if guard_period and epoch % guard_period == 0 and f > blowup * max(f0, best):
            termination = "diverged"
            break
        best = min(best, f)
        if status == K.STATUS_TARGET:
            termination = "target"
            break
        if max_abs < tol:
            meta["certifications"] += 1
            cert_abs, cert_updates = certify(problem, state, variant=code, ws=ws, scale=scale, **ls)
            updates += cert_updates
            if cert_abs < tol:
                termination = "converged"
                break
            ws.suspended[:] = False

    f = objective_value(problem, state)
    last = trace[-1]
    if (last.updates, last.objective) != (updates, f):
        trace.append(TraceRow(wall(), updates, f, int(np.count_nonzero(state.x)), rounds_total))
    if termination == "diverged":
        trace = [r for r in trace if np.isfinite(r.objective)]
    return SolveResult(state.x, f, epoch, updates, termination, trace, rounds_total, meta)
