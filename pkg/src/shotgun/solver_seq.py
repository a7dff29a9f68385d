"""Shooting: sequential stochastic coordinate descent, plus its CDN variant."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._engine import SolveResult, TraceRow, Workspace, apply_rounds, run_sync, variant_code
from .objective import Problem, SolverState

__all__ = [
    "SeqConfig", "SolveResult", "TraceRow", "shooting_delta", "scd_update", "cdn_update",
    "solve_sequential", "scd_suboptimality_bound",
]


@dataclass
class SeqConfig:
    tol: float = 1e-5
    max_epochs: int = 1000
    seed: int = 0
    variant: str = "fixed"  # fixed | cdn
    shrink: float = 0.5
    sigma: float = 0.01
    max_backtracks: int = 30
    active_set: bool = True  # CDN only
    trace_every: int = 0  # 0: one trace row per epoch

    def __post_init__(self):
        variant_code(self.variant)
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not 0 < self.sigma < 1:
            raise ValueError("sufficient-decrease constant must lie in (0, 1)")


def shooting_delta(xj: float, gj: float, beta: float) -> float:
    """Clipped coordinate step ``max(-xj, -gj / beta)`` on a nonnegative weight."""
    return max(-xj, -gj / beta)


def scd_update(problem: Problem, state: SolverState, j: int) -> float:
    """Apply one fixed step to duplicated coordinate ``j``; returns the step taken.

    The step is ``shooting_delta`` unless it would carry the signed weight
    through zero, in which case it stops at zero.
    """
    d = problem.d
    if not 0 <= j < 2 * d:
        raise IndexError(f"duplicated index {j} outside [0, {2 * d})")
    k = j % d
    old = state.x[k]
    apply_rounds(problem, state, np.array([[j]]), variant=K.FIXED, ws=Workspace(d))
    s = -1.0 if j < d else 1.0
    return s * (state.x[k] - old)


def cdn_update(problem: Problem, state: SolverState, k: int, cfg: SeqConfig | None = None) -> float:
    """One Newton step with backtracking on signed coordinate ``k``.

    Returns the applied change to ``x[k]`` (0 if the line search gave up).
    """
    cfg = cfg or SeqConfig(variant="cdn")
    indptr, indices, data = problem.csc_arrays()
    step, _, _, _ = K.cdn_step(
        k, state.x[k], indptr, indices, data, problem.y, state.ax, problem.loss_code,
        problem.lam, cfg.shrink, cfg.sigma, cfg.max_backtracks,
    )
    if step != 0.0:
        old = state.x[k]
        new = old + step
        state.x[k] = new
        rows, vals = problem.matrix.column(k)
        state.ax[rows] += (new - old) * vals
        state.objective = None
    return step


def solve_sequential(problem: Problem, cfg: SeqConfig | None = None, x0=None, *, target=None) -> SolveResult:
    """Run Shooting (or Shooting CDN) until the epoch's largest step drops below ``tol``.

    Coordinates are drawn uniformly with replacement. Convergence is only
    declared after an ordered pass over all coordinates also moves nothing by
    ``tol`` or more.
    """
    cfg = cfg or SeqConfig()
    return run_sync(
        problem, p=1, variant=cfg.variant, tol=cfg.tol, max_epochs=cfg.max_epochs, seed=cfg.seed,
        shrink=cfg.shrink, sigma=cfg.sigma, max_backtracks=cfg.max_backtracks,
        active_set=cfg.active_set, trace_every=cfg.trace_every, target=target, x0=x0,
    )


def scd_suboptimality_bound(d: int, beta: float, xstar_sq_norm: float, f0: float, t) -> np.ndarray:
    """Expected-suboptimality envelope of Shooting after ``t`` single updates."""
    t = np.asarray(t, dtype=np.float64)
    return d * (beta * xstar_sq_norm + 2.0 * f0) / (t + 1.0)
