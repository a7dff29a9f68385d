"""Regularization paths and the iterations-to-optimum speedup benchmark."""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import asdict, dataclass, field

import numpy as np

from ._engine import SolveResult
from .objective import Problem, lambda_max
from .solver_par import ParConfig, solve_shotgun
from .solver_seq import SeqConfig, solve_sequential
from .spectral import power_iteration


class BenchmarkError(RuntimeError):
    pass


@dataclass
class PathConfig:
    lambda_target: float
    num_steps: int = 10

    def __post_init__(self):
        if not self.lambda_target > 0:
            raise ValueError("lambda_target must be positive")
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")


def lambda_path(problem: Problem, cfg: PathConfig) -> list[float]:
    """Geometric sequence from the zero-solution boundary down to the target."""
    lam1 = lambda_max(problem)
    if cfg.lambda_target >= lam1 or cfg.num_steps == 1:
        return [cfg.lambda_target]
    path = np.geomspace(lam1, cfg.lambda_target, cfg.num_steps)
    path[-1] = cfg.lambda_target
    return [float(v) for v in path]


def _solve(problem: Problem, solver_cfg, x0=None, **kw) -> SolveResult:
    if isinstance(solver_cfg, ParConfig):
        return solve_shotgun(problem, solver_cfg, x0, **kw)
    return solve_sequential(problem, solver_cfg, x0, **kw)


def solve_path(problem: Problem, path: PathConfig, solver_cfg=None) -> list[SolveResult]:
    """Solve along the lambda path, warm-starting each stage from the last.

    Stops early (last entry diverged) if any stage diverges.
    """
    solver_cfg = solver_cfg or SeqConfig()
    results = []
    x = None
    for lam in lambda_path(problem, path):
        res = _solve(problem.with_lambda(lam), solver_cfg, x)
        res.meta["lambda"] = lam
        results.append(res)
        if res.diverged:
            break
        x = res.x
    return results


def path_updates(results: list[SolveResult]) -> int:
    return sum(r.updates for r in results)


@dataclass
class BenchConfig:
    seeds: int = 10
    variant: str = "fixed"
    tol: float = 1e-6
    reference_tol: float | None = None  # default: tol / 100, at most 1e-8
    threshold: float = 0.005
    max_epochs: int = 2000
    blowup: float = 10.0
    async_timing: bool = False
    async_seeds: int = 3
    spectral_tol: float = 1e-6
    seed0: int = 0

    @property
    def ref_tol(self) -> float:
        if self.reference_tol is not None:
            return self.reference_tol
        return min(self.tol / 100.0, 1e-8)


@dataclass
class BenchRow:
    p: int
    iterations: int | None
    updates: int | None
    iteration_ratio: float | None  # T(P) * P / T(1); 1.0 is a linear speedup
    diverged_seeds: int
    termination: str  # reached | diverged | not-reached
    beyond_pstar: bool
    wall_ms: float | None = None


@dataclass
class BenchmarkReport:
    rows: list[BenchRow]
    fstar: float
    threshold: float
    spectral: dict
    config: dict
    reference: dict = field(default_factory=dict)

    CSV_FIELDS = ("p", "iterations", "updates", "iteration_ratio", "diverged_seeds",
                  "termination", "beyond_pstar", "wall_ms")

    def row(self, p: int) -> BenchRow:
        return next(r for r in self.rows if r.p == p)

    def as_dict(self) -> dict:
        return {
            "fstar": self.fstar,
            "threshold": self.threshold,
            "spectral": self.spectral,
            "config": self.config,
            "reference": self.reference,
            "rows": [asdict(r) for r in self.rows],
        }

    def write_csv(self, path, manifest: dict | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if manifest is not None:
                fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(self.CSV_FIELDS)
            for r in self.rows:
                w.writerow(["" if getattr(r, f) is None else getattr(r, f) for f in self.CSV_FIELDS])

    def write_json(self, path, manifest: dict | None = None) -> None:
        doc = self.as_dict()
        if manifest is not None:
            doc["manifest"] = manifest
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)


def round_curve(res: SolveResult) -> np.ndarray:
    """Objective after each round (index 0 is the start); needs ``trace_every=1``."""
    tr = res.trace_array()
    rounds = tr[:, 4].astype(np.int64)
    curve = np.full(rounds.max() + 1, np.nan)
    curve[rounds] = tr[:, 2]
    # trailing certification rows share the last round index; keep the final value
    for i in range(1, len(curve)):
        if np.isnan(curve[i]):
            curve[i] = curve[i - 1]
    return curve


def mean_crossing(curves: list[np.ndarray], threshold: float) -> int | None:
    """First round at which the seed-averaged objective is at or below ``threshold``."""
    length = max(len(c) for c in curves)
    padded = np.array([np.concatenate([c, np.full(length - len(c), c[-1])]) for c in curves])
    mean = padded.mean(axis=0)
    hit = np.flatnonzero(mean <= threshold)
    return int(hit[0]) if len(hit) else None


def iteration_curves(problem: Problem, p: int, seeds, cfg: BenchConfig, stop_at: float):
    curves, diverged = [], 0
    for s in seeds:
        res = solve_shotgun(
            problem,
            ParConfig(p=p, mode="sync", seed=s, tol=cfg.tol, max_epochs=cfg.max_epochs,
                      variant=cfg.variant, blowup=cfg.blowup, trace_every=1),
            target=stop_at,
        )
        curve = round_curve(res)
        if res.diverged:
            diverged += 1
            curve = np.append(curve, np.inf)
        curves.append(curve)
    return curves, diverged


def benchmark_speedup(problem: Problem, p_list, cfg: BenchConfig | None = None) -> BenchmarkReport:
    """Iterations until the mean objective is within ``threshold`` of optimal, per P.

    The optimum comes from a sequential solve at a tolerance 100x tighter than
    the benchmarked runs.
    """
    cfg = cfg or BenchConfig()
    ref = solve_sequential(problem, SeqConfig(tol=cfg.ref_tol, max_epochs=100 * cfg.max_epochs,
                                              variant=cfg.variant, seed=cfg.seed0))
    if not ref.converged:
        raise BenchmarkError(f"reference solve ended with {ref.termination}")
    fstar = ref.objective
    threshold = fstar * (1.0 + cfg.threshold)
    stop_at = fstar * (1.0 + cfg.threshold / 10.0)
    est = power_iteration(problem.matrix, tol=cfg.spectral_tol, max_iters=10_000)
    seeds = range(cfg.seed0, cfg.seed0 + cfg.seeds)

    rows = []
    t1 = None
    for p in sorted(set(int(v) for v in p_list)):
        curves, diverged = iteration_curves(problem, p, seeds, cfg, stop_at)
        iters = mean_crossing(curves, threshold)
        if diverged * 2 >= len(curves) and diverged:
            status = "diverged"
        elif iters is None:
            status = "not-reached"
        else:
            status = "reached"
        if p == 1:
            t1 = iters
        ratio = iters * p / t1 if (iters is not None and t1) else None
        row = BenchRow(p, iters, None if iters is None else iters * p, ratio, diverged, status,
                       p > est.pstar)
        if cfg.async_timing and status != "diverged":
            row.wall_ms = _async_wall(problem, p, cfg, threshold)
        rows.append(row)

    return BenchmarkReport(
        rows=rows,
        fstar=fstar,
        threshold=threshold,
        spectral=est.as_dict(),
        config=asdict(cfg) | {"p_list": [int(v) for v in p_list], "reference_tol": cfg.ref_tol},
        reference={"epochs": ref.epochs, "updates": ref.updates, "objective": fstar},
    )


def _async_wall(problem: Problem, p: int, cfg: BenchConfig, threshold: float) -> float | None:
    times = []
    for s in range(cfg.seed0, cfg.seed0 + cfg.async_seeds):
        res = solve_shotgun(problem, ParConfig(p=p, mode="async", seed=s, tol=cfg.tol,
                                               max_epochs=cfg.max_epochs, variant=cfg.variant,
                                               blowup=cfg.blowup), target=threshold)
        hit = [r.wall_ms for r in res.trace if r.objective <= threshold]
        if hit:
            times.append(hit[0])
    return statistics.median(times) if times else None


def speedup_ratios(report: BenchmarkReport) -> dict[int, float]:
    return {r.p: r.iteration_ratio for r in report.rows if r.iteration_ratio is not None}
