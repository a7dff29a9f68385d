"""Update counts for a warm-started lambda path versus a cold start at the target.

Usage: python3 scripts/path_vs_cold.py [--steps 10] [--instances 5]
"""

from __future__ import annotations

import argparse

from shotgun.driver import PathConfig, path_updates, solve_path
from shotgun.solver_seq import SeqConfig, solve_sequential
from shotgun.synthetic import lasso_instance


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=10)
    ap.add_argument("--instances", type=int, default=5)
    ap.add_argument("--tol", type=float, default=1e-7)
    args = ap.parse_args()

    print(f"{'seed':>4} {'path updates':>13} {'cold updates':>13} {'rel diff':>9}")
    for s in range(args.instances):
        p = lasso_instance(200, 1000, density=0.05, lam_ratio=0.01, seed=s)
        cfg = SeqConfig(tol=args.tol, max_epochs=100_000, seed=s)
        path = solve_path(p, PathConfig(p.lam, args.steps), cfg)
        cold = solve_sequential(p, cfg)
        rel = abs(path[-1].objective - cold.objective) / cold.objective
        print(f"{s:>4} {path_updates(path):>13} {cold.updates:>13} {rel:>9.1e}")


if __name__ == "__main__":
    main()
