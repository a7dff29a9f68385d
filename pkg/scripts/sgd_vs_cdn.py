"""Training objective and held-out error of grid-selected SGD against CDN.

Usage: python3 scripts/sgd_vs_cdn.py [--epochs 50]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from shotgun.matrix_io import DesignMatrix
from shotgun.objective import Problem
from shotgun.sgd_baseline import SgdConfig, held_out_error, sgd_solve
from shotgun.solver_par import ParConfig, solve_shotgun
from shotgun.solver_seq import SeqConfig, solve_sequential
from shotgun.synthetic import logistic_instance


def split(problem: Problem, frac: float, seed: int):
    rng = np.random.default_rng(seed)
    rows = rng.permutation(problem.n)
    cut = int(frac * problem.n)
    csr = problem.matrix.csc.tocsr()
    train = Problem(DesignMatrix.from_sparse(csr[rows[:cut]]), problem.y[rows[:cut]], problem.loss, problem.lam)
    test = (DesignMatrix.from_sparse(csr[rows[cut:]]), problem.y[rows[cut:]])
    return train, test


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    train, test = split(logistic_instance(4000, 2000, density=0.02, lam_ratio=0.05, seed=0), 0.75, 0)
    runs = {
        "sgd": lambda: sgd_solve(train, SgdConfig(epochs=args.epochs)),
        "cdn": lambda: solve_sequential(train, SeqConfig(variant="cdn", tol=1e-7, max_epochs=5000)),
        f"shotgun cdn P={args.threads}": lambda: solve_shotgun(
            train, ParConfig(p=args.threads, variant="cdn", tol=1e-7, max_epochs=5000)),
    }
    print(f"{'solver':>18} {'objective':>12} {'test error':>10} {'seconds':>8}")
    for name, fn in runs.items():
        t0 = time.perf_counter()
        res = fn()
        dt = time.perf_counter() - t0
        print(f"{name:>18} {res.objective:>12.6g} {held_out_error(train, res.x, test):>10.4f} {dt:>8.2f}")


if __name__ == "__main__":
    main()
