"""Iterations-to-optimum speedup across P on a low-rho and a high-rho instance.

Usage: python3 scripts/speedup_sweep.py [--seeds 10] [--out sweep.json]
"""

from __future__ import annotations

import argparse
import json

from shotgun.driver import BenchConfig, benchmark_speedup
from shotgun.synthetic import lasso_instance, replicated_lasso


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    cases = {
        "sparse d=512": (lasso_instance(1024, 512, density=0.1, lam_ratio=0.1, seed=1),
                         [1, 2, 4, 8, 16, 32, 64, 128, 256]),
        "replicated d=256": (replicated_lasso(seed=0), [1, 2, 4, 8, 16, 64]),
    }
    out = {}
    for name, (problem, p_list) in cases.items():
        report = benchmark_speedup(problem, p_list, BenchConfig(seeds=args.seeds))
        sp = report.spectral
        print(f"{name}: rho={sp['rho']:.2f} P*={sp['pstar']} F*={report.fstar:.6g}")
        print(f"{'P':>5} {'rounds':>8} {'T(P)P/T(1)':>11} {'speedup':>8}  status")
        for r in report.rows:
            ratio = "" if r.iteration_ratio is None else f"{r.iteration_ratio:.3f}"
            speed = "" if r.iteration_ratio is None else f"{r.p / r.iteration_ratio:.1f}"
            rounds = "" if r.iterations is None else r.iterations
            flag = " (beyond P*)" if r.beyond_pstar else ""
            print(f"{r.p:>5} {rounds:>8} {ratio:>11} {speed:>8}  {r.termination}{flag}")
        print()
        out[name] = report.as_dict()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
