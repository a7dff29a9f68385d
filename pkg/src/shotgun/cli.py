"""Command-line entry point: ``shotgun {solve,pstar,bench,replay}``.

Exit codes: 0 converged (or finished), 1 usage or I/O error, 2 diverged.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .driver import BenchConfig, BenchmarkError, PathConfig, benchmark_speedup, solve_path
from .matrix_io import FORMATS, DatasetError, load_normalized
from .objective import Problem
from .solver_par import ParConfig, solve_shotgun
from .solver_seq import SeqConfig, solve_sequential
from .spectral import power_iteration

RESULT_SCHEMA = "shotgun.result/1"
TRACE_FIELDS = ("wall_ms", "updates", "objective", "nnz", "rounds")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_input(p, *, labels=True):
    p.add_argument("--input", required=True, help="data file")
    p.add_argument("--format", choices=FORMATS, default="svmlight")
    if labels:
        p.add_argument("--labels", help="label sidecar for --format mm (default: <input>.labels)")
    p.add_argument("--n-features", type=int, help="feature count for svmlight input")


def _add_solver(p):
    p.add_argument("--loss", choices=("lasso", "logistic"), default="lasso")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="regularization on the column-normalized problem")
    p.add_argument("--threads", type=int, default=1, help="parallel updates per round (P)")
    p.add_argument("--variant", choices=("fixed", "cdn"), default="fixed")
    p.add_argument("--mode", choices=("sync", "async"), default="sync")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shotgun", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"shotgun {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one L1-regularized problem")
    _add_input(s)
    _add_solver(s)
    s.add_argument("--path-steps", type=int, default=1, help="lambda continuation stages (1: none)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--trace-every", type=int, default=0,
                   help="trace row every N rounds (0: one per epoch)")
    s.add_argument("--normalized-weights", action="store_true",
                   help="report weights for the normalized columns")
    s.add_argument("--spectral", action="store_true",
                   help="estimate rho and annotate the parallelism threshold")

    q = sub.add_parser("pstar", help="estimate rho(A^T A) and the predicted P*")
    _add_input(q)
    q.add_argument("--tol", type=float, default=1e-4)
    q.add_argument("--max-iters", type=int, default=1000)
    q.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="iterations-to-0.5%%-of-optimum for several P")
    _add_input(b)
    _add_solver(b)
    b.add_argument("--p-list", required=True, help="comma-separated P values, e.g. 1,2,4,8")
    b.add_argument("--seeds", type=int, default=10)
    b.add_argument("--async-timing", action="store_true", help="also time async runs")
    b.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("replay", help="re-run a solve from the manifest in its result JSON")
    r.add_argument("--manifest", required=True, help="result.json written by 'solve'")
    r.add_argument("--out", required=True)
    return parser


def _digest(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        if p is not None and Path(p).exists():
            h.update(Path(p).read_bytes())
    return h.hexdigest()


def _labels_path(args):
    if args.format != "mm":
        return None
    return args.labels or args.input + ".labels"


def _manifest(args, command: str) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "command", "func")}
    return {
        "command": command,
        "config": config,
        "input_sha256": _digest(args.input, _labels_path(args)),
        "seeds": [args.seed] if hasattr(args, "seed") and not hasattr(args, "seeds") else
                 list(range(getattr(args, "seed", 0), getattr(args, "seed", 0) + getattr(args, "seeds", 1))),
        "version": __version__,
    }


def _load(args, loss):
    kw = {"n_features": args.n_features}
    if args.format == "mm":
        kw["labels_path"] = _labels_path(args)
    return load_normalized(args.input, args.format, loss=loss, **kw)


def _loss(args) -> str:
    return "logistic" if args.loss == "logistic" else "squared"


def _write_trace(path: Path, rows, manifest: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for r in rows:
            w.writerow([f"{r.wall_ms:.3f}", r.updates, repr(float(r.objective)), r.nnz, r.rounds])


def cmd_solve(args) -> int:
    loss = _loss(args)
    a, y, scales = _load(args, loss)
    problem = Problem(a, y, loss, args.lam)
    if args.threads == 1 and args.mode == "sync":
        solver_cfg = SeqConfig(tol=args.tol, max_epochs=args.max_epochs, seed=args.seed,
                               variant=args.variant, trace_every=args.trace_every)
    else:
        solver_cfg = ParConfig(p=args.threads, mode=args.mode, seed=args.seed, tol=args.tol,
                               max_epochs=args.max_epochs, variant=args.variant,
                               trace_every=args.trace_every)

    if args.path_steps > 1:
        stages = solve_path(problem, PathConfig(args.lam, args.path_steps), solver_cfg)
        res = stages[-1]
    else:
        stages = None
        est = power_iteration(a, seed=args.seed) if args.spectral and a.d else None
        if isinstance(solver_cfg, ParConfig):
            res = solve_shotgun(problem, solver_cfg, spectral=est)
        else:
            res = solve_sequential(problem, solver_cfg)
            if est is not None:
                from .solver_par import theory_annotation
                res.meta["theory"] = theory_annotation(a.d, 1, est)

    manifest = _manifest(args, "solve")
    if args.normalized_weights:
        w, space = res.x, "normalized"
    else:
        w, space = scales.to_original(res.x), "original"
    nz = np.flatnonzero(w)
    doc = {
        "schema": RESULT_SCHEMA,
        "termination": res.termination,
        "objective": res.objective,
        "lambda": args.lam,
        "epochs": res.epochs,
        "updates": res.updates,
        "weights": {"space": space, "d": int(len(w)), "indices": nz.tolist(),
                    "values": [float(v) for v in w[nz]]},
        "dropped_columns": scales.dropped,
        "manifest": manifest,
        "timing": {"wall_ms": res.trace[-1].wall_ms if res.trace else None},
    }
    if "theory" in res.meta:
        doc["theory"] = res.meta["theory"]
    if stages is not None:
        doc["path"] = [{"lambda": s.meta["lambda"], "objective": s.objective, "updates": s.updates,
                        "termination": s.termination} for s in stages]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "result.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    trace = [r for s in (stages or [res]) for r in s.trace]
    _write_trace(out / "trace.csv", trace, manifest)

    if res.diverged:
        print(f"diverged after {res.updates} updates", file=sys.stderr)
        return EXIT_DIVERGED
    if res.termination == "max-iters":
        print(f"warning: stopped at max epochs ({res.epochs}) before converging", file=sys.stderr)
    return EXIT_OK


def cmd_pstar(args) -> int:
    a, _, _ = _load(args, None)
    est = power_iteration(a, tol=args.tol, max_iters=args.max_iters, seed=args.seed)
    print(json.dumps(est.as_dict(), sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    loss = _loss(args)
    a, y, _ = _load(args, loss)
    problem = Problem(a, y, loss, args.lam)
    try:
        p_list = [int(v) for v in args.p_list.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --p-list {args.p_list!r}") from None
    if not p_list or min(p_list) < 1:
        raise UsageError("--p-list needs positive integers")
    cfg = BenchConfig(seeds=args.seeds, variant=args.variant, tol=args.tol,
                      max_epochs=args.max_epochs, async_timing=args.async_timing, seed0=args.seed)
    try:
        report = benchmark_speedup(problem, p_list, cfg)
    except BenchmarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    manifest = _manifest(args, "bench")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "bench.csv", manifest)
    report.write_json(out / "bench.json", manifest)
    for r in report.rows:
        print(f"P={r.p:<4d} iterations={r.iterations} ratio={r.iteration_ratio} "
              f"{r.termination}{' (beyond P*)' if r.beyond_pstar else ''}")
    return EXIT_OK


def cmd_replay(args) -> int:
    with open(args.manifest) as fh:
        doc = json.load(fh)
    manifest = doc.get("manifest", doc)
    if manifest.get("command") != "solve":
        raise UsageError("only 'solve' manifests can be replayed")
    ns = argparse.Namespace(**manifest["config"], out=args.out)
    if _digest(ns.input, _labels_path(ns)) != manifest["input_sha256"]:
        raise UsageError(f"input {ns.input} no longer matches the manifest digest")
    return cmd_solve(ns)


COMMANDS = {"solve": cmd_solve, "pstar": cmd_pstar, "bench": cmd_bench, "replay": cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (DatasetError, OSError, ValueError) as exc:
        print(f"error: {exc}".splitlines()[0], file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
