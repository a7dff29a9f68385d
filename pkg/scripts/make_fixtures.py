"""Regenerate the small data files under tests/fixtures.

Oracle values (dense eigensolver rho, lambdas) are written next to the data
so the tests never recompute them with the code under test.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from shotgun.matrix_io import DesignMatrix, normalize_columns
from shotgun.objective import Problem, lambda_max
from shotgun.synthetic import lasso_instance, replicated_lasso

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def write_csv(path: Path, a: np.ndarray, y: np.ndarray) -> None:
    with open(path, "w") as fh:
        for yi, row in zip(y, a):
            fh.write(",".join(repr(float(v)) for v in (yi, *row)) + "\n")


def write_svmlight(path: Path, a: np.ndarray, y: np.ndarray) -> None:
    with open(path, "w") as fh:
        for yi, row in zip(y, a):
            feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in enumerate(row) if v != 0.0)
            fh.write(f"{float(yi)!r} {feats}\n")


def dense_rho(a: np.ndarray) -> float:
    norms = np.linalg.norm(a, axis=0)
    an = a[:, norms > 0] / norms[norms > 0]
    return float(np.linalg.eigvalsh(an.T @ an)[-1])


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    oracle = {}

    write_csv(OUT / "identity.csv", np.eye(3), np.array([3.0, -1.0, 0.2]))
    oracle["identity"] = {"lambda": 1.0, "weights": [2.0, 0.0, 0.0], "rho": 1.0, "pstar": 3}

    col = np.array([1.0, 2.0, 2.0])
    write_csv(OUT / "duplicated.csv", np.column_stack([col, 3.0 * col]), np.array([1.0, 0.5, -0.5]))
    oracle["duplicated"] = {"rho": 2.0, "pstar": 1}

    # random, unevenly scaled columns with some exact zeros
    rng = np.random.default_rng(7)
    a = rng.standard_normal((60, 40)) * rng.uniform(0.5, 5.0, 40)
    a[rng.random(a.shape) < 0.3] = 0.0
    y = a @ np.where(rng.random(40) < 0.2, rng.standard_normal(40), 0.0) + 0.1 * rng.standard_normal(60)
    write_svmlight(OUT / "random.svm", a, y)
    p = Problem(normalize_columns(DesignMatrix.from_dense(a))[0], y, "squared")
    oracle["random"] = {"rho": dense_rho(a), "lambda": 0.1 * lambda_max(p)}

    rep = replicated_lasso(seed=0)
    write_csv(OUT / "replicated.csv", rep.matrix.toarray(), rep.y)
    oracle["replicated"] = {"lambda": rep.lam, "rho": dense_rho(rep.matrix.toarray())}

    low = lasso_instance(512, 256, density=0.1, lam_ratio=0.1, seed=11)
    write_svmlight(OUT / "lowrho.svm", low.matrix.toarray(), low.y)
    oracle["lowrho"] = {"lambda": low.lam, "rho": dense_rho(low.matrix.toarray())}

    with open(OUT / "oracle.json", "w") as fh:
        json.dump(oracle, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main()
