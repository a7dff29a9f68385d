"""Synthetic problem generators used by tests, scripts and the benchmark CLI."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .matrix_io import DesignMatrix, normalize_columns
from .objective import Problem, lambda_max


def random_design(n: int, d: int, *, density: float = 1.0, seed=0) -> DesignMatrix:
    """Gaussian entries (sparse when ``density < 1``), columns normalized."""
    rng = np.random.default_rng(seed)
    if density >= 1.0:
        a = DesignMatrix.from_dense(rng.standard_normal((n, d)))
    else:
        m = sp.random(n, d, density=density, format="csc", random_state=rng,
                      data_rvs=rng.standard_normal)
        # keep every column nonzero so normalization drops nothing
        empty = np.flatnonzero(np.diff(m.indptr) == 0)
        if len(empty):
            fill = sp.csc_matrix((rng.standard_normal(len(empty)),
                                  (rng.integers(0, n, len(empty)), empty)), shape=(n, d))
            m = m + fill
        a = DesignMatrix.from_sparse(m)
    return normalize_columns(a)[0]


def sparse_signal(d: int, k: int, rng, scale: float = 1.0) -> np.ndarray:
    x = np.zeros(d)
    support = rng.choice(d, size=min(k, d), replace=False)
    x[support] = scale * rng.standard_normal(len(support))
    return x


def lasso_instance(n: int, d: int, *, density: float = 1.0, nnz: int | None = None,
                   noise: float = 0.1, lam_ratio: float = 0.1, seed=0) -> Problem:
    """Lasso with a sparse planted signal; lambda = lam_ratio * lambda_max."""
    rng = np.random.default_rng(seed)
    a = random_design(n, d, density=density, seed=rng.integers(2**32))
    x = sparse_signal(d, nnz if nnz is not None else max(1, d // 10), rng, scale=3.0)
    y = a.matvec(x) + noise * rng.standard_normal(n)
    p = Problem(a, y, "squared", 0.0)
    return p.with_lambda(lam_ratio * lambda_max(p))


def logistic_instance(n: int, d: int, *, density: float = 1.0, nnz: int | None = None,
                      lam: float | None = None, lam_ratio: float = 0.1, seed=0) -> Problem:
    rng = np.random.default_rng(seed)
    a = random_design(n, d, density=density, seed=rng.integers(2**32))
    x = sparse_signal(d, nnz if nnz is not None else max(1, d // 10), rng, scale=np.sqrt(n))
    z = a.matvec(x)
    y = np.where(rng.random(n) < 1.0 / (1.0 + np.exp(-z)), 1.0, -1.0)
    p = Problem(a, y, "logistic", 0.0)
    return p.with_lambda(lam if lam is not None else lam_ratio * lambda_max(p))


def replicated_design(n: int, base: int, copies: int, *, correlation: float = 0.5, seed=0) -> DesignMatrix:
    """``base`` correlated unit columns, each repeated ``copies`` times.

    The Gram matrix is block-constant, so its spectral radius is ``copies``
    times the top eigenvalue of the base Gram matrix (about
    ``1 + (base - 1) * correlation``).
    """
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal(n)
    own = rng.standard_normal((n, base))
    cols = np.sqrt(correlation) * shared[:, None] + np.sqrt(1.0 - correlation) * own
    full = np.repeat(cols, copies, axis=1)
    return normalize_columns(DesignMatrix.from_dense(full))[0]


def replicated_lasso(n: int = 64, base: int = 4, copies: int = 64, *, correlation: float = 0.5,
                     lam_ratio: float = 0.1, seed=0) -> Problem:
    rng = np.random.default_rng(seed)
    a = replicated_design(n, base, copies, correlation=correlation, seed=rng.integers(2**32))
    y = rng.standard_normal(n)
    p = Problem(a, y, "squared", 0.0)
    return p.with_lambda(lam_ratio * lambda_max(p))
