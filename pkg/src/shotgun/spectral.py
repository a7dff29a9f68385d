"""Spectral radius of A^T A by power iteration, and the parallelism it allows."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrix_io import DesignMatrix


@dataclass(frozen=True)
class SpectralEstimate:
    rho: float
    iterations: int
    rel_change: float
    converged: bool
    d: int

    @property
    def pstar(self) -> int:
        return predicted_pstar(self.d, self.rho)

    def as_dict(self) -> dict:
        return {
            "rho": self.rho,
            "pstar": self.pstar,
            "d": self.d,
            "iterations": self.iterations,
            "rel_change": self.rel_change,
            "converged": self.converged,
            # both forms of the parallelism threshold, see README
            "p_limit_signed": self.d / self.rho + 1,
            "p_limit_duplicated": 2 * self.d / self.rho + 1,
        }


def predicted_pstar(d: int, rho: float) -> int:
    """ceil(d / rho), clamped to [1, d]."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if not rho > 0:
        raise ValueError("rho must be positive")
    return int(min(max(math.ceil(d / rho), 1), d))


def power_iteration(m: DesignMatrix, tol: float = 1e-4, max_iters: int = 1000, seed=0) -> SpectralEstimate:
    """Largest eigenvalue of ``A^T A`` without forming it.

    Each iteration costs one product with A and one with A^T. Stops when the
    Rayleigh quotient's relative change falls below ``tol``.
    """
    d = m.d
    if d == 0:
        raise ValueError("power iteration needs at least one column")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    a = m.csc
    at = a.T.tocsr()
    rq = 0.0
    change = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        av = a @ v
        new_rq = float(av @ av)
        w = at @ av
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # v lies in the null space; restart is pointless when A == 0
            return SpectralEstimate(0.0, it, 0.0, True, d)
        change = abs(new_rq - rq) / new_rq
        rq = new_rq
        v = w / norm
        if change < tol:
            return SpectralEstimate(rq, it, change, True, d)
    return SpectralEstimate(rq, it, change, False, d)
