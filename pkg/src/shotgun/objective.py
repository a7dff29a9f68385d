"""L1-regularized objectives, the duplicated-feature view, and solver state.

The solvers work on a signed weight vector ``x`` of length d. The analysis
view is a nonnegative vector ``xhat`` of length 2d over duplicated columns
``[-A, A]`` (negative copies first), related by ``x = xhat[d:] - xhat[:d]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .matrix_io import DesignMatrix, validate_labels

LOSSES = {"squared": K.SQUARED, "logistic": K.LOGISTIC}
LOSS_ALIASES = {"lasso": "squared", "squared": "squared", "logistic": "logistic", "logreg": "logistic"}

#: curvature constants bounding each loss's second-order term on unit-norm columns
BETA = {"squared": 1.0, "logistic": 0.25}


@dataclass(frozen=True)
class LossModel:
    name: str

    @property
    def beta(self) -> float:
        return BETA[self.name]

    @property
    def code(self) -> int:
        return LOSSES[self.name]


@dataclass(frozen=True)
class Problem:
    matrix: DesignMatrix
    y: np.ndarray
    loss: str = "squared"
    lam: float = 0.0

    def __post_init__(self):
        loss = LOSS_ALIASES.get(self.loss)
        if loss is None:
            raise ValueError(f"unknown loss {self.loss!r}")
        object.__setattr__(self, "loss", loss)
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))
        y = validate_labels(self.y, loss)
        if y.shape != (self.matrix.n,):
            raise ValueError(f"expected {self.matrix.n} labels, got {y.shape}")
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def d(self) -> int:
        return self.matrix.d

    @property
    def model(self) -> LossModel:
        return LossModel(self.loss)

    @property
    def beta(self) -> float:
        return BETA[self.loss]

    @property
    def loss_code(self) -> int:
        return LOSSES[self.loss]

    def with_lambda(self, lam: float) -> "Problem":
        return Problem(self.matrix, self.y, self.loss, lam)

    def csc_arrays(self):
        m = self.matrix.csc
        return m.indptr, m.indices, m.data


@dataclass
class SolverState:
    """Signed weights plus the cached prediction vector ``ax = A @ x``.

    ``objective`` is an advisory cache; ``None`` means stale.
    """

    x: np.ndarray
    ax: np.ndarray
    objective: float | None = None

    @classmethod
    def zeros(cls, problem: Problem) -> "SolverState":
        return cls(np.zeros(problem.d), np.zeros(problem.n))

    @classmethod
    def from_weights(cls, problem: Problem, x) -> "SolverState":
        x = np.array(x, dtype=np.float64)
        if x.shape != (problem.d,):
            raise ValueError(f"expected {problem.d} weights, got {x.shape}")
        return cls(x, problem.matrix.matvec(x))

    def copy(self) -> "SolverState":
        return SolverState(self.x.copy(), self.ax.copy(), self.objective)

    def ax_drift(self, problem: Problem) -> float:
        """Relative distance between the cached and a recomputed ``A @ x``."""
        fresh = problem.matrix.matvec(self.x)
        return float(np.linalg.norm(fresh - self.ax) / max(np.linalg.norm(fresh), 1.0))

    def resync(self, problem: Problem) -> None:
        self.ax = problem.matrix.matvec(self.x)
        self.objective = None


def objective_value(problem: Problem, state: SolverState) -> float:
    """F(x) from the cached ``ax`` in O(n + d)."""
    f = K.objective(state.ax, state.x, problem.y, problem.loss_code, problem.lam)
    state.objective = f
    return f


def objective_at(problem: Problem, x) -> float:
    """F(x) with a fresh matrix-vector product."""
    return objective_value(problem, SolverState.from_weights(problem, x))


def loss_derivative(problem: Problem, ax) -> np.ndarray:
    ax = np.asarray(ax, dtype=np.float64)
    if problem.loss == "squared":
        return ax - problem.y
    m = problem.y * ax
    return -problem.y * np.exp(-np.logaddexp(0.0, m))


def smooth_gradient(problem: Problem, state: SolverState) -> np.ndarray:
    """Gradient of the loss term alone, per signed coordinate."""
    return problem.matrix.rmatvec(loss_derivative(problem, state.ax))


def coord_gradient(problem: Problem, state: SolverState, j: int) -> float:
    """Partial derivative of the duplicated objective w.r.t. ``xhat[j]``."""
    d = problem.d
    if not 0 <= j < 2 * d:
        raise IndexError(f"duplicated index {j} outside [0, {2 * d})")
    indptr, indices, data = problem.csc_arrays()
    g = K.smooth_grad(j % d, indptr, indices, data, problem.y, state.ax, problem.loss_code)
    s = -1.0 if j < d else 1.0
    return s * g + problem.lam


def to_duplicated(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate([np.maximum(-x, 0.0), np.maximum(x, 0.0)])


def from_duplicated(xhat) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=np.float64)
    d = xhat.shape[0] // 2
    return xhat[d:] - xhat[:d]


def _loss_sum(problem: Problem, ax) -> float:
    if problem.loss == "squared":
        r = ax - problem.y
        return 0.5 * float(r @ r)
    return float(np.sum(np.logaddexp(0.0, -problem.y * ax)))


def duplicated_objective(problem: Problem, xhat) -> float:
    """Loss at ``A (xhat[d:] - xhat[:d])`` plus ``lam * sum(xhat)``.

    The penalty is linear, so this is defined (and smooth) for any ``xhat``.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    ax = problem.matrix.matvec(from_duplicated(xhat))
    return _loss_sum(problem, ax) + problem.lam * float(np.sum(xhat))


def duplicated_gradient(problem: Problem, xhat) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=np.float64)
    ax = problem.matrix.matvec(from_duplicated(xhat))
    g = problem.matrix.rmatvec(loss_derivative(problem, ax))
    return np.concatenate([-g, g]) + problem.lam


def assumption2_gap(problem: Problem, xhat, dxhat) -> float:
    """Quadratic upper model minus the true objective after a parallel step.

    Both arguments live in duplicated space (length 2d). Nonnegative whenever
    ``beta`` bounds the loss curvature along ``A dx``; exactly 0 for the
    squared loss up to rounding.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    dxhat = np.asarray(dxhat, dtype=np.float64)
    f0 = duplicated_objective(problem, xhat)
    grad = duplicated_gradient(problem, xhat)
    adx = problem.matrix.matvec(from_duplicated(dxhat))
    model = f0 + float(dxhat @ grad) + 0.5 * problem.beta * float(adx @ adx)
    return model - duplicated_objective(problem, xhat + dxhat)


def kkt_violation(problem: Problem, x) -> np.ndarray:
    """Per-coordinate violation of the L1 optimality conditions.

    Zero weights need ``|g_k| <= lam``; nonzero ones need
    ``g_k = -lam * sign(x_k)``. Returns the amount by which each fails.
    """
    x = np.asarray(x, dtype=np.float64)
    state = SolverState.from_weights(problem, x)
    g = smooth_gradient(problem, state)
    return np.where(
        x == 0.0,
        np.maximum(np.abs(g) - problem.lam, 0.0),
        np.abs(g + problem.lam * np.sign(x)),
    )


def lambda_max(problem: Problem) -> float:
    """Smallest lambda for which x = 0 is optimal."""
    return float(np.max(np.abs(smooth_gradient(problem, SolverState.zeros(problem))), initial=0.0))
