"""Cost-sensitive hinge losses and the online class-ratio penalty.

Two distinct cost mechanisms coexist and are both kept:

* online learners scale the loss by a running ratio computed from the
  counts of positives/negatives/false-negatives seen so far;
* batch/distributed trainers weight each example by a fixed per-class
  cost pair (c_pos, c_neg) summing to 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RowMatrix, SparseVector
from .solvers import SmoothProblem


@dataclass
class ClassState:
    """Running class counts driving the online penalty.

    positives/negatives count every example seen; false_negatives counts
    every missed positive, cumulatively, never reset.
    """

    positives: int = 0
    negatives: int = 0
    false_negatives: int = 0

    def observe(self, y_true: int, y_pred: int) -> None:
        if y_true == 1:
            self.positives += 1
            if y_pred == -1:
                self.false_negatives += 1
        else:
            self.negatives += 1


def rho(state: ClassState, y: int) -> float:
    """Penalty scale for the incoming class; 1.0 before any positive arrives.

    Misclassifying a positive costs N/P (large under imbalance);
    misclassifying a negative costs (P - Fn)/P.
    """
    if state.positives == 0:
        return 1.0
    if y == 1:
        return state.negatives / state.positives
    return (state.positives - state.false_negatives) / state.positives


@dataclass(frozen=True)
class CostPair:
    """Fixed per-class costs for batch mode; must sum to 1."""

    c_pos: float
    c_neg: float

    def __post_init__(self):
        if not (0.0 < self.c_pos < 1.0 and 0.0 < self.c_neg < 1.0):
            raise ValueError("costs must lie in (0, 1)")
        if abs(self.c_pos + self.c_neg - 1.0) > 1e-12:
            raise ValueError("costs must sum to 1")

    @classmethod
    def balanced(cls) -> "CostPair":
        return cls(0.5, 0.5)


def hinge_cs(margin: float, rho_value: float) -> float:
    """max(0, rho - margin) with margin = y * (w . x)."""
    return max(0.0, rho_value - margin)


def smooth_hinge_cs(margin: float, rho_value: float) -> float:
    """(rho/2) * max(0, 1 - margin)^2; differentiable everywhere in margin."""
    gap = max(0.0, 1.0 - margin)
    return 0.5 * rho_value * gap * gap


def smooth_hinge_grad(
    w: np.ndarray, x: SparseVector, y: int, rho_value: float
) -> SparseVector:
    """Gradient of smooth_hinge_cs at w: -rho*y*max(0, 1 - y*w.x) * x."""
    margin = y * x.dot_dense(w)
    coef = -rho_value * y * max(0.0, 1.0 - margin)
    if coef == 0.0 or x.nnz == 0:
        return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0))
    return SparseVector(x.indices.copy(), coef * x.values)


def example_weights(labels: np.ndarray, costs: CostPair | None) -> np.ndarray:
    """Per-row loss weights: c_pos/c_neg by class, or all ones without costs."""
    if costs is None:
        return np.ones(len(labels))
    return np.where(labels > 0, costs.c_pos, costs.c_neg)


class WeightedSmoothHinge:
    """Batch smooth part f(w) = scale * sum_i rho_i * (1/2) max(0, 1 - y_i w.x_i)^2.

    `scale` is 1/m for the centralized objective; a worker holding a slice
    of an m-row dataset keeps scale = 1/m so the partials sum to the
    centralized smooth term.
    """

    def __init__(self, mat: RowMatrix, row_weights: np.ndarray, scale: float):
        if mat.num_rows != len(row_weights):
            raise ValueError("one weight per row required")
        self.mat = mat
        self.row_weights = np.asarray(row_weights, dtype=np.float64)
        self.scale = float(scale)

    def value(self, w: np.ndarray) -> float:
        gaps = np.maximum(0.0, 1.0 - self.mat.labels * self.mat.dot(w))
        return self.scale * float(self.row_weights @ (0.5 * gaps * gaps))

    def grad(self, w: np.ndarray) -> np.ndarray:
        gaps = np.maximum(0.0, 1.0 - self.mat.labels * self.mat.dot(w))
        coef = -self.scale * self.row_weights * self.mat.labels * gaps
        return self.mat.transpose_dot(coef)

    def lipschitz(self) -> float:
        """Safe curvature bound: scale * sum_i rho_i * ||x_i||^2."""
        return self.scale * float(self.row_weights @ self.mat.row_norm_sq)

    def coord_lipschitz(self) -> np.ndarray:
        return self.scale * self.mat.column_sq_weighted(self.row_weights)

    def coord_state(self, x: np.ndarray) -> "HingeCoordState":
        return HingeCoordState(self, x)


class HingeCoordState:
    """Margin cache for coordinate descent over a WeightedSmoothHinge.

    partial(j) costs O(rows touching column j) instead of a full
    gradient; moved(j, delta) keeps the cached margins consistent with
    the iterate. Weight and label products are folded into per-entry
    arrays once, so the hot path is two gathers and a dot.
    """

    def __init__(self, smooth: WeightedSmoothHinge, x: np.ndarray):
        self.scale = smooth.scale
        self.col_indptr, entry_row, entry_val = smooth.mat.csc()
        labels = smooth.mat.labels
        self.entry_row = entry_row
        # value * weight * label per entry, for the partial derivative
        self.entry_wlv = entry_val * (smooth.row_weights * labels)[entry_row]
        # value * label per entry, for the margin update
        self.entry_lv = entry_val * labels[entry_row]
        self.margins = labels * smooth.mat.dot(x)

    def partial(self, x: np.ndarray, j: int) -> float:
        s, e = self.col_indptr[j], self.col_indptr[j + 1]
        if s == e:
            return 0.0
        gaps = np.maximum(0.0, 1.0 - self.margins[self.entry_row[s:e]])
        return -self.scale * float(gaps @ self.entry_wlv[s:e])

    def moved(self, j: int, delta: float) -> None:
        s, e = self.col_indptr[j], self.col_indptr[j + 1]
        if s == e:
            return
        self.margins[self.entry_row[s:e]] += self.entry_lv[s:e] * delta


def make_smooth_problem(
    data, costs: CostPair | None = None, num_features: int | None = None
) -> SmoothProblem:
    """Centralized mean-scaled smooth objective as a solver-ready problem."""
    mat = data if isinstance(data, RowMatrix) else RowMatrix.from_instances(data, num_features)
    if mat.num_rows == 0:
        raise ValueError("need at least one row")
    weights = example_weights(mat.labels, costs)
    smooth = WeightedSmoothHinge(mat, weights, 1.0 / mat.num_rows)
    return SmoothProblem(
        dim=mat.num_features,
        value=smooth.value,
        grad=smooth.grad,
        lipschitz=smooth.lipschitz(),
        coord_lipschitz=smooth.coord_lipschitz(),
        coord_state=smooth.coord_state,
    )


def batch_objective(
    data, w: np.ndarray, lam: float, costs: CostPair | None = None
) -> float:
    """(1/m) * sum_i cost-weighted smooth hinge + lam * ||w||_1.

    Without a cost pair every example gets unit weight.
    """
    mat = data if isinstance(data, RowMatrix) else RowMatrix.from_instances(data)
    if mat.num_rows == 0:
        raise ValueError("objective needs at least one row")
    weights = example_weights(mat.labels, costs)
    smooth = WeightedSmoothHinge(mat, weights, 1.0 / mat.num_rows)
    return smooth.value(w) + lam * float(np.abs(w).sum())
