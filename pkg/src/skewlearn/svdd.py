"""One-class detector: squared feature-space distance to the kernel
center of mass, thresholded at the worst training distance plus the
empirical-center estimation error.

Training rows are presumed (mostly) normal. With an RBF kernel every
k(x, x) is 1, so the squared distance of a point y to the center of
mass reduces to 1 - (2/m) sum_j k(y, x_j) + mean(K), needing only
kernel sums against the training set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import SparseVector


def rbf_kernel(x: SparseVector, z: SparseVector, sigma: float = 1.0) -> float:
    """exp(-||x - z||^2 / (2 sigma^2)); 1 at x == z, symmetric."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return math.exp(-x.dist_sq(z) / (2.0 * sigma * sigma))


def center_estimation_error(m: int, delta: float) -> float:
    """Concentration bound on the empirical center of mass for kernels
    with k(x, x) <= 1: (2/sqrt(m)) * (1 + sqrt(ln(1/delta)/2))."""
    if m < 1:
        raise ValueError("need at least one training row")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return (2.0 / math.sqrt(m)) * (1.0 + math.sqrt(math.log(1.0 / delta) / 2.0))


def _dense_over(rows: Sequence[SparseVector], active: np.ndarray) -> np.ndarray:
    """Rows densified over the active feature set; features outside it
    are dropped (they cannot interact with the training rows)."""
    out = np.zeros((len(rows), active.size))
    for r, row in enumerate(rows):
        pos = np.searchsorted(active, row.indices)
        ok = pos < active.size
        ok[ok] &= active[pos[ok]] == row.indices[ok]
        out[r, pos[ok]] = row.values[ok]
    return out


@dataclass
class SvddModel:
    train_rows: list[SparseVector]
    sigma: float
    delta: float
    kernel_row_mean: np.ndarray
    kernel_grand_mean: float
    train_dist_sq: np.ndarray
    threshold: float
    _active: np.ndarray
    _train_dense: np.ndarray
    _train_norm_sq: np.ndarray


@dataclass
class DetectionResult:
    """Rows whose squared distance exceeds the threshold, plus all distances."""

    flagged_indices: np.ndarray
    distances_sq: np.ndarray


def svdd_fit(
    train: Sequence[SparseVector], sigma: float = 1.0, delta: float = 0.01
) -> SvddModel:
    """Build the center-of-mass description of the training rows.

    The flagging threshold is the largest training squared distance plus
    the estimation error of the empirical center at confidence 1-delta.
    """
    if len(train) == 0:
        raise ValueError("cannot fit on an empty training set")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    err = center_estimation_error(len(train), delta)

    rows = list(train)
    m = len(rows)
    active = np.unique(np.concatenate([r.indices for r in rows])) if any(
        r.nnz for r in rows
    ) else np.zeros(0, dtype=np.int64)
    dense = _dense_over(rows, active)
    norm_sq = np.array([r.norm_sq() for r in rows])
    dist_mat = norm_sq[:, None] + norm_sq[None, :] - 2.0 * (dense @ dense.T)
    kernel = np.exp(-dist_mat / (2.0 * sigma * sigma))
    row_mean = kernel.mean(axis=1)
    grand_mean = float(kernel.mean())
    train_dist_sq = 1.0 - 2.0 * row_mean + grand_mean
    threshold = float(train_dist_sq.max()) + err
    return SvddModel(
        train_rows=rows,
        sigma=sigma,
        delta=delta,
        kernel_row_mean=row_mean,
        kernel_grand_mean=grand_mean,
        train_dist_sq=train_dist_sq,
        threshold=threshold,
        _active=active,
        _train_dense=dense,
        _train_norm_sq=norm_sq,
    )


def svdd_distances(model: SvddModel, test: Sequence[SparseVector]) -> np.ndarray:
    """Squared center-of-mass distances of test rows."""
    if len(test) == 0:
        return np.zeros(0)
    rows = list(test)
    dense = _dense_over(rows, model._active)
    norm_sq = np.array([r.norm_sq() for r in rows])
    cross = dense @ model._train_dense.T
    dist_mat = norm_sq[:, None] + model._train_norm_sq[None, :] - 2.0 * cross
    kernel = np.exp(-dist_mat / (2.0 * model.sigma * model.sigma))
    return 1.0 - 2.0 * kernel.mean(axis=1) + model.kernel_grand_mean


def svdd_detect(model: SvddModel, test: Sequence[SparseVector]) -> DetectionResult:
    """Flag exactly the test rows whose squared distance exceeds the threshold."""
    dist_sq = svdd_distances(model, test)
    flagged = np.nonzero(dist_sq > model.threshold)[0]
    return DetectionResult(flagged.astype(np.int64), dist_sq)


def svdd_per_feature(
    train: Sequence[SparseVector],
    test: Sequence[SparseVector],
    sigma: float = 1.0,
    delta: float = 0.01,
) -> dict[int, DetectionResult]:
    """Run an independent detector per feature (channel) index."""
    features: set[int] = set()
    for r in train:
        features.update(r.indices.tolist())
    results = {}
    for j in sorted(features):
        train_j = [_project(r, j) for r in train]
        test_j = [_project(r, j) for r in test]
        model = svdd_fit(train_j, sigma=sigma, delta=delta)
        results[j] = svdd_detect(model, test_j)
    return results


def _project(row: SparseVector, feature: int) -> SparseVector:
    pos = np.searchsorted(row.indices, feature)
    if pos < row.indices.size and row.indices[pos] == feature:
        return SparseVector(np.array([0], dtype=np.int64), np.array([row.values[pos]]))
    return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0))


def write_detection_csv(result: DetectionResult, path) -> None:
    flagged = set(result.flagged_indices.tolist())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("row_index,distance_sq,flagged\n")
        for i, d in enumerate(result.distances_sq.tolist()):
            fh.write(f"{i},{d!r},{int(i in flagged)}\n")
