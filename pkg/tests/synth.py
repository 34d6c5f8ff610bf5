"""Seeded synthetic datasets shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from skewlearn import LabeledInstance, SparseVector


def imbalanced_batch(
    n: int,
    d: int,
    seed: int,
    pos_frac: float = 0.1,
    margin: float = 1.0,
    scale: float = 0.5,
    w_seed: int | None = None,
) -> list[LabeledInstance]:
    """Linearly separable imbalanced rows: gaussian noise shifted along a
    fixed teacher direction until the label's margin is at least `margin`.

    `w_seed` pins the teacher so train/test splits drawn with different
    sampling seeds share the same geometry.
    """
    teacher_rng = np.random.default_rng(seed if w_seed is None else w_seed)
    w_star = teacher_rng.normal(size=d)
    nsq = float(w_star @ w_star)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        y = 1 if rng.random() < pos_frac else -1
        x = rng.normal(size=d) * scale
        s = float(x @ w_star)
        if y * s < margin:
            x = x + y * (margin - y * s) * w_star / nsq
        out.append(LabeledInstance(SparseVector.from_dense(x), y))
    return out


def positive_block_stream(
    n: int,
    d: int,
    seed: int,
    pos_frac: float = 0.1,
    noise: float = 0.08,
    block: int = 10,
    active: int = 3,
    block_value: float = 0.3,
) -> list[LabeledInstance]:
    """Separable 1:9 stream whose positive class is only identifiable
    through a reserved feature block.

    Every row carries a bias feature and distractor noise; positives
    additionally activate `active` random features of the trailing
    block. The evidence for the rare class therefore arrives only with
    rare examples, which is the regime where the cost-sensitive margin
    target pays off.
    """
    rng = np.random.default_rng(seed)
    noise_hi = d - block
    out = []
    for _ in range(n):
        y = 1 if rng.random() < pos_frac else -1
        x = np.zeros(d)
        x[0] = 1.0
        x[1:noise_hi] = rng.normal(size=noise_hi - 1) * noise
        if y == 1:
            cols = rng.choice(np.arange(noise_hi, d), size=active, replace=False)
            x[cols] = block_value
        out.append(LabeledInstance(SparseVector.from_dense(x), y))
    return out


def random_sparse_vector(
    rng: np.random.Generator, dim: int, nnz: int, scale: float = 1.0
) -> SparseVector:
    idx = np.sort(rng.choice(dim, size=min(nnz, dim), replace=False))
    vals = rng.normal(size=idx.size) * scale
    vals[vals == 0.0] = scale
    return SparseVector(idx.astype(np.int64), vals)


def gaussian_cluster_rows(
    n: int, seed: int, center=(0.0, 0.0), std: float = 0.1
) -> list[SparseVector]:
    """Tight 2-D gaussian cluster as sparse rows (dense 2-feature points)."""
    rng = np.random.default_rng(seed)
    pts = rng.normal(loc=center, scale=std, size=(n, 2))
    return [SparseVector.from_dense(p) for p in pts]
