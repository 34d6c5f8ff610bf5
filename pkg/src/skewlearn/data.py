"""Sparse feature rows, LIBSVM text ingestion and batch normalization.

The on-disk format is the plain LIBSVM one: ``<label> <idx>:<val> ...``
with 1-based feature indices. Internally indices are 0-based. Online
learners consume raw rows one at a time; batch/distributed trainers
normalize columns to [-1, 1] using statistics fitted on the training
split only.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

import numpy as np


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input. Carries enough context to locate the token."""

    def __init__(self, message, line_number=None, column=None, byte_offset=None):
        self.line_number = line_number
        self.column = column
        self.byte_offset = byte_offset
        where = []
        if line_number is not None:
            where.append(f"line {line_number}")
        if column is not None:
            where.append(f"column {column}")
        if byte_offset is not None:
            where.append(f"byte offset {byte_offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


@dataclass(frozen=True, eq=False)
class SparseVector:
    """One feature row: strictly increasing indices with nonzero values."""

    indices: np.ndarray
    values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.ndim != 1 or val.ndim != 1 or idx.shape != val.shape:
            raise ValueError("indices and values must be 1-D arrays of equal length")
        if idx.size:
            if idx[0] < 0:
                raise ValueError("feature indices must be non-negative")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("feature indices must be strictly increasing")
            if not np.all(np.isfinite(val)):
                raise ValueError("feature values must be finite")
            if np.any(val == 0.0):
                raise ValueError("zero values must not be stored")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        pairs = [(int(i), float(v)) for i, v in pairs if float(v) != 0.0]
        pairs.sort(key=lambda p: p[0])
        return cls(
            np.array([p[0] for p in pairs], dtype=np.int64),
            np.array([p[1] for p in pairs], dtype=np.float64),
        )

    @classmethod
    def from_dense(cls, arr) -> "SparseVector":
        arr = np.asarray(arr, dtype=np.float64)
        idx = np.nonzero(arr)[0]
        return cls(idx.astype(np.int64), arr[idx])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def max_index(self) -> int:
        """Largest feature index, or -1 for the empty row."""
        return int(self.indices[-1]) if self.indices.size else -1

    def norm_sq(self) -> float:
        return float(self.values @ self.values)

    def dot(self, other: "SparseVector") -> float:
        """Sparse-sparse dot product (commutative)."""
        a, b = self, other
        if a.nnz == 0 or b.nnz == 0:
            return 0.0
        pos = np.searchsorted(b.indices, a.indices)
        pos_ok = pos < b.indices.size
        hit = np.zeros(a.indices.size, dtype=bool)
        hit[pos_ok] = b.indices[pos[pos_ok]] == a.indices[pos_ok]
        if not hit.any():
            return 0.0
        return float(a.values[hit] @ b.values[pos[hit]])

    def dot_dense(self, w: np.ndarray) -> float:
        """Dot with a dense weight vector; indices beyond len(w) count as 0."""
        if self.nnz == 0:
            return 0.0
        if self.max_index() < w.shape[0]:
            return float(self.values @ w[self.indices])
        ok = self.indices < w.shape[0]
        return float(self.values[ok] @ w[self.indices[ok]])

    def dist_sq(self, other: "SparseVector") -> float:
        """Squared euclidean distance to another sparse row.

        Summation order keeps the result exactly symmetric in (self, other).
        """
        return (self.norm_sq() + other.norm_sq()) - 2.0 * self.dot(other)

    def to_dense(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class LabeledInstance:
    features: SparseVector
    label: int

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label!r}")
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class DatasetStats:
    """Fit-time column statistics: per-feature max |value| and class counts."""

    num_features: int
    per_feature_max_abs: dict[int, float]
    positive_count: int
    negative_count: int


def _parse_label(token: str) -> int:
    if token in ("+1", "1"):
        return 1
    if token == "-1":
        return -1
    if token == "0":  # tolerate 0/1-labeled files
        return -1
    raise LibsvmParseError(f"unrecognized label token {token!r}", column=1)


def parse_libsvm_line(line: str) -> LabeledInstance:
    """Parse one LIBSVM text line into a LabeledInstance.

    File indices are 1-based and converted to 0-based. Zero-valued
    entries are dropped. Non-increasing indices, malformed tokens and
    non-finite values raise LibsvmParseError naming the offending column.
    """
    text = line.rstrip("\r\n")
    tokens = text.split()
    if not tokens:
        raise LibsvmParseError("empty line", column=1)
    label = _parse_label(tokens[0])

    indices: list[int] = []
    values: list[float] = []
    prev_idx = -1
    col = 1 + len(tokens[0])  # running 1-based column of the next token
    for tok in tokens[1:]:
        col = text.index(tok, col - 1) + 1
        head, sep, tail = tok.partition(":")
        if not sep:
            raise LibsvmParseError(f"expected idx:value, got {tok!r}", column=col)
        try:
            file_idx = int(head)
        except ValueError:
            raise LibsvmParseError(f"bad feature index {head!r}", column=col) from None
        if file_idx < 1:
            raise LibsvmParseError(f"feature index must be >= 1, got {file_idx}", column=col)
        try:
            value = float(tail)
        except ValueError:
            raise LibsvmParseError(f"bad feature value {tail!r}", column=col) from None
        if not np.isfinite(value):
            raise LibsvmParseError(f"non-finite feature value {tail!r}", column=col)
        idx = file_idx - 1
        if idx <= prev_idx:
            raise LibsvmParseError(f"non-increasing feature index {file_idx}", column=col)
        prev_idx = idx
        if value != 0.0:
            indices.append(idx)
            values.append(value)
        col += len(tok)

    return LabeledInstance(
        SparseVector(np.array(indices, dtype=np.int64), np.array(values, dtype=np.float64)),
        label,
    )


def format_libsvm_line(inst: LabeledInstance) -> str:
    """Inverse of parse_libsvm_line; float repr keeps the round trip exact."""
    parts = ["+1" if inst.label == 1 else "-1"]
    parts.extend(f"{i + 1}:{v!r}" for i, v in inst.features.pairs())
    return " ".join(parts)


def _iter_lines(source: IO[bytes]) -> Iterator[tuple[int, int, bytes]]:
    offset = 0
    for lineno, raw in enumerate(source, start=1):
        yield lineno, offset, raw
        offset += len(raw)


def iter_instances(source: IO[bytes]) -> Iterator[LabeledInstance]:
    """Stream instances from a binary LIBSVM stream, one line at a time.

    Blank lines are skipped. Parse failures are re-raised with the line
    number and byte offset of the offending line attached.
    """
    for lineno, offset, raw in _iter_lines(source):
        text = raw.decode("utf-8")
        if not text.strip():
            continue
        try:
            yield parse_libsvm_line(text)
        except LibsvmParseError as err:
            raise LibsvmParseError(
                str(err), line_number=lineno, column=err.column, byte_offset=offset
            ) from None


def stream_minibatches(
    source: IO[bytes], batch_size: int
) -> Iterator[list[LabeledInstance]]:
    """Yield lists of at most batch_size instances in file order.

    Memory use is bounded by the batch, not the file. The final batch
    may be short.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    batch: list[LabeledInstance] = []
    for inst in iter_instances(source):
        batch.append(inst)
        if len(batch) == batch_size:
            yield batch
            batch = []
    if batch:
        yield batch


def load_libsvm_file(path) -> list[LabeledInstance]:
    with open(path, "rb") as fh:
        return list(iter_instances(fh))


def loads_libsvm(text: str) -> list[LabeledInstance]:
    return list(iter_instances(io.BytesIO(text.encode("utf-8"))))


def fit_normalizer(data: Sequence[LabeledInstance]) -> DatasetStats:
    """Tally per-feature max |value| and class counts over the training rows."""
    if len(data) == 0:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    max_abs: dict[int, float] = {}
    pos = neg = 0
    num_features = 0
    for inst in data:
        if inst.label == 1:
            pos += 1
        else:
            neg += 1
        feats = inst.features
        num_features = max(num_features, feats.max_index() + 1)
        for i, v in zip(feats.indices.tolist(), np.abs(feats.values).tolist()):
            if v > max_abs.get(i, 0.0):
                max_abs[i] = v
    return DatasetStats(num_features, max_abs, pos, neg)


def apply_normalizer(stats: DatasetStats, x: SparseVector) -> SparseVector:
    """Scale each value by its feature's fitted max |value|.

    Features unseen at fit time (or with max 0) pass through unchanged,
    so novel test-set features neither divide by zero nor leak fit data.
    """
    if x.nnz == 0:
        return x
    scale = np.array(
        [stats.per_feature_max_abs.get(int(i), 1.0) or 1.0 for i in x.indices],
        dtype=np.float64,
    )
    return SparseVector(x.indices.copy(), x.values / scale)


def normalize_instances(
    stats: DatasetStats, data: Iterable[LabeledInstance]
) -> list[LabeledInstance]:
    return [LabeledInstance(apply_normalizer(stats, d.features), d.label) for d in data]


@dataclass
class RowMatrix:
    """CSR-style compilation of instances for vectorized batch math.

    Pure numpy: margins use segment sums via reduceat, transpose-products
    use bincount. Both are deterministic, which the distributed runtime
    relies on.
    """

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    num_features: int
    row_norm_sq: np.ndarray = field(init=False)

    def __post_init__(self):
        sq = self.values * self.values
        self.row_norm_sq = np.array(
            [sq[s:e].sum() for s, e in zip(self.indptr[:-1], self.indptr[1:])]
        ) if self.num_rows else np.zeros(0)

    @classmethod
    def from_instances(
        cls, data: Sequence[LabeledInstance], num_features: int | None = None
    ) -> "RowMatrix":
        indptr = np.zeros(len(data) + 1, dtype=np.int64)
        chunks_i = []
        chunks_v = []
        labels = np.zeros(len(data), dtype=np.float64)
        width = 0
        for r, inst in enumerate(data):
            feats = inst.features
            chunks_i.append(feats.indices)
            chunks_v.append(feats.values)
            indptr[r + 1] = indptr[r] + feats.nnz
            labels[r] = inst.label
            width = max(width, feats.max_index() + 1)
        if num_features is None:
            num_features = width
        elif width > num_features:
            raise ValueError(f"row touches feature {width - 1} >= num_features {num_features}")
        indices = np.concatenate(chunks_i) if chunks_i else np.zeros(0, dtype=np.int64)
        values = np.concatenate(chunks_v) if chunks_v else np.zeros(0, dtype=np.float64)
        return cls(indptr, indices, values, labels, num_features)

    @property
    def num_rows(self) -> int:
        return int(self.indptr.size - 1)

    def dot(self, w: np.ndarray) -> np.ndarray:
        """Row scores X @ w."""
        if self.values.size == 0:
            return np.zeros(self.num_rows)
        prod = self.values * w[self.indices]
        nonempty = self.indptr[:-1] < self.indptr[1:]
        out = np.zeros(self.num_rows)
        if nonempty.any():
            starts = self.indptr[:-1][nonempty]
            out[nonempty] = np.add.reduceat(prod, starts)
        return out

    def transpose_dot(self, coef: np.ndarray) -> np.ndarray:
        """Column accumulation X.T @ coef for per-row coefficients."""
        if self.values.size == 0:
            return np.zeros(self.num_features)
        per_entry = np.repeat(coef, np.diff(self.indptr)) * self.values
        return np.bincount(self.indices, weights=per_entry, minlength=self.num_features)

    def column_sq_weighted(self, row_weights: np.ndarray) -> np.ndarray:
        """Per-column sums of row_weight * value^2 (coordinate curvature)."""
        if self.values.size == 0:
            return np.zeros(self.num_features)
        per_entry = np.repeat(row_weights, np.diff(self.indptr)) * self.values**2
        return np.bincount(self.indices, weights=per_entry, minlength=self.num_features)

    def csc(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Column-sliced view (col_indptr, entry_row, entry_value), cached.

        Coordinate-descent solvers use it to touch only the rows of one
        column per step.
        """
        cached = getattr(self, "_csc", None)
        if cached is None:
            entry_row = np.repeat(
                np.arange(self.num_rows, dtype=np.int64), np.diff(self.indptr)
            )
            order = np.argsort(self.indices, kind="stable")
            cols = self.indices[order]
            col_indptr = np.searchsorted(cols, np.arange(self.num_features + 1))
            cached = (col_indptr, entry_row[order], self.values[order])
            self._csc = cached
        return cached
