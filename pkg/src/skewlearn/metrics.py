"""Confusion accounting and imbalance-aware evaluation metrics.

Positives are the minority (anomaly) class. Every ratio with a zero
denominator is defined as 0, which matches how degenerate all-negative
predictors are conventionally scored (Gmean 0, not NaN).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def update_confusion(c: ConfusionCounts, y_true: int, y_pred: int) -> ConfusionCounts:
    """Return counts with exactly one cell incremented for (y_true, y_pred)."""
    if y_true not in (-1, 1) or y_pred not in (-1, 1):
        raise ValueError("labels must be -1 or +1")
    if y_true == 1:
        if y_pred == 1:
            return ConfusionCounts(c.tp + 1, c.tn, c.fp, c.fn)
        return ConfusionCounts(c.tp, c.tn, c.fp, c.fn + 1)
    if y_pred == 1:
        return ConfusionCounts(c.tp, c.tn, c.fp + 1, c.fn)
    return ConfusionCounts(c.tp, c.tn + 1, c.fp, c.fn)


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


def sensitivity(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def specificity(c: ConfusionCounts) -> float:
    return _ratio(c.tn, c.tn + c.fp)


def gmean(c: ConfusionCounts) -> float:
    """sqrt(sensitivity * specificity)."""
    return math.sqrt(sensitivity(c) * specificity(c))


def sum_metric(c: ConfusionCounts) -> float:
    """Balanced accuracy: 0.5*sensitivity + 0.5*specificity."""
    return 0.5 * sensitivity(c) + 0.5 * specificity(c)


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def fmeasure(c: ConfusionCounts) -> float:
    """F1: harmonic mean of precision and recall, 0 when both are 0."""
    p, r = precision(c), sensitivity(c)
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def accuracy(c: ConfusionCounts) -> float:
    return _ratio(c.tp + c.tn, c.total)


def mistake_rate(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("mistake rate is undefined before any prediction")
    return (c.fp + c.fn) / c.total


@dataclass
class TraceRow:
    samples_seen: int
    gmean: float
    mistake_rate: float
    fmeasure: float
    sum: float


@dataclass
class MetricTrace:
    """Cumulative online metric snapshots taken every `cadence` samples."""

    rows: list[TraceRow] = field(default_factory=list)

    def append(self, samples_seen: int, c: ConfusionCounts) -> None:
        if self.rows and samples_seen <= self.rows[-1].samples_seen:
            raise ValueError("samples_seen must be strictly increasing")
        self.rows.append(
            TraceRow(samples_seen, gmean(c), mistake_rate(c), fmeasure(c), sum_metric(c))
        )

    def to_csv(self) -> str:
        lines = ["samples_seen,gmean,mistake_rate,fmeasure,sum"]
        for r in self.rows:
            lines.append(
                f"{r.samples_seen},{r.gmean!r},{r.mistake_rate!r},{r.fmeasure!r},{r.sum!r}"
            )
        return "\n".join(lines) + "\n"


def write_trace_csv(trace: MetricTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(trace.to_csv())
