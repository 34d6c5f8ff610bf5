"""Streaming learners: the passive-aggressive family, its Gmean-driven
cost-sensitive variants, and the accelerated stochastic proximal learner.

All learners share the same step protocol: predict on the incoming row,
suffer a loss, update, and only then fold the example into the running
class counts (so the penalty for step t is computed from the first t-1
examples). Exact-zero scores predict -1, the majority class.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .data import LabeledInstance, SparseVector
from .losses import ClassState, hinge_cs, rho, smooth_hinge_cs, smooth_hinge_grad
from .metrics import ConfusionCounts, MetricTrace, update_confusion
from .solvers import soft_threshold

PA_VARIANTS = ("pa", "pa1", "pa2")


def predict(w: np.ndarray, x: SparseVector) -> int:
    """Sign of the score; a score of exactly 0 maps to -1."""
    return 1 if x.dot_dense(w) > 0.0 else -1


def pa_tau(loss: float, x_norm_sq: float, variant: str, C: float) -> float:
    """Closed-form step sizes of the passive-aggressive family."""
    if variant not in PA_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if loss <= 0.0 or x_norm_sq <= 0.0:
        return 0.0
    if variant == "pa":
        return loss / x_norm_sq
    if variant == "pa1":
        return min(C, loss / x_norm_sq)
    return loss / (x_norm_sq + 0.5 / C)


def acceleration_blend(mu_eta: float) -> float:
    """Momentum blend weight (1 - sqrt(mu*eta)) / (1 + sqrt(mu*eta)).

    Equals 1 at mu*eta = 0 (no acceleration) and decreases toward 0 as
    mu*eta approaches 1.
    """
    if not 0.0 <= mu_eta < 1.0:
        raise ValueError("mu * eta must lie in [0, 1)")
    root = math.sqrt(mu_eta)
    return (1.0 - root) / (1.0 + root)


def _grown(arr: np.ndarray, n: int) -> np.ndarray:
    if arr.shape[0] >= n:
        return arr
    out = np.zeros(n)
    out[: arr.shape[0]] = arr
    return out


class PaModel:
    """Passive-aggressive learner; cost_sensitive=True gives the
    Gmean-oriented variant whose margin target is the running penalty.

    With the unclamped update, a lossy round moves the margin exactly to
    the penalty value.
    """

    def __init__(self, variant: str = "pa", C: float = 1.0, cost_sensitive: bool = True):
        if variant not in PA_VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if C <= 0.0:
            raise ValueError("C must be positive")
        self.variant = variant
        self.C = float(C)
        self.cost_sensitive = cost_sensitive
        self.w = np.zeros(0)
        self.class_state = ClassState()

    def step(self, inst: LabeledInstance) -> tuple[int, float]:
        x = inst.features
        self.w = _grown(self.w, x.max_index() + 1)
        score = x.dot_dense(self.w)
        y_pred = 1 if score > 0.0 else -1
        y = inst.label
        target = rho(self.class_state, y) if self.cost_sensitive else 1.0
        loss = hinge_cs(y * score, target)
        if loss > 0.0:
            tau = pa_tau(loss, x.norm_sq(), self.variant, self.C)
            if tau > 0.0:
                self.w[x.indices] += (tau * y) * x.values
        self.class_state.observe(y, y_pred)
        return y_pred, loss


class AspgdModel:
    """Accelerated stochastic proximal learner with L1 shrinkage.

    State follows the dual-accumulator scheme: theta collects gradient
    steps, the mirror map is Euclidean (so the primal image of theta is
    theta itself), the prox is soft-thresholding, and the served weights
    blend the previous ones with the fresh prox output.

    By default the step size is 1/(mu+1) with the curvature mu set to
    the running penalty of the incoming class, re-estimated every step;
    the blend weight follows from mu*eta. Passing an explicit eta fixes
    both for the whole stream. accelerated=False pins the blend at 1.
    """

    def __init__(
        self,
        lam: float = 0.0,
        accelerated: bool = True,
        eta: float | None = None,
        cost_sensitive: bool = True,
    ):
        if lam < 0.0:
            raise ValueError("lam must be >= 0")
        self.lam = float(lam)
        self.accelerated = accelerated
        self.cost_sensitive = cost_sensitive
        self.adaptive_eta = eta is None
        mu0 = 1.0  # cold-start penalty before any example arrives
        self.eta = 1.0 / (mu0 + 1.0) if eta is None else float(eta)
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if accelerated:
            if mu0 * self.eta >= 1.0:
                raise ValueError("acceleration requires mu * eta < 1 at construction")
            self.gamma = acceleration_blend(mu0 * self.eta)
        else:
            self.gamma = 1.0
        self.theta = np.zeros(0)
        self.w = np.zeros(0)
        self.w_prev = np.zeros(0)
        self.class_state = ClassState()

    def _retune(self, mu: float) -> None:
        self.eta = 1.0 / (mu + 1.0)
        if self.accelerated:
            self.gamma = acceleration_blend(mu * self.eta)

    def step(self, inst: LabeledInstance) -> tuple[int, float]:
        x = inst.features
        n = max(x.max_index() + 1, self.theta.shape[0])
        self.theta = _grown(self.theta, n)
        self.w_prev = _grown(self.w_prev, n)

        v = self.theta
        u = soft_threshold(v, self.eta * self.lam)
        if self.gamma == 1.0:
            w = u
        else:
            w = (1.0 - self.gamma) * self.w_prev + self.gamma * u
        score = x.dot_dense(w)
        y_pred = 1 if score > 0.0 else -1
        y = inst.label
        target = rho(self.class_state, y) if self.cost_sensitive else 1.0
        loss = smooth_hinge_cs(y * score, target)
        if loss > 0.0:
            g = smooth_hinge_grad(w, x, y, target)
            if g.nnz:
                self.theta[g.indices] -= self.eta * g.values
        self.w = w
        self.w_prev = w.copy()
        self.class_state.observe(y, y_pred)
        if self.adaptive_eta:
            self._retune(target)
        return y_pred, loss


def run_stream(
    learner, instances: Iterable[LabeledInstance], trace_every: int = 100
) -> tuple[MetricTrace, ConfusionCounts]:
    """Single pass over the stream, tracing cumulative metrics every
    trace_every samples (plus a final row for a partial tail)."""
    if trace_every < 1:
        raise ValueError("trace_every must be >= 1")
    counts = ConfusionCounts()
    trace = MetricTrace()
    seen = 0
    for inst in instances:
        y_pred, _ = learner.step(inst)
        counts = update_confusion(counts, inst.label, y_pred)
        seen += 1
        if seen % trace_every == 0:
            trace.append(seen, counts)
    if seen and seen % trace_every != 0:
        trace.append(seen, counts)
    return trace, counts


def make_learner(algo: str, lam: float = 0.0, C: float = 1.0, eta: float | None = None):
    """Construct a streaming learner by its experiment name."""
    algo = algo.lower()
    pa_like = {
        "pa": ("pa", False),
        "pa1": ("pa1", False),
        "pa2": ("pa2", False),
        "pagmean": ("pa", True),
        "pagmean1": ("pa1", True),
        "pagmean2": ("pa2", True),
    }
    if algo in pa_like:
        variant, cost_sensitive = pa_like[algo]
        return PaModel(variant=variant, C=C, cost_sensitive=cost_sensitive)
    if algo == "aspgd":
        return AspgdModel(lam=lam, accelerated=True, eta=eta)
    if algo == "aspgdnoacc":
        return AspgdModel(lam=lam, accelerated=False, eta=eta)
    raise ValueError(f"unknown online algorithm {algo!r}")
