"""Simulated multi-worker training over a deterministic reduction bus.

Workers live in-process: each exclusively owns a contiguous slice of the
dataset plus its consensus locals, and all cross-worker communication is
an allreduce that sums contributions in worker-index order. Given the
same (seed, worker_count) every run is bit-identical; no network or
threads are involved.

Two trainers are provided: consensus-ADMM with a choice of smooth
subsolver (L-BFGS or random coordinate descent), and a synchronous
distributed accelerated prox-gradient loop that allreduces the full
gradient once per iteration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import LabeledInstance, RowMatrix
from .losses import CostPair, HingeCoordState, WeightedSmoothHinge, example_weights
from .solvers import (
    SmoothProblem,
    SolveReport,
    SolverStallError,
    fista_minimize,
    lbfgs_minimize,
    rcd_minimize,
    soft_threshold,
)

SUBSOLVERS = ("lbfgs", "rcd")


class AllreduceBus:
    """Elementwise-sum reduction with a fixed worker-index order.

    Every caller observes the identical reduced value; repeated calls on
    the same parts are bit-identical.
    """

    def __init__(self, worker_count: int):
        if worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        self.worker_count = worker_count

    def allreduce(self, parts: Sequence[np.ndarray]) -> np.ndarray:
        if len(parts) != self.worker_count:
            raise ValueError("one contribution per worker required")
        acc = np.array(parts[0], dtype=np.float64, copy=True)
        for p in parts[1:]:
            acc += p
        return acc

    def allreduce_scalar(self, parts: Sequence[float]) -> float:
        if len(parts) != self.worker_count:
            raise ValueError("one contribution per worker required")
        acc = float(parts[0])
        for p in parts[1:]:
            acc += float(p)
        return acc


@dataclass
class WorkerPartition:
    """One worker's slice of the dataset plus its consensus locals."""

    worker_id: int
    rows: list[LabeledInstance]
    w_local: np.ndarray | None = None
    u_dual: np.ndarray | None = None


@dataclass
class ConsensusState:
    iteration: int
    z: np.ndarray
    primal_residual: float
    dual_residual: float
    objective: float


def partition_rows(
    data: Sequence[LabeledInstance], n_workers: int, seed: int | None = None
) -> list[WorkerPartition]:
    """Split rows into contiguous chunks whose sizes differ by at most 1.

    No shuffling by default; passing a seed applies one deterministic
    permutation before chunking.
    """
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")
    if n_workers > len(data):
        raise ValueError(f"cannot split {len(data)} rows across {n_workers} workers")
    rows = list(data)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(rows))
        rows = [rows[i] for i in order]
    base, extra = divmod(len(rows), n_workers)
    partitions = []
    start = 0
    for wid in range(n_workers):
        size = base + (1 if wid < extra else 0)
        partitions.append(WorkerPartition(wid, rows[start : start + size]))
        start += size
    return partitions


def _infer_num_features(partitions: Sequence[WorkerPartition]) -> int:
    width = 0
    for part in partitions:
        for inst in part.rows:
            width = max(width, inst.features.max_index() + 1)
    return max(width, 1)


def _compile_hinges(partitions, costs, num_features):
    total_rows = sum(len(p.rows) for p in partitions)
    if total_rows == 0:
        raise ValueError("no rows to train on")
    scale = 1.0 / total_rows
    hinges = []
    for part in partitions:
        mat = RowMatrix.from_instances(part.rows, num_features)
        hinges.append(WeightedSmoothHinge(mat, example_weights(mat.labels, costs), scale))
    return hinges


class _AugmentedCoordState:
    """Hinge coordinate oracle plus the proximal quadratic term's slope."""

    def __init__(self, inner: HingeCoordState, rho_admm: float, v: np.ndarray):
        self.inner = inner
        self.rho_admm = rho_admm
        self.v = v

    def partial(self, x, j):
        return self.inner.partial(x, j) + self.rho_admm * (x[j] - self.v[j])

    def moved(self, j, delta):
        self.inner.moved(j, delta)


def _local_subproblem(
    hinge: WeightedSmoothHinge, rho_admm: float, v: np.ndarray
) -> SmoothProblem:
    """Worker objective: its share of the loss plus (rho/2)||w - v||^2."""

    def value(w):
        diff = w - v
        return hinge.value(w) + 0.5 * rho_admm * float(diff @ diff)

    def grad(w):
        return hinge.grad(w) + rho_admm * (w - v)

    return SmoothProblem(
        dim=v.shape[0],
        value=value,
        grad=grad,
        lipschitz=hinge.lipschitz() + rho_admm,
        coord_lipschitz=hinge.coord_lipschitz() + rho_admm,
        coord_state=lambda x: _AugmentedCoordState(hinge.coord_state(x), rho_admm, v),
    )


@dataclass
class DscilRun:
    weights: np.ndarray
    states: list[ConsensusState]
    worker_seconds: list[float]
    worker_iterations: list[int]
    iterations: int
    converged: bool


def dscil_train(
    partitions: Sequence[WorkerPartition],
    lam: float,
    rho_admm: float = 1.0,
    subsolver: str = "lbfgs",
    max_iter: int = 200,
    eps_abs: float = 1e-6,
    eps_rel: float = 1e-4,
    costs: CostPair | None = None,
    num_features: int | None = None,
    inner_max_iter: int = 2000,
    inner_tol: float = 1e-8,
    seed: int = 0,
) -> DscilRun:
    """Consensus-ADMM training of the L1-regularized cost-weighted loss.

    Each iteration every worker minimizes its local smooth objective
    around the consensus point, the global vector is refreshed by
    averaging and soft-thresholding with kappa = lam/(rho*n), and the
    scaled duals absorb the disagreement. Stops on the standard
    absolute/relative primal and dual residual test.
    """
    if subsolver not in SUBSOLVERS:
        raise ValueError(f"subsolver must be one of {SUBSOLVERS}")
    if lam < 0 or rho_admm <= 0:
        raise ValueError("need lam >= 0 and rho_admm > 0")
    n = len(partitions)
    bus = AllreduceBus(n)
    dim = num_features if num_features is not None else _infer_num_features(partitions)
    hinges = _compile_hinges(partitions, costs, dim)

    z = np.zeros(dim)
    for part in partitions:
        part.w_local = np.zeros(dim)
        part.u_dual = np.zeros(dim)

    worker_seconds = [0.0] * n
    worker_iterations = [0] * n
    states: list[ConsensusState] = []
    converged = False
    iterations = 0

    for k in range(1, max_iter + 1):
        iterations = k
        for part, hinge in zip(partitions, hinges):
            problem = _local_subproblem(hinge, rho_admm, z - part.u_dual)
            started = time.perf_counter()
            try:
                if subsolver == "lbfgs":
                    report = lbfgs_minimize(
                        problem, part.w_local, max_iter=inner_max_iter, tol=inner_tol
                    )
                else:
                    inner_seed = seed * 1_000_003 + k * 131 + part.worker_id
                    report = rcd_minimize(
                        problem,
                        part.w_local,
                        max_iter=inner_max_iter,
                        tol=inner_tol,
                        seed=inner_seed,
                    )
            except SolverStallError as err:
                raise SolverStallError(f"worker {part.worker_id}: {err}") from err
            worker_seconds[part.worker_id] += time.perf_counter() - started
            worker_iterations[part.worker_id] += report.iterations
            part.w_local = report.x

        w_mean = bus.allreduce([p.w_local for p in partitions]) / n
        u_mean = bus.allreduce([p.u_dual for p in partitions]) / n
        z_prev = z
        z = soft_threshold(w_mean + u_mean, lam / (rho_admm * n))
        for part in partitions:
            part.u_dual = part.u_dual + part.w_local - z

        primal = float(
            np.sqrt(sum(float(np.sum((p.w_local - z) ** 2)) for p in partitions))
        )
        dual = rho_admm * np.sqrt(n) * float(np.linalg.norm(z - z_prev))
        eps_pri = np.sqrt(n * dim) * eps_abs + eps_rel * max(
            np.sqrt(sum(float(np.sum(p.w_local**2)) for p in partitions)),
            np.sqrt(n) * float(np.linalg.norm(z)),
        )
        eps_dual = np.sqrt(n * dim) * eps_abs + eps_rel * rho_admm * np.sqrt(
            sum(float(np.sum(p.u_dual**2)) for p in partitions)
        )
        objective = _distributed_objective(bus, hinges, z, lam)
        states.append(ConsensusState(k, z.copy(), primal, dual, objective))
        if primal <= eps_pri and dual <= eps_dual:
            converged = True
            break

    return DscilRun(z, states, worker_seconds, worker_iterations, iterations, converged)


def _distributed_objective(bus, hinges, w, lam):
    smooth = bus.allreduce_scalar([h.value(w) for h in hinges])
    return smooth + lam * float(np.abs(w).sum())


@dataclass
class CilsdRun:
    weights: np.ndarray
    report: SolveReport
    worker_seconds: list[float]
    worker_iterations: list[int]


def cilsd_train(
    partitions: Sequence[WorkerPartition],
    lam: float,
    max_iter: int = 5000,
    tol: float = 1e-6,
    costs: CostPair | None = None,
    num_features: int | None = None,
) -> CilsdRun:
    """Synchronous distributed accelerated prox-gradient training.

    All workers hold the identical iterate in lockstep. Per iteration
    each computes its slice's gradient contribution, the bus sums them
    in worker order, and the same step-1/L accelerated update is applied
    everywhere. With one worker the trajectory is bitwise the
    centralized one. The curvature bound is likewise allreduced once up
    front.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    n = len(partitions)
    bus = AllreduceBus(n)
    dim = num_features if num_features is not None else _infer_num_features(partitions)
    hinges = _compile_hinges(partitions, costs, dim)

    worker_seconds = [0.0] * n

    def timed(i, fn, *args):
        started = time.perf_counter()
        out = fn(*args)
        worker_seconds[i] += time.perf_counter() - started
        return out

    def value(w):
        return bus.allreduce_scalar(
            [timed(i, h.value, w) for i, h in enumerate(hinges)]
        )

    def grad(w):
        return bus.allreduce(
            [timed(i, h.grad, w) for i, h in enumerate(hinges)]
        )

    lipschitz = bus.allreduce_scalar([h.lipschitz() for h in hinges])
    problem = SmoothProblem(dim=dim, value=value, grad=grad, lipschitz=lipschitz)
    report = fista_minimize(problem, lam, np.zeros(dim), max_iter=max_iter, tol=tol)
    return CilsdRun(report.x, report, worker_seconds, [report.iterations] * n)


@dataclass
class WorkerTiming:
    worker_id: int
    seconds: float
    iterations: int


@dataclass
class TimingReport:
    rows: list[WorkerTiming] = field(default_factory=list)
    total_seconds: float = 0.0
    total_iterations: int = 0


def training_time_report(run: DscilRun | CilsdRun) -> TimingReport:
    """Per-worker wall-clock and iteration bookkeeping plus the aggregate."""
    rows = [
        WorkerTiming(i, s, it)
        for i, (s, it) in enumerate(zip(run.worker_seconds, run.worker_iterations))
    ]
    return TimingReport(rows, sum(r.seconds for r in rows), sum(r.iterations for r in rows))


def residual_rows(run: DscilRun | CilsdRun) -> list[tuple[int, float, float, float]]:
    """(iteration, primal_residual, dual_residual, objective) rows for CSV."""
    if isinstance(run, DscilRun):
        return [
            (s.iteration, s.primal_residual, s.dual_residual, s.objective)
            for s in run.states
        ]
    report = run.report
    rows = []
    for k, obj in enumerate(report.history[1:], start=1):
        step = report.step_history[k - 1] if k - 1 < len(report.step_history) else 0.0
        rows.append((k, step, 0.0, obj))
    return rows


def write_residual_csv(run: DscilRun | CilsdRun, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,primal_residual,dual_residual,objective\n")
        for it, pri, dua, obj in residual_rows(run):
            fh.write(f"{it},{pri!r},{dua!r},{obj!r}\n")
