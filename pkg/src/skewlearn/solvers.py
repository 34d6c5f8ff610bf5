"""Batch optimization blocks: soft-thresholding, FISTA, L-BFGS, random
coordinate descent and the lambda_max heuristic.

Every solver works on a SmoothProblem, a plain bundle of callables, so
the distributed runtime can hand the same machinery different local
objectives. Solvers are single-threaded and deterministic given their
arguments (RCD additionally takes a seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .data import RowMatrix


class DivergenceError(RuntimeError):
    """The objective became non-finite during iteration."""


class SolverStallError(RuntimeError):
    """A line search could not find an acceptable step."""


class CoordState(Protocol):
    """Optional fast per-coordinate access for coordinate descent."""

    def partial(self, x: np.ndarray, j: int) -> float: ...

    def moved(self, j: int, delta: float) -> None: ...


@dataclass
class SmoothProblem:
    """Differentiable part of a composite objective.

    `lipschitz` must upper-bound the gradient's Lipschitz constant;
    `coord_lipschitz` (per-coordinate curvature bounds) is required by
    rcd_minimize. `coord_state` can provide an efficient coordinate
    oracle; without it RCD falls back to full gradients.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    coord_lipschitz: np.ndarray | None = None
    coord_state: Callable[[np.ndarray], CoordState] | None = None


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list)
    step_history: list[float] = field(default_factory=list)


def soft_threshold(v: np.ndarray, kappa: float) -> np.ndarray:
    """Elementwise sign(v) * max(|v| - kappa, 0): the prox of kappa*|.|_1."""
    if kappa < 0:
        raise ValueError("threshold must be non-negative")
    return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)


def critical_lambda(problem: SmoothProblem) -> float:
    """||grad f(0)||_inf: at or above this, the all-zero vector is optimal."""
    if problem.dim == 0:
        return 0.0
    g0 = problem.grad(np.zeros(problem.dim))
    return float(np.abs(g0).max())


def lambda_max(data, num_features: int | None = None) -> float:
    """(1/m) * ||X^T ytilde||_inf with ytilde = m_-/m on positives, -m_+/m on negatives."""
    mat = data if isinstance(data, RowMatrix) else RowMatrix.from_instances(data, num_features)
    m = mat.num_rows
    if m == 0:
        raise ValueError("lambda_max needs at least one row")
    m_pos = int((mat.labels > 0).sum())
    m_neg = m - m_pos
    ytilde = np.where(mat.labels > 0, m_neg / m, -m_pos / m)
    corr = mat.transpose_dot(ytilde)
    return float(np.abs(corr).max()) / m if corr.size else 0.0


def _composite(problem: SmoothProblem, lam: float, x: np.ndarray) -> float:
    return problem.value(x) + lam * float(np.abs(x).sum())


def fista_minimize(
    problem: SmoothProblem,
    lam: float,
    x0: np.ndarray,
    max_iter: int = 5000,
    tol: float = 1e-6,
) -> SolveReport:
    """Accelerated proximal gradient with step 1/L and function-value restart.

    Momentum t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2. When the accelerated
    step would increase the objective, momentum is reset and a plain
    prox-gradient step is taken instead, so the recorded objective
    history is non-increasing. Stops when the iterate's max-abs change
    falls to tol.
    """
    if problem.lipschitz <= 0:
        raise ValueError("lipschitz bound must be positive")
    L = problem.lipschitz
    x = np.asarray(x0, dtype=np.float64).copy()
    y = x.copy()
    t = 1.0
    fx = _composite(problem, lam, x)
    history = [fx]
    step_history: list[float] = []
    converged = False
    iterations = 0
    for k in range(1, max_iter + 1):
        iterations = k
        x_new = soft_threshold(y - problem.grad(y) / L, lam / L)
        f_new = _composite(problem, lam, x_new)
        if f_new > fx:
            # restart: a plain prox step from x cannot increase the objective
            t = 1.0
            x_new = soft_threshold(x - problem.grad(x) / L, lam / L)
            f_new = _composite(problem, lam, x_new)
        if not np.isfinite(f_new):
            raise DivergenceError(f"objective became non-finite at iteration {k}")
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_next) * (x_new - x)
        step = float(np.abs(x_new - x).max()) if x.size else 0.0
        x, fx, t = x_new, f_new, t_next
        history.append(fx)
        step_history.append(step)
        if step <= tol:
            converged = True
            break
    return SolveReport(x, fx, iterations, converged, history, step_history)


def _two_loop(grad_vec, s_list, y_list, rho_list):
    q = grad_vec.copy()
    alphas = []
    for s, yv, r in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = r * float(s @ q)
        alphas.append(a)
        q -= a * yv
    if s_list:
        s, yv = s_list[-1], y_list[-1]
        q *= float(s @ yv) / float(yv @ yv)
    for (s, yv, r), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = r * float(yv @ q)
        q += (a - b) * s
    return q


def lbfgs_minimize(
    problem: SmoothProblem,
    x0: np.ndarray,
    memory: int = 10,
    max_iter: int = 5000,
    tol: float = 1e-6,
) -> SolveReport:
    """Limited-memory BFGS with two-loop recursion and Armijo backtracking.

    Backtracking uses sufficient-decrease constant 1e-4 and halves the
    step; 50 failed halvings raise SolverStallError. Stops when
    ||grad||_inf <= tol.
    """
    armijo_c = 1e-4
    x = np.asarray(x0, dtype=np.float64).copy()
    fx = problem.value(x)
    g = problem.grad(x)
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []
    history = [float(np.abs(g).max()) if g.size else 0.0]
    iterations = 0
    for k in range(1, max_iter + 1):
        if history[-1] <= tol:
            return SolveReport(x, fx, iterations, True, history)
        iterations = k
        d = -_two_loop(g, s_list, y_list, rho_list)
        descent = float(g @ d)
        if descent >= 0.0:
            d = -g
            descent = -float(g @ g)
        alpha = 1.0
        for _ in range(50):
            x_new = x + alpha * d
            f_new = problem.value(x_new)
            if np.isfinite(f_new) and f_new <= fx + armijo_c * alpha * descent:
                break
            alpha *= 0.5
        else:
            raise SolverStallError(f"line search stalled at iteration {k}")
        g_new = problem.grad(x_new)
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12:
            s_list.append(s)
            y_list.append(yv)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        x, fx, g = x_new, f_new, g_new
        history.append(float(np.abs(g).max()))
    return SolveReport(x, fx, iterations, history[-1] <= tol, history)


class _FallbackCoordState:
    """Coordinate oracle via full gradients; fine for small problems."""

    def __init__(self, problem: SmoothProblem, x: np.ndarray):
        self.problem = problem

    def partial(self, x, j):
        return float(self.problem.grad(x)[j])

    def moved(self, j, delta):
        pass


def rcd_minimize(
    problem: SmoothProblem,
    x0: np.ndarray,
    max_iter: int = 5000,
    tol: float = 1e-6,
    seed: int = 0,
) -> SolveReport:
    """Random coordinate descent: x_j -= partial_j f(x) / L_j.

    One iteration is a sweep of `dim` uniformly random coordinate steps.
    The trajectory is a pure function of (problem, x0, seed). Stops when
    ||grad||_inf <= tol, checked once per sweep.
    """
    if problem.coord_lipschitz is None:
        raise ValueError("rcd_minimize needs per-coordinate lipschitz constants")
    L = np.asarray(problem.coord_lipschitz, dtype=np.float64)
    if np.any(L < 0):
        raise ValueError("coordinate lipschitz constants must be >= 0")
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=np.float64).copy()
    make_state = problem.coord_state or (lambda x_: _FallbackCoordState(problem, x_))
    state = make_state(x)
    g = problem.grad(x)
    history = [float(np.abs(g).max()) if g.size else 0.0]
    iterations = 0
    for sweep in range(1, max_iter + 1):
        if history[-1] <= tol:
            return SolveReport(x, problem.value(x), iterations, True, history)
        iterations = sweep
        for j in rng.integers(0, problem.dim, size=problem.dim):
            j = int(j)
            if L[j] <= 0.0:
                continue
            delta = -state.partial(x, j) / L[j]
            if delta != 0.0:
                x[j] += delta
                state.moved(j, delta)
        history.append(float(np.abs(problem.grad(x)).max()))
    return SolveReport(x, problem.value(x), iterations, history[-1] <= tol, history)
