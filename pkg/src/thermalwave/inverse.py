"""Bounded nonlinear least squares on phase spectra.

A :class:`FitProblem` frees a subset of a stack's parameters (thicknesses,
thermal properties, or both) and compares model phases against one or more
measured spectra. :func:`solve` runs a Levenberg-Marquardt iteration in
log-parameter space from several starts and keeps the best.

Parameter slots are named ``alpha_i`` (i = 1..n), ``e_j`` (j = 0..n+1, with
``e_0`` the ambient and ``e_{n+1}`` the substrate) and ``L_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import DomainError
from .forward import PhaseSpectrum
from .wavecore import CoatingStack, surface_ratio

PARAMETERIZATIONS = ("thicknesses", "properties", "joint")

MAX_ITERATIONS = 200
GRADIENT_TOL = 1e-12
STEP_TOL = 1e-12
FD_STEP = 1e-6


def slot_names(n: int) -> list[str]:
    return (
        [f"alpha_{i}" for i in range(1, n + 1)]
        + [f"e_{j}" for j in range(n + 2)]
        + [f"L_{i}" for i in range(1, n + 1)]
    )


def default_free(n: int, parameterization: str, free_ambient: bool = False) -> tuple[str, ...]:
    if parameterization not in PARAMETERIZATIONS:
        raise DomainError(f"unknown parameterization {parameterization!r}")
    alphas = [f"alpha_{i}" for i in range(1, n + 1)]
    effs = [f"e_{j}" for j in range(0 if free_ambient else 1, n + 2)]
    thick = [f"L_{i}" for i in range(1, n + 1)]
    if parameterization == "thicknesses":
        return tuple(thick)
    if parameterization == "properties":
        return tuple(alphas + effs)
    return tuple(alphas + effs + thick)


def _stack_vector(stack: CoatingStack) -> np.ndarray:
    return np.concatenate([stack.diffusivities, stack.effusivities, stack.thicknesses])


def default_start_count(n_layers: int) -> int:
    return 8 if n_layers <= 2 else 16


def latin_hypercube_starts(lower, upper, count: int, seed: int = 0) -> np.ndarray:
    """Latin-hypercube sample of the box, uniform in log-parameters."""
    lo, hi = np.log(lower), np.log(upper)
    unit = qmc.LatinHypercube(d=lo.size, seed=np.random.default_rng(seed)).random(count)
    return np.exp(lo + unit * (hi - lo))


@dataclass
class FitProblem:
    """Free parameters, bounds and starts for one least-squares fit.

    ``templates`` and ``targets`` pair up: sample ``j``'s model is
    ``templates[j]`` with the free slots overwritten, compared against
    ``targets[j]``. Free slots are shared across samples, which is what a
    joint property fit over several known-thickness samples needs.
    """

    templates: Sequence[CoatingStack]
    targets: Sequence[PhaseSpectrum]
    lower: np.ndarray
    upper: np.ndarray
    parameterization: str = "thicknesses"
    starts: np.ndarray | None = None
    free: Sequence[str] | None = None
    free_ambient: bool = False
    start_count: int | None = None
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.templates, CoatingStack):
            self.templates = (self.templates,)
        if isinstance(self.targets, PhaseSpectrum):
            self.targets = (self.targets,)
        self.templates = tuple(self.templates)
        self.targets = tuple(self.targets)
        if not self.templates or len(self.templates) != len(self.targets):
            raise DomainError("need one target spectrum per template stack")
        n = self.templates[0].n
        if any(t.n != n for t in self.templates):
            raise DomainError("all templates must have the same layer count")
        self.n = n
        if self.free is None:
            self.free = default_free(n, self.parameterization, self.free_ambient)
        names = slot_names(n)
        unknown = [s for s in self.free if s not in names]
        if unknown:
            raise DomainError(f"unknown parameter slots {unknown}")
        self.free = tuple(self.free)
        self.free_index = np.array([names.index(s) for s in self.free], dtype=int)
        d = len(self.free)
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (d,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (d,)).copy()
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise DomainError("bounds must be finite")
        if np.any(self.lower <= 0) or np.any(self.lower >= self.upper):
            raise DomainError("bounds must satisfy 0 < lower < upper")
        if self.starts is None:
            count = self.start_count or default_start_count(n)
            self.starts = latin_hypercube_starts(self.lower, self.upper, count, self.seed)
        self.starts = np.atleast_2d(np.asarray(self.starts, dtype=float))
        if self.starts.shape[0] < 1 or self.starts.shape[1] != d:
            raise DomainError(f"starts must have shape (s, {d})")
        if np.any(self.starts < self.lower) or np.any(self.starts > self.upper):
            raise DomainError("every start must lie within the bounds")
        self._base = np.array([_stack_vector(t) for t in self.templates])
        self._omega = [t.grid.omega for t in self.targets]
        self._measured = np.concatenate([t.phases for t in self.targets])

    @property
    def dim(self) -> int:
        return len(self.free)

    @property
    def size(self) -> int:
        return self._measured.size

    def stacks(self, params) -> list[CoatingStack]:
        """The sample stacks with ``params`` substituted into the free slots."""
        out = []
        n = self.n
        for row in self._full(np.asarray(params, dtype=float)):
            names = [layer.name for layer in self.templates[0].layers]
            out.append(CoatingStack.from_arrays(
                row[:n], row[n + 1:2 * n + 2], row[2 * n + 2:], row[n], names))
        return out

    def _full(self, params):
        full = self._base.copy()
        full[:, self.free_index] = params
        return full

    def model(self, params) -> np.ndarray:
        n = self.n
        parts = []
        for row, w in zip(self._full(params), self._omega):
            ratio = surface_ratio(row[:n], row[n:2 * n + 2], row[2 * n + 2:], w)
            parts.append(np.angle(ratio))
        return np.concatenate(parts)

    def check_bounds(self, params, slack: float = 1e-12):
        p = np.asarray(params, dtype=float)
        if p.shape != (self.dim,):
            raise DomainError(f"expected {self.dim} parameters, got shape {p.shape}")
        tol = slack * np.abs(self.upper)
        if np.any(p < self.lower - slack * self.lower) or np.any(p > self.upper + tol):
            raise DomainError("parameters outside bounds")
        return p


def residuals(problem: FitProblem, params) -> np.ndarray:
    """Model minus measured phase, stacked over all samples."""
    p = problem.check_bounds(params)
    return problem.model(p) - problem._measured


def objective(problem: FitProblem, params) -> float:
    r = residuals(problem, params)
    return float(r @ r)


def _difference_matrix(fun, x, steps, lower, upper, f0=None):
    """Central differences, falling back to one-sided ones next to a bound."""
    cols = []
    one_sided = np.zeros(x.size, dtype=bool)
    for i in range(x.size):
        h = steps[i]
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        if up[i] > upper[i] or down[i] < lower[i]:
            one_sided[i] = True
            if f0 is None:
                f0 = fun(x)
            if up[i] <= upper[i]:
                cols.append((fun(up) - f0) / h)
            else:
                cols.append((f0 - fun(down)) / h)
        else:
            cols.append((fun(up) - fun(down)) / (2.0 * h))
    return np.column_stack(cols), one_sided


def jacobian(problem: FitProblem, params, rel_step: float = FD_STEP, full_output: bool = False):
    """Finite-difference derivative of :func:`residuals` in parameter units.

    The step for parameter i is ``rel_step * max(|p_i|, lower_i)``. With
    ``full_output`` also return a boolean mask of columns that had to use a
    one-sided difference because a bound was in the way.
    """
    p = problem.check_bounds(params)
    steps = rel_step * np.maximum(np.abs(p), problem.lower)
    J, one_sided = _difference_matrix(problem.model, p, steps, problem.lower, problem.upper)
    return (J, one_sided) if full_output else J


@dataclass
class StartTrace:
    start: np.ndarray
    params: np.ndarray
    objective: float
    converged: bool
    iterations: int
    reason: str
    history: list[float] = field(default_factory=list)


@dataclass
class FitResult:
    names: tuple[str, ...]
    params: np.ndarray
    objective: float
    converged: bool
    iterations: int
    condition_number: float
    traces: list[StartTrace]
    co_optimal: list[int]
    best_start: int

    @property
    def named(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.params)))

    def to_dict(self) -> dict:
        return {
            "parameters": self.named,
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
            "condition_number": self.condition_number,
            "best_start": self.best_start,
            "co_optimal": self.co_optimal,
            "starts": [
                {
                    "start": t.start.tolist(),
                    "params": t.params.tolist(),
                    "objective": t.objective,
                    "converged": t.converged,
                    "iterations": t.iterations,
                    "reason": t.reason,
                }
                for t in self.traces
            ],
        }


def levenberg_marquardt(fun: Callable[[np.ndarray], np.ndarray], x0, lower, upper,
                        max_iter: int = MAX_ITERATIONS, gtol: float = GRADIENT_TOL,
                        xtol: float = STEP_TOL, fd_step: float = FD_STEP) -> StartTrace:
    """Projected Levenberg-Marquardt on ``fun`` within the box ``[lower, upper]``.

    Damping follows Marquardt's diagonal scaling with Nielsen's update rule.
    Steps are accepted only when they lower the objective. Stops when
    ``|J^T r|_inf < gtol * max(1, f)``, when the projected step is below
    ``xtol`` relative to ``x``, or after ``max_iter`` Jacobians.
    """
    x0 = np.asarray(x0, dtype=float)
    x = np.clip(x0, lower, upper)
    r = fun(x)
    f = float(r @ r)
    history = [f]
    lam, nu = 1e-3, 2.0
    steps = np.full(x.size, fd_step)
    reason = "max_iter"
    it = 0
    while it < max_iter:
        J, _ = _difference_matrix(fun, x, steps, lower, upper, r)
        g = J.T @ r
        if np.max(np.abs(g)) < gtol * max(1.0, f):
            reason = "gtol"
            break
        diag = np.sum(J * J, axis=0)
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))
        it += 1
        accepted = False
        while not accepted:
            aug = np.vstack([J, np.diag(np.sqrt(lam * diag))])
            rhs = np.concatenate([-r, np.zeros(x.size)])
            delta = np.linalg.lstsq(aug, rhs, rcond=None)[0]
            x_new = np.clip(x + delta, lower, upper)
            step = x_new - x
            if np.max(np.abs(step)) <= xtol * max(1.0, np.max(np.abs(x))):
                reason = "xtol"
                break
            r_new = fun(x_new)
            f_new = float(r_new @ r_new)
            if f_new < f:
                lin = r + J @ step
                pred = f - float(lin @ lin)
                rho = (f - f_new) / pred if pred > 0 else 1.0
                lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                nu = 2.0
                x, r, f = x_new, r_new, f_new
                history.append(f)
                accepted = True
            else:
                lam *= nu
                nu *= 2.0
        if not accepted:
            break
    return StartTrace(x0, x, f, reason != "max_iter", it, reason, history)


def _condition(J):
    if not np.all(np.isfinite(J)) or not np.any(J):
        return math.inf
    s = np.linalg.svd(J, compute_uv=False)
    return math.inf if s[-1] == 0 else float(s[0] / s[-1])


def solve(problem: FitProblem, max_iter: int = MAX_ITERATIONS) -> FitResult:
    """Multi-start bounded least squares; returns the best converged start.

    Optimizes ``log(params)``. Among starts whose objectives tie with the
    best, the one closest (in log space) to the centroid of the starts wins.
    If no start converges the lowest objective is returned with
    ``converged=False``.
    """
    lo, hi = np.log(problem.lower), np.log(problem.upper)
    measured = problem._measured

    def fun(u):
        return problem.model(np.exp(u)) - measured

    traces = []
    for start in problem.starts:
        t = levenberg_marquardt(fun, np.log(start), lo, hi, max_iter=max_iter)
        traces.append(StartTrace(start.copy(), np.exp(t.params), t.objective,
                                 t.converged, t.iterations, t.reason, t.history))
    # keep log-space coordinates for tie-breaking
    logs = [np.log(t.params) for t in traces]
    pool = [i for i, t in enumerate(traces) if t.converged] or list(range(len(traces)))
    best_f = min(traces[i].objective for i in pool)
    tol = max(1e-24, 1e-9 * best_f)
    co = [i for i in pool if traces[i].objective <= best_f + tol]
    centroid = np.log(problem.starts).mean(axis=0)
    best = min(co, key=lambda i: (float(np.linalg.norm(logs[i] - centroid)), i))
    chosen = traces[best]
    J, _ = _difference_matrix(fun, logs[best], np.full(problem.dim, FD_STEP), lo, hi)
    return FitResult(
        names=problem.free,
        params=np.clip(chosen.params, problem.lower, problem.upper),
        objective=chosen.objective,
        converged=chosen.converged,
        iterations=chosen.iterations,
        condition_number=_condition(J),
        traces=traces,
        co_optimal=co,
        best_start=best,
    )
