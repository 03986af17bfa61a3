"""Armijo-backtracking natural gradient descent (AQNGD) and an SPSA baseline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument
from .simulator import rng_stream

CONVERGED, MAX_ITERS, DIVERGED, STOPPED = "converged", "max_iters", "diverged", "stopped"


@dataclass(frozen=True)
class AqngdConfig:
    alpha: float = 0.01
    beta: float = 0.5
    k_max: int = 6
    pinv_tol: float = 1e-15
    converge_tol: float = 1e-4
    max_iters: int = 100

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.beta > 0:
            raise InvalidArgument(f"beta must be positive, got {self.beta}")
        if int(self.k_max) != self.k_max or self.k_max < 0:
            raise InvalidArgument(f"k_max must be a non-negative integer, got {self.k_max}")
        if not (self.pinv_tol > 0 and self.converge_tol > 0):
            raise InvalidArgument("tolerances must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidArgument(f"max_iters must be a positive integer, got {self.max_iters}")

    def stepsize(self, k: int) -> float:
        return self.beta / 2**k


@dataclass(frozen=True)
class SpsaGains:
    a: float = 0.2
    c: float = 0.1
    A: float = 10.0
    alpha: float = 0.602
    gamma: float = 0.101

    def __post_init__(self):
        if self.a < 0 or not self.c > 0 or self.A < 0:
            raise InvalidArgument("SPSA gains need a >= 0, c > 0, A >= 0")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    energy: float
    stepsize: float
    k: int
    params: tuple[float, ...]
    grad_norm: float
    evaluations: int
    armijo: bool = True


@dataclass
class OptTrace:
    method: str
    initial_params: tuple[float, ...]
    initial_energy: float
    records: list[IterationRecord] = field(default_factory=list)
    status: str = "running"
    setup_evaluations: int = 0
    final_energy: float | None = None

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def final_params(self) -> np.ndarray:
        return np.array(self.records[-1].params if self.records else self.initial_params)

    @property
    def best_energy(self) -> float:
        if self.final_energy is not None:
            return self.final_energy
        return self.records[-1].energy if self.records else self.initial_energy

    @property
    def evaluations(self) -> int:
        return self.setup_evaluations + sum(r.evaluations for r in self.records)

    @property
    def ok(self) -> bool:
        return self.status != DIVERGED

    def to_csv(self) -> str:
        lines = ["iteration,energy,k,stepsize"]
        lines += [f"{r.iteration},{r.energy:.10g},{r.k},{r.stepsize:.10g}" for r in self.records]
        return "\n".join(lines) + "\n"


class _Counted:
    """Wrap a cost function and count its calls."""

    def __init__(self, fn: Callable):
        self.fn = fn
        self.calls = 0

    def __call__(self, params) -> float:
        self.calls += 1
        return float(self.fn(np.asarray(params, dtype=float)))


def pseudo_invert(matrix, tol: float = 1e-15) -> np.ndarray:
    """Moore–Penrose inverse of a symmetric matrix by eigendecomposition.

    Eigenvalues with magnitude at most ``tol * max|eigenvalue|`` are dropped.
    """
    m = np.asarray(getattr(matrix, "entries", matrix), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgument("pseudo_invert needs a square matrix")
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    top = np.abs(w).max(initial=0.0)
    keep = np.abs(w) > tol * top if top > 0 else np.zeros_like(w, dtype=bool)
    inv_w = np.zeros_like(w)
    inv_w[keep] = 1.0 / w[keep]
    return (v * inv_w) @ v.T


class ArmijoResult(NamedTuple):
    k: int
    params: np.ndarray
    energy: float
    satisfied: bool
    evaluations: int


def armijo_backtrack(
    cost: Callable,
    params: Sequence[float],
    grad: Sequence[float],
    cfg: AqngdConfig,
    direction: Sequence[float] | None = None,
    f0: float | None = None,
) -> ArmijoResult:
    """Smallest ``k <= k_max`` with ``f0 - f(trial) >= alpha * beta/2^k * |grad|^2``.

    The trial point is ``params - beta/2^k * direction`` (``direction``
    defaults to ``grad``). When no ``k`` passes, the ``k_max`` trial is
    returned with ``satisfied=False``.
    """
    params = np.asarray(params, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        raise InvalidArgument("gradient is not finite")
    direction = grad if direction is None else np.asarray(direction, dtype=float)
    evals = 0
    if f0 is None:
        f0 = float(cost(params))
        evals += 1
    g2 = float(grad @ grad)
    for k in range(int(cfg.k_max) + 1):
        step = cfg.stepsize(k)
        trial = params - step * direction
        f_trial = float(cost(trial))
        evals += 1
        if f0 - f_trial >= cfg.alpha * step * g2:
            return ArmijoResult(k, trial, f_trial, True, evals)
    return ArmijoResult(int(cfg.k_max), trial, f_trial, False, evals)


def _shift_gradient(cost: Callable, params: np.ndarray) -> np.ndarray:
    grad = np.empty(params.size)
    for j in range(params.size):
        e = np.zeros(params.size)
        e[j] = np.pi / 2.0
        grad[j] = 0.5 * (cost(params + e) - cost(params - e))
    return grad


def aqngd_run(
    energy_fn: Callable,
    grad_fn: Callable | None,
    metric_fn: Callable | None,
    theta0: Sequence[float],
    cfg: AqngdConfig = AqngdConfig(),
    callback: Callable[[IterationRecord], bool] | None = None,
) -> OptTrace:
    """Natural gradient descent with an Armijo-chosen step ``beta / 2^k``.

    ``grad_fn=None`` applies the parameter-shift rule to ``energy_fn`` so
    every circuit evaluation is counted. ``metric_fn=None`` uses the constant
    ``0.25 * I`` metric of Euclidean ansätze, costing no evaluations. A
    ``callback`` returning True stops the run after that iteration.
    """
    cost = _Counted(energy_fn)
    theta = np.asarray(theta0, dtype=float).copy()
    d = theta.size
    gradient = (lambda p: _shift_gradient(cost, p)) if grad_fn is None else grad_fn
    f_prev = cost(theta)
    trace = OptTrace("aqngd", tuple(theta), f_prev, setup_evaluations=cost.calls)
    if not np.isfinite(f_prev):
        trace.status = DIVERGED
        return trace
    for it in range(1, int(cfg.max_iters) + 1):
        before = cost.calls
        grad = np.asarray(gradient(theta), dtype=float)
        if not np.all(np.isfinite(grad)):
            trace.status = DIVERGED
            break
        metric = 0.25 * np.eye(d) if metric_fn is None else metric_fn(theta)
        nat = pseudo_invert(metric, cfg.pinv_tol) @ grad
        res = armijo_backtrack(cost, theta, grad, cfg, direction=nat, f0=f_prev)
        theta = res.params
        rec = IterationRecord(
            it, res.energy, cfg.stepsize(res.k), res.k, tuple(theta), float(np.linalg.norm(grad)),
            cost.calls - before, res.satisfied,
        )
        trace.records.append(rec)
        if not np.isfinite(res.energy):
            trace.status = DIVERGED
            break
        if callback is not None and callback(rec):
            trace.status = STOPPED
            break
        # Only an Armijo-accepted step can signal convergence; the forced k_max
        # step may raise a noisy estimate without the optimum being reached.
        if res.satisfied and f_prev - res.energy < cfg.converge_tol:
            trace.status = CONVERGED
            break
        f_prev = res.energy
    else:
        trace.status = MAX_ITERS
    if trace.records:
        trace.final_energy = trace.records[-1].energy
    return trace


def spsa_run(
    energy_fn: Callable,
    theta0: Sequence[float],
    iters: int,
    gains: SpsaGains = SpsaGains(),
    seed: int = 0,
    callback: Callable[[IterationRecord], bool] | None = None,
    final_evaluation: bool = True,
) -> OptTrace:
    """Spall's simultaneous perturbation method with Rademacher directions.

    Each record holds the mean of the two perturbed energies; the final
    parameters are evaluated once more when ``final_evaluation`` is set.
    """
    if int(iters) < 1:
        raise InvalidArgument("iters must be >= 1")
    cost = _Counted(energy_fn)
    theta = np.asarray(theta0, dtype=float).copy()
    rng = rng_stream(seed, "spsa")
    trace = OptTrace("spsa", tuple(theta), float("nan"))
    trace.status = MAX_ITERS
    for k in range(int(iters)):
        a_k = gains.a / (k + 1 + gains.A) ** gains.alpha
        c_k = gains.c / (k + 1) ** gains.gamma
        delta = rng.choice(np.array([-1.0, 1.0]), size=theta.size)
        f_plus = cost(theta + c_k * delta)
        f_minus = cost(theta - c_k * delta)
        ghat = (f_plus - f_minus) / (2.0 * c_k) * delta
        theta = theta - a_k * ghat
        energy = 0.5 * (f_plus + f_minus)
        rec = IterationRecord(k + 1, energy, a_k, 0, tuple(theta), float(np.linalg.norm(ghat)), 2)
        trace.records.append(rec)
        if not np.isfinite(energy):
            trace.status = DIVERGED
            break
        if callback is not None and callback(rec):
            trace.status = STOPPED
            break
    if final_evaluation and trace.status != DIVERGED:
        before = cost.calls
        trace.final_energy = cost(theta)
        trace.setup_evaluations += cost.calls - before
    return trace
