"""Readout-error mitigation (REM) and zero-noise extrapolation (ZNE).

REM inverts a response matrix that factorises over disjoint qubit
partitions. ZNE evaluates a pipeline on globally folded circuits and
extrapolates to fold 0 by least squares or by Bayesian polynomial
regression with per-point noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .circuit import Circuit, Gate, fold_global
from .errors import InvalidArgument
from .hamiltonian import EnergyEstimate, PauliSum, QwcGroups, group_values
from .simulator import NoiseModel, ShotTable, derive_seed

STOCHASTIC_TOL = 1e-9
DEFAULT_TOP_K = 2**14
SINGULAR_RCOND = 1e-12
STDERR_FLOOR = 1e-9


@dataclass(frozen=True)
class ResponseMatrix:
    """``R = (x) factors``; ``factors[p][f, i] = P(read f | prepared i)`` on partition p."""

    partitions: tuple[tuple[int, ...], ...]
    factors: tuple[np.ndarray, ...]
    calibration_shots: int = 0
    preparations: int = 0

    def __post_init__(self):
        parts = tuple(tuple(int(q) for q in p) for p in self.partitions)
        facs = tuple(np.asarray(f, dtype=float) for f in self.factors)
        _check_partitions(parts)
        if len(facs) != len(parts):
            raise InvalidArgument("need one factor per partition")
        for p, f in zip(parts, facs):
            dim = 2 ** len(p)
            if f.shape != (dim, dim):
                raise InvalidArgument(f"factor for {p} must be {dim}x{dim}, got {f.shape}")
            if np.abs(f.sum(axis=0) - 1.0).max() > STOCHASTIC_TOL:
                raise InvalidArgument(f"factor for {p} is not column-stochastic")
        object.__setattr__(self, "partitions", parts)
        object.__setattr__(self, "factors", facs)

    @property
    def num_qubits(self) -> int:
        return sum(len(p) for p in self.partitions)

    @classmethod
    def identity(cls, num_qubits: int) -> "ResponseMatrix":
        return cls(tuple((q,) for q in range(num_qubits)), tuple(np.eye(2) for _ in range(num_qubits)))

    @classmethod
    def from_noise(cls, noise: NoiseModel, num_qubits: int) -> "ResponseMatrix":
        """Exact singleton-partition response of a noise model's readout."""
        if noise.readout is None:
            return cls.identity(num_qubits)
        return cls(tuple((q,) for q in range(num_qubits)), tuple(np.array(m) for m in noise.readout))

    def full(self) -> np.ndarray:
        """Dense ``2^n x 2^n`` matrix; qubit 0 is the most significant index bit."""
        n = self.num_qubits
        dense = np.ones((1, 1))
        order = []
        for p, f in zip(self.partitions, self.factors):
            dense = np.kron(dense, f)
            order += list(p)
        # ``dense`` is indexed by qubits in partition order; permute to 0..n-1.
        perm = np.argsort(order)
        t = dense.reshape((2,) * (2 * n))
        t = t.transpose(list(perm) + [n + k for k in perm])
        return t.reshape(2**n, 2**n)


def _check_partitions(partitions: Sequence[Sequence[int]]) -> None:
    if not partitions:
        raise InvalidArgument("at least one partition is required")
    flat = []
    for p in partitions:
        if len(p) == 0:
            raise InvalidArgument("empty partition")
        flat += list(p)
    if sorted(flat) != list(range(len(flat))):
        raise InvalidArgument(f"partitions {partitions} must be disjoint and cover qubits 0..n-1")


def calibrate(executor: Callable, partitions: Sequence[Sequence[int]], shots: int, seed: int) -> ResponseMatrix:
    """Measure each partition's basis states (prepared with X gates) in Z.

    ``executor(circuit, basis, shots, seed) -> ShotTable``. Qubits outside
    the partition stay in |0>. The cost is ``sum_p 2^|p|`` preparations.
    """
    partitions = tuple(tuple(int(q) for q in p) for p in partitions)
    _check_partitions(partitions)
    if int(shots) < 100:
        raise InvalidArgument("calibration needs at least 100 shots per basis state")
    n = sum(len(p) for p in partitions)
    factors = []
    preps = 0
    for p_idx, part in enumerate(partitions):
        m = len(part)
        factor = np.zeros((2**m, 2**m))
        for state in range(2**m):
            gates = [Gate("X", (q,)) for k, q in enumerate(part) if (state >> (m - 1 - k)) & 1]
            table = executor(Circuit(n, tuple(gates)), "Z" * n, int(shots), derive_seed(seed, "calibrate", p_idx, state))
            factor[:, state] = table.marginal(part) / table.shots
            preps += 1
        factors.append(factor)
    return ResponseMatrix(partitions, tuple(factors), int(shots), preps)


@dataclass(frozen=True)
class QuasiDistribution:
    """Signed distribution over bitstrings (dense vector, qubit 0 most significant)."""

    basis: str
    values: np.ndarray
    shots: int = 0
    singular: bool = False
    truncated: bool = False

    @property
    def num_qubits(self) -> int:
        return len(self.basis)

    @property
    def total(self) -> float:
        return float(self.values.sum())

    @property
    def negative_mass(self) -> float:
        return float(-self.values[self.values < 0].sum())

    @property
    def entries(self) -> dict[str, float]:
        n = self.num_qubits
        return {format(int(k), f"0{n}b"): float(self.values[k]) for k in np.flatnonzero(self.values)}

    @classmethod
    def from_entries(cls, basis: str, entries: dict[str, float], shots: int = 0) -> "QuasiDistribution":
        values = np.zeros(2 ** len(basis))
        for bits, v in entries.items():
            values[int(bits, 2)] = v
        return cls(basis, values, shots)


def _apply_factorwise(vec: np.ndarray, R: ResponseMatrix, mats: Sequence[np.ndarray]) -> np.ndarray:
    n = R.num_qubits
    t = vec.reshape((2,) * n)
    for part, mat in zip(R.partitions, mats):
        m = len(part)
        t = np.moveaxis(t, part, range(m))
        shape = t.shape
        t = (mat @ t.reshape(2**m, -1)).reshape(shape)
        t = np.moveaxis(t, range(m), part)
    return t.reshape(-1)


def _pinv_factors(R: ResponseMatrix) -> tuple[list[np.ndarray], bool]:
    invs, singular = [], False
    for f in R.factors:
        s = np.linalg.svd(f, compute_uv=False)
        if s.min() <= SINGULAR_RCOND * s.max():
            singular = True
        invs.append(np.linalg.pinv(f, rcond=SINGULAR_RCOND))
    return invs, singular


def apply_rem(table: ShotTable, R: ResponseMatrix, top_k: int = DEFAULT_TOP_K) -> QuasiDistribution:
    """``t = R^+ n`` factor by factor, then keep the ``top_k`` largest |entries|.

    Singular factors are pseudo-inverted and the result is flagged.
    """
    if table.num_qubits != R.num_qubits:
        raise InvalidArgument(f"table has {table.num_qubits} qubits, response matrix {R.num_qubits}")
    invs, singular = _pinv_factors(R)
    quasi = _apply_factorwise(table.distribution(), R, invs)
    truncated = False
    nz = np.flatnonzero(quasi)
    if nz.size > top_k:
        keep = nz[np.argsort(-np.abs(quasi[nz]), kind="stable")[:top_k]]
        trimmed = np.zeros_like(quasi)
        trimmed[keep] = quasi[keep]
        quasi = trimmed / trimmed.sum()
        truncated = True
    return QuasiDistribution(table.basis, quasi, table.shots, singular, truncated)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{t >= 0, sum t = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / ind > 0)[-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def project_positive(q: QuasiDistribution) -> QuasiDistribution:
    """Closest probability vector to ``q``; bitstrings outside the support stay at 0."""
    if abs(q.total - 1.0) > 1e-9:
        raise InvalidArgument(f"quasi-distribution sums to {q.total}, expected 1")
    support = np.flatnonzero(q.values)
    values = np.zeros_like(q.values)
    values[support] = project_simplex(q.values[support])
    return QuasiDistribution(q.basis, values, q.shots, q.singular, q.truncated)


def rem_energy(
    tables: Sequence[ShotTable],
    R: ResponseMatrix,
    pauli_sum: PauliSum,
    groups: QwcGroups,
    positive: bool = False,
    top_k: int = DEFAULT_TOP_K,
) -> tuple[EnergyEstimate, list[QuasiDistribution]]:
    """Energy from readout-mitigated distributions of each group.

    Untruncated REM is linear in the counts: the estimate equals the shot
    average of ``w = (R^+)^T v``, where ``v`` holds the group values of each
    bitstring. The standard error is computed from those per-shot values and
    is reused unchanged after truncation or positivity projection.
    """
    invs, _ = _pinv_factors(R)
    invs_t = [m.T for m in invs]
    means, variances, shots, quasis = [], [], [], []
    all_outcomes = np.arange(2**pauli_sum.num_qubits)
    for table, group in zip(tables, groups):
        if table.basis != group.basis:
            raise InvalidArgument(f"table basis {table.basis} does not match group basis {group.basis}")
        if table.shots < 2:
            raise InvalidArgument("each group needs at least 2 shots for a variance")
        v = group_values(pauli_sum, group, all_outcomes)
        q = apply_rem(table, R, top_k)
        if positive:
            q = project_positive(q)
        quasis.append(q)
        w = _apply_factorwise(v, R, invs_t)[table.outcomes]
        f = table.frequencies
        n_shots = table.shots
        mu = np.dot(f, w) / n_shots
        means.append(float(q.values @ v))
        variances.append(float(np.dot(f, (w - mu) ** 2) / (n_shots - 1)))
        shots.append(n_shots)
    se = float(np.sqrt(sum(v / s for v, s in zip(variances, shots))))
    est = EnergyEstimate(float(sum(means)), float(sum(variances)), se, tuple(shots), tuple(means), tuple(variances))
    return est, quasis


# -- zero-noise extrapolation -----------------------------------------------


@dataclass(frozen=True)
class ZnePoint:
    fold: int
    energy: float
    stderr: float


@dataclass(frozen=True)
class ZneSeries:
    points: tuple[ZnePoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        folds = [p.fold for p in pts]
        if any(f < 1 or f % 2 == 0 for f in folds):
            raise InvalidArgument(f"folds must be odd positive integers, got {folds}")
        if any(b <= a for a, b in zip(folds, folds[1:])):
            raise InvalidArgument(f"folds must be strictly increasing, got {folds}")
        if any(not p.stderr >= 0 for p in pts):
            raise InvalidArgument("stderr must be non-negative")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def folds(self) -> np.ndarray:
        return np.array([p.fold for p in self.points], dtype=float)

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([p.stderr for p in self.points])

    def to_csv(self) -> str:
        return "folds,energy,stderr\n" + "".join(f"{p.fold},{p.energy:.10g},{p.stderr:.10g}\n" for p in self.points)

    @classmethod
    def from_arrays(cls, folds, energies, stderrs) -> "ZneSeries":
        return cls(tuple(ZnePoint(int(f), float(e), float(s)) for f, e, s in zip(folds, energies, stderrs)))


def zne_run(circuit: Circuit, energy_pipeline: Callable, folds: Sequence[int] = (1, 3, 5)) -> ZneSeries:
    """Evaluate ``energy_pipeline(folded_circuit, fold)`` at each fold."""
    points = []
    for fold in folds:
        est = energy_pipeline(fold_global(circuit, int(fold)), int(fold))
        points.append(ZnePoint(int(fold), float(est.value), float(est.stderr)))
    return ZneSeries(tuple(points))


def _check_degree(series: ZneSeries, degree: int) -> None:
    if degree < 0 or degree >= len(series):
        raise InvalidArgument(f"degree {degree} needs at least {degree + 1} points, have {len(series)}")


def polyfit_extrapolate(series: ZneSeries, degree: int) -> float:
    """Unweighted least-squares polynomial in the fold, evaluated at 0."""
    _check_degree(series, degree)
    coef = np.polynomial.polynomial.polyfit(series.folds, series.energies, degree)
    return float(coef[0])


@dataclass(frozen=True)
class BprResult:
    mean: float
    std: float
    floored: bool = False


def bpr_extrapolate(series: ZneSeries, degree: int, prior_std: float = 10.0) -> BprResult:
    """Bayesian polynomial regression with noise variance ``stderr_i^2`` per point.

    Coefficients carry an isotropic zero-mean Gaussian prior of std
    ``prior_std``. The posterior of the intercept (the fold-0 value) is
    computed in the dual form, which stays well conditioned as the noise
    variances go to zero.
    """
    _check_degree(series, degree)
    if not prior_std > 0:
        raise InvalidArgument("prior_std must be positive")
    s = series.stderrs
    floored = bool(np.any(s < STDERR_FLOOR))
    s = np.maximum(s, STDERR_FLOOR)
    phi = np.vander(series.folds, degree + 1, increasing=True)
    prior_var = prior_std**2
    gram = prior_var * phi @ phi.T + np.diag(s**2)
    e0 = np.zeros(degree + 1)
    e0[0] = 1.0
    k0 = prior_var * phi @ e0
    mean = float(k0 @ np.linalg.solve(gram, series.energies))
    var = float(prior_var - k0 @ np.linalg.solve(gram, k0))
    return BprResult(mean, float(np.sqrt(max(var, 0.0))), floored)


def flag_undershoot(value: float, ground_energy: float, stderr: float = 0.0, sigmas: float = 0.0) -> bool:
    """True when ``value`` lies below the exact ground energy by more than ``sigmas * stderr``."""
    return bool(value < ground_energy - sigmas * stderr)


def extrapolations_csv(rows: Sequence[tuple[str, float, float]]) -> str:
    return "method,E0,E0_std\n" + "".join(f"{m},{e:.10g},{s:.10g}\n" for m, e, s in rows)
