"""Spin correlations, the static structure factor, dimer states and fidelities.

Correlations are in Pauli units, ``<sigma_i . sigma_j> = <XX + YY + ZZ>``,
so a singlet pair gives -3 and the diagonal entries equal 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument
from .hamiltonian import Spectrum, expectation_exact, pair_heisenberg
from .lattice import LatticeFragment, MomentumGrid
from .mitigation import QuasiDistribution
from .simulator import ShotTable, StateVector, apply_gate, basis_rotation

HERMITIAN_TOL = 1e-9


@dataclass(frozen=True)
class CorrelationTable:
    """All-pairs correlation matrix with per-entry standard errors."""

    values: np.ndarray
    stderr: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        s = np.asarray(self.stderr, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or s.shape != v.shape:
            raise InvalidArgument("correlation values and stderr must be matching square matrices")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stderr", s)

    @property
    def num_sites(self) -> int:
        return self.values.shape[0]

    def pair(self, i: int, j: int) -> tuple[float, float]:
        _check_pair(self.num_sites, i, j)
        return float(self.values[i, j]), float(self.stderr[i, j])

    def edge_rows(self, fragment: LatticeFragment) -> list[tuple[int, int, float, float]]:
        return [(i, j, *self.pair(i, j)) for i, j in fragment.pairs]

    def to_csv(self) -> str:
        n = self.num_sites
        rows = [f"{i},{j},{self.values[i, j]:.10g},{self.stderr[i, j]:.10g}" for i in range(n) for j in range(i + 1, n)]
        return "i,j,value,stderr\n" + "\n".join(rows) + "\n"


def _check_pair(n: int, i: int, j: int) -> None:
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise InvalidArgument(f"invalid pair ({i}, {j}) for {n} sites")


def _spins(num_qubits: int, outcomes: np.ndarray) -> np.ndarray:
    shifts = np.arange(num_qubits - 1, -1, -1)
    return 1.0 - 2.0 * ((np.asarray(outcomes)[:, None] >> shifts[None, :]) & 1)


def _uniform_letter(basis: str) -> str:
    if len(set(basis)) != 1:
        raise InvalidArgument(f"correlations need a uniform basis, got {basis}")
    return basis[0]


def _basis_distributions(state: StateVector) -> dict[str, np.ndarray]:
    out = {}
    n = state.num_qubits
    for letter in "XYZ":
        batch = state.amplitudes.copy()[None, :]
        for g in basis_rotation(letter * n):
            apply_gate(batch, n, g)
        out[letter] = np.abs(batch[0]) ** 2
    return out


def _second_moment(n: int, probs: np.ndarray, outcomes: np.ndarray | None = None) -> np.ndarray:
    outcomes = np.arange(probs.size) if outcomes is None else outcomes
    s = _spins(n, outcomes)
    return s.T @ (probs[:, None] * s)


def correlations_exact(state: StateVector) -> CorrelationTable:
    n = state.num_qubits
    total = sum(_second_moment(n, p) for p in _basis_distributions(state).values())
    return CorrelationTable(total, np.zeros_like(total))


def correlations_from_samples(sources: Sequence[ShotTable | QuasiDistribution]) -> CorrelationTable:
    """All-pairs correlations from one X, one Y and one Z measurement.

    For a shot table each product ``s_i s_j`` is a ±1 sample, so its sample
    variance is ``N (1 - m^2) / (N - 1)``. Quasi-distributions reuse that
    formula with their shot count as an approximation.
    """
    letters = [_uniform_letter(src.basis) for src in sources]
    if sorted(letters) != ["X", "Y", "Z"]:
        raise InvalidArgument(f"need exactly one X, Y and Z measurement, got {letters}")
    n = sources[0].num_qubits
    values = np.zeros((n, n))
    var = np.zeros((n, n))
    for src in sources:
        if isinstance(src, ShotTable):
            m = _second_moment(n, src.frequencies / src.shots, src.outcomes)
            shots = src.shots
        else:
            m = _second_moment(n, src.values)
            shots = src.shots
        values += m
        if shots > 1:
            var += np.clip(1.0 - m**2, 0.0, None) / (shots - 1)
    np.fill_diagonal(var, 0.0)
    return CorrelationTable(values, np.sqrt(var))


def spin_correlation(source, pair: tuple[int, int]) -> tuple[float, float]:
    """``(value, stderr)`` for one pair from a state or X/Y/Z shot tables."""
    i, j = pair
    if isinstance(source, StateVector):
        _check_pair(source.num_qubits, i, j)
        return expectation_exact(source, pair_heisenberg(source.num_qubits, i, j)), 0.0
    return correlations_from_samples(source).pair(i, j)


def ground_correlations(spectrum: Spectrum) -> CorrelationTable:
    """Correlations of the equal-weight mixture over the ground subspace."""
    basis = spectrum.ground_basis
    n = int(round(np.log2(basis.shape[0])))
    mats = [correlations_exact(StateVector(n, basis[:, k])).values for k in range(basis.shape[1])]
    mean = np.mean(mats, axis=0)
    return CorrelationTable(mean, np.zeros_like(mean))


# -- structure factor -------------------------------------------------------


@dataclass(frozen=True)
class StructureFactorMap:
    points: np.ndarray
    values: np.ndarray
    inside_bz: np.ndarray
    num_sites: int

    def same_grid(self, other: "StructureFactorMap") -> bool:
        return self.points.shape == other.points.shape and np.allclose(self.points, other.points, atol=1e-12)

    def to_csv(self) -> str:
        rows = [
            f"{q[0]:.10g},{q[1]:.10g},{s:.10g},{int(b)}" for q, s, b in zip(self.points.tolist(), self.values.tolist(), self.inside_bz)
        ]
        return "qx,qy,S,inside_bz\n" + "\n".join(rows) + "\n"


def structure_factor(corr: CorrelationTable, fragment: LatticeFragment, grid: MomentumGrid) -> StructureFactorMap:
    """``S(q) = (1/N) sum_ij exp(i q.(r_i - r_j)) C_ij`` on every grid point."""
    c = corr.values
    n = fragment.num_sites
    if c.shape != (n, n):
        raise InvalidArgument(f"correlation matrix is {c.shape}, fragment has {n} sites")
    if not np.all(np.isfinite(c)):
        raise InvalidArgument("correlation matrix has missing pairs")
    if np.abs(c - c.T).max() > HERMITIAN_TOL:
        raise InvalidArgument("correlation matrix is not symmetric")
    phase = np.exp(1j * grid.points @ fragment.positions.T)
    s = np.einsum("qi,ij,qj->q", phase, c, phase.conj()) / n
    if np.abs(s.imag).max(initial=0.0) > HERMITIAN_TOL:
        raise InvalidArgument("structure factor has an imaginary part")
    return StructureFactorMap(grid.points, s.real, grid.inside_bz, n)


def similarity(a: StructureFactorMap, b: StructureFactorMap) -> tuple[float, float]:
    """Pearson correlation and mean-square error between two maps."""
    if not a.same_grid(b):
        raise InvalidArgument("maps are defined on different grids")
    pearson = float(np.corrcoef(a.values, b.values)[0, 1])
    mse = float(np.mean((a.values - b.values) ** 2))
    return pearson, mse


# -- states -----------------------------------------------------------------


def dimer_state(fragment: LatticeFragment | int, covering: Sequence[tuple[int, int]], fill: str | None = "plus") -> StateVector:
    """Product of singlets ``(|01> - |10>)/sqrt2`` on ``covering``.

    Sites outside the covering are put in |+> when ``fill="plus"``; with
    ``fill=None`` they are not allowed.
    """
    n = fragment if isinstance(fragment, int) else fragment.num_sites
    used: set[int] = set()
    for i, j in covering:
        _check_pair(n, i, j)
        if i in used or j in used:
            raise InvalidArgument(f"pair ({i}, {j}) overlaps another pair of the covering")
        used |= {i, j}
    free = [k for k in range(n) if k not in used]
    if free and fill is None:
        raise InvalidArgument(f"sites {free} are not covered")
    if fill not in (None, "plus"):
        raise InvalidArgument(f"unknown fill {fill!r}")
    bits = _spins(n, np.arange(2**n)) < 0
    amps = np.full(2**n, 2.0 ** (-len(free) / 2.0))
    for i, j in covering:
        differ = bits[:, i] != bits[:, j]
        sign = np.where(bits[:, i], -1.0, 1.0)
        amps *= np.where(differ, sign / np.sqrt(2.0), 0.0)
    return StateVector(n, amps.astype(complex))


def _vector(x) -> np.ndarray:
    return x.amplitudes if isinstance(x, StateVector) else np.asarray(x, dtype=complex)


def fidelity(state, reference) -> float:
    """``|<ref|psi>|^2`` for a state, or ``||P psi||^2`` for a basis with orthonormal columns."""
    psi = _vector(state).ravel()
    ref = _vector(reference)
    if ref.shape[0] != psi.size:
        raise InvalidArgument(f"dimension mismatch: {psi.size} vs {ref.shape[0]}")
    if ref.ndim == 1:
        return float(min(1.0, abs(np.vdot(ref, psi)) ** 2))
    gram = ref.conj().T @ ref
    if np.abs(gram - np.eye(gram.shape[0])).max() > 1e-8:
        raise InvalidArgument("subspace basis columns are not orthonormal")
    return float(min(1.0, np.linalg.norm(ref.conj().T @ psi) ** 2))
