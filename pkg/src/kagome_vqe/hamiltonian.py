"""Heisenberg Pauli sums, qubit-wise-commuting grouping, energy estimators and ED.

Energies are in units of |J| with Pauli operators (not spin-1/2 operators),
so a singlet bond contributes ``<XX + YY + ZZ> = -3``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, InvalidState, SizeLimit
from .lattice import LatticeFragment
from .simulator import ShotTable, StateVector

ED_MAX_SITES = 14
DEGENERACY_TOL = 1e-9
IMAG_TOL = 1e-10


@dataclass(frozen=True)
class PauliString:
    letters: str
    coefficient: float = 1.0

    def __post_init__(self):
        letters = self.letters.upper()
        if not letters or set(letters) - set("IXYZ"):
            raise InvalidArgument(f"bad Pauli letters {self.letters!r}")
        if not np.isfinite(self.coefficient):
            raise InvalidArgument("coefficient must be finite")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(k for k, c in enumerate(self.letters) if c != "I")

    def masks(self) -> tuple[int, int, int]:
        """``(xmask, zmask, n_y)`` with qubit k mapped to bit ``n-1-k``."""
        n = self.num_qubits
        x = z = 0
        for k, c in enumerate(self.letters):
            bit = 1 << (n - 1 - k)
            if c in "XY":
                x |= bit
            if c in "ZY":
                z |= bit
        return x, z, self.letters.count("Y")


@dataclass(frozen=True)
class PauliSum:
    num_qubits: int
    terms: tuple[PauliString, ...]

    def __post_init__(self):
        merged: dict[str, float] = {}
        for t in self.terms:
            if t.num_qubits != self.num_qubits:
                raise InvalidArgument(f"term {t.letters} does not act on {self.num_qubits} qubits")
            merged[t.letters] = merged.get(t.letters, 0.0) + t.coefficient
        object.__setattr__(self, "terms", tuple(PauliString(k, v) for k, v in merged.items()))

    def __len__(self) -> int:
        return len(self.terms)

    def to_text(self) -> str:
        return "".join(f"{t.letters} {t.coefficient!r}\n" for t in self.terms)


def heisenberg_from_lattice(fragment: LatticeFragment) -> PauliSum:
    n = fragment.num_sites
    terms = []
    for e in fragment.edges:
        for letter in "XYZ":
            chars = ["I"] * n
            chars[e.i] = chars[e.j] = letter
            terms.append(PauliString("".join(chars), e.coupling))
    return PauliSum(n, tuple(terms))


def pair_heisenberg(num_qubits: int, i: int, j: int) -> PauliSum:
    """``X_i X_j + Y_i Y_j + Z_i Z_j`` on ``num_qubits`` qubits."""
    if not (0 <= i < num_qubits and 0 <= j < num_qubits) or i == j:
        raise InvalidArgument(f"invalid pair ({i}, {j}) for {num_qubits} qubits")
    terms = []
    for letter in "XYZ":
        chars = ["I"] * num_qubits
        chars[i] = chars[j] = letter
        terms.append(PauliString("".join(chars)))
    return PauliSum(num_qubits, tuple(terms))


# -- grouping ---------------------------------------------------------------


@dataclass(frozen=True)
class QwcGroup:
    basis: str
    members: tuple[int, ...]


@dataclass(frozen=True)
class QwcGroups:
    groups: tuple[QwcGroup, ...]

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    @property
    def bases(self) -> list[str]:
        return [g.basis for g in self.groups]


def _compatible(shared: list[str], letters: str) -> bool:
    return all(a == "I" or b == "I" or a == b for a, b in zip(shared, letters))


def qwc_group(pauli_sum: PauliSum) -> QwcGroups:
    """Greedy first-fit grouping in term order.

    Qubits untouched by every member of a group are measured in Z.
    """
    shared: list[list[str]] = []
    members: list[list[int]] = []
    for idx, t in enumerate(pauli_sum.terms):
        for g, basis in enumerate(shared):
            if _compatible(basis, t.letters):
                for k, c in enumerate(t.letters):
                    if c != "I":
                        basis[k] = c
                members[g].append(idx)
                break
        else:
            shared.append(list(t.letters))
            members.append([idx])
    groups = tuple(
        QwcGroup("".join(c if c != "I" else "Z" for c in basis), tuple(m)) for basis, m in zip(shared, members)
    )
    return QwcGroups(groups)


# -- shot estimators --------------------------------------------------------


def parity_signs(outcomes: np.ndarray, mask: int) -> np.ndarray:
    """``(-1)^(popcount(outcome & mask))`` for an array of outcome indices."""
    return 1.0 - 2.0 * (np.bitwise_count(np.asarray(outcomes, dtype=np.int64) & mask) & 1)


def term_mask(term: PauliString) -> int:
    n = term.num_qubits
    return sum(1 << (n - 1 - k) for k in term.support)


def group_values(pauli_sum: PauliSum, group: QwcGroup, outcomes: np.ndarray) -> np.ndarray:
    """Value of the group's partial Hamiltonian on each measured outcome."""
    vals = np.zeros(len(outcomes))
    for idx in group.members:
        t = pauli_sum.terms[idx]
        vals += t.coefficient * parity_signs(outcomes, term_mask(t))
    return vals


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    variance: float
    stderr: float
    shots_per_group: tuple[int, ...]
    group_means: tuple[float, ...] = ()
    group_variances: tuple[float, ...] = ()

    def __float__(self) -> float:
        return float(self.value)


def _check_table(table: ShotTable, group: QwcGroup, n: int) -> None:
    if table.num_qubits != n:
        raise InvalidArgument(f"table has {table.num_qubits} qubits, Hamiltonian has {n}")
    if table.basis != group.basis:
        raise InvalidArgument(f"table basis {table.basis} does not match group basis {group.basis}")
    if table.shots < 2:
        raise InvalidArgument("each group needs at least 2 shots for a variance")


def estimate_energy(tables: Sequence[ShotTable], pauli_sum: PauliSum, groups: QwcGroups) -> EnergyEstimate:
    """Sample mean, unbiased variance and standard error of the energy.

    Groups are measured on independent shot sets, so the variances add and
    the standard error is ``sqrt(sum_g Var_g / N_g)``; with equal budgets
    this is ``sqrt(Var(H) / N)``.
    """
    if len(tables) != len(groups):
        raise InvalidArgument(f"expected {len(groups)} tables, got {len(tables)}")
    means, variances, shots = [], [], []
    for table, group in zip(tables, groups):
        _check_table(table, group, pauli_sum.num_qubits)
        vals = group_values(pauli_sum, group, table.outcomes)
        w = table.frequencies
        n_shots = table.shots
        mean = float(np.dot(w, vals) / n_shots)
        var = float(np.dot(w, (vals - mean) ** 2) / (n_shots - 1))
        means.append(mean)
        variances.append(var)
        shots.append(n_shots)
    se = float(np.sqrt(sum(v / s for v, s in zip(variances, shots))))
    return EnergyEstimate(
        float(sum(means)), float(sum(variances)), se, tuple(shots), tuple(means), tuple(variances)
    )


# -- exact oracles ----------------------------------------------------------


@lru_cache(maxsize=32)
def sparse_matrix(pauli_sum: PauliSum) -> sp.csr_matrix:
    n = pauli_sum.num_qubits
    dim = 2**n
    cols = np.arange(dim, dtype=np.int64)
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for t in pauli_sum.terms:
        x, z, ny = t.masks()
        data = t.coefficient * (1j**ny) * parity_signs(cols, z)
        total = total + sp.csr_matrix((data, (cols ^ x, cols)), shape=(dim, dim))
    return total.tocsr()


def _amplitudes(state, dim: int) -> np.ndarray:
    amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex).ravel()
    if amps.size != dim:
        raise InvalidArgument(f"state has dimension {amps.size}, operator needs {dim}")
    return amps


def expectation_exact(state, pauli_sum: PauliSum) -> float:
    amps = _amplitudes(state, 2**pauli_sum.num_qubits)
    val = np.vdot(amps, sparse_matrix(pauli_sum) @ amps)
    if abs(val.imag) > IMAG_TOL:
        raise InvalidState(f"expectation has imaginary part {val.imag:.3g}")
    return float(val.real)


def total_spin_operators(num_qubits: int) -> dict[str, sp.csr_matrix]:
    """``S^a = sum_i sigma^a_i`` for a in x, y, z, plus ``S2 = sum_a (S^a)^2``."""
    ops = {}
    for letter in "XYZ":
        terms = tuple(
            PauliString("".join(letter if k == q else "I" for k in range(num_qubits))) for q in range(num_qubits)
        )
        ops[letter.lower()] = sparse_matrix(PauliSum(num_qubits, terms))
    ops["S2"] = (ops["x"] @ ops["x"] + ops["y"] @ ops["y"] + ops["z"] @ ops["z"]).tocsr()
    return ops


def heisenberg_matrix(fragment: LatticeFragment) -> sp.csr_matrix:
    """Real sparse matrix of the lattice Hamiltonian."""
    return sparse_matrix(heisenberg_from_lattice(fragment)).real.tocsr()


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    ground_basis: np.ndarray  # columns span the ground subspace

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def degeneracy(self) -> int:
        return self.ground_basis.shape[1]

    def to_csv(self) -> str:
        return "index,value\n" + "".join(f"{k},{v:.10g}\n" for k, v in enumerate(self.eigenvalues.tolist()))


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(vec) > 1e-12)
    return vec if nz.size == 0 or vec[nz[0]] > 0 else -vec


def exact_spectrum(fragment: LatticeFragment) -> Spectrum:
    """Full spectrum by dense diagonalization inside each total-S^z sector.

    The Hamiltonian conserves the number of up spins, so the 2^n matrix is
    block diagonal in that quantum number; each block is solved densely.
    """
    n = fragment.num_sites
    if n > ED_MAX_SITES:
        raise SizeLimit(f"exact diagonalization is limited to {ED_MAX_SITES} sites, got {n}")
    h = heisenberg_matrix(fragment)
    weights = np.bitwise_count(np.arange(2**n, dtype=np.int64))
    values, vectors = [], []
    for w in range(n + 1):
        idx = np.flatnonzero(weights == w)
        block = h[idx][:, idx].toarray()
        ev, evec = np.linalg.eigh(block)
        values.append(ev)
        full = np.zeros((2**n, len(idx)))
        full[idx] = evec
        vectors.append(full)
    values = np.concatenate(values)
    vectors = np.concatenate(vectors, axis=1)
    order = np.argsort(values, kind="stable")
    values = values[order]
    ground = np.flatnonzero(values <= values[0] + DEGENERACY_TOL)
    basis = np.column_stack([_fix_phase(vectors[:, order[g]]) for g in ground])
    return Spectrum(values, basis)
