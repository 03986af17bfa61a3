"""Statevector simulation, Pauli-trajectory noise, and shot sampling.

Amplitude index convention: qubit 0 is the most significant bit, so the
bitstring ``"b0 b1 ... b(n-1)"`` read as a binary number is the index.

Randomness is always derived from a non-negative integer seed through
:func:`rng_stream`, which mixes in string/int labels via
``numpy.random.SeedSequence(seed, spawn_key=...)``. Different labels give
independent streams, equal labels give identical streams.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuit import PAULI, Circuit, Gate
from .errors import InvalidArgument, InvalidState

NORM_TOL = 1e-10
CHUNK_ROWS = 256

PAULI_LETTERS = "IXYZ"


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise InvalidArgument("stream labels must be non-negative")
        return int(label)
    return zlib.crc32(str(label).encode())


def rng_stream(seed: int, *labels) -> np.random.Generator:
    if seed is None or int(seed) < 0:
        raise InvalidArgument(f"seed must be a non-negative integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(lb) for lb in labels))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *labels) -> int:
    """Child integer seed for a labelled sub-job."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(lb) for lb in labels))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).ravel()
        if self.amplitudes.size != 2**self.num_qubits:
            raise InvalidArgument(f"need 2^{self.num_qubits} amplitudes, got {self.amplitudes.size}")
        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidArgument(f"state is not normalised (norm^2 = {norm:.15g})")

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        amps = np.zeros(2**num_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(num_qubits, amps)

    @classmethod
    def from_vector(cls, vector, normalize: bool = False) -> "StateVector":
        vector = np.asarray(vector, dtype=complex).ravel()
        n = int(round(np.log2(vector.size)))
        if 2**n != vector.size:
            raise InvalidArgument("vector length must be a power of two")
        if normalize:
            vector = vector / np.linalg.norm(vector)
        return cls(n, vector)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())


# -- batched kernels ---------------------------------------------------------
# A batch is a (B, 2^n) complex array owned by the caller; kernels update it in place.


def apply_1q(batch: np.ndarray, n: int, q: int, u: np.ndarray) -> None:
    view = batch.reshape(batch.shape[0], 2**q, 2, 2 ** (n - q - 1))
    v0 = view[:, :, 0, :].copy()
    v1 = view[:, :, 1, :]
    view[:, :, 0, :] = u[0, 0] * v0 + u[0, 1] * v1
    view[:, :, 1, :] = u[1, 0] * v0 + u[1, 1] * v1


def _slicer(n: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * (n + 1)
    for q, b in fixed.items():
        idx[q + 1] = b
    return tuple(idx)


def _apply_cnot(batch: np.ndarray, n: int, c: int, t: int) -> None:
    tensor = batch.reshape((batch.shape[0],) + (2,) * n)
    s0, s1 = _slicer(n, {c: 1, t: 0}), _slicer(n, {c: 1, t: 1})
    tmp = tensor[s0].copy()
    tensor[s0] = tensor[s1]
    tensor[s1] = tmp


def _apply_cz(batch: np.ndarray, n: int, c: int, t: int) -> None:
    tensor = batch.reshape((batch.shape[0],) + (2,) * n)
    tensor[_slicer(n, {c: 1, t: 1})] *= -1.0


def apply_gate(batch: np.ndarray, n: int, gate: Gate) -> None:
    if not gate.bound:
        raise InvalidState(f"{gate.kind} on {gate.qubits} refers to unbound slot {gate.slot}")
    if gate.kind == "CNOT":
        _apply_cnot(batch, n, *gate.qubits)
    elif gate.kind == "CZ":
        _apply_cz(batch, n, *gate.qubits)
    else:
        apply_1q(batch, n, gate.qubits[0], gate.matrix())


def _apply_pauli_code(batch: np.ndarray, n: int, qubits: tuple[int, ...], code: int) -> None:
    """Apply the Pauli with base-4 ``code`` (first qubit most significant)."""
    letters = pauli_label(code, len(qubits))
    for q, letter in zip(qubits, letters):
        if letter != "I":
            apply_1q(batch, n, q, PAULI[letter])


def pauli_label(code: int, arity: int) -> str:
    digits = []
    for _ in range(arity):
        digits.append(PAULI_LETTERS[code % 4])
        code //= 4
    return "".join(reversed(digits))


def _check_circuit(state: StateVector, circuit: Circuit) -> None:
    if not circuit.is_bound:
        raise InvalidState(f"circuit has {circuit.num_params} unbound parameters")
    if circuit.num_qubits != state.num_qubits:
        raise InvalidArgument(f"circuit has {circuit.num_qubits} qubits, state has {state.num_qubits}")


def evolve(state: StateVector, circuit: Circuit) -> StateVector:
    _check_circuit(state, circuit)
    batch = state.amplitudes.copy()[None, :]
    for g in circuit.gates:
        apply_gate(batch, state.num_qubits, g)
    return StateVector(state.num_qubits, batch[0])


def evolve_batch(batch: np.ndarray, circuit: Circuit) -> np.ndarray:
    """Evolve every row of ``batch`` (not normalised-checked) through ``circuit``."""
    if not circuit.is_bound:
        raise InvalidState(f"circuit has {circuit.num_params} unbound parameters")
    out = np.array(batch, dtype=complex, copy=True).reshape(-1, 2**circuit.num_qubits)
    for g in circuit.gates:
        apply_gate(out, circuit.num_qubits, g)
    return out


def prepare(circuit: Circuit) -> StateVector:
    return evolve(StateVector.zero(circuit.num_qubits), circuit)


# -- noise ------------------------------------------------------------------


def _as_confusions(readout, n: int | None) -> tuple[np.ndarray, ...] | None:
    if readout is None:
        return None
    mats = tuple(np.array(m, dtype=float).reshape(2, 2) for m in readout)
    if n is not None and len(mats) != n:
        raise InvalidArgument(f"need {n} confusion matrices, got {len(mats)}")
    return mats


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing gate noise plus per-qubit readout confusion.

    ``readout[q][f, i]`` is the probability of reading ``f`` when qubit ``q``
    is truly in ``i`` (columns sum to one).
    """

    p1: float = 0.0
    p2: float = 0.0
    readout: tuple[np.ndarray, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("p1", "p2"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise InvalidArgument(f"{name} must lie in [0, 1], got {p}")
        mats = _as_confusions(self.readout, None)
        if mats is not None:
            for q, m in enumerate(mats):
                if np.any(m < 0) or np.any(np.abs(m.sum(axis=0) - 1.0) > 1e-12):
                    raise InvalidArgument(f"readout matrix of qubit {q} is not column-stochastic")
        object.__setattr__(self, "readout", mats)

    @classmethod
    def symmetric(cls, num_qubits: int, p1: float = 0.0, p2: float = 0.0, flip: float = 0.0) -> "NoiseModel":
        conf = np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])
        return cls(p1, p2, tuple(conf.copy() for _ in range(num_qubits)) if flip else None)

    @classmethod
    def default(cls, num_qubits: int) -> "NoiseModel":
        """Calibration defaults (not device values): p1=1e-3, p2=1e-2, flip=0.02."""
        return cls.symmetric(num_qubits, p1=1e-3, p2=1e-2, flip=0.02)

    @property
    def has_gate_noise(self) -> bool:
        return self.p1 > 0 or self.p2 > 0

    @property
    def has_readout_noise(self) -> bool:
        return self.readout is not None and any(not np.allclose(m, np.eye(2)) for m in self.readout)

    def without_readout(self) -> "NoiseModel":
        return NoiseModel(self.p1, self.p2, None)

    def without_gate_noise(self) -> "NoiseModel":
        return NoiseModel(0.0, 0.0, self.readout)


def _gate_error_probs(circuit: Circuit, noise: NoiseModel) -> tuple[np.ndarray, np.ndarray]:
    arity = np.array([len(g.qubits) for g in circuit.gates], dtype=int)
    probs = np.where(arity == 1, noise.p1, noise.p2)
    return probs, arity


def draw_error_patterns(circuit: Circuit, noise: NoiseModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Pauli insertion codes, shape ``(count, len(circuit))``.

    Code 0 means no error after that gate; otherwise the base-4 digits name
    the Pauli on the gate's qubits (1..3 for one qubit, 1..15 for two).
    """
    probs, arity = _gate_error_probs(circuit, noise)
    size = (count, len(probs))
    rows, cols = np.nonzero(rng.random(size) < probs[None, :])
    codes = np.zeros(size, dtype=np.int8)
    codes[rows, cols] = rng.integers(1, np.where(arity == 1, 4, 16)[cols])
    return codes


def trajectory_pattern(circuit: Circuit, noise: NoiseModel, seed: int) -> np.ndarray:
    return draw_error_patterns(circuit, noise, 1, rng_stream(seed, "trajectory"))[0]


def _simulate_sorted(psi0: np.ndarray, circuit: Circuit, patterns: np.ndarray, first: np.ndarray) -> np.ndarray:
    """Final states of ``patterns`` sorted by first error gate ``first``.

    Rows start from a copy of the ideal state just before their first error,
    so the shared error-free prefix is simulated once per chunk.
    """
    n = circuit.num_qubits
    rows = len(patterns)
    out = np.empty((rows, psi0.size), dtype=complex)
    ideal = psi0.copy()[None, :]
    spawned = 0
    for g_idx, gate in enumerate(circuit.gates):
        apply_gate(ideal, n, gate)
        if spawned:
            apply_gate(out[:spawned], n, gate)
        stop = int(np.searchsorted(first, g_idx, side="right"))
        if stop > spawned:
            out[spawned:stop] = ideal[0]
            spawned = stop
        if spawned:
            col = patterns[:spawned, g_idx]
            for code in np.unique(col[col != 0]):
                sel = np.flatnonzero(col == code)
                sub = out[sel]
                _apply_pauli_code(sub, n, gate.qubits, int(code))
                out[sel] = sub
    out[spawned:] = ideal[0]
    return out


def unique_trajectories(
    state: StateVector, circuit: Circuit, patterns: np.ndarray, chunk: int = CHUNK_ROWS
):
    """Yield ``(states, members)`` chunks covering every distinct error pattern.

    ``members`` maps each distinct pattern in the chunk to the trajectory
    rows of ``patterns`` that share it (an index array per state row).
    """
    _check_circuit(state, circuit)
    if patterns.shape[1] != len(circuit):
        raise InvalidArgument("pattern width must equal the gate count")
    if len(circuit) == 0:
        yield state.amplitudes.copy()[None, :], [np.arange(len(patterns))]
        return
    # Only rows with at least one error need deduplication; the clean rows
    # all share the all-zero pattern, placed first.
    noisy = patterns.any(axis=1)
    uniq_err, inv_err = np.unique(patterns[noisy], axis=0, return_inverse=True)
    uniq = np.vstack([np.zeros((1, patterns.shape[1]), dtype=patterns.dtype), uniq_err])
    inverse = np.zeros(len(patterns), dtype=np.int64)
    inverse[noisy] = inv_err.ravel() + 1
    has_err = uniq != 0
    first = np.where(has_err.any(axis=1), has_err.argmax(axis=1), len(circuit))
    order = np.argsort(first, kind="stable")
    groups = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[groups], np.arange(len(uniq) + 1))
    for start in range(0, len(order), chunk):
        idx = order[start : start + chunk]
        states = _simulate_sorted(state.amplitudes, circuit, uniq[idx], first[idx])
        members = [groups[bounds[u] : bounds[u + 1]] for u in idx]
        yield states, members


def evolve_trajectory(state: StateVector, circuit: Circuit, noise: NoiseModel, seed: int) -> StateVector:
    """One Monte-Carlo Pauli trajectory; depolarizing errors follow each gate."""
    _check_circuit(state, circuit)
    pattern = trajectory_pattern(circuit, noise, seed)[None, :]
    first = np.array([pattern[0].nonzero()[0][0] if pattern.any() else len(circuit)])
    out = _simulate_sorted(state.amplitudes, circuit, pattern, first)
    return StateVector(state.num_qubits, out[0])


# -- measurement ------------------------------------------------------------


def normalize_basis(basis: str, num_qubits: int) -> str:
    basis = basis.upper()
    if len(basis) == 1:
        basis = basis * num_qubits
    if len(basis) != num_qubits or set(basis) - set("XYZ"):
        raise InvalidArgument(f"basis {basis!r} must be X/Y/Z letters for {num_qubits} qubits")
    return basis


def basis_rotation(basis: str) -> list[Gate]:
    """Gates mapping the requested eigenbasis on each qubit onto Z."""
    gates = []
    for q, letter in enumerate(basis):
        if letter == "X":
            gates.append(Gate("H", (q,)))
        elif letter == "Y":
            gates.append(Gate("Rz", (q,), -np.pi / 2.0))
            gates.append(Gate("H", (q,)))
    return gates


def _rotate_batch(batch: np.ndarray, n: int, basis: str) -> None:
    for g in basis_rotation(basis):
        apply_gate(batch, n, g)


def _probs(amps: np.ndarray) -> np.ndarray:
    p = np.abs(amps) ** 2
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=-1, keepdims=True)


@dataclass(eq=False)
class ShotTable:
    """Counts of measured bitstrings for one measurement basis."""

    basis: str
    outcomes: np.ndarray
    frequencies: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.outcomes = np.asarray(self.outcomes, dtype=np.int64).ravel()
        self.frequencies = np.asarray(self.frequencies, dtype=np.int64).ravel()
        if self.outcomes.shape != self.frequencies.shape:
            raise InvalidArgument("outcomes and frequencies differ in length")
        if np.any(self.frequencies < 0):
            raise InvalidArgument("negative count")
        keep = self.frequencies > 0
        order = np.argsort(self.outcomes[keep], kind="stable")
        self.outcomes = self.outcomes[keep][order]
        self.frequencies = self.frequencies[keep][order]
        if np.any(np.diff(self.outcomes) == 0):
            raise InvalidArgument("duplicate outcomes")
        if self.outcomes.size and (self.outcomes.min() < 0 or self.outcomes.max() >= 2**self.num_qubits):
            raise InvalidArgument("outcome index out of range")

    @property
    def num_qubits(self) -> int:
        return len(self.basis)

    @property
    def shots(self) -> int:
        return int(self.frequencies.sum())

    @property
    def counts(self) -> dict[str, int]:
        n = self.num_qubits
        return {format(int(o), f"0{n}b"): int(f) for o, f in zip(self.outcomes, self.frequencies)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShotTable):
            return NotImplemented
        return (
            self.basis == other.basis
            and self.seed == other.seed
            and np.array_equal(self.outcomes, other.outcomes)
            and np.array_equal(self.frequencies, other.frequencies)
        )

    @classmethod
    def from_counts(cls, basis: str, counts: Mapping[str, int], seed: int | None = None) -> "ShotTable":
        n = len(basis)
        outcomes, freqs = [], []
        for bits, c in counts.items():
            if len(bits) != n or set(bits) - {"0", "1"}:
                raise InvalidArgument(f"bitstring {bits!r} does not match {n} qubits")
            outcomes.append(int(bits, 2))
            freqs.append(int(c))
        return cls(basis, np.array(outcomes, dtype=np.int64), np.array(freqs, dtype=np.int64), seed)

    def bits(self) -> np.ndarray:
        """Outcome bits, shape ``(len(outcomes), n)``, column k is qubit k."""
        shifts = np.arange(self.num_qubits - 1, -1, -1)
        return ((self.outcomes[:, None] >> shifts[None, :]) & 1).astype(np.uint8)

    def distribution(self) -> np.ndarray:
        p = np.zeros(2**self.num_qubits)
        p[self.outcomes] = self.frequencies / self.shots
        return p

    def marginal(self, qubits: Sequence[int]) -> np.ndarray:
        """Counts over the sub-register ``qubits`` (first listed most significant)."""
        bits = self.bits()[:, list(qubits)]
        weights = 2 ** np.arange(len(qubits) - 1, -1, -1)
        idx = bits.astype(np.int64) @ weights
        return np.bincount(idx, weights=self.frequencies, minlength=2 ** len(qubits)).astype(np.int64)

    def to_text(self) -> str:
        lines = [f"basis {self.basis}", f"seed {self.seed if self.seed is not None else 'none'}", f"shots {self.shots}"]
        lines += [f"{b},{c}" for b, c in self.counts.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ShotTable":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        try:
            basis = rows[0].split()[1]
            seed_tok = rows[1].split()[1]
            shots = int(rows[2].split()[1])
            counts = {}
            for ln in rows[3:]:
                bits, c = ln.split(",")
                counts[bits.strip()] = int(c)
        except (IndexError, ValueError) as exc:
            raise InvalidArgument(f"malformed shot table text: {exc}") from None
        table = cls.from_counts(basis, counts, None if seed_tok == "none" else int(seed_tok))
        if table.shots != shots:
            raise InvalidArgument(f"header says {shots} shots, counts sum to {table.shots}")
        return table


def _table_from_counts(basis: str, counts: np.ndarray, seed) -> ShotTable:
    nz = np.flatnonzero(counts)
    return ShotTable(basis, nz, counts[nz], seed)


def sample(state: StateVector, basis: str, shots: int, seed: int) -> ShotTable:
    if int(shots) < 1:
        raise InvalidArgument(f"shots must be >= 1, got {shots}")
    basis = normalize_basis(basis, state.num_qubits)
    batch = state.amplitudes.copy()[None, :]
    _rotate_batch(batch, state.num_qubits, basis)
    rng = rng_stream(seed, "sample", basis)
    counts = rng.multinomial(int(shots), _probs(batch[0]))
    return _table_from_counts(basis, counts, seed)


def sample_noisy(
    circuit: Circuit,
    noise: NoiseModel,
    basis: str,
    shots: int,
    seed: int,
    trajectories: int | None = None,
    initial: StateVector | None = None,
) -> ShotTable:
    """Sample a noisy circuit; readout noise is not applied here.

    With ``trajectories=None`` every shot gets its own trajectory, which makes
    the shots independent draws from the noisy mixed state. A finite count
    splits the shots as evenly as possible over that many trajectories.
    """
    if int(shots) < 1:
        raise InvalidArgument(f"shots must be >= 1, got {shots}")
    n = circuit.num_qubits
    basis = normalize_basis(basis, n)
    state = initial if initial is not None else StateVector.zero(n)
    count = int(shots) if trajectories is None else int(trajectories)
    if count < 1:
        raise InvalidArgument("trajectories must be >= 1")
    patterns = draw_error_patterns(circuit, noise, count, rng_stream(seed, "trajectories", basis))
    per_traj = np.full(count, int(shots) // count, dtype=np.int64)
    per_traj[: int(shots) % count] += 1
    sampler = rng_stream(seed, "sample", basis)
    counts = np.zeros(2**n, dtype=np.int64)
    for states, members in unique_trajectories(state, circuit, patterns):
        _rotate_batch(states, n, basis)
        probs = _probs(states)
        for row, member in enumerate(members):
            m = int(per_traj[member].sum())
            if m:
                counts += sampler.multinomial(m, probs[row])
    return _table_from_counts(basis, counts, seed)


def apply_readout_noise(table: ShotTable, noise: NoiseModel, seed: int) -> ShotTable:
    """Flip each shot's bits independently with the per-qubit confusion rates."""
    n = table.num_qubits
    mats = _as_confusions(noise.readout, n)
    if mats is None:
        return ShotTable(table.basis, table.outcomes.copy(), table.frequencies.copy(), table.seed)
    bits = np.repeat(table.bits(), table.frequencies, axis=0)
    p_flip = np.empty((2, n))
    p_flip[0] = [m[1, 0] for m in mats]
    p_flip[1] = [m[0, 1] for m in mats]
    rates = np.where(bits == 1, p_flip[1][None, :], p_flip[0][None, :])
    rng = rng_stream(seed, "readout", table.basis)
    flips = rng.random(bits.shape) < rates
    noisy = bits ^ flips.astype(np.uint8)
    idx = noisy.astype(np.int64) @ (2 ** np.arange(n - 1, -1, -1))
    counts = np.bincount(idx, minlength=2**n)
    return _table_from_counts(table.basis, counts, table.seed)


@dataclass(frozen=True)
class ShotBackend:
    """Callable executor ``(circuit, basis, shots, seed) -> ShotTable``.

    Gate noise (if any) is simulated with Pauli trajectories, readout noise
    is applied to the sampled bits afterwards. Basis rotations are ideal.
    """

    noise: NoiseModel | None = None
    trajectories: int | None = None

    def run(self, circuit: Circuit, basis: str, shots: int, seed: int) -> ShotTable:
        basis = normalize_basis(basis, circuit.num_qubits)
        if self.noise is not None and self.noise.has_gate_noise:
            table = sample_noisy(circuit, self.noise, basis, shots, seed, self.trajectories)
        else:
            table = sample(prepare(circuit), basis, shots, seed)
        if self.noise is not None and self.noise.readout is not None:
            table = apply_readout_noise(table, self.noise, seed)
        return table

    __call__ = run
