"""Gate-level circuit representation.

Gates are listed in time order. A rotation gate either carries a fixed
angle or refers to a parameter slot that :func:`bind` fills in. Conventions:
``Ry(t) = exp(-i t Y / 2)``, ``Rz(t) = exp(-i t Z / 2)``, ``SqrtX`` is the
principal square root of X, and ``CNOT``/``CZ`` list the control first.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, InvalidState, SizeLimit, UnsupportedGate

ARITY = {"H": 1, "X": 1, "SqrtX": 1, "SqrtXdg": 1, "Rz": 1, "Ry": 1, "CNOT": 2, "CZ": 2}
ROTATIONS = {"Rz", "Ry"}
NATIVE = {"CZ", "Rz", "X", "SqrtX"}
SELF_INVERSE = {"H", "X", "CNOT", "CZ"}
UNITARY_MAX_QUBITS = 12

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
_SX = np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex) / 2.0
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)

PAULI = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    slot: int | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise UnsupportedGate(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        if len(qubits) != ARITY[self.kind]:
            raise InvalidArgument(f"{self.kind} acts on {ARITY[self.kind]} qubit(s), got {qubits}")
        if len(set(qubits)) != len(qubits):
            raise InvalidArgument(f"{self.kind} needs distinct qubits, got {qubits}")
        if self.kind in ROTATIONS:
            if (self.angle is None) == (self.slot is None):
                raise InvalidArgument(f"{self.kind} needs exactly one of angle or slot")
        elif self.angle is not None or self.slot is not None:
            raise InvalidArgument(f"{self.kind} takes no angle")

    @property
    def bound(self) -> bool:
        return self.slot is None

    def matrix(self) -> np.ndarray:
        """Unitary on the gate's own qubits (first listed qubit most significant)."""
        if not self.bound:
            raise InvalidState(f"{self.kind} on {self.qubits} refers to unbound slot {self.slot}")
        return gate_matrix(self.kind, self.angle)


def gate_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    if kind == "H":
        return _H
    if kind == "X":
        return _X
    if kind == "SqrtX":
        return _SX
    if kind == "SqrtXdg":
        return _SX.conj().T
    if kind == "Rz":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    if kind == "Ry":
        c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "CNOT":
        return np.kron(_P0, _I2) + np.kron(_P1, _X)
    if kind == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    raise UnsupportedGate(kind)


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...] = ()
    num_params: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.num_qubits < 1:
            raise InvalidArgument("a circuit needs at least one qubit")
        used = set()
        for g in self.gates:
            if max(g.qubits) >= self.num_qubits:
                raise InvalidArgument(f"gate {g.kind} on {g.qubits} exceeds {self.num_qubits} qubits")
            if g.slot is not None:
                if not 0 <= g.slot < self.num_params:
                    raise InvalidArgument(f"slot {g.slot} outside [0, {self.num_params})")
                used.add(g.slot)
        if used != set(range(self.num_params)):
            raise InvalidArgument(f"parameter slots {sorted(set(range(self.num_params)) - used)} are never used")

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.num_qubits != self.num_qubits:
            raise InvalidArgument("cannot compose circuits of different widths")
        if self.num_params or other.num_params:
            raise InvalidState("only bound circuits can be composed")
        return Circuit(self.num_qubits, self.gates + other.gates)

    @property
    def is_bound(self) -> bool:
        return self.num_params == 0

    def count(self, kind: str) -> int:
        return sum(g.kind == kind for g in self.gates)

    def to_text(self) -> str:
        lines = [f"qubits {self.num_qubits} params {self.num_params}"]
        for g in self.gates:
            parts = [g.kind, *map(str, g.qubits)]
            if g.slot is not None:
                parts.append(f"slot={g.slot}")
            elif g.angle is not None:
                parts.append(repr(float(g.angle)))
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or rows[0][0] != "qubits":
            raise InvalidArgument("circuit text must start with 'qubits N params P'")
        header = rows[0]
        n, n_params = int(header[1]), int(header[3])
        gates = []
        for parts in rows[1:]:
            kind, rest = parts[0], parts[1:]
            arity = ARITY.get(kind)
            if arity is None:
                raise UnsupportedGate(f"unknown gate kind {kind!r}")
            qubits = tuple(int(q) for q in rest[:arity])
            angle = slot = None
            if kind in ROTATIONS:
                token = rest[arity]
                if token.startswith("slot="):
                    slot = int(token[5:])
                else:
                    angle = float(token)
            gates.append(Gate(kind, qubits, angle, slot))
        return cls(n, tuple(gates), n_params)


def bind(circuit: Circuit, params: Sequence[float]) -> Circuit:
    params = np.asarray(params, dtype=float).ravel()
    if params.size != circuit.num_params:
        raise InvalidArgument(f"expected {circuit.num_params} parameters, got {params.size}")
    if circuit.num_params == 0:
        return circuit
    gates = tuple(
        replace(g, angle=float(params[g.slot]), slot=None) if g.slot is not None else g for g in circuit.gates
    )
    return Circuit(circuit.num_qubits, gates, 0)


def _require_bound(circuit: Circuit, what: str) -> None:
    if not circuit.is_bound:
        raise InvalidState(f"{what} needs a fully bound circuit ({circuit.num_params} free parameters)")


def adjoint_gate(g: Gate) -> Gate:
    if g.kind in SELF_INVERSE:
        return g
    if g.kind == "SqrtX":
        return Gate("SqrtXdg", g.qubits)
    if g.kind == "SqrtXdg":
        return Gate("SqrtX", g.qubits)
    return Gate(g.kind, g.qubits, angle=-g.angle)


def adjoint(circuit: Circuit) -> Circuit:
    _require_bound(circuit, "adjoint")
    return Circuit(circuit.num_qubits, tuple(adjoint_gate(g) for g in reversed(circuit.gates)))


def fold_global(circuit: Circuit, fold: int) -> Circuit:
    """Return ``U (U^dag U)^((fold-1)/2)`` as a gate list."""
    if int(fold) != fold or fold < 1 or fold % 2 == 0:
        raise InvalidArgument(f"fold must be an odd positive integer, got {fold}")
    _require_bound(circuit, "fold_global")
    inverse = adjoint(circuit).gates
    gates = list(circuit.gates)
    for _ in range((int(fold) - 1) // 2):
        gates.extend(inverse)
        gates.extend(circuit.gates)
    return Circuit(circuit.num_qubits, tuple(gates))


def _native_sequence(g: Gate) -> list[Gate]:
    half_pi = np.pi / 2.0
    if g.kind in NATIVE:
        return [g]
    (q, *rest) = g.qubits
    if g.kind == "H":
        return [Gate("Rz", (q,), half_pi), Gate("SqrtX", (q,)), Gate("Rz", (q,), half_pi)]
    if g.kind == "Ry":
        # time order of Rz(3pi) . SqrtX . Rz(theta + pi) . SqrtX
        return [
            Gate("SqrtX", (q,)),
            Gate("Rz", (q,), g.angle + np.pi),
            Gate("SqrtX", (q,)),
            Gate("Rz", (q,), 3.0 * np.pi),
        ]
    if g.kind == "SqrtXdg":
        return [Gate("Rz", (q,), np.pi), Gate("SqrtX", (q,)), Gate("Rz", (q,), np.pi)]
    if g.kind == "CNOT":
        t = rest[0]
        return [
            Gate("Rz", (t,), half_pi),
            Gate("SqrtX", (t,)),
            Gate("Rz", (t,), np.pi),
            Gate("CZ", (q, t)),
            Gate("SqrtX", (t,)),
            Gate("Rz", (t,), half_pi),
        ]
    raise UnsupportedGate(f"no native decomposition for {g.kind}")


def compile_to_native(circuit: Circuit) -> Circuit:
    """Rewrite onto the {CZ, Rz, X, SqrtX} gate set, exact up to global phase."""
    _require_bound(circuit, "compile_to_native")
    gates: list[Gate] = []
    for g in circuit.gates:
        gates.extend(_native_sequence(g))
    return Circuit(circuit.num_qubits, tuple(gates))


def _embed(n: int, factors: dict[int, np.ndarray]) -> sp.csr_matrix:
    mats = [sp.csr_matrix(factors.get(k, _I2)) for k in range(n)]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


def gate_embedding(g: Gate, n: int) -> sp.csr_matrix:
    """Full ``2^n x 2^n`` operator of one gate (qubit 0 most significant)."""
    if len(g.qubits) == 1:
        return _embed(n, {g.qubits[0]: g.matrix()})
    c, t = g.qubits
    if g.kind == "CNOT":
        return _embed(n, {c: _P0}) + _embed(n, {c: _P1, t: _X})
    if g.kind == "CZ":
        return _embed(n, {c: _P0}) + _embed(n, {c: _P1, t: _Z})
    raise UnsupportedGate(g.kind)


def unitary_of(circuit: Circuit) -> np.ndarray:
    """Exact circuit matrix as a product of Kronecker-product gate embeddings."""
    _require_bound(circuit, "unitary_of")
    n = circuit.num_qubits
    if n > UNITARY_MAX_QUBITS:
        raise SizeLimit(f"unitary_of supports at most {UNITARY_MAX_QUBITS} qubits")
    u = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        u = gate_embedding(g, n) @ u
    return np.asarray(u)


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-abs deviation of ``a`` from ``b`` after removing a global phase.

    The phase is fixed by the first entry of ``b`` with non-negligible magnitude.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    flat = np.flatnonzero(np.abs(b) > 1e-8)
    if flat.size == 0:
        return float(np.max(np.abs(a - b)))
    k = flat[0]
    if abs(a.flat[k]) < 1e-12:
        return float(np.max(np.abs(a - b)))
    phase = (a.flat[k] / abs(a.flat[k])) / (b.flat[k] / abs(b.flat[k]))
    return float(np.max(np.abs(a - phase * b)))


def circuit_from_gates(num_qubits: int, gates: Iterable[Gate]) -> Circuit:
    gates = tuple(gates)
    slots = [g.slot for g in gates if g.slot is not None]
    return Circuit(num_qubits, gates, max(slots) + 1 if slots else 0)
