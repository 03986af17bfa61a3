"""Independent reference implementations used as test oracles.

Everything here is built from explicit Kronecker products of textbook
matrices and shares no code with the package.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def ry(t: float) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(t: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def sx() -> np.ndarray:
    # principal square root of X
    return 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats)


def embed(n: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    return kron_all([ops.get(k, I2) for k in range(n)])


def one_qubit(kind: str, angle=None) -> np.ndarray:
    return {
        "H": lambda: H,
        "X": lambda: X,
        "SqrtX": sx,
        "SqrtXdg": lambda: sx().conj().T,
        "Ry": lambda: ry(angle),
        "Rz": lambda: rz(angle),
    }[kind]()


def gate_operator(n: int, kind: str, qubits, angle=None) -> np.ndarray:
    if kind == "CNOT":
        c, t = qubits
        return embed(n, {c: P0}) + embed(n, {c: P1, t: X})
    if kind == "CZ":
        c, t = qubits
        return embed(n, {c: P0}) + embed(n, {c: P1, t: Z})
    return embed(n, {qubits[0]: one_qubit(kind, angle)})


def circuit_unitary(circuit) -> np.ndarray:
    n = circuit.num_qubits
    u = np.eye(2**n, dtype=complex)
    for g in circuit.gates:
        u = gate_operator(n, g.kind, g.qubits, g.angle) @ u
    return u


def _local_matrix(kind: str, angle=None) -> np.ndarray:
    if kind == "CNOT":
        return np.kron(P0, I2) + np.kron(P1, X)
    if kind == "CZ":
        return np.kron(P0, I2) + np.kron(P1, Z)
    return one_qubit(kind, angle)


def run(circuit) -> np.ndarray:
    """Statevector of ``circuit`` on |0..0> by tensor contraction (scales to 12 qubits)."""
    n = circuit.num_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g in circuit.gates:
        k = len(g.qubits)
        u = _local_matrix(g.kind, g.angle).reshape((2,) * (2 * k))
        psi = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), list(g.qubits)))
        psi = np.moveaxis(psi, list(range(k)), list(g.qubits))
    return psi.reshape(-1)


def pauli_string(letters: str) -> np.ndarray:
    return kron_all([PAULIS[c] for c in letters])


def heisenberg(n: int, edges, couplings=None) -> np.ndarray:
    couplings = couplings or [1.0] * len(edges)
    h = np.zeros((2**n, 2**n), dtype=complex)
    for (i, j), J in zip(edges, couplings):
        for p in (X, Y, Z):
            h += J * embed(n, {i: p, j: p})
    return h


def total_spin(n: int) -> dict[str, np.ndarray]:
    ops = {a: sum(embed(n, {k: p}) for k in range(n)) for a, p in zip("xyz", (X, Y, Z))}
    ops["S2"] = ops["x"] @ ops["x"] + ops["y"] @ ops["y"] + ops["z"] @ ops["z"]
    return ops


def singlet() -> np.ndarray:
    return np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def plus() -> np.ndarray:
    return np.array([1, 1], dtype=complex) / np.sqrt(2)


def expectation(psi: np.ndarray, op: np.ndarray) -> float:
    return float(np.vdot(psi, op @ psi).real)


def correlation_matrix(psi: np.ndarray, n: int) -> np.ndarray:
    c = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            c[i, j] = sum(expectation(psi, embed(n, {i: p}) @ embed(n, {j: p})) for p in (X, Y, Z))
    return c


def structure_factor(c: np.ndarray, positions: np.ndarray, q: np.ndarray) -> np.ndarray:
    n = len(positions)
    out = np.zeros(len(q), dtype=complex)
    for k, qv in enumerate(q):
        for i in range(n):
            for j in range(n):
                out[k] += np.exp(1j * qv @ (positions[i] - positions[j])) * c[i, j]
    return out / n


def finite_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g
