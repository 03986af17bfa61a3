"""Euclidean ansätze, parameter-shift gradients and Fubini–Study metrics.

Both ansätze put Hadamards on every qubit, one Ry layer before a single
CNOT chain and one Ry layer after it, with each qubit rotated exactly once.
The generator of every parameter is ``Y/2``, so each diagonal metric entry
is ``Var(Y/2) = 1/4`` on the states these circuits produce.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .circuit import PAULI, Circuit, Gate, bind
from .errors import InvalidArgument
from .simulator import ShotBackend, StateVector, apply_1q, apply_gate, derive_seed, prepare

TRIANGLE_EXACT = (np.pi / 4.0, 3.0 * np.pi / 2.0, np.pi)
TRIANGLE_INIT_KYOTO = tuple(np.pi * np.array([0.2427, 0.2510, 0.1233]))
TRIANGLE_INIT_OSLO = tuple(np.pi * np.array([0.2914, 0.2812, 0.1266]))
TRIANGLE_FINAL_KYOTO = tuple(np.pi * np.array([0.2306, 1.5005, 1.0031]))
TRIANGLE_FINAL_OSLO = tuple(np.pi * np.array([0.3111, 1.5240, 1.0144]))

STAR_ROUNDED = tuple([-np.pi / 2.0] * 6 + [np.pi] * 6)
STAR_FINAL_TORINO = tuple(
    np.pi
    * np.array(
        [-0.3962, -0.5324, 1.4827, -0.4658, -0.4879, 1.4993, 1.0056, 1.0190, 0.9836, -0.9768, 1.0007, -0.9830]
    )
)

PRE, POST = "pre", "post"


@dataclass(frozen=True)
class AnsatzSpec:
    """Parametrized circuit plus the layer and generator of every slot."""

    name: str
    circuit: Circuit
    layer_map: tuple[str, ...]
    generators: tuple[tuple[str, int], ...]

    def __post_init__(self):
        d = self.circuit.num_params
        if len(self.layer_map) != d or len(self.generators) != d:
            raise InvalidArgument("layer_map and generators need one entry per slot")
        if set(self.layer_map) - {PRE, POST}:
            raise InvalidArgument("layer_map entries must be 'pre' or 'post'")
        qubits = [q for _, q in self.generators]
        if sorted(qubits) != list(range(self.circuit.num_qubits)):
            raise InvalidArgument("every qubit must carry exactly one rotation")

    @property
    def num_params(self) -> int:
        return self.circuit.num_params

    @property
    def num_qubits(self) -> int:
        return self.circuit.num_qubits

    def layers(self) -> list[list[int]]:
        return [[s for s, lay in enumerate(self.layer_map) if lay == name] for name in (PRE, POST)]

    def bind(self, params: Sequence[float]) -> Circuit:
        return bind(self.circuit, params)

    def prefix_bound(self, params: Sequence[float], slots: Sequence[int]) -> Circuit:
        slots = set(slots)
        params = np.asarray(params, dtype=float)
        gates = []
        for g in self.circuit.gates:
            if g.slot in slots:
                break
            gates.append(g if g.slot is None else Gate(g.kind, g.qubits, float(params[g.slot])))
        return Circuit(self.num_qubits, tuple(gates))


def _build(name: str, n: int, pre: Sequence[int], chain: Sequence[tuple[int, int]], post: Sequence[int]) -> AnsatzSpec:
    gates = [Gate("H", (q,)) for q in range(n)]
    slot = 0
    layer_map, generators = [], []
    for q in pre:
        gates.append(Gate("Ry", (q,), slot=slot))
        layer_map.append(PRE)
        generators.append(("Y", q))
        slot += 1
    gates += [Gate("CNOT", pair) for pair in chain]
    for q in post:
        gates.append(Gate("Ry", (q,), slot=slot))
        layer_map.append(POST)
        generators.append(("Y", q))
        slot += 1
    return AnsatzSpec(name, Circuit(n, tuple(gates), slot), tuple(layer_map), tuple(generators))


def triangle_ansatz() -> AnsatzSpec:
    return _build("triangle", 3, pre=(0, 2), chain=((0, 1), (1, 2)), post=(1,))


def star_ansatz() -> AnsatzSpec:
    """12 qubits: Ry on even qubits, chain 1->2->...->11, closing CNOT 11->0, Ry on odd qubits."""
    chain = [(k, k + 1) for k in range(1, 11)] + [(11, 0)]
    return _build("star", 12, pre=range(0, 12, 2), chain=chain, post=range(1, 12, 2))


def ansatz_for(name: str) -> AnsatzSpec:
    builders = {"triangle": triangle_ansatz, "star": star_ansatz}
    if name not in builders:
        raise InvalidArgument(f"no ansatz for fragment {name!r}")
    return builders[name]()


# -- gradient ---------------------------------------------------------------


def parameter_shift_gradient(spec: AnsatzSpec, params: Sequence[float], energy_fn: Callable) -> np.ndarray:
    """Two-term shift rule, valid because every generator has eigenvalues ±1/2."""
    params = np.asarray(params, dtype=float)
    if params.size != spec.num_params:
        raise InvalidArgument(f"expected {spec.num_params} parameters, got {params.size}")
    grad = np.empty(params.size)
    for j in range(params.size):
        shift = np.zeros(params.size)
        shift[j] = np.pi / 2.0
        grad[j] = 0.5 * (float(energy_fn(params + shift)) - float(energy_fn(params - shift)))
    return grad


# -- metric -----------------------------------------------------------------


@dataclass(frozen=True)
class MetricMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgument("metric must be square")
        if np.abs(m - m.T).max(initial=0.0) > 1e-12:
            raise InvalidArgument("metric is not symmetric")
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def deviation(self, scale: float = 0.25) -> float:
        """Max-abs distance from ``scale * I``."""
        return float(np.abs(self.entries - scale * np.eye(self.dim)).max())

    def to_csv(self) -> str:
        return "".join(",".join(f"{float(v):.10g}" for v in row) + "\n" for row in self.entries)


def _generator_matrix(letter: str) -> np.ndarray:
    return PAULI[letter] / 2.0


def _exact_executor(circuit: Circuit) -> StateVector:
    return prepare(circuit)


def _covariance(state: StateVector, gens: Sequence[tuple[str, int]]) -> np.ndarray:
    n = state.num_qubits
    applied = []
    for letter, q in gens:
        row = state.amplitudes.copy()[None, :]
        apply_1q(row, n, q, _generator_matrix(letter))
        applied.append(row[0])
    applied = np.array(applied)
    psi = state.amplitudes
    mean = applied @ psi.conj()
    second = applied.conj() @ applied.T
    cov = second - np.outer(mean.conj(), mean)
    return cov.real


def fubini_study_block_diagonal(
    spec: AnsatzSpec, params: Sequence[float], executor: Callable[[Circuit], StateVector] | None = None
) -> MetricMatrix:
    """Per-layer generator covariance in the state just before that layer.

    ``executor`` maps a bound prefix circuit to its output state; the default
    is the exact statevector simulator. Entries across layers are zero.
    """
    executor = executor or _exact_executor
    params = np.asarray(params, dtype=float)
    g = np.zeros((spec.num_params, spec.num_params))
    for slots in spec.layers():
        if not slots:
            continue
        state = executor(spec.prefix_bound(params, slots))
        block = _covariance(state, [spec.generators[s] for s in slots])
        g[np.ix_(slots, slots)] = block
    return MetricMatrix(0.5 * (g + g.T))


def fubini_study_block_sampled(
    spec: AnsatzSpec, params: Sequence[float], backend: ShotBackend, shots: int, seed: int
) -> MetricMatrix:
    """Block-diagonal metric estimated from Y-basis shots of each layer prefix.

    For Y generators ``<P_i P_j> = <Y_a Y_b>/4`` and ``<P_i> = <Y_a>/2`` are
    read off one Y-basis measurement per layer.
    """
    params = np.asarray(params, dtype=float)
    g = np.zeros((spec.num_params, spec.num_params))
    n = spec.num_qubits
    for layer_idx, slots in enumerate(spec.layers()):
        if not slots:
            continue
        for s in slots:
            if spec.generators[s][0] != "Y":
                raise InvalidArgument("sampled metric supports Y generators only")
        prefix = spec.prefix_bound(params, slots)
        table = backend.run(prefix, "Y" * n, shots, derive_seed(seed, "metric", layer_idx))
        bits = table.bits().astype(float)
        spins = 1.0 - 2.0 * bits
        w = table.frequencies / table.shots
        qs = [spec.generators[s][1] for s in slots]
        y = spins[:, qs]
        mean = w @ y
        second = (y * w[:, None]).T @ y
        g[np.ix_(slots, slots)] = (second - np.outer(mean, mean)) / 4.0
    return MetricMatrix(0.5 * (g + g.T))


def derivative_states(spec: AnsatzSpec, params: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """``psi`` and ``d psi / d theta_j`` for every slot, by gate insertion.

    Differentiating ``Ry(t) = exp(-i t Y/2)`` inserts ``-i Y/2`` right after
    the gate; all rows are then pushed through the rest of the circuit together.
    """
    params = np.asarray(params, dtype=float)
    if params.size != spec.num_params:
        raise InvalidArgument(f"expected {spec.num_params} parameters, got {params.size}")
    n, d = spec.num_qubits, spec.num_params
    dim = 2**n
    batch = np.zeros((1 + d, dim), dtype=complex)
    batch[0, 0] = 1.0
    live = 1
    rows = {}
    for g in spec.circuit.gates:
        gate = g if g.slot is None else Gate(g.kind, g.qubits, float(params[g.slot]))
        apply_gate(batch[:live], n, gate)
        if g.slot is not None:
            letter = {"Ry": "Y", "Rz": "Z"}[g.kind]
            if g.slot in rows:
                raise InvalidArgument("repeated slots are not supported by the derivative path")
            batch[live] = batch[0]
            view = batch[live : live + 1]
            apply_1q(view, n, g.qubits[0], -1j * _generator_matrix(letter))
            rows[g.slot] = live
            live += 1
    psi = batch[0]
    deriv = np.array([batch[rows[s]] for s in range(d)])
    return psi, deriv


def fubini_study_full_numeric(spec: AnsatzSpec, params: Sequence[float]) -> MetricMatrix:
    """``Re[<d_i|d_j> - <d_i|psi><psi|d_j>]`` from exact derivative states."""
    psi, deriv = derivative_states(spec, params)
    overlap = deriv.conj() @ deriv.T
    proj = deriv.conj() @ psi
    g = (overlap - np.outer(proj, proj.conj())).real
    return MetricMatrix(0.5 * (g + g.T))
