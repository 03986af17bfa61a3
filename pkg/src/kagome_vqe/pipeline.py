"""Energy functions over the exact, shot and noisy backends.

A shot-based energy function draws a fresh child seed for every call from
``(seed, call index)``, so an optimisation run is reproducible from its
seed while repeated evaluations at the same parameters stay independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzSpec
from .circuit import Circuit
from .hamiltonian import EnergyEstimate, PauliSum, QwcGroups, estimate_energy, expectation_exact, qwc_group
from .mitigation import ResponseMatrix, rem_energy
from .simulator import ShotBackend, ShotTable, derive_seed, prepare, rng_stream


def measure_groups(circuit: Circuit, backend: ShotBackend, groups: QwcGroups, shots: int, seed: int) -> list[ShotTable]:
    """One table per group, each from its own seed stream."""
    return [backend.run(circuit, g.basis, shots, derive_seed(seed, "group", g.basis)) for g in groups]


@dataclass
class ExactEnergy:
    spec: AnsatzSpec
    pauli_sum: PauliSum

    def __call__(self, params) -> float:
        return expectation_exact(prepare(self.spec.bind(params)), self.pauli_sum)


@dataclass
class ShotEnergy:
    """Sampled energy of the bound ansatz, ``shots`` per QWC group."""

    spec: AnsatzSpec
    pauli_sum: PauliSum
    backend: ShotBackend
    shots: int
    seed: int
    groups: QwcGroups | None = None
    calls: int = field(default=0, init=False)

    def __post_init__(self):
        if self.groups is None:
            self.groups = qwc_group(self.pauli_sum)

    def __call__(self, params) -> EnergyEstimate:
        call_seed = derive_seed(self.seed, "call", self.calls)
        self.calls += 1
        tables = measure_groups(self.spec.bind(params), self.backend, self.groups, self.shots, call_seed)
        return estimate_energy(tables, self.pauli_sum, self.groups)


@dataclass
class ZnePipeline:
    """``(folded circuit, fold) -> EnergyEstimate`` with optional REM."""

    pauli_sum: PauliSum
    backend: ShotBackend
    shots: int
    seed: int
    response: ResponseMatrix | None = None
    positive: bool = False
    groups: QwcGroups | None = None

    def __post_init__(self):
        if self.groups is None:
            self.groups = qwc_group(self.pauli_sum)

    def tables(self, circuit: Circuit, fold: int) -> list[ShotTable]:
        return measure_groups(circuit, self.backend, self.groups, self.shots, derive_seed(self.seed, "fold", fold))

    def __call__(self, circuit: Circuit, fold: int) -> EnergyEstimate:
        tables = self.tables(circuit, fold)
        if self.response is None:
            return estimate_energy(tables, self.pauli_sum, self.groups)
        est, _ = rem_energy(tables, self.response, self.pauli_sum, self.groups, positive=self.positive)
        return est


def random_params(num_params: int, seed: int) -> np.ndarray:
    return rng_stream(seed, "init").uniform(0.0, 2.0 * np.pi, num_params)
