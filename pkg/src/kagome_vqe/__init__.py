"""Variational ground-state workbench for the Heisenberg model on kagome fragments."""

from __future__ import annotations

__version__ = "0.1.0"

from .ansatz import AnsatzSpec, ansatz_for, star_ansatz, triangle_ansatz
from .circuit import Circuit, Gate
from .errors import ConfigError, InvalidArgument, InvalidState, KagomeVQEError, SizeLimit, UnsupportedGate
from .hamiltonian import PauliString, PauliSum, exact_spectrum, heisenberg_from_lattice, qwc_group
from .lattice import LatticeFragment, build_star, build_triangle, load_fragment
from .optim import AqngdConfig, aqngd_run, spsa_run
from .simulator import NoiseModel, ShotBackend, ShotTable, StateVector, prepare

__all__ = [
    "AnsatzSpec",
    "AqngdConfig",
    "Circuit",
    "ConfigError",
    "Gate",
    "InvalidArgument",
    "InvalidState",
    "KagomeVQEError",
    "LatticeFragment",
    "NoiseModel",
    "PauliString",
    "PauliSum",
    "ShotBackend",
    "ShotTable",
    "SizeLimit",
    "StateVector",
    "UnsupportedGate",
    "__version__",
    "ansatz_for",
    "aqngd_run",
    "build_star",
    "build_triangle",
    "exact_spectrum",
    "heisenberg_from_lattice",
    "load_fragment",
    "prepare",
    "qwc_group",
    "spsa_run",
    "star_ansatz",
    "triangle_ansatz",
]
