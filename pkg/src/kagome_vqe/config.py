"""Experiment configuration: YAML mapping -> validated dataclasses.

Unknown keys are rejected so that typos fail loudly. Every value that
feeds a library object is validated by constructing that object here,
before any command starts writing output.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import ansatz as _ansatz
from .errors import ConfigError, KagomeVQEError
from .lattice import LatticeFragment, build_star, build_triangle, load_fragment
from .optim import AqngdConfig, SpsaGains
from .simulator import NoiseModel

PARAM_PRESETS = {
    "triangle": {
        "exact": _ansatz.TRIANGLE_EXACT,
        "kyoto_init": _ansatz.TRIANGLE_INIT_KYOTO,
        "oslo_init": _ansatz.TRIANGLE_INIT_OSLO,
        "kyoto_final": _ansatz.TRIANGLE_FINAL_KYOTO,
        "oslo_final": _ansatz.TRIANGLE_FINAL_OSLO,
    },
    "star": {"rounded": _ansatz.STAR_ROUNDED, "torino_final": _ansatz.STAR_FINAL_TORINO},
}


@dataclass
class NoiseConfig:
    p1: float = 0.001
    p2: float = 0.01
    readout_flip: float = 0.02


@dataclass
class BackendConfig:
    kind: str = "exact"
    shots: int = 10000
    trajectories: int | None = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)


@dataclass
class OptimizerConfig:
    kind: str = "aqngd"
    alpha: float = 0.01
    beta: float = 0.5
    k_max: int = 6
    pinv_tol: float = 1e-15
    converge_tol: float = 1e-4
    max_iters: int = 100
    iters: int = 200
    a: float = 0.2
    c: float = 0.1
    A: float = 10.0


@dataclass
class MitigationConfig:
    """``rem`` toggles readout mitigation of sampled structure factors; the
    ``mitigate`` command always reports every method side by side."""

    rem: bool = True
    calibration_shots: int = 10000
    partitions: list[list[int]] | None = None
    folds: list[int] = field(default_factory=lambda: [1, 3, 5])
    prior_std: float = 10.0


@dataclass
class MetricConfig:
    draws: int = 100


@dataclass
class StructureFactorConfig:
    resolution: int = 101
    extent: float = 1.0
    source: str = "exact"


@dataclass
class ExperimentConfig:
    fragment: str = "triangle"
    seed: int = 0
    params: Any = "random"
    backend: BackendConfig = field(default_factory=BackendConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    mitigation: MitigationConfig = field(default_factory=MitigationConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)
    structure_factor: StructureFactorConfig = field(default_factory=StructureFactorConfig)
    output: str = "out"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(value, hint, where: str):
    origin = typing.get_origin(hint)
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where)
    if hint is Any:
        return value
    if origin is typing.Union or str(origin) == "types.UnionType":
        args = typing.get_args(hint)
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(value, inner, where)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        (inner,) = typing.get_args(hint)
        return [_coerce(v, inner, f"{where}[{k}]") for k, v in enumerate(value)]
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {data!r}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {k: _coerce(v, hints[k], f"{where}.{k}" if where else k) for k, v in data.items()}
    return cls(**kwargs)


def parse_config(data: dict | None, seed: int | None = None, output: str | None = None) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data or {}, "")
    if seed is not None:
        cfg.seed = seed
    if output is not None:
        cfg.output = output
    validate(cfg)
    return cfg


def load_config(path: str | Path | None, seed: int | None = None, output: str | None = None) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return parse_config(data, seed, output)


def resolve_fragment(cfg: ExperimentConfig) -> LatticeFragment:
    if cfg.fragment == "triangle":
        return build_triangle()
    if cfg.fragment == "star":
        return build_star()
    try:
        return load_fragment(cfg.fragment)
    except KagomeVQEError as exc:
        raise ConfigError(f"fragment: {exc}") from None


def noise_model(cfg: ExperimentConfig, num_qubits: int) -> NoiseModel | None:
    if cfg.backend.kind != "noisy":
        return None
    n = cfg.backend.noise
    return NoiseModel.symmetric(num_qubits, p1=n.p1, p2=n.p2, flip=n.readout_flip)


def aqngd_config(cfg: ExperimentConfig) -> AqngdConfig:
    o = cfg.optimizer
    return AqngdConfig(o.alpha, o.beta, o.k_max, o.pinv_tol, o.converge_tol, o.max_iters)


def spsa_gains(cfg: ExperimentConfig) -> SpsaGains:
    o = cfg.optimizer
    return SpsaGains(a=o.a, c=o.c, A=o.A)


def resolve_params(cfg: ExperimentConfig, fragment_name: str, num_params: int) -> np.ndarray:
    from .pipeline import random_params

    p = cfg.params
    if isinstance(p, str):
        if p == "random":
            return random_params(num_params, cfg.seed)
        presets = PARAM_PRESETS.get(fragment_name, {})
        if p not in presets:
            raise ConfigError(f"params: unknown preset {p!r} for {fragment_name}; choose from {sorted(presets)} or 'random'")
        return np.array(presets[p], dtype=float)
    if isinstance(p, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p):
        if len(p) != num_params:
            raise ConfigError(f"params: expected {num_params} values, got {len(p)}")
        return np.array(p, dtype=float)
    raise ConfigError(f"params: expected a preset name or a list of numbers, got {p!r}")


def validate(cfg: ExperimentConfig) -> None:
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    if cfg.backend.kind not in ("exact", "shots", "noisy"):
        raise ConfigError(f"backend.kind must be exact, shots or noisy, got {cfg.backend.kind!r}")
    if cfg.backend.shots < 2:
        raise ConfigError("backend.shots must be >= 2")
    if cfg.backend.trajectories is not None and cfg.backend.trajectories < 1:
        raise ConfigError("backend.trajectories must be >= 1")
    if cfg.optimizer.kind not in ("aqngd", "spsa"):
        raise ConfigError(f"optimizer.kind must be aqngd or spsa, got {cfg.optimizer.kind!r}")
    if cfg.optimizer.iters < 1:
        raise ConfigError("optimizer.iters must be >= 1")
    if cfg.metric.draws < 1:
        raise ConfigError("metric.draws must be >= 1")
    if cfg.structure_factor.source not in ("exact", "ground", "sampled"):
        raise ConfigError("structure_factor.source must be exact, ground or sampled")
    if cfg.mitigation.calibration_shots < 100:
        raise ConfigError("mitigation.calibration_shots must be >= 100")
    folds = cfg.mitigation.folds
    if len(folds) < 2 or any(f < 1 or f % 2 == 0 for f in folds) or folds != sorted(set(folds)):
        raise ConfigError("mitigation.folds must be at least two increasing odd integers")
    n = cfg.backend.noise
    try:
        NoiseModel.symmetric(1, p1=n.p1, p2=n.p2, flip=n.readout_flip)
        aqngd_config(cfg)
        spsa_gains(cfg)
        from .lattice import momentum_grid

        momentum_grid(2, cfg.structure_factor.extent)
        if cfg.structure_factor.resolution < 2:
            raise ConfigError("structure_factor.resolution must be >= 2")
    except KagomeVQEError as exc:
        raise ConfigError(str(exc)) from None
    frag = resolve_fragment(cfg)
    if cfg.mitigation.partitions is not None:
        flat = sorted(q for p in cfg.mitigation.partitions for q in p)
        if flat != list(range(frag.num_sites)) or any(len(p) == 0 for p in cfg.mitigation.partitions):
            raise ConfigError("mitigation.partitions must be non-empty, disjoint and cover every qubit")
    if frag.name in PARAM_PRESETS:
        resolve_params(cfg, frag.name, _ansatz.ansatz_for(frag.name).num_params)
