"""Command-line experiment runner.

Every subcommand reads a YAML config, validates it completely, computes all
of its artifacts in memory and only then writes them, together with a
``manifest.yaml`` holding the resolved config and seed. A run that fails
validation therefore leaves no files behind.

Exit codes: 0 success, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from . import __version__
from .ansatz import AnsatzSpec, ansatz_for, fubini_study_full_numeric
from .config import (
    ExperimentConfig,
    aqngd_config,
    load_config,
    noise_model,
    resolve_fragment,
    resolve_params,
    spsa_gains,
)
from .errors import ConfigError, KagomeVQEError
from .hamiltonian import estimate_energy, exact_spectrum, expectation_exact, heisenberg_from_lattice, qwc_group
from .lattice import LatticeFragment, momentum_grid
from .mitigation import (
    apply_rem,
    bpr_extrapolate,
    calibrate,
    extrapolations_csv,
    flag_undershoot,
    polyfit_extrapolate,
    rem_energy,
    zne_run,
)
from .observables import (
    correlations_exact,
    correlations_from_samples,
    fidelity,
    ground_correlations,
    similarity,
    structure_factor,
)
from .optim import DIVERGED, aqngd_run, spsa_run
from .pipeline import ExactEnergy, ShotEnergy, ZnePipeline
from .simulator import ShotBackend, derive_seed, prepare

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SCHEMA_VERSION = 1
UNDERSHOOT_SIGMAS = 2.0


class NumericFailure(KagomeVQEError):
    """A run produced non-finite numbers; ``outputs`` holds what was computed."""

    def __init__(self, message: str, outputs: dict[str, str]):
        super().__init__(message)
        self.outputs = outputs


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def _kv_csv(rows: list[tuple[str, object]]) -> str:
    body = "".join(f"{k},{_fmt(v) if isinstance(v, float) else v}\n" for k, v in rows)
    return "key,value\n" + body


def _ansatz(frag: LatticeFragment) -> AnsatzSpec:
    if frag.name not in ("triangle", "star"):
        raise ConfigError(f"no ansatz is defined for fragment {frag.name!r}; use triangle or star")
    return ansatz_for(frag.name)


def _backend(cfg: ExperimentConfig, n: int) -> ShotBackend:
    return ShotBackend(noise_model(cfg, n), cfg.backend.trajectories)


def _grid(cfg: ExperimentConfig):
    return momentum_grid(cfg.structure_factor.resolution, cfg.structure_factor.extent)


# -- subcommands ------------------------------------------------------------


def cmd_ed(cfg: ExperimentConfig) -> dict[str, str]:
    frag = resolve_fragment(cfg)
    spec = exact_spectrum(frag)
    corr = ground_correlations(spec)
    sf = structure_factor(corr, frag, _grid(cfg))
    summary = [
        ("fragment", frag.name),
        ("num_sites", frag.num_sites),
        ("num_edges", len(frag.edges)),
        ("ground_energy", spec.ground_energy),
        ("degeneracy", spec.degeneracy),
        ("seed", cfg.seed),
    ]
    return {
        "spectrum.csv": spec.to_csv(),
        "ground.csv": _kv_csv(summary),
        "correlations.csv": corr.to_csv(),
        "structure_factor.csv": sf.to_csv(),
    }


def _energy_function(cfg: ExperimentConfig, spec: AnsatzSpec, h) -> Callable:
    if cfg.backend.kind == "exact":
        return ExactEnergy(spec, h)
    shot = ShotEnergy(spec, h, _backend(cfg, spec.num_qubits), cfg.backend.shots, derive_seed(cfg.seed, "vqe"))
    return lambda p: shot(p).value


def cmd_vqe(cfg: ExperimentConfig) -> dict[str, str]:
    frag = resolve_fragment(cfg)
    spec = _ansatz(frag)
    h = heisenberg_from_lattice(frag)
    theta0 = resolve_params(cfg, frag.name, spec.num_params)
    energy = _energy_function(cfg, spec, h)
    if cfg.optimizer.kind == "aqngd":
        trace = aqngd_run(energy, None, None, theta0, aqngd_config(cfg))
    else:
        trace = spsa_run(energy, theta0, cfg.optimizer.iters, spsa_gains(cfg), derive_seed(cfg.seed, "spsa"))
    final = trace.final_params
    ground = exact_spectrum(frag)
    summary = [
        ("method", trace.method),
        ("status", trace.status),
        ("iterations", trace.iterations),
        ("evaluations", trace.evaluations),
        ("final_energy", float(trace.best_energy)),
        ("ground_energy", ground.ground_energy),
        ("seed", cfg.seed),
    ]
    if trace.status != DIVERGED and np.all(np.isfinite(final)):
        state = prepare(spec.bind(final))
        summary.append(("final_energy_exact", expectation_exact(state, h)))
        if cfg.backend.kind == "exact":
            summary.append(("fidelity", fidelity(state, ground.ground_basis)))
    params_csv = "index,value\n" + "".join(f"{k},{_fmt(v)}\n" for k, v in enumerate(final))
    outputs = {"trace.csv": trace.to_csv(), "params.csv": params_csv, "summary.csv": _kv_csv(summary)}
    if trace.status == DIVERGED:
        raise NumericFailure("optimization diverged: non-finite energy", outputs)
    return outputs


def cmd_mitigate(cfg: ExperimentConfig) -> dict[str, str]:
    frag = resolve_fragment(cfg)
    spec = _ansatz(frag)
    h = heisenberg_from_lattice(frag)
    groups = qwc_group(h)
    params = resolve_params(cfg, frag.name, spec.num_params)
    circuit = spec.bind(params)
    backend = _backend(cfg, spec.num_qubits)
    shots = cfg.backend.shots
    m = cfg.mitigation
    ground = exact_spectrum(frag).ground_energy
    exact = expectation_exact(prepare(circuit), h)

    raw_pipe = ZnePipeline(h, backend, shots, derive_seed(cfg.seed, "zne"), groups=groups)
    tables = raw_pipe.tables(circuit, 1)
    raw = estimate_energy(tables, h, groups)
    partitions = m.partitions or [[q] for q in range(spec.num_qubits)]
    response = calibrate(backend, partitions, m.calibration_shots, derive_seed(cfg.seed, "calibration"))
    rem, _ = rem_energy(tables, response, h, groups)
    rem_pos, _ = rem_energy(tables, response, h, groups, positive=True)

    series = zne_run(circuit, raw_pipe, m.folds)
    rem_pipe = ZnePipeline(h, backend, shots, derive_seed(cfg.seed, "zne"), response=response, groups=groups)
    rem_series = zne_run(circuit, rem_pipe, m.folds)
    deg1 = bpr_extrapolate(series, 1, m.prior_std)
    deg2 = bpr_extrapolate(series, min(2, len(series) - 1), m.prior_std)
    rem_deg2 = bpr_extrapolate(rem_series, min(2, len(rem_series) - 1), m.prior_std)

    rows = [
        ("Unmitigated", raw.value, raw.stderr),
        ("REM", rem.value, rem.stderr),
        ("REM+Positivity", rem_pos.value, rem_pos.stderr),
        ("ZNE deg1", deg1.mean, deg1.std),
        ("ZNE deg2", deg2.mean, deg2.std),
        ("Exact", exact, 0.0),
        ("Ground", ground, 0.0),
    ]
    values = [v for _, v, s in rows] + [rem_deg2.mean]
    table = "method,value,stderr,below_ground\n" + "".join(
        f"{name},{_fmt(v)},{_fmt(s)},{int(flag_undershoot(v, ground, s, UNDERSHOOT_SIGMAS))}\n"
        for name, v, s in rows
    )
    extrap = extrapolations_csv(
        [
            ("ZNE poly deg1", polyfit_extrapolate(series, 1), float("nan")),
            ("ZNE poly deg2", polyfit_extrapolate(series, min(2, len(series) - 1)), float("nan")),
            ("ZNE BPR deg1", deg1.mean, deg1.std),
            ("ZNE BPR deg2", deg2.mean, deg2.std),
            ("REM+ZNE BPR deg2", rem_deg2.mean, rem_deg2.std),
        ]
    )
    outputs = {
        "table.csv": table,
        "zne.csv": series.to_csv(),
        "zne_rem.csv": rem_series.to_csv(),
        "extrapolations.csv": extrap,
    }
    if not np.all(np.isfinite(values)):
        raise NumericFailure("mitigation produced non-finite energies", outputs)
    return outputs


def cmd_metric(cfg: ExperimentConfig) -> dict[str, str]:
    frag = resolve_fragment(cfg)
    spec = _ansatz(frag)
    rng = np.random.default_rng(derive_seed(cfg.seed, "metric"))
    draws = rng.uniform(0.0, 2.0 * np.pi, size=(cfg.metric.draws, spec.num_params))
    devs = []
    first = None
    for theta in draws:
        g = fubini_study_full_numeric(spec, theta)
        first = g if first is None else first
        devs.append(g.deviation())
    devs = np.array(devs)
    per_draw = "draw,deviation\n" + "".join(f"{k},{_fmt(d)}\n" for k, d in enumerate(devs))
    summary = [
        ("fragment", frag.name),
        ("draws", len(devs)),
        ("max_deviation", float(devs.max())),
        ("seed", cfg.seed),
    ]
    outputs = {"metric.csv": per_draw, "metric_first_draw.csv": first.to_csv(), "summary.csv": _kv_csv(summary)}
    if not np.all(np.isfinite(devs)):
        raise NumericFailure("metric has non-finite entries", outputs)
    return outputs


def cmd_structure_factor(cfg: ExperimentConfig) -> dict[str, str]:
    frag = resolve_fragment(cfg)
    grid = _grid(cfg)
    source = cfg.structure_factor.source
    summary = [("fragment", frag.name), ("source", source), ("seed", cfg.seed)]
    if source == "ground":
        corr = ground_correlations(exact_spectrum(frag))
    else:
        spec = _ansatz(frag)
        circuit = spec.bind(resolve_params(cfg, frag.name, spec.num_params))
        exact_corr = correlations_exact(prepare(circuit))
        if source == "exact":
            corr = exact_corr
        else:
            n = spec.num_qubits
            backend = _backend(cfg, n)
            bases = [letter * n for letter in "XYZ"]
            tables = [backend.run(circuit, b, cfg.backend.shots, derive_seed(cfg.seed, "sf", b)) for b in bases]
            corr = correlations_from_samples(tables)
            reference = structure_factor(exact_corr, frag, grid)
            pearson, mse = similarity(structure_factor(corr, frag, grid), reference)
            summary += [("pearson", pearson), ("mse", mse)]
            if cfg.mitigation.rem:
                partitions = cfg.mitigation.partitions or [[q] for q in range(n)]
                response = calibrate(
                    backend, partitions, cfg.mitigation.calibration_shots, derive_seed(cfg.seed, "calibration")
                )
                rem_corr = correlations_from_samples([apply_rem(t, response) for t in tables])
                rem_map = structure_factor(rem_corr, frag, grid)
                pearson_rem, mse_rem = similarity(rem_map, reference)
                summary += [("pearson_rem", pearson_rem), ("mse_rem", mse_rem)]
    sf = structure_factor(corr, frag, grid)
    outputs = {"structure_factor.csv": sf.to_csv(), "correlations.csv": corr.to_csv(), "summary.csv": _kv_csv(summary)}
    if cfg.structure_factor.source == "sampled" and cfg.mitigation.rem:
        outputs["structure_factor_rem.csv"] = rem_map.to_csv()
    if not np.all(np.isfinite(sf.values)):
        raise NumericFailure("structure factor has non-finite entries", outputs)
    return outputs


COMMANDS: dict[str, Callable[[ExperimentConfig], dict[str, str]]] = {
    "ed": cmd_ed,
    "vqe": cmd_vqe,
    "mitigate": cmd_mitigate,
    "metric": cmd_metric,
    "structure-factor": cmd_structure_factor,
}


# -- entry point ------------------------------------------------------------


def write_outputs(out_dir: Path, command: str, cfg: ExperimentConfig, outputs: dict[str, str], status: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        (out_dir / name).write_text(text)
    manifest = {
        "command": command,
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "status": status,
        "outputs": sorted(outputs),
        "config": cfg.to_dict(),
    }
    (out_dir / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kagome-vqe", description="VQE workbench for kagome Heisenberg fragments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip() or None)
        p.add_argument("--config", help="YAML experiment config (defaults apply to missing keys)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (overrides the config)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config, seed=args.seed, output=args.out)
        outputs = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        write_outputs(Path(cfg.output), args.command, cfg, exc.outputs, "failed")
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KagomeVQEError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_outputs(Path(cfg.output), args.command, cfg, outputs, "ok")
    print(f"wrote {len(outputs) + 1} files to {cfg.output}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
