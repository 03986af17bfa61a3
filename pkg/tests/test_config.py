from __future__ import annotations

import numpy as np
import pytest

from kagome_vqe.ansatz import STAR_ROUNDED, TRIANGLE_INIT_KYOTO
from kagome_vqe.config import (
    ExperimentConfig,
    aqngd_config,
    load_config,
    noise_model,
    parse_config,
    resolve_fragment,
    resolve_params,
)
from kagome_vqe.errors import ConfigError
from kagome_vqe.lattice import build_triangle


def test_defaults():
    cfg = parse_config({})
    assert cfg == ExperimentConfig()
    assert noise_model(cfg, 3) is None
    assert aqngd_config(cfg).beta == 0.5


def test_overrides_and_nesting():
    cfg = parse_config({"fragment": "star", "backend": {"kind": "noisy", "noise": {"p2": 0.02}}}, seed=5, output="x")
    assert cfg.seed == 5 and cfg.output == "x"
    assert cfg.backend.noise.p2 == 0.02 and cfg.backend.noise.p1 == 0.001
    assert noise_model(cfg, 12) is not None
    assert cfg.to_dict()["backend"]["noise"]["p2"] == 0.02


@pytest.mark.parametrize(
    "data",
    [
        {"fragmnt": "star"},
        {"backend": {"kind": "gpu"}},
        {"backend": {"shots": "many"}},
        {"backend": {"shots": 1}},
        {"optimizer": {"kind": "adam"}},
        {"optimizer": {"alpha": 2.0}},
        {"metric": {"draws": 0}},
        {"mitigation": {"folds": [1, 2, 3]}},
        {"mitigation": {"folds": [1]}},
        {"mitigation": {"partitions": [[0, 1]]}},
        {"mitigation": {"rem": "yes"}},
        {"structure_factor": {"source": "hardware"}},
        {"structure_factor": {"resolution": 1}},
        {"params": "nonexistent"},
        {"params": [0.1, 0.2]},
        {"fragment": "/no/such/file.txt"},
        {"seed": -1},
        [1, 2],
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_params_resolution():
    tri = parse_config({"params": "kyoto_init"})
    assert np.allclose(resolve_params(tri, "triangle", 3), TRIANGLE_INIT_KYOTO)
    star = parse_config({"fragment": "star", "params": "rounded"})
    assert np.allclose(resolve_params(star, "star", 12), STAR_ROUNDED)
    explicit = parse_config({"params": [0.0, 1.0, 2.0]})
    assert resolve_params(explicit, "triangle", 3).tolist() == [0.0, 1.0, 2.0]
    rand = parse_config({}, seed=3)
    assert np.array_equal(resolve_params(rand, "triangle", 3), resolve_params(rand, "triangle", 3))


def test_fragment_file(tmp_path):
    path = tmp_path / "tri.txt"
    path.write_text(build_triangle().to_text())
    cfg = parse_config({"fragment": str(path)})
    assert resolve_fragment(cfg).num_sites == 3
    bad = tmp_path / "bad.txt"
    bad.write_text("this is not a fragment\n")
    with pytest.raises(ConfigError):
        parse_config({"fragment": str(bad)})


def test_load_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("fragment: star\noptimizer:\n  max_iters: 7\n")
    assert load_config(path).optimizer.max_iters == 7
    (tmp_path / "broken.yaml").write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.yaml")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
