import json

import numpy as np
import pytest

from vfp.config import ConfigError, build_config, initial_field, load_config, parse_config
from vfp.grid import write_snapshot
from vfp.moments import compute_moments

MINIMAL = '{"grid": {"dim": 1, "nx": 32, "nv": 64, "vmax": 8}, "t_end": 1}'


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    g = cfg.grid
    assert cfg.solver.dt == pytest.approx(0.5 * g.dx / g.vmax)
    assert cfg.solver.reg is None
    assert cfg.initial["preset"] == "maxwellian"
    assert cfg.solver.picard.q == 6.0


def test_q_default_follows_dimension():
    cfg = parse_config('{"grid": {"dim": 2, "nx": 8, "nv": 16, "vmax": 6}, "t_end": 0.1}')
    assert cfg.solver.picard.q > 6.0


def test_odd_nv_rejected():
    with pytest.raises(ConfigError, match="nv must be even"):
        parse_config('{"grid": {"dim": 1, "nx": 32, "nv": 63, "vmax": 8}, "t_end": 1}')


def test_unknown_key_named():
    doc = json.loads(MINIMAL)
    doc["foo"] = 1
    with pytest.raises(ConfigError, match="'foo'"):
        build_config(doc)
    doc = json.loads(MINIMAL)
    doc["grid"]["bar"] = 2
    with pytest.raises(ConfigError, match="'bar'"):
        build_config(doc)


def test_parse_error_has_position():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config('{"grid": {"dim": 1,, "nx": 32}}')


@pytest.mark.parametrize("bad, needle", [
    ({"t_end": -1}, "t_end"),
    ({"dt": 0}, "dt"),
    ({"reg": {"eps": 2.0, "delta": 0.1}}, "reg"),
    ({"initial": {"preset": "nope"}}, "preset"),
    ({"initial": {"preset": "bimodal", "T": -1}}, "T"),
    ({"particles": {"n_p": 0}}, "n_p"),
    ({"sweep": {"eps_list": [0.5, 1.5]}}, "eps_list"),
    ({"seed": -3}, "seed"),
])
def test_validation_names_field(bad, needle):
    doc = json.loads(MINIMAL)
    doc.update(bad)
    with pytest.raises(ConfigError, match=needle):
        build_config(doc)


def test_vmax_default_tracks_temperature():
    cfg = build_config({"grid": {"nx": 16, "nv": 64}, "t_end": 1,
                        "initial": {"preset": "maxwellian", "T": 4.0}})
    assert cfg.grid.vmax == pytest.approx(16.0)


def test_echo_round_trip():
    cfg = parse_config(MINIMAL)
    again = parse_config(cfg.to_json())
    assert again.to_json() == cfg.to_json()
    assert cfg.with_seed(7).seed == 7


@pytest.mark.parametrize("preset", ["maxwellian", "sin-perturbed-maxwellian", "bimodal", "mixture"])
def test_presets_have_unit_mass(preset):
    cfg = build_config({"grid": {"nx": 16, "nv": 128}, "t_end": 1, "initial": {"preset": preset}})
    f = initial_field(cfg)
    assert f.mass() == pytest.approx(1.0, rel=1e-6)
    assert np.all(f.values >= 0)


def test_file_preset(tmp_path):
    cfg = build_config({"grid": {"nx": 16, "nv": 64}, "t_end": 1,
                        "initial": {"preset": "bimodal"}})
    f = initial_field(cfg)
    path = tmp_path / "f0.txt"
    write_snapshot(path, f)
    cfg2 = build_config({"grid": {"nx": 16, "nv": 64}, "t_end": 1,
                         "initial": {"preset": "file", "path": str(path)}})
    assert np.array_equal(initial_field(cfg2).values, f.values)
    with pytest.raises(ConfigError, match="path"):
        build_config({"grid": {"nx": 16, "nv": 64}, "t_end": 1, "initial": {"preset": "file"}})


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(MINIMAL)
    assert load_config(p).grid.nx == 32
    m = compute_moments(initial_field(load_config(p)))
    np.testing.assert_allclose(m.T, 1.0, rtol=1e-6)
