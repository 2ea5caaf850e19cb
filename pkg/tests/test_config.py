import math

import pytest

from kvwave import config as cfgmod

EXAMPLES = [
    {},
    {"grid": {"dim": 2, "lengths": [1.0, 1.0], "counts": [19, 19]},
     "geometry": {"preset": "annulus_2d", "shape": "rectangle"}},
    {"grid": {"dim": 2, "lengths": [1.0, 1.0], "counts": [39, 39]},
     "geometry": {"preset": "mesh_2d", "epsilon": 0.02}},
    {"geometry": {"preset": "indicator_1d", "interval": [0.3, 0.7]},
     "nonlinearity": {"kind": "cubic_like", "gamma": 2.0, "truncation": 5.0},
     "solver": {"k_aux": 10}, "initial": {"kind": "eigenmode"}},
    {"geometry": {"preset": "uniform", "a0": 0.3}, "initial": {"kind": "gaussian_bump"},
     "sweep": {"k_list": [1, 2, ".inf"]}},
]


@pytest.mark.parametrize("data", EXAMPLES)
def test_resolved_config_round_trip(data, tmp_path):
    first = cfgmod.resolve(cfgmod.from_dict(data))
    path = tmp_path / "resolved.yaml"
    path.write_text(first.dump())
    second = cfgmod.resolve(cfgmod.load(path))
    assert second == first
    assert second.dump() == first.dump()


def test_defaults_are_filled():
    cfg = cfgmod.resolve(cfgmod.from_dict({}))
    assert cfg.analysis.T0 == 2.0
    assert cfg.geometry.epsilon == pytest.approx(0.1)
    assert cfg.geometry.ramp == pytest.approx(0.05)
    assert cfg.geometry.interval == pytest.approx([0.4, 0.6])
    assert cfg.initial.seed == cfg.seed
    assert cfg.initial.norm == 1.0
    assert cfg.nonlinearity.k0 is not None


def test_unknown_key_rejected():
    with pytest.raises(cfgmod.ConfigError) as info:
        cfgmod.from_dict({"solver": {"dtt": 0.1}, "colour": "red"})
    assert len(info.value.errors) == 2


def test_all_errors_collected():
    with pytest.raises(cfgmod.ConfigError) as info:
        cfgmod.resolve(cfgmod.from_dict({
            "grid": {"dim": 3, "lengths": [1, 1, 1], "counts": [9, 9, 9]},
            "nonlinearity": {"p": 5},
            "solver": {"dt": 0.3, "t_end": 1.0},
        }))
    text = " ".join(info.value.errors)
    assert "grid" in text and "p_range_decay" in text and "solver" in text


def test_overrides():
    data = cfgmod.apply_overrides({"solver": {"dt": 0.1}},
                                  ["solver.dt=0.01", "grid.counts=[49]", "name=x"])
    assert data == {"solver": {"dt": 0.01}, "grid": {"counts": [49]}, "name": "x"}
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_override("no_equals_sign")


def test_load_errors(tmp_path):
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(bad)
    bad.write_text("grid: {dim: [\n")
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load(bad)


def test_horizon_alignment():
    with pytest.raises(cfgmod.ConfigError, match="obs_horizon"):
        cfgmod.resolve(cfgmod.from_dict({"solver": {"dt": 0.01, "record_stride": 30},
                                         "analysis": {"obs_horizon": 1.0}}))


def test_build_scenario():
    sc = cfgmod.build(cfgmod.from_dict({"solver": {"k_aux": 4}}))
    assert sc.solver.friction_scale == 0.25
    assert sc.grid.size == 199
    u0, v0 = sc.initial()
    assert u0.shape == (199,)
    assert math.isinf(sc.nl.k)


def test_shipped_configs_resolve():
    from pathlib import Path

    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))
    assert paths
    for p in paths:
        cfg = cfgmod.resolve(cfgmod.load(p))
        assert cfg.name == p.stem
