import math

import numpy as np
import pytest

from kvwave import config as cfgmod
from kvwave import experiments as ex
from kvwave.spectral import assemble_generator, spectrum


def scenario(**sections):
    base = {
        "seed": 11,
        "grid": {"dim": 1, "lengths": [1.0], "counts": [79]},
        "geometry": {"preset": "interval_1d", "epsilon": 0.1},
        "nonlinearity": {"kind": "power", "p": 3},
        "solver": {"dt": 0.01, "t_end": 2.0, "record_stride": 5},
        "sweep": {"k_list": [1, 4, 16], "ensemble_size": 3},
    }
    for key, val in sections.items():
        base[key] = {**base.get(key, {}), **val} if isinstance(val, dict) else val
    return cfgmod.from_dict(base)


def test_k_sweep_table(tmp_path):
    res = ex.k_sweep(scenario())
    ks = [r["k"] for r in res.rows]
    assert ks == [1.0, 4.0, 16.0, math.inf]
    assert res.rows[-1]["dist_to_limit"] == 0.0
    assert res.info["dist_monotone"] and res.info["fric_monotone"]
    for r in res.rows[:-2]:
        assert 0.7 <= r["fric_scaling"] <= 1.3
    assert res.rows[-1]["fric_dissipation"] == 0.0
    d = res.write(tmp_path)
    assert sorted(p.name for p in d.iterdir()) == [f"run_{i}.csv" for i in range(4)] + ["summary.csv"]


def test_k_sweep_without_friction_is_k_independent():
    res = ex.k_sweep(scenario(geometry={"b0": 0.0}), tie_truncation=False)
    assert max(r["dist_to_limit"] for r in res.rows) < 1e-12
    assert all(r["fric_dissipation"] == 0.0 for r in res.rows)


def test_k_sweep_rejects_bad_lists():
    with pytest.raises(ex.ExperimentError):
        ex.k_sweep(scenario(), k_list=[])
    with pytest.raises(ex.ExperimentError):
        ex.k_sweep(scenario(), k_list=[4, 1])


def test_k_sweep_with_explicit_infinity():
    res = ex.k_sweep(scenario(), k_list=[1, 4, 16, math.inf])
    assert len(res.trajectories) == 4


def test_decay_refuses_undamped():
    with pytest.raises(ex.ExperimentError, match="undamped configuration"):
        ex.decay_experiment(scenario(geometry={"preset": "undamped"}))


def test_single_datum_decay_matches_spectrum():
    cfg = scenario(geometry={"preset": "uniform", "a0": 1.0, "b0": 0.0},
                   nonlinearity={"kind": "zero"},
                   solver={"dt": 0.005, "t_end": 10.0, "record_stride": 10})
    res = ex.decay_experiment(cfg, ensemble_size=1)
    sc = cfgmod.build(cfg)
    ab = spectrum(assemble_generator(sc.op)).abscissa
    assert res.rows[0]["lam0"] == pytest.approx(2 * abs(ab), rel=0.1)


def test_decay_rows_and_prediction():
    res = ex.decay_experiment(scenario(solver={"t_end": 4.0}, analysis={"floor": 1e-4}))
    assert len(res.rows) == 3
    assert len({r["seed"] for r in res.rows}) == 3
    for r in res.rows:
        assert r["E0"] == pytest.approx(0.5, rel=0.01)
        assert r["obs_ratio"] >= 1.0
        assert r["obs_crosscheck_rel"] < 1e-8
    assert res.info["C_est"] == max(r["obs_ratio"] for r in res.rows)
    assert res.info["lam0_pred"] == pytest.approx(
        math.log1p(1 / res.info["C_est"]) / res.info["horizon"])


def test_decay_horizon_beyond_run():
    with pytest.raises(ex.ExperimentError):
        ex.decay_experiment(scenario(analysis={"obs_horizon": 50.0}))


def test_nonlinear_vs_linear():
    res = ex.nonlinear_vs_linear(scenario(initial={"norm": 4.0}))
    lin, nonlin = res.rows
    assert lin["case"] == "zero" and nonlin["case"] == "power"
    assert lin["min_nl_potential"] == 0.0
    assert np.all(res.trajectories[1].nl_potential >= 0)
    for r in res.rows:
        assert r["max_increase_rel"] <= 1e-12
        assert r["identity_residual_rel"] < 1e-8 * 2.0


def test_nonlinear_vs_linear_zero_data():
    res = ex.nonlinear_vs_linear(scenario(initial={"kind": "zero"}))
    a, b = res.trajectories
    assert np.all(a.E == 0) and np.all(b.E == 0)


def test_param_sweep():
    res = ex.param_sweep(scenario(), "geometry.a0", [0.5, 1.0, 2.0])
    assert [r["geometry.a0"] for r in res.rows] == [0.5, 1.0, 2.0]
    assert res.name == "a0_sweep"
    with pytest.raises(ex.ExperimentError):
        ex.param_sweep(scenario(), "geometry.a0", [])


def test_ensemble_seeds_deterministic():
    assert ex.ensemble_seeds(5, 4) == ex.ensemble_seeds(5, 4)
    assert len(set(ex.ensemble_seeds(5, 4))) == 4
    assert ex.ensemble_seeds(5, 2) != ex.ensemble_seeds(6, 2)


def test_rerun_is_byte_identical(tmp_path):
    cfg = scenario()
    a = ex.decay_experiment(cfg).write(tmp_path / "a")
    b = ex.decay_experiment(cfg).write(tmp_path / "b")
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()
