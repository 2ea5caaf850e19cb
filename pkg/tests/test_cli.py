import subprocess
import sys

import pytest
import yaml

from kvwave.analysis import CSV_COLUMNS
from kvwave.cli import main

HEADER = "t,E,kinetic,potential,nl_potential,cum_diss_kv,cum_diss_fric,identity_residual"

MINIMAL = {
    "name": "minimal",
    "seed": 3,
    "grid": {"dim": 1, "lengths": [1.0], "counts": [59]},
    "solver": {"dt": 0.01, "t_end": 1.0, "k_aux": 10, "record_stride": 5},
}


@pytest.fixture
def config(tmp_path):
    def write(data=None, name="cfg.yaml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(MINIMAL if data is None else data))
        return path
    return write


def files_under(d):
    return sorted(str(p.relative_to(d)) for p in d.rglob("*") if p.is_file())


def test_header_matches_columns():
    assert ",".join(CSV_COLUMNS) == HEADER


def test_run_minimal(config, tmp_path, capsys):
    cfg = config()
    before = cfg.read_bytes()
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "trajectory.csv").read_text().splitlines()[0] == HEADER
    assert files_under(out) == ["resolved_config.yaml", "summary.csv", "trajectory.csv"]
    summary = (out / "summary.csv").read_text().splitlines()
    assert "E_final" in summary[0] and "lam0" in summary[0]
    assert "max_identity_residual" in summary[0]
    assert cfg.read_bytes() == before
    # the resolved config reproduces the run
    out2 = tmp_path / "out2"
    assert main(["run", "--config", str(out / "resolved_config.yaml"), "--out", str(out2)]) == 0
    assert (out / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()


def test_run_seed_flag(config, tmp_path):
    cfg = config()
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a != b
    assert yaml.safe_load((tmp_path / "b" / "resolved_config.yaml").read_text())["seed"] == 2


def test_run_p_range_violation(config, tmp_path, capsys):
    data = {**MINIMAL, "grid": {"dim": 3, "lengths": [1, 1, 1], "counts": [9, 9, 9]},
            "nonlinearity": {"kind": "power", "p": 5}}
    rc = main(["run", "--config", str(config(data)), "--out", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "p_range_decay" in err and "n/(n-2)" in err
    assert not (tmp_path / "o").exists()


def test_run_newton_divergence(config, tmp_path, capsys):
    rc = main(["run", "--config", str(config()), "--out", str(tmp_path / "o"),
               "--override", "solver.dt=0.5", "--override", "solver.t_end=0.5",
               "--override", "solver.k_aux=.inf", "--override", "solver.record_stride=1",
               "--override", "nonlinearity.p=7", "--override", "initial.norm=1000"])
    assert rc == 2
    assert "step 0" in capsys.readouterr().err


def test_run_bad_inputs(config, tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
    assert main(["run", "--config", str(config()), "--override", "solver.bogus=1"]) == 1
    assert main(["run", "--config", str(config()), "--override", "nonsense"]) == 1


def test_sweep_k_aux(config, tmp_path):
    out = tmp_path / "o"
    rc = main(["sweep", "--config", str(config()), "--out", str(out), "--axis", "k_aux",
               "--override", "sweep.k_list=[1, 4, 16, .inf]"])
    assert rc == 0
    d = out / "experiment" / "k_sweep"
    assert files_under(d) == ["run_0.csv", "run_1.csv", "run_2.csv", "run_3.csv", "summary.csv"]
    assert (out / "resolved_config.yaml").exists()


def test_sweep_empty_and_unknown(config, tmp_path):
    cfg = str(config())
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "a"), "--axis", "k_aux",
                 "--override", "sweep.k_list=[]"]) == 1
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--axis", "ramp"]) == 1
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "c"), "--axis", "nope"]) == 1
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "d"), "--axis", "ramp",
                 "--override", "geometry.preset=indicator_1d",
                 "--override", "sweep.values=[0.05]"]) == 1


def test_sweep_ramp_and_geometry(config, tmp_path):
    cfg = str(config())
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "r"), "--axis", "ramp",
                 "--override", "sweep.values=[0.0, 0.05]"]) == 0
    assert (tmp_path / "r" / "experiment" / "ramp_sweep" / "run_1.csv").exists()
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "g"), "--axis", "geometry",
                 "--override", "sweep.param=epsilon",
                 "--override", "sweep.values=[0.05, 0.1]"]) == 0
    assert (tmp_path / "g" / "experiment" / "epsilon_sweep" / "summary.csv").exists()


def test_sweep_nonlinearity(config, tmp_path):
    assert main(["sweep", "--config", str(config()), "--out", str(tmp_path / "n"),
                 "--axis", "nonlinearity"]) == 0
    assert (tmp_path / "n" / "experiment" / "nonlinear_vs_linear" / "run_1.csv").exists()


def test_sweep_ensemble_deterministic(config, tmp_path):
    cfg = str(config())
    for name in ("a", "b"):
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / name), "--axis",
                     "ensemble", "--seed", "42", "--override", "sweep.ensemble_size=3",
                     "--override", "solver.t_end=3.0"]) == 0
    a = tmp_path / "a" / "experiment" / "decay"
    b = tmp_path / "b" / "experiment" / "decay"
    assert files_under(a) == files_under(b)
    for f in files_under(a):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_sweep_ensemble_undamped(config, tmp_path, capsys):
    rc = main(["sweep", "--config", str(config()), "--out", str(tmp_path / "u"), "--axis",
               "ensemble", "--override", "geometry.preset=undamped"])
    assert rc == 1
    assert "undamped configuration" in capsys.readouterr().err


def test_spectrum_and_plot(config, tmp_path):
    out = tmp_path / "s"
    assert main(["spectrum", "--config", str(config()), "--out", str(out)]) == 0
    lines = (out / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "index,re,im,branch"
    assert len(lines) == 1 + 2 * 59
    assert main(["plot", str(out)]) == 0
    assert (out / "spectrum.svg").exists()


def test_plot_one_file_per_run(config, tmp_path):
    out = tmp_path / "o"
    main(["run", "--config", str(config()), "--out", str(out)])
    assert main(["plot", str(out)]) == 0
    svgs = [f for f in files_under(out) if f.endswith(".svg")]
    assert svgs == ["trajectory.svg"]
    assert (out / "trajectory.svg").read_text().lstrip().startswith("<?xml")


def test_plot_empty_dir(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["plot", str(tmp_path / "empty")]) == 1
    assert main(["plot", str(tmp_path / "nowhere")]) == 1


def test_fit_command(config, tmp_path):
    out = tmp_path / "o"
    main(["run", "--config", str(config()), "--out", str(out)])
    assert main(["fit", str(out)]) == 0
    rows = (out / "fit.csv").read_text().splitlines()
    assert rows[0].startswith("file,lam0")
    assert main(["fit", str(out / "trajectory.csv"), "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "fit.csv").exists()
    assert main(["fit", str(tmp_path / "nowhere")]) == 1


def test_module_entry_point(config, tmp_path):
    r = subprocess.run([sys.executable, "-m", "kvwave", "run", "--config", str(config()),
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "final E" in r.stdout
