"""
Command line front end.

    kvwave run       --config scenario.yaml [--out DIR] [--seed N] [--override key=value ...]
    kvwave sweep     --config scenario.yaml --axis {k_aux,ramp,geometry,ensemble,nonlinearity}
    kvwave spectrum  --config scenario.yaml
    kvwave fit       RUN_DIR_OR_CSV [--out DIR]
    kvwave plot      RUN_DIR [--out DIR]

Exit codes: 0 success, 1 invalid input, 2 solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import experiments as ex
from .analysis import AnalysisError, fit_decay, identity_residual
from .io import (TrajectoryTable, is_spectrum_csv, is_trajectory_csv, read_table, write_dicts,
                 write_spectrum, write_trajectory)
from .solver import SolverError, run
from .spectral import SpectrumError, assemble_generator, match_branches, spectrum, \
    undamped_frequencies

log = logging.getLogger("kvwave")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2
AXES = ("k_aux", "ramp", "geometry", "ensemble", "nonlinearity")


def _error(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load(args) -> cfgmod.ScenarioConfig:
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"seed={int(args.seed)}")
    if args.out is not None:
        overrides.append(f"output={args.out!s}")
    return cfgmod.resolve(cfgmod.load(args.config, overrides))


def _write_resolved(cfg: cfgmod.ScenarioConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "resolved_config.yaml"
    path.write_text(cfg.dump())
    return path


def cmd_run(args) -> int:
    cfg = _load(args)
    sc = cfgmod.build(cfg)
    _write_resolved(sc.config)
    u0, v0 = sc.initial()
    traj = run(sc.grid, sc.op, sc.nl, u0, v0, sc.solver)
    out = Path(sc.config.output)
    write_trajectory(out / "trajectory.csv", traj)
    m, _ = identity_residual(traj)
    E0 = float(traj.E[0])
    row = {"E0": E0, "E_final": float(traj.E[-1]), "max_identity_residual": m,
           "max_identity_residual_rel": m / E0 if E0 > 0 else m,
           "newton_iterations": traj.newton_iterations}
    ana = sc.config.analysis
    try:
        fit = fit_decay(traj, window=ana.fit_window, floor=ana.floor * E0)
        row.update(lam0=fit.lam0, C=fit.C, r2=fit.r2)
    except AnalysisError as exc:
        row.update(lam0=None, C=None, r2=None, fit_error=str(exc))
    write_dicts(out / "summary.csv", [row])
    print(f"final E = {row['E_final']:.6e}, lambda0 = {row['lam0']}, "
          f"max identity residual = {m:.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    axis = args.axis
    if axis not in AXES:
        _error(f"unknown sweep axis {axis!r}; expected one of {AXES}")
        return EXIT_INVALID
    cfg = _load(args)
    sw = cfg.sweep
    if axis == "k_aux":
        if not sw.k_list:
            _error("sweep.k_list is empty")
            return EXIT_INVALID
        result = ex.k_sweep(cfg)
    elif axis == "ramp":
        if cfg.geometry.preset == "indicator_1d":
            _error("indicator_1d fixes the ramp at 0; sweep interval_1d with ramp values instead")
            return EXIT_INVALID
        if not sw.values:
            _error("sweep.values is empty")
            return EXIT_INVALID
        result = ex.param_sweep(cfg, "geometry.ramp", sw.values, "ramp_sweep")
    elif axis == "geometry":
        if not sw.param or not sw.values:
            _error("geometry sweep needs sweep.param and a nonempty sweep.values")
            return EXIT_INVALID
        result = ex.param_sweep(cfg, f"geometry.{sw.param}", sw.values, f"{sw.param}_sweep")
    elif axis == "ensemble":
        if sw.ensemble_size < 1:
            _error("sweep.ensemble_size must be at least 1")
            return EXIT_INVALID
        result = ex.decay_experiment(cfg)
    else:
        result = ex.nonlinear_vs_linear(cfg)
    _write_resolved(cfg)
    d = result.write(cfg.output)
    print(f"{result.name}: {len(result.trajectories)} runs written to {d}")
    for key, val in result.info.items():
        print(f"  {key} = {val}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    sc = cfgmod.build(cfg)
    _write_resolved(sc.config)
    G = assemble_generator(sc.op, sc.nl, sc.solver.k_aux, allow_large=args.allow_large)
    rep = spectrum(G)
    if sc.grid.dim == 1:
        m = min(10, int(np.count_nonzero(rep.eigenvalues.imag > 0)))
        if m:
            match_branches(rep, m, "ordered", undamped_frequencies(sc.grid, m))
    out = Path(sc.config.output)
    write_spectrum(out / "spectrum.csv", rep)
    write_dicts(out / "spectrum_summary.csv",
                [{"n_eigenvalues": rep.eigenvalues.size, "abscissa": rep.abscissa}])
    print(f"spectral abscissa = {rep.abscissa:.6e} ({rep.eigenvalues.size} eigenvalues)")
    return EXIT_OK


def _csvs(path: Path) -> list[Path]:
    if path.is_file():
        return [path]
    return sorted(p for p in path.rglob("*.csv"))


def cmd_fit(args) -> int:
    path = Path(args.path)
    if not path.exists():
        _error(f"{path} does not exist")
        return EXIT_INVALID
    trajs = [p for p in _csvs(path) if is_trajectory_csv(p)]
    if not trajs:
        _error(f"no trajectory CSV under {path}")
        return EXIT_INVALID
    base = path if path.is_dir() else path.parent
    window, floor = None, 1e-12
    resolved = base / "resolved_config.yaml"
    if resolved.exists():
        cfg = cfgmod.load(resolved)
        window, floor = cfg.analysis.fit_window, cfg.analysis.floor
    rows = []
    for p in trajs:
        tab = TrajectoryTable(p)
        row = {"file": str(p.relative_to(base)) if p != path else p.name}
        try:
            fit = fit_decay(tab, window=window, floor=floor * tab.E[0])
            row.update(lam0=fit.lam0, C=fit.C, r2=fit.r2, rms=fit.rms, t_start=fit.window[0],
                       t_stop=fit.window[1], points=fit.n_points)
        except AnalysisError as exc:
            row.update(lam0=None, fit_error=str(exc))
        rows.append(row)
        print(f"{row['file']}: lambda0 = {row.get('lam0')}")
    out = Path(args.out) if args.out else base
    write_dicts(out / "fit.csv", rows)
    return EXIT_OK


def cmd_plot(args) -> int:
    path = Path(args.path)
    if not path.is_dir():
        _error(f"{path} is not a directory")
        return EXIT_INVALID
    files = _csvs(path)
    trajs = [p for p in files if is_trajectory_csv(p)]
    spectra = [p for p in files if is_spectrum_csv(p)]
    if not trajs and not spectra:
        _error(f"no trajectory or spectrum CSV under {path}")
        return EXIT_INVALID

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "kvwave"
    out = Path(args.out) if args.out else path
    written = []
    for p in trajs:
        tab = TrajectoryTable(p)
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        pos = tab.E > 0
        ax1.semilogy(tab.t[pos], tab.E[pos], label="E(t)")
        try:
            fit = fit_decay(tab)
            tt = np.linspace(*fit.window, 50)
            ax1.semilogy(tt, fit.C * tab.E[0] * np.exp(-fit.lam0 * tt), "--",
                         label=f"fit, rate {fit.lam0:.3g}")
        except AnalysisError:
            pass
        ax1.set_xlabel("t")
        ax1.set_ylabel("energy")
        ax1.legend()
        ax2.plot(tab.t, tab.cum_diss_kv, label="Kelvin-Voigt")
        ax2.plot(tab.t, tab.cum_diss_fric, label="friction")
        ax2.set_xlabel("t")
        ax2.set_ylabel("accumulated dissipation")
        ax2.legend()
        fig.tight_layout()
        target = out / p.relative_to(path).with_suffix(".svg")
        target.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(target, metadata={"Date": None})
        plt.close(fig)
        written.append(target)
    for p in spectra:
        header, data = read_table(p)
        fig, ax = plt.subplots(figsize=(6, 5))
        ax.scatter(data[:, 1], data[:, 2], s=6)
        ax.axvline(0.0, color="k", lw=0.5)
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        target = out / p.relative_to(path).with_suffix(".svg")
        target.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(target, metadata={"Date": None})
        plt.close(fig)
        written.append(target)
    print(f"wrote {len(written)} plot(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kvwave", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario(p):
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", help="output directory (overrides config.output)")
        p.add_argument("--seed", type=int, help="random seed (overrides config.seed)")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="dotted-path override, e.g. solver.dt=0.01 (repeatable)")

    p = sub.add_parser("run", help="single simulation")
    scenario(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="experiment sweeps")
    scenario(p)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)}")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="spectrum of the linearized generator")
    scenario(p)
    p.add_argument("--allow-large", action="store_true", help="lift the dense size guard")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("fit", help="fit exponential decay to trajectory CSVs")
    p.add_argument("path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plot", help="SVG plots for every CSV in a run directory")
    p.add_argument("path")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        for msg in exc.errors:
            _error(msg)
        return EXIT_INVALID
    except SolverError as exc:
        _error(f"solver failure at step {exc.step}: {exc}")
        return EXIT_SOLVER
    except (ex.ExperimentError, SpectrumError, ValueError) as exc:
        _error(str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
