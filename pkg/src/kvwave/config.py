"""
Scenario configuration: YAML in, validated dataclasses out, and the
construction of grid, coefficients, operator, nonlinearity and initial data.

Every optional field is resolved to a concrete value before a run, and the
resolved configuration is what gets written next to the results. Loading a
resolved file and resolving it again is a no-op.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import geometry as geo
from .nonlinear import Nonlinearity, validate_assumptions
from .solver import DiscreteOperator, SolverConfig, assemble, initial_data

GEOMETRY_PRESETS = geo.PRESETS + ("uniform", "undamped")


class ConfigError(ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class GridSpec:
    dim: int = 1
    lengths: list = field(default_factory=lambda: [1.0])
    counts: list = field(default_factory=lambda: [199])


@dataclass
class GeometrySpec:
    preset: str = "interval_1d"
    a0: float = 1.0
    b0: float = 1.0
    epsilon: float | None = None
    ramp: float | None = None
    interval: list | None = None
    shape: str = "disk"
    center: list | None = None
    radius: float | None = None
    lo: list | None = None
    hi: list | None = None
    cells: list | None = None
    strip_width: float | None = None
    rho_amp: float = 0.0
    kappa_amp: float = 0.0


@dataclass
class NonlinearSpec:
    kind: str = "power"
    p: float = 3.0
    k0: float | None = None
    truncation: float = math.inf
    gamma: float = 1.0


@dataclass
class SolverSpec:
    dt: float = 1e-3
    t_end: float = 5.0
    k_aux: float = math.inf
    newton_tol: float = 1e-10
    newton_maxiter: int = 25
    record_stride: int = 10


@dataclass
class AnalysisSpec:
    T0: float | None = None
    fit_window: list | None = None
    floor: float = 1e-12  # relative to E(0)
    obs_horizon: float | None = None


@dataclass
class InitialSpec:
    kind: str = "random_H1"
    seed: int | None = None
    norm: float | None = None  # random_H1 defaults to the unit sphere
    mode: list | None = None
    center: list | None = None
    width: float | None = None
    amplitude: float = 1.0
    modes: int = 12


@dataclass
class SweepSpec:
    k_list: list = field(default_factory=lambda: [1, 4, 16, 64, 256])
    tie_truncation: bool = True
    param: str | None = None
    values: list = field(default_factory=list)
    ensemble_size: int = 5


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    seed: int = 0
    output: str = "out"
    grid: GridSpec = field(default_factory=GridSpec)
    geometry: GeometrySpec = field(default_factory=GeometrySpec)
    nonlinearity: NonlinearSpec = field(default_factory=NonlinearSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def replace(self, **sections) -> "ScenarioConfig":
        return dataclasses.replace(self, **sections)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _build(cls, data, path, errors):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        errors.append(f"{path or 'config'}: expected a mapping")
        return cls()
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            errors.append(f"{path + '.' if path else ''}{key}: unknown key")
            continue
        sub = _SECTIONS.get(key) if cls is ScenarioConfig else None
        kwargs[key] = _build(sub, value, key, errors) if sub else value
    return cls(**kwargs)


_SECTIONS = {
    "grid": GridSpec,
    "geometry": GeometrySpec,
    "nonlinearity": NonlinearSpec,
    "solver": SolverSpec,
    "analysis": AnalysisSpec,
    "initial": InitialSpec,
    "sweep": SweepSpec,
}


def from_dict(data: dict | None) -> ScenarioConfig:
    errors: list[str] = []
    cfg = _build(ScenarioConfig, data or {}, "", errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    return key.strip().split("."), yaml.safe_load(raw)


def apply_overrides(data: dict, overrides) -> dict:
    data = dict(data or {})
    for text in overrides or ():
        path, value = parse_override(text)
        node = data
        for part in path[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {} if nxt is None else dict(nxt)
            else:
                nxt = dict(nxt)
            node[part] = nxt
            node = nxt
        node[path[-1]] = value
    return data


def load(path, overrides=None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return from_dict(apply_overrides(data or {}, overrides))


def loads(text: str) -> ScenarioConfig:
    return from_dict(yaml.safe_load(text) or {})


def _num(x):
    return _float(x) if x is not None else None


def _float(x) -> float:
    # YAML spellings such as ".inf" are accepted from overrides and Python dicts
    if isinstance(x, str):
        parsed = yaml.safe_load(x)
        x = parsed if isinstance(parsed, (int, float)) else x.strip().lower()
    return float(x)


def _is_multiple(x: float, step: float) -> bool:
    q = x / step
    return abs(q - round(q)) < 1e-9 * max(1.0, abs(q))


def resolve(cfg: ScenarioConfig) -> ScenarioConfig:
    """Fill defaults and validate; raises ConfigError listing every problem."""
    errors: list[str] = []
    g, geom, nls, sol, ana, ini, sw = (cfg.grid, cfg.geometry, cfg.nonlinearity, cfg.solver,
                                       cfg.analysis, cfg.initial, cfg.sweep)
    dim = int(g.dim)
    lengths = [float(x) for x in np.atleast_1d(g.lengths)]
    counts = [int(x) for x in np.atleast_1d(g.counts)]
    grid_ok = True
    try:
        grid = geo.build_grid(dim, lengths, counts)
    except geo.GeometryError as exc:
        errors.append(f"grid: {exc}")
        grid_ok = False
    gridspec = GridSpec(dim, lengths, counts)

    # nonlinearity (validated against the requested dimension even if the grid is unusable)
    nl_spec = NonlinearSpec(str(nls.kind), _float(nls.p), _num(nls.k0), _float(nls.truncation),
                            _float(nls.gamma))
    try:
        nl = make_nonlinearity(nl_spec)
        report = validate_assumptions(nl, max(dim, 1))
        for c in report.failures:
            at = "" if c.witness is None else f" at s={c.witness:g}"
            errors.append(f"nonlinearity: assumption {c.name} violated{at}: {c.detail}")
        if nl_spec.k0 is None:
            nl_spec.k0 = nl.growth_constant
    except ValueError as exc:
        errors.append(f"nonlinearity: {exc}")

    # geometry
    geom = dataclasses.replace(geom)
    if geom.preset not in GEOMETRY_PRESETS:
        errors.append(f"geometry.preset: unknown {geom.preset!r}; expected one of {GEOMETRY_PRESETS}")
    elif grid_ok:
        L = min(lengths)
        geom.a0 = float(geom.a0)
        geom.b0 = float(geom.b0)
        if geom.preset in geo.PRESETS:
            geom.epsilon = float(geom.epsilon) if geom.epsilon is not None else 0.1 * L
            if geom.preset == "indicator_1d":
                geom.ramp = 0.0
            else:
                geom.ramp = float(geom.ramp) if geom.ramp is not None else 0.5 * geom.epsilon
            if geom.preset in ("interval_1d", "indicator_1d"):
                geom.interval = [float(x) for x in (geom.interval or [0.4 * lengths[0], 0.6 * lengths[0]])]
            elif geom.preset == "annulus_2d":
                if geom.shape == "disk":
                    geom.center = [float(x) for x in (geom.center or [0.5 * x for x in lengths])]
                    geom.radius = float(geom.radius) if geom.radius is not None else 0.25 * L
                else:
                    geom.lo = [float(x) for x in (geom.lo or [0.25 * x for x in lengths])]
                    geom.hi = [float(x) for x in (geom.hi or [0.75 * x for x in lengths])]
            elif geom.preset == "mesh_2d":
                geom.cells = [int(x) for x in (geom.cells or [4, 4])]
                geom.strip_width = (float(geom.strip_width) if geom.strip_width is not None
                                    else 0.05 * L)
            try:
                geo.build_damping_preset(grid, geom.preset, geometry_params(geom))
            except geo.GeometryError as exc:
                errors.append(f"geometry: {exc}")
        elif geom.preset == "undamped":
            geom.a0 = 0.0
            geom.b0 = 0.0

    # solver
    sol = SolverSpec(_float(sol.dt), _float(sol.t_end), _float(sol.k_aux), _float(sol.newton_tol),
                     int(sol.newton_maxiter), int(sol.record_stride))
    try:
        sc = make_solver_config(sol)
        sc.n_steps
    except ValueError as exc:
        errors.append(f"solver: {exc}")

    # analysis
    ana = dataclasses.replace(ana)
    if grid_ok:
        ana.T0 = float(ana.T0) if ana.T0 is not None else geo.default_T0(grid)
    if ana.T0 is not None and not ana.T0 > 0:
        errors.append("analysis.T0 must be positive")
    win = list(ana.fit_window) if ana.fit_window is not None else [None, None]
    if len(win) != 2:
        errors.append("analysis.fit_window must have two entries")
        win = [None, None]
    if ana.T0 is not None:
        # skip the transient up to T0 unless that leaves less than half the run
        start = ana.T0 if ana.T0 <= 0.5 * sol.t_end else 0.0
        ana.fit_window = [float(win[0]) if win[0] is not None else start,
                          float(win[1]) if win[1] is not None else sol.t_end]
        rec = sol.dt * sol.record_stride
        if ana.obs_horizon is None and rec > 0:
            # first record time at or after T0
            ana.obs_horizon = float(round(rec * math.ceil(ana.T0 / rec - 1e-9), 12))
        ana.obs_horizon = float(ana.obs_horizon)
        if ana.obs_horizon > sol.t_end:
            pass  # only needed by the decay experiment, checked there
        elif sol.dt > 0 and sol.record_stride > 0 and not _is_multiple(ana.obs_horizon, rec):
            errors.append(f"analysis.obs_horizon={ana.obs_horizon:g} is not a multiple of the "
                          f"record interval dt*record_stride={rec:g}")
    ana.floor = float(ana.floor)

    # initial data
    ini = dataclasses.replace(ini)
    if ini.seed is None:
        ini.seed = int(cfg.seed)
    if ini.kind == "eigenmode" and ini.mode is None:
        ini.mode = [1] * dim
    if ini.kind == "gaussian_bump":
        ini.center = [float(x) for x in (ini.center or [0.5 * x for x in lengths])]
        ini.width = float(ini.width) if ini.width is not None else 0.1 * min(lengths)
    if ini.kind == "random_H1" and ini.norm is None:
        ini.norm = 1.0
    ini.norm = _num(ini.norm)
    ini.amplitude = float(ini.amplitude)
    ini.modes = int(ini.modes)
    if ini.kind not in ("eigenmode", "gaussian_bump", "random_H1", "zero"):
        errors.append(f"initial.kind: unknown {ini.kind!r}")

    sw = SweepSpec([_float(k) for k in sw.k_list], bool(sw.tie_truncation), sw.param,
                   list(sw.values), int(sw.ensemble_size))

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(str(cfg.name), int(cfg.seed), str(cfg.output), gridspec, geom, nl_spec,
                          sol, ana, ini, sw)


def geometry_params(geom: GeometrySpec) -> dict:
    p = {"a0": geom.a0, "b0": geom.b0, "epsilon": geom.epsilon, "ramp": geom.ramp,
         "rho_amp": geom.rho_amp, "kappa_amp": geom.kappa_amp}
    if geom.interval is not None:
        p["interval"] = tuple(geom.interval)
    p["shape"] = geom.shape
    for key in ("center", "lo", "hi", "cells"):
        if getattr(geom, key) is not None:
            p[key] = tuple(getattr(geom, key))
    if geom.radius is not None:
        p["radius"] = geom.radius
    if geom.strip_width is not None:
        p["strip_width"] = geom.strip_width
    return p


def make_nonlinearity(spec: NonlinearSpec) -> Nonlinearity:
    p = 1.0 if spec.kind == "zero" else float(spec.p)
    return Nonlinearity(spec.kind, p, spec.k0, float(spec.truncation), float(spec.gamma))


def make_solver_config(spec: SolverSpec, **changes) -> SolverConfig:
    sc = SolverConfig(spec.dt, spec.t_end, spec.k_aux, spec.newton_tol, spec.newton_maxiter,
                      spec.record_stride)
    return dataclasses.replace(sc, **changes) if changes else sc


@dataclass
class Scenario:
    config: ScenarioConfig
    grid: geo.Grid
    region: geo.RegionSpec | None
    coeffs: geo.CoefficientField
    op: DiscreteOperator
    nl: Nonlinearity
    solver: SolverConfig
    T0: float

    def initial(self, seed: int | None = None, norm: float | None = None):
        ini = self.config.initial
        params = {"seed": ini.seed if seed is None else seed,
                  "norm": ini.norm if norm is None else norm,
                  "amplitude": ini.amplitude, "modes": ini.modes}
        if ini.mode is not None:
            params["mode"] = ini.mode
        if ini.center is not None:
            params["center"] = ini.center
        if ini.width is not None:
            params["width"] = ini.width
        return initial_data(self.grid, ini.kind, params, self.op)


def build(cfg: ScenarioConfig) -> Scenario:
    cfg = resolve(cfg)
    grid = geo.build_grid(cfg.grid.dim, cfg.grid.lengths, cfg.grid.counts)
    geom = cfg.geometry
    region = None
    if geom.preset == "uniform":
        coeffs = geo.uniform_field(grid, geom.a0, geom.b0)
    elif geom.preset == "undamped":
        coeffs = geo.uniform_field(grid, 0.0, 0.0)
    else:
        region, coeffs = geo.build_damping_preset(grid, geom.preset, geometry_params(geom))
    op = assemble(grid, coeffs)
    return Scenario(cfg, grid, region, coeffs, op, make_nonlinearity(cfg.nonlinearity),
                    make_solver_config(cfg.solver), cfg.analysis.T0)
