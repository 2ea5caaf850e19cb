"""
Energies, the discrete energy identity, observability ratios and decay fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CSV_COLUMNS = ("t", "E", "kinetic", "potential", "nl_potential",
               "cum_diss_kv", "cum_diss_fric", "identity_residual")


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    kinetic: float
    potential: float
    nl_potential: float
    cum_diss_kv: float = 0.0
    cum_diss_fric: float = 0.0

    @property
    def E(self) -> float:
        return self.kinetic + self.potential + self.nl_potential


def energy(state, op, nl, grid=None, cum_diss_kv: float = 0.0, cum_diss_fric: float = 0.0) -> EnergyRecord:
    """Discrete energy of a state.

    The gradient part uses the same bilinear form ``<L_h u, u>`` that the
    time stepper dissipates; the nonlinear part is weighted by the density so
    that it matches the density-weighted source term.
    """
    vol = op.grid.cell_volume if grid is None else grid.cell_volume
    u, v = state.u, state.v
    rho = op.rho
    kinetic = 0.5 * vol * float(np.dot(rho * v, v))
    potential = 0.5 * vol * float(np.dot(op.L_h @ u, u))
    nl_potential = 0.0 if nl.is_zero else vol * float(np.dot(rho, nl.F(u)))
    return EnergyRecord(state.t, kinetic, potential, nl_potential, cum_diss_kv, cum_diss_fric)


def phase_norm(op, u, v) -> float:
    """Discrete H^1_0 x L^2 norm built from the energy bilinear form."""
    vol = op.grid.cell_volume
    return math.sqrt(vol * (float(np.dot(op.L_h @ u, u)) + float(np.dot(op.rho * v, v))))


def identity_residual(traj) -> tuple[float, np.ndarray]:
    """r(t) = E(t) - E(0) + accumulated dissipation; returns (max |r|, r)."""
    r = traj.E - traj.E[0] + traj.cum_diss_kv + traj.cum_diss_fric
    return float(np.max(np.abs(r))), r


@dataclass
class DecayFit:
    lam0: float
    C: float
    window: tuple[float, float]
    rms: float
    r2: float
    n_points: int


def fit_decay(traj_or_t, E=None, window=None, floor=None, min_points: int = 10) -> DecayFit:
    """Least-squares line through (t, log E) inside ``window``.

    Accepts either a trajectory or raw ``(t, E)`` arrays. ``C`` is normalized
    by E(0) so the fit is invariant under E -> cE.
    """
    if E is None:
        t = np.asarray(traj_or_t.t, float)
        E = np.asarray(traj_or_t.E, float)
    else:
        t = np.asarray(traj_or_t, float)
        E = np.asarray(E, float)
    E0 = float(E[0])
    if not E0 > 0:
        raise AnalysisError("initial energy must be positive to fit a decay")
    floor = 1e-12 * E0 if floor is None else float(floor)
    ta, tb = (t[0], t[-1]) if window is None else window
    ta = t[0] if ta is None else float(ta)
    tb = t[-1] if tb is None else float(tb)
    inside = (t >= ta - 1e-12) & (t <= tb + 1e-12)
    if not np.any(inside):
        raise AnalysisError(f"fit window [{ta}, {tb}] holds no records")
    keep = inside & (E > floor)
    if not np.any(keep):
        raise AnalysisError("all energies inside the fit window are below the floor")
    n = int(np.count_nonzero(keep))
    if n < min_points:
        raise AnalysisError(f"only {n} records above the floor in the window; need {min_points}")
    tt = t[keep]
    y = np.log(E[keep])
    # offset by the first value so flat data gives an exactly zero slope
    y0 = y[0]
    yc = y - y0
    tc = tt - tt.mean()
    slope = float(np.dot(tc, yc) / np.dot(tc, tc)) if n > 1 else 0.0
    intercept = y0 + float(yc.mean()) - slope * float(tt.mean())
    resid = yc - float(yc.mean()) - slope * tc
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.sum((yc - yc.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return DecayFit(
        lam0=float(-slope) + 0.0,
        C=float(math.exp(intercept) / E0),
        window=(float(tt[0]), float(tt[-1])),
        rms=math.sqrt(ss_res / n),
        r2=r2,
        n_points=n,
    )


@dataclass
class ObservabilityReport:
    T: float
    E0: float
    denom: float
    ratio: float
    k_aux: float
    E_T: float
    crosscheck: float  # |denom - (E0 - E(T))|


def observability(traj, T: float) -> ObservabilityReport:
    """Ratio E(0) / (dissipation over [0, T]) read from the cumulative sums."""
    t = traj.t
    if T > t[-1] + 1e-9 * max(1.0, abs(T)):
        raise AnalysisError(f"trajectory ends at t={t[-1]:g} before the horizon T={T:g}")
    i = int(np.argmin(np.abs(t - T)))
    if abs(t[i] - T) > 1e-9 * max(1.0, abs(T)):
        raise AnalysisError(f"no record at T={T:g}; align the record stride with the horizon")
    E0 = float(traj.E[0])
    denom = float(traj.cum_diss_kv[i] + traj.cum_diss_fric[i])
    E_T = float(traj.E[i])
    if not denom > 0.0:
        raise AnalysisError(
            "zero dissipation up to T: undamped configuration or data trapped away from the damping")
    return ObservabilityReport(
        T=float(t[i]),
        E0=E0,
        denom=denom,
        ratio=E0 / denom,
        k_aux=float(getattr(traj, "k_aux", math.inf)),
        E_T=E_T,
        crosscheck=abs(denom - (E0 - E_T)),
    )


def rate_from_observability(C_est: float, T0: float) -> float:
    """Decay rate ln(1 + 1/C)/T0 implied by an observability constant C at horizon T0."""
    if not (C_est > 0 and T0 > 0):
        raise AnalysisError("observability constant and horizon must be positive")
    if math.isinf(C_est):
        return 0.0
    return math.log1p(1.0 / C_est) / T0
