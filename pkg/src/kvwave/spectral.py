"""
Spectrum of the linearized first-order generator

    [[0, I], [-rho^{-1}(L_h + f'(0) I), -rho^{-1}(L_a + (1/k) diag b)]]

and the branch diagnostic for discontinuous (indicator) Kelvin-Voigt damping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .geometry import CoefficientField, Grid
from .solver import DiscreteOperator, assemble

MAX_DENSE = 2000


class SpectrumError(RuntimeError):
    pass


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray  # sorted by |Im|, then Re descending
    abscissa: float
    branches: np.ndarray | None = None  # eigenvalue per matched branch
    branch_index: np.ndarray | None = None  # position in ``eigenvalues`` per branch

    @property
    def branch_damping(self) -> np.ndarray:
        return np.abs(self.branches.real)


def assemble_generator(op: DiscreteOperator, nl=None, k_aux: float = math.inf,
                       allow_large: bool = False) -> np.ndarray:
    n = op.size
    if n > MAX_DENSE and not allow_large:
        raise SpectrumError(
            f"{n} unknowns exceed the dense size guard ({MAX_DENSE}); pass allow_large=True")
    fp0 = 0.0 if nl is None else float(nl.fprime(0.0))
    beta = 0.0 if math.isinf(k_aux) else 1.0 / k_aux
    rinv = 1.0 / op.rho
    stiff = op.L_h.toarray()
    stiff[np.diag_indices(n)] += fp0
    damp = op.L_a.toarray()
    damp[np.diag_indices(n)] += beta * op.b
    G = np.zeros((2 * n, 2 * n))
    G[:n, n:] = np.eye(n)
    G[n:, :n] = -rinv[:, None] * stiff
    G[n:, n:] = -rinv[:, None] * damp
    return G


def spectrum(G: np.ndarray) -> SpectrumReport:
    try:
        ev = la.eigvals(G, check_finite=True)
    except (la.LinAlgError, ValueError) as exc:
        raise SpectrumError(f"eigenvalue computation failed: {exc}") from exc
    order = np.lexsort((-ev.real, np.abs(ev.imag)))
    ev = ev[order]
    return SpectrumReport(ev, float(np.max(ev.real)) if ev.size else 0.0)


def undamped_frequencies(grid: Grid, m: int) -> np.ndarray:
    """Continuum frequencies j*pi/L of the 1D Dirichlet string."""
    return np.arange(1, m + 1) * np.pi / grid.lengths[0]


def match_branches(report: SpectrumReport, m: int, mode: str = "ordered",
                   targets: np.ndarray | None = None) -> SpectrumReport:
    """Attach ``m`` oscillatory branches to ``report``.

    ``ordered``: the j-th eigenvalue with Im > 0 in increasing frequency.
    ``nearest``: the eigenvalue whose |Im| is closest to ``targets[j]``, ties
    going to the smallest |Re|.
    """
    ev = report.eigenvalues
    if mode == "ordered":
        upper = np.flatnonzero(ev.imag > 1e-9 * max(1.0, np.max(np.abs(ev))))
        upper = upper[np.argsort(ev.imag[upper], kind="stable")]
        if upper.size < m:
            raise SpectrumError(f"only {upper.size} oscillatory eigenvalues, asked for {m}")
        idx = upper[:m]
    elif mode == "nearest":
        if targets is None or len(targets) < m:
            raise SpectrumError("nearest matching needs m target frequencies")
        idx = np.array([np.lexsort((np.abs(ev.real), np.abs(np.abs(ev.imag) - w)))[0]
                        for w in targets[:m]])
    else:
        raise SpectrumError(f"unknown matching mode {mode!r}")
    report.branches = ev[idx]
    report.branch_index = idx
    return report


def branch_diagnostic(grid: Grid, field: CoefficientField, m: int = 10, mode: str = "ordered"):
    """Branch damping |Re lambda_j|, j = 1..m, of a 1D Kelvin-Voigt configuration.

    Returns ``(report, table)`` where ``table`` rows are
    ``(j, Re lambda_j, Im lambda_j)``. For an indicator coefficient the damping
    of the high branches drifts towards the imaginary axis.
    """
    if grid.dim != 1:
        raise SpectrumError("the branch diagnostic is one-dimensional")
    op = assemble(grid, field)
    rep = spectrum(assemble_generator(op))
    rep = match_branches(rep, m, mode, undamped_frequencies(grid, m))
    table = [(j + 1, float(z.real), float(z.imag)) for j, z in enumerate(rep.branches)]
    return rep, table


def constant_damping_modes(grid: Grid, c: float) -> np.ndarray:
    """Closed-form spectrum of the 1D generator with a = c, b = 0, f = 0.

    Mode j of the Dirichlet Laplacian, mu_j = (4/h^2) sin^2(j pi h / 2L),
    contributes the roots of lambda^2 + c mu_j lambda + mu_j = 0.
    """
    n = grid.counts[0]
    h = grid.h[0]
    L = grid.lengths[0]
    j = np.arange(1, n + 1)
    mu = (4.0 / h**2) * np.sin(j * np.pi * h / (2.0 * L)) ** 2
    disc = np.sqrt((c * mu) ** 2 - 4.0 * mu + 0j)
    return np.concatenate([(-c * mu + disc) / 2.0, (-c * mu - disc) / 2.0])


def slowest_mode(op: DiscreteOperator, nl=None, k_aux: float = math.inf):
    """Real initial data (u0, v0) along the eigenvector of the rightmost eigenvalue.

    Returns ``(u0, v0, lam)``. For a complex pair the real part of the
    eigenvector is used, which keeps the solution in the two-dimensional
    invariant subspace of the pair.
    """
    G = assemble_generator(op, nl, k_aux)
    ev, vec = la.eig(G)
    i = int(np.lexsort((np.abs(ev.imag), -ev.real))[0])
    x = vec[:, i]
    x = x / x[np.argmax(np.abs(x))]
    n = op.size
    return np.real(x[:n]).copy(), np.real(x[n:]).copy(), complex(ev[i])
