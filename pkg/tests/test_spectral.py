import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linear_sum_assignment

from kvwave.analysis import fit_decay
from kvwave.geometry import build_damping_preset, build_grid, field_from_function, uniform_field
from kvwave.nonlinear import Nonlinearity
from kvwave.solver import SolverConfig, assemble, laplacian, run
from kvwave.spectral import (MAX_DENSE, SpectrumError, assemble_generator,
                             constant_damping_modes, branch_diagnostic, match_branches,
                             slowest_mode, spectrum, undamped_frequencies)


def paired_rel_error(computed, exact):
    cost = np.abs(computed[:, None] - exact[None, :])
    r, c = linear_sum_assignment(cost)
    return np.max(cost[r, c] / np.maximum(np.abs(exact[c]), 1.0))


def test_zero_matrix_spectrum():
    rep = spectrum(np.zeros((3, 3)))
    assert np.all(rep.eigenvalues == 0)
    assert rep.abscissa == 0.0


def test_diagonal_abscissa():
    assert spectrum(np.diag([-1.0, -2.0])).abscissa == -1.0


def test_undamped_spectrum_is_discrete_laplacian():
    g = build_grid(1, [1.0], [60])
    rep = spectrum(assemble_generator(assemble(g, uniform_field(g))))
    j = np.arange(1, 61)
    mu = (4 / g.h[0] ** 2) * np.sin(j * np.pi * g.h[0] / 2) ** 2
    exact = np.concatenate([1j * np.sqrt(mu), -1j * np.sqrt(mu)])
    assert paired_rel_error(rep.eigenvalues, exact) < 1e-9
    assert abs(rep.abscissa) < 1e-8


@pytest.mark.parametrize("c", [0.01, 0.1, 0.2, 1.0])
def test_constant_damping_oracle(c):
    g = build_grid(1, [1.0], [100])
    rep = spectrum(assemble_generator(assemble(g, uniform_field(g, c))))
    assert paired_rel_error(rep.eigenvalues, constant_damping_modes(g, c)) < 1e-6


def test_conjugate_pairs():
    g = build_grid(1, [1.0], [50])
    ev = spectrum(assemble_generator(assemble(g, uniform_field(g, 0.1)))).eigenvalues
    assert paired_rel_error(ev, np.conj(ev)) < 1e-10


def test_source_linearization_shifts_stiffness():
    g = build_grid(1, [1.0], [30])
    op = assemble(g, uniform_field(g))
    nl = Nonlinearity("power", p=1)
    G = assemble_generator(op, nl)
    n = g.size
    assert G[n:, :n] == pytest.approx(-(laplacian(g).toarray() + np.eye(n)))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.sampled_from([1.0, 10.0, np.inf]))
def test_dissipativity(seed, k):
    rng = np.random.default_rng(seed)
    g = build_grid(1, [1.0], [40])
    a = rng.uniform(0, 2, g.size + 2) * (rng.uniform(size=g.size + 2) > 0.3)
    b = rng.uniform(0, 2, g.size + 2)
    field = field_from_function(g, lambda x: a, lambda x: b)
    rep = spectrum(assemble_generator(assemble(g, field), Nonlinearity("power", p=3), k))
    assert rep.abscissa <= 1e-8


def test_undamped_branches_on_axis():
    g = build_grid(1, [1.0], [100])
    rep, table = branch_diagnostic(g, uniform_field(g), m=10)
    assert all(abs(re) < 1e-8 for _, re, _ in table)
    assert [row[0] for row in table] == list(range(1, 11))


def test_match_modes():
    g = build_grid(1, [1.0], [100])
    # light damping keeps the grid-scale modes away from the low frequencies
    rep = spectrum(assemble_generator(assemble(g, uniform_field(g, 0.001))))
    targets = undamped_frequencies(g, 5)
    a = match_branches(rep, 5, "ordered").branches.copy()
    b = match_branches(rep, 5, "nearest", targets).branches
    assert a == pytest.approx(b)
    assert np.abs(a.imag) == pytest.approx(targets, rel=2e-3)
    with pytest.raises(SpectrumError):
        match_branches(rep, 5, "nearest")
    with pytest.raises(SpectrumError):
        match_branches(rep, 5, "bogus")


def test_indicator_branches_decay_small_grid():
    g = build_grid(1, [1.0], [200])
    _, ind = build_damping_preset(g, "indicator_1d", {"interval": (0.3, 0.7)})
    _, table = branch_diagnostic(g, ind, m=10)
    damp = np.abs([re for _, re, _ in table])
    assert damp[-1] < damp[0]


def test_size_guard():
    g = build_grid(2, [1.0, 1.0], [46, 46])
    op = assemble(g, uniform_field(g))
    assert op.size > MAX_DENSE
    with pytest.raises(SpectrumError):
        assemble_generator(op)
    assert assemble_generator(op, allow_large=True).shape == (2 * op.size, 2 * op.size)


def test_diagnostic_is_one_dimensional():
    g = build_grid(2, [1.0, 1.0], [5, 5])
    with pytest.raises(SpectrumError):
        branch_diagnostic(g, uniform_field(g, 1.0))


def test_slowest_mode_decay_rate():
    g = build_grid(1, [1.0], [100])
    op = assemble(g, uniform_field(g, 0.2))
    u0, v0, lam = slowest_mode(op)
    tr = run(g, op, Nonlinearity("zero"), u0, v0, SolverConfig(dt=0.005, t_end=10.0,
                                                                record_stride=10))
    assert fit_decay(tr).lam0 == pytest.approx(2 * abs(lam.real), rel=0.1)


def test_grid_scale_branches_trapped_in_undamped_set():
    # On the GCC preset the spectrum keeps a few grid-scale oscillations whose
    # energy sits in A; resolved frequencies are all damped at least at 1/a0.
    g = build_grid(1, [1.0], [200])
    _, c = build_damping_preset(g, "interval_1d", {"epsilon": 0.1})
    ev = spectrum(assemble_generator(assemble(g, c))).eigenvalues
    h = g.h[0]
    resolved = np.abs(ev.imag) < 0.6 / h
    assert np.max(ev.real[resolved]) <= -1.0 / c.a0
    slow = ev[np.argmax(ev.real)]
    assert slow.real > -0.1
    assert abs(slow.imag) > 1.0 / h
