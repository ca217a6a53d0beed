import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tempus import halfline as hl
from tempus.errors import GridCoverageError, IncompatibleGridError, InvalidArgument
from tempus.observables import GaugeFamily, inverse_speed_expectation, temporal_distribution
from tempus.spectral import TemporalGrid, build_energy_grid, gaussian_packet


@settings(max_examples=200, deadline=None)
@given(E=st.floats(1e-3, 20.0), g=st.floats(0.01, 300.0), a=st.floats(0.1, 30.0))
def test_phase_shift_satisfies_matching_conditions(E, g, a):
    # inside A sin(kr), outside B sin(kr + d); psi'(a+) - psi'(a-) = 2 g psi(a)
    k = np.sqrt(2 * E)
    d, _ = hl.delta_phase_shift(E, g, a)
    assert -np.pi < d <= 0
    lhs = k * np.cos(k * a + d) * np.sin(k * a) - k * np.cos(k * a) * np.sin(k * a + d)
    rhs = 2 * g * np.sin(k * a) * np.sin(k * a + d)
    assert lhs == pytest.approx(rhs, abs=1e-9 * max(1.0, g, k))


def test_phase_shift_derivative_against_finite_difference():
    E = np.linspace(0.3, 3.0, 57)
    h = 1e-6
    for g, a in ((2.0, 1.0), (20.0, 20.0)):
        _, dd = hl.delta_phase_shift(E, g, a)
        dp, _ = hl.delta_phase_shift(E + h, g, a)
        dm, _ = hl.delta_phase_shift(E - h, g, a)
        fd = (np.unwrap(np.stack([dm, dp]), axis=0)[1] - np.unwrap(np.stack([dm, dp]), axis=0)[0]) / (2 * h)
        assert np.allclose(dd, fd, rtol=1e-5, atol=1e-5)


def test_weak_and_free_limits():
    E = np.linspace(0.5, 2.0, 5)
    d, dd = hl.phase_shift(E, hl.HalfLinePotential.free())
    assert np.all(d == 0) and np.all(dd == 0)
    # first Born approximation: tan d ~ -(2g/k) sin^2(ka)
    g, a = 1e-5, 1.3
    k = np.sqrt(2 * E)
    d, _ = hl.delta_phase_shift(E, g, a)
    assert np.allclose(d, -(2 * g / k) * np.sin(k * a) ** 2, rtol=1e-4)


def test_resonances_sit_below_cavity_modes_and_sharpen_with_g():
    widths = []
    for g in (20.0, 200.0):
        pot = hl.HalfLinePotential.delta(g, 20.0)
        res = hl.resonances(pot, 2.2, 0.6)
        kr = np.array([np.sqrt(2 * e) for e, _ in res])
        n = np.round(kr * 20.0 / np.pi)
        assert np.all(kr * 20.0 < n * np.pi)
        assert np.all(n * np.pi - kr * 20.0 < 0.1)
        widths.append(min(w for _, w in res))
    assert widths[1] < widths[0] / 50


def test_smith_delay_matches_hard_wall_off_resonance():
    # k0 a = 10.5 pi lies midway between cavity modes
    k0, dk = 10.5 * np.pi / 20.0, 0.006
    for g, tol in ((200.0, 1e-3), (2000.0, 1e-4)):
        pot = hl.HalfLinePotential.delta(g, 20.0)
        lo, hi = 0.5 * (k0 - 12 * dk) ** 2, 0.5 * (k0 + 12 * dk) ** 2
        grid = hl.scattering_grid(pot, hi, 64, 16, e_min=lo)
        s = gaussian_packet(grid, k0, dk, 180.0)
        smith = hl.smith_delay(s, hl.phase_shift_profile(grid, pot))
        wall = -40.0 * inverse_speed_expectation(s)
        assert abs(smith - wall) < tol * abs(wall)


def test_on_resonance_delay_is_wall_plus_trapping():
    # each narrow resonance adds about 2 pi |psi(E_n)|^2 to the wall value
    pot = hl.HalfLinePotential.delta(200.0, 20.0)
    grid = hl.scattering_grid(pot, 2.2, 256, 12, e_min=0.6)
    s = gaussian_packet(grid, np.pi / 2, 0.045, 180.0)
    smith = hl.smith_delay(s, hl.phase_shift_profile(grid, pot))
    wall = -40.0 * inverse_speed_expectation(s)
    dens = lambda e: np.interp(e, grid.nodes, s.density)
    trap = sum(2 * np.pi * dens(e) for e, _ in hl.resonances(pot, 2.2, 0.6))
    assert smith == pytest.approx(wall + trap, rel=2e-2)
    assert smith > 0


def test_refined_grid_resolves_phase_jumps():
    pot = hl.HalfLinePotential.delta(200.0, 20.0)
    grid = hl.scattering_grid(pot, 2.2, 256, 12, e_min=0.6)
    assert hl.phase_shift_profile(grid, pot).max_step() < 0.2


def test_resolving_grid_limits():
    pot = hl.HalfLinePotential.delta(20.0, 20.0)
    g = hl.resolving_grid(pot, 0.6, 2.2)
    width = hl.narrowest_width(pot, 0.6, 2.2)
    assert g.nodes[1] - g.nodes[0] <= width / 12
    with pytest.raises(GridCoverageError):
        hl.resolving_grid(hl.HalfLinePotential.delta(2000.0, 20.0), 0.6, 2.2)


@pytest.fixture(scope="module")
def fig1():
    pot = hl.HalfLinePotential.delta(20.0, 20.0)
    grid = hl.scattering_grid(pot, 2.2, 256, 12, e_min=0.6)
    return pot, grid, gaussian_packet(grid, np.pi / 2, 0.045, 180.0)


def test_spectral_mean_relations_are_exact(fig1):
    pot, grid, s = fig1
    m = hl.arrival_mean_relations(s, hl.phase_shift_profile(grid, pot))
    assert m.source == "spectral"
    assert m.identity_error < 1e-7 * abs(m.delay)
    assert m.interpolation_error < 1e-7


def test_sampled_means_need_the_long_window(fig1):
    pot, grid, s = fig1
    prof = hl.phase_shift_profile(grid, pot)
    # the resonant tail of psi_io leaks out of a short window
    with pytest.raises(Exception):
        hl.arrival_mean_relations(s, prof, TemporalGrid.with_step(0.0, 300.0, 0.5))


def test_reversed_state_and_map_errors(fig1):
    pot, grid, s = fig1
    prof = hl.phase_shift_profile(grid, pot)
    r = hl.reversed_in_state(s, prof)
    assert np.allclose(r.amps, np.conj(s.amps * np.exp(2j * prof.delta)[:, None]))
    with pytest.raises(InvalidArgument):
        hl.map_asymptotic(s, prof, "sideways")
    other = build_energy_grid(2.2, 16, 4)
    with pytest.raises(IncompatibleGridError):
        hl.smith_delay(gaussian_packet(other, np.pi / 2, 0.045, 180.0), prof)


def test_eigenfunctions_are_delta_normalized():
    # int_0^R phi_E(r) phi_E'(r) dr -> delta(E - E'): check the free one
    # against the closed form sqrt(2/(pi k)) sin(kr)
    r = np.linspace(0.0, 50.0, 11)
    E = np.array([0.5, 1.3])
    phi = hl.eigenfunction(r, E, hl.HalfLinePotential.free())
    k = np.sqrt(2 * E)
    assert np.allclose(phi, np.sqrt(2 / (np.pi * k)) * np.sin(np.outer(r, k)))
    assert np.allclose(np.abs(hl.free_eigenfunction(r[:, None], E[None, :])), np.abs(phi))


def test_eigenfunction_continuity_and_channels():
    pot = hl.HalfLinePotential.delta(5.0, 3.0)
    E = np.array([0.7, 1.9])
    eps = 1e-9
    inside = hl.eigenfunction([3.0 - eps], E, pot, "theta")
    outside = hl.eigenfunction([3.0 + eps], E, pot, "theta")
    assert np.allclose(inside, outside, atol=1e-7)
    d, _ = hl.delta_phase_shift(E, 5.0, 3.0)
    ein = hl.eigenfunction([7.0], E, pot, "in")
    eth = hl.eigenfunction([7.0], E, pot, "theta")
    assert np.allclose(ein, eth * np.exp(1j * d))


def test_position_density_before_and_after(fig1):
    pot, grid, s = fig1
    r = np.linspace(0.0, 400.0, 4001)
    start = hl.position_density(s, "in", pot, r, 0.0)
    assert start.norm() == pytest.approx(1.0, abs=1e-6)
    assert start.mean() == pytest.approx(180.0, abs=0.5)
    with pytest.raises(GridCoverageError):
        hl.position_density(s, "in", pot, np.linspace(0.0, 100.0, 101), 0.0)


def test_first_arrival_shift(fig1):
    _, _, s = fig1
    grid = s.grid
    tg = TemporalGrid.with_step(0.0, 300.0, 0.25)
    base = temporal_distribution(s, GaugeFamily.unity(grid), tg, "arrival")
    a0 = hl.first_arrival_distribution(s, 0.0, tg)
    assert np.array_equal(a0.density, base.density)
    with pytest.raises(InvalidArgument):
        hl.first_arrival_distribution(s, -1.0, tg)


def test_inverse_speed_against_quadrature():
    grid = build_energy_grid(2.2, 256, 12, e_min=0.6)
    s = gaussian_packet(grid, np.pi / 2, 0.045, 180.0)
    from tempus.spectral import packet_k_amplitude

    w = lambda q: packet_k_amplitude(q, np.pi / 2, 0.045, 0.5) ** 2
    num = integrate.quad(lambda q: w(q) / q, 1.0, 2.2, limit=200)[0]
    den = integrate.quad(w, 1.0, 2.2, limit=200)[0]
    assert inverse_speed_expectation(s) == pytest.approx(num / den, rel=1e-9)
