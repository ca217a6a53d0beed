import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from tempus.errors import (
    DegenerateStateError,
    GridCoverageError,
    IncompatibleGridError,
    InvalidArgument,
)
from tempus.spectral import (
    SpectralState,
    TemporalGrid,
    build_energy_grid,
    build_uniform_grid,
    evolve,
    gaussian_packet,
    normalize,
    random_state,
    time_reverse,
    transform,
)
from tempus.spectral import _direct_transform


def test_panel_grid_integrates_polynomials_and_smooth_functions():
    g = build_energy_grid(4.0, 16, 8)
    assert g.integrate(np.ones(g.size)) == pytest.approx(4.0, abs=1e-14)
    assert g.integrate(g.nodes ** 3) == pytest.approx(64.0, rel=1e-14)
    assert g.integrate(np.exp(-g.nodes)) == pytest.approx(1 - np.exp(-4.0), abs=1e-14)


def test_threshold_grading_resolves_inverse_sqrt():
    # int_0^2 E^{-1/2} dE = 2 sqrt(2); each graded level halves the first cell
    errs = [abs(build_energy_grid(2.0, 64, 12, grade_levels=lv).integrate(
        build_energy_grid(2.0, 64, 12, grade_levels=lv).nodes ** -0.5) - 2 * np.sqrt(2))
        for lv in (0, 4, 20)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


def test_refinement_inserts_panels_around_resonance():
    plain = build_energy_grid(2.0, 32, 8)
    refined = build_energy_grid(2.0, 32, 8, refine=[(1.0, 1e-4)])
    assert refined.size > plain.size
    near = np.abs(refined.nodes - 1.0) < 1e-4
    assert near.sum() >= 8


def test_panel_derivative_is_spectrally_accurate():
    g = build_energy_grid(3.0, 24, 12)
    f = np.sin(2 * g.nodes) * np.exp(-g.nodes)
    exact = (2 * np.cos(2 * g.nodes) - np.sin(2 * g.nodes)) * np.exp(-g.nodes)
    assert np.max(np.abs(g.derivative(f) - exact)) < 1e-9


def test_uniform_grid_derivative_fourth_order():
    errs = []
    for n in (201, 401):
        g = build_uniform_grid(0.0, 2.0, n)
        f = np.sin(3 * g.nodes)
        errs.append(np.max(np.abs(g.derivative(f) - 3 * np.cos(3 * g.nodes))))
    assert errs[1] < errs[0] / 12


def test_grid_argument_errors():
    with pytest.raises(InvalidArgument):
        build_energy_grid(-1.0, 4, 4)
    with pytest.raises(InvalidArgument):
        build_energy_grid(1.0, 0, 4)
    with pytest.raises(InvalidArgument):
        build_uniform_grid(1.0, 1.0, 10)


def test_packet_is_centered_and_normalized():
    g = build_energy_grid(2.2, 256, 12, e_min=0.6)
    s = gaussian_packet(g, np.pi / 2, 0.045, 180.0)
    assert s.norm() == pytest.approx(1.0, abs=1e-14)
    # sign of k0 is irrelevant: only the magnitude enters
    t = gaussian_packet(g, -np.pi / 2, 0.045, 180.0)
    assert np.allclose(s.amps, t.amps)


def test_packet_coverage_error():
    g = build_energy_grid(1.0, 32, 8, e_min=0.9)
    with pytest.raises(GridCoverageError):
        gaussian_packet(g, np.pi / 2, 0.045, 0.0)


def test_normalize_rejects_zero_state(grid):
    with pytest.raises(DegenerateStateError):
        normalize(SpectralState(grid, np.zeros(grid.size)))


def test_state_shape_must_match_grid(grid):
    with pytest.raises(IncompatibleGridError):
        SpectralState(grid, np.ones(grid.size + 1))


def test_time_grid_validation(grid):
    with pytest.raises(InvalidArgument):
        TemporalGrid(np.array([0.0, 1.0, 3.0]))
    with pytest.raises(InvalidArgument):
        TemporalGrid(np.array([0.0]))
    coarse = TemporalGrid.with_step(0.0, 10.0, 1.0)
    with pytest.raises(InvalidArgument):
        coarse.check_nyquist(grid)


def test_evolution_is_unitary_and_reversal_involutive(grid, rng):
    s = random_state(grid, rng, channels=2)
    assert evolve(s, 7.3).norm() == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(time_reverse(time_reverse(s)).amps, s.amps)
    assert abs(evolve(s, 3.0).inner(evolve(s, 3.0)) - 1.0) < 1e-13


@pytest.mark.parametrize("kind", ["clock", "arrival"])
def test_fast_transform_matches_direct_sum(kind):
    g = build_uniform_grid(0.5, 1.5, 3001)
    rng = np.random.default_rng(5)
    F = (rng.normal(size=(g.size, 2)) + 1j * rng.normal(size=(g.size, 2)))
    times = np.linspace(-4000.0, 9000.0, 1201)
    sign = -1.0 if kind == "clock" else 1.0
    ref = _direct_transform(g, F, times, sign) / np.sqrt(2 * np.pi)
    fast = transform(g, F, times, kind)
    assert np.max(np.abs(fast - ref)) < 1e-9 * np.max(np.abs(ref))


def test_transform_of_gaussian_matches_closed_form():
    # f(E) = exp(-(E - 1)^2 / (2 s^2)); clock transform is a Gaussian in t
    s = 0.05
    g = build_energy_grid(2.0, 64, 12)
    F = np.exp(-((g.nodes - 1.0) ** 2) / (2 * s * s))[:, None]
    t = np.linspace(-60.0, 60.0, 11)
    exact = s * np.exp(-1j * t - 0.5 * (s * t) ** 2)
    assert np.allclose(transform(g, F, t, "clock")[:, 0], exact, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.02, 0.2), st.floats(0.0, 100.0))
def test_packet_norm_against_quadrature(k0, dk, x0):
    g = build_energy_grid(0.5 * (k0 + 12 * dk) ** 2, 128, 12)
    s = gaussian_packet(g, k0, dk, x0)
    # |psi(E)|^2 dE = |psi(k)|^2 dk; compare the mean wavenumber with quad
    from tempus.spectral import packet_k_amplitude

    num = integrate.quad(lambda q: q * packet_k_amplitude(q, k0, dk, 0.5) ** 2,
                         0, k0 + 14 * dk, limit=200, points=[k0])[0]
    den = integrate.quad(lambda q: packet_k_amplitude(q, k0, dk, 0.5) ** 2,
                         0, k0 + 14 * dk, limit=200, points=[k0])[0]
    assert g.integrate(g.k * s.density) == pytest.approx(num / den, rel=1e-7)
