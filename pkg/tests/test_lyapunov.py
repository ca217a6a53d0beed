import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempus.errors import IncompatibleGridError, InvalidArgument, WindowMassError
from tempus.lyapunov import (
    StraussKernel,
    lyapunov_curve,
    no_invariant_lyapunov_certificate,
    reversal_identity_check,
    strauss_convergence,
    strauss_expectation,
)
from tempus.observables import GaugeFamily, kernel_from_gauge, random_gauge
from tempus.spectral import (
    TemporalGrid,
    build_energy_grid,
    build_uniform_grid,
    evolve,
    gaussian_packet,
    random_state,
    time_reverse,
)


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), channels=st.integers(1, 2))
def test_curves_are_monotone_with_limits(grid, window, seed, channels):
    rng = np.random.default_rng(seed)
    s = random_state(grid, rng, channels=channels)
    g = random_gauge(grid, rng, members=channels + 1, channels=channels)
    c = lyapunov_curve(s, g, window)
    assert c.is_monotone()
    first, last = c.endpoint_errors()
    assert first < 1e-3 and last < 1e-3
    assert c.accumulation_error() < 1e-12


def test_curve_translates_with_the_state(grid, window, rng):
    s = random_state(grid, rng)
    g = GaugeFamily.unity(grid)
    a = lyapunov_curve(s, g, window)
    b = lyapunov_curve(evolve(s, 6.0), g, window)
    # arrival densities move by -t0, so does the curve
    assert b.shifted_mismatch(a, -6.0) < 1e-4


def test_curve_needs_window_mass(grid, rng):
    s = random_state(grid, rng)
    with pytest.raises(WindowMassError):
        lyapunov_curve(s, GaugeFamily.unity(grid), TemporalGrid.with_step(0.0, 1.0, 0.25))


def test_toeplitz_product_matches_dense():
    g = build_uniform_grid(0.5, 1.5, 1201)
    K = StraussKernel(g, 0.004)
    v = np.random.default_rng(2).normal(size=(g.size, 3)) + 0j
    dense = K.matrix() @ v
    assert np.max(np.abs(K.apply(v) - dense)) < 1e-10 * np.max(np.abs(dense))


def test_weighted_kernel_is_a_contraction_when_resolved():
    g = build_uniform_grid(0.5, 1.5, 1001)
    ev = StraussKernel(g, 5e-3).weighted_spectrum()
    assert ev[0] > -1e-8 and ev[-1] < 1 + 1e-8
    # a kernel whose eps is below the spacing overshoots 1
    coarse = StraussKernel(g, 1e-4)
    assert coarse.resolution() < 1
    assert coarse.weighted_spectrum()[-1] > 1.0


def test_strauss_rejects_bad_input():
    g = build_uniform_grid(0.5, 1.5, 101)
    with pytest.raises(InvalidArgument):
        StraussKernel(g, 0.0)
    s = gaussian_packet(g, np.sqrt(2), 0.05, 10.0)
    other = build_uniform_grid(0.5, 1.5, 103)
    with pytest.raises(IncompatibleGridError):
        strauss_expectation(s, StraussKernel(other, 0.01), TemporalGrid.span(0, 1, 2))


def _narrow(eps_rel, x0=0.0):
    k0, dk = np.sqrt(2.0), 0.05
    w = k0 * dk
    h = eps_rel * w / 5
    lo, hi = 1.0 - 8 * w, 1.0 + 8 * w
    grid = build_uniform_grid(lo, hi, int(np.ceil((hi - lo) / h)) + 1)
    return gaussian_packet(grid, k0, dk, x0)


def test_real_state_at_t0_gives_one_half():
    vals = []
    for rel in (1e-1, 1e-2):
        s = _narrow(rel)
        s = s.with_amps(np.abs(s.amps))
        K = StraussKernel.for_state(s, rel=rel)
        vals.append(strauss_expectation(s, K, TemporalGrid.span(0.0, 1.0, 2)).values[0])
    assert abs(vals[1] - 0.5) < abs(vals[0] - 0.5)
    assert vals[1] == pytest.approx(0.5, abs=5e-3)


def test_strauss_converges_linearly_in_eps():
    s = _narrow(1e-2, x0=20.0)
    eps, dev, C = strauss_convergence(s, TemporalGrid.with_step(-40.0, 80.0, 2.0), (1e-1, 1e-2))
    assert dev[1] < dev[0] / 5
    assert np.all(dev <= 1.01 * C * eps)


def test_strauss_values_stay_in_unit_interval():
    s = _narrow(1e-1, x0=20.0)
    c = strauss_expectation(s, StraussKernel.for_state(s, rel=1e-1),
                            TemporalGrid.with_step(-40.0, 80.0, 1.0))
    assert np.all(c.values > -1e-3) and np.all(c.values < 1 + 1e-3)
    # finite eps damps the early plateau: value ~ exp(eps t) before arrival
    assert c.values[0] < c.values[5] < 1.0


def test_reversal_identity_two_ways(grid, window, rng):
    s = random_state(grid, rng)
    g = random_gauge(grid, rng)
    assert reversal_identity_check(s, g, window) < 1e-10
    assert reversal_identity_check(evolve(s, 4.0), g, window) < 1e-10


def test_reversal_identity_through_conjugated_kernel():
    # <(Theta psi)_t|L|(Theta psi)_t> with L the Strauss kernel, against
    # <psi_{-t}|conj(L)|psi_{-t}> evaluated by dense quadrature
    s = _narrow(5e-2, x0=20.0)
    K = StraussKernel.for_state(s, rel=5e-2)
    tg = TemporalGrid.with_step(-60.0, 60.0, 10.0)
    lhs = strauss_expectation(time_reverse(s), K, tg).values
    M = np.conj(K.matrix())
    w = s.grid.weights
    rhs = []
    for t in tg.times:
        u = w * evolve(s, -t).amps[:, 0]
        rhs.append(np.real(np.vdot(u, M @ u)))
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_certificate_finds_witness_or_trivial():
    v = no_invariant_lyapunov_certificate(np.eye(4))
    assert v.kind == "witness" and v.value == pytest.approx(-1.0)
    assert no_invariant_lyapunov_certificate(np.zeros((3, 3))).kind == "trivial"
    with pytest.raises(InvalidArgument):
        no_invariant_lyapunov_certificate(np.triu(np.ones((3, 3))))
    grid = build_energy_grid(2.0, 4, 4)
    K = kernel_from_gauge(random_gauge(grid, np.random.default_rng(0)))
    assert no_invariant_lyapunov_certificate(K).kind == "witness"


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 10), log_scale=st.floats(-6.0, 2.0))
def test_certificate_soundness(seed, n, log_scale):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    K = A @ A.conj().T
    K *= 10.0 ** log_scale / np.trace(K).real
    v = no_invariant_lyapunov_certificate(K)
    assert v.kind == "witness" and v.value < 0
    assert np.real(np.vdot(v.vector, -np.conj(K) @ v.vector)) == pytest.approx(v.value)
