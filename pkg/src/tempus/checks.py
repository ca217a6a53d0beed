"""Numbered acceptance checks, shared by ``tempus selftest`` and the test suite.

Each check returns a CheckResult whose ``passed`` flag is the conjunction
of all clauses of the criterion; ``detail`` spells the clauses out.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import halfline as hl
from .lyapunov import (
    lyapunov_curve,
    no_invariant_lyapunov_certificate,
    reversal_identity_check,
    strauss_convergence,
)
from .observables import (
    DensityKernel,
    GaugeFamily,
    gauge_from_kernel,
    inverse_speed_expectation,
    kernel_from_gauge,
    moments_distribution,
    moments_spectral,
    random_gauge,
    temporal_distribution,
    variance_gauge_scan,
)
from .spectral import (
    TemporalGrid,
    build_energy_grid,
    build_uniform_grid,
    evolve,
    gaussian_packet,
    normalize,
    random_state,
)

FIG1 = dict(k0=np.pi / 2, dk=0.045, x0=180.0, beta=0.5, g=20.0, a=20.0)
FIG1_BAND = (0.6, 2.2)
SEED = 20240611


@dataclass
class CheckResult:
    number: int
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.number:2d} {self.name:<22s} {flag}  value={self.value:.3e} "
                f"tol={self.tolerance:.1e}  {self.detail}")


def _timed(fn):
    def run(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _random_grid():
    return build_energy_grid(8.0, 64, 12)


def _random_window():
    return TemporalGrid.with_step(-160.0, 160.0, 0.25)


def fig1_potential(g=None):
    return hl.HalfLinePotential.delta(FIG1["g"] if g is None else g, FIG1["a"])


def fig1_grid(potential=None):
    """Panel grid over the packet band with resonance refinement."""
    pot = fig1_potential() if potential is None else potential
    return hl.scattering_grid(pot, FIG1_BAND[1], 256, 12, e_min=FIG1_BAND[0])


def fig1_packet(grid):
    return gaussian_packet(grid, FIG1["k0"], FIG1["dk"], FIG1["x0"], FIG1["beta"])


def long_window_means(g=None):
    """Arrival means of the in/out/io asymptotes over a resonance-resolving window."""
    pot = fig1_potential(g)
    grid = hl.resolving_grid(pot, *FIG1_BAND)
    state = fig1_packet(grid)
    profile = hl.phase_shift_profile(grid, pot)
    tgrid = hl.resonance_window(pot, grid)
    return hl.arrival_mean_relations(state, profile, tgrid)


@_timed
def check_normalization(n_pairs=20, tol=1e-6):
    """1: total temporal probability of random admissible pairs."""
    rng = np.random.default_rng(SEED)
    grid, tgrid = _random_grid(), _random_window()
    worst = 0.0
    for n in range(n_pairs):
        channels = 1 + n % 2
        state = random_state(grid, rng, channels=channels)
        gauge = random_gauge(grid, rng, members=channels + 1 + n % 3, channels=channels)
        kind = "arrival" if n % 2 else "clock"
        dist = temporal_distribution(state, gauge, tgrid, kind, min_mass=None)
        worst = max(worst, abs(dist.mass() - 1.0))
    ok = worst < tol
    return CheckResult(1, "normalization", worst, tol, ok, f"{n_pairs} pairs")


@_timed
def check_covariance(shifts=(-5.0, -1.0, 1.0, 5.0), tol=1e-4):
    """2: evolving by t0 moves arrival densities by -t0 and clock densities by +t0."""
    rng = np.random.default_rng(SEED + 1)
    grid = _random_grid()
    # a step that does not divide the shifts forces genuine interpolation
    tgrid = TemporalGrid.with_step(-160.0, 160.0, 0.3)
    state = random_state(grid, rng)
    gauge = random_gauge(grid, rng)
    worst = 0.0
    for kind, sign in (("arrival", -1.0), ("clock", 1.0)):
        base = temporal_distribution(state, gauge, tgrid, kind)
        for t0 in shifts:
            moved = temporal_distribution(evolve(state, t0), gauge, tgrid, kind)
            expected = base.at(tgrid.times - sign * t0)
            worst = max(worst, float(np.max(np.abs(moved.density - expected))))
    return CheckResult(2, "covariance", worst, tol, worst < tol, f"shifts {list(shifts)}")


@_timed
def check_moments(n_states=10, tol=1e-5):
    """3: spectral moment formulas against moments of the sampled densities."""
    rng = np.random.default_rng(SEED + 2)
    grid, tgrid = _random_grid(), _random_window()
    worst = 0.0
    for n in range(n_states):
        channels = 2 if n % 3 == 2 else 1
        state = random_state(grid, rng, channels=channels)
        gauge = random_gauge(grid, rng, members=channels + n % 2, channels=channels)
        for kind in ("clock", "arrival"):
            spec = moments_spectral(state, gauge, kind)
            dist = moments_distribution(temporal_distribution(state, gauge, tgrid, kind))
            scale = np.sqrt(spec.second_moment)
            worst = max(worst,
                        abs(spec.mean - dist.mean) / scale,
                        abs(spec.second_moment - dist.second_moment) / spec.second_moment)
    return CheckResult(3, "moments", worst, tol, worst < tol,
                       f"{n_states} states, 2-channel included")


@_timed
def check_smith(tol=1e-2, means=None):
    """4: (mean_out - mean_in) against the Smith integral; the delay should be negative."""
    m = long_window_means() if means is None else means
    rel = m.identity_error / abs(m.delay)
    identity_ok = rel < tol
    negative = m.delay < 0
    detail = (f"out-in={m.mean_out - m.mean_in:.6f} smith={m.delay:.6f} "
              f"identity {'ok' if identity_ok else 'FAIL'}; "
              f"delay sign {'negative ok' if negative else 'POSITIVE (not an advancement)'}")
    return CheckResult(4, "smith-delay", rel, tol, identity_ok and negative, detail,
                       extra={"means": m})


@_timed
def check_opaque_limit(g=200.0, tol=2e-2):
    """5: Smith delay at large g against the hard-wall value -2a<1/|v|>."""
    pot = fig1_potential(g)
    grid = fig1_grid(pot)
    state = fig1_packet(grid)
    smith = hl.smith_delay(state, hl.phase_shift_profile(grid, pot))
    wall = -2.0 * FIG1["a"] * inverse_speed_expectation(state)
    rel = abs(smith - wall) / abs(wall)
    return CheckResult(5, "opaque-limit", rel, tol, rel < tol,
                       f"smith={smith:.5f} wall={wall:.5f} (g={g:g})")


@_timed
def check_interpolation(tol=1e-4, means=None):
    """6: the io asymptote arrives halfway between in and out."""
    m = long_window_means() if means is None else means
    bound = tol * max(1.0, abs(m.delay))
    err = m.interpolation_error
    return CheckResult(6, "interpolation", err, bound, err < bound,
                       f"mean_io={m.mean_io:.6f} avg={0.5 * (m.mean_in + m.mean_out):.6f}")


@_timed
def check_first_arrivals(points=(5.0, 20.0), tol=1e-4, exact_tol=1e-12):
    """7: shift of the mean first-arrival time at x = a for a free packet."""
    grid = build_energy_grid(FIG1_BAND[1], 256, 12, e_min=FIG1_BAND[0])
    state = fig1_packet(grid)
    tgrid = TemporalGrid.with_step(0.0, 300.0, 0.25)
    inv_v = inverse_speed_expectation(state)
    base = hl.first_arrival_distribution(state, 0.0, tgrid)
    origin = temporal_distribution(state, GaugeFamily.unity(grid), tgrid, "arrival")
    reduction = float(np.max(np.abs(base.density - origin.density)))
    m0 = moments_distribution(base).mean
    worst = 0.0
    for a in points:
        ma = moments_distribution(hl.first_arrival_distribution(state, a, tgrid)).mean
        worst = max(worst, abs((ma - m0) + a * inv_v) / (a * inv_v))
    ok = worst < tol and reduction < exact_tol
    return CheckResult(7, "first-arrivals", worst, tol, ok,
                       f"a=0 reduction {reduction:.1e} (tol {exact_tol:.0e})")


@_timed
def check_figures(means=None):
    """8: packet centre at t = 0, prompt reflection at t = 190, mean ordering."""
    pot = fig1_potential()
    grid = fig1_grid(pot)
    state = fig1_packet(grid)
    free = hl.HalfLinePotential.free()
    r = np.linspace(0.0, 400.0, 4001)
    start = hl.position_density(state, "in", pot, r, 0.0)
    center = start.mean()
    ok_center = abs(center - FIG1["x0"]) <= 2.0
    after = hl.position_density(state, "in", pot, r, 190.0)
    reference = hl.position_density(state, "in", free, r, 190.0)
    edge, edge_ref = after.leading_edge(), reference.leading_edge()
    ok_edge = edge > edge_ref
    m = long_window_means() if means is None else means
    ok_order = m.mean_out < m.mean_io < m.mean_in
    detail = (f"(i) center {center:.3f} {'ok' if ok_center else 'FAIL'}; "
              f"(ii) edge {edge:.2f} vs free {edge_ref:.2f} {'ok' if ok_edge else 'FAIL'}; "
              f"(iii) means in {m.mean_in:.3f} io {m.mean_io:.3f} out {m.mean_out:.3f} "
              f"{'ok' if ok_order else 'FAIL (out < io < in violated)'}")
    return CheckResult(8, "figures", float(edge - edge_ref), 0.0,
                       ok_center and ok_edge and ok_order, detail)


@_timed
def check_lyapunov(mono_tol=1e-10, end_tol=1e-3, acc_tol=1e-10):
    """9: monotone curves with limits 1 and 0, and Strauss convergence."""
    rng = np.random.default_rng(SEED + 9)
    grid, tgrid = _random_grid(), _random_window()
    worst_step = worst_end = worst_acc = 0.0
    for n in range(6):
        channels = 1 + n % 2
        state = random_state(grid, rng, channels=channels)
        gauge = random_gauge(grid, rng, members=channels + 1, channels=channels)
        curve = lyapunov_curve(state, gauge, tgrid)
        worst_step = max(worst_step, curve.max_increase())
        worst_end = max(worst_end, *curve.endpoint_errors())
        worst_acc = max(worst_acc, curve.accumulation_error())
    # narrow packet; spacing eps/5 at the smallest eps
    k0, dk = np.sqrt(2.0), 0.05
    width = k0 * dk
    rel = (1e-1, 1e-2, 1e-3)
    h = rel[-1] * width / 5.0
    lo, hi = 1.0 - 8 * width, 1.0 + 8 * width
    pgrid = build_uniform_grid(lo, hi, int(np.ceil((hi - lo) / h)) + 1)
    packet = gaussian_packet(pgrid, k0, dk, 20.0)
    ptimes = TemporalGrid.with_step(-40.0, 80.0, 1.0)
    eps, dev, C = strauss_convergence(packet, ptimes, rel)
    decreasing = bool(np.all(np.diff(dev) < 0))
    ok = worst_step <= mono_tol and worst_end < end_tol and worst_acc < acc_tol and decreasing
    detail = (f"max step {worst_step:.1e}, endpoints {worst_end:.1e}, accumulation "
              f"{worst_acc:.1e}; strauss dev {', '.join(f'{d:.2e}' for d in dev)} "
              f"(C~{C:.3g})")
    return CheckResult(9, "lyapunov", worst_step, mono_tol, ok, detail)


@_timed
def check_reversal(tol=1e-8):
    """10: time-reversal identity on the fig1 packet."""
    grid = build_energy_grid(FIG1_BAND[1], 256, 12, e_min=FIG1_BAND[0])
    state = fig1_packet(grid)
    tgrid = TemporalGrid.with_step(-300.0, 300.0, 0.25)
    dev = reversal_identity_check(state, GaugeFamily.unity(grid), tgrid)
    return CheckResult(10, "reversal", dev, tol, dev < tol, "fig1 packet, b = 1")


@_timed
def check_certificate(n_kernels=1000, size=12, min_trace=1e-6):
    """11: every random positive kernel yields a witness; zero is trivial."""
    rng = np.random.default_rng(SEED + 11)
    found = 0
    worst = -np.inf
    for _ in range(n_kernels):
        rank = rng.integers(1, size + 1)
        A = rng.normal(size=(size, rank)) + 1j * rng.normal(size=(size, rank))
        K = A @ A.conj().T
        K *= 10.0 ** rng.uniform(-5.5, 1.0) / np.trace(K).real
        if np.trace(K).real <= min_trace:
            K *= 2 * min_trace / np.trace(K).real
        verdict = no_invariant_lyapunov_certificate(K)
        if verdict.kind == "witness" and verdict.value < 0:
            found += 1
            worst = max(worst, verdict.value)
    zero = no_invariant_lyapunov_certificate(np.zeros((size, size)))
    ok = found == n_kernels and zero.kind == "trivial"
    return CheckResult(11, "no-invariant-lyapunov", float(worst), 0.0, ok,
                       f"{found}/{n_kernels} witnesses; zero kernel -> {zero.kind}")


@_timed
def check_gauge_scan(flat_tol=1e-8, floor_tol=1e-6):
    """12: variance under linear, quadratic and matching gauges for a real state."""
    grid = build_energy_grid(4.0, 96, 12)
    E = grid.nodes
    amps = np.exp(-0.5 * ((E - 2.0) / 0.25) ** 2) * (1 + 0.3 * np.sin(3 * E))
    state = normalize(grid_state(grid, amps))
    lams = np.linspace(-10.0, 10.0, 41)
    lin = variance_gauge_scan(state, lambda e, p: p * e, lams)
    flat = float(np.ptp(lin.variances) / np.mean(lin.variances))
    floor_err = float(np.max(np.abs(lin.variances - lin.floor)) / lin.floor)
    mus = np.linspace(0.5, 3.0, 6)
    quad = variance_gauge_scan(state, lambda e, p: p * (e - 2.0) ** 2, mus)
    increasing = bool(np.all(np.diff(quad.variances) > 0) and quad.variances[0] > lin.floor)
    mu0 = 0.8
    scan = np.linspace(-2.0, 2.0, 81)
    matched = variance_gauge_scan(state, lambda e, p: p * e * e, scan,
                                  state_phase=lambda e: mu0 * e * e)
    step = scan[1] - scan[0]
    at_match = abs(matched.argmin - mu0) <= step
    ok = flat < flat_tol and floor_err < floor_tol and increasing and at_match
    detail = (f"floor err {floor_err:.1e}; quadratic increasing {increasing}; "
              f"minimum at {matched.argmin:+.3f} vs matching {mu0:+.3f}")
    return CheckResult(12, "gauge-scan", flat, flat_tol, ok, detail)


def grid_state(grid, amps):
    from .spectral import SpectralState

    return SpectralState(grid, np.asarray(amps, dtype=complex))


@_timed
def check_kernel_round_trip(tol=1e-8, trials=12):
    """13: Schmidt construction reproduces random kernels of rank <= 4."""
    rng = np.random.default_rng(SEED + 13)
    grid = build_energy_grid(3.0, 8, 8)
    worst = 0.0
    for n in range(trials):
        channels = 1 + n % 2
        members = int(rng.integers(channels, 5))
        gauge = random_gauge(grid, rng, members=members, channels=channels)
        K = kernel_from_gauge(gauge)
        rebuilt = kernel_from_gauge(gauge_from_kernel(K))
        worst = max(worst, float(np.linalg.norm(K.matrix - rebuilt.matrix, 2)))
    # degenerate kernel: identical members in both channels
    b = np.exp(1j * grid.nodes)
    deg = np.stack([np.stack([b, 0 * b], -1), np.stack([0 * b, b], -1)])
    K = DensityKernel(grid, 2, kernel_from_gauge(GaugeFamily(grid, deg)).matrix)
    rebuilt = kernel_from_gauge(gauge_from_kernel(K))
    worst = max(worst, float(np.linalg.norm(K.matrix - rebuilt.matrix, 2)))
    return CheckResult(13, "kernel-round-trip", worst, tol, worst < tol,
                       f"{trials} random families + degenerate 2-channel")


ALL_CHECKS = (
    check_normalization, check_covariance, check_moments, check_smith,
    check_opaque_limit, check_interpolation, check_first_arrivals, check_figures,
    check_lyapunov, check_reversal, check_certificate, check_gauge_scan,
    check_kernel_round_trip,
)


def run_all(numbers=None):
    """Run the selected checks (all by default), sharing the long-window means."""
    results = []
    shared = None
    for fn in ALL_CHECKS:
        num = ALL_CHECKS.index(fn) + 1
        if numbers is not None and num not in numbers:
            continue
        if fn in (check_smith, check_interpolation, check_figures):
            if shared is None:
                shared = long_window_means()
            results.append(fn(means=shared))
        else:
            results.append(fn())
    return results
