"""Free motion and a delta barrier on the half-line x >= 0 (Dirichlet wall at 0).

For V(x) = g delta(x - a) the regular solution is sin(kr) inside and
|z| sin(kr + delta) outside, with

    z(k) = 1 + (2g/k) sin(ka) [cos(ka) - i sin(ka)] = 1 - (i g / k) (1 - exp(-2ika)).

Since Im z <= 0 and z never crosses the negative real axis, delta = arg z
is the continuous branch in (-pi, 0] with delta -> 0 at high energy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import GridCoverageError, IncompatibleGridError, InvalidArgument
from .observables import GaugeFamily, moments_distribution, moments_spectral, temporal_distribution
from .spectral import HBAR, MASS, TemporalGrid, build_energy_grid, build_uniform_grid, time_reverse

CHANNELS = ("in", "out", "theta")


@dataclass(frozen=True)
class HalfLinePotential:
    kind: str = "free"
    g: float = 0.0
    a: float = 0.0

    def __post_init__(self):
        if self.kind not in ("free", "delta"):
            raise InvalidArgument(f"unknown potential kind {self.kind!r}")
        if self.kind == "delta" and not (self.a > 0 and self.g >= 0):
            raise InvalidArgument("delta barrier needs a > 0 and g >= 0")

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def delta(cls, g, a):
        return cls("delta", float(g), float(a))

    @property
    def trivial(self):
        return self.kind == "free" or self.g == 0


def _wavenumber(E):
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0):
        raise InvalidArgument("energies must be positive")
    return np.sqrt(2.0 * MASS * E) / HBAR


def _matching(k, g, a):
    """z(k) and dz/dk for the delta barrier."""
    e = np.exp(-2j * k * a)
    z = 1.0 - 1j * g / k * (1.0 - e)
    dz = 1j * g / k ** 2 * (1.0 - e) + 2.0 * g * a / k * e
    return z, dz


def free_eigenfunction(r, E):
    """<r|E_f> = (i/hbar) sqrt(m / 2 pi k) (exp(-ikr) - exp(ikr))."""
    k = _wavenumber(E)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidArgument("positions must be non-negative")
    return (1j / HBAR) * np.sqrt(MASS / (2 * np.pi * k)) * (np.exp(-1j * k * r) - np.exp(1j * k * r))


def delta_phase_shift(E, g, a):
    """Phase shift and its energy derivative for g delta(x - a)."""
    k = _wavenumber(E)
    if g < 0 or a <= 0:
        raise InvalidArgument("need g >= 0 and a > 0")
    if g == 0:
        zero = np.zeros_like(k)
        return zero, zero
    z, dz = _matching(k, g, a)
    delta = np.angle(z)
    ddelta = np.imag(dz / z) * MASS / (HBAR ** 2 * k)
    return delta, ddelta


def phase_shift(E, potential):
    if potential.trivial:
        k = _wavenumber(E)
        return np.zeros_like(k), np.zeros_like(k)
    return delta_phase_shift(E, potential.g, potential.a)


def resonances(potential, e_max, e_min=0.0):
    """(energy, width) of the narrow cavity resonances below ``e_max``.

    They sit just below k a = n pi where Re z = 1 + (g/k) sin(2ka) vanishes;
    the width is 2 / delta'(E) at that point.
    """
    if potential.trivial:
        return []
    g, a = potential.g, potential.a
    out = []
    n = 1
    while True:
        k_lo, k_hi = (n * np.pi - np.pi / 4) / a, n * np.pi / a
        if 0.5 * (HBAR * k_lo) ** 2 / MASS > e_max:
            break
        n += 1
        f = lambda k: 1.0 + (g / k) * np.sin(2 * k * a)
        if f(k_lo) >= 0:
            continue
        k_r = brentq(f, k_lo, k_hi, xtol=1e-15, rtol=1e-15)
        E_r = 0.5 * (HBAR * k_r) ** 2 / MASS
        if not e_min < E_r < e_max:
            continue
        _, d = delta_phase_shift(E_r, g, a)
        out.append((float(E_r), float(2.0 / abs(d))))
    return out


def scattering_grid(potential, e_max, n_panels, nodes_per_panel, e_min=0.0):
    """Panel grid with graded refinement around every narrow resonance."""
    refine = [(c, w) for c, w in resonances(potential, e_max, e_min)
              if w < (e_max - e_min) / n_panels]
    return build_energy_grid(e_max, n_panels, nodes_per_panel, e_min=e_min, refine=refine)


def narrowest_width(potential, e_min, e_max):
    """Smallest resonance width in (e_min, e_max), or None."""
    widths = [w for _, w in resonances(potential, e_max, e_min)]
    return min(widths) if widths else None


def resolving_grid(potential, e_min, e_max, *, points_per_width=12, default_nodes=4001,
                   max_nodes=1_000_000):
    """Uniform grid whose spacing resolves every resonance in the band.

    Uniform spacing keeps the long-window transforms on the FFT path; the
    spacing is the narrowest width over ``points_per_width``.
    """
    width = narrowest_width(potential, e_min, e_max)
    n = default_nodes
    if width is not None:
        n = max(n, int(np.ceil((e_max - e_min) * points_per_width / width)) + 1)
    if n > max_nodes:
        raise GridCoverageError(
            f"resolving the narrowest resonance needs {n} nodes (> {max_nodes})")
    return build_uniform_grid(e_min, e_max, n)


def resonance_window(potential, grid, t_center=0.0, *, lifetimes=15.0, half_span=None,
                     step_fraction=0.95):
    """Symmetric time window long enough for resonant tails to decay.

    The half span is ``lifetimes`` / (narrowest width) unless given; the step
    sits just inside the Nyquist bound pi / E_max.
    """
    if half_span is None:
        width = narrowest_width(potential, grid.e_min, grid.e_max)
        half_span = lifetimes / width if width is not None else 1000.0
    dt = step_fraction * np.pi * HBAR / grid.e_max
    return TemporalGrid.with_step(t_center - half_span, t_center + half_span, dt)


@dataclass(frozen=True, eq=False)
class PhaseShiftProfile:
    grid: object
    delta: np.ndarray
    ddelta: np.ndarray
    potential: HalfLinePotential

    def max_step(self):
        return float(np.max(np.abs(np.diff(self.delta)))) if self.delta.size > 1 else 0.0


def phase_shift_profile(grid, potential):
    d, dd = phase_shift(grid.nodes, potential)
    d.setflags(write=False)
    dd.setflags(write=False)
    return PhaseShiftProfile(grid, d, dd, potential)


def _check_profile(state, profile):
    if not state.grid.same_as(profile.grid):
        raise IncompatibleGridError("phase-shift profile lives on another grid")


def map_asymptotic(state_in, profile, target):
    """In-asymptote amplitudes -> out (times e^{2i delta}) or io (times e^{i delta})."""
    _check_profile(state_in, profile)
    factor = {"in": 0.0, "out": 2.0, "io": 1.0}.get(target)
    if factor is None:
        raise InvalidArgument(f"unknown target {target!r}")
    return state_in.with_amps(state_in.amps * np.exp(1j * factor * profile.delta)[:, None])


def smith_delay(state_in, profile):
    """2 hbar int (d delta / dE) |psi_in(E)|^2 dE."""
    _check_profile(state_in, profile)
    return 2.0 * HBAR * float(state_in.grid.integrate(profile.ddelta * state_in.density))


@dataclass(frozen=True)
class ArrivalMeans:
    mean_in: float
    mean_out: float
    mean_io: float
    delay: float
    source: str

    @property
    def identity_error(self):
        return abs((self.mean_out - self.mean_in) - self.delay)

    @property
    def interpolation_error(self):
        return abs(self.mean_io - 0.5 * (self.mean_in + self.mean_out))


def arrival_mean_relations(state_in, profile, tgrid=None):
    """Mean arrival times at the origin of the in, out and io asymptotes.

    With a time grid the means come from the sampled densities (window-mass
    checked); without one from the spectral moment formula.
    """
    gauge = GaugeFamily.unity(state_in.grid, state_in.channels)
    means = []
    for target in ("in", "out", "io"):
        st = map_asymptotic(state_in, profile, target)
        if tgrid is None:
            means.append(moments_spectral(st, gauge, "arrival").mean)
        else:
            dist = temporal_distribution(st, gauge, tgrid, "arrival")
            means.append(moments_distribution(dist).mean)
    source = "spectral" if tgrid is None else "distribution"
    return ArrivalMeans(*means, smith_delay(state_in, profile), source)


def reversed_in_state(state_in, profile):
    """In-asymptote of the time-reversed scattering state: conj(psi_out)."""
    return time_reverse(map_asymptotic(state_in, profile, "out"))


def first_arrival_distribution(state, a, tgrid, **kw):
    """First arrival at x = a: arrival density with gauge exp(i k a)."""
    if a < 0:
        raise InvalidArgument("arrival point must satisfy a >= 0")
    gauge = GaugeFamily.first_arrival(state.grid, a, state.channels)
    return temporal_distribution(state, gauge, tgrid, "arrival", **kw)


def eigenfunction(r, E, potential, channel="in"):
    """<r|E_channel> on a grid of positions, shape (len(r), len(E)).

    ``in`` is |E_+>, ``out`` is |E_->, ``theta`` the real eigenfunction.
    """
    if channel not in CHANNELS:
        raise InvalidArgument(f"unknown channel {channel!r}")
    k = _wavenumber(E)[None, :]
    r = np.asarray(r, dtype=float)[:, None]
    norm = np.sqrt(2.0 * MASS / (np.pi * k)) / HBAR
    if potential.trivial:
        return (norm * np.sin(k * r)).astype(complex)
    z, _ = _matching(k, potential.g, potential.a)
    delta = np.angle(z)
    inside = np.sin(k * r) / np.abs(z)
    outside = np.sin(k * r + delta)
    real = norm * np.where(r < potential.a, inside, outside)
    phase = {"in": 1.0, "theta": 0.0, "out": -1.0}[channel]
    return real * np.exp(1j * phase * delta)


@dataclass(frozen=True)
class PositionDensity:
    r: np.ndarray
    density: np.ndarray
    t: float

    def norm(self):
        from scipy.integrate import trapezoid

        return float(trapezoid(self.density, self.r))

    def mean(self):
        from scipy.integrate import trapezoid

        return float(trapezoid(self.r * self.density, self.r) / self.norm())

    def leading_edge(self, level=0.1):
        """Largest r where the density reaches ``level`` times its peak."""
        above = np.nonzero(self.density >= level * np.max(self.density))[0]
        return float(self.r[above[-1]])


def position_density(state, channel, potential, r_grid, t, *, norm_tol=1e-3):
    """|psi(r, t)|^2 from the eigenfunction expansion on ``channel``.

    ``state`` holds the coefficients on that channel's eigenbasis (for
    ``in`` these are the in-asymptote amplitudes).
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid < 0):
        raise InvalidArgument("positions must be non-negative")
    grid = state.grid
    coef = grid.weights * state.amps[:, 0] * np.exp(-1j * grid.nodes * t / HBAR)
    psi = np.empty(r_grid.size, dtype=complex)
    block = max(1, 2_000_000 // grid.size)
    for s in range(0, r_grid.size, block):
        psi[s:s + block] = eigenfunction(r_grid[s:s + block], grid.nodes, potential, channel) @ coef
    dens = PositionDensity(r_grid, np.abs(psi) ** 2, float(t))
    if norm_tol is not None and dens.norm() < 1.0 - norm_tol:
        raise GridCoverageError(
            f"position window holds {dens.norm():.5f} of the state at t = {t:g}")
    return dens
