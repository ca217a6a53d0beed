"""Energy grids, spectral states and the energy -> time transform.

Units are dimensionless with hbar = m = 1 everywhere in the package.

Reduction order: every sum over energies is carried out either as one
``numpy`` matrix product per fixed block of time samples (panel grids) or
as a single chirp-z transform (uniform grids). Block sizes depend only on
the array shapes, so repeated calls with equal inputs give identical bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import fft as sp_fft
from scipy import integrate

from .errors import (
    DegenerateStateError,
    GridCoverageError,
    IncompatibleGridError,
    InvalidArgument,
)

HBAR = 1.0
MASS = 1.0

_BLOCK_ELEMENTS = 2_000_000


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def _reference_panel(n):
    """Gauss-Legendre nodes, weights and differentiation matrix on [-1, 1]."""
    x, w = leggauss(n)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return x, w, D


@dataclass(frozen=True, eq=False)
class EnergyGrid:
    """Quadrature nodes and weights on ``[e_min, e_max]``.

    ``scheme`` is ``"gauss-legendre"`` (composite panels, ``edges`` holds the
    panel boundaries) or ``"uniform"`` (trapezoid rule).
    """

    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    e_min: float
    e_max: float
    edges: np.ndarray = field(default=None)
    nodes_per_panel: int = 0

    def __post_init__(self):
        if np.any(np.diff(self.nodes) <= 0):
            raise InvalidArgument("grid nodes must be strictly increasing")
        if self.nodes[0] < 0:
            raise InvalidArgument("grid nodes must be non-negative")
        if np.any(self.weights <= 0):
            raise InvalidArgument("quadrature weights must be positive")

    @property
    def size(self):
        return self.nodes.size

    @property
    def k(self):
        """Wavenumbers sqrt(2 m E) / hbar at the nodes."""
        return np.sqrt(2.0 * MASS * self.nodes) / HBAR

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))

    def derivative(self, values):
        """d/dE of node samples (along axis 0).

        Panel grids differentiate the interpolating polynomial of each panel;
        uniform grids use fourth-order finite differences.
        """
        values = np.asarray(values)
        if self.scheme == "gauss-legendre":
            n = self.nodes_per_panel
            _, _, D = _reference_panel(n)
            widths = np.diff(self.edges)
            shaped = values.reshape((widths.size, n) + values.shape[1:])
            out = np.einsum("ij,pj...->pi...", D, shaped)
            scale = (2.0 / widths).reshape((-1, 1) + (1,) * (values.ndim - 1))
            return (out * scale).reshape(values.shape)
        return _fd4(values, self.nodes[1] - self.nodes[0])

    def same_as(self, other):
        return self is other or (
            self.scheme == other.scheme
            and self.size == other.size
            and np.array_equal(self.nodes, other.nodes)
        )


def _fd4(f, h):
    f = np.asarray(f)
    if f.shape[0] < 5:
        return np.gradient(f, h, axis=0, edge_order=1)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    d[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    d[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    d[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return d


def _graded_edges(center, width, span, lo, hi):
    """Breakpoints c, c +- width * 2**m for m >= -2 up to ``span``."""
    pts = [center]
    step = 0.25 * width
    while step < span:
        pts.extend((center - step, center + step))
        step *= 2.0
    return [p for p in pts if lo < p < hi]


def build_energy_grid(e_max, n_panels, nodes_per_panel, *, e_min=0.0,
                      refine=(), grade_levels=None):
    """Composite Gauss-Legendre grid on ``[e_min, e_max]``.

    The first uniform cell is split geometrically (ratio 1/2) toward
    ``e_min`` to resolve the ``1/sqrt(k)`` behaviour of the eigenfunctions
    near threshold. ``refine`` is a sequence of ``(center, width)`` pairs
    around which graded panels are inserted (sharp resonances).
    """
    if not e_max > e_min or e_min < 0:
        raise InvalidArgument("need 0 <= e_min < e_max")
    if n_panels < 1 or nodes_per_panel < 1:
        raise InvalidArgument("panel and node counts must be >= 1")
    n_panels, nodes_per_panel = int(n_panels), int(nodes_per_panel)
    if grade_levels is None:
        grade_levels = min(6, n_panels // 16)
    grade_levels = max(0, min(grade_levels, n_panels - 1))
    n_uniform = n_panels - grade_levels
    edges = np.linspace(e_min, e_max, n_uniform + 1)
    h = edges[1] - edges[0]
    if grade_levels:
        first = e_min + h / 2.0 ** np.arange(grade_levels, 0, -1)
        edges = np.concatenate(([e_min], first, edges[1:]))
    if refine:
        extra = []
        for center, width in refine:
            if width <= 0:
                raise InvalidArgument("refinement width must be positive")
            extra.extend(_graded_edges(center, width, h, e_min, e_max))
        edges = np.unique(np.concatenate((edges, extra)))
        # drop slivers that would leave near-empty panels
        keep = np.concatenate(([True], np.diff(edges) > 1e-14 * (e_max - e_min)))
        edges = edges[keep]
        edges[-1] = e_max
    x, w, _ = _reference_panel(nodes_per_panel)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return EnergyGrid(_frozen(nodes), _frozen(weights), "gauss-legendre",
                      float(e_min), float(e_max), _frozen(edges), nodes_per_panel)


def build_uniform_grid(e_min, e_max, n_nodes):
    """Uniform trapezoid grid including both end points."""
    if not e_max > e_min or e_min < 0:
        raise InvalidArgument("need 0 <= e_min < e_max")
    if n_nodes < 2:
        raise InvalidArgument("uniform grid needs at least 2 nodes")
    nodes = np.linspace(e_min, e_max, int(n_nodes))
    h = nodes[1] - nodes[0]
    weights = np.full(nodes.size, h)
    weights[[0, -1]] = 0.5 * h
    return EnergyGrid(_frozen(nodes), _frozen(weights), "uniform",
                      float(e_min), float(e_max))


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Amplitudes psi(E_j, alpha) in a time-reversal-real energy basis."""

    grid: EnergyGrid
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.ndim == 1:
            amps = amps[:, None]
        if amps.ndim != 2 or amps.shape[0] != self.grid.size:
            raise IncompatibleGridError(
                f"amplitudes of shape {amps.shape} do not fit a grid of "
                f"{self.grid.size} nodes")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def channels(self):
        return self.amps.shape[1]

    @property
    def density(self):
        """|psi(E)|^2 summed over channels."""
        return np.sum(np.abs(self.amps) ** 2, axis=1)

    def norm(self):
        return float(np.sqrt(self.grid.integrate(self.density)))

    def inner(self, other):
        if not self.grid.same_as(other.grid):
            raise IncompatibleGridError("states live on different grids")
        return complex(self.grid.integrate(np.sum(np.conj(self.amps) * other.amps, axis=1)))

    def expect_energy(self):
        return float(self.grid.integrate(self.grid.nodes * self.density))

    def energy_width(self):
        mean = self.expect_energy()
        return float(np.sqrt(self.grid.integrate((self.grid.nodes - mean) ** 2 * self.density)))

    def with_amps(self, amps):
        return SpectralState(self.grid, amps)

    def is_real(self, tol=1e-12):
        return bool(np.max(np.abs(self.amps.imag)) <= tol * max(1.0, np.max(np.abs(self.amps))))


def normalize(state):
    n = state.norm()
    if not n > 0 or not np.isfinite(n):
        raise DegenerateStateError("cannot normalize a zero state")
    return state.with_amps(state.amps / n)


def time_reverse(state):
    """Antiunitary time reversal; complex conjugation in the real basis."""
    return state.with_amps(np.conj(state.amps))


def evolve(state, t):
    """Schroedinger evolution by time ``t``: amplitudes times exp(-i E t)."""
    phase = np.exp(-1j * state.grid.nodes * t / HBAR)
    return state.with_amps(state.amps * phase[:, None])


def packet_k_amplitude(k, k0, dk, beta):
    """[1 - exp(-beta k^2)] exp(-(k - k0)^2 / (4 dk^2)) for k >= 0."""
    k = np.asarray(k, dtype=float)
    return -np.expm1(-beta * k * k) * np.exp(-((k - k0) ** 2) / (4.0 * dk * dk))


def gaussian_packet(grid, k0, dk, x0, beta=0.5, *, coverage=0.99):
    """Incoming Gaussian packet of wavenumber magnitude ``|k0|`` centred at ``x0``.

    The energy amplitude is psi(k) / sqrt(dE/dk) exp(+i k x0), which places
    the packet at ``x0`` moving toward the origin at t = 0.
    """
    if not dk > 0:
        raise InvalidArgument("dk must be positive")
    if beta < 0:
        raise InvalidArgument("beta must be non-negative")
    k0 = abs(float(k0))
    k = grid.k
    psi_k = packet_k_amplitude(k, k0, dk, beta)
    jac = HBAR * HBAR * k / MASS
    amp = np.divide(psi_k, np.sqrt(jac), out=np.zeros_like(psi_k), where=jac > 0)
    amps = amp * np.exp(1j * k * x0)

    def dens(q):
        return packet_k_amplitude(q, k0, dk, beta) ** 2

    width = 12.0 * dk
    lo, hi = max(0.0, k0 - width), k0 + width
    exact = integrate.quad(dens, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
    exact += integrate.quad(dens, 0.0, lo, limit=200)[0] if lo > 0 else 0.0
    exact += integrate.quad(dens, hi, np.inf, limit=200)[0]
    on_grid = grid.integrate(np.abs(amps) ** 2)
    if on_grid < coverage * exact:
        raise GridCoverageError(
            f"grid holds {on_grid / exact:.4f} of the packet norm (< {coverage})")
    return normalize(SpectralState(grid, amps))


def random_state(grid, rng, channels=1, n_bumps=3, max_shift=15.0):
    """Smooth random state made of Gaussian bumps with linear phases.

    Bumps sit in the middle 30% of the grid so amplitudes vanish at both
    ends, which keeps every temporal moment finite.
    """
    lo, hi = grid.e_min, grid.e_max
    span = hi - lo
    E = grid.nodes
    amps = np.zeros((grid.size, channels), dtype=complex)
    for a in range(channels):
        for _ in range(n_bumps):
            c = rng.uniform(lo + 0.35 * span, hi - 0.35 * span)
            s = rng.uniform(0.025, 0.06) * span
            coef = rng.normal() + 1j * rng.normal()
            shift = rng.uniform(-max_shift, max_shift)
            amps[:, a] += coef * np.exp(-0.5 * ((E - c) / s) ** 2 + 1j * shift * E)
    return normalize(SpectralState(grid, amps))


@dataclass(frozen=True, eq=False)
class TemporalGrid:
    """Uniform time samples."""

    times: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        if t.size < 2:
            raise InvalidArgument("time grid needs at least two samples")
        d = np.diff(t)
        if np.any(d <= 0) or np.ptp(d) > 1e-9 * abs(d[0]) * t.size:
            raise InvalidArgument("time samples must be uniformly spaced")
        object.__setattr__(self, "times", t)

    @classmethod
    def span(cls, t_min, t_max, n):
        return cls(np.linspace(t_min, t_max, int(n)))

    @classmethod
    def with_step(cls, t_min, t_max, dt):
        n = int(np.ceil((t_max - t_min) / dt - 1e-9)) + 1
        return cls(t_min + dt * np.arange(n))

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def size(self):
        return self.times.size

    def shifted(self, t0):
        return TemporalGrid(self.times + t0)

    def check_nyquist(self, grid):
        limit = np.pi * HBAR / grid.e_max
        if self.dt > limit * (1 + 1e-12):
            raise InvalidArgument(
                f"time step {self.dt:.4g} exceeds the Nyquist limit {limit:.4g} "
                f"for E_max = {grid.e_max:g}")


def _direct_transform(grid, F, times, sign):
    wF = grid.weights[:, None] * F
    E = grid.nodes
    out = np.empty((times.size, F.shape[1]), dtype=complex)
    block = max(1, _BLOCK_ELEMENTS // grid.size)
    for s in range(0, times.size, block):
        t = times[s:s + block]
        out[s:s + block] = np.exp((sign * 1j / HBAR) * np.outer(t, E)) @ wF
    return out


def _czt_transform(grid, F, times, sign):
    """Bluestein evaluation for uniform energies and uniform times.

    sum_j x_j exp(i s j k h dt) with jk = (j^2 + k^2 - (k - j)^2) / 2 becomes
    one FFT convolution. Steps are taken from the end points so the phases
    carry no accumulated rounding from neighbouring differences.
    """
    N, M = grid.size, times.size
    h = (grid.nodes[-1] - grid.nodes[0]) / (N - 1)
    dt = (times[-1] - times[0]) / (M - 1)
    E0, t0 = grid.nodes[0], times[0]
    alpha = sign * h * dt / HBAR
    j = np.arange(N, dtype=float)
    x = grid.weights[:, None] * F
    x = x * np.exp(1j * (sign * h * t0 / HBAR * j + 0.5 * alpha * j * j))[:, None]
    L = sp_fft.next_fast_len(N + M - 1)
    m = np.arange(-(N - 1), M, dtype=float)
    chirp = np.zeros(L, dtype=complex)
    chirp[:m.size] = np.exp(-0.5j * alpha * m * m)
    conv = sp_fft.ifft(sp_fft.fft(x, n=L, axis=0) * sp_fft.fft(chirp)[:, None], axis=0)
    k = np.arange(M, dtype=float)
    post = np.exp(1j * (0.5 * alpha * k * k + sign * E0 * times / HBAR))
    return conv[N - 1:N - 1 + M] * post[:, None]


def transform(grid, F, times, kind):
    """(2 pi hbar)^(-1/2) sum_j w_j exp(-+ i E_j t / hbar) F(E_j) for each column of F.

    ``kind`` selects the sign: ``"clock"`` uses exp(-i E t), ``"arrival"``
    exp(+i E t).
    """
    if kind not in ("clock", "arrival"):
        raise InvalidArgument(f"unknown kind {kind!r}")
    sign = -1.0 if kind == "clock" else 1.0
    F = np.asarray(F, dtype=complex)
    one_d = F.ndim == 1
    if one_d:
        F = F[:, None]
    times = np.asarray(times, dtype=float)
    if grid.scheme == "uniform" and times.size > 2 and grid.size * times.size > _BLOCK_ELEMENTS:
        out = _czt_transform(grid, F, times, sign)
    else:
        out = _direct_transform(grid, F, times, sign)
    out /= np.sqrt(2.0 * np.pi * HBAR)
    return out[:, 0] if one_d else out


def _channel_gauge(state, b):
    b = np.asarray(b, dtype=complex)
    if b.ndim == 1:
        b = b[:, None]
    if b.shape != state.amps.shape:
        raise IncompatibleGridError(
            f"gauge samples of shape {b.shape} do not match the state {state.amps.shape}")
    return b


def energy_time_amplitude(state, b, tgrid, kind):
    """eta(t_k) = (2 pi hbar)^(-1/2) sum_j w_j e^{-+iE_j t_k} sum_a conj(psi) b."""
    b = _channel_gauge(state, b)
    tgrid.check_nyquist(state.grid)
    f = np.sum(np.conj(state.amps) * b, axis=1)
    return transform(state.grid, f, tgrid.times, kind)


@dataclass(frozen=True, eq=False)
class TemporalDistribution:
    grid: TemporalGrid
    density: np.ndarray
    kind: str

    def __post_init__(self):
        d = _frozen(self.density)
        if d.shape != self.grid.times.shape:
            raise InvalidArgument("density and time grid differ in length")
        if np.any(d < 0):
            raise InvalidArgument("temporal density must be non-negative")
        object.__setattr__(self, "density", d)

    @property
    def times(self):
        return self.grid.times

    def mass(self):
        return float(integrate.trapezoid(self.density, self.times))

    def cumulative(self):
        """Running trapezoid integral from the window start."""
        return integrate.cumulative_trapezoid(self.density, self.times, initial=0.0)

    def at(self, times):
        """Cubic-spline resampling; zero outside the window."""
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(self.times, self.density)
        times = np.asarray(times, dtype=float)
        inside = (times >= self.times[0]) & (times <= self.times[-1])
        return np.where(inside, spline(np.clip(times, self.times[0], self.times[-1])), 0.0)
