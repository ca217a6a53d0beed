"""Covariant time densities, moments, gauge families and density kernels.

A gauge family is a set of functions b_i(E, alpha) whose outer products
build the density kernel 2 pi hbar <E,a|Pi_0|E',a'>. The temporal density
of a state is sum_i |eta_i(t)|^2 with eta_i the energy -> time transform of
f_i(E) = sum_a conj(psi(E, a)) b_i(E, a).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import eigsh

from .errors import IncompatibleGridError, InvalidArgument, WindowMassError
from .spectral import (
    HBAR,
    MASS,
    SpectralState,
    TemporalDistribution,
    transform,
)

GAUGE_TOL = 1e-10
MIN_WINDOW_MASS = 0.999


@dataclass(frozen=True, eq=False)
class GaugeFamily:
    """Members b_i(E_j, alpha), stored with shape (members, nodes, channels)."""

    grid: object
    members: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.members, dtype=complex)
        if b.ndim == 2:
            b = b[:, :, None]
        if b.ndim != 3 or b.shape[1] != self.grid.size:
            raise IncompatibleGridError(f"gauge of shape {b.shape} does not fit the grid")
        b.setflags(write=False)
        object.__setattr__(self, "members", b)

    @property
    def size(self):
        return self.members.shape[0]

    @property
    def channels(self):
        return self.members.shape[2]

    def conj(self):
        """Gauge of the time-reversed kernel."""
        return GaugeFamily(self.grid, np.conj(self.members))

    def mixed(self, unitary):
        """Members recombined by a unitary; leaves the kernel unchanged."""
        return GaugeFamily(self.grid, np.einsum("ij,jna->ina", unitary, self.members))

    def times_phase(self, phase):
        return GaugeFamily(self.grid, self.members * np.exp(1j * np.asarray(phase))[None, :, None])

    def amplitudes(self, state):
        """f_i(E_j) = sum_a conj(psi(E_j, a)) b_i(E_j, a), shape (nodes, members)."""
        if not self.grid.same_as(state.grid):
            raise IncompatibleGridError("gauge and state live on different grids")
        if self.channels != state.channels:
            raise IncompatibleGridError(
                f"gauge has {self.channels} channels, state has {state.channels}")
        return np.einsum("na,ina->ni", np.conj(state.amps), self.members)

    # constructors

    @classmethod
    def unity(cls, grid, channels=1):
        eye = np.broadcast_to(np.eye(channels)[:, None, :], (channels, grid.size, channels))
        return cls(grid, eye.astype(complex))

    @classmethod
    def from_phase(cls, grid, phase, channels=1):
        """b(E) = exp(i phase(E)) times the channel identity."""
        u = cls.unity(grid, channels)
        return u.times_phase(phase)

    @classmethod
    def linear_phase(cls, grid, lam, channels=1):
        return cls.from_phase(grid, lam * grid.nodes, channels)

    @classmethod
    def quadratic_phase(cls, grid, mu, channels=1):
        return cls.from_phase(grid, mu * grid.nodes ** 2, channels)

    @classmethod
    def first_arrival(cls, grid, a, channels=1):
        """b(E) = exp(i k a): first arrival at x = a on the half-line."""
        return cls.from_phase(grid, grid.k * a, channels)

    @classmethod
    def rotation(cls, grid, theta):
        """Two members {cos theta(E), sin theta(E)}."""
        theta = np.asarray(theta, dtype=float)
        return cls(grid, np.stack([np.cos(theta), np.sin(theta)]).astype(complex))


def random_gauge(grid, rng, members=3, channels=1, n_modes=2, strength=1.5):
    """Smooth admissible family: first ``channels`` columns of exp(i H(E)).

    H(E) is a random Hermitian matrix with slowly oscillating entries, so
    the family satisfies the completeness relation at every node exactly.
    """
    if members < channels:
        raise InvalidArgument("need at least as many members as channels")
    E = grid.nodes
    H = np.zeros((grid.size, members, members), dtype=complex)
    for _ in range(n_modes):
        A = rng.normal(size=(members, members)) + 1j * rng.normal(size=(members, members))
        A = 0.5 * (A + A.conj().T) * strength / np.sqrt(members)
        omega = rng.uniform(0.5, 2.0)
        phi = rng.uniform(0, 2 * np.pi)
        H += np.cos(omega * E + phi)[:, None, None] * A[None]
    lam, V = np.linalg.eigh(H)
    U = np.einsum("nij,nj,nkj->nik", V, np.exp(1j * lam), V.conj())
    return GaugeFamily(grid, np.transpose(U[:, :, :channels], (1, 0, 2)))


@dataclass(frozen=True)
class GaugeCheck:
    passed: bool
    deviation: float
    admissible: bool


def check_gauge_normalization(gauge, tol=GAUGE_TOL):
    """Completeness sum_i b_i(E,a) conj(b_i(E,a')) = delta_{aa'} at every node."""
    b = gauge.members
    gram = np.einsum("ina,inc->nac", b, np.conj(b))
    gram -= np.eye(gauge.channels)[None]
    dev = float(np.max(np.linalg.norm(gram, ord=2, axis=(1, 2))))
    slopes = np.diff(b, axis=1) / np.diff(gauge.grid.nodes)[None, :, None]
    admissible = bool(np.all(np.isfinite(np.sum(np.abs(slopes) ** 2, axis=0))))
    return GaugeCheck(dev < tol and admissible, dev, admissible)


def temporal_distribution(state, gauge, tgrid, kind, *, min_mass=MIN_WINDOW_MASS):
    """Pi(t_k) = sum_i |eta_i(t_k)|^2 for a clock or arrival observable.

    Raises WindowMassError when the window holds less than ``min_mass`` of
    the probability; pass ``min_mass=None`` to skip the check.
    """
    tgrid.check_nyquist(state.grid)
    F = gauge.amplitudes(state)
    eta = transform(state.grid, F, tgrid.times, kind)
    dist = TemporalDistribution(tgrid, np.sum(np.abs(eta) ** 2, axis=1), kind)
    if min_mass is not None:
        m = dist.mass()
        if m < min_mass:
            raise WindowMassError(
                f"window [{tgrid.times[0]:g}, {tgrid.times[-1]:g}] holds {m:.6f} "
                f"of the {kind} probability (< {min_mass})")
    return dist


@dataclass(frozen=True)
class MomentReport:
    mean: float
    second_moment: float
    variance: float
    source: str


def moments_spectral(state, gauge, kind):
    """Mean and second moment straight from the energy amplitudes.

    With f_i = sum_a conj(psi) b_i:
        mean   = -+ i hbar sum_i int conj(f_i) f_i' dE   (- clock, + arrival)
        second = hbar^2 sum_i int |f_i'|^2 dE
    Expanding f_i recovers the derivative term and the gauge term
    int |psi|^2 sum_i conj(b_i) b_i'. The overall sign is the one for which
    evolving a state by t0 moves the clock mean by +t0 and the arrival mean
    by -t0.
    """
    if kind not in ("clock", "arrival"):
        raise InvalidArgument(f"unknown kind {kind!r}")
    grid = state.grid
    F = gauge.amplitudes(state)
    dF = grid.derivative(F)
    sign = -1.0 if kind == "clock" else 1.0
    mean = sign * HBAR * np.real(1j * np.sum(grid.integrate(np.conj(F) * dF)))
    second = HBAR ** 2 * float(np.sum(grid.integrate(np.abs(dF) ** 2)))
    return MomentReport(float(mean), second, second - mean ** 2, "spectral")


def moments_distribution(dist, *, min_mass=MIN_WINDOW_MASS):
    """Trapezoid moments of a sampled density (never an operator square)."""
    from scipy.integrate import trapezoid

    t, p = dist.times, dist.density
    mass = trapezoid(p, t)
    if min_mass is not None and mass < min_mass:
        raise WindowMassError(f"density mass {mass:.6f} below {min_mass}")
    mean = float(trapezoid(t * p, t))
    second = float(trapezoid(t * t * p, t))
    return MomentReport(mean, second, second - mean ** 2, "distribution")


@dataclass(frozen=True, eq=False)
class DensityKernel:
    """2 pi hbar <E_j,a|Pi_0|E_j',a'> on the composite index j * channels + a."""

    grid: object
    channels: int
    matrix: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.matrix, dtype=complex)
        n = self.grid.size * self.channels
        if K.shape != (n, n):
            raise IncompatibleGridError(f"kernel shape {K.shape}, expected {(n, n)}")
        K.setflags(write=False)
        object.__setattr__(self, "matrix", K)

    def hermitian_error(self):
        K = self.matrix
        return float(np.max(np.abs(K - K.conj().T)))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def channel_diagonal(self):
        """Blocks K[(j, .), (j, .)], shape (nodes, channels, channels)."""
        c = self.channels
        K = self.matrix.reshape(self.grid.size, c, self.grid.size, c)
        idx = np.arange(self.grid.size)
        return K[idx, :, idx, :]


def kernel_from_gauge(gauge):
    B = gauge.members.reshape(gauge.size, -1)
    return DensityKernel(gauge.grid, gauge.channels, B.T @ B.conj())


def _norm_estimate(K):
    if K.shape[0] <= 64:
        return float(np.max(np.abs(np.linalg.eigvalsh(K))))
    return float(abs(eigsh(K, k=1, which="LM", return_eigenvectors=False)[0]))


def gauge_from_kernel(kernel, rel_tol=1e-10):
    """Gauge family reproducing a PSD kernel (Schmidt construction).

    Trial vectors g are node/channel unit vectors, orthonormalized in the
    metric of the kernel and taken in order of the largest remaining
    kernel diagonal; b_i = K g_i. This is a diagonally pivoted Cholesky
    factorization K = sum_i b_i b_i^dagger, stopped at numerical rank.
    """
    K = kernel.matrix
    if kernel.hermitian_error() > 1e-12 * max(1.0, np.max(np.abs(K))):
        raise InvalidArgument("kernel is not Hermitian")
    diag = kernel.channel_diagonal()
    eye = np.eye(kernel.channels)
    if np.max(np.abs(diag - eye[None])) > 1e-8:
        raise InvalidArgument("kernel channel blocks on the diagonal must be the identity")
    scale = _norm_estimate(K)
    tol = rel_tol * scale
    n = K.shape[0]
    residual = np.real(np.diag(K)).copy()
    cols = []
    for _ in range(n):
        p = int(np.argmax(residual))
        if residual[p] <= tol:
            break
        col = K[:, p].copy()
        for c in cols:
            col -= c * np.conj(c[p])
        piv = np.real(col[p])
        if piv <= tol:
            break
        col /= np.sqrt(piv)
        cols.append(col)
        residual -= np.abs(col) ** 2
    if np.min(residual) < -1e-8 * max(scale, 1.0):
        raise InvalidArgument("kernel is not positive semidefinite")
    C = np.array(cols).reshape(len(cols), n)
    # an indefinite kernel can exhaust the diagonal without being reproduced
    if np.max(np.abs(K - C.T @ C.conj()), initial=0.0) > 1e-8 * max(scale, 1.0):
        raise InvalidArgument("kernel is not positive semidefinite")
    B = C.reshape(len(cols), kernel.grid.size, kernel.channels)
    return GaugeFamily(kernel.grid, B)


def tau_state(grid, tau):
    """Components (2 pi hbar)^(-1/2) exp(-i E tau / hbar); not normalizable."""
    return np.exp(-1j * grid.nodes * tau / HBAR) / np.sqrt(2.0 * np.pi * HBAR)


def tau_overlap(state, taus):
    """<tau|psi> for each tau (single-channel states)."""
    if state.channels != 1:
        raise InvalidArgument("tau states are defined for a non-degenerate spectrum")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    vecs = np.exp(-1j * np.outer(taus, state.grid.nodes) / HBAR) / np.sqrt(2 * np.pi * HBAR)
    return np.conj(vecs) @ (state.grid.weights * state.amps[:, 0])


@dataclass(frozen=True)
class GaugeScan:
    params: np.ndarray
    variances: np.ndarray
    means: np.ndarray
    floor: float

    @property
    def argmin(self):
        return float(self.params[int(np.argmin(self.variances))])

    @property
    def minimum(self):
        return float(np.min(self.variances))


def variance_floor(state):
    """hbar^2 int |psi'|^2 dE for a real-amplitude state."""
    d = state.grid.derivative(state.amps)
    return HBAR ** 2 * float(np.sum(state.grid.integrate(np.abs(d) ** 2)))


def variance_gauge_scan(state, phase_family, params, *, state_phase=None, kind="clock"):
    """Variance of the time observable with gauge exp(i phase_family(E, p)).

    ``state`` must have real amplitudes. With ``state_phase`` the scanned
    state is exp(i state_phase(E)) psi; the reported floor always refers to
    the real amplitudes.
    """
    if not state.is_real():
        raise InvalidArgument("variance scan needs real amplitudes")
    grid = state.grid
    floor = variance_floor(state)
    scanned = state
    if state_phase is not None:
        scanned = state.with_amps(state.amps * np.exp(1j * state_phase(grid.nodes))[:, None])
    params = np.asarray(params, dtype=float)
    var = np.empty(params.size)
    mean = np.empty(params.size)
    for n, p in enumerate(params):
        gauge = GaugeFamily.from_phase(grid, phase_family(grid.nodes, p), state.channels)
        rep = moments_spectral(scanned, gauge, kind)
        var[n], mean[n] = rep.variance, rep.mean
    return GaugeScan(params, var, mean, floor)


def inverse_speed_expectation(state):
    """<1/|v|> = int |psi|^2 / sqrt(2E/m) dE."""
    v = np.sqrt(2.0 * state.grid.nodes / MASS)
    return float(state.grid.integrate(state.density / v))


__all__ = [
    "GaugeFamily", "GaugeCheck", "GaugeScan", "DensityKernel", "MomentReport",
    "SpectralState", "check_gauge_normalization", "gauge_from_kernel",
    "kernel_from_gauge", "moments_distribution", "moments_spectral",
    "random_gauge", "tau_overlap", "tau_state", "temporal_distribution",
    "variance_floor", "variance_gauge_scan", "inverse_speed_expectation",
]
