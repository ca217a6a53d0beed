"""Lyapunov curves built from arrival densities, and the Strauss kernel.

For an arrival observable the operator

    L = int_{-inf}^0 dt exp(-iHt) Pi_0 exp(iHt)

has <psi_t|L|psi_t> = 1 - int_{-inf}^t Pi(t') dt', which falls from 1 to 0.
With b = 1 its energy kernel, regularized by exp(eps t), is the Strauss
kernel (i / 2 pi hbar) / (E - E' + i eps).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sp_fft

from .errors import IncompatibleGridError, InvalidArgument
from .observables import DensityKernel, GaugeFamily, temporal_distribution
from .spectral import HBAR, TemporalGrid, time_reverse

MONOTONE_TOL = 1e-10
_DENSE_LIMIT = 6000


@dataclass(frozen=True, eq=False)
class LyapunovCurve:
    tgrid: TemporalGrid
    values: np.ndarray
    accumulated: np.ndarray | None = None

    @property
    def times(self):
        return self.tgrid.times

    def max_increase(self):
        """Largest step upward; <= MONOTONE_TOL for a Lyapunov curve."""
        if self.values.size < 2:
            return 0.0
        return float(np.max(np.diff(self.values)))

    def is_monotone(self, tol=MONOTONE_TOL):
        return self.max_increase() <= tol

    def endpoint_errors(self):
        """Distances of the first and last values from 1 and 0."""
        return abs(1.0 - float(self.values[0])), abs(float(self.values[-1]))

    def accumulation_error(self):
        """sup |curve + accumulated probability - 1|."""
        if self.accumulated is None:
            raise InvalidArgument("curve carries no accumulated probability")
        return float(np.max(np.abs(self.values + self.accumulated - 1.0)))

    def shifted_mismatch(self, other, t0):
        """sup |self(t) - other(t - t0)| on the overlap, with linear resampling."""
        t = self.times
        lo, hi = other.times[0] + t0, other.times[-1] + t0
        inside = (t >= lo) & (t <= hi)
        resampled = np.interp(t[inside] - t0, other.times, other.values)
        return float(np.max(np.abs(self.values[inside] - resampled)))


def lyapunov_curve(state, gauge, tgrid, **kw):
    """1 - accumulated arrival probability, from the window start.

    The window-mass check of the arrival density applies (``min_mass``).
    """
    dist = temporal_distribution(state, gauge, tgrid, "arrival", **kw)
    acc = dist.cumulative()
    acc.setflags(write=False)
    values = 1.0 - acc
    values.setflags(write=False)
    return LyapunovCurve(tgrid, values, acc)


@dataclass(frozen=True, eq=False)
class StraussKernel:
    """(i / 2 pi hbar) / (E_j - E_j' + i eps), diagonal in the channel index."""

    grid: object
    eps: float
    channels: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidArgument("Strauss regularization eps must be positive")

    @classmethod
    def for_state(cls, state, eps=None, rel=1e-3):
        """Default eps = rel times the energy width of ``state``."""
        if eps is None:
            eps = rel * state.energy_width()
        return cls(state.grid, float(eps), state.channels)

    def matrix(self):
        """Energy kernel (without quadrature weights), nodes x nodes."""
        E = self.grid.nodes
        if E.size > _DENSE_LIMIT:
            raise InvalidArgument(f"dense Strauss kernel limited to {_DENSE_LIMIT} nodes")
        return (1j / (2 * np.pi * HBAR)) / (E[:, None] - E[None, :] + 1j * self.eps)

    def weighted_spectrum(self):
        """Eigenvalues of W^1/2 K W^1/2, the operator as seen by the quadrature.

        The exact operator satisfies 0 <= L_eps <= 1. The kernel itself is
        Hermitian, so this is the meaningful discrete check; eigenvalues
        above 1 signal a grid too coarse for eps.
        """
        sw = np.sqrt(self.grid.weights)
        return np.linalg.eigvalsh(sw[:, None] * self.matrix() * sw[None, :])

    def resolution(self):
        """eps over the largest node spacing; trapezoid-type sums need >~ 4."""
        return self.eps / float(np.max(np.diff(self.grid.nodes)))

    def apply(self, vectors):
        """K @ vectors for vectors of shape (nodes, m)."""
        if self.grid.scheme == "uniform":
            return self._apply_toeplitz(vectors)
        return self.matrix() @ vectors

    def _apply_toeplitz(self, vectors):
        N = self.grid.size
        h = (self.grid.nodes[-1] - self.grid.nodes[0]) / (N - 1)
        lags = np.arange(-(N - 1), N, dtype=float) * h
        col = (1j / (2 * np.pi * HBAR)) / (lags + 1j * self.eps)
        L = sp_fft.next_fast_len(3 * N - 2)
        kf = sp_fft.fft(col, n=L)
        vf = sp_fft.fft(vectors, n=L, axis=0)
        full = sp_fft.ifft(vf * kf[:, None], axis=0)
        # entry j collects lag (j - j') at offset N - 1
        return full[N - 1:2 * N - 1]


def strauss_expectation(state, kernel, tgrid):
    """<psi_t|L_S|psi_t> by double quadrature over the energy grid."""
    if not state.grid.same_as(kernel.grid):
        raise IncompatibleGridError("Strauss kernel lives on another grid")
    if kernel.channels != state.channels:
        raise IncompatibleGridError("Strauss kernel and state differ in channel count")
    times = np.asarray(tgrid.times)
    grid = state.grid
    values = np.empty(times.size)
    # evolve all channels at once: columns are (time, channel) pairs
    phase = np.exp(-1j * np.outer(grid.nodes, times) / HBAR)
    c = state.channels
    block = max(1, 64 // c)
    for s in range(0, times.size, block):
        ph = phase[:, s:s + block]
        u = (grid.weights[:, None, None] * state.amps[:, None, :] * ph[:, :, None])
        u = u.reshape(grid.size, -1)
        Ku = kernel.apply(u)
        vals = np.sum(np.conj(u) * Ku, axis=0).reshape(ph.shape[1], c).sum(axis=1)
        values[s:s + block] = vals.real
    values.setflags(write=False)
    return LyapunovCurve(tgrid, values)


def strauss_convergence(state, tgrid, rels=(1e-1, 1e-2, 1e-3)):
    """Sup deviation of the Strauss expectation from the b = 1 curve per eps.

    Returns (eps values, deviations, fitted C in deviation ~ C eps).
    """
    ref = lyapunov_curve(state, GaugeFamily.unity(state.grid, state.channels), tgrid)
    eps, dev = [], []
    for r in rels:
        kernel = StraussKernel.for_state(state, rel=r)
        curve = strauss_expectation(state, kernel, tgrid)
        eps.append(kernel.eps)
        dev.append(float(np.max(np.abs(curve.values - ref.values))))
    eps, dev = np.array(eps), np.array(dev)
    return eps, dev, float(np.max(dev / eps))


def reversal_identity_check(state, gauge, tgrid):
    """sup_t |<(Theta psi)_t|L|(Theta psi)_t> - <psi_{-t}|Theta L Theta|psi_{-t}>|.

    The left side is the Lyapunov curve of conj(psi). Theta L Theta has the
    conjugated kernel, which integrates the clock density of psi under the
    conjugate gauge from t to +inf; the right side is evaluated that way.
    """
    lhs = lyapunov_curve(time_reverse(state), gauge, tgrid)
    dist = temporal_distribution(state, gauge.conj(), tgrid, "clock")
    rhs = 1.0 - dist.cumulative()
    return float(np.max(np.abs(lhs.values - rhs)))


@dataclass(frozen=True)
class LyapunovVerdict:
    """Outcome of the no-invariant-Lyapunov argument for one kernel.

    ``kind`` is "witness" when a vector v with <v|-conj(K)|v> < 0 was found
    (so Theta K Theta = -K cannot hold with both sides positive) and
    "trivial" for a vanishing kernel.
    """

    kind: str
    value: float
    vector: np.ndarray | None = None


def no_invariant_lyapunov_certificate(kernel, *, zero_tol=1e-12, herm_tol=1e-10):
    """Witness that a nonzero positive kernel has a non-positive negated reverse."""
    K = kernel.matrix if isinstance(kernel, DensityKernel) else np.asarray(kernel, dtype=complex)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidArgument("kernel must be a square matrix")
    scale = float(np.max(np.abs(K))) if K.size else 0.0
    if np.max(np.abs(K - K.conj().T), initial=0.0) > herm_tol * max(1.0, scale):
        raise InvalidArgument("kernel is not Hermitian")
    if np.linalg.norm(K, 2) < zero_tol:
        return LyapunovVerdict("trivial", 0.0)
    Kbar = np.conj(0.5 * (K + K.conj().T))
    w, v = np.linalg.eigh(Kbar)
    vec = v[:, -1]
    value = float(np.real(np.vdot(vec, -Kbar @ vec)))
    if not value < 0:
        raise InvalidArgument("kernel is not positive: no witness exists")
    return LyapunovVerdict("witness", value, vec)
