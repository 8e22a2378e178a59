"""Complex-frequency extraction from ring-down signals.

Signals are shifted to the centre of the frequency window, low-pass filtered
with a linear-phase FIR (valid part only, so a sum of damped exponentials stays
one), decimated, and fitted with the matrix-pencil method.  Frequencies are in
cycles per time unit; amplitude decay exp(-gamma t) gives Q = omega / (2 gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import signal as sps


class NoPeakFound(RuntimeError):
    pass


class IllConditionedFit(RuntimeError):
    pass


@dataclass(frozen=True)
class Resonance:
    frequency: float
    decay: float
    amplitude: float
    phase: float
    error: float = 0.0

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def Q(self) -> float:
        if self.decay <= 0:
            return math.inf
        return self.omega / (2.0 * self.decay)

    def a_over_lambda(self, a: float) -> float:
        return self.frequency * a


def _pencil(y: np.ndarray, h: float, max_order: int, rel_tol: float):
    M = y.size
    L = max(2, M // 3)
    Y = np.lib.stride_tricks.sliding_window_view(y, L + 1)
    U, s, Vh = np.linalg.svd(Y, full_matrices=False)
    if s[0] == 0:
        return np.zeros(0, complex), np.zeros(0, complex), s
    order = int(np.sum(s > rel_tol * s[0]))
    order = max(1, min(order, max_order, L))
    V = Vh[:order].T
    V1 = V[:-1]
    V2 = V[1:]
    z = np.linalg.eigvals(np.linalg.pinv(V1) @ V2)
    # amplitudes by least squares on the full record
    n = np.arange(M)
    Z = z[None, :] ** n[:, None]
    amps, *_ = np.linalg.lstsq(Z, y, rcond=None)
    return z, amps, s


def extract_resonances(signal: Sequence, dt: float, window: tuple, t0: float = 0.0,
                       max_order: int = 40, rel_tol: float = 1e-7, min_relative_amplitude: float = 1e-3,
                       edge_fraction: float = 0.02, max_samples: int = 1500) -> List[Resonance]:
    """Resonances of a uniformly sampled ring-down inside ``window = (fmin, fmax)``.

    Returned peaks are sorted by their RMS contribution over the record
    (largest first).  Raises
    :class:`NoPeakFound` if nothing significant lies in the window and
    :class:`IllConditionedFit` if every significant peak sits within
    ``edge_fraction`` of the window width from an edge.
    """
    x = np.asarray(signal)
    if x.ndim != 1 or x.size < 16:
        raise NoPeakFound("signal too short")
    if not np.all(np.isfinite(x)):
        raise NoPeakFound("signal contains non-finite values")
    fmin, fmax = window
    if not 0 <= fmin < fmax:
        raise ValueError(f"bad frequency window {window}")
    scale = float(np.max(np.abs(x)))
    if scale == 0.0:
        raise NoPeakFound("signal is identically zero")
    fc = 0.5 * (fmin + fmax)
    B = 0.5 * (fmax - fmin)
    fs = 1.0 / dt
    t = t0 + dt * np.arange(x.size)
    y = (x / scale) * np.exp(-2j * math.pi * fc * t)

    cutoff = 1.6 * B
    D = max(1, int(fs / (8.0 * B)))
    taps = np.ones(1)
    if D > 1 and cutoff < 0.5 * fs:
        numtaps = int(min(x.size // 3, max(31, 8 * fs / B))) | 1
        taps = sps.firwin(numtaps, cutoff, fs=fs, window=("kaiser", 8.0))
        y = sps.oaconvolve(y, taps, mode="valid")
    y = y[::D]
    h = dt * D
    if y.size > max_samples:
        y = y[:max_samples]
    if y.size < 8:
        raise NoPeakFound("signal too short after filtering")

    z, amps, _ = _pencil(y, h, max_order, rel_tol)
    if z.size == 0:
        raise NoPeakFound("no spectral content")
    s = np.log(z.astype(complex)) / h
    freqs = fc + s.imag / (2 * math.pi)
    decays = -s.real
    # refer amplitudes to t0: undo the filter response and the shift of the
    # first valid output sample (it corresponds to input sample len(taps) - 1)
    lag = np.arange(taps.size)
    resp = np.array([np.sum(taps * np.exp(-sk * dt * lag[::-1])) for sk in s])
    amps = amps / resp * np.exp(-s * dt * (taps.size - 1))
    if np.isrealobj(x):
        amps = 2.0 * amps
    mags = np.abs(amps) * scale
    # significance: RMS contribution over the fitted record, so that strongly
    # damped poles with large initial amplitude do not mask the ring-down
    span = 2.0 * decays * h * y.size
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        mean_sq = np.where(np.abs(span) < 1e-9, 1.0, -np.expm1(-span) / span)
    weight = mags * np.sqrt(np.nan_to_num(mean_sq, nan=0.0, posinf=np.finfo(float).max))
    peaks = []
    near_edge = []
    top = weight.max()
    for f, g, a, c, wgt in zip(freqs, decays, mags, amps, weight):
        if wgt < min_relative_amplitude * top:
            continue
        if not (fmin <= f <= fmax):
            continue
        margin = edge_fraction * (fmax - fmin)
        res = Resonance(float(f), float(g), float(a), float(np.angle(c)))
        if f - fmin < margin or fmax - f < margin:
            near_edge.append((wgt, res))
            continue
        peaks.append((wgt, res))
    if not peaks:
        if near_edge:
            raise IllConditionedFit(
                f"peak at f={near_edge[0][1].frequency:.6g} lies too close to the window edge {window}")
        raise NoPeakFound(f"no resonance found in window {window}")
    peaks.sort(key=lambda p: -p[0])
    return [r for _, r in peaks]


def dominant(resonances: Sequence[Resonance], min_q: float = 0.0) -> Resonance:
    """Largest-amplitude resonance with Q >= min_q."""
    cand = [r for r in resonances if r.Q >= min_q]
    if not cand:
        raise NoPeakFound("no resonance above the Q threshold")
    return max(cand, key=lambda r: r.amplitude)


def q_from_energy_decay(times: np.ndarray, energy: np.ndarray, frequency: float) -> float:
    """Q from the slope of log(stored energy): W ~ exp(-omega t / Q)."""
    times = np.asarray(times, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if np.any(energy <= 0):
        raise ValueError("stored energy must be positive")
    slope, _ = np.polyfit(times, np.log(energy), 1)
    if slope >= 0:
        return math.inf
    return -2.0 * math.pi * frequency / slope


def synthetic_ringdown(t, modes, noise: float = 0.0, rng=None):
    """Sum of A exp(-omega t / 2Q) cos(omega t + phi) for (f, Q, A, phi) tuples."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for f, Q, A, phi in modes:
        w = 2 * math.pi * f
        out += A * np.exp(-w * t / (2 * Q)) * np.cos(w * t + phi)
    if noise:
        rng = np.random.default_rng(rng)
        out += noise * rng.standard_normal(t.size)
    return out
