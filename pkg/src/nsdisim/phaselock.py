"""Injection-locking diagnostics for trajectory oscillations.

A real trajectory waveform is de-meaned and extended to its discrete analytic
signal (negative frequencies zeroed); dividing by the envelope leaves a
phase-only oscillation whose argument is the instantaneous phase.  Pairwise
phase differences between the two electrons of each couple are pooled into a
smoothed circular histogram whose full width at half maximum quantifies the
phase mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .errors import (DegenerateTraceError, InsufficientStatisticsError,
                     TraceRejectedError, UndefinedFwhmError)

ENV_FLOOR_REL = 1e-3       # envelope validity floor, relative to trace max
EDGE_GUARD_FRACTION = 0.05  # samples dropped at each end of a trace
MAX_INVALID_FRACTION = 0.10


@dataclass
class RealTrace:
    """Uniformly sampled real waveform (walker coordinate vs. time)."""

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or len(self.samples) < 16:
            raise ValueError("trace needs at least 16 uniform samples")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trace contains non-finite samples")
        if self.dt <= 0:
            raise ValueError("sample interval must be positive")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))


@dataclass
class AnalyticTrace:
    """Complex analytic extension of a trace plus a per-sample validity mask."""

    z: np.ndarray
    valid: np.ndarray
    dt: float
    t0: float = 0.0

    @property
    def envelope(self) -> np.ndarray:
        return np.abs(self.z)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.z)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.z))


def analytic_signal(trace: RealTrace, edge_guard: float = EDGE_GUARD_FRACTION) -> AnalyticTrace:
    """Discrete analytic signal of a de-meaned trace.

    The Fourier spectrum is doubled at positive frequencies and zeroed at
    negative ones (DC and Nyquist kept), so Re z reproduces the de-meaned
    input exactly.  A fraction of samples at both ends is marked invalid to
    guard against transform end effects.
    """
    s = trace.samples - np.mean(trace.samples)
    peak = np.max(np.abs(s))
    if peak == 0.0:
        raise DegenerateTraceError("trace is constant; no oscillation to analyze")
    z = scipy.signal.hilbert(s)
    valid = np.ones(len(s), dtype=bool)
    guard = int(round(edge_guard * len(s)))
    if guard > 0:
        valid[:guard] = False
        valid[-guard:] = False
    return AnalyticTrace(z=z, valid=valid, dt=trace.dt, t0=trace.t0)


def normalize_by_envelope(z: AnalyticTrace) -> AnalyticTrace:
    """Phase-only trace z/|z|.

    Samples whose envelope falls below the relative floor are marked invalid
    (not NaN); a trace with more than 10% such samples in its guarded
    interior is rejected outright.
    """
    env = z.envelope
    floor = ENV_FLOOR_REL * np.max(env)
    usable = env >= floor
    n_interior = int(np.count_nonzero(z.valid))
    if n_interior == 0:
        raise TraceRejectedError("no valid samples", invalid_fraction=1.0)
    bad = np.count_nonzero(z.valid & ~usable) / n_interior
    if bad > MAX_INVALID_FRACTION:
        raise TraceRejectedError(
            f"{bad:.1%} of samples below the envelope floor", invalid_fraction=bad)
    unit = np.where(usable, z.z / np.where(usable, env, 1.0), 0.0)
    return AnalyticTrace(z=unit, valid=z.valid & usable, dt=z.dt, t0=z.t0)


def pair_phase_difference(z1: AnalyticTrace, z2: AnalyticTrace,
                          window: tuple | None = None):
    """Wrapped phase difference arg(z1 conj(z2)) on the jointly valid samples.

    Returns (times, dphi) restricted to ``window`` = (t_a, t_b) when given.
    """
    if len(z1.z) != len(z2.z) or z1.dt != z2.dt or z1.t0 != z2.t0:
        raise ValueError("traces must share their sampling")
    mask = z1.valid & z2.valid
    if window is not None:
        t = z1.times
        mask = mask & (t >= window[0]) & (t <= window[1])
    if not np.any(mask):
        raise ValueError("no jointly valid samples in the window")
    dphi = np.angle(z1.z[mask] * np.conj(z2.z[mask]))
    return z1.times[mask], dphi


@dataclass
class PhaseMismatchStats:
    """Smoothed circular density of relative phases on [-pi, pi)."""

    bin_centers: np.ndarray
    density: np.ndarray
    fwhm: float
    n_pairs: int
    n_entries: int
    sigma_h: float


def circular_mean(angles: np.ndarray) -> float:
    return float(np.angle(np.mean(np.exp(1j * np.asarray(angles)))))


def _wrapped_kernel(bins: int, sigma_h: float) -> np.ndarray:
    delta = 2.0 * np.pi / bins
    offsets = delta * np.arange(bins)
    offsets = np.where(offsets > np.pi, offsets - 2.0 * np.pi, offsets)
    kernel = np.zeros(bins)
    for m in (-1, 0, 1):
        kernel += np.exp(-0.5 * ((offsets + 2.0 * np.pi * m) / sigma_h) ** 2)
    return kernel / kernel.sum()


def phase_histogram(pair_series, bins: int = 128, sigma_h: float = 0.15,
                    pooling: str = "mean") -> PhaseMismatchStats:
    """Pooled, kernel-smoothed histogram of pairwise relative phases.

    ``pair_series`` is a sequence of per-pair arrays of wrapped phase
    differences over the analysis window.  With ``pooling="mean"`` each pair
    contributes its circular time average (one entry per couple); with
    ``pooling="raw"`` all time samples are pooled directly.
    """
    if pooling not in ("mean", "raw"):
        raise ValueError(f"unknown pooling mode {pooling!r}")
    series = [np.asarray(s, dtype=float) for s in pair_series if len(s) > 0]
    n_entries = int(sum(len(s) for s in series))
    if n_entries < 100:
        raise InsufficientStatisticsError(
            f"only {n_entries} (pair, time-sample) entries; need >= 100",
            count=n_entries)
    if pooling == "mean":
        values = np.array([circular_mean(s) for s in series])
    else:
        values = np.concatenate(series)

    delta = 2.0 * np.pi / bins
    # bin centers at -pi + i*delta so 0 is a center; center-aligned binning
    idx = np.round((values + np.pi) / delta).astype(np.int64) % bins
    hist = np.bincount(idx, minlength=bins).astype(float)
    kernel = _wrapped_kernel(bins, sigma_h)
    density = np.real(np.fft.ifft(np.fft.fft(hist) * np.fft.fft(kernel)))
    density = np.maximum(density, 0.0)
    density /= density.sum() * delta
    centers = -np.pi + delta * np.arange(bins)
    stats = PhaseMismatchStats(bin_centers=centers, density=density, fwhm=np.nan,
                               n_pairs=len(series), n_entries=n_entries,
                               sigma_h=sigma_h)
    try:
        stats.fwhm = fwhm(stats)
    except UndefinedFwhmError:
        pass  # density kept, width stays nan; callers may invoke fwhm() to raise
    return stats


def fwhm(stats: PhaseMismatchStats) -> float:
    """Circular full width at half maximum around the density mode.

    The mode is the global maximum (ties broken toward 0); the width is the
    extent of the contiguous region around it where the density stays at or
    above half maximum, with linear interpolation at the crossings.
    """
    density = stats.density
    centers = stats.bin_centers
    bins = len(density)
    delta = 2.0 * np.pi / bins
    peak = density.max()
    if peak <= 0:
        raise UndefinedFwhmError("density is identically zero")
    half = 0.5 * peak
    above = density >= half
    if np.count_nonzero(above) > 0.95 * bins:
        raise UndefinedFwhmError(
            "density is nearly uniform; half-max plateau covers the circle")
    tie = np.flatnonzero(density >= peak * (1.0 - 1e-12))
    mode = int(tie[np.argmin(np.abs(centers[tie]))])

    def crossing(direction: int) -> float:
        # distance from the mode to the half-max crossing in bin units
        steps = 0
        i = mode
        while steps < bins:
            j = (i + direction) % bins
            if density[j] < half:
                frac = (density[i] - half) / (density[i] - density[j])
                return steps + frac
            i = j
            steps += 1
        raise UndefinedFwhmError("no half-max crossing found")

    width = (crossing(+1) + crossing(-1)) * delta
    return float(min(width, 2.0 * np.pi))
