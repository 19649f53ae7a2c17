import math

import numpy as np
import pytest

from conftest import wrapped_difference
from nsdisim.errors import (DegenerateTraceError, InsufficientStatisticsError,
                            TraceRejectedError, UndefinedFwhmError)
from nsdisim.phaselock import (AnalyticTrace, PhaseMismatchStats, RealTrace,
                               analytic_signal, circular_mean, fwhm,
                               normalize_by_envelope, pair_phase_difference,
                               phase_histogram)

OMEGA = 2.0
DT = 2 * np.pi / OMEGA / 64  # 64 samples per period


def cosine_trace(n_periods=32, phi0=0.0, omega=OMEGA, amplitude=1.0, offset=0.0):
    n = int(64 * n_periods)
    t = DT * np.arange(n)
    return RealTrace(amplitude * np.cos(omega * t + phi0) + offset, DT), t


def interior(mask, frac=0.05):
    n = len(mask)
    g = int(round(frac * n))
    out = mask.copy()
    out[:g] = False
    out[-g:] = False
    return out


# ---------------------------------------------------------------------------
# analytic signal

def test_analytic_signal_of_cosine():
    trace, t = cosine_trace()
    z = analytic_signal(trace)
    sel = z.valid
    assert np.max(np.abs(z.envelope[sel] - 1.0)) < 1e-6
    err = [abs(wrapped_difference(p, OMEGA * ti))
           for p, ti in zip(z.phase[sel], t[sel])]
    assert max(err) < 1e-4


def test_analytic_signal_removes_dc():
    trace, t = cosine_trace(amplitude=2.5, offset=2.5)
    z = analytic_signal(trace)
    sel = z.valid
    assert np.max(np.abs(z.envelope[sel] - 2.5)) < 1e-5
    err = [abs(wrapped_difference(p, OMEGA * ti))
           for p, ti in zip(z.phase[sel], t[sel])]
    assert max(err) < 1e-4


def test_analytic_signal_am_envelope():
    n = 64 * 40
    t = DT * np.arange(n)
    amp = 1.0 + 0.3 * np.sin(2 * np.pi * t / t[-1])  # slow modulation
    trace = RealTrace(amp * np.cos(OMEGA * t), DT)
    z = analytic_signal(trace)
    sel = interior(z.valid, 0.1)
    rel = np.abs(z.envelope[sel] - amp[sel]) / amp[sel]
    assert np.max(rel) < 0.01


def test_analytic_signal_rejects_constant():
    with pytest.raises(DegenerateTraceError):
        analytic_signal(RealTrace(np.full(128, 3.0), DT))


def test_analytic_signal_real_part_identity():
    rng = np.random.default_rng(5)
    s = rng.standard_normal(256)
    trace = RealTrace(s, DT)
    z = analytic_signal(trace)
    assert np.max(np.abs(z.z.real - (s - s.mean()))) < 1e-10


def test_analytic_signal_negative_frequencies_zero():
    rng = np.random.default_rng(6)
    s = rng.standard_normal(512)
    z = analytic_signal(RealTrace(s, DT))
    spec = np.fft.fft(z.z)
    neg = spec[512 // 2 + 1:]
    assert np.max(np.abs(neg)) <= 1e-10 * np.max(np.abs(spec))


def test_analytic_signal_linearity():
    trace, _ = cosine_trace(phi0=0.3)
    big = RealTrace(5.0 * trace.samples, DT)
    z1 = analytic_signal(trace)
    z5 = analytic_signal(big)
    sel = z1.valid & z5.valid
    assert np.allclose(z5.envelope[sel], 5.0 * z1.envelope[sel], rtol=1e-10)
    dphi = np.angle(z5.z[sel] * np.conj(z1.z[sel]))
    assert np.max(np.abs(dphi)) < 1e-10


def test_analytic_signal_time_shift_covariance():
    n = 64 * 16
    t = DT * np.arange(n)
    s = np.cos(OMEGA * t) + 0.4 * np.cos(3 * OMEGA * t + 0.7)  # periodic
    m = 37
    z = analytic_signal(RealTrace(s, DT), edge_guard=0.0)
    zs = analytic_signal(RealTrace(np.roll(s, m), DT), edge_guard=0.0)
    shifted = np.roll(z.z, m)
    dphi = np.angle(zs.z * np.conj(shifted))
    assert np.max(np.abs(dphi)) < 1e-6


# ---------------------------------------------------------------------------
# envelope normalization

def test_normalize_pure_cosine():
    trace, t = cosine_trace()
    unit = normalize_by_envelope(analytic_signal(trace))
    sel = unit.valid
    assert np.max(np.abs(unit.z.real[sel] - np.cos(OMEGA * t[sel]))) < 1e-6


def test_normalize_chirped_cosine():
    n = 64 * 32
    t = DT * np.arange(n)
    gamma = OMEGA / (8 * t[-1])  # mild chirp
    s = np.cos(OMEGA * t + gamma * t**2)
    unit = normalize_by_envelope(analytic_signal(RealTrace(s, DT)))
    sel = interior(unit.valid, 0.1)
    assert np.allclose(np.abs(unit.z[sel]), 1.0, atol=1e-9)
    err = [abs(wrapped_difference(p, OMEGA * ti + gamma * ti**2))
           for p, ti in zip(np.angle(unit.z[sel]), t[sel])]
    assert max(err) < 1e-3


def test_normalize_flags_dead_segment():
    n = 64 * 64
    t = DT * np.arange(n)
    tc = t[n // 2]
    w = 0.04 * t[-1]  # dip spans a few carrier periods so the envelope follows
    amp = 1.0 - (1.0 - 1e-6) * np.exp(-(((t - tc) / w) ** 2))
    s = amp * np.cos(OMEGA * t)
    z = analytic_signal(RealTrace(s, DT))
    unit = normalize_by_envelope(z)
    assert not np.any(np.isnan(unit.z))
    below = z.envelope < 1e-3 * z.envelope.max()
    assert below.sum() > 0  # the dip does cross the floor
    assert not unit.valid[below].any()
    assert unit.valid.sum() > 0.8 * n


def test_normalize_rejects_mostly_dead_trace():
    n = 64 * 16
    t = DT * np.arange(n)
    w = 0.1 * t[-1]
    amp = np.exp(-(((t - t[n // 2]) / w) ** 2))  # envelope collapses outside
    s = amp * np.cos(OMEGA * t)
    with pytest.raises(TraceRejectedError):
        normalize_by_envelope(analytic_signal(RealTrace(s, DT)))


# ---------------------------------------------------------------------------
# pairwise phase differences

def _unit(phi0=0.0, omega=OMEGA, n_periods=32):
    trace, t = cosine_trace(n_periods=n_periods, phi0=phi0, omega=omega)
    return normalize_by_envelope(analytic_signal(trace)), t


def test_pair_difference_identical():
    z, _ = _unit()
    _, dphi = pair_phase_difference(z, z)
    # z conj(z) is real up to the multiply rounding residual (FMA)
    assert np.max(np.abs(dphi)) < 1e-12


def test_pair_difference_quarter_period_lag():
    z1, _ = _unit(0.0)
    z2, _ = _unit(-np.pi / 2)
    _, dphi = pair_phase_difference(z1, z2)
    assert np.max(np.abs(dphi - np.pi / 2)) < 1e-4


def test_pair_difference_detuning_slope():
    delta = 0.05
    z1, t = _unit(0.0, OMEGA)
    z2, _ = _unit(0.0, OMEGA + delta)
    times, dphi = pair_phase_difference(z1, z2)
    slope = np.polyfit(times, np.unwrap(dphi), 1)[0]
    assert slope == pytest.approx(-delta, abs=1e-3)


def test_pair_difference_empty_overlap():
    z1, _ = _unit()
    z2 = AnalyticTrace(z=z1.z.copy(), valid=np.zeros_like(z1.valid),
                       dt=z1.dt, t0=z1.t0)
    with pytest.raises(ValueError):
        pair_phase_difference(z1, z2)


def test_pair_difference_window_restriction():
    z1, t = _unit(0.0)
    z2, _ = _unit(-0.8)
    times, dphi = pair_phase_difference(z1, z2, window=(t[-1] / 4, t[-1] / 2))
    assert times.min() >= t[-1] / 4 - 1e-12
    assert times.max() <= t[-1] / 2 + 1e-12
    assert np.max(np.abs(dphi - 0.8)) < 1e-4


# ---------------------------------------------------------------------------
# histogram and FWHM

def test_histogram_kernel_identity():
    series = [np.zeros(4) for _ in range(200)]
    stats = phase_histogram(series, bins=128, sigma_h=0.15)
    expected = 2.0 * math.sqrt(2.0 * math.log(2.0)) * 0.15
    assert stats.fwhm == pytest.approx(expected, rel=0.02)


def test_histogram_kernel_sigma_02():
    series = [np.zeros(2) for _ in range(200)]
    stats = phase_histogram(series, bins=128, sigma_h=0.2)
    assert stats.fwhm == pytest.approx(0.471, rel=0.02)


def test_histogram_wrapped_gaussian_width():
    rng = np.random.default_rng(17)
    draws = rng.normal(0.0, 0.5, size=10_000)
    draws = np.angle(np.exp(1j * draws))
    stats = phase_histogram([draws], bins=128, sigma_h=0.15, pooling="raw")
    expected = 2.3548 * math.sqrt(0.5**2 + 0.15**2)
    assert stats.fwhm == pytest.approx(expected, rel=0.05)


def test_histogram_bimodal_symmetry():
    series = [np.full(3, np.pi / 2)] * 500 + [np.full(3, -np.pi / 2)] * 500
    stats = phase_histogram(series, bins=128, sigma_h=0.15)
    flipped = np.concatenate(([stats.density[0]], stats.density[1:][::-1]))
    assert np.allclose(stats.density, flipped, atol=1e-12)


def test_histogram_relabel_reflects_density():
    rng = np.random.default_rng(23)
    series = [np.angle(np.exp(1j * rng.normal(0.7, 0.4, size=5)))
              for _ in range(300)]
    stats = phase_histogram(series, bins=128, sigma_h=0.15)
    neg = phase_histogram([-s for s in series], bins=128, sigma_h=0.15)
    flipped = np.concatenate(([neg.density[0]], neg.density[1:][::-1]))
    assert np.allclose(stats.density, flipped, atol=1e-9)
    assert neg.fwhm == pytest.approx(stats.fwhm, rel=1e-6)


def test_histogram_density_normalized():
    rng = np.random.default_rng(29)
    series = [rng.uniform(-np.pi, np.pi, size=7) for _ in range(100)]
    stats = phase_histogram(series, bins=128, sigma_h=0.15)
    delta = 2 * np.pi / 128
    assert np.sum(stats.density) * delta == pytest.approx(1.0, abs=1e-9)
    assert np.all(stats.density >= 0.0)


def test_histogram_insufficient_statistics():
    with pytest.raises(InsufficientStatisticsError):
        phase_histogram([np.zeros(9)] * 11, bins=128, sigma_h=0.15)


def test_fwhm_uniform_density_undefined():
    bins = 128
    stats = PhaseMismatchStats(
        bin_centers=-np.pi + 2 * np.pi / bins * np.arange(bins),
        density=np.full(bins, 1.0 / (2 * np.pi)), fwhm=np.nan,
        n_pairs=0, n_entries=0, sigma_h=0.15)
    with pytest.raises(UndefinedFwhmError):
        fwhm(stats)


def test_fwhm_gaussian_closed_form():
    bins = 256
    centers = -np.pi + 2 * np.pi / bins * np.arange(bins)
    sigma = 0.4
    density = np.exp(-0.5 * (centers / sigma) ** 2)
    density /= density.sum() * (2 * np.pi / bins)
    stats = PhaseMismatchStats(bin_centers=centers, density=density,
                               fwhm=np.nan, n_pairs=1, n_entries=1,
                               sigma_h=0.0)
    assert fwhm(stats) == pytest.approx(2.3548 * sigma, rel=0.02)


def test_fwhm_mode_wrapped_across_pi():
    bins = 128
    centers = -np.pi + 2 * np.pi / bins * np.arange(bins)
    sigma = 0.3
    dist = np.angle(np.exp(1j * (centers - np.pi)))  # peak at the seam
    density = np.exp(-0.5 * (dist / sigma) ** 2)
    density /= density.sum() * (2 * np.pi / bins)
    stats = PhaseMismatchStats(bin_centers=centers, density=density,
                               fwhm=np.nan, n_pairs=1, n_entries=1,
                               sigma_h=0.0)
    assert fwhm(stats) == pytest.approx(2.3548 * sigma, rel=0.02)


def test_edge_guard_stability():
    # stationary synthetic pairs: the FWHM must not hinge on the edge guard
    rng = np.random.default_rng(31)
    n = 64 * 16
    t = DT * np.arange(n)

    def build(guard):
        series = []
        for _ in range(150):
            off = rng.normal(0.0, 0.3)
            s1 = np.cos(OMEGA * t + 0.1 * rng.standard_normal())
            s2 = np.cos(OMEGA * t + off)
            z1 = normalize_by_envelope(analytic_signal(RealTrace(s1, DT), guard))
            z2 = normalize_by_envelope(analytic_signal(RealTrace(s2, DT), guard))
            series.append(pair_phase_difference(z1, z2)[1])
        return phase_histogram(series, bins=128, sigma_h=0.15).fwhm

    rng = np.random.default_rng(31)
    f_guarded = build(0.05)
    rng = np.random.default_rng(31)
    f_bare = build(0.0)
    assert abs(f_guarded - f_bare) / f_guarded < 0.05


def test_circular_mean_wraps():
    angles = np.array([np.pi - 0.1, -np.pi + 0.1])
    assert abs(wrapped_difference(circular_mean(angles), np.pi)) < 1e-12
