"""Laser waveforms in atomic units.

Two pulse shapes are supported: a flat-top (trapezoidal envelope) pulse with
linear turn-on/turn-off ramps, and a Gaussian pulse with an optional linear
frequency chirp.  All fields are linearly polarized and returned in atomic
units; intensities are accepted in W/cm^2 and wavelengths in nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# Peak intensity giving a field amplitude of exactly 1 a.u.
ATOMIC_INTENSITY_W_CM2 = 3.50945e16
# omega[a.u.] = AU_WAVELENGTH_NM / wavelength[nm]
AU_WAVELENGTH_NM = 45.5633526


def intensity_to_field(intensity_w_cm2: float) -> float:
    """Peak field amplitude (a.u.) for a given peak intensity (W/cm^2)."""
    if intensity_w_cm2 <= 0:
        raise ValueError(f"intensity must be positive, got {intensity_w_cm2}")
    return math.sqrt(intensity_w_cm2 / ATOMIC_INTENSITY_W_CM2)


def wavelength_to_omega(wavelength_nm: float) -> float:
    """Carrier angular frequency (a.u.) for a wavelength in nm."""
    if wavelength_nm <= 0:
        raise ValueError(f"wavelength must be positive, got {wavelength_nm}")
    return AU_WAVELENGTH_NM / wavelength_nm


def chirp_limit(T: float) -> float:
    """Largest chirp magnitude compatible with the pulse bandwidth, 1/(2 T^2)."""
    if T <= 0:
        raise ValueError(f"gaussian width must be positive, got {T}")
    return 1.0 / (2.0 * T * T)


@dataclass(frozen=True)
class PulseSpec:
    """Laser pulse parameters plus derived atomic-unit quantities.

    For ``shape="trapezoid"`` the envelope rises linearly over ``ramp_cycles``
    optical cycles, stays flat, and falls over ``ramp_cycles``; the carrier is
    cos(w0 t) with t measured from the start of the ramp.  For
    ``shape="gaussian"`` the envelope is exp(-t^2/T^2) centred at t=0 and the
    carrier is cos(w0 t + chirp t^2); the propagation window spans
    ``t = -window_T*T .. +window_T*T``.

    ``amplitude_scale`` multiplies the nominal peak field; it is set by
    :func:`normalize_energy` so chirped pulses carry the same fluence as the
    unchirped reference at the same nominal intensity.
    """

    shape: str
    wavelength_nm: float = 248.0
    intensity_w_cm2: float = 4.5e14
    n_cycles: int = 6
    ramp_cycles: int = 2
    gaussian_T: float | None = None
    chirp: float = 0.0
    window_T: float = 6.0
    amplitude_scale: float = 1.0

    def __post_init__(self):
        if self.shape not in ("trapezoid", "gaussian"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if self.intensity_w_cm2 <= 0:
            raise ValueError("peak intensity must be positive")
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength must be positive")
        if self.shape == "trapezoid":
            if self.n_cycles < 2 * self.ramp_cycles:
                raise ValueError("trapezoid needs n_cycles >= 2*ramp_cycles")
            if self.chirp != 0.0:
                raise ValueError("chirp is only defined for gaussian pulses")
        else:
            gmax = chirp_limit(self.T)
            if abs(self.chirp) > gmax * (1 + 1e-12):
                raise ValueError(
                    f"|chirp|={abs(self.chirp):.3e} exceeds bandwidth limit {gmax:.3e}")

    @property
    def omega0(self) -> float:
        return wavelength_to_omega(self.wavelength_nm)

    @property
    def cycle_period(self) -> float:
        return 2.0 * math.pi / self.omega0

    @property
    def T(self) -> float:
        """Gaussian width parameter (a.u.).

        Defaults to 3*T_c/sqrt(2 ln 2) so the intensity FWHM equals three
        optical cycles, comparable to the flat-top default.
        """
        if self.gaussian_T is not None:
            return self.gaussian_T
        return 3.0 * self.cycle_period / math.sqrt(2.0 * math.log(2.0))

    @property
    def field_amplitude(self) -> float:
        return intensity_to_field(self.intensity_w_cm2) * self.amplitude_scale

    @property
    def t_start(self) -> float:
        return 0.0 if self.shape == "trapezoid" else -self.window_T * self.T

    @property
    def t_end(self) -> float:
        if self.shape == "trapezoid":
            return self.n_cycles * self.cycle_period
        return self.window_T * self.T

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def envelope_at(pulse: PulseSpec, t):
    """Field envelope (a.u.) at time(s) t."""
    t = np.asarray(t, dtype=float)
    e0 = pulse.field_amplitude
    if pulse.shape == "gaussian":
        return e0 * np.exp(-(t / pulse.T) ** 2)
    tc = pulse.cycle_period
    t_rise = pulse.ramp_cycles * tc
    t_fall = pulse.n_cycles * tc - t_rise
    t_end = pulse.n_cycles * tc
    env = np.where(t < t_rise, t / t_rise,
                   np.where(t <= t_fall, 1.0, (t_end - t) / t_rise))
    env = np.where((t < 0) | (t > t_end), 0.0, env)
    return e0 * env


def carrier_phase_at(pulse: PulseSpec, t):
    """Carrier phase w0 t + chirp t^2 (trapezoid has no chirp term)."""
    t = np.asarray(t, dtype=float)
    return pulse.omega0 * t + pulse.chirp * t * t


def field_at(pulse: PulseSpec, t):
    """Electric field E(t) in a.u.; accepts scalars or arrays."""
    result = envelope_at(pulse, t) * np.cos(carrier_phase_at(pulse, t))
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(result)
    return result


def fluence(pulse: PulseSpec, samples_per_cycle: int = 256) -> float:
    """Pulse fluence integral(E^2 dt) by trapezoidal quadrature over the support."""
    n = max(64, int(round(samples_per_cycle * pulse.duration / pulse.cycle_period)))
    t = np.linspace(pulse.t_start, pulse.t_end, n)
    e = field_at(pulse, t)
    return float(np.trapezoid(e * e, t))


def normalize_energy(pulse: PulseSpec, reference: PulseSpec) -> PulseSpec:
    """Rescale the field amplitude so the fluence matches the reference pulse.

    Both pulses must be gaussian with the same width and carrier frequency;
    the reference must be unchirped.  Returns a new PulseSpec.
    """
    if pulse.shape != "gaussian" or reference.shape != "gaussian":
        raise ValueError("energy normalization applies to gaussian pulses only")
    if not math.isclose(pulse.T, reference.T, rel_tol=1e-12):
        raise ValueError("pulse and reference must share the gaussian width T")
    if not math.isclose(pulse.omega0, reference.omega0, rel_tol=1e-12):
        raise ValueError("pulse and reference must share the carrier frequency")
    if reference.chirp != 0.0:
        raise ValueError("reference pulse must be unchirped")
    f_ref = fluence(reference)
    if f_ref <= 0:
        raise ValueError("reference pulse has zero fluence")
    f_pulse = fluence(pulse)
    scale = math.sqrt(f_ref / f_pulse)
    return replace(pulse, amplitude_scale=pulse.amplitude_scale * scale)
