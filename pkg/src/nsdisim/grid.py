"""Two-electron wavefunction on a square grid and split-operator propagation.

The state Psi(x1, x2, t) lives on an Nx x Nx grid spanning [-L, L] along each
axis (row index = x1, column index = x2).  Real- and imaginary-time evolution
use a second-order symmetric split-operator scheme with a spectral kinetic
step; the time-dependent dipole phase is applied as separable per-axis
factors.  A cos^(1/8) absorbing mask removes outgoing flux near the box edge
and books the removed probability into ionization channels by removal
location.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from .errors import ConvergenceError, InvalidStateError, PropagationDivergedError

_FFT_WORKERS = 1


def set_fft_workers(n: int):
    """Set the thread count used by the spectral transforms."""
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(n))


def _fft2(a):
    return sfft.fft2(a, workers=_FFT_WORKERS)


def _ifft2(a):
    return sfft.ifft2(a, workers=_FFT_WORKERS)


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D grid on [-L, L) with FFT-ordered momenta."""

    half_width: float
    points: int

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if not _is_power_of_two(self.points):
            raise ValueError(f"points must be a power of two, got {self.points}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points

    @property
    def x(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.points)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.dx)


@dataclass(frozen=True)
class Grid2D:
    """Square two-electron grid, identical along both axes."""

    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")
        if not _is_power_of_two(self.points_per_axis):
            raise ValueError(
                f"points_per_axis must be a power of two, got {self.points_per_axis}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def x(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.points_per_axis)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.dx)

    @property
    def axis(self) -> Grid1D:
        return Grid1D(self.half_width, self.points_per_axis)


@dataclass
class WaveFunction2D:
    """Complex two-electron amplitude on a Grid2D at time t (a.u.)."""

    values: np.ndarray
    grid: Grid2D
    t: float = 0.0

    def norm2(self) -> float:
        """Total probability integral |Psi|^2 dx1 dx2."""
        v = self.values
        return float(np.sum(v.real**2 + v.imag**2) * self.grid.dx**2)

    def normalized(self) -> "WaveFunction2D":
        n2 = self.norm2()
        if n2 <= 0:
            raise InvalidStateError("cannot normalize a zero-norm state")
        return WaveFunction2D(self.values / math.sqrt(n2), self.grid, self.t)

    def exchange_asymmetry(self) -> float:
        """max |Psi(x1,x2) - Psi(x2,x1)|."""
        return float(np.max(np.abs(self.values - self.values.T)))


def gaussian_packet(grid: Grid2D, sigma: float = 1.0, center=(0.0, 0.0),
                    momentum=(0.0, 0.0)) -> WaveFunction2D:
    """Normalized symmetric Gaussian, optionally boosted; used as a relax seed."""
    x = grid.x
    g1 = np.exp(-((x - center[0]) ** 2) / (2 * sigma**2) + 1j * momentum[0] * x)
    g2 = np.exp(-((x - center[1]) ** 2) / (2 * sigma**2) + 1j * momentum[1] * x)
    vals = np.outer(g1, g2).astype(np.complex128)
    psi = WaveFunction2D(vals, grid, 0.0)
    return psi.normalized()


@dataclass
class PotentialField:
    """Static two-electron potential plus the dipole coupling array.

    static holds the three soft-core terms; dipole holds d(x1,x2) = -(x1+x2),
    which multiplies E(t) in the Hamiltonian.
    """

    static: np.ndarray
    dipole: np.ndarray
    grid: Grid2D


def build_potential(grid: Grid2D) -> PotentialField:
    """Soft-core nucleus-electron attraction and electron-electron repulsion."""
    x = grid.x
    x1 = x[:, None]
    x2 = x[None, :]
    static = (-2.0 / np.sqrt(1.0 + x1**2)
              - 2.0 / np.sqrt(1.0 + x2**2)
              + 1.0 / np.sqrt(1.0 + (x1 - x2) ** 2))
    dipole = -(x1 + x2) * np.ones_like(static)
    return PotentialField(static=static, dipole=dipole, grid=grid)


class SplitStepPropagator:
    """Cached split-operator kernel for repeated stepping at fixed dt.

    Real mode applies exp(-i dt/2 (V + E d)) | spectral kinetic | repeat,
    with the dipole phase factored into per-axis 1D arrays.  Imaginary mode
    replaces dt -> -i dt and renormalizes after each step.
    """

    def __init__(self, grid: Grid2D, pot: PotentialField, dt: float,
                 mode: str = "real"):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if mode not in ("real", "imaginary"):
            raise ValueError(f"unknown mode {mode!r}")
        self.grid = grid
        self.dt = dt
        self.mode = mode
        k2 = grid.k**2
        ksum = k2[:, None] + k2[None, :]
        if mode == "real":
            self._exp_v_half = np.exp(-0.5j * dt * pot.static)
            self._exp_k = np.exp(-0.5j * dt * ksum)
        else:
            self._exp_v_half = np.exp(-0.5 * dt * pot.static)
            self._exp_k = np.exp(-0.5 * dt * ksum)
        self._x = grid.x

    def _dipole_phase(self, field_value: float) -> np.ndarray | None:
        if field_value == 0.0:
            return None
        # d = -(x1 + x2): separable, same 1D factor along both axes
        if self.mode == "real":
            return np.exp(0.5j * self.dt * field_value * self._x)
        return np.exp(0.5 * self.dt * field_value * self._x)

    def step_raw(self, values: np.ndarray, field_value: float = 0.0) -> np.ndarray:
        """One split step without normalization or finiteness checks."""
        ph = self._dipole_phase(field_value)
        a = values * self._exp_v_half
        if ph is not None:
            a *= ph[:, None]
            a *= ph[None, :]
        a = _fft2(a)
        a *= self._exp_k
        a = _ifft2(a)
        a *= self._exp_v_half
        if ph is not None:
            a *= ph[:, None]
            a *= ph[None, :]
        return a


def propagate_step(psi: WaveFunction2D, pot: PotentialField, field_value: float,
                   dt: float, mode: str = "real",
                   kernel: SplitStepPropagator | None = None) -> WaveFunction2D:
    """Advance the state by one split-operator step.

    In real mode ``field_value`` must be E evaluated at the step midpoint.
    Imaginary mode damps toward the ground state and renormalizes.  Passing a
    prebuilt ``kernel`` avoids rebuilding the cached phase arrays.
    """
    if kernel is None:
        kernel = SplitStepPropagator(psi.grid, pot, dt, mode)
    vals = kernel.step_raw(psi.values, field_value)
    out = WaveFunction2D(vals, psi.grid, psi.t + dt if mode == "real" else psi.t)
    n2 = out.norm2()
    if not math.isfinite(n2) or n2 == 0.0:
        raise PropagationDivergedError(
            f"non-finite amplitudes after step (dt={dt}); reduce the time step")
    if mode == "imaginary":
        out.values /= math.sqrt(n2)
    return out


def energy(psi: WaveFunction2D, pot: PotentialField) -> float:
    """Field-off energy expectation <T> + <V> with spectral kinetic term."""
    n2 = psi.norm2()
    if abs(n2 - 1.0) > 1e-6:
        raise InvalidStateError(f"state norm^2 deviates from 1 by {n2 - 1.0:.3e}")
    g = psi.grid
    k2 = g.k**2
    ksum = k2[:, None] + k2[None, :]
    ft = _fft2(psi.values)
    kinetic = 0.5 * float(np.sum(ksum * (ft.real**2 + ft.imag**2)))
    kinetic *= g.dx**2 / g.points_per_axis**2
    dens = psi.values.real**2 + psi.values.imag**2
    potential = float(np.sum(pot.static * dens) * g.dx**2)
    return kinetic + potential


class RelaxResult(NamedTuple):
    psi: WaveFunction2D
    energy: float
    energy_history: np.ndarray


def relax_ground_state(grid: Grid2D, dt_imag: float = 0.01, tol: float = 1e-10,
                       max_iter: int = 100_000, pot: PotentialField | None = None,
                       seed_psi: WaveFunction2D | None = None,
                       seed_sigma: float = 1.0) -> RelaxResult:
    """Imaginary-time relaxation to the two-electron ground state.

    The per-iteration energy estimate comes from the norm decay rate
    E = -ln(|Psi|^2)/(2 dt); iteration stops when successive estimates agree
    within ``tol``.  The converged state is explicitly symmetrized under
    x1 <-> x2 and the reported energy is the expectation value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if pot is None:
        pot = build_potential(grid)
    if seed_psi is None:
        seed = gaussian_packet(grid, sigma=seed_sigma)
    else:
        seed = seed_psi.normalized()
    kernel = SplitStepPropagator(grid, pot, dt_imag, mode="imaginary")
    vals = seed.values.copy()
    dx2 = grid.dx**2
    history = []
    e_prev = None
    delta = None
    for _ in range(max_iter):
        vals = kernel.step_raw(vals)
        p = float(np.sum(vals.real**2 + vals.imag**2) * dx2)
        if not math.isfinite(p) or p == 0.0:
            raise PropagationDivergedError("imaginary-time step diverged")
        e_est = -0.5 * math.log(p) / dt_imag
        vals /= math.sqrt(p)
        history.append(e_est)
        if e_prev is not None:
            delta = abs(e_est - e_prev)
            if delta < tol:
                break
        e_prev = e_est
    else:
        raise ConvergenceError(
            f"relaxation did not reach tol={tol} in {max_iter} iterations "
            f"(last dE={delta})", last_delta=delta)
    vals = 0.5 * (vals + vals.T)
    psi = WaveFunction2D(vals, grid, 0.0).normalized()
    return RelaxResult(psi, energy(psi, pot), np.asarray(history))


# ---------------------------------------------------------------------------
# Absorbing boundary

@dataclass
class AbsorberMask:
    """Radial-per-axis absorbing mask with per-channel removal accounting.

    values = m(x1) m(x2) with m = 1 inside |x| <= r_abs and a smooth
    cos^exponent ramp to 0 at the box edge.  Removed probability is booked
    as DI when both |x1|,|x2| > threshold at the removal cell, SI when
    exactly one is, and bound otherwise (bound stays ~0 by construction and
    serves as a health check).
    """

    values: np.ndarray
    r_abs: float
    threshold: float
    grid: Grid2D
    absorbed: dict = field(default_factory=lambda: {"di": 0.0, "si": 0.0, "bound": 0.0})
    _band_idx: np.ndarray = field(default=None, repr=False)
    _band_mask: np.ndarray = field(default=None, repr=False)
    _band_weight: np.ndarray = field(default=None, repr=False)
    _band_channel: np.ndarray = field(default=None, repr=False)

    def apply_inplace(self, values: np.ndarray) -> dict:
        """Mask ``values`` in place; return probability removed per channel."""
        flat = values.reshape(-1)
        band = flat[self._band_idx]
        dens = band.real**2 + band.imag**2
        w = self._band_weight * dens * self.grid.dx**2
        removed = np.bincount(self._band_channel, weights=w, minlength=3)
        flat[self._band_idx] = band * self._band_mask
        out = {"bound": float(removed[0]), "si": float(removed[1]),
               "di": float(removed[2])}
        for key, val in out.items():
            self.absorbed[key] += val
        return out


def make_absorber(grid: Grid2D, r_abs: float | None = None, exponent: float = 0.125,
                  threshold: float = 5.0) -> AbsorberMask:
    """Build the cos^exponent absorber over the outer band of the box."""
    L = grid.half_width
    if r_abs is None:
        r_abs = 0.9 * L
    if not 0 < r_abs < L:
        raise ValueError("r_abs must lie inside the box")
    x = grid.x
    ramp = np.clip((np.abs(x) - r_abs) / (L - r_abs), 0.0, 1.0)
    m1 = np.cos(0.5 * np.pi * ramp) ** exponent
    values = np.outer(m1, m1)
    band_idx = np.flatnonzero(values.reshape(-1) < 1.0)
    band_mask = values.reshape(-1)[band_idx]
    band_weight = 1.0 - band_mask**2
    nx = grid.points_per_axis
    i1 = band_idx // nx
    i2 = band_idx % nx
    beyond1 = np.abs(x[i1]) > threshold
    beyond2 = np.abs(x[i2]) > threshold
    channel = np.where(beyond1 & beyond2, 2, np.where(beyond1 ^ beyond2, 1, 0))
    return AbsorberMask(values=values, r_abs=r_abs, threshold=threshold, grid=grid,
                        _band_idx=band_idx, _band_mask=band_mask,
                        _band_weight=band_weight,
                        _band_channel=channel.astype(np.int64))


def apply_absorber(psi: WaveFunction2D, mask: AbsorberMask):
    """Apply the mask to a copy of the state; returns (state, removed_by_channel)."""
    if mask.grid != psi.grid:
        raise ValueError("mask grid does not match the wavefunction grid")
    vals = psi.values.copy()
    removed = mask.apply_inplace(vals)
    return WaveFunction2D(vals, psi.grid, psi.t), removed


# ---------------------------------------------------------------------------
# 1D helpers (ion Hamiltonian, guide waves, oracles)

def soft_core_attraction(x, charge: float = 2.0):
    """Nuclear soft-core term -q/sqrt(1+x^2)."""
    return -charge / np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def soft_core_repulsion(x):
    """Electron-electron soft-core term +1/sqrt(1+x^2)."""
    return 1.0 / np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def energy_1d(values: np.ndarray, grid: Grid1D, potential: np.ndarray) -> float:
    n2 = float(np.sum(np.abs(values) ** 2) * grid.dx)
    ft = sfft.fft(values)
    kinetic = 0.5 * float(np.sum(grid.k**2 * np.abs(ft) ** 2)) * grid.dx / grid.points
    pot = float(np.sum(potential * np.abs(values) ** 2) * grid.dx)
    return (kinetic + pot) / n2


def relax_ground_state_1d(grid: Grid1D, potential: np.ndarray, dt_imag: float = 0.005,
                          tol: float = 1e-12, max_iter: int = 200_000):
    """Imaginary-time ground state of a 1D Hamiltonian; returns (values, energy)."""
    x = grid.x
    vals = np.exp(-0.5 * x**2).astype(np.complex128)
    vals /= math.sqrt(float(np.sum(np.abs(vals) ** 2) * grid.dx))
    exp_v = np.exp(-0.5 * dt_imag * potential)
    exp_k = np.exp(-0.5 * dt_imag * grid.k**2)
    e_prev = None
    for _ in range(max_iter):
        vals = exp_v * vals
        vals = sfft.ifft(exp_k * sfft.fft(vals))
        vals = exp_v * vals
        p = float(np.sum(vals.real**2 + vals.imag**2) * grid.dx)
        e_est = -0.5 * math.log(p) / dt_imag
        vals /= math.sqrt(p)
        if e_prev is not None and abs(e_est - e_prev) < tol:
            break
        e_prev = e_est
    else:
        raise ConvergenceError("1D relaxation did not converge")
    return vals, energy_1d(vals, grid, potential)


def fourier_upsample(values: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited upsampling of a periodic 2D field by an integer factor."""
    if factor == 1:
        return values.copy()
    n = values.shape[0]
    m = n * factor
    ft = _fft2(values)
    out = np.zeros((m, m), dtype=np.complex128)
    h = n // 2
    out[:h, :h] = ft[:h, :h]
    out[:h, -h:] = ft[:h, -h:]
    out[-h:, :h] = ft[-h:, :h]
    out[-h:, -h:] = ft[-h:, -h:]
    return _ifft2(out) * factor**2


# ---------------------------------------------------------------------------
# Snapshot persistence

_SNAPSHOT_MAGIC = b"NSDIWF1\0"
_SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<8sqqdd")  # magic, version, Nx, L, t


def save_snapshot(path, psi: WaveFunction2D):
    """Write a wavefunction to the flat little-endian binary record."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_SNAPSHOT_MAGIC, _SNAPSHOT_VERSION,
                              psi.grid.points_per_axis, psi.grid.half_width, psi.t))
        psi.values.astype("<c16").tofile(fh)


def load_snapshot(path) -> WaveFunction2D:
    """Read a wavefunction written by :func:`save_snapshot`."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise ValueError(f"{path}: not a wavefunction snapshot")
        magic, version, nx, half_width, t = _HEADER.unpack(header)
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a wavefunction snapshot")
        if version != _SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        data = np.fromfile(fh, dtype="<c16", count=nx * nx)
    if data.size != nx * nx:
        raise ValueError(f"{path}: truncated snapshot")
    grid = Grid2D(half_width=half_width, points_per_axis=int(nx))
    return WaveFunction2D(data.reshape(nx, nx).astype(np.complex128), grid, t)
