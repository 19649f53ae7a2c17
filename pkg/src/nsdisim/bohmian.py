"""Quantum trajectory ensembles guided by the exact two-electron state.

Walker pairs are sampled from |Psi(x1,x2,0)|^2 and advanced with the
probability-current velocity v_i = Im[(d Psi/dx_i)/Psi] evaluated on the grid
(4th-order stencil) and bilinearly interpolated to the walker position.  Near
nodes the velocity is regularized by a density floor and clamped to +/-v_cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError
from .grid import Grid2D, WaveFunction2D

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

EPS_NODE = 1e-12
V_CAP = 10.0

CHANNEL_NSDI = "NSDI"
CHANNEL_SI = "SI"
CHANNEL_BOUND = "bound"
QUADRANT_Q13 = "Q13"
QUADRANT_Q24 = "Q24"
QUADRANT_NONE = "none"


@dataclass
class TrajectoryEnsemble:
    """N walker pairs with a recorded position history.

    ``positions`` holds the current (x1, x2) per walker; ``record`` appends a
    float32 snapshot to the history.  Dead walkers (non-finite update) are
    frozen in place and excluded from statistics.
    """

    positions: np.ndarray
    grid: Grid2D
    seed: int
    alive: np.ndarray = None
    times: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    def __post_init__(self):
        if self.alive is None:
            self.alive = np.ones(len(self.positions), dtype=bool)

    @property
    def n_walkers(self) -> int:
        return len(self.positions)

    @property
    def n_dead(self) -> int:
        return int(np.count_nonzero(~self.alive))

    def record(self, t: float):
        self.times.append(float(t))
        self.samples.append(self.positions.astype(np.float32))

    def history(self):
        """Recorded history as (times[M], positions[M, N, 2])."""
        return np.asarray(self.times), np.stack(self.samples)


def sample_initial(psi0: WaveFunction2D, n_walkers: int, seed: int) -> TrajectoryEnsemble:
    """Draw walker pairs from |psi0|^2 by inverse CDF over grid cells.

    Each draw picks a cell with probability |psi|^2 dx^2 and jitters the
    position uniformly inside the cell; deterministic for a fixed seed.
    """
    if n_walkers <= 0:
        raise ValueError(f"walker count must be positive, got {n_walkers}")
    rng = np.random.default_rng(seed)
    dens = (psi0.values.real**2 + psi0.values.imag**2).reshape(-1)
    cdf = np.cumsum(dens)
    total = cdf[-1]
    if total <= 0:
        raise ValueError("wavefunction has zero norm")
    u = rng.random(n_walkers) * total
    idx = np.searchsorted(cdf, u, side="right")
    nx = psi0.grid.points_per_axis
    i1, i2 = idx // nx, idx % nx
    jitter = rng.random((n_walkers, 2)) - 0.5
    x = psi0.grid.x
    dx = psi0.grid.dx
    pos = np.empty((n_walkers, 2), dtype=np.float64)
    pos[:, 0] = x[i1] + jitter[:, 0] * dx
    pos[:, 1] = x[i2] + jitter[:, 1] * dx
    return TrajectoryEnsemble(positions=pos, grid=psi0.grid, seed=seed)


if numba is not None:
    @numba.njit(cache=True, fastmath=True)
    def _velocities_kernel(values, x0, dx, nx, pts, floor2, v_cap,
                           out):  # pragma: no cover - jitted
        for w in range(pts.shape[0]):
            f1 = (pts[w, 0] - x0) / dx
            f2 = (pts[w, 1] - x0) / dx
            if not (math.isfinite(f1) and math.isfinite(f2)):
                out[w, 0] = np.nan
                out[w, 1] = np.nan
                continue
            i0 = min(max(int(math.floor(f1)), 0), nx - 2)
            j0 = min(max(int(math.floor(f2)), 0), nx - 2)
            t1 = min(max(f1 - i0, 0.0), 1.0)
            t2 = min(max(f2 - j0, 0.0), 1.0)
            v1 = 0.0
            v2 = 0.0
            for ci in range(2):
                a = i0 + ci
                wa = t1 if ci else 1.0 - t1
                ap1 = a + 1 if a + 1 < nx else a + 1 - nx
                ap2 = a + 2 if a + 2 < nx else a + 2 - nx
                am1 = a - 1 if a >= 1 else nx - 1
                am2 = a - 2 if a >= 2 else a - 2 + nx
                for cj in range(2):
                    b = j0 + cj
                    wgt = wa * (t2 if cj else 1.0 - t2)
                    bp1 = b + 1 if b + 1 < nx else b + 1 - nx
                    bp2 = b + 2 if b + 2 < nx else b + 2 - nx
                    bm1 = b - 1 if b >= 1 else nx - 1
                    bm2 = b - 2 if b >= 2 else b - 2 + nx
                    c = values[a, b]
                    dp1 = (8.0 * (values[ap1, b] - values[am1, b])
                           - (values[ap2, b] - values[am2, b])) / (12.0 * dx)
                    dp2 = (8.0 * (values[a, bp1] - values[a, bm1])
                           - (values[a, bp2] - values[a, bm2])) / (12.0 * dx)
                    dens = c.real * c.real + c.imag * c.imag
                    if dens < floor2:
                        dens = floor2
                    v1 += wgt * (c.real * dp1.imag - c.imag * dp1.real) / dens
                    v2 += wgt * (c.real * dp2.imag - c.imag * dp2.real) / dens
            out[w, 0] = min(max(v1, -v_cap), v_cap)
            out[w, 1] = min(max(v2, -v_cap), v_cap)


def _velocities(values: np.ndarray, grid: Grid2D, pts: np.ndarray, peak2: float,
                eps_node: float = EPS_NODE, v_cap: float = V_CAP) -> np.ndarray:
    """Velocity field at arbitrary points: stencil gradient + bilinear interp."""
    nx = grid.points_per_axis
    dx = grid.dx
    x0 = grid.x[0]
    if numba is not None and math.isfinite(peak2):
        out = np.empty((len(pts), 2))
        _velocities_kernel(values, x0, dx, nx, pts, eps_node * peak2, v_cap, out)
        return out
    f1 = (pts[:, 0] - x0) / dx
    f2 = (pts[:, 1] - x0) / dx
    i0 = np.clip(np.floor(f1).astype(np.int64), 0, nx - 2)
    j0 = np.clip(np.floor(f2).astype(np.int64), 0, nx - 2)
    t1 = np.clip(f1 - i0, 0.0, 1.0)
    t2 = np.clip(f2 - j0, 0.0, 1.0)

    floor2 = eps_node * peak2
    out = np.zeros((len(pts), 2))
    w_corner = ((1 - t1) * (1 - t2), t1 * (1 - t2), (1 - t1) * t2, t1 * t2)
    corners = ((i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1))
    for w, (a, b) in zip(w_corner, corners):
        a = a % nx
        b = b % nx
        c = values[a, b]
        dpsi1 = (8.0 * (values[(a + 1) % nx, b] - values[a - 1, b])
                 - (values[(a + 2) % nx, b] - values[a - 2, b])) / (12.0 * dx)
        dpsi2 = (8.0 * (values[a, (b + 1) % nx] - values[a, b - 1])
                 - (values[a, (b + 2) % nx] - values[a, b - 2])) / (12.0 * dx)
        dens = np.maximum(c.real**2 + c.imag**2, floor2)
        out[:, 0] += w * (c.real * dpsi1.imag - c.imag * dpsi1.real) / dens
        out[:, 1] += w * (c.real * dpsi2.imag - c.imag * dpsi2.real) / dens
    np.clip(out, -v_cap, v_cap, out=out)
    return out


def velocity_at(psi: WaveFunction2D, point, eps_node: float = EPS_NODE,
                v_cap: float = V_CAP):
    """Bohmian velocity (v1, v2) at one point or an (N, 2) array of points."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    x = psi.grid.x
    if np.any(pts < x[0]) or np.any(pts > x[-1]):
        raise OutOfDomainError("point lies outside the grid")
    peak2 = float(np.max(psi.values.real**2 + psi.values.imag**2))
    v = _velocities(psi.values, psi.grid, pts, peak2, eps_node, v_cap)
    if np.ndim(point) == 1:
        return v[0]
    return v


def advance_walkers(ens: TrajectoryEnsemble, psi_t: WaveFunction2D,
                    psi_next: WaveFunction2D, dt: float,
                    eps_node: float = EPS_NODE, v_cap: float = V_CAP) -> TrajectoryEnsemble:
    """Advance all walkers by one explicit midpoint (RK2) step in place.

    The half step uses the velocity of psi_t; the full step uses the velocity
    of the time-midpoint state (average of the two snapshots) at the midpoint
    position.  Walkers that produce non-finite coordinates are flagged dead
    and frozen.
    """
    grid = ens.grid
    x = grid.x
    lo, hi = x[0], x[-1]
    pos = ens.positions

    vals_t = psi_t.values
    peak2_t = float(np.max(vals_t.real**2 + vals_t.imag**2))
    v1 = _velocities(vals_t, grid, pos, peak2_t, eps_node, v_cap)
    mid = np.clip(pos + 0.5 * dt * v1, lo, hi)
    bad_mid = ~np.isfinite(mid)
    if bad_mid.any():
        mid[bad_mid] = pos[bad_mid]  # walker will be flagged dead below

    vals_m = 0.5 * (vals_t + psi_next.values)
    peak2_m = float(np.max(vals_m.real**2 + vals_m.imag**2))
    v2 = _velocities(vals_m, grid, mid, peak2_m, eps_node, v_cap)
    new = np.clip(pos + dt * v2, lo, hi)

    ok = np.isfinite(new).all(axis=1) & ~bad_mid.any(axis=1)
    moved = ens.alive & ok
    pos[moved] = new[moved]
    ens.alive &= ok
    return ens


def classify(ens: TrajectoryEnsemble, threshold: float = 5.0, when: float | None = None):
    """Channel and quadrant labels per walker at a recorded time.

    NSDI means both |x1| and |x2| exceed the threshold; SI exactly one.  For
    NSDI walkers the quadrant is Q13 when x1*x2 > 0 and Q24 when < 0.
    Returns (channel, quadrant) string arrays.
    """
    if not ens.times:
        raise ValueError("no recorded samples to classify")
    times = np.asarray(ens.times)
    if when is None:
        m = len(times) - 1
    else:
        hits = np.flatnonzero(np.isclose(times, when, rtol=0.0, atol=1e-9))
        if hits.size == 0:
            raise ValueError(f"time {when} was not sampled")
        m = int(hits[0])
    pos = ens.samples[m].astype(np.float64)
    beyond1 = np.abs(pos[:, 0]) > threshold
    beyond2 = np.abs(pos[:, 1]) > threshold
    channel = np.where(beyond1 & beyond2, CHANNEL_NSDI,
                       np.where(beyond1 ^ beyond2, CHANNEL_SI, CHANNEL_BOUND))
    product = pos[:, 0] * pos[:, 1]
    quadrant = np.where((channel == CHANNEL_NSDI) & (product > 0), QUADRANT_Q13,
                        np.where((channel == CHANNEL_NSDI) & (product < 0),
                                 QUADRANT_Q24, QUADRANT_NONE))
    return channel, quadrant
