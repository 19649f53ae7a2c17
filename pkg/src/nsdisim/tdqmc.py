"""Walker-and-guide-wave Monte Carlo ensemble for channel-resolved entropies.

Each of the N configurations holds a walker pair (x1, x2) and two one-body
guide waves on a shared 1D grid.  The guide wave of electron i evolves under
the ion potential, the laser coupling, and the soft-core repulsion evaluated
at the partner walker's current position; the walker follows the Bohmian
velocity of its own guide wave.  Ensemble averages of guide-wave projectors
give one-body density matrices that can be restricted to configurations whose
walkers ended in a chosen region of the (x1, x2) plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .bohmian import EPS_NODE, V_CAP, sample_initial
from .errors import InsufficientSelectionError
from .grid import Grid1D, WaveFunction2D, soft_core_attraction, soft_core_repulsion
from .observables import ReducedDensityMatrix

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

SELECTORS = ("all", "nsdi", "q13", "q24")

# 3-point Gauss-Hermite rule for the optional smeared partner interaction
_GH_NODES = np.array([-math.sqrt(3.0), 0.0, math.sqrt(3.0)])
_GH_WEIGHTS = np.array([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0])


@dataclass
class TdqmcEnsemble:
    """N concurrent configurations: guide waves (N, Nx) plus walker pairs (N, 2)."""

    grid: Grid1D
    phi1: np.ndarray
    phi2: np.ndarray
    walkers: np.ndarray
    seed: int
    alive: np.ndarray = None
    threshold: float = 5.0
    _absorber: np.ndarray = field(default=None, repr=False)
    _kernel_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.alive is None:
            self.alive = np.ones(len(self.walkers), dtype=bool)
        if self._absorber is None:
            L = self.grid.half_width
            ramp = np.clip((np.abs(self.grid.x) - 0.9 * L) / (0.1 * L), 0.0, 1.0)
            self._absorber = np.cos(0.5 * np.pi * ramp) ** 0.125

    @property
    def n_configurations(self) -> int:
        return len(self.walkers)

    @property
    def n_dead(self) -> int:
        return int(np.count_nonzero(~self.alive))

    def guide_norms(self, electron: int = 1) -> np.ndarray:
        phi = self.phi1 if electron == 1 else self.phi2
        return np.sqrt(np.sum(phi.real**2 + phi.imag**2, axis=1) * self.grid.dx)


def tdqmc_init(psi0: WaveFunction2D, n_configurations: int, seed: int) -> TdqmcEnsemble:
    """Sample walker pairs from |psi0|^2 and slice conditional guide waves.

    phi1^k is the normalized column psi0(., x2^k) at the grid point nearest
    the sampled partner position, and symmetrically for phi2^k, so the
    ensemble-averaged one-body density reproduces the exact one at t=0.
    """
    if n_configurations <= 0:
        raise ValueError(f"configuration count must be positive, got {n_configurations}")
    ens0 = sample_initial(psi0, n_configurations, seed)
    pos = ens0.positions
    grid = psi0.grid.axis
    nx = grid.points
    x0 = grid.x[0]
    j1 = np.clip(np.round((pos[:, 0] - x0) / grid.dx).astype(np.int64), 0, nx - 1)
    j2 = np.clip(np.round((pos[:, 1] - x0) / grid.dx).astype(np.int64), 0, nx - 1)
    phi1 = psi0.values[:, j2].T.astype(np.complex128).copy()
    phi2 = psi0.values[j1, :].astype(np.complex128).copy()
    for phi in (phi1, phi2):
        norms = np.sqrt(np.sum(phi.real**2 + phi.imag**2, axis=1) * grid.dx)
        phi /= norms[:, None]
    return TdqmcEnsemble(grid=grid, phi1=phi1, phi2=phi2, walkers=pos, seed=seed)


def _velocities_1d(phi: np.ndarray, grid: Grid1D, pos: np.ndarray,
                   eps_node: float, v_cap: float) -> np.ndarray:
    """Bohmian velocity of each configuration's own guide wave at its walker."""
    nx = grid.points
    dx = grid.dx
    f = (pos - grid.x[0]) / dx
    i0 = np.clip(np.floor(f).astype(np.int64), 0, nx - 2)
    t = np.clip(f - i0, 0.0, 1.0)
    rows = np.arange(len(pos))
    peak2 = np.max(phi.real**2 + phi.imag**2, axis=1)
    floor2 = eps_node * peak2
    v = np.zeros(len(pos))
    for w, a in ((1.0 - t, i0), (t, i0 + 1)):
        a = a % nx
        c = phi[rows, a]
        dphi = (8.0 * (phi[rows, (a + 1) % nx] - phi[rows, a - 1])
                - (phi[rows, (a + 2) % nx] - phi[rows, a - 2])) / (12.0 * dx)
        dens = np.maximum(c.real**2 + c.imag**2, floor2)
        v += w * (c.real * dphi.imag - c.imag * dphi.real) / dens
    return np.clip(v, -v_cap, v_cap)


def _partner_potential(x: np.ndarray, partner: np.ndarray,
                       smoothing_sigma: float) -> np.ndarray:
    """Soft-core repulsion felt from the partner walker, optionally smeared."""
    if smoothing_sigma <= 0:
        return soft_core_repulsion(x[None, :] - partner[:, None])
    out = np.zeros((len(partner), len(x)))
    for node, weight in zip(_GH_NODES, _GH_WEIGHTS):
        shifted = partner + smoothing_sigma * node
        out += weight * soft_core_repulsion(x[None, :] - shifted[:, None])
    return out


def _apply_potential_phase_numpy(phi, x, partner, v_ion, field_value, dt,
                                 interaction, smoothing_sigma):
    v_eff = v_ion[None, :] - field_value * x[None, :]
    if interaction:
        v_eff = v_eff + _partner_potential(x, partner, smoothing_sigma)
    phase = np.exp(-0.5j * dt * v_eff)
    phi *= phase
    return phase


if numba is not None:
    @numba.njit(cache=True, fastmath=True)
    def _phase_kernel(phi, phase, x, partner, v_ion, field_value, dt,
                      interaction):  # pragma: no cover - jitted
        n, nx = phi.shape
        for k in range(n):
            p = partner[k]
            for i in range(nx):
                v = v_ion[i] - field_value * x[i]
                if interaction:
                    d = x[i] - p
                    v += 1.0 / math.sqrt(1.0 + d * d)
                th = -0.5 * dt * v
                ph = complex(math.cos(th), math.sin(th))
                phase[k, i] = ph
                phi[k, i] *= ph


def _apply_potential_phase(phi, x, partner, v_ion, field_value, dt,
                           interaction, smoothing_sigma):
    """Multiply phi by exp(-i dt/2 V_eff) in place; returns the phase array."""
    if numba is None or smoothing_sigma > 0:
        return _apply_potential_phase_numpy(phi, x, partner, v_ion, field_value,
                                            dt, interaction, smoothing_sigma)
    phase = np.empty_like(phi)
    _phase_kernel(phi, phase, x, partner, v_ion, float(field_value), dt,
                  interaction)
    return phase


def tdqmc_step(ens: TdqmcEnsemble, field_value: float, dt: float,
               interaction: bool = True, smoothing_sigma: float = 0.0,
               eps_node: float = EPS_NODE, v_cap: float = V_CAP,
               normalize: bool = True) -> TdqmcEnsemble:
    """Advance guide waves and walkers by one step in place.

    Each guide wave takes a split-operator step under its one-body
    Hamiltonian with the partner walker frozen at the step start; walkers
    then move by the RK2 midpoint rule through the old/new wave pair.  Guide
    waves are masked at the box edge and renormalized.
    """
    grid = ens.grid
    x = grid.x
    key = dt
    if key not in ens._kernel_cache:
        ens._kernel_cache[key] = {
            "exp_k": np.exp(-0.5j * dt * grid.k**2),
            "v_ion": soft_core_attraction(x),
        }
    exp_k = ens._kernel_cache[key]["exp_k"]
    v_ion = ens._kernel_cache[key]["v_ion"]

    old1 = ens.phi1.copy()
    old2 = ens.phi2.copy()
    for electron, phi, partner in ((1, ens.phi1, ens.walkers[:, 1]),
                                   (2, ens.phi2, ens.walkers[:, 0])):
        phase = _apply_potential_phase(phi, x, partner, v_ion, field_value, dt,
                                       interaction, smoothing_sigma)
        phi[:] = sfft.ifft(sfft.fft(phi, axis=1) * exp_k[None, :], axis=1)
        phi *= phase

    lo, hi = x[0], x[-1]
    for col, phi_old, phi_new in ((0, old1, ens.phi1), (1, old2, ens.phi2)):
        pos = ens.walkers[:, col]
        v_a = _velocities_1d(phi_old, grid, pos, eps_node, v_cap)
        mid = np.clip(pos + 0.5 * dt * v_a, lo, hi)
        phi_mid = 0.5 * (phi_old + phi_new)
        v_b = _velocities_1d(phi_mid, grid, mid, eps_node, v_cap)
        new = np.clip(pos + dt * v_b, lo, hi)
        ok = np.isfinite(new)
        pos[ens.alive & ok] = new[ens.alive & ok]
        ens.alive &= ok

    for phi in (ens.phi1, ens.phi2):
        phi *= ens._absorber[None, :]
        norms2 = np.sum(phi.real**2 + phi.imag**2, axis=1) * grid.dx
        ok = np.isfinite(norms2) & (norms2 > 0)
        ens.alive &= ok
        if normalize:
            norms2[~ok] = 1.0
            phi /= np.sqrt(norms2)[:, None]
    return ens


def selection_mask(ens: TdqmcEnsemble, selector: str) -> np.ndarray:
    """Boolean mask of live configurations matching a channel selector."""
    if selector not in SELECTORS:
        raise ValueError(f"unknown selector {selector!r}; choose from {SELECTORS}")
    w = ens.walkers
    if selector == "all":
        mask = np.ones(len(w), dtype=bool)
    elif selector == "nsdi":
        mask = (np.abs(w[:, 0]) > ens.threshold) & (np.abs(w[:, 1]) > ens.threshold)
    elif selector == "q13":
        mask = w[:, 0] * w[:, 1] > 0
    else:
        mask = w[:, 0] * w[:, 1] < 0
    return mask & ens.alive


def restricted_density_matrix(ens: TdqmcEnsemble, selector: str = "all",
                              electron: int = 1,
                              materialize: bool = True) -> ReducedDensityMatrix:
    """Ensemble-averaged one-body density matrix over selected configurations.

    rho_i(x, x') = (1/N_sel) sum_k phi_i^k(x) phi_i^k*(x'), trace-normalized.
    Eigenvalues come from the N_sel x N_sel Gram matrix of the guide waves;
    with ``materialize=False`` the coordinate-space matrix is skipped (the
    spectrum alone suffices for entropy functionals).
    """
    mask = selection_mask(ens, selector)
    n_sel = int(np.count_nonzero(mask))
    if n_sel < 10:
        raise InsufficientSelectionError(
            f"selector {selector!r} matched only {n_sel} configurations",
            count=n_sel)
    phi = (ens.phi1 if electron == 1 else ens.phi2)[mask]
    dx = ens.grid.dx
    gram = (phi.conj() @ phi.T) * (dx / n_sel)
    eig = np.linalg.eigvalsh(gram)[::-1]
    trace = float(np.sum(eig.real))
    eig = eig / trace
    matrix = None
    if materialize:
        matrix = (phi.T @ phi.conj()) / (n_sel * trace)
    return ReducedDensityMatrix(matrix=matrix, x=ens.grid.x, dx=dx, eigenvalues=eig)


def entropy_by_channel(ens: TdqmcEnsemble, electron: int = 1) -> dict:
    """Von Neumann entropy of the restricted density matrix per channel.

    Returns {selector: {"entropy": nats or nan, "n_selected": count}}; a
    channel with fewer than 10 matching configurations reports nan.
    """
    from .observables import von_neumann_entropy

    out = {}
    for selector in SELECTORS:
        n_sel = int(np.count_nonzero(selection_mask(ens, selector)))
        if n_sel < 10:
            out[selector] = {"entropy": float("nan"), "n_selected": n_sel}
            continue
        rho = restricted_density_matrix(ens, selector, electron, materialize=False)
        out[selector] = {"entropy": von_neumann_entropy(rho), "n_selected": n_sel}
    return out
