"""Ionization yields and entanglement measures of the two-electron state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStateError
from .grid import WaveFunction2D


@dataclass
class ReducedDensityMatrix:
    """Trace-normalized one-body density matrix on a 1D coordinate grid.

    ``eigenvalues`` are the raw occupation numbers of the discretized
    operator (descending, summing to 1); ``probabilities`` clips them to
    [0, 1] for entropy-style functionals.
    """

    matrix: np.ndarray
    x: np.ndarray
    dx: float
    eigenvalues: np.ndarray

    @property
    def probabilities(self) -> np.ndarray:
        return np.clip(self.eigenvalues, 0.0, 1.0)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def _region_masks(grid, threshold: float):
    outer = np.abs(grid.x) > threshold
    both = np.outer(outer, outer)
    one = np.outer(outer, ~outer) | np.outer(~outer, outer)
    return both, one


def di_yield(psi: WaveFunction2D, absorbed_di: float = 0.0,
             threshold: float = 5.0) -> float:
    """Double-ionization probability: |x1|,|x2| > threshold plus absorbed flux."""
    both, _ = _region_masks(psi.grid, threshold)
    dens = psi.values.real**2 + psi.values.imag**2
    return float(np.sum(dens[both]) * psi.grid.dx**2) + absorbed_di


def si_yield(psi: WaveFunction2D, absorbed_si: float = 0.0,
             threshold: float = 5.0) -> float:
    """Single-ionization probability: exactly one coordinate beyond threshold."""
    _, one = _region_masks(psi.grid, threshold)
    dens = psi.values.real**2 + psi.values.imag**2
    return float(np.sum(dens[one]) * psi.grid.dx**2) + absorbed_si


def bound_probability(psi: WaveFunction2D, threshold: float = 5.0) -> float:
    """Probability remaining with both coordinates inside the threshold."""
    both, one = _region_masks(psi.grid, threshold)
    dens = psi.values.real**2 + psi.values.imag**2
    inner = ~(both | one)
    return float(np.sum(dens[inner]) * psi.grid.dx**2)


def reduced_density_matrix(psi: WaveFunction2D, electron: int = 1,
                           coarsen: int = 1) -> ReducedDensityMatrix:
    """One-body reduced density matrix by tracing out the partner coordinate.

    rho(x, x') = sum_j Psi(x, y_j) Psi*(x', y_j) dx, trace-normalized.  With
    ``coarsen`` > 1 the retained coordinate keeps every coarsen-th point (the
    traced coordinate stays at full resolution), which shrinks the
    eigenproblem at the cost of a small discretization error.
    """
    if electron not in (1, 2):
        raise ValueError("electron must be 1 or 2")
    n2 = psi.norm2()
    if n2 <= 0:
        raise InvalidStateError("cannot reduce a zero-norm state")
    v = psi.values if electron == 1 else psi.values.T
    if coarsen > 1:
        v = v[::coarsen, :]
    dx = psi.grid.dx
    dx_kept = dx * coarsen
    rho = v @ v.conj().T * dx
    trace = float(np.real(np.trace(rho))) * dx_kept
    rho /= trace
    eig = np.linalg.eigvalsh(rho)[::-1] * dx_kept
    return ReducedDensityMatrix(matrix=rho, x=psi.grid.x[::coarsen], dx=dx_kept,
                                eigenvalues=eig)


def _checked_probabilities(rho: ReducedDensityMatrix) -> np.ndarray:
    lam = rho.eigenvalues
    if np.any(lam < -1e-10):
        raise InvalidStateError(
            f"density matrix has eigenvalue {lam.min():.3e} < -1e-10; "
            "hermiticity or normalization is broken")
    return np.clip(lam, 0.0, 1.0)


def von_neumann_entropy(rho: ReducedDensityMatrix) -> float:
    """S = -sum lambda ln lambda in nats, with 0 ln 0 = 0."""
    lam = _checked_probabilities(rho)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def inverse_purity(rho: ReducedDensityMatrix) -> float:
    """1 / sum lambda^2; equals 1 for a pure reduced state."""
    lam = _checked_probabilities(rho)
    return float(1.0 / np.sum(lam**2))
