"""
Untwisted Dirac operator ∂̸ = e_β·∇_β on the flat spin torus, its exact
spectrum and the L² / W^{1,p} pairings.

Vectors are flattened in C order over (x, y, spinor, ...).
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
from django.core.cache import cache

from .clifford import E1, E2, GRADING
from .domain import TorusDomain
from .spectral import spinor_gradient, spinor_inverse, spinor_transform, spinor_wavenumbers

logger = logging.getLogger(__name__)


def plain_symbol(domain: TorusDomain) -> np.ndarray:
    """Symbol iκ_α e_α = −(κ₁σ₁ + κ₂σ₂) of shape (Nx, Ny, 2, 2)."""
    kappa1, kappa2 = spinor_wavenumbers(domain)
    return 1j * (kappa1[..., None, None] * E1 + kappa2[..., None, None] * E2)


def dirac_plain(domain: TorusDomain, psi: np.ndarray) -> np.ndarray:
    """
    Apply ∂̸ to spinor values of shape (Nx, Ny, 2, ...).

    Exactly diagonal in the shifted Fourier basis, hence self-adjoint.
    """
    spectrum = spinor_transform(domain, psi)
    out = np.einsum('xyst,xyt...->xys...', plain_symbol(domain), spectrum)
    return spinor_inverse(domain, out)


def assemble_plain(domain: TorusDomain) -> np.ndarray:
    """
    Dense matrix of ∂̸ of dimension 2·Nx·Ny, cached per domain.
    """
    key = f"dirac_plain:{domain.cache_key}"
    matrix = cache.get(key)
    if matrix is not None:
        return matrix

    size = 2 * domain.sites
    basis = np.eye(size, dtype=complex).reshape(domain.Nx, domain.Ny, 2, size)
    matrix = dirac_plain(domain, basis).reshape(size, size)
    # exact Hermitian up to FFT rounding
    matrix = 0.5 * (matrix + matrix.conj().T)
    cache.set(key, matrix)
    logger.debug(f"Assembled plain Dirac matrix of dimension {size} for {domain.cache_key}")
    return matrix


def grading_matrix(domain: TorusDomain, fibre: int = 1) -> np.ndarray:
    """Diagonal of G ⊗ I_fibre in the (x, y, spinor, fibre) ordering."""
    diagonal = np.broadcast_to(np.diag(GRADING).real[:, None], (2, fibre))
    return np.broadcast_to(diagonal, (domain.Nx, domain.Ny, 2, fibre)).reshape(-1).copy()


def analytic_spectrum(domain: TorusDomain, cutoff: Optional[int] = None) -> List[Tuple[float, int]]:
    """
    Exact spectrum ±2π|(k + s)/L| of the flat Dirac operator on the grid's modes.

    Args:
        domain: the spin torus
        cutoff: number of eigenvalues (with multiplicity) to cover; the last
            |λ| shell is always kept whole

    Returns:
        (eigenvalue, multiplicity) pairs ordered by |λ| then by value
    """
    kappa1, kappa2 = spinor_wavenumbers(domain)
    magnitudes = np.sort(np.hypot(kappa1, kappa2).ravel())

    shells: List[Tuple[float, int]] = []
    for value in magnitudes:
        if shells and abs(value - shells[-1][0]) <= 1e-9 * max(1.0, value):
            shells[-1] = (shells[-1][0], shells[-1][1] + 1)
        else:
            shells.append((float(value), 1))

    spectrum: List[Tuple[float, int]] = []
    count = 0
    for value, modes in shells:
        if cutoff is not None and count >= cutoff:
            break
        if value == 0.0:
            spectrum.append((0.0, 2 * modes))
        else:
            spectrum.extend([(-value, modes), (value, modes)])
        count += 2 * modes
    return spectrum


def expand_spectrum(pairs: List[Tuple[float, int]]) -> np.ndarray:
    """Sorted eigenvalues with multiplicity."""
    return np.sort(np.concatenate([np.full(mult, value) for value, mult in pairs]))


def l2_inner(domain: TorusDomain, psi: np.ndarray, phi: np.ndarray) -> complex:
    """⟨ψ, φ⟩_{L²}, antilinear in the first slot."""
    return complex(domain.cell_area * np.vdot(psi, phi))


def l2_norm(domain: TorusDomain, psi: np.ndarray) -> float:
    return float(np.sqrt(domain.cell_area) * np.linalg.norm(np.ravel(psi)))


def w1p_norm(domain: TorusDomain, psi: np.ndarray, p: float = 1.5) -> float:
    """
    W^{1,p} norm ‖ψ‖_{L^p} + ‖∇ψ‖_{L^p} with pointwise Euclidean norms over
    every component of the field.
    """
    if not 1.0 < p < np.inf:
        raise ValueError(f"W^{{1,p}} exponent must lie in (1, ∞), got {p}")
    psi = np.asarray(psi, dtype=complex)
    grad = spinor_gradient(domain, psi)
    value_density = np.sqrt(np.sum(np.abs(psi) ** 2, axis=tuple(range(2, psi.ndim))))
    grad_density = np.sqrt(np.sum(np.abs(grad) ** 2, axis=(0,) + tuple(range(3, grad.ndim))))
    lp = (domain.cell_area * np.sum(value_density**p)) ** (1.0 / p)
    grad_lp = (domain.cell_area * np.sum(grad_density**p)) ** (1.0 / p)
    return float(lp + grad_lp)
