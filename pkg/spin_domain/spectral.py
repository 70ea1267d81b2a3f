"""
Pseudospectral calculus on the flat torus.

Real map fields use the integer lattice 2πk/L. First derivatives drop the
Nyquist symbol so they stay real and anti-self-adjoint; the Laplacian keeps
the full −|κ|². Spinor fields use the shifted lattice 2π(k + s)/L of the
spin structure and keep every symbol.

All transforms act on the two leading axes (Nx, Ny); trailing axes are carried.
"""
from typing import Tuple

import numpy as np
import scipy.fft as sfft

from .domain import TorusDomain


def _expand(symbol: np.ndarray, ndim: int) -> np.ndarray:
    return symbol.reshape(symbol.shape + (1,) * (ndim - 2))


def map_wavenumbers(domain: TorusDomain, nyquist: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    k1, k2 = domain.integer_modes
    kappa1 = 2.0 * np.pi * k1 / domain.L1
    kappa2 = 2.0 * np.pi * k2 / domain.L2
    if not nyquist:
        kappa1 = np.where(k1 == -domain.Nx // 2, 0.0, kappa1)
        kappa2 = np.where(k2 == -domain.Ny // 2, 0.0, kappa2)
    return kappa1, kappa2


def spinor_wavenumbers(domain: TorusDomain) -> Tuple[np.ndarray, np.ndarray]:
    k1, k2 = domain.integer_modes
    s1, s2 = domain.shift
    return 2.0 * np.pi * (k1 + s1) / domain.L1, 2.0 * np.pi * (k2 + s2) / domain.L2


def laplacian_symbol(domain: TorusDomain) -> np.ndarray:
    kappa1, kappa2 = map_wavenumbers(domain, nyquist=True)
    return -(kappa1**2 + kappa2**2)


def fourier_multiply(domain: TorusDomain, field: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Apply a Fourier multiplier with real-field output."""
    field = np.asarray(field, dtype=float)
    spectrum = sfft.fft2(field, axes=(0, 1))
    return sfft.ifft2(_expand(symbol, field.ndim) * spectrum, axes=(0, 1)).real


def spectral_gradient(domain: TorusDomain, field: np.ndarray) -> np.ndarray:
    """Gradient (∂₁f, ∂₂f) of a real field, shape (2, Nx, Ny, ...)."""
    field = np.asarray(field, dtype=float)
    spectrum = sfft.fft2(field, axes=(0, 1))
    return np.stack([
        sfft.ifft2(1j * _expand(kappa, field.ndim) * spectrum, axes=(0, 1)).real
        for kappa in map_wavenumbers(domain)
    ])


def spectral_hessian(domain: TorusDomain, field: np.ndarray) -> np.ndarray:
    """Second derivatives ∂_β∂_γ f, shape (2, 2, Nx, Ny, ...); the diagonal keeps Nyquist."""
    field = np.asarray(field, dtype=float)
    spectrum = sfft.fft2(field, axes=(0, 1))
    full = map_wavenumbers(domain, nyquist=True)
    odd = map_wavenumbers(domain)
    out = np.empty((2, 2) + field.shape)
    for b in range(2):
        for c in range(2):
            symbol = -full[b] ** 2 if b == c else -odd[b] * odd[c]
            out[b, c] = sfft.ifft2(_expand(symbol, field.ndim) * spectrum, axes=(0, 1)).real
    return out


def laplacian(domain: TorusDomain, field: np.ndarray) -> np.ndarray:
    return fourier_multiply(domain, field, laplacian_symbol(domain))


def divergence(domain: TorusDomain, vector: np.ndarray) -> np.ndarray:
    """∂₁V₁ + ∂₂V₂ for a real field V of shape (2, Nx, Ny, ...)."""
    kappa = map_wavenumbers(domain)
    total = 0.0
    for a in range(2):
        spectrum = sfft.fft2(vector[a], axes=(0, 1))
        total = total + 1j * _expand(kappa[a], vector[a].ndim) * spectrum
    return sfft.ifft2(total, axes=(0, 1)).real


def spinor_transform(domain: TorusDomain, values: np.ndarray) -> np.ndarray:
    """Fourier coefficients of the periodic part conj(phase)·ψ."""
    values = np.asarray(values, dtype=complex)
    periodic = np.conj(_expand(domain.phase, values.ndim)) * values
    return sfft.fft2(periodic, axes=(0, 1))


def spinor_inverse(domain: TorusDomain, spectrum: np.ndarray) -> np.ndarray:
    return _expand(domain.phase, spectrum.ndim) * sfft.ifft2(spectrum, axes=(0, 1))


def spinor_gradient(domain: TorusDomain, values: np.ndarray) -> np.ndarray:
    """Derivatives (∂₁ψ, ∂₂ψ) of a spinor-valued field, shape (2, Nx, Ny, ...)."""
    spectrum = spinor_transform(domain, values)
    return np.stack([
        spinor_inverse(domain, 1j * _expand(kappa, spectrum.ndim) * spectrum)
        for kappa in spinor_wavenumbers(domain)
    ])
