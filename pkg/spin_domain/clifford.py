"""
Clifford algebra of ℝ² acting on ΣM = ℂ².

Generators are e₁ = iσ₁ and e₂ = iσ₂: anti-Hermitian, squaring to −1 and
anticommuting. The grading G = i·e₁·e₂ is diag(1, −1).
"""
import numpy as np

SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)

E1 = 1j * SIGMA_1
E2 = 1j * SIGMA_2
GENERATORS = np.stack([E1, E2])

GRADING = 1j * E1 @ E2

# Quaternionic structure on ΣM: j₁(ξ) = K ξ̄ with K real and K² = −1
QUATERNIONIC_K = E2.real.copy()


def clifford_matrix(X: np.ndarray) -> np.ndarray:
    """Matrix X^α e_α of shape (..., 2, 2) for frame coefficients (..., 2)."""
    return np.einsum('...a,ast->...st', np.asarray(X), GENERATORS)


def clifford_mul(X: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """
    Clifford multiplication X·σ.

    Args:
        X: frame coefficients (..., 2), real or complex
        sigma: spinors (..., 2)

    Returns:
        Spinors (..., 2)
    """
    return np.einsum('...st,...t->...s', clifford_matrix(X), np.asarray(sigma))


def grading_G(sigma: np.ndarray, axis: int = -1) -> np.ndarray:
    """Apply the chirality grading along the given spinor axis."""
    sigma = np.asarray(sigma)
    shape = [1] * sigma.ndim
    shape[axis] = 2
    return sigma * np.array([1.0, -1.0]).reshape(shape)


def quaternionic_j1(sigma: np.ndarray, axis: int = -1) -> np.ndarray:
    """j₁(ξ) = K ξ̄ along the given spinor axis."""
    moved = np.moveaxis(np.conj(np.asarray(sigma)), axis, -1)
    return np.moveaxis(moved @ QUATERNIONIC_K.T, -1, axis)
