"""
Lattice fields over the spin torus.
"""
from dataclasses import dataclass

import numpy as np

from .clifford import clifford_mul
from .domain import TorusDomain
from .operators import dirac_plain, l2_inner, l2_norm, w1p_norm


@dataclass(frozen=True)
class SpinorField:
    """Section of ΣM: two complex components per site, shape (Nx, Ny, 2)."""

    domain: TorusDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.domain.shape + (2,):
            raise ValueError(f"Spinor field needs shape {self.domain.shape + (2,)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Spinor field has non-finite entries")
        object.__setattr__(self, 'values', values)

    @classmethod
    def plane_wave(cls, domain: TorusDomain, k, spinor) -> 'SpinorField':
        """exp(2πi((k₁+s₁)x/L₁ + (k₂+s₂)y/L₂)) ⊗ spinor."""
        X, Y = domain.coordinates
        s1, s2 = domain.shift
        wave = np.exp(2j * np.pi * ((k[0] + s1) * X / domain.L1 + (k[1] + s2) * Y / domain.L2))
        return cls(domain, wave[..., None] * np.asarray(spinor, dtype=complex))

    def dirac(self) -> 'SpinorField':
        return SpinorField(self.domain, dirac_plain(self.domain, self.values))

    def inner(self, other: 'SpinorField') -> complex:
        return l2_inner(self.domain, self.values, other.values)

    def norm(self) -> float:
        return l2_norm(self.domain, self.values)

    def w1p_norm(self, p: float = 1.5) -> float:
        return w1p_norm(self.domain, self.values, p)


@dataclass(frozen=True)
class DomainVectorField:
    """Frame coefficients (Nx, Ny, 2) in the global orthonormal frame (e₁, e₂)."""

    domain: TorusDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.domain.shape + (2,):
            raise ValueError(f"Vector field needs shape {self.domain.shape + (2,)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Vector field has non-finite entries")
        object.__setattr__(self, 'values', values)

    def act_on(self, spinor: SpinorField) -> SpinorField:
        """Pointwise Clifford multiplication X·ψ."""
        return SpinorField(self.domain, clifford_mul(self.values, spinor.values))

    def pointwise_norm(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)
