"""
Twisted spinor fields: sections of ΣM ⊗ (π∘u)*TN in ambient components.
"""
from dataclasses import dataclass

import numpy as np

from spin_domain.operators import l2_inner, l2_norm, w1p_norm

from .maps import MapField, smooth_field


@dataclass(frozen=True, eq=False)
class TwistedSpinorField:
    """
    Values of shape (Nx, Ny, 2, q): a ℂ² spinor per ambient component ψ^A.

    Tangency π^A_B(u)ψ^B = ψ^A is not enforced on construction; operators
    check `tangency_residual` before use.
    """

    basepoint: MapField
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        expected = self.basepoint.domain.shape + (2, self.basepoint.target.ambient_dim)
        if values.shape != expected:
            raise ValueError(f"Twisted spinor needs shape {expected}, got {values.shape}")
        object.__setattr__(self, 'values', values)

    @property
    def domain(self):
        return self.basepoint.domain

    def with_values(self, values: np.ndarray) -> 'TwistedSpinorField':
        return TwistedSpinorField(self.basepoint, values)

    def normal_part(self) -> np.ndarray:
        return self.values - np.einsum('xyab,xysb->xysa', self.basepoint.projector, self.values)

    def tangency_residual(self) -> float:
        """Largest normal component, relative to max(1, sup|ψ|)."""
        scale = max(1.0, float(np.max(np.abs(self.values))) if self.values.size else 0.0)
        return float(np.max(np.abs(self.normal_part()))) / scale

    def tangential(self) -> 'TwistedSpinorField':
        return self.with_values(np.einsum('xyab,xysb->xysa', self.basepoint.projector, self.values))

    def inner(self, other: 'TwistedSpinorField') -> complex:
        return l2_inner(self.domain, self.values, other.values)

    def norm(self) -> float:
        return l2_norm(self.domain, self.values)

    def normalized(self) -> 'TwistedSpinorField':
        return self.with_values(self.values / self.norm())

    def w1p_norm(self, p: float = 1.5) -> float:
        return w1p_norm(self.domain, self.values, p)

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values.reshape(self.domain.shape + (-1,)), axis=-1)))

    @classmethod
    def zeros(cls, u: MapField) -> 'TwistedSpinorField':
        return cls(u, np.zeros(u.domain.shape + (2, u.target.ambient_dim), dtype=complex))


def random_tangent_spinor(u: MapField, rng: np.random.Generator, max_mode: int = None) -> TwistedSpinorField:
    """
    Random tangential twisted spinor of unit L² norm.

    With max_mode set, the ambient components are smooth trigonometric
    polynomials times the spin-structure phase; otherwise white noise.
    """
    q = u.target.ambient_dim
    shape = u.domain.shape + (2, q)
    if max_mode is None:
        raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    else:
        real = smooth_field(u.domain, rng, 2 * q, max_mode).reshape(shape)
        imag = smooth_field(u.domain, rng, 2 * q, max_mode).reshape(shape)
        raw = u.domain.phase[..., None, None] * (real + 1j * imag)
    psi = TwistedSpinorField(u, raw).tangential()
    return psi.normalized()
