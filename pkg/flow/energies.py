"""
Dirichlet energy, α-energy and the coupled Lagrangian.
"""
from typing import Optional

import numpy as np

from twisted_dirac.fields import TwistedSpinorField
from twisted_dirac.maps import MapField
from twisted_dirac.operator import apply_dirac


def energy(u: MapField) -> float:
    """E(u) = ½∫|du|²."""
    return float(0.5 * u.domain.cell_area * np.sum(u.energy_density))


def energy_alpha(u: MapField, alpha: float) -> float:
    """E_α(u) = ½∫(1 + |du|²)^α."""
    return float(0.5 * u.domain.cell_area * np.sum((1.0 + u.energy_density) ** alpha))


def alpha_weight(u: MapField, alpha: float) -> np.ndarray:
    """(1 + |du|²)^{α−1} at every site."""
    return (1.0 + u.energy_density) ** (alpha - 1.0)


def spinor_action(u: MapField, psi: TwistedSpinorField) -> float:
    """½⟨ψ, D^u ψ⟩_{L²}, real because D^u is self-adjoint."""
    return 0.5 * psi.inner(apply_dirac(u, psi)).real


def lagrangian(u: MapField, psi: Optional[TwistedSpinorField], alpha: float) -> float:
    """L^α(u, ψ) = E_α(u) + ½∫⟨ψ, D^u ψ⟩."""
    value = energy_alpha(u, alpha)
    if psi is not None:
        value += spinor_action(u, psi)
    return value
