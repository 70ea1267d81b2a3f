"""
Quaternionic structure J(ψ^i ⊗ θ_i) = j₁(ψ^k) ⊗ j₂(θ_k) on twisted spinors.

j₁ is the quaternionic structure of ΣM. On (1,0) spinors j₂ is the real
structure of the target, which exchanges T_{1,0} and T_{0,1} so that J
preserves the (1,0) bundle. On the full bundle j₂ is complex conjugation of
the real twisting bundle u*TN, available for every target.
"""
import logging
from typing import Optional

import numpy as np

from spin_domain.clifford import quaternionic_j1

from .fields import TwistedSpinorField, random_tangent_spinor
from .maps import MapField
from .operator import apply_dirac, split_10_01

logger = logging.getLogger(__name__)

QUATERNIONIC_BLOCKS = ('(1,0)', 'full')


def quaternionic_J(u: MapField, psi: TwistedSpinorField, block: str = '(1,0)') -> TwistedSpinorField:
    """
    Antilinear J with J² = −1.

    Raises:
        StructureUnavailable: If the (1,0) structure is asked of a target without a real structure
    """
    spinor_part = quaternionic_j1(psi.values, axis=-2)
    if block == 'full':
        return psi.with_values(spinor_part)
    sigma = u.target.real_structure_matrix(u.values)
    return psi.with_values(np.einsum('xyab,xysb->xysa', sigma, spinor_part))


def random_10_spinor(u: MapField, rng: np.random.Generator, max_mode: Optional[int] = None) -> TwistedSpinorField:
    """Random unit (1,0) spinor along u."""
    part_10, _ = split_10_01(u, random_tangent_spinor(u, rng, max_mode))
    return part_10.normalized()


def j_commutation_defect(u: MapField, probes: int = 8, rng: Optional[np.random.Generator] = None,
                         block: str = '(1,0)') -> float:
    """
    max ‖DJψ − JDψ‖ / ‖ψ‖ over random unit probes of the block.

    Raises:
        ValueError: If the block carries no quaternionic structure
        StructureUnavailable: If the (1,0) block is asked of a target that is not Kähler or has no real structure
    """
    if block not in QUATERNIONIC_BLOCKS:
        raise ValueError(f"No quaternionic structure on the {block} block")
    rng = rng if rng is not None else np.random.default_rng(0)
    worst = 0.0
    for _ in range(probes):
        if block == 'full':
            psi = random_tangent_spinor(u, rng).normalized()
        else:
            psi = random_10_spinor(u, rng)
        lhs = apply_dirac(u, quaternionic_J(u, psi, block), block=block)
        rhs = quaternionic_J(u, apply_dirac(u, psi, block=block), block)
        worst = max(worst, lhs.with_values(lhs.values - rhs.values).norm())
    logger.debug(f"J commutation defect on the {block} block over {probes} probes: {worst:.3e}")
    return worst
