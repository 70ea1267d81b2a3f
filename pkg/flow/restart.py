"""
Manual restart helper: random perturbations of the current map until the
(1,0) kernel is minimal and the α-energy has dropped.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from lab.exceptions import AmbiguousCluster, OutsideTube, StructureUnavailable
from twisted_dirac.maps import MapField, perturb_map
from twisted_dirac.spectral import eigen_solve

from .config import FlowConfig
from .energies import energy_alpha

logger = logging.getLogger(__name__)

MINIMAL_KERNEL = 2


def restart_candidate(u: MapField, config: FlowConfig, threshold: float,
                      amplitude: float = 0.05, max_mode: int = 1, max_attempts: int = 50,
                      rng: Optional[np.random.Generator] = None) -> Tuple[Optional[MapField], int]:
    """
    Draw seeded perturbations u₁ = π(u + a·η) until dim_ℂ ker D_{1,0}^{u₁} ≤ 2
    below `threshold` and E_α(u₁) < E_α(u).

    Returns:
        (u₁, attempts), with u₁ = None when no candidate was accepted

    Raises:
        StructureUnavailable: If the target is not Kähler
    """
    if not (u.target.is_kaehler and u.target.is_surface):
        raise StructureUnavailable(f"Restart needs a Kähler surface target, got {u.target.kind}")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    reference = energy_alpha(u, config.alpha)
    for attempt in range(1, max_attempts + 1):
        try:
            candidate = perturb_map(u, amplitude, rng, max_mode)
        except OutsideTube:
            continue
        candidate_energy = energy_alpha(candidate, config.alpha)
        if candidate_energy >= reference:
            continue
        try:
            kernel_dim = eigen_solve(candidate, k=config.eigen_count, which='(1,0)').kernel_count(threshold)
        except AmbiguousCluster:
            continue
        if kernel_dim <= MINIMAL_KERNEL:
            logger.info(
                f"Restart candidate after {attempt} attempts: kernel {kernel_dim}, "
                f"E_α {reference:.8g} → {candidate_energy:.8g}"
            )
            return candidate, attempt
    logger.warning(f"No restart candidate in {max_attempts} attempts")
    return None, max_attempts
