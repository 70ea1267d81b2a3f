"""
Constraint spinor ψ(u_t): the normalized kernel projection of the
transported initial kernel spinor ψ₀.
"""
import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np
from django.conf import settings

from lab.exceptions import AmbiguousCluster, ConfigError, DegenerateProjection
from twisted_dirac.fields import TwistedSpinorField
from twisted_dirac.maps import MapField
from twisted_dirac.operator import apply_dirac
from twisted_dirac.spectral import SpectralData, eigen_solve, project_kernel_contour, project_kernel_eigen

from .context import AdmissibleConstants, TransportContext
from .transport import transport_spinor

logger = logging.getLogger(__name__)

PROJECTION_METHODS = ('eigen', 'contour')
COLLAPSE_NORM = 1e-8
LOWER_BOUND = np.sqrt(0.5)
STRICT_LOWER_BOUND = np.sqrt(0.75)


def _safe_gap(spectral: SpectralData) -> Optional[float]:
    try:
        return spectral.gap()
    except AmbiguousCluster:
        return None


def constraint_spinor(u_t: MapField, psi0: TwistedSpinorField, threshold: float,
                      block: str = '(1,0)', method: str = 'eigen',
                      spectral: Optional[SpectralData] = None,
                      constants: Optional[AdmissibleConstants] = None,
                      kernel_tol: Optional[float] = None) -> Tuple[TwistedSpinorField, Dict[str, Any]]:
    """
    Transport ψ₀ from its basepoint u₀ to u_t, project onto the kernel of
    D^{π∘u_t} below `threshold` and normalize.

    Args:
        u_t: current map
        psi0: unit kernel spinor over u₀
        threshold: kernel threshold Λ
        block: operator block the kernel is taken in
        method: 'eigen' (orthogonal projection) or 'contour' (resolvent integral)
        spectral: precomputed spectral data over u_t, reused when given
        kernel_tol: largest admissible ‖D_{u₀}ψ₀‖, DIRAC_KERNEL_TOL by default

    Returns:
        (ψ(u_t), diagnostics with psi_bar_norm, kernel_dim, gap and the two bound checks)

    Raises:
        ConfigError: If ψ₀ is not a kernel spinor over u₀
        DegenerateProjection: If ‖ψ̄‖ < 1e−8
        AmbiguousCluster: If the kernel count at the threshold is unreliable
    """
    if method not in PROJECTION_METHODS:
        raise ConfigError(f"Unknown projection method: {method!r}", details={'allowed': list(PROJECTION_METHODS)})
    norm0 = psi0.norm()
    if abs(norm0 - 1.0) > 1e-8:
        raise ValueError(f"Initial spinor must have unit L² norm, got {norm0:.12f}")

    u0 = psi0.basepoint
    kernel_tol = settings.DIRAC_KERNEL_TOL if kernel_tol is None else kernel_tol
    kernel_residual = apply_dirac(u0, psi0, block=block).norm()
    if kernel_residual > kernel_tol:
        raise ConfigError(
            f"Initial spinor is not a kernel spinor over its basepoint: "
            f"‖Dψ₀‖ = {kernel_residual:.3e} exceeds {kernel_tol:.1e}",
            details={'kernel_residual': kernel_residual, 'kernel_tol': kernel_tol},
        )

    if u0 is u_t:
        transported = psi0
    else:
        transported = transport_spinor(TransportContext.build(u0, u_t, constants), psi0)

    spectral = spectral if spectral is not None else eigen_solve(u_t, which=block)
    kernel_dim = spectral.kernel_count(threshold)
    if method == 'eigen':
        psi_bar = project_kernel_eigen(u_t, transported, threshold, spectral)
    else:
        psi_bar = project_kernel_contour(u_t, transported, threshold, matrix=spectral.matrix,
                                         eigenvalues=None if spectral.truncated else spectral.eigenvalues)

    psi_bar_norm = psi_bar.norm()
    if psi_bar_norm < COLLAPSE_NORM:
        logger.error(f"Kernel projection collapsed to norm {psi_bar_norm:.3e}")
        raise DegenerateProjection(
            f"Projected spinor has norm {psi_bar_norm:.3e}",
            details={'psi_bar_norm': psi_bar_norm, 'kernel_dim': kernel_dim},
        )

    within_bound = LOWER_BOUND <= psi_bar_norm <= 1.0 + 1e-12
    if not within_bound:
        logger.warning(f"‖ψ̄‖ = {psi_bar_norm:.6f} outside [√(1/2), 1]")
    elif psi_bar_norm < STRICT_LOWER_BOUND:
        logger.info(f"‖ψ̄‖ = {psi_bar_norm:.6f} below √(3/4)")

    diagnostics = {
        'psi_bar_norm': psi_bar_norm,
        'kernel_dim': kernel_dim,
        'gap': _safe_gap(spectral),
        'within_half_bound': bool(within_bound),
        'within_three_quarter_bound': bool(psi_bar_norm >= STRICT_LOWER_BOUND),
    }
    return psi_bar.with_values(psi_bar.values / psi_bar_norm), diagnostics
