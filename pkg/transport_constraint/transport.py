"""
Transport of twisted spinors: identity on ΣM, parallel transport on TN.
"""
import numpy as np
from django.conf import settings

from lab.exceptions import TangencyViolation
from twisted_dirac.fields import TwistedSpinorField

from .context import TransportContext


def transport_vectors(ctx: TransportContext, Z: np.ndarray) -> np.ndarray:
    """Transport tangent vector fields (Nx, Ny, q, ...) from u to v."""
    return np.einsum('xyab,xyb...->xya...', ctx.matrices, Z)


def transport_spinor(ctx: TransportContext, psi: TwistedSpinorField) -> TwistedSpinorField:
    """
    P^{u,v}ψ over the destination map.

    Raises:
        TangencyViolation: If ψ is not tangential over the source map
    """
    if psi.domain != ctx.source.domain:
        raise ValueError("Spinor and transport context live on different domains")
    source_psi = psi if psi.basepoint is ctx.source else TwistedSpinorField(ctx.source, psi.values)
    residual = source_psi.tangency_residual()
    if residual > settings.DIRAC_TANGENCY_TOL:
        raise TangencyViolation(
            f"Cannot transport a non-tangential spinor (residual {residual:.3e})",
            details={'residual': residual},
        )
    moved = np.einsum('xyab,xysb->xysa', ctx.matrices, source_psi.values)
    return TwistedSpinorField(ctx.destination, moved)
