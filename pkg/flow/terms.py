"""
Right-hand side of the α-Dirac-harmonic heat flow in ambient coordinates.

    ∂_t u = Δu + 2(α−1)(∇²_{βγ}u^B ∇_βu^B ∇_γu)/(1 + |∇u|²) + F₁(u)
            + F₂(u, ψ)/(α(1 + |∇u|²)^{α−1})

with F₁^A = −π^A_{BC}⟨∇u^B, ∇u^C⟩ and
F₂^A = −π^A_B π^C_{BD} π^C_{EF} ⟨ψ^D, ∇u^E·ψ^F⟩.
"""
import logging
from typing import Optional

import numpy as np
from django.conf import settings

from lab.exceptions import TangencyViolation
from spin_domain.clifford import GENERATORS
from spin_domain.spectral import laplacian
from twisted_dirac.fields import TwistedSpinorField
from twisted_dirac.maps import MapField

from .energies import alpha_weight

logger = logging.getLogger(__name__)


def _checked_spinor(u: MapField, psi: TwistedSpinorField) -> np.ndarray:
    if psi.domain != u.domain:
        raise ValueError("Spinor and map live on different domains")
    field = psi if psi.basepoint is u else TwistedSpinorField(u, psi.values)
    residual = field.tangency_residual()
    if residual > settings.DIRAC_TANGENCY_TOL:
        raise TangencyViolation(
            f"Spinor is not tangential along the map (residual {residual:.3e})",
            details={'residual': residual},
        )
    return field.values


def clifford_pairing(psi: np.ndarray) -> np.ndarray:
    """
    w[α, x, y, D, F] = Re⟨ψ^D, e_α·ψ^F⟩ summed over the spinor index.
    """
    moved = np.einsum('ast,xytF->axysF', GENERATORS, psi)
    return np.einsum('xysD,axysF->axyDF', np.conj(psi), moved).real


def f1_term(u: MapField) -> np.ndarray:
    """F₁(u) = −II(du, du), shape (Nx, Ny, q)."""
    return -np.einsum('xyABC,axyB,axyC->xyA', u.second_derivative, u.gradient, u.gradient)


def f2_term(u: MapField, psi: TwistedSpinorField) -> np.ndarray:
    """
    F₂(u, ψ), shape (Nx, Ny, q).

    Raises:
        TangencyViolation: If ψ is not tangential along u
    """
    values = _checked_spinor(u, psi)
    w = clifford_pairing(values)
    sd = u.second_derivative
    inner = np.einsum('xyCBD,xyCEF,axyE,axyDF->xyB', sd, sd, u.gradient, w, optimize=True)
    return -np.einsum('xyAB,xyB->xyA', u.projector, inner)


def curvature_term(u: MapField, psi: TwistedSpinorField) -> np.ndarray:
    """
    ℛ(u, ψ) = ½ Σ Re⟨ψ^i, e_α·ψ^j⟩ R(b_i, b_j) ∂_αu in a tangent frame (b_i).

    Built from the target's intrinsic curvature; equals −F₂(u, ψ).
    """
    values = _checked_spinor(u, psi)
    frame = u.tangent_frame
    components = np.einsum('xyAi,xysA->xysi', frame, values)
    w = clifford_pairing(components)
    n = frame.shape[-1]
    out = np.zeros(u.values.shape)
    for a in range(2):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                R = u.target.riemann_curvature(u.values, frame[..., i], frame[..., j], u.gradient[a])
                out += 0.5 * w[a, ..., i, j][..., None] * R
    return out


def hessian_term(u: MapField) -> np.ndarray:
    """(∇²_{βγ}u^B ∇_βu^B ∇_γu^A)/(1 + |∇u|²)."""
    contraction = np.einsum('bcxyB,bxyB,cxyA->xyA', u.hessian, u.gradient, u.gradient)
    return contraction / (1.0 + u.energy_density)[..., None]


def nonlinear_part(u: MapField, psi: Optional[TwistedSpinorField], alpha: float) -> np.ndarray:
    """Every term of the right-hand side except Δu; the explicit part of a step."""
    out = f1_term(u)
    if alpha != 1.0:
        out = out + 2.0 * (alpha - 1.0) * hessian_term(u)
    if psi is not None:
        out = out + f2_term(u, psi) / (alpha * alpha_weight(u, alpha))[..., None]
    return out


def alpha_rhs(u: MapField, psi: Optional[TwistedSpinorField], alpha: float) -> np.ndarray:
    """
    Right-hand side of the α-flow, shape (Nx, Ny, q). ψ = None is the
    uncoupled flow.

    Raises:
        TangencyViolation: If ψ is not tangential along u
    """
    return laplacian(u.domain, u.values) + nonlinear_part(u, psi, alpha)


def el_residual(u: MapField, psi: Optional[TwistedSpinorField], alpha: float) -> float:
    """L² norm of the tangential Euler-Lagrange defect of L^α."""
    rhs = np.einsum('xyAB,xyB->xyA', u.projector, alpha_rhs(u, psi, alpha))
    return float(np.sqrt(u.domain.cell_area * np.sum(rhs**2)))
