"""
One IMEX step of the α-flow: spectral Laplacian implicit, everything else
explicit, then nearest-point reprojection and the constraint-spinor solve.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np
import scipy.fft as sfft
from scipy.special import exprel

from lab.exceptions import OutsideTube, TangencyViolation, TubeExit
from spin_domain.spectral import laplacian_symbol
from transport_constraint.constraint import constraint_spinor
from twisted_dirac.fields import TwistedSpinorField
from twisted_dirac.maps import MapField
from twisted_dirac.spectral import SpectralData, eigen_solve

from .config import FlowConfig
from .terms import nonlinear_part

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FlowState:
    """
    (u, ψ) at time t.

    `anchor` is the unit kernel spinor ψ₀ over the initial map from which
    every ψ(u_t) is rebuilt; it is None in the uncoupled mode, where ψ ≡ 0.
    `anchor_tol` bounds ‖D_{u₀}ψ₀‖ for the anchor.
    """

    t: float
    step: int
    u: MapField
    psi: TwistedSpinorField
    spectral: Optional[SpectralData] = None
    anchor: Optional[TwistedSpinorField] = None
    threshold: Optional[float] = None
    anchor_tol: Optional[float] = None
    reprojection: float = 0.0
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def coupled(self) -> bool:
        return self.anchor is not None

    @property
    def spinor(self) -> Optional[TwistedSpinorField]:
        """ψ as seen by the flow terms; None when uncoupled."""
        return self.psi if self.coupled else None


def imex_update(u: MapField, explicit: np.ndarray, dt: float, integrator: str) -> np.ndarray:
    """
    Advance the ambient values by one step of u_t = Δu + N with N frozen.

    exponential:    û⁺ = e^{Δt s}û + Δt·exprel(Δt s)·N̂
    implicit_euler: û⁺ = (û + Δt N̂)/(1 − Δt s)

    with s = −|κ|² the Laplacian symbol.
    """
    z = dt * laplacian_symbol(u.domain)[..., None]
    u_hat = sfft.fft2(u.values, axes=(0, 1))
    n_hat = sfft.fft2(explicit, axes=(0, 1))
    if integrator == 'exponential':
        updated = np.exp(z) * u_hat + dt * exprel(z) * n_hat
    else:
        updated = (u_hat + dt * n_hat) / (1.0 - z)
    return sfft.ifft2(updated, axes=(0, 1)).real


def retract(u: MapField, ambient: np.ndarray, config: FlowConfig) -> MapField:
    """
    Map the pre-projection values back onto N.

    Raises:
        TubeExit: If the values leave the tube, or reprojection is off and
            they are not on N
    """
    target = u.target
    distance = float(np.max(target.distance_to_target(ambient)))
    if not np.isfinite(distance) or distance > target.tube_radius:
        logger.error(f"Step left the tube: distance {distance:.3e} > δ = {target.tube_radius}")
        raise TubeExit(
            f"Update at distance {distance:.3e} from {target.kind} exceeds tube radius {target.tube_radius}",
            details={'distance': distance, 'tube_radius': target.tube_radius},
        )
    try:
        if config.reproject:
            return MapField.from_ambient(u.domain, target, ambient)
        return MapField(u.domain, target, ambient)
    except OutsideTube as e:
        raise TubeExit(f"Update cannot be retracted onto {target.kind}: {e.message}", details=e.details)


def solve_spectrum(u: MapField, config: FlowConfig) -> SpectralData:
    return eigen_solve(u, k=config.eigen_count, which=config.kernel_block)


def step(state: FlowState, config: FlowConfig) -> FlowState:
    """
    One accepted step of the coupled flow.

    Raises:
        TubeExit: If the update leaves the tubular neighbourhood
        DegenerateProjection: If the kernel projection of the transported ψ₀ collapses
        TransportOutOfRange: If u_t has moved ε or more away from the initial map
        AmbiguousCluster: If the kernel count at the threshold is unreliable
        TangencyViolation: If ψ is not tangential after the re-solve
    """
    u = state.u
    explicit = nonlinear_part(u, state.spinor, config.alpha)
    ambient = imex_update(u, explicit, config.dt, config.integrator)
    u_next = retract(u, ambient, config)
    correction = float(np.max(np.linalg.norm(u_next.values - ambient, axis=-1)))
    if correction > config.reprojection_tol:
        logger.warning(f"Step {state.step + 1}: reprojection correction {correction:.3e}")

    spectral = solve_spectrum(u_next, config) if config.needs_spectrum else None
    diagnostics: Dict[str, Any] = {}
    if state.coupled:
        psi, diagnostics = constraint_spinor(
            u_next, state.anchor, state.threshold,
            block=config.kernel_block, method=config.projection_method, spectral=spectral,
            kernel_tol=state.anchor_tol,
        )
        residual = psi.tangency_residual()
        if residual > config.tangency_tol:
            raise TangencyViolation(
                f"Constraint spinor has normal component {residual:.3e}",
                details={'residual': residual, 'step': state.step + 1},
            )
    else:
        psi = TwistedSpinorField.zeros(u_next)

    return replace(
        state,
        t=state.t + config.dt,
        step=state.step + 1,
        u=u_next,
        psi=psi,
        spectral=spectral,
        reprojection=correction,
        diagnostics=diagnostics,
    )
