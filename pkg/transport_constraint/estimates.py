"""
Sampled checks of the transport and operator-comparison estimates: defects
that should scale at most linearly in ‖u − v‖_{C⁰}.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from twisted_dirac.fields import TwistedSpinorField, random_tangent_spinor
from twisted_dirac.maps import MapField
from twisted_dirac.operator import apply_dirac, split_10_01

from .context import TransportContext
from .transport import transport_spinor, transport_vectors

logger = logging.getLogger(__name__)


def triple_transport_defect(u0: MapField, u: MapField, v: MapField, Z: Optional[np.ndarray] = None) -> float:
    """
    sup_x ‖P^{v,u0} P^{u,v} P^{u0,u} Z − Z‖.

    Without Z the defect is the operator norm of the holonomy minus the
    identity on T_{u0(x)}N, maximised over sites.

    Raises:
        CutLocus: If one of the three transports is undefined
    """
    first = TransportContext.build(u0, u)
    second = TransportContext.build(u, v)
    third = TransportContext.build(v, u0)
    vectors = u0.tangent_frame if Z is None else np.asarray(Z, dtype=float)
    loop = transport_vectors(third, transport_vectors(second, transport_vectors(first, vectors)))
    difference = loop - vectors
    if Z is None:
        return float(np.max(np.linalg.norm(difference, ord=2, axis=(-2, -1))))
    return float(np.max(np.linalg.norm(difference, axis=-1)))


def _probe(v: MapField, block: str, rng: np.random.Generator, max_mode: int) -> TwistedSpinorField:
    psi = random_tangent_spinor(v, rng, max_mode)
    if block == '(1,0)':
        psi, _ = split_10_01(v, psi)
    elif block == '(0,1)':
        _, psi = split_10_01(v, psi)
    return psi.normalized()


def operator_comparison_defect(u: MapField, v: MapField, probes: int = 6, block: str = '(1,0)',
                               seed: int = 0, max_mode: int = 2) -> float:
    """
    max over smooth unit probes ψ over v of ‖((P^{v,u})⁻¹ D^u P^{v,u} − D^v)ψ‖.

    Probes are drawn from a fixed seed so that families of maps see the same
    ambient test fields.

    Raises:
        CutLocus: If the transport is undefined at some site
    """
    forward = TransportContext.build(v, u)
    backward = forward.reversed()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        psi = _probe(v, block, rng, max_mode)
        conjugated = transport_spinor(backward, apply_dirac(u, transport_spinor(forward, psi), block))
        direct = apply_dirac(v, psi, block)
        worst = max(worst, psi.with_values(conjugated.values - direct.values).norm())
    logger.debug(f"Operator comparison defect {worst:.3e} at C0 distance {u.sup_distance(v):.3e}")
    return worst


@dataclass(frozen=True)
class ScalingRow:
    amplitude: float
    distance: float
    defect: float

    @property
    def ratio(self) -> float:
        return self.defect / self.distance if self.distance > 0 else 0.0


def scaling_study(family: Callable[[float], MapField], defect: Callable[[MapField], float],
                  base: MapField, amplitudes: Sequence[float] = (0.1, 0.05, 0.025)) -> List[ScalingRow]:
    """
    Evaluate defect(v_h)/‖v_h − base‖_{C⁰} over a one-parameter family.
    """
    rows = []
    for h in amplitudes:
        v = family(h)
        rows.append(ScalingRow(amplitude=h, distance=base.sup_distance(v), defect=defect(v)))
        logger.debug(f"h={h}: distance {rows[-1].distance:.3e}, ratio {rows[-1].ratio:.4f}")
    return rows


def ratio_drift(rows: Sequence[ScalingRow]) -> float:
    """Largest relative change of the ratio between consecutive amplitudes."""
    ratios = [row.ratio for row in rows]
    drifts = [abs(b - a) / max(abs(a), 1e-300) for a, b in zip(ratios, ratios[1:])]
    return max(drifts) if drifts else 0.0
