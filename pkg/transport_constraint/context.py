"""
Admissible constants and the site-wise transport context between two maps.
"""
import logging
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Any, Dict, Optional

import numpy as np

from lab.exceptions import ConfigError, TransportOutOfRange
from target_geometry.targets import EmbeddedTarget
from twisted_dirac.maps import MapField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmissibleConstants:
    """
    (δ₀, C, ε, δ, R) with 2ε < inj(N), δ₀C < 1, δ < min(δ₀/4, ε(1 − δ₀C)/4)
    and R ≤ δ.
    """

    delta0: float
    C: float
    epsilon: float
    delta: float
    R: float

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def admissible_constants(target: EmbeddedTarget, safety: float = 0.9) -> AdmissibleConstants:
    """
    Constants derived from the target's tube radius, Weingarten bound and
    injectivity radius. `safety` < 1 keeps the strict inequalities strict.
    """
    if not 0.0 < safety < 1.0:
        raise ConfigError(f"Safety factor must lie in (0, 1), got {safety}")
    delta0 = target.tube_radius
    C = target.weingarten_bound
    epsilon = target.epsilon
    delta = safety * min(delta0 / 4.0, epsilon * (1.0 - delta0 * C) / 4.0)
    return AdmissibleConstants(delta0=delta0, C=C, epsilon=epsilon, delta=delta, R=delta)


@dataclass(frozen=True, eq=False)
class TransportContext:
    """
    Parallel transport P^{u,v} of the target factor from u(x) to v(x) along
    the shortest geodesic, site by site.
    """

    source: MapField
    destination: MapField
    constants: AdmissibleConstants
    distances: np.ndarray

    @classmethod
    def build(cls, source: MapField, destination: MapField,
              constants: Optional[AdmissibleConstants] = None, strict: bool = True) -> 'TransportContext':
        """
        With `strict=False` site pairs at distance ≥ ε are only logged; the
        `valid` flags still mark them.

        Raises:
            ConfigError: If the maps live on different domains or targets
            CutLocus: If any site pair reaches the injectivity radius
            TransportOutOfRange: If strict and any site pair is at distance ≥ ε
        """
        if source.domain != destination.domain:
            raise ConfigError("Transport needs maps on the same domain")
        if source.target is not destination.target:
            raise ConfigError("Transport needs maps into the same target")
        target = source.target
        constants = constants or admissible_constants(target)
        distances = target.check_cut_locus(source.values, destination.values)
        context = cls(source, destination, constants, distances)
        if context.max_distance >= constants.epsilon:
            message = f"Transport distance {context.max_distance:.4f} exceeds ε = {constants.epsilon:.4f}"
            if strict:
                raise TransportOutOfRange(
                    message,
                    details={'max_distance': context.max_distance, 'epsilon': constants.epsilon,
                             'invalid_sites': int(np.sum(~context.valid))},
                )
            logger.warning(message)
        return context

    @property
    def target(self) -> EmbeddedTarget:
        return self.source.target

    @property
    def max_distance(self) -> float:
        return float(np.max(self.distances))

    @property
    def valid(self) -> np.ndarray:
        """Per-site flags d^N < ε."""
        return self.distances < self.constants.epsilon

    @cached_property
    def matrices(self) -> np.ndarray:
        """Transport matrices T_{u(x)}N → T_{v(x)}N, shape (Nx, Ny, q, q)."""
        return self.target.transport_matrix(self.source.values, self.destination.values)

    def c0_distance(self) -> float:
        return self.source.sup_distance(self.destination)

    def reversed(self) -> 'TransportContext':
        return TransportContext(self.destination, self.source, self.constants, self.distances)
