"""
Validated points and tangent vectors of an embedded target.
"""
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from lab.exceptions import OutsideTube, TangencyViolation

from .targets.base import EmbeddedTarget


@dataclass(frozen=True)
class TargetPoint:
    """A point of N in ambient coordinates, ‖coords − π(coords)‖ ≤ TARGET_POINT_TOL."""

    target: EmbeddedTarget
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (self.target.ambient_dim,):
            raise ValueError(
                f"Expected coordinates of shape ({self.target.ambient_dim},), got {coords.shape}"
            )
        residual = self.target.on_manifold_residual(coords)
        if residual > settings.TARGET_POINT_TOL:
            raise OutsideTube(
                f"Point is {residual:.3e} away from {self.target.kind}",
                details={'residual': residual},
            )
        object.__setattr__(self, 'coords', coords)

    @classmethod
    def project(cls, target: EmbeddedTarget, z) -> 'TargetPoint':
        return cls(target, target.project(z))

    def geodesic_to(self, other: 'TargetPoint', t: float) -> 'TargetPoint':
        return TargetPoint(self.target, self.target.geodesic(self.coords, other.coords, t))

    def log(self, other: 'TargetPoint') -> 'TangentVector':
        return TangentVector(self, self.target.log_map(self.coords, other.coords))

    def distance(self, other: 'TargetPoint') -> float:
        return float(self.target.geodesic_distance(self.coords, other.coords))


@dataclass(frozen=True)
class TangentVector:
    """A vector of T_pN in ambient coordinates."""

    base: TargetPoint
    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=float)
        target = self.base.target
        residual = target.tangency_residual(self.base.coords, vec)
        if residual > settings.TARGET_POINT_TOL * max(1.0, float(np.linalg.norm(vec))):
            raise TangencyViolation(
                f"Vector has normal component {residual:.3e} at {self.base.coords}",
                details={'residual': residual},
            )
        object.__setattr__(self, 'vec', vec)

    @property
    def target(self) -> EmbeddedTarget:
        return self.base.target

    def transport_to(self, point: TargetPoint) -> 'TangentVector':
        moved = self.target.parallel_transport_tangent(self.base.coords, point.coords, self.vec)
        return TangentVector(point, moved)

    def rotate(self) -> 'TangentVector':
        """Apply the complex structure i."""
        return TangentVector(self.base, self.target.complex_structure(self.base.coords, self.vec))

    def reflect(self) -> 'TangentVector':
        """Apply the real structure j₂."""
        return TangentVector(self.base, self.target.real_structure(self.base.coords, self.vec))

    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))
