"""
Lattice maps u: M → N ⊂ ℝ^q and their builders.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional, Sequence

import numpy as np
from django.conf import settings

from lab.exceptions import ConfigError, OutsideTube
from spin_domain.domain import TorusDomain
from spin_domain.spectral import spectral_gradient, spectral_hessian
from target_geometry.points import TargetPoint
from target_geometry.targets import CliffordTorus, EmbeddedTarget

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MapField:
    """
    Map sampled at the grid sites, values of shape (Nx, Ny, q).

    Derived quantities (gradient, projector, frames) are computed once.
    """

    domain: TorusDomain
    target: EmbeddedTarget
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = self.domain.shape + (self.target.ambient_dim,)
        if values.shape != expected:
            raise ValueError(f"Map needs shape {expected}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise OutsideTube("Map has non-finite values")
        residual = self.target.on_manifold_residual(values)
        if residual > settings.TARGET_POINT_TOL:
            raise OutsideTube(
                f"Map is {residual:.3e} away from {self.target.kind}",
                details={'residual': residual},
            )
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_ambient(cls, domain: TorusDomain, target: EmbeddedTarget, z: np.ndarray) -> 'MapField':
        """Project ambient values onto N site by site."""
        return cls(domain, target, target.project(z))

    @cached_property
    def gradient(self) -> np.ndarray:
        """∂_α u^A, shape (2, Nx, Ny, q)."""
        return spectral_gradient(self.domain, self.values)

    @cached_property
    def hessian(self) -> np.ndarray:
        """∂_β∂_γ u^A, shape (2, 2, Nx, Ny, q)."""
        return spectral_hessian(self.domain, self.values)

    @cached_property
    def energy_density(self) -> np.ndarray:
        """|du|² at every site."""
        return np.sum(self.gradient**2, axis=(0, -1))

    @cached_property
    def projector(self) -> np.ndarray:
        """π^A_B(u), shape (Nx, Ny, q, q)."""
        return self.target.tangential_projector(self.values)

    @cached_property
    def second_derivative(self) -> np.ndarray:
        """π^A_{BC}(u), shape (Nx, Ny, q, q, q)."""
        return self.target.proj_hessian(self.values)

    @cached_property
    def tangent_frame(self) -> np.ndarray:
        return self.target.tangent_frame(self.values)

    @cached_property
    def parallel_frame(self) -> Optional[np.ndarray]:
        return self.target.parallel_frame(self.values)

    def point(self, i: int, j: int) -> TargetPoint:
        return TargetPoint(self.target, self.values[i, j])

    def sup_distance(self, other: 'MapField') -> float:
        """‖u − v‖_{C⁰} in ambient coordinates."""
        return float(np.max(np.linalg.norm(self.values - other.values, axis=-1)))

    def sup_gradient(self) -> float:
        return float(np.sqrt(np.max(self.energy_density)))


def constant_map(domain: TorusDomain, target: EmbeddedTarget,
                 point: Optional[Sequence[float]] = None) -> MapField:
    p = target.base_point() if point is None else target.project(np.asarray(point, dtype=float))
    return MapField(domain, target, np.broadcast_to(p, domain.shape + p.shape).copy())


def linear_wrap(domain: TorusDomain, target: EmbeddedTarget, wraps: Sequence[Sequence[int]]) -> MapField:
    """
    Totally geodesic map onto the Clifford torus with integer wrap numbers.

    Args:
        wraps: [[a₁, b₁], [a₂, b₂]] so that θ_k = 2π(a_k x/L₁ + b_k y/L₂)
    """
    if not isinstance(target, CliffordTorus):
        raise ConfigError("Linear wraps are defined for the Clifford torus target only")
    wraps = np.asarray(wraps, dtype=float)
    if wraps.shape != (2, 2) or not np.all(wraps == np.round(wraps)):
        raise ConfigError(f"Wrap numbers must be a 2×2 integer matrix, got {wraps.tolist()}")
    X, Y = domain.coordinates
    theta = 2.0 * np.pi * (
        wraps[:, 0] * X[..., None] / domain.L1 + wraps[:, 1] * Y[..., None] / domain.L2
    )
    return MapField(domain, target, target.point_at(theta))


def linear_wrap_energy(domain: TorusDomain, target: CliffordTorus, wraps: Sequence[Sequence[int]]) -> float:
    """Dirichlet energy ½∫|du|² of a linear wrap."""
    wraps = np.asarray(wraps, dtype=float)
    density = sum(
        (2.0 * np.pi * r) ** 2 * ((a / domain.L1) ** 2 + (b / domain.L2) ** 2)
        for r, (a, b) in zip(target.radii, wraps)
    )
    return 0.5 * domain.volume * density


def linear_wrap_degree(wraps: Sequence[Sequence[int]]) -> int:
    (a1, b1), (a2, b2) = wraps
    return int(a1 * b2 - b1 * a2)


def smooth_field(domain: TorusDomain, rng: np.random.Generator, components: int,
                 max_mode: int = 2) -> np.ndarray:
    """Random trigonometric polynomial of degree max_mode, shape (Nx, Ny, components), sup norm 1."""
    X, Y = domain.coordinates
    field = np.zeros(domain.shape + (components,))
    for k1 in range(-max_mode, max_mode + 1):
        for k2 in range(0, max_mode + 1):
            if k2 == 0 and k1 < 0:
                continue
            angle = 2.0 * np.pi * (k1 * X / domain.L1 + k2 * Y / domain.L2)
            a, b = rng.standard_normal((2, components))
            field += np.cos(angle)[..., None] * a + np.sin(angle)[..., None] * b
    return field / np.max(np.linalg.norm(field, axis=-1))


def perturb_map(u: MapField, amplitude: float, rng: np.random.Generator, max_mode: int = 2) -> MapField:
    """
    Project u plus a random smooth ambient displacement of sup norm `amplitude`.

    Raises:
        OutsideTube: If the displaced map leaves the projection's domain
    """
    displacement = amplitude * smooth_field(u.domain, rng, u.target.ambient_dim, max_mode)
    return MapField.from_ambient(u.domain, u.target, u.values + displacement)


def displace_map(u: MapField, direction: np.ndarray, h: float) -> MapField:
    """π(u + h·V) for an ambient direction field V."""
    return MapField.from_ambient(u.domain, u.target, u.values + h * direction)


def random_tangent_direction(u: MapField, rng: np.random.Generator, max_mode: int = 2) -> np.ndarray:
    """Smooth tangent vector field along u, sup norm at most 1."""
    field = smooth_field(u.domain, rng, u.target.ambient_dim, max_mode)
    return np.einsum('xyab,xyb->xya', u.projector, field)


def build_map(domain: TorusDomain, target: EmbeddedTarget, spec: Dict[str, Any],
              rng: Optional[np.random.Generator] = None) -> MapField:
    """
    Build a map from its configuration mapping.

        {"kind": "constant", "point": [0, 0, 1]}
        {"kind": "linear_wrap", "wraps": [[1, 0], [0, 1]],
         "perturbation": {"amplitude": 0.05, "max_mode": 2}}

    Raises:
        ConfigError: If the map kind is unknown
    """
    kind = spec.get('kind', 'constant')
    if kind == 'constant':
        u = constant_map(domain, target, spec.get('point'))
    elif kind == 'linear_wrap':
        u = linear_wrap(domain, target, spec.get('wraps', [[1, 0], [0, 1]]))
    else:
        raise ConfigError(f"Unknown map kind: {kind!r}", details={'allowed': ['constant', 'linear_wrap']})

    perturbation = spec.get('perturbation')
    if perturbation and perturbation.get('amplitude', 0.0) > 0.0:
        rng = rng if rng is not None else np.random.default_rng(settings.VERIFY_SEED)
        u = perturb_map(u, perturbation['amplitude'], rng, perturbation.get('max_mode', 2))
        logger.debug(f"Perturbed {kind} map by amplitude {perturbation['amplitude']}")
    return u
