"""
Base Embedded Target Abstract Class

This module defines the abstract base class that every target manifold
N ⊂ ℝ^q must inherit from. All geometry is returned in ambient
coordinates and every method is vectorised over leading axes, so a whole
lattice map (Nx × Ny × q) can be passed at once.
"""
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np
from django.conf import settings

from lab.exceptions import CutLocus, OutsideTube, StructureUnavailable

logger = logging.getLogger(__name__)


class EmbeddedTarget(ABC):
    """
    Abstract base class for closed embedded target manifolds.

    Concrete targets supply closed forms for the nearest-point projection π,
    its first and second derivatives, geodesics, parallel transport and
    curvature. Optional Kähler data (complex structure i, real structure j₂)
    is declared through `is_kaehler` / `has_real_structure`.
    """

    kind: str = ''

    def __init__(self, ambient_dim: int, intrinsic_dim: int, tube_radius: float,
                 weingarten_bound: float, injectivity_radius: float):
        """
        Initialize the shared target constants.

        Args:
            ambient_dim: q, dimension of the ambient Euclidean space
            intrinsic_dim: n, dimension of N
            tube_radius: δ, radius of the tubular neighbourhood on which π is used
            weingarten_bound: C, bound on the Weingarten map of N
            injectivity_radius: injectivity radius of N
        """
        if tube_radius * weingarten_bound >= 1.0:
            raise ValueError(
                f"Tube radius {tube_radius} violates δ < 1/C with C = {weingarten_bound}"
            )
        self.ambient_dim = ambient_dim
        self.intrinsic_dim = intrinsic_dim
        self.tube_radius = tube_radius
        self.weingarten_bound = weingarten_bound
        self.injectivity_radius = injectivity_radius
        # 2ε < inj(N)
        self.epsilon = 0.4 * injectivity_radius

    # ------------------------------------------------------------------
    # Declared structures
    # ------------------------------------------------------------------

    @property
    def is_kaehler(self) -> bool:
        return False

    @property
    def has_real_structure(self) -> bool:
        return False

    @property
    def is_surface(self) -> bool:
        return self.intrinsic_dim == 2

    def describe(self) -> Dict[str, Any]:
        """Summary of the target constants, used in run summaries."""
        return {
            'kind': self.kind,
            'ambient_dim': self.ambient_dim,
            'intrinsic_dim': self.intrinsic_dim,
            'tube_radius': self.tube_radius,
            'weingarten_bound': self.weingarten_bound,
            'injectivity_radius': self.injectivity_radius,
            'epsilon': self.epsilon,
            'kaehler': self.is_kaehler,
            'real_structure': self.has_real_structure,
        }

    # ------------------------------------------------------------------
    # Projection
    # ------------------------------------------------------------------

    @abstractmethod
    def distance_to_target(self, z: np.ndarray) -> np.ndarray:
        """
        Euclidean distance from ambient points to N.

        Args:
            z: array of shape (..., q)

        Returns:
            Array of shape (...)
        """
        pass

    @abstractmethod
    def _project(self, z: np.ndarray) -> np.ndarray:
        """Closed-form nearest-point projection without tube checks."""
        pass

    @abstractmethod
    def _jacobian(self, z: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _hessian(self, z: np.ndarray) -> np.ndarray:
        pass

    def check_tube(self, z: np.ndarray) -> None:
        """
        Ensure every point lies in the closed tube of radius δ.

        Raises:
            OutsideTube: If any point is farther than δ from N
        """
        dist = self.distance_to_target(z)
        worst = float(np.max(dist)) if np.size(dist) else 0.0
        if not np.all(np.isfinite(dist)) or worst > self.tube_radius:
            raise OutsideTube(
                f"Point at distance {worst:.3e} from {self.kind} exceeds tube radius {self.tube_radius}",
                details={'distance': worst, 'tube_radius': self.tube_radius},
            )

    def check_domain(self, z: np.ndarray) -> None:
        """Precondition of the closed-form projection; the tube by default."""
        self.check_tube(z)

    def project(self, z: np.ndarray) -> np.ndarray:
        """
        Nearest-point projection π onto N.

        Args:
            z: ambient points, shape (..., q)

        Returns:
            Projected points, same shape

        Raises:
            OutsideTube: If a point lies outside the tube of radius δ
        """
        z = np.asarray(z, dtype=float)
        self.check_domain(z)
        return self._project(z)

    def proj_jacobian(self, z: np.ndarray) -> np.ndarray:
        """
        First derivative π^A_B of the projection.

        Args:
            z: ambient points, shape (..., q)

        Returns:
            Array of shape (..., q, q); on N it is the orthogonal projector onto T_zN

        Raises:
            OutsideTube: If a point lies outside the tube
        """
        z = np.asarray(z, dtype=float)
        self.check_domain(z)
        return self._jacobian(z)

    def proj_hessian(self, z: np.ndarray) -> np.ndarray:
        """
        Second derivative π^A_{BC} of the projection, indexed [..., A, B, C].

        At p ∈ N and tangent X, Y the contraction π^A_{BC}X^BY^C is the second
        fundamental form II(X, Y).

        Raises:
            OutsideTube: If a point lies outside the tube
        """
        z = np.asarray(z, dtype=float)
        self.check_domain(z)
        return self._hessian(z)

    def second_fundamental_form(self, p: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.einsum('...abc,...b,...c->...a', self.proj_hessian(p), X, Y)

    def tangential_projector(self, p: np.ndarray) -> np.ndarray:
        return self._jacobian(np.asarray(p, dtype=float))

    def on_manifold_residual(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return float(np.max(np.linalg.norm(z - self._project(z), axis=-1)))

    def tangency_residual(self, p: np.ndarray, X: np.ndarray) -> float:
        P = self.tangential_projector(p)
        return float(np.max(np.abs(X - np.einsum('...ab,...b->...a', P, X))))

    @abstractmethod
    def base_point(self) -> np.ndarray:
        """A fixed point of N used for constant maps."""
        pass

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Random points of N, the projections of standard normal ambient samples."""
        return self._project(rng.standard_normal((count, self.ambient_dim)))

    def jitter(self, rng: np.random.Generator, p: np.ndarray, fraction: float = 0.25) -> np.ndarray:
        """Ambient points displaced from p in random directions by less than fraction·δ."""
        p = np.asarray(p, dtype=float)
        offset = rng.standard_normal(p.shape)
        offset /= np.linalg.norm(offset, axis=-1, keepdims=True)
        radius = fraction * self.tube_radius * rng.uniform(0.0, 1.0, size=p.shape[:-1] + (1,))
        return p + radius * offset

    # ------------------------------------------------------------------
    # Geodesics and transport
    # ------------------------------------------------------------------

    @abstractmethod
    def geodesic_distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Intrinsic distance d^N(p, q); defined for every pair."""
        pass

    @abstractmethod
    def _geodesic(self, p: np.ndarray, q: np.ndarray, t: float) -> np.ndarray:
        pass

    @abstractmethod
    def _log_map(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _transport_matrix(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        pass

    def check_cut_locus(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """
        Ensure every pair is strictly inside the injectivity radius.

        Returns:
            The pairwise distances

        Raises:
            CutLocus: If some pair reaches the cut-locus margin
        """
        dist = self.geodesic_distance(p, q)
        limit = self.injectivity_radius - settings.TARGET_CUT_LOCUS_MARGIN
        if np.any(dist >= limit):
            worst = float(np.max(dist))
            raise CutLocus(
                f"Geodesic distance {worst:.6f} reaches injectivity radius {self.injectivity_radius:.6f}",
                details={'distance': worst, 'injectivity_radius': self.injectivity_radius},
            )
        return dist

    def geodesic(self, p: np.ndarray, q: np.ndarray, t: float) -> np.ndarray:
        """
        Point at parameter t on the shortest geodesic from p to q.

        Args:
            p: start points, shape (..., q)
            q: end points, same shape
            t: parameter in [0, 1]

        Returns:
            Points of N, same shape; t = 0 gives p and t = 1 gives q

        Raises:
            CutLocus: If a pair has no unique shortest geodesic
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        self.check_cut_locus(p, q)
        return self._geodesic(p, q, t)

    def log_map(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """
        Inverse exponential map exp_p^{-1}(q) as an ambient tangent vector at p.

        Raises:
            CutLocus: If a pair has no unique shortest geodesic
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        self.check_cut_locus(p, q)
        return self._log_map(p, q)

    def transport_matrix(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """
        Matrix of parallel transport T_pN → T_qN along the shortest geodesic.

        Returns:
            Array of shape (..., q, q) acting on ambient tangent vectors at p

        Raises:
            CutLocus: If a pair has no unique shortest geodesic
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        self.check_cut_locus(p, q)
        return self._transport_matrix(p, q)

    def parallel_transport_tangent(self, p: np.ndarray, q: np.ndarray, X: np.ndarray) -> np.ndarray:
        return np.einsum('...ab,...b->...a', self.transport_matrix(p, q), X)

    def distance_bound(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Upper bound ‖p − q‖/(1 − δC) for d^N(p, q) when ‖p − q‖ < δ."""
        chord = np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)
        return chord / (1.0 - self.tube_radius * self.weingarten_bound)

    # ------------------------------------------------------------------
    # Curvature and frames
    # ------------------------------------------------------------------

    @abstractmethod
    def riemann_curvature(self, p: np.ndarray, X: np.ndarray, Y: np.ndarray,
                          Z: np.ndarray) -> np.ndarray:
        """
        Curvature endomorphism R(X, Y)Z for tangent X, Y, Z at p.

        Convention: on the unit sphere R(X, Y)Z = ⟨Y, Z⟩X − ⟨X, Z⟩Y.
        """
        pass

    @abstractmethod
    def tangent_frame(self, p: np.ndarray) -> np.ndarray:
        """
        Orthonormal frame of T_pN, shape (..., q, n).

        On Kähler surfaces the second column is i applied to the first.
        """
        pass

    def parallel_frame(self, p: np.ndarray) -> Optional[np.ndarray]:
        """Global parallel frame along p, or None when N is curved."""
        return None

    def normalized_area_form(self, p: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Area form of N divided by the total area, evaluated on (X, Y)."""
        raise StructureUnavailable(f"{self.kind} is not a surface; degree is undefined")

    # ------------------------------------------------------------------
    # Kähler data
    # ------------------------------------------------------------------

    def complex_structure_matrix(self, p: np.ndarray) -> np.ndarray:
        raise StructureUnavailable(f"{self.kind} carries no complex structure")

    def real_structure_matrix(self, p: np.ndarray) -> np.ndarray:
        raise StructureUnavailable(f"{self.kind} carries no parallel real structure")

    def complex_structure(self, p: np.ndarray, X: np.ndarray) -> np.ndarray:
        """
        Apply the complex structure i_p to a tangent vector.

        Raises:
            StructureUnavailable: If the target is not Kähler
        """
        return np.einsum('...ab,...b->...a', self.complex_structure_matrix(p), X)

    def real_structure(self, p: np.ndarray, X: np.ndarray) -> np.ndarray:
        """
        Apply the parallel real structure j₂ to a tangent vector.

        Raises:
            StructureUnavailable: If the target carries no real structure
        """
        return np.einsum('...ab,...b->...a', self.real_structure_matrix(p), X)

    def __repr__(self):
        return f"<{self.__class__.__name__} q={self.ambient_dim} n={self.intrinsic_dim}>"
