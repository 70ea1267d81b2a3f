"""
Unit sphere S^{q-1} ⊂ ℝ^q.
"""
import logging

import numpy as np

from lab.exceptions import OutsideTube, StructureUnavailable

from .base import EmbeddedTarget

logger = logging.getLogger(__name__)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum('...a,...a->...', a, b)


class UnitSphere(EmbeddedTarget):
    """
    Round unit sphere with closed-form projection and transport.

    Only S² (q = 3) is Kähler: i_p X = p × X. No sphere carries a parallel
    real structure.
    """

    kind = 'sphere'

    def __init__(self, q: int = 3):
        if q not in (2, 3, 4):
            raise ValueError(f"Unit sphere supports ambient dimension 2..4, got {q}")
        super().__init__(
            ambient_dim=q,
            intrinsic_dim=q - 1,
            tube_radius=0.4,
            weingarten_bound=1.0,
            injectivity_radius=np.pi,
        )

    @property
    def is_kaehler(self) -> bool:
        return self.ambient_dim == 3

    def base_point(self) -> np.ndarray:
        p = np.zeros(self.ambient_dim)
        p[-1] = 1.0
        return p

    # Projection

    def check_domain(self, z):
        # radial projection is defined away from the centre
        if np.any(np.linalg.norm(z, axis=-1) < 1e-12):
            raise OutsideTube("Radial projection is undefined at the focal point 0")

    def distance_to_target(self, z):
        return np.abs(np.linalg.norm(z, axis=-1) - 1.0)

    def _project(self, z):
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    def _jacobian(self, z):
        rho = np.linalg.norm(z, axis=-1)
        zhat = z / rho[..., None]
        eye = np.eye(self.ambient_dim)
        return (eye - zhat[..., :, None] * zhat[..., None, :]) / rho[..., None, None]

    def _hessian(self, z):
        rho = np.linalg.norm(z, axis=-1)[..., None, None, None]
        eye = np.eye(self.ambient_dim)
        za = z[..., :, None, None]
        zb = z[..., None, :, None]
        zc = z[..., None, None, :]
        d_ab = eye[:, :, None]
        d_ac = eye[:, None, :]
        d_bc = eye[None, :, :]
        return (
            -(d_ab * zc + d_ac * zb + za * d_bc) / rho**3
            + 3.0 * za * zb * zc / rho**5
        )

    # Geodesics

    def geodesic_distance(self, p, q):
        c = _dot(p, q)
        w = q - c[..., None] * p
        return np.arctan2(np.linalg.norm(w, axis=-1), c)

    def _log_map(self, p, q):
        c = _dot(p, q)
        w = q - c[..., None] * p
        theta = np.arctan2(np.linalg.norm(w, axis=-1), c)
        # |w| = sin θ on the unit sphere
        return w / np.sinc(theta / np.pi)[..., None]

    def _geodesic(self, p, q, t):
        v = self._log_map(p, q)
        speed = t * np.linalg.norm(v, axis=-1)
        return np.cos(speed)[..., None] * p + t * np.sinc(speed / np.pi)[..., None] * v

    def _transport_matrix(self, p, q):
        eye = np.eye(self.ambient_dim)
        denom = 1.0 + _dot(p, q)
        return eye - (p + q)[..., :, None] * q[..., None, :] / denom[..., None, None]

    # Curvature and frames

    def riemann_curvature(self, p, X, Y, Z):
        return _dot(Y, Z)[..., None] * X - _dot(X, Z)[..., None] * Y

    def tangent_frame(self, p):
        p = np.asarray(p, dtype=float)
        q = self.ambient_dim
        # Gram-Schmidt on the q - 1 coordinate axes least aligned with p;
        # the dropped axis has |p_k| >= 1/sqrt(q) so the rest stay independent
        order = np.argsort(np.abs(p), axis=-1, kind='stable')
        axes = np.eye(q)[order]
        columns = []
        for k in range(q - 1):
            if q == 3 and k == 1:
                columns.append(np.cross(p, columns[0]))
                break
            v = axes[..., k, :] - _dot(axes[..., k, :], p)[..., None] * p
            for b in columns:
                v = v - _dot(v, b)[..., None] * b
            columns.append(v / np.linalg.norm(v, axis=-1, keepdims=True))
        return np.stack(columns, axis=-1)

    def normalized_area_form(self, p, X, Y):
        if self.ambient_dim != 3:
            return super().normalized_area_form(p, X, Y)
        return _dot(p, np.cross(X, Y)) / (4.0 * np.pi)

    # Kähler data

    def complex_structure_matrix(self, p):
        if not self.is_kaehler:
            raise StructureUnavailable(f"S^{self.intrinsic_dim} is not Kähler")
        p = np.asarray(p, dtype=float)
        J = np.zeros(p.shape + (3,))
        J[..., 0, 1] = -p[..., 2]
        J[..., 0, 2] = p[..., 1]
        J[..., 1, 0] = p[..., 2]
        J[..., 1, 2] = -p[..., 0]
        J[..., 2, 0] = -p[..., 1]
        J[..., 2, 1] = p[..., 0]
        return J

    def real_structure_matrix(self, p):
        raise StructureUnavailable("The round sphere carries no parallel real structure")
