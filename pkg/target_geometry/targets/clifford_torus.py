"""
Clifford torus T² = S¹(r₁) × S¹(r₂) ⊂ ℝ⁴.

The torus is flat and carries the global parallel frame (t₁, t₂) of unit
angular tangents, so transport, complex structure and real structure are
all constant in that frame.
"""
import logging

import numpy as np

from .base import EmbeddedTarget

logger = logging.getLogger(__name__)


def _wrap(angle: np.ndarray) -> np.ndarray:
    """Wrap angles into (-π, π]."""
    return np.pi - np.mod(np.pi - angle, 2.0 * np.pi)


class CliffordTorus(EmbeddedTarget):
    """
    Flat product torus with radii (r₁, r₂) in the planes (z₁, z₂) and (z₃, z₄).

    Kähler with i t₁ = t₂, and real structure j₂ t₁ = t₁, j₂ t₂ = −t₂.
    """

    kind = 'clifford_torus'

    def __init__(self, r1: float = 1.0, r2: float = 1.0):
        if r1 <= 0 or r2 <= 0:
            raise ValueError(f"Clifford torus radii must be positive, got ({r1}, {r2})")
        self.radii = np.array([r1, r2], dtype=float)
        rmin = float(self.radii.min())
        super().__init__(
            ambient_dim=4,
            intrinsic_dim=2,
            tube_radius=0.3 * rmin,
            weingarten_bound=1.0 / rmin,
            injectivity_radius=np.pi * rmin,
        )

    @property
    def is_kaehler(self) -> bool:
        return True

    @property
    def has_real_structure(self) -> bool:
        return True

    def describe(self):
        summary = super().describe()
        summary['radii'] = self.radii.tolist()
        return summary

    def base_point(self) -> np.ndarray:
        r1, r2 = self.radii
        return np.array([r1, 0.0, r2, 0.0])

    # Helpers

    def _planes(self, z: np.ndarray) -> np.ndarray:
        """Reshape (..., 4) into (..., 2 planes, 2)."""
        z = np.asarray(z, dtype=float)
        return z.reshape(z.shape[:-1] + (2, 2))

    def angles(self, z: np.ndarray) -> np.ndarray:
        planes = self._planes(z)
        return np.arctan2(planes[..., 1], planes[..., 0])

    def _unit_tangents(self, theta: np.ndarray) -> np.ndarray:
        """Frame (t₁, t₂) as an array of shape (..., 4, 2)."""
        frame = np.zeros(theta.shape[:-1] + (4, 2))
        frame[..., 0, 0] = -np.sin(theta[..., 0])
        frame[..., 1, 0] = np.cos(theta[..., 0])
        frame[..., 2, 1] = -np.sin(theta[..., 1])
        frame[..., 3, 1] = np.cos(theta[..., 1])
        return frame

    def point_at(self, theta: np.ndarray) -> np.ndarray:
        """Embed angle pairs (..., 2) as points of the torus."""
        theta = np.asarray(theta, dtype=float)
        planes = self.radii[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return planes.reshape(theta.shape[:-1] + (4,))

    # Projection

    def distance_to_target(self, z):
        rho = np.linalg.norm(self._planes(z), axis=-1)
        return np.linalg.norm(rho - self.radii, axis=-1)

    def _project(self, z):
        planes = self._planes(z)
        rho = np.linalg.norm(planes, axis=-1, keepdims=True)
        return (self.radii[:, None] * planes / rho).reshape(z.shape)

    def _jacobian(self, z):
        planes = self._planes(z)
        rho = np.linalg.norm(planes, axis=-1)
        zhat = planes / rho[..., None]
        eye = np.eye(2)
        blocks = (self.radii / rho)[..., None, None] * (
            eye - zhat[..., :, None] * zhat[..., None, :]
        )
        J = np.zeros(z.shape[:-1] + (4, 4))
        J[..., 0:2, 0:2] = blocks[..., 0, :, :]
        J[..., 2:4, 2:4] = blocks[..., 1, :, :]
        return J

    def _hessian(self, z):
        planes = self._planes(z)
        eye = np.eye(2)
        H = np.zeros(z.shape[:-1] + (4, 4, 4))
        for k in range(2):
            w = planes[..., k, :]
            rho = np.linalg.norm(w, axis=-1)[..., None, None, None]
            wa = w[..., :, None, None]
            wb = w[..., None, :, None]
            wc = w[..., None, None, :]
            block = self.radii[k] * (
                -(eye[:, :, None] * wc + eye[:, None, :] * wb + wa * eye[None, :, :]) / rho**3
                + 3.0 * wa * wb * wc / rho**5
            )
            s = slice(2 * k, 2 * k + 2)
            H[..., s, s, s] = block
        return H

    # Geodesics

    def _angle_steps(self, p, q):
        return _wrap(self.angles(q) - self.angles(p))

    def geodesic_distance(self, p, q):
        return np.linalg.norm(self.radii * self._angle_steps(p, q), axis=-1)

    def _log_map(self, p, q):
        step = self.radii * self._angle_steps(p, q)
        return np.einsum('...ak,...k->...a', self._unit_tangents(self.angles(p)), step)

    def _geodesic(self, p, q, t):
        return self.point_at(self.angles(p) + t * self._angle_steps(p, q))

    def _transport_matrix(self, p, q):
        step = self._angle_steps(p, q)
        c, s = np.cos(step), np.sin(step)
        T = np.zeros(step.shape[:-1] + (4, 4))
        for k in range(2):
            i = 2 * k
            T[..., i, i] = c[..., k]
            T[..., i, i + 1] = -s[..., k]
            T[..., i + 1, i] = s[..., k]
            T[..., i + 1, i + 1] = c[..., k]
        return T

    # Curvature and frames

    def riemann_curvature(self, p, X, Y, Z):
        return np.zeros(np.broadcast_shapes(np.shape(X), np.shape(Y), np.shape(Z)))

    def tangent_frame(self, p):
        return self._unit_tangents(self.angles(p))

    def parallel_frame(self, p):
        return self.tangent_frame(p)

    def normalized_area_form(self, p, X, Y):
        frame = self.tangent_frame(p)
        x = np.einsum('...ak,...a->...k', frame, X)
        y = np.einsum('...ak,...a->...k', frame, Y)
        area = 4.0 * np.pi**2 * self.radii[0] * self.radii[1]
        return (x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]) / area

    # Kähler data

    def complex_structure_matrix(self, p):
        frame = self.tangent_frame(p)
        t1, t2 = frame[..., 0], frame[..., 1]
        return t2[..., :, None] * t1[..., None, :] - t1[..., :, None] * t2[..., None, :]

    def real_structure_matrix(self, p):
        frame = self.tangent_frame(p)
        t1, t2 = frame[..., 0], frame[..., 1]
        return t1[..., :, None] * t1[..., None, :] - t2[..., :, None] * t2[..., None, :]
