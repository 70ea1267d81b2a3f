"""
Dirac operator along a map, D^{π∘u}ψ = ∂̸ψ − π_{BC}(u)∇u^B·ψ^C.

The operator is kept in compressed coordinates c = Fᴴψ with respect to a
site-wise orthonormal frame F of the twisting bundle (real tangent frame for
the full operator, (b₁ − i b₂)/√2 for the (1,0) block):

* targets with a global parallel frame (Clifford torus) have vanishing
  connection form in that frame, so the matrix is ∂̸ ⊗ I_r;
* curved targets use the extrinsic form Fᴴ (∂̸ ⊗ I_q) F, which is P∂̸P in
  ambient components.

Vectors are flattened in C order over (x, y, spinor, frame index).
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from django.conf import settings

from lab.exceptions import ConfigError, StructureUnavailable, TangencyViolation
from spin_domain.operators import assemble_plain, dirac_plain

from .fields import TwistedSpinorField
from .maps import MapField

logger = logging.getLogger(__name__)

BLOCKS = ('full', '(1,0)', '(0,1)')


def _base_frame(u: MapField) -> np.ndarray:
    frame = u.parallel_frame
    return u.tangent_frame if frame is None else frame


def twisted_frame(u: MapField, block: str = 'full') -> np.ndarray:
    """
    Orthonormal frame of the twisting bundle, shape (Nx, Ny, q, r).

    Raises:
        ConfigError: If the block name is unknown
        StructureUnavailable: If a (1,0)/(0,1) block is requested on a non-Kähler target
    """
    if block not in BLOCKS:
        raise ConfigError(f"Unknown operator block: {block!r}", details={'allowed': list(BLOCKS)})
    base = _base_frame(u)
    if block == 'full':
        return base.astype(complex)
    if not u.target.is_kaehler or u.target.intrinsic_dim != 2:
        raise StructureUnavailable(f"{u.target.kind} has no complex structure for the {block} block")
    # T_{1,0} is the +i eigenspace of the complex structure
    f = (base[..., 0] - 1j * base[..., 1]) / np.sqrt(2.0)
    if block == '(0,1)':
        f = np.conj(f)
    return f[..., None]


def _frame_residual(frame: np.ndarray, values: np.ndarray) -> float:
    kept = np.einsum('xyAi,xyBi,xysB->xysA', frame, frame.conj(), values)
    scale = max(1.0, float(np.max(np.abs(values))) if values.size else 0.0)
    return float(np.max(np.abs(values - kept))) / scale


def _compress(frame: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.einsum('xyAi,xysA->xysi', frame.conj(), values)


def _expand(frame: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
    return np.einsum('xyAi,xysi->xysA', frame, coefficients)


@dataclass(eq=False)
class DiracMatrix:
    """Compressed Hermitian matrix of the Dirac operator along u."""

    u: MapField
    block: str
    frame: np.ndarray
    compressed: np.ndarray
    flat: bool

    @property
    def rank(self) -> int:
        return self.frame.shape[-1]

    @property
    def dimension(self) -> int:
        return self.compressed.shape[0]

    @property
    def domain(self):
        return self.u.domain

    def compress(self, values: np.ndarray) -> np.ndarray:
        return _compress(self.frame, values).reshape(-1)

    def expand(self, vector: np.ndarray) -> np.ndarray:
        coefficients = np.asarray(vector).reshape(self.domain.shape + (2, self.rank))
        return _expand(self.frame, coefficients)

    def apply(self, psi: TwistedSpinorField) -> TwistedSpinorField:
        return psi.with_values(self.expand(self.compressed @ self.compress(psi.values)))

    def frame_residual(self, values: np.ndarray) -> float:
        return _frame_residual(self.frame, values)

    @cached_property
    def ambient(self) -> np.ndarray:
        """E H Eᴴ on ℂ² ⊗ ℂ^q per site, dimension 2·q·Nx·Ny."""
        S, q, r = self.domain.sites, self.u.target.ambient_dim, self.rank
        F = self.frame.reshape(S, q, r)
        H = self.compressed.reshape(S, 2, r, S, 2, r)
        A = np.einsum('pAi,psiqtj,qBj->psAqtB', F, H, F.conj(), optimize=True)
        return A.reshape(2 * q * S, 2 * q * S)

    @cached_property
    def site_projector(self) -> np.ndarray:
        """F Fᴴ per site, shape (Nx·Ny, q, q)."""
        F = self.frame.reshape(self.domain.sites, self.u.target.ambient_dim, self.rank)
        return np.einsum('pAi,pBi->pAB', F, F.conj())

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.ambient - self.ambient.conj().T)))

    def projector_commutation_defect(self) -> float:
        S, q = self.domain.sites, self.u.target.ambient_dim
        A = self.ambient.reshape(S, 2, q, S, 2, q)
        P = self.site_projector
        right = np.einsum('psAqtC,qCB->psAqtB', A, P)
        left = np.einsum('pAC,psCqtB->psAqtB', P, A)
        return float(np.max(np.abs(right - left)))


def assemble_twisted(u: MapField, block: str = 'full') -> DiracMatrix:
    """
    Assemble the Dirac operator along u.

    Args:
        u: the map
        block: 'full', '(1,0)' or '(0,1)'

    Returns:
        DiracMatrix whose compressed matrix has dimension 2·Nx·Ny·r

    Raises:
        StructureUnavailable: If a (1,0)/(0,1) block is requested on a non-Kähler target
    """
    frame = twisted_frame(u, block)
    domain = u.domain
    S, q, r = domain.sites, u.target.ambient_dim, frame.shape[-1]
    size = 2 * S * r
    plain = assemble_plain(domain)
    flat = u.parallel_frame is not None

    if flat:
        H = np.kron(plain, np.eye(r))
    else:
        F = frame.reshape(S, q, r)
        overlap = np.einsum('pAi,qAj->piqj', F.conj(), F, optimize=True)
        H = np.einsum('asbt,aibj->asibtj', plain.reshape(S, 2, S, 2), overlap, optimize=True)
        H = H.reshape(size, size)
    H = 0.5 * (H + H.conj().T)

    logger.debug(f"Assembled {block} twisted Dirac matrix of dimension {size} ({'flat' if flat else 'extrinsic'})")
    return DiracMatrix(u=u, block=block, frame=frame, compressed=H, flat=flat)


def apply_dirac(u: MapField, psi: TwistedSpinorField, block: str = 'full') -> TwistedSpinorField:
    """
    Matrix-free application of the Dirac operator along u.

    Raises:
        TangencyViolation: If ψ has a normal component above DIRAC_TANGENCY_TOL
    """
    frame = twisted_frame(u, block)
    residual = _frame_residual(frame, psi.values)
    if residual > settings.DIRAC_TANGENCY_TOL:
        raise TangencyViolation(
            f"Twisted spinor is not a section of the {block} bundle (residual {residual:.3e})",
            details={'residual': residual, 'block': block},
        )
    coefficients = _compress(frame, psi.values)
    if u.parallel_frame is not None:
        image = dirac_plain(u.domain, coefficients)
    else:
        image = _compress(frame, dirac_plain(u.domain, _expand(frame, coefficients)))
    return TwistedSpinorField(u, _expand(frame, image))


def split_10_01(u: MapField, psi: TwistedSpinorField) -> Tuple[TwistedSpinorField, TwistedSpinorField]:
    """
    Split ψ into its (1,0) and (0,1) parts, ½(P − iJ)ψ and ½(P + iJ)ψ.

    Raises:
        StructureUnavailable: If the target is not Kähler
    """
    J = u.target.complex_structure_matrix(u.values)
    P10 = 0.5 * (u.projector - 1j * J)
    part_10 = np.einsum('xyab,xysb->xysa', P10, psi.values)
    return psi.with_values(part_10), psi.with_values(psi.values - part_10)
