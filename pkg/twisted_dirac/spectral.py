"""
Spectral analysis of the Dirac operator along a map: eigenpairs, clusters,
gap and kernel counts, and the two kernel projections.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from django.conf import settings
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, gmres

from lab.exceptions import AmbiguousCluster, ConfigError, ContourHitsSpectrum, EigenFailure, SolverFailure
from spin_domain.operators import grading_matrix

from .fields import TwistedSpinorField
from .maps import MapField
from .operator import DiracMatrix, assemble_twisted

logger = logging.getLogger(__name__)

GAP_FLOOR = 1e-12
AMBIGUOUS_BOTTOM = 1e-6


def cluster_ids(values: np.ndarray) -> np.ndarray:
    """
    Label eigenvalues that agree to max(DIRAC_CLUSTER_ATOL, DIRAC_CLUSTER_RTOL·|λ|).

    Labels are assigned in increasing eigenvalue order and returned in the
    input order.
    """
    values = np.asarray(values, dtype=float)
    ids = np.empty(values.size, dtype=int)
    order = np.argsort(values, kind='stable')
    current = -1
    previous = None
    for position in order:
        value = values[position]
        tolerance = max(settings.DIRAC_CLUSTER_ATOL, settings.DIRAC_CLUSTER_RTOL * abs(value))
        if previous is None or value - previous > tolerance:
            current += 1
        ids[position] = current
        previous = value
    return ids


def gap_from_values(abs_values: np.ndarray) -> Tuple[float, int]:
    """
    Λ(u)/2 and the size c of the near-zero cluster.

    c is the first index with a_c ≥ DIRAC_GAP_RATIO·max(a_{c−1}, 1e−12); without
    such an index the cluster is empty unless a₀ itself looks like zero.

    Raises:
        AmbiguousCluster: If no relative gap separates a near-zero cluster
    """
    a = np.sort(np.asarray(abs_values, dtype=float))
    if a.size == 0:
        raise AmbiguousCluster("No eigenvalues to estimate a gap from")
    ratio = settings.DIRAC_GAP_RATIO
    for c in range(1, a.size):
        if a[c] >= ratio * max(a[c - 1], GAP_FLOOR):
            return 0.5 * float(a[c]), c
    if a[0] < AMBIGUOUS_BOTTOM:
        raise AmbiguousCluster(
            f"Smallest |λ| = {a[0]:.3e} is not separated from the rest of the computed spectrum",
            details={'smallest': float(a[0]), 'largest': float(a[-1])},
        )
    return 0.5 * float(a[0]), 0


def count_below(abs_values: np.ndarray, threshold: float) -> int:
    """
    #{|λ| < threshold}.

    Raises:
        ConfigError: If threshold is not positive
        AmbiguousCluster: If nothing lies above the threshold or the count is not separated by the gap ratio
    """
    if not threshold > 0:
        raise ConfigError(f"Kernel threshold must be positive, got {threshold}")
    a = np.sort(np.asarray(abs_values, dtype=float))
    count = int(np.searchsorted(a, threshold, side='left'))
    if count == a.size:
        raise AmbiguousCluster(
            f"Threshold {threshold:.3e} exceeds every computed |λ|",
            details={'threshold': threshold, 'largest': float(a[-1]) if a.size else None},
        )
    if count > 0 and a[count - 1] * settings.DIRAC_GAP_RATIO > a[count]:
        raise AmbiguousCluster(
            f"No relative gap at threshold {threshold:.3e}: {a[count - 1]:.3e} below, {a[count]:.3e} above",
            details={'below': float(a[count - 1]), 'above': float(a[count])},
        )
    return count


@dataclass(frozen=True, eq=False)
class SpectralData:
    """
    Eigenpairs of a DiracMatrix sorted by |λ|, eigenvectors in compressed
    coordinates (columns).
    """

    matrix: DiracMatrix
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    chirality: np.ndarray
    truncated: bool

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    @property
    def abs_values(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    @cached_property
    def clusters(self) -> np.ndarray:
        return cluster_ids(self.eigenvalues)

    @cached_property
    def outer_clusters(self) -> set:
        """Clusters at the largest computed |λ|; incomplete when the solve was truncated."""
        if not self.truncated:
            return set()
        top = self.abs_values.max()
        tolerance = max(settings.DIRAC_CLUSTER_ATOL, settings.DIRAC_CLUSTER_RTOL * top)
        return set(self.clusters[self.abs_values >= top - tolerance].tolist())

    def cluster_table(self) -> List[dict]:
        """One row per cluster: mean eigenvalue, multiplicity and completeness."""
        rows = []
        for cid in np.unique(self.clusters):
            members = self.clusters == cid
            rows.append({
                'cluster_id': int(cid),
                'eigenvalue': float(np.mean(self.eigenvalues[members])),
                'multiplicity': int(np.sum(members)),
                'complete': int(cid) not in self.outer_clusters,
            })
        return sorted(rows, key=lambda row: (abs(row['eigenvalue']), row['eigenvalue']))

    def residuals(self) -> np.ndarray:
        H = self.matrix.compressed
        return np.linalg.norm(H @ self.eigenvectors - self.eigenvectors * self.eigenvalues, axis=0)

    def gram_defect(self) -> float:
        V = self.eigenvectors
        return float(np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1])))) if V.size else 0.0

    def eigenfield(self, index: int) -> TwistedSpinorField:
        """Eigenvector as a twisted spinor of unit L² norm."""
        field = TwistedSpinorField(self.matrix.u, self.matrix.expand(self.eigenvectors[:, index]))
        return field.normalized()

    def gap(self) -> float:
        return gap_from_values(self.abs_values)[0]

    def kernel_count(self, threshold: float) -> int:
        return count_below(self.abs_values, threshold)

    def kernel_chirality(self, threshold: float) -> Tuple[int, int]:
        """(#positive, #negative) chirality labels inside the near-zero cluster."""
        labels = self.chirality[:self.kernel_count(threshold)]
        return int(np.sum(labels > 0)), int(np.sum(labels < 0))


def _dense_eigenpairs(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return scipy.linalg.eigh(H)
    except np.linalg.LinAlgError as e:
        logger.error(f"Dense eigensolve failed: {e}")
        raise EigenFailure(f"Dense eigensolve failed: {e}") from e


def _shift_invert(H: np.ndarray, sigma: float) -> LinearOperator:
    shifted = LinearOperator(H.shape, matvec=lambda x: H @ x - sigma * x, dtype=complex)

    def solve(b):
        x, info = gmres(shifted, b, rtol=1e-12, restart=min(H.shape[0], 200),
                        maxiter=settings.DIRAC_ITERATIVE_MAXITER)
        if info != 0:
            raise SolverFailure(f"GMRES inner solve did not converge (info={info})")
        return x

    return LinearOperator(H.shape, matvec=solve, dtype=complex)


def _iterative_eigenpairs(H: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    sigma = settings.DIRAC_ITERATIVE_SHIFT
    wanted = min(k + 4, H.shape[0] - 2)
    try:
        values, vectors = eigsh(H, k=wanted, sigma=sigma, which='LM', OPinv=_shift_invert(H, sigma),
                                maxiter=settings.DIRAC_ITERATIVE_MAXITER)
    except ArpackNoConvergence as e:
        logger.error(f"Shift-invert eigensolve did not converge: {e}")
        raise EigenFailure(f"Shift-invert eigensolve did not converge: {e}") from e
    # Arnoldi vectors of a repeated eigenvalue need not be orthogonal
    order = np.argsort(values)
    vectors, _ = np.linalg.qr(vectors[:, order])
    return values[order], vectors


def _label_chirality(matrix: DiracMatrix, values: np.ndarray, vectors: np.ndarray):
    g = grading_matrix(matrix.domain, matrix.rank)
    chirality = np.rint(np.einsum('ij,i,ij->j', vectors.conj(), g, vectors).real).astype(int)

    kernel = np.flatnonzero(np.abs(values) <= settings.DIRAC_KERNEL_TOL)
    if kernel.size:
        # D anticommutes with G, so the kernel splits into chirality eigenvectors
        block = vectors[:, kernel]
        labels, rotation = np.linalg.eigh(block.conj().T @ (g[:, None] * block))
        block = block @ rotation
        vectors[:, kernel] = block
        values[kernel] = np.einsum('ij,ij->j', block.conj(), matrix.compressed @ block).real
        chirality[kernel] = np.rint(labels).astype(int)
    return values, vectors, chirality


def solve_matrix(matrix: DiracMatrix, k: Optional[int] = None) -> SpectralData:
    """
    The k smallest-|λ| eigenpairs of an assembled operator.

    Raises:
        ConfigError: If k exceeds the matrix dimension
        EigenFailure: If a residual exceeds DIRAC_EIGEN_RESIDUAL_TOL
    """
    dimension = matrix.dimension
    k = dimension if k is None else int(k)
    if not 0 < k <= dimension:
        raise ConfigError(f"Requested {k} eigenpairs of a matrix of dimension {dimension}")

    H = matrix.compressed
    if dimension <= settings.DIRAC_DENSE_EIGEN_LIMIT:
        values, vectors = _dense_eigenpairs(H)
    else:
        logger.info(f"Matrix dimension {dimension} above dense limit, using shift-invert")
        values, vectors = _iterative_eigenpairs(H, k)

    order = np.argsort(np.abs(values), kind='stable')[:k]
    values = np.array(values[order], dtype=float)
    vectors = np.array(vectors[:, order], dtype=complex)
    values, vectors, chirality = _label_chirality(matrix, values, vectors)
    order = np.argsort(np.abs(values), kind='stable')
    values, vectors, chirality = values[order], vectors[:, order], chirality[order]

    spectral = SpectralData(matrix, values, vectors, chirality, truncated=k < dimension)
    worst = float(spectral.residuals().max())
    if worst > settings.DIRAC_EIGEN_RESIDUAL_TOL:
        logger.error(f"Eigen residual {worst:.3e} above {settings.DIRAC_EIGEN_RESIDUAL_TOL:.1e}")
        raise EigenFailure(
            f"Eigenpair residual {worst:.3e} exceeds tolerance",
            details={'residual': worst, 'dimension': dimension},
        )
    logger.debug(f"Solved {k} eigenpairs of the {matrix.block} operator, smallest |λ| {abs(values[0]):.3e}")
    return spectral


def eigen_solve(u: MapField, k: Optional[int] = None, which: str = 'full') -> SpectralData:
    """
    The k smallest-|λ| eigenpairs of the Dirac operator along u.

    Args:
        u: the map
        k: number of eigenpairs, all of them when None
        which: 'full' or the '(1,0)' block (also '(0,1)')
    """
    return solve_matrix(assemble_twisted(u, which), k)


def symmetry_defect(spectral: SpectralData) -> float:
    """Largest distance from −λ to the computed spectrum, outer clusters excluded."""
    values = spectral.eigenvalues
    keep = np.array([cid not in spectral.outer_clusters for cid in spectral.clusters])
    if not keep.any():
        return 0.0
    distances = np.abs(values[keep][:, None] + values[None, :]).min(axis=1)
    return float(distances.max())


def odd_clusters(spectral: SpectralData) -> List[dict]:
    """Complete clusters of odd multiplicity."""
    return [row for row in spectral.cluster_table() if row['complete'] and row['multiplicity'] % 2]


def even_multiplicity(spectral: SpectralData) -> bool:
    return not odd_clusters(spectral)


def spectral_gap(u: MapField, which: str = 'full', k: Optional[int] = None) -> float:
    """Half the first relative gap above the near-zero cluster."""
    return eigen_solve(u, k, which).gap()


def kernel_dimension(u: MapField, threshold: float, which: str = 'full', k: Optional[int] = None) -> int:
    """Complex count of eigenvalues with |λ| < threshold."""
    return eigen_solve(u, k, which).kernel_count(threshold)


def project_kernel_eigen(u: MapField, psi: TwistedSpinorField, threshold: float,
                         spectral: Optional[SpectralData] = None, which: str = 'full') -> TwistedSpinorField:
    """
    Orthogonal L² projection onto the eigenvectors with |λ| < threshold.

    Raises:
        AmbiguousCluster: If the threshold does not sit in a relative gap
    """
    spectral = spectral if spectral is not None else eigen_solve(u, which=which)
    count = spectral.kernel_count(threshold)
    V = spectral.eigenvectors[:, :count]
    coefficients = spectral.matrix.compress(psi.values)
    return psi.with_values(spectral.matrix.expand(V @ (V.conj().T @ coefficients)))


def project_kernel_contour(u: MapField, psi: TwistedSpinorField, threshold: float,
                           nodes: Optional[int] = None, matrix: Optional[DiracMatrix] = None,
                           which: str = 'full', eigenvalues: Optional[np.ndarray] = None) -> TwistedSpinorField:
    """
    Resolvent projection −(1/2πi)∮ (D − λ)⁻¹ψ dλ over |λ| = threshold/2.

    The trapezoidal rule with M nodes λ_j = (Λ/2)e^{2πij/M} gives
    P ≈ −(1/M) Σ λ_j (D − λ_j)⁻¹.

    Eigenvalues with Λ/2 ≤ |λ| < Λ would be kept by the orthogonal projection
    but not enclosed by the contour, so they are rejected.

    Raises:
        ContourHitsSpectrum: If an eigenvalue lies within DIRAC_CONTOUR_MIN_DISTANCE of the contour
        AmbiguousCluster: If an eigenvalue lies in the band Λ/2 ≤ |λ| < Λ
        SolverFailure: If a shifted solve fails
    """
    nodes = nodes or settings.DIRAC_CONTOUR_NODES
    matrix = matrix if matrix is not None else assemble_twisted(u, which)
    H = matrix.compressed
    radius = 0.5 * threshold

    if eigenvalues is None:
        eigenvalues = scipy.linalg.eigvalsh(H)
    distance = float(np.min(np.abs(np.abs(eigenvalues) - radius)))
    if distance < settings.DIRAC_CONTOUR_MIN_DISTANCE:
        raise ContourHitsSpectrum(
            f"Eigenvalue within {distance:.3e} of the contour |λ| = {radius:.6g}",
            details={'radius': radius, 'distance': distance},
        )
    magnitudes = np.abs(eigenvalues)
    band = magnitudes[(magnitudes >= radius) & (magnitudes < threshold)]
    if band.size:
        raise AmbiguousCluster(
            f"{band.size} eigenvalues with |λ| in [{radius:.6g}, {threshold:.6g}) lie outside the contour "
            f"but below the threshold",
            details={'radius': radius, 'threshold': threshold, 'band': band.tolist()},
        )

    coefficients = matrix.compress(psi.values)
    identity = np.eye(H.shape[0])
    total = np.zeros_like(coefficients)
    for j in range(nodes):
        node = radius * np.exp(2j * np.pi * j / nodes)
        try:
            solution = scipy.linalg.lu_solve(scipy.linalg.lu_factor(H - node * identity), coefficients)
        except (np.linalg.LinAlgError, ValueError) as e:
            logger.error(f"Shifted solve at λ = {node:.4g} failed: {e}")
            raise SolverFailure(f"Shifted solve at node {j} failed: {e}") from e
        if not np.all(np.isfinite(solution)):
            logger.error(f"Shifted solve at λ = {node:.4g} produced non-finite values")
            raise SolverFailure(f"Shifted solve at node {j} produced non-finite values")
        total += node * solution

    return psi.with_values(matrix.expand(-total / nodes))
