"""
Domain errors of the twisted Dirac laboratory.

Every numerical module raises a subclass of `LabError`; management commands
map `ConfigError` to exit code 2 and any other `LabError` to exit code 3.
"""
from typing import Any, Dict, Optional


class LabError(Exception):
    """Base exception for laboratory errors."""

    default_code = 'lab_error'

    def __init__(self, message: str, error_code: Optional[str] = None,
                 details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.error_code = error_code or self.default_code
        self.details = details or {}
        super().__init__(self.message)

    def __str__(self):
        return f"{self.message} [Code: {self.error_code}]"


class ConfigError(LabError):
    """Run configuration failed to parse or validate."""
    default_code = 'config_error'


class OutsideTube(LabError):
    """Point lies outside the tubular neighbourhood of the target."""
    default_code = 'outside_tube'


class TubeExit(LabError):
    """A flow step left the tubular neighbourhood before reprojection."""
    default_code = 'tube_exit'


class CutLocus(LabError):
    """Two points are too far apart for a unique shortest geodesic."""
    default_code = 'cut_locus'


class TransportOutOfRange(LabError):
    """Two maps are at least ε apart somewhere, outside the admissible transport range."""
    default_code = 'transport_out_of_range'


class StructureUnavailable(LabError):
    """The target does not carry the requested geometric structure."""
    default_code = 'structure_unavailable'


class TangencyViolation(LabError):
    """A twisted spinor or vector is not tangent to the target along the map."""
    default_code = 'tangency_violation'


class EigenFailure(LabError):
    """Eigensolver missed its residual target."""
    default_code = 'eigen_failure'


class AmbiguousCluster(LabError):
    """No relative spectral gap separates a near-zero cluster."""
    default_code = 'ambiguous_cluster'


class ContourHitsSpectrum(LabError):
    """An eigenvalue lies on the resolvent contour."""
    default_code = 'contour_hits_spectrum'


class SolverFailure(LabError):
    """A shifted linear solve failed."""
    default_code = 'solver_failure'


class DegenerateProjection(LabError):
    """Kernel projection of the transported spinor collapsed."""
    default_code = 'degenerate_projection'


class OddKernelDimension(LabError):
    """The mod-2 quantity needs an even complex kernel dimension."""
    default_code = 'odd_kernel_dimension'


class Unsupported(LabError):
    """Requested index branch is outside the implemented dimension branches."""
    default_code = 'unsupported'


class DegenerateDegree(LabError):
    """Degree integral is too far from an integer to be trusted."""
    default_code = 'degenerate_degree'
