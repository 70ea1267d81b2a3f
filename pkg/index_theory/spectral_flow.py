"""
Kernel dimension of D_{1,0} along the geodesic homotopy
H_t(x) = exp_{u₀(x)}(t·exp⁻¹_{u₀(x)} u₁(x)).
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from lab.exceptions import AmbiguousCluster, ConfigError
from twisted_dirac.maps import MapField
from twisted_dirac.spectral import eigen_solve

logger = logging.getLogger(__name__)

LOWEST_RECORDED = 6


@dataclass(frozen=True)
class FlowSample:
    t: float
    kernel_dim: Optional[int]
    lowest: List[float]

    def as_dict(self) -> Dict[str, Any]:
        return {'t': self.t, 'kernel_dim': self.kernel_dim, 'lowest': self.lowest}


@dataclass
class SpectralFlowReport:
    """
    Samples of the kernel dimension and the jumps between consecutive
    unambiguous samples. Parity is checked only when the target carries a
    parallel real structure.
    """

    threshold: float
    block: str
    parity_checked: bool
    samples: List[FlowSample] = field(default_factory=list)
    jumps: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def dimensions(self) -> List[Optional[int]]:
        return [sample.kernel_dim for sample in self.samples]

    @property
    def constant(self) -> bool:
        return len({d for d in self.dimensions if d is not None}) <= 1

    @property
    def all_even(self) -> bool:
        return all(jump['even'] for jump in self.jumps)

    @property
    def parity_ok(self) -> bool:
        if not self.parity_checked:
            return True
        return self.all_even and all(d % 2 == 0 for d in self.dimensions if d is not None)

    def as_dict(self) -> Dict[str, Any]:
        return {
            'threshold': self.threshold,
            'block': self.block,
            'parity_checked': self.parity_checked,
            'parity_ok': self.parity_ok,
            'samples': [sample.as_dict() for sample in self.samples],
            'jumps': self.jumps,
        }


def homotopy_map(u0: MapField, u1: MapField, t: float) -> MapField:
    """
    Raises:
        CutLocus: If some site pair has no unique shortest geodesic
    """
    return MapField(u0.domain, u0.target, u0.target.geodesic(u0.values, u1.values, t))


def spectral_flow_family(u0: MapField, u1: MapField, steps: int, threshold: float,
                         block: str = '(1,0)', k: Optional[int] = None) -> SpectralFlowReport:
    """
    Sample kernel_dimension(H_t, threshold) at t = j/steps, j = 0..steps.

    A sample whose kernel cluster is ambiguous at the threshold is recorded
    with kernel_dim None and skipped when jumps are formed.

    Raises:
        ConfigError: If the maps do not share domain and target, or steps < 1
        CutLocus: If the geodesic homotopy is undefined at some site
    """
    if steps < 1:
        raise ConfigError(f"Spectral flow needs at least one step, got {steps}")
    if u0.domain != u1.domain or u0.target is not u1.target:
        raise ConfigError("Spectral flow needs maps on the same domain and target")
    u0.target.check_cut_locus(u0.values, u1.values)

    report = SpectralFlowReport(threshold=threshold, block=block,
                                parity_checked=u0.target.has_real_structure)
    for t in np.linspace(0.0, 1.0, steps + 1):
        u_t = homotopy_map(u0, u1, float(t))
        spectral = eigen_solve(u_t, k=k, which=block)
        try:
            kernel_dim = spectral.kernel_count(threshold)
        except AmbiguousCluster as e:
            logger.warning(f"Ambiguous kernel cluster at t = {t:.4f}: {e.message}")
            kernel_dim = None
        lowest = np.sort(spectral.eigenvalues[:LOWEST_RECORDED]).tolist()
        report.samples.append(FlowSample(t=float(t), kernel_dim=kernel_dim, lowest=lowest))

    known = [sample for sample in report.samples if sample.kernel_dim is not None]
    for before, after in zip(known, known[1:]):
        if after.kernel_dim != before.kernel_dim:
            change = after.kernel_dim - before.kernel_dim
            report.jumps.append({
                't_from': before.t,
                't_to': after.t,
                'from': before.kernel_dim,
                'to': after.kernel_dim,
                'even': change % 2 == 0,
            })
    if not report.parity_ok:
        logger.warning(f"Odd kernel-dimension change along a family with real structure: {report.jumps}")
    logger.info(
        f"Spectral flow over {steps + 1} samples: dimensions {report.dimensions}, {len(report.jumps)} jumps"
    )
    return report
