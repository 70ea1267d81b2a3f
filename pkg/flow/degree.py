"""
Degree of a map between surfaces: the integral of the pulled-back
normalized area form.
"""
import logging
from typing import Tuple

import numpy as np

from lab.exceptions import DegenerateDegree
from twisted_dirac.maps import MapField

logger = logging.getLogger(__name__)

DEGREE_DEFECT_LIMIT = 0.1
DEGREE_DEFECT_WARNING = 1e-6


def degree_integral(u: MapField) -> float:
    """
    Raises:
        StructureUnavailable: If the target is not a surface
    """
    density = u.target.normalized_area_form(u.values, u.gradient[0], u.gradient[1])
    return float(u.domain.cell_area * np.sum(density))


def degree_with_defect(u: MapField) -> Tuple[int, float]:
    """
    Rounded degree and the rounding defect.

    Raises:
        DegenerateDegree: If the integral is more than 0.1 from an integer
        StructureUnavailable: If the target is not a surface
    """
    value = degree_integral(u)
    rounded = int(np.rint(value))
    defect = abs(value - rounded)
    if defect > DEGREE_DEFECT_LIMIT:
        logger.error(f"Degree integral {value:.6f} is not close to an integer")
        raise DegenerateDegree(
            f"Degree integral {value:.6f} has rounding defect {defect:.3e}",
            details={'integral': value, 'defect': defect},
        )
    if defect > DEGREE_DEFECT_WARNING:
        logger.warning(f"Degree rounding defect {defect:.3e} (integral {value:.8f})")
    return rounded, defect


def degree(u: MapField) -> int:
    return degree_with_defect(u)[0]
