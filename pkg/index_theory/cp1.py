"""
Kernel dimension of D_{1,0} for maps from CP¹, by line-bundle cohomology.

For u: CP¹ → N into a Riemann surface of genus g_N,
c₁(u*T_{1,0}N) = aγ with a = 2·deg(u)·(1 − g_N), and

    dim_ℂ ker D_{1,0}^u = dim H⁰(CP¹, γ^{a+1}) + dim H⁰(CP¹, γ^{1−a}) = |a|.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List

from lab.exceptions import ConfigError, LabError

from .index import script_I

logger = logging.getLogger(__name__)

DEFAULT_DEGREES = range(-10, 11)
DEFAULT_GENERA = range(0, 6)


def h0_dim(m: int) -> int:
    """dim_ℂ H⁰(CP¹, γ^m): 0 for m > 0 and 1 − m for m ≤ 0."""
    m = int(m)
    return 0 if m > 0 else 1 - m


@dataclass(frozen=True)
class Cp1TwistData:
    deg: int
    g_N: int

    def __post_init__(self):
        if self.g_N < 0:
            raise ConfigError(f"Target genus must be non-negative, got {self.g_N}")

    @property
    def a(self) -> int:
        return 2 * self.deg * (1 - self.g_N)


def cp1_kernel_dim(data: Cp1TwistData) -> int:
    """
    Two-term cohomology sum, checked against the closed form 2|deg(g_N − 1)|.
    """
    a = data.a
    value = h0_dim(a + 1) + h0_dim(1 - a)
    closed_form = 2 * abs(data.deg * (data.g_N - 1))
    if value != closed_form:
        logger.error(f"Cohomology sum {value} disagrees with closed form {closed_form} for {data}")
        raise LabError(
            f"CP¹ kernel dimension mismatch for deg={data.deg}, g_N={data.g_N}",
            error_code='cp1_mismatch',
            details={'sum': value, 'closed_form': closed_form},
        )
    return value


def cp1_table(degrees: Iterable[int] = DEFAULT_DEGREES,
              genera: Iterable[int] = DEFAULT_GENERA) -> List[Dict[str, int]]:
    """Rows (deg, g_N, dim_C, script_I) over a grid of degrees and genera."""
    genera = list(genera)
    rows = []
    for deg in degrees:
        for g_N in genera:
            dim_c = cp1_kernel_dim(Cp1TwistData(deg, g_N))
            rows.append({'deg': deg, 'g_N': g_N, 'dim_C': dim_c, 'script_I': script_I(dim_c)})
    return rows
