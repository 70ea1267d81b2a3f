"""
Flow run parameters.
"""
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Optional

from lab.exceptions import ConfigError

LAMBDA_POLICIES = [
    ('fixed', 'Fixed threshold'),
    ('half_initial_gap', 'Half of the initial spectral gap'),
]

INTEGRATORS = [
    ('exponential', 'Exponential Euler'),
    ('implicit_euler', 'Implicit Euler'),
]

SPINOR_MODES = [
    ('kernel', 'Kernel eigenfield of the initial map'),
    ('zero', 'Uncoupled flow with ψ ≡ 0'),
]

KERNEL_BLOCKS = [
    ('full', 'Full operator'),
    ('(1,0)', 'Restriction to u*T_{1,0}N'),
]

PROJECTION_METHODS = [
    ('eigen', 'Eigenvector projection'),
    ('contour', 'Resolvent contour quadrature'),
]


def _choices(options):
    return [value for value, _ in options]


@dataclass
class FlowConfig:
    """
    Parameters of one α-flow run.

    `alpha_bound` is the configured ε₁: α must lie in [1, 1 + ε₁).
    `domain`, `target`, `initial_map` are the mappings accepted by
    TorusDomain.from_config, build_target and build_map.
    """

    alpha: float = 1.0
    alpha_bound: float = 0.1
    dt: float = 1e-3
    t_max: float = 1.0
    max_steps: int = 1000
    lambda_policy: str = 'half_initial_gap'
    lambda_value: Optional[float] = None
    reproject: bool = True
    reprojection_tol: float = 1e-3
    tangency_tol: float = 1e-6
    convergence_tol: float = 1e-6
    kernel_block: str = 'full'
    projection_method: str = 'eigen'
    integrator: str = 'exponential'
    spinor_mode: str = 'kernel'
    spinor_index: int = 0
    gradient_bound: float = 1e3
    monitor_kernel: bool = True
    eigen_count: Optional[int] = None
    w1p_exponent: float = 1.5
    seed: int = 0
    domain: Dict[str, Any] = field(default_factory=dict)
    target: Dict[str, Any] = field(default_factory=lambda: {'target': 'sphere', 'q': 3})
    initial_map: Dict[str, Any] = field(default_factory=lambda: {'kind': 'constant'})

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            ConfigError: If a parameter is out of range or not a known option
        """
        if self.alpha_bound <= 0:
            raise ConfigError(f"alpha_bound must be positive, got {self.alpha_bound}")
        if not 1.0 <= self.alpha < 1.0 + self.alpha_bound:
            raise ConfigError(
                f"alpha must lie in [1, {1.0 + self.alpha_bound}), got {self.alpha}",
                details={'alpha': self.alpha, 'alpha_bound': self.alpha_bound},
            )
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.t_max > 0:
            raise ConfigError(f"t_max must be positive, got {self.t_max}")
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be at least 1, got {self.max_steps}")

        for name, options in (
            ('lambda_policy', LAMBDA_POLICIES),
            ('integrator', INTEGRATORS),
            ('spinor_mode', SPINOR_MODES),
            ('kernel_block', KERNEL_BLOCKS),
            ('projection_method', PROJECTION_METHODS),
        ):
            value = getattr(self, name)
            if value not in _choices(options):
                raise ConfigError(
                    f"Unknown {name}: {value!r}",
                    details={'allowed': _choices(options)},
                )

        if self.lambda_policy == 'fixed' and not (self.lambda_value or 0) > 0:
            raise ConfigError("lambda_policy 'fixed' needs a positive lambda_value")
        if self.spinor_mode == 'kernel' and self.spinor_index < 0:
            raise ConfigError(f"spinor_index must be non-negative, got {self.spinor_index}")
        for name in ('reprojection_tol', 'tangency_tol', 'convergence_tol', 'gradient_bound'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.w1p_exponent > 1:
            raise ConfigError(f"w1p_exponent must exceed 1, got {self.w1p_exponent}")
        if self.eigen_count is not None and self.eigen_count < 1:
            raise ConfigError(f"eigen_count must be positive, got {self.eigen_count}")

    @property
    def couples_spinor(self) -> bool:
        return self.spinor_mode == 'kernel'

    @property
    def needs_spectrum(self) -> bool:
        return self.couples_spinor or self.monitor_kernel

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'FlowConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown flow parameters: {', '.join(unknown)}", details={'unknown': unknown})
        return cls(**data)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)
