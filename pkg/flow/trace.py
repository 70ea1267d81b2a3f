"""
Flow trace: per-step records and the events that end a run.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

KERNEL_JUMP = 'KernelJump'
CONVERGED = 'Converged'
MAX_STEPS = 'MaxSteps'
TUBE_EXIT = 'TubeExit'
GRADIENT_BLOWUP = 'GradientBlowup'

EVENT_KINDS = [
    (KERNEL_JUMP, 'Kernel dimension increased'),
    (CONVERGED, 'Euler-Lagrange residual below tolerance'),
    (MAX_STEPS, 'Step or time budget exhausted'),
    (TUBE_EXIT, 'Update left the tubular neighbourhood'),
    (GRADIENT_BLOWUP, 'Gradient exceeded the configured bound'),
]


@dataclass(frozen=True)
class FlowEvent:
    kind: str
    t: float
    step: int
    payload: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in dict(EVENT_KINDS):
            raise ValueError(f"Unknown flow event kind: {self.kind!r}")

    def get_kind_display(self) -> str:
        return dict(EVENT_KINDS)[self.kind]

    def as_dict(self) -> Dict[str, Any]:
        return {'event': self.kind, 't': self.t, 'step': self.step, 'payload': self.payload}


@dataclass(frozen=True)
class FlowRecord:
    """
    State summary after a step; step 0 describes the initial data.

    `diss_residual` is E_α(u_{n+1}) − E_α(u_n) + αΔt∫(1 + |∇u_n|²)^{α−1}|(u_{n+1} − u_n)/Δt|²
    and `dissipation` the last term.
    """

    step: int
    t: float
    E: float
    E_alpha: float
    diss_residual: float
    dissipation: float
    kernel_dim: Optional[int]
    gap: Optional[float]
    el_residual: float
    degree: Optional[int]
    reprojection: float = 0.0
    psi_w1p: Optional[float] = None
    psi_bar_norm: Optional[float] = None

    def as_dict(self) -> Dict[str, Any]:
        return {
            't': self.t,
            'E': self.E,
            'E_alpha': self.E_alpha,
            'diss_residual': self.diss_residual,
            'kernel_dim': self.kernel_dim,
            'gap': self.gap,
            'el_residual': self.el_residual,
            'degree': self.degree,
            'step': self.step,
            'dissipation': self.dissipation,
            'reprojection': self.reprojection,
            'psi_w1p': self.psi_w1p,
            'psi_bar_norm': self.psi_bar_norm,
        }


@dataclass
class FlowTrace:
    """Append-only run history; `final_state` is set when the run halts."""

    records: List[FlowRecord] = field(default_factory=list)
    events: List[FlowEvent] = field(default_factory=list)
    final_state: Any = None
    threshold: Optional[float] = None

    def add_record(self, record: FlowRecord) -> None:
        self.records.append(record)

    def add_event(self, event: FlowEvent) -> None:
        self.events.append(event)

    @property
    def halted_by(self) -> Optional[str]:
        return self.events[-1].kind if self.events else None

    @property
    def steps(self) -> int:
        return self.records[-1].step if self.records else 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(record, name) for record in self.records], dtype=float)

    def energy_increase(self) -> float:
        """Largest per-step increase of E_α; ≤ 0 on a dissipative run."""
        values = self.column('E_alpha')
        if values.size < 2:
            return 0.0
        return float(np.max(np.diff(values)))

    def rows(self) -> List[Dict[str, Any]]:
        """Trace lines: one per record, then the events."""
        return [record.as_dict() for record in self.records] + [event.as_dict() for event in self.events]


def dissipation_check(trace: FlowTrace) -> float:
    """
    Cumulative residual of the discrete dissipation identity; per-step
    values are on the records.

    Raises:
        ValueError: If the trace has fewer than two records
    """
    if len(trace.records) < 2:
        raise ValueError("Dissipation check needs at least two records")
    return float(np.sum(trace.column('diss_residual')[1:]))
