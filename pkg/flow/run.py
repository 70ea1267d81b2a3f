"""
Flow driver: initial data, the step loop and event detection.
"""
import logging
from typing import Optional

import numpy as np
from django.conf import settings

from lab.exceptions import (
    AmbiguousCluster,
    ConfigError,
    DegenerateDegree,
    LabError,
    StructureUnavailable,
    TubeExit,
)
from spin_domain.domain import TorusDomain
from target_geometry.targets import build_target
from twisted_dirac.fields import TwistedSpinorField
from twisted_dirac.maps import MapField, build_map

from .config import FlowConfig
from .degree import degree
from .energies import alpha_weight, energy, energy_alpha
from .stepping import FlowState, solve_spectrum, step
from .terms import el_residual
from .trace import (
    CONVERGED,
    GRADIENT_BLOWUP,
    KERNEL_JUMP,
    MAX_STEPS,
    TUBE_EXIT,
    FlowEvent,
    FlowRecord,
    FlowTrace,
)

logger = logging.getLogger(__name__)

ENERGY_SLACK = 1e-10


def initial_map(config: FlowConfig, rng: Optional[np.random.Generator] = None) -> MapField:
    domain = TorusDomain.from_config(config.domain)
    target = build_target(config.target)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    return build_map(domain, target, config.initial_map, rng)


def initial_state(config: FlowConfig, u0: MapField) -> FlowState:
    """
    Spectral data of u₀, the kernel threshold Λ and the initial spinor.

    Raises:
        ConfigError: If the kernel block needs a Kähler target, or the spinor
            index does not select a kernel eigenfield
        AmbiguousCluster: If the initial kernel cluster is not separated
    """
    if config.kernel_block == '(1,0)' and not (u0.target.is_kaehler and u0.target.is_surface):
        raise ConfigError(f"kernel_block '(1,0)' needs a Kähler surface target, got {u0.target.kind}")
    if not config.needs_spectrum:
        return FlowState(t=0.0, step=0, u=u0, psi=TwistedSpinorField.zeros(u0))

    spectral = solve_spectrum(u0, config)
    threshold = config.lambda_value if config.lambda_policy == 'fixed' else spectral.gap()
    kernel_dim = spectral.kernel_count(threshold)
    logger.info(f"Initial kernel dimension {kernel_dim} below Λ = {threshold:.6g}")

    if not config.couples_spinor:
        return FlowState(t=0.0, step=0, u=u0, psi=TwistedSpinorField.zeros(u0),
                         spectral=spectral, threshold=threshold)
    if config.spinor_index >= kernel_dim:
        raise ConfigError(
            f"Spinor index {config.spinor_index} does not select a kernel eigenfield "
            f"(kernel dimension {kernel_dim})",
            details={'spinor_index': config.spinor_index, 'kernel_dim': kernel_dim},
        )
    psi0 = spectral.eigenfield(config.spinor_index)
    # ψ₀ is an eigenfield of the near-zero cluster, not necessarily an exact zero mode
    anchor_tol = (settings.DIRAC_KERNEL_TOL + float(spectral.abs_values[config.spinor_index])
                  + settings.DIRAC_EIGEN_RESIDUAL_TOL)
    return FlowState(t=0.0, step=0, u=u0, psi=psi0, spectral=spectral, anchor=psi0,
                     threshold=threshold, anchor_tol=anchor_tol)


def _degree(u: MapField) -> Optional[int]:
    if not u.target.is_surface:
        return None
    try:
        return degree(u)
    except (DegenerateDegree, StructureUnavailable) as e:
        logger.warning(f"Degree unavailable: {e}")
        return None


def _kernel_dim(state: FlowState) -> Optional[int]:
    if state.spectral is None or state.threshold is None:
        return None
    return state.spectral.kernel_count(state.threshold)


def _gap(state: FlowState) -> Optional[float]:
    if state.spectral is None:
        return None
    try:
        return state.spectral.gap()
    except AmbiguousCluster:
        return None


def build_record(state: FlowState, config: FlowConfig, previous: Optional[FlowState] = None,
                 previous_energy: Optional[float] = None) -> FlowRecord:
    u = state.u
    E_alpha = energy_alpha(u, config.alpha)
    diss_residual = 0.0
    dissipation = 0.0
    if previous is not None:
        rate = (u.values - previous.u.values) / config.dt
        weight = alpha_weight(previous.u, config.alpha)
        dissipation = config.alpha * config.dt * u.domain.cell_area * float(
            np.sum(weight[..., None] * rate**2)
        )
        diss_residual = E_alpha - previous_energy + dissipation
    return FlowRecord(
        step=state.step,
        t=state.t,
        E=energy(u),
        E_alpha=E_alpha,
        diss_residual=diss_residual,
        dissipation=dissipation,
        kernel_dim=_kernel_dim(state),
        gap=_gap(state),
        el_residual=el_residual(u, state.spinor, config.alpha),
        degree=_degree(u),
        reprojection=state.reprojection,
        psi_w1p=state.psi.w1p_norm(config.w1p_exponent) if state.coupled else None,
        psi_bar_norm=state.diagnostics.get('psi_bar_norm'),
    )


def run(config: FlowConfig, u0: Optional[MapField] = None) -> FlowTrace:
    """
    Integrate until Converged, KernelJump, TubeExit, GradientBlowup or MaxSteps.

    The run halts at the first event; restarting after a kernel jump is
    left to the caller with a new initial map.

    Raises:
        DegenerateProjection: If the constraint spinor collapses (details carry the step)
        ConfigError: If the initial data do not match the configuration
    """
    u0 = u0 if u0 is not None else initial_map(config)
    logger.info(
        f"Starting flow run: α = {config.alpha}, Δt = {config.dt}, "
        f"{config.integrator} integrator, spinor mode {config.spinor_mode}"
    )
    state = initial_state(config, u0)
    trace = FlowTrace(threshold=state.threshold)
    record = build_record(state, config)
    trace.add_record(record)
    initial_energy = record.E_alpha

    while True:
        if state.step >= config.max_steps or state.t >= config.t_max - 1e-12:
            trace.add_event(FlowEvent(MAX_STEPS, state.t, state.step,
                                      {'max_steps': config.max_steps, 't_max': config.t_max}))
            break
        try:
            new_state = step(state, config)
            record = build_record(new_state, config, state, trace.records[-1].E_alpha)
        except TubeExit as e:
            trace.add_event(FlowEvent(TUBE_EXIT, state.t, state.step + 1, dict(e.details)))
            logger.warning(f"Flow halted by tube exit at step {state.step + 1}")
            break
        except AmbiguousCluster as e:
            trace.add_event(FlowEvent(KERNEL_JUMP, state.t, state.step + 1,
                                      {'ambiguous': True, **e.details}))
            logger.warning(f"Kernel cluster became ambiguous at step {state.step + 1}")
            break
        except LabError as e:
            e.details.setdefault('step', state.step + 1)
            raise

        trace.add_record(record)
        previous_record = trace.records[-2]
        if (record.degree is not None and previous_record.degree is not None
                and record.degree != previous_record.degree):
            logger.warning(f"Degree changed from {previous_record.degree} to {record.degree} at step {record.step}")
        state = new_state

        if (record.kernel_dim is not None and previous_record.kernel_dim is not None
                and record.kernel_dim > previous_record.kernel_dim):
            trace.add_event(FlowEvent(KERNEL_JUMP, state.t, state.step, {
                'from': previous_record.kernel_dim, 'to': record.kernel_dim,
            }))
            logger.warning(
                f"Kernel jump {previous_record.kernel_dim} → {record.kernel_dim} at t = {state.t:.6g}"
            )
            break
        gradient = state.u.sup_gradient()
        if gradient > config.gradient_bound:
            trace.add_event(FlowEvent(GRADIENT_BLOWUP, state.t, state.step, {'sup_gradient': gradient}))
            logger.warning(f"Gradient {gradient:.3e} exceeds bound {config.gradient_bound} at step {state.step}")
            break
        if record.el_residual <= config.convergence_tol:
            trace.add_event(FlowEvent(CONVERGED, state.t, state.step, {'el_residual': record.el_residual}))
            break

    trace.final_state = state
    final_energy = trace.records[-1].E_alpha
    if final_energy > initial_energy + ENERGY_SLACK * max(1.0, initial_energy):
        logger.warning(f"E_α increased over the run: {initial_energy:.12g} → {final_energy:.12g}")
    logger.info(
        f"Flow run completed after {state.step} steps ({trace.halted_by}), "
        f"E_α {initial_energy:.8g} → {final_energy:.8g}"
    )
    return trace
