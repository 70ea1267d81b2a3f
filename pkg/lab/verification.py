"""
Invariant suite run by `manage.py verify`.

Each group measures a handful of invariants on small seeded instances and
compares them with tolerances multiplied by VERIFY_TOLERANCE_SCALE. Integer
invariants are counted as mismatches against a tolerance of 0.
"""
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
import scipy.fft as sfft
from django.conf import settings

from flow.config import FlowConfig
from flow.energies import alpha_weight, lagrangian
from flow.run import initial_state, run
from flow.stepping import step
from flow.terms import alpha_rhs
from flow.trace import CONVERGED, MAX_STEPS, dissipation_check
from index_theory.cp1 import cp1_table
from index_theory.index import index_I
from index_theory.spectral_flow import spectral_flow_family
from spin_domain.clifford import GENERATORS
from spin_domain.domain import TorusDomain
from spin_domain.operators import analytic_spectrum, assemble_plain, expand_spectrum, grading_matrix
from target_geometry.targets import TARGET_REGISTRY, CliffordTorus, UnitSphere
from transport_constraint.constraint import constraint_spinor
from transport_constraint.context import TransportContext, admissible_constants
from transport_constraint.estimates import triple_transport_defect
from transport_constraint.transport import transport_spinor
from twisted_dirac.fields import TwistedSpinorField, random_tangent_spinor
from twisted_dirac.maps import (
    MapField,
    constant_map,
    displace_map,
    linear_wrap,
    linear_wrap_energy,
    perturb_map,
    random_tangent_direction,
)
from twisted_dirac.operator import assemble_twisted
from twisted_dirac.quaternionic import j_commutation_defect, random_10_spinor
from twisted_dirac.spectral import (
    eigen_solve,
    odd_clusters,
    project_kernel_contour,
    project_kernel_eigen,
    symmetry_defect,
)

from .exceptions import LabError

logger = logging.getLogger(__name__)

ANTIPERIODIC = ('antiperiodic', 'antiperiodic')
SPIN_STRUCTURES = list(itertools.product(('periodic', 'antiperiodic'), repeat=2))


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    tolerance: float

    def passed(self, scale: float) -> bool:
        return bool(self.measured <= self.tolerance * scale)

    def as_dict(self) -> Dict[str, float]:
        return {'name': self.name, 'measured': self.measured, 'tolerance': self.tolerance}


@dataclass
class GroupResult:
    group: str
    scale: float
    checks: List[Check] = field(default_factory=list)
    error: Optional[str] = None
    elapsed: float = 0.0

    @property
    def failures(self) -> List[Check]:
        return [check for check in self.checks if not check.passed(self.scale)]

    @property
    def passed(self) -> bool:
        return self.error is None and not self.failures

    def line(self) -> str:
        if self.error is not None:
            return f"FAIL {self.group}: {self.error}"
        if self.failures:
            shown = ', '.join(
                f"{check.name} = {check.measured:.3e} > {check.tolerance * self.scale:.1e}"
                for check in self.failures
            )
            return f"FAIL {self.group}: {len(self.failures)}/{len(self.checks)} checks failed ({shown})"
        return f"PASS {self.group}: {len(self.checks)} checks in {self.elapsed:.1f} s"

    def as_dict(self) -> Dict:
        return {
            'group': self.group,
            'passed': self.passed,
            'scale': self.scale,
            'error': self.error,
            'elapsed': self.elapsed,
            'checks': [dict(check.as_dict(), passed=check.passed(self.scale)) for check in self.checks],
        }


def _largest(values) -> float:
    return float(np.max(np.abs(values)))


def _sphere_points(rng: np.random.Generator, count: int) -> np.ndarray:
    p = rng.standard_normal((count, 3))
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def _tangent(rng: np.random.Generator, target, p: np.ndarray) -> np.ndarray:
    return np.einsum('...ab,...b->...a', target.tangential_projector(p), rng.standard_normal(p.shape))


def _sphere_map(domain: TorusDomain, rng: np.random.Generator, amplitude: float = 0.3) -> MapField:
    return perturb_map(constant_map(domain, UnitSphere()), amplitude, rng, max_mode=1)


def _central_difference(func: Callable[[np.ndarray], np.ndarray], z: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Derivative of func along every ambient axis, stacked last."""
    columns = []
    for b in range(z.shape[-1]):
        step = np.zeros(z.shape[-1])
        step[b] = h
        columns.append((func(z + step) - func(z - step)) / (2 * h))
    return np.stack(columns, axis=-1)


def _distance_bound_violations(target, rng: np.random.Generator, pairs: int = 10_000) -> int:
    """Near pairs with d^N(p, q) above distance_bound(p, q)."""
    p = target.sample_points(rng, pairs)
    q = target.project(target.jitter(rng, p, fraction=0.5))
    near = np.linalg.norm(p - q, axis=-1) < target.tube_radius
    d = target.geodesic_distance(p[near], q[near])
    return int(np.sum(d > target.distance_bound(p[near], q[near]) * (1.0 + 1e-12)))


def _registry_geometry(rng: np.random.Generator) -> List[Check]:
    jacobian = hessian = 0.0
    violations = 0
    for target_class in TARGET_REGISTRY.values():
        target = target_class()
        z = target.jitter(rng, target.sample_points(rng, 20))
        jacobian = max(jacobian, _largest(target.proj_jacobian(z) - _central_difference(target.project, z)))
        hessian = max(hessian, _largest(target.proj_hessian(z) - _central_difference(target.proj_jacobian, z)))
        violations += _distance_bound_violations(target, rng)
    return [
        Check('projection_jacobian_fd', jacobian, 1e-6),
        Check('projection_hessian_fd', hessian, 1e-6),
        Check('distance_bound_pairs', violations, 0),
    ]


def verify_target_geometry(rng: np.random.Generator) -> List[Check]:
    sphere = UnitSphere(3)
    p = _sphere_points(rng, 50)
    once = sphere.project(p * rng.uniform(0.8, 1.2, size=(50, 1)))
    q = _sphere_points(rng, 50)
    X, Y, Z = (_tangent(rng, sphere, p) for _ in range(3))
    TX = sphere.parallel_transport_tangent(p, q, X)
    TY = sphere.parallel_transport_tangent(p, q, Y)
    R = sphere.riemann_curvature

    torus = CliffordTorus(1.0, 1.0)
    pt = torus.point_at(rng.uniform(-np.pi, np.pi, size=(50, 2)))
    qt = torus.point_at(rng.uniform(-np.pi, np.pi, size=(50, 2)))
    Xt = _tangent(rng, torus, pt)
    i, j = torus.complex_structure, torus.real_structure

    return [
        Check('sphere_projection_idempotent', _largest(sphere.project(once) - once), 1e-12),
        Check('sphere_transport_isometry',
              _largest(np.einsum('ka,ka->k', TX, TY) - np.einsum('ka,ka->k', X, Y)), 1e-10),
        Check('sphere_transport_tangency', sphere.tangency_residual(q, TX), 1e-12),
        Check('sphere_curvature_antisymmetry', _largest(R(p, X, Y, Z) + R(p, Y, X, Z)), 1e-12),
        Check('sphere_bianchi_identity', _largest(R(p, X, Y, Z) + R(p, Y, Z, X) + R(p, Z, X, Y)), 1e-12),
        Check('torus_complex_structure_square', _largest(i(pt, i(pt, Xt)) + Xt), 1e-12),
        Check('torus_structures_anticommute', _largest(j(pt, i(pt, Xt)) + i(pt, j(pt, Xt))), 1e-12),
        Check('torus_real_structure_parallel',
              _largest(j(qt, torus.parallel_transport_tangent(pt, qt, Xt))
                       - torus.parallel_transport_tangent(pt, qt, j(pt, Xt))), 1e-10),
    ] + _registry_geometry(rng)


def verify_spin_domain(rng: np.random.Generator) -> List[Check]:
    spectrum_error = hermiticity = chirality = 0.0
    kernel_mismatches = 0
    for structure in SPIN_STRUCTURES:
        domain = TorusDomain(8, 8, spin_structure=structure)
        D = assemble_plain(domain)
        computed = np.linalg.eigvalsh(D)
        spectrum_error = max(spectrum_error, _largest(computed - expand_spectrum(analytic_spectrum(domain))))
        hermiticity = max(hermiticity, _largest(D - D.conj().T))
        g = grading_matrix(domain)
        chirality = max(chirality, _largest(g[:, None] * D * g[None, :] + D))
        expected_kernel = 2 if structure == ('periodic', 'periodic') else 0
        kernel_mismatches += int(np.sum(np.abs(computed) < 1e-8)) != expected_kernel

    relations = max(
        _largest(GENERATORS[a] @ GENERATORS[b] + GENERATORS[b] @ GENERATORS[a] + 2.0 * (a == b) * np.eye(2))
        for a, b in itertools.product(range(2), repeat=2)
    )
    return [
        Check('plain_spectrum_matches_lattice', spectrum_error, 1e-10),
        Check('plain_dirac_hermitian', hermiticity, 1e-12),
        Check('plain_dirac_swaps_chirality', chirality, 1e-13),
        Check('plain_kernel_dimension', kernel_mismatches, 0),
        Check('clifford_relations', relations, 1e-15),
    ]


def verify_twisted_dirac(rng: np.random.Generator) -> List[Check]:
    domain = TorusDomain(6, 6)
    twisting = 0.0
    for target in (CliffordTorus(), UnitSphere()):
        matrix = assemble_twisted(constant_map(domain, target))
        expected = np.sort(np.repeat(expand_spectrum(analytic_spectrum(domain)), target.intrinsic_dim))
        twisting = max(twisting, _largest(np.linalg.eigvalsh(matrix.compressed) - expected))

    u = _sphere_map(domain, rng)
    matrix = assemble_twisted(u)
    spectral = eigen_solve(u)

    antiperiodic = TorusDomain(6, 6, spin_structure=ANTIPERIODIC)
    base = linear_wrap(antiperiodic, CliffordTorus(), [[1, 0], [0, 1]])
    odd = 0
    pairing = j_defect = 0.0
    for _ in range(10):
        v = perturb_map(base, 0.1, rng)
        block = eigen_solve(v, which='(1,0)')
        odd += len(odd_clusters(block))
        pairing = max(pairing, symmetry_defect(block))
        j_defect = max(j_defect, j_commutation_defect(v, probes=2, rng=rng))

    # S² has no real structure; the full bundle is quaternionic through the real twisting bundle
    sphere_odd = 0
    sphere_pairing = sphere_j_defect = 0.0
    for _ in range(10):
        w = _sphere_map(antiperiodic, rng)
        full = eigen_solve(w)
        sphere_odd += len(odd_clusters(full))
        sphere_pairing = max(sphere_pairing, symmetry_defect(full))
        sphere_j_defect = max(sphere_j_defect, j_commutation_defect(w, probes=2, rng=rng, block='full'))

    return [
        Check('constant_map_twisting', twisting, 1e-10),
        Check('twisted_dirac_hermitian', matrix.hermiticity_defect(), 1e-10),
        Check('commutes_with_site_projector', matrix.projector_commutation_defect(), 1e-9),
        Check('eigen_residual', float(spectral.residuals().max()), 1e-8),
        Check('spectrum_symmetric', symmetry_defect(spectral), 1e-8),
        Check('quaternionic_even_multiplicity', odd, 0),
        Check('quaternionic_spectrum_symmetric', pairing, 1e-8),
        Check('quaternionic_commutes_with_dirac', j_defect, 1e-8),
        Check('sphere_quaternionic_even_multiplicity', sphere_odd, 0),
        Check('sphere_quaternionic_spectrum_symmetric', sphere_pairing, 1e-8),
        Check('sphere_quaternionic_commutes_with_dirac', sphere_j_defect, 1e-8),
    ]


def _projection_cases(rng: np.random.Generator) -> List[tuple]:
    """(map, block) pairs on curved and perturbed maps, each with an unambiguous kernel cluster."""
    domain = TorusDomain(8, 8)
    first = _sphere_map(domain, rng, amplitude=0.1)
    wrap = linear_wrap(domain, CliffordTorus(), [[1, 0], [0, 1]])
    return [
        (first, 'full'),
        (_sphere_map(domain, rng, amplitude=0.1), 'full'),
        (perturb_map(first, 0.05, rng, max_mode=1), 'full'),
        (perturb_map(wrap, 0.1, rng), '(1,0)'),
    ]


def verify_kernel_projection(rng: np.random.Generator) -> List[Check]:
    agreement = idempotence = refinement = 0.0
    inputs = 0
    for u, block in _projection_cases(rng):
        spectral = eigen_solve(u, which=block)
        threshold = spectral.gap()
        for _ in range(5):
            psi = random_10_spinor(u, rng) if block == '(1,0)' else random_tangent_spinor(u, rng)
            eigen = project_kernel_eigen(u, psi, threshold, spectral)
            contour = project_kernel_contour(u, psi, threshold, matrix=spectral.matrix,
                                             eigenvalues=spectral.eigenvalues)
            agreement = max(agreement, psi.with_values(contour.values - eigen.values).norm())
            twice = project_kernel_eigen(u, eigen, threshold, spectral)
            idempotence = max(idempotence, _largest(twice.values - eigen.values))
            inputs += 1

        if block == '(1,0)':
            # exact kernel on the flat target; the nearest outer eigenvalue sets the quadrature error
            coarse = project_kernel_contour(u, psi, 0.8 * threshold, nodes=16, matrix=spectral.matrix,
                                            eigenvalues=spectral.eigenvalues)
            fine = project_kernel_contour(u, psi, 0.8 * threshold, nodes=32, matrix=spectral.matrix,
                                          eigenvalues=spectral.eigenvalues)
            refinement = psi.with_values(coarse.values - fine.values).norm()

    logger.debug(f"Compared contour and eigen projections on {inputs} inputs")
    return [
        Check('contour_matches_eigen_projection', agreement, 1e-8),
        Check('eigen_projection_idempotent', idempotence, 1e-12),
        Check('contour_node_refinement', refinement, 1e-10),
    ]


def verify_transport_constraint(rng: np.random.Generator) -> List[Check]:
    violations = 0
    for target in (UnitSphere(), CliffordTorus(), CliffordTorus(1.0, 0.5)):
        c = admissible_constants(target)
        violations += sum(not ok for ok in (
            2 * c.epsilon < target.injectivity_radius,
            c.delta0 * c.C < 1.0,
            c.delta < min(c.delta0 / 4, c.epsilon * (1 - c.delta0 * c.C) / 4),
            c.R <= c.delta,
        ))

    domain = TorusDomain(8, 8)
    u = _sphere_map(domain, rng)
    v = displace_map(u, random_tangent_direction(u, rng, max_mode=1), 0.2)
    psi = random_tangent_spinor(u, rng)
    ctx = TransportContext.build(u, v)
    moved = transport_spinor(ctx, psi)
    back = transport_spinor(ctx.reversed(), moved)

    u0 = linear_wrap(domain, CliffordTorus(), [[1, 0], [0, 1]])
    spectral0 = eigen_solve(u0, which='(1,0)')
    psi0 = spectral0.eigenfield(0)
    at_start, _ = constraint_spinor(u0, psi0, 0.5, spectral=spectral0)

    seed = int(rng.integers(2**32))
    ratios = []
    outside_bound = 0
    for amplitude in (0.1, 0.05, 0.025):
        u_h = perturb_map(u0, amplitude, np.random.default_rng(seed))
        psi_h, diagnostics = constraint_spinor(u_h, psi0, 0.5)
        ratios.append(psi_h.with_values(psi_h.values - psi0.values).sup_norm() / u_h.sup_distance(u0))
        outside_bound += int(not diagnostics['within_half_bound'])
    contour, _ = constraint_spinor(u_h, psi0, 0.5, method='contour')

    return [
        Check('admissible_constants', violations, 0),
        Check('transport_isometry', abs(moved.norm() - psi.norm()) / psi.norm(), 1e-10),
        Check('transport_round_trip', _largest(back.values - psi.values), 1e-9),
        Check('degenerate_triangle', triple_transport_defect(u, v, v), 1e-12),
        Check('constraint_identity_at_start', _largest(at_start.values - psi0.values), 1e-12),
        Check('constraint_lipschitz_drift', max(ratios) / min(ratios) - 1.0, 0.25),
        Check('constraint_norm_bound', outside_bound, 0),
        Check('constraint_contour_matches_eigen', psi_h.with_values(contour.values - psi_h.values).norm(), 1e-8),
    ]


def _gradient_defect(u: MapField, rng: np.random.Generator, alpha: float, h: float = 1e-4) -> float:
    psi = random_tangent_spinor(u, rng, max_mode=1)
    eta = random_tangent_direction(u, rng, max_mode=1)

    def along(s):
        u_s = displace_map(u, eta, s)
        return lagrangian(u_s, TwistedSpinorField(u_s, psi.values).tangential(), alpha)

    weight = alpha * alpha_weight(u, alpha)[..., None]
    analytic = -u.domain.cell_area * np.sum(weight * alpha_rhs(u, psi, alpha) * eta)
    numeric = (along(h) - along(-h)) / (2 * h)
    return abs(numeric - analytic) / abs(analytic)


def _angle_deviation(u: MapField) -> np.ndarray:
    X, Y = u.domain.coordinates
    difference = u.target.angles(u.values) - np.stack([X, Y], axis=-1)
    return np.angle(np.exp(1j * difference))


def verify_flow(rng: np.random.Generator) -> List[Check]:
    u = _sphere_map(TorusDomain(24, 24), rng, amplitude=0.2)
    gradient = max(_gradient_defect(u, rng, alpha) for alpha in (1.0, 1.05))

    domain = TorusDomain(16, 16)
    target = CliffordTorus()
    X, Y = domain.coordinates
    u0 = MapField(domain, target, target.point_at(
        np.stack([X + 0.05 * np.sin(Y), Y + 0.05 * np.cos(2 * X)], axis=-1)
    ))
    dt = 1e-4
    config = FlowConfig(dt=dt, spinor_mode='zero', monitor_kernel=False)
    after_step = step(initial_state(config, u0), config)
    before = sfft.fft2(_angle_deviation(u0), axes=(0, 1))
    after = sfft.fft2(_angle_deviation(after_step.u), axes=(0, 1))
    heat = max(
        abs(abs(after[0, 1, 0]) / abs(before[0, 1, 0]) - np.exp(-dt)),
        abs(abs(after[2, 0, 1]) / abs(before[2, 0, 1]) - np.exp(-4 * dt)),
    )

    sphere_map = _sphere_map(TorusDomain(8, 8), rng)
    residuals = []
    increase = 0.0
    for time_step in (0.01, 0.005):
        trace = run(FlowConfig(alpha=1.05, dt=time_step, t_max=0.2, max_steps=1000, convergence_tol=1e-12,
                               spinor_mode='zero', monitor_kernel=False), sphere_map)
        residuals.append(dissipation_check(trace) if trace.halted_by == MAX_STEPS else np.nan)
        increase = max(increase, trace.energy_increase())

    wrap_domain = TorusDomain(8, 8)
    Xw, Yw = wrap_domain.coordinates
    wrapped = MapField(wrap_domain, target, target.point_at(np.stack([Xw + 0.05 * np.sin(Yw), Yw], axis=-1)))
    trace = run(FlowConfig(dt=0.1, t_max=100.0, max_steps=500, convergence_tol=1e-7,
                           spinor_mode='zero', monitor_kernel=False), wrapped)
    harmonic = linear_wrap_energy(wrap_domain, target, [[1, 0], [0, 1]])

    return [
        Check('alpha_gradient_matches_finite_differences', gradient, 1e-5),
        Check('linear_heat_decay', heat, 1e-6),
        Check('dissipation_first_order', abs(residuals[0] / residuals[1] - 2.0), 0.5),
        Check('energy_non_increasing', max(increase, 0.0), 0),
        Check('wrap_flow_converges', int(trace.halted_by != CONVERGED), 0),
        Check('wrap_flow_harmonic_energy', abs(trace.records[-1].E - harmonic), 1e-6),
        Check('wrap_flow_keeps_degree', int({record.degree for record in trace.records} != {1}), 0),
    ]


def verify_index_theory(rng: np.random.Generator) -> List[Check]:
    table_mismatches = sum(
        row['dim_C'] != 2 * abs(row['deg'] * (row['g_N'] - 1))
        or row['script_I'] != abs(row['deg'] * (row['g_N'] - 1)) % 2
        for row in cp1_table()
    )
    branch_mismatches = sum(
        index_I(m, dim) != expected
        for m, dim, expected in ((2, 4, 0), (10, 6, 1), (9, 3, 1), (1, 2, 0), (3, 5, 0))
    )
    base = linear_wrap(TorusDomain(6, 6, spin_structure=ANTIPERIODIC), CliffordTorus(), [[1, 0], [0, 1]])
    report = spectral_flow_family(perturb_map(base, 0.1, rng), perturb_map(base, 0.1, rng), 4, 0.3)
    return [
        Check('cp1_table_closed_form', table_mismatches, 0),
        Check('index_dimension_branches', branch_mismatches, 0),
        Check('spectral_flow_even_jumps', int(not report.parity_ok), 0),
    ]


VERIFY_GROUPS: Dict[str, Callable[[np.random.Generator], List[Check]]] = {
    'target_geometry': verify_target_geometry,
    'spin_domain': verify_spin_domain,
    'twisted_dirac': verify_twisted_dirac,
    'kernel_projection': verify_kernel_projection,
    'transport_constraint': verify_transport_constraint,
    'flow': verify_flow,
    'index_theory': verify_index_theory,
}


def run_group(name: str, position: int, scale: float, seed: int) -> GroupResult:
    result = GroupResult(group=name, scale=scale)
    rng = np.random.default_rng([seed, position])
    started = time.perf_counter()
    try:
        result.checks = VERIFY_GROUPS[name](rng)
    except (LabError, ValueError) as e:
        logger.error(f"Verification group {name} raised: {e}")
        result.error = f"{type(e).__name__}: {e}"
    result.elapsed = time.perf_counter() - started
    return result


def run_suite(groups: Optional[Iterable[str]] = None, seed: Optional[int] = None) -> List[GroupResult]:
    """
    Run the named groups (all of them by default) in registry order.

    Raises:
        KeyError: If a group name is unknown
    """
    requested = set(VERIFY_GROUPS if groups is None else groups)
    unknown = sorted(requested - set(VERIFY_GROUPS))
    if unknown:
        raise KeyError(unknown[0])
    wanted = [name for name in VERIFY_GROUPS if name in requested]
    scale = settings.VERIFY_TOLERANCE_SCALE
    seed = settings.VERIFY_SEED if seed is None else seed
    logger.info(f"Running {len(wanted)} verification groups, tolerance scale {scale}")
    results = [run_group(name, list(VERIFY_GROUPS).index(name), scale, seed) for name in wanted]
    failed = [result.group for result in results if not result.passed]
    if failed:
        logger.warning(f"Verification failed in {', '.join(failed)}")
    else:
        logger.info("All verification groups passed")
    return results
