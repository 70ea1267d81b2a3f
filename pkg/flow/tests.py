from unittest import mock

import numpy as np
import scipy.fft as sfft
from django.core.cache import cache
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from lab.exceptions import ConfigError, StructureUnavailable, TangencyViolation, TubeExit
from spin_domain.domain import TorusDomain
from spin_domain.spectral import laplacian
from target_geometry.targets import CliffordTorus, UnitSphere
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
from twisted_dirac.spectral import eigen_solve

from .config import FlowConfig
from .degree import degree, degree_with_defect
from .energies import alpha_weight, energy, energy_alpha, lagrangian
from .restart import restart_candidate
from .run import initial_state, run
from .stepping import retract, step
from .terms import alpha_rhs, curvature_term, el_residual, f1_term, f2_term
from .trace import CONVERGED, GRADIENT_BLOWUP, KERNEL_JUMP, MAX_STEPS, FlowEvent, FlowTrace, dissipation_check


def sphere_map(domain, seed=5, amplitude=0.3):
    return perturb_map(constant_map(domain, UnitSphere()), amplitude, np.random.default_rng(seed), max_mode=1)


def torus_map(domain, theta):
    target = CliffordTorus()
    return MapField(domain, target, target.point_at(theta))


def wrapped_angles(domain, eps1=0.05, eps2=0.0):
    X, Y = domain.coordinates
    return np.stack([X + eps1 * np.sin(Y), Y + eps2 * np.cos(2 * X)], axis=-1)


def angle_perturbation(domain, u):
    X, Y = domain.coordinates
    difference = u.target.angles(u.values) - np.stack([X, Y], axis=-1)
    return np.angle(np.exp(1j * difference))


class FlowConfigTests(SimpleTestCase):

    def test_defaults_are_valid(self):
        config = FlowConfig()
        self.assertEqual(config.integrator, 'exponential')
        self.assertTrue(config.reproject)

    def test_alpha_range(self):
        with self.assertRaises(ConfigError):
            FlowConfig(alpha=0.9)
        with self.assertRaises(ConfigError):
            FlowConfig(alpha=1.2, alpha_bound=0.1)
        FlowConfig(alpha=1.05, alpha_bound=0.1)

    def test_time_step_must_be_positive(self):
        with self.assertRaises(ConfigError):
            FlowConfig(dt=0.0)

    def test_unknown_options(self):
        with self.assertRaises(ConfigError):
            FlowConfig(integrator='rk4')
        with self.assertRaises(ConfigError):
            FlowConfig(kernel_block='(2,0)')

    def test_fixed_policy_needs_value(self):
        with self.assertRaises(ConfigError):
            FlowConfig(lambda_policy='fixed')
        FlowConfig(lambda_policy='fixed', lambda_value=0.3)

    def test_from_dict_rejects_unknown_keys(self):
        with self.assertRaises(ConfigError):
            FlowConfig.from_dict({'alpha': 1.0, 'beta': 2.0})
        self.assertEqual(FlowConfig.from_dict({'dt': 0.01}).as_dict()['dt'], 0.01)


class TermTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(61)
        self.domain = TorusDomain(12, 12)

    def test_constant_map_has_no_f1(self):
        u = constant_map(self.domain, UnitSphere())
        assert_allclose(f1_term(u), 0.0, atol=1e-14)

    def test_sphere_f1_is_energy_density_times_point(self):
        u = sphere_map(self.domain)
        assert_allclose(f1_term(u), u.energy_density[..., None] * u.values, atol=1e-12)

    def test_sphere_f2_matches_curvature(self):
        u = sphere_map(self.domain)
        psi = random_tangent_spinor(u, self.rng, max_mode=2)
        assert_allclose(-f2_term(u, psi), curvature_term(u, psi), atol=1e-8)

    def test_flat_target_has_no_spinor_force(self):
        u = perturb_map(linear_wrap(self.domain, CliffordTorus(), [[1, 0], [1, 1]]), 0.1, self.rng)
        psi = random_tangent_spinor(u, self.rng, max_mode=2)
        assert_allclose(curvature_term(u, psi), 0.0, atol=1e-14)
        self.assertLessEqual(np.max(np.abs(f2_term(u, psi))), 1e-9)

    def test_normal_spinor_is_rejected(self):
        u = sphere_map(self.domain)
        psi = TwistedSpinorField(u, np.einsum('s,xya->xysa', np.array([1.0, 0.5j]), u.values))
        with self.assertRaises(TangencyViolation):
            f2_term(u, psi)

    def test_alpha_one_reduces_to_harmonic_map_flow(self):
        u = sphere_map(self.domain)
        psi = random_tangent_spinor(u, self.rng, max_mode=2)
        expected = laplacian(self.domain, u.values) + f1_term(u) + f2_term(u, psi)
        assert_allclose(alpha_rhs(u, psi, 1.0), expected, atol=1e-12)

    def test_constant_map_without_spinor(self):
        u = constant_map(self.domain, UnitSphere())
        assert_allclose(alpha_rhs(u, None, 1.05), 0.0, atol=1e-12)
        self.assertLessEqual(el_residual(u, None, 1.0), 1e-12)

    def test_linear_wrap_is_harmonic(self):
        u = linear_wrap(self.domain, CliffordTorus(), [[1, 0], [0, 1]])
        self.assertLessEqual(el_residual(u, None, 1.0), 1e-8)


class EnergyTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.domain = TorusDomain(8, 8)

    def test_constant_map(self):
        u = constant_map(self.domain, UnitSphere())
        self.assertEqual(energy(u), 0.0)
        self.assertAlmostEqual(energy_alpha(u, 1.05), 0.5 * self.domain.volume)

    def test_alpha_one_shift(self):
        u = sphere_map(self.domain)
        self.assertAlmostEqual(energy_alpha(u, 1.0), energy(u) + 0.5 * self.domain.volume, places=10)

    def test_linear_wrap_closed_form(self):
        target = CliffordTorus(1.0, 0.5)
        wraps = [[2, 1], [0, 1]]
        u = linear_wrap(self.domain, target, wraps)
        self.assertAlmostEqual(energy(u), linear_wrap_energy(self.domain, target, wraps), places=10)

    def test_spinor_term_vanishes_on_kernel(self):
        u = linear_wrap(self.domain, CliffordTorus(), [[1, 0], [0, 1]])
        psi = eigen_solve(u, which='(1,0)').eigenfield(0)
        self.assertAlmostEqual(lagrangian(u, psi, 1.05), energy_alpha(u, 1.05), places=10)


class GradientCheckTests(SimpleTestCase):
    """alpha_rhs against central differences of L^α along π(u + hη)."""

    H = 1e-4

    def setUp(self):
        self.rng = np.random.default_rng(67)
        self.domain = TorusDomain(24, 24)
        self.u = sphere_map(self.domain, seed=7, amplitude=0.2)

    def lagrangian_along(self, psi, eta, h, alpha):
        u_h = displace_map(self.u, eta, h)
        psi_h = TwistedSpinorField(u_h, psi.values).tangential()
        return lagrangian(u_h, psi_h, alpha)

    def check(self, alpha):
        for _ in range(2):
            psi = random_tangent_spinor(self.u, self.rng, max_mode=1)
            eta = random_tangent_direction(self.u, self.rng, max_mode=1)
            weight = alpha * alpha_weight(self.u, alpha)[..., None]
            analytic = -self.domain.cell_area * np.sum(weight * alpha_rhs(self.u, psi, alpha) * eta)
            numeric = (
                self.lagrangian_along(psi, eta, self.H, alpha)
                - self.lagrangian_along(psi, eta, -self.H, alpha)
            ) / (2 * self.H)
            self.assertLessEqual(abs(numeric - analytic), 1e-5 * abs(analytic))

    def test_alpha_one(self):
        self.check(1.0)

    def test_alpha_above_one(self):
        self.check(1.05)


class DegreeTests(SimpleTestCase):

    def setUp(self):
        self.domain = TorusDomain(8, 8)

    def test_constant_map(self):
        self.assertEqual(degree(constant_map(self.domain, UnitSphere())), 0)

    def test_linear_wraps(self):
        target = CliffordTorus()
        self.assertEqual(degree(linear_wrap(self.domain, target, [[1, 0], [0, 1]])), 1)
        self.assertEqual(degree(linear_wrap(self.domain, target, [[2, 1], [1, 1]])), 1)
        self.assertEqual(degree(linear_wrap(self.domain, target, [[1, 0], [0, -2]])), -2)

    def test_perturbation_keeps_degree(self):
        domain = TorusDomain(16, 16)
        u = perturb_map(linear_wrap(domain, CliffordTorus(), [[1, 0], [0, 1]]), 0.1,
                        np.random.default_rng(3))
        value, defect = degree_with_defect(u)
        self.assertEqual(value, 1)
        self.assertLessEqual(defect, 1e-6)

    def test_three_sphere_has_no_degree(self):
        with self.assertRaises(StructureUnavailable):
            degree(constant_map(self.domain, UnitSphere(4)))


class StepTests(SimpleTestCase):

    def setUp(self):
        cache.clear()

    def test_heat_oracle_on_flat_target(self):
        domain = TorusDomain(16, 16)
        dt = 1e-4
        u0 = torus_map(domain, wrapped_angles(domain, eps1=0.05, eps2=0.05))
        config = FlowConfig(dt=dt, spinor_mode='zero', monitor_kernel=False)
        new = step(initial_state(config, u0), config)
        before = sfft.fft2(angle_perturbation(domain, u0), axes=(0, 1))
        after = sfft.fft2(angle_perturbation(domain, new.u), axes=(0, 1))
        self.assertLessEqual(abs(abs(after[0, 1, 0]) / abs(before[0, 1, 0]) - np.exp(-dt)), 1e-6)
        self.assertLessEqual(abs(abs(after[2, 0, 1]) / abs(before[2, 0, 1]) - np.exp(-4 * dt)), 1e-6)

    def test_constant_map_is_fixed(self):
        u0 = constant_map(TorusDomain(6, 6), UnitSphere())
        config = FlowConfig(dt=0.1, spinor_mode='zero', monitor_kernel=False)
        new = step(initial_state(config, u0), config)
        assert_allclose(new.u.values, u0.values, atol=1e-14)
        self.assertAlmostEqual(new.t, 0.1)

    def test_implicit_euler_keeps_map_on_target(self):
        u0 = sphere_map(TorusDomain(8, 8))
        config = FlowConfig(dt=0.05, integrator='implicit_euler', spinor_mode='zero', monitor_kernel=False)
        new = step(initial_state(config, u0), config)
        self.assertLessEqual(u0.target.on_manifold_residual(new.u.values), 1e-9)
        self.assertLess(energy(new.u), energy(u0))

    def test_coupled_step_keeps_unit_tangential_spinor(self):
        domain = TorusDomain(8, 8)
        u0 = perturb_map(linear_wrap(domain, CliffordTorus(), [[1, 0], [0, 1]]), 0.05,
                         np.random.default_rng(9))
        config = FlowConfig(dt=1e-3, kernel_block='(1,0)')
        state = initial_state(config, u0)
        self.assertAlmostEqual(state.threshold, 0.5)
        self.assertLess(state.anchor_tol, 1e-7)
        new = step(state, config)
        self.assertAlmostEqual(new.psi.norm(), 1.0, places=10)
        self.assertLessEqual(new.psi.tangency_residual(), 1e-9)
        self.assertIs(new.anchor, state.anchor)
        self.assertEqual(new.spectral.kernel_count(new.threshold), 2)

    def test_tube_exit(self):
        u = constant_map(TorusDomain(4, 4), UnitSphere())
        with self.assertRaises(TubeExit):
            retract(u, 2.0 * u.values, FlowConfig())

    def test_disabled_reprojection_needs_on_manifold_update(self):
        u = constant_map(TorusDomain(4, 4), UnitSphere())
        with self.assertRaises(TubeExit):
            retract(u, 1.1 * u.values, FlowConfig(reproject=False))
        kept = retract(u, u.values.copy(), FlowConfig(reproject=False))
        assert_allclose(kept.values, u.values)


class RunTests(SimpleTestCase):

    def setUp(self):
        cache.clear()

    def test_constant_map_converges_in_one_step(self):
        u0 = constant_map(TorusDomain(6, 6), UnitSphere())
        trace = run(FlowConfig(dt=0.01), u0)
        self.assertEqual(trace.halted_by, CONVERGED)
        self.assertEqual(trace.steps, 1)
        self.assertAlmostEqual(dissipation_check(trace), 0.0, places=12)
        self.assertEqual(trace.records[0].kernel_dim, 4)

    def test_perturbed_wrap_converges_to_harmonic_energy(self):
        domain = TorusDomain(8, 8)
        u0 = torus_map(domain, wrapped_angles(domain, eps1=0.05))
        config = FlowConfig(dt=0.1, t_max=100.0, max_steps=500, convergence_tol=1e-7,
                            spinor_mode='zero', kernel_block='(1,0)')
        trace = run(config, u0)
        self.assertEqual(trace.halted_by, CONVERGED)
        expected = linear_wrap_energy(domain, u0.target, [[1, 0], [0, 1]])
        self.assertLessEqual(abs(trace.records[-1].E - expected), 1e-6)
        self.assertEqual({record.degree for record in trace.records}, {1})
        self.assertEqual({record.kernel_dim for record in trace.records}, {2})
        self.assertLessEqual(trace.records[-1].E_alpha, trace.records[0].E_alpha)

    def test_dissipation_residual_is_first_order(self):
        u0 = sphere_map(TorusDomain(8, 8))
        residuals = []
        for dt in (0.01, 0.005):
            config = FlowConfig(alpha=1.05, dt=dt, t_max=0.2, max_steps=1000, convergence_tol=1e-12,
                                spinor_mode='zero', monitor_kernel=False)
            trace = run(config, u0)
            self.assertEqual(trace.halted_by, MAX_STEPS)
            self.assertLessEqual(trace.energy_increase(), 0.0)
            residuals.append(dissipation_check(trace))
        ratio = residuals[0] / residuals[1]
        self.assertGreaterEqual(ratio, 1.5)
        self.assertLessEqual(ratio, 2.5)

    def test_coupled_run_records_spinor_diagnostics(self):
        domain = TorusDomain(8, 8)
        u0 = perturb_map(linear_wrap(domain, CliffordTorus(), [[1, 0], [0, 1]]), 0.05,
                         np.random.default_rng(13))
        trace = run(FlowConfig(dt=0.01, max_steps=3, kernel_block='(1,0)'), u0)
        self.assertEqual(trace.halted_by, MAX_STEPS)
        self.assertEqual(len(trace.records), 4)
        for record in trace.records[1:]:
            self.assertIsNotNone(record.psi_w1p)
            self.assertAlmostEqual(record.psi_bar_norm, 1.0, places=2)
        self.assertAlmostEqual(trace.final_state.psi.norm(), 1.0, places=10)

    def test_kernel_jump_halts_run(self):
        u0 = constant_map(TorusDomain(6, 6), UnitSphere())
        with mock.patch('flow.run._kernel_dim', side_effect=[2, 4]):
            trace = run(FlowConfig(dt=0.01), u0)
        self.assertEqual(trace.halted_by, KERNEL_JUMP)
        self.assertEqual(trace.events[-1].payload, {'from': 2, 'to': 4})

    def test_gradient_blowup(self):
        u0 = linear_wrap(TorusDomain(8, 8), CliffordTorus(), [[1, 0], [0, 1]])
        trace = run(FlowConfig(dt=0.01, gradient_bound=0.5, spinor_mode='zero', monitor_kernel=False), u0)
        self.assertEqual(trace.halted_by, GRADIENT_BLOWUP)

    def test_unsupported_block_for_target(self):
        u0 = constant_map(TorusDomain(4, 4), UnitSphere(4))
        with self.assertRaises(ConfigError):
            run(FlowConfig(kernel_block='(1,0)'), u0)

    def test_spinor_index_outside_kernel(self):
        u0 = constant_map(TorusDomain(6, 6), UnitSphere())
        with self.assertRaises(ConfigError):
            run(FlowConfig(spinor_index=4), u0)

    def test_trace_rows(self):
        u0 = constant_map(TorusDomain(6, 6), UnitSphere())
        rows = run(FlowConfig(dt=0.01), u0).rows()
        self.assertEqual(list(rows[0])[:8], ['t', 'E', 'E_alpha', 'diss_residual', 'kernel_dim',
                                             'gap', 'el_residual', 'degree'])
        self.assertEqual(rows[-1]['event'], CONVERGED)


class TraceTests(SimpleTestCase):

    def test_unknown_event_kind(self):
        with self.assertRaises(ValueError):
            FlowEvent('Exploded', 0.0, 0)

    def test_dissipation_check_needs_two_records(self):
        with self.assertRaises(ValueError):
            dissipation_check(FlowTrace())


class RestartTests(SimpleTestCase):

    def setUp(self):
        cache.clear()

    def test_candidate_lowers_energy_with_minimal_kernel(self):
        domain = TorusDomain(8, 8)
        u = perturb_map(linear_wrap(domain, CliffordTorus(), [[1, 0], [0, 1]]), 0.1,
                        np.random.default_rng(17), max_mode=3)
        config = FlowConfig()
        candidate, attempts = restart_candidate(u, config, threshold=0.5, amplitude=0.02,
                                                rng=np.random.default_rng(19))
        self.assertIsNotNone(candidate)
        self.assertGreaterEqual(attempts, 1)
        self.assertLess(energy_alpha(candidate, config.alpha), energy_alpha(u, config.alpha))
        self.assertLessEqual(eigen_solve(candidate, which='(1,0)').kernel_count(0.5), 2)

    def test_needs_kaehler_surface(self):
        u = perturb_map(constant_map(TorusDomain(4, 4), UnitSphere(4)), 0.1, np.random.default_rng(1))
        with self.assertRaises(StructureUnavailable):
            restart_candidate(u, FlowConfig(), threshold=0.5)
