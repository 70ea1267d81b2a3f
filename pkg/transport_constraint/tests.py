import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from lab.exceptions import ConfigError, CutLocus, DegenerateProjection, TangencyViolation, TransportOutOfRange
from spin_domain.domain import TorusDomain
from target_geometry.targets import CliffordTorus, UnitSphere
from twisted_dirac.fields import TwistedSpinorField, random_tangent_spinor
from twisted_dirac.maps import (
    MapField,
    constant_map,
    displace_map,
    linear_wrap,
    perturb_map,
    random_tangent_direction,
)
from twisted_dirac.operator import apply_dirac
from twisted_dirac.quaternionic import random_10_spinor
from twisted_dirac.spectral import eigen_solve

from .constraint import constraint_spinor
from .context import TransportContext, admissible_constants
from .estimates import operator_comparison_defect, ratio_drift, scaling_study, triple_transport_defect
from .transport import transport_spinor

AMPLITUDES = (0.1, 0.05, 0.025)


def sphere_map(domain, seed=5, amplitude=0.3):
    return perturb_map(constant_map(domain, UnitSphere()), amplitude, np.random.default_rng(seed), max_mode=1)


def shifted_torus_map(u, shift):
    target = u.target
    return MapField(u.domain, target, target.point_at(target.angles(u.values) + np.asarray(shift)))


class AdmissibleConstantsTests(SimpleTestCase):

    def test_inequalities_hold(self):
        for target in (UnitSphere(), CliffordTorus(), CliffordTorus(1.0, 0.5)):
            c = admissible_constants(target)
            self.assertLess(2 * c.epsilon, target.injectivity_radius)
            self.assertLess(c.delta0 * c.C, 1.0)
            self.assertLess(c.delta, min(c.delta0 / 4, c.epsilon * (1 - c.delta0 * c.C) / 4))
            self.assertLessEqual(c.R, c.delta)

    def test_sphere_values(self):
        c = admissible_constants(UnitSphere())
        self.assertAlmostEqual(c.delta, 0.09)
        self.assertEqual(set(c.as_dict()), {'delta0', 'C', 'epsilon', 'delta', 'R'})

    def test_safety_factor_range(self):
        with self.assertRaises(ConfigError):
            admissible_constants(UnitSphere(), safety=1.0)


class TransportSpinorTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(41)
        self.domain = TorusDomain(8, 8)
        self.u = sphere_map(self.domain)
        V = random_tangent_direction(self.u, self.rng, max_mode=1)
        self.v = displace_map(self.u, V, 0.2)

    def test_same_map_is_identity(self):
        psi = random_tangent_spinor(self.u, self.rng)
        moved = transport_spinor(TransportContext.build(self.u, self.u), psi)
        assert_allclose(moved.values, psi.values, atol=1e-13)

    def test_isometry_and_tangency(self):
        psi = random_tangent_spinor(self.u, self.rng)
        moved = transport_spinor(TransportContext.build(self.u, self.v), psi)
        self.assertAlmostEqual(moved.norm(), psi.norm(), places=10)
        self.assertLessEqual(moved.tangency_residual(), 1e-12)
        self.assertIs(moved.basepoint, self.v)

    def test_round_trip(self):
        ctx = TransportContext.build(self.u, self.v)
        psi = random_tangent_spinor(self.u, self.rng)
        back = transport_spinor(ctx.reversed(), transport_spinor(ctx, psi))
        assert_allclose(back.values, psi.values, atol=1e-9)

    def test_normal_spinor_is_rejected(self):
        psi = TwistedSpinorField(self.u, np.einsum('s,xya->xysa', np.array([1.0, 1.0j]), self.u.values))
        with self.assertRaises(TangencyViolation):
            transport_spinor(TransportContext.build(self.u, self.v), psi)

    def test_antipodal_maps_hit_cut_locus(self):
        u = constant_map(self.domain, UnitSphere(), [0.0, 0.0, 1.0])
        v = constant_map(self.domain, UnitSphere(), [0.0, 0.0, -1.0])
        with self.assertRaises(CutLocus):
            TransportContext.build(u, v)

    def test_maps_beyond_transport_range(self):
        u = constant_map(self.domain, UnitSphere(), [0.0, 0.0, 1.0])
        east = np.broadcast_to([1.0, 0.0, 0.0], u.values.shape)
        v = displace_map(u, east, 4.0)
        with self.assertRaises(TransportOutOfRange) as ctx:
            TransportContext.build(u, v)
        self.assertAlmostEqual(ctx.exception.details['max_distance'], np.arctan(4.0), places=12)
        self.assertEqual(ctx.exception.details['invalid_sites'], self.domain.sites)

    def test_soft_build_keeps_validity_flags(self):
        u = constant_map(self.domain, UnitSphere(), [0.0, 0.0, 1.0])
        east = np.broadcast_to([1.0, 0.0, 0.0], u.values.shape)
        with self.assertLogs('transport_constraint.context', level='WARNING'):
            ctx = TransportContext.build(u, displace_map(u, east, 4.0), strict=False)
        self.assertFalse(ctx.valid.any())
        self.assertGreaterEqual(ctx.max_distance, ctx.constants.epsilon)

    def test_maps_must_share_domain(self):
        other = constant_map(TorusDomain(4, 4), self.u.target)
        with self.assertRaises(ConfigError):
            TransportContext.build(self.u, other)

    def test_validity_flags(self):
        ctx = TransportContext.build(self.u, self.v)
        self.assertTrue(ctx.valid.all())
        self.assertLess(ctx.max_distance, ctx.constants.epsilon)


class TripleTransportTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(43)
        self.domain = TorusDomain(8, 8)

    def test_degenerate_triangle(self):
        u0 = sphere_map(self.domain)
        u = displace_map(u0, random_tangent_direction(u0, self.rng, 1), 0.2)
        self.assertLessEqual(triple_transport_defect(u0, u, u), 1e-12)

    def test_flat_target_has_no_holonomy(self):
        u0 = linear_wrap(self.domain, CliffordTorus(), [[1, 0], [0, 1]])
        u = perturb_map(u0, 0.1, self.rng)
        v = perturb_map(u0, 0.1, self.rng)
        self.assertLessEqual(triple_transport_defect(u0, u, v), 1e-12)

    def test_explicit_vector_field(self):
        u0 = linear_wrap(self.domain, CliffordTorus(), [[1, 0], [0, 1]])
        u = perturb_map(u0, 0.1, self.rng)
        Z = u0.tangent_frame[..., 0]
        self.assertLessEqual(triple_transport_defect(u0, u, u0, Z), 1e-12)

    def test_sphere_defect_scales_linearly(self):
        u0 = sphere_map(self.domain)
        u = displace_map(u0, random_tangent_direction(u0, self.rng, 1), 0.3)
        V = random_tangent_direction(u, self.rng, 1)
        rows = scaling_study(lambda h: displace_map(u, V, h),
                             lambda v: triple_transport_defect(u0, u, v), u)
        ratios = [row.ratio for row in rows]
        self.assertTrue(all(r > 0 for r in ratios))
        self.assertLessEqual(max(ratios), 1.5 * min(ratios))
        self.assertLessEqual(ratio_drift(rows), 0.25)


class OperatorComparisonTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.rng = np.random.default_rng(47)

    def test_same_map(self):
        u = sphere_map(TorusDomain(6, 6))
        self.assertLessEqual(operator_comparison_defect(u, u, probes=3), 1e-10)

    def test_flat_translation(self):
        u = linear_wrap(TorusDomain(8, 8), CliffordTorus(), [[1, 0], [1, 1]])
        v = shifted_torus_map(u, [0.3, -0.2])
        self.assertLessEqual(operator_comparison_defect(u, v, probes=3), 1e-9)

    def test_sphere_scaling(self):
        u = sphere_map(TorusDomain(8, 8))
        V = random_tangent_direction(u, self.rng, 1)
        rows = scaling_study(lambda h: displace_map(u, V, h),
                             lambda v: operator_comparison_defect(u, v, probes=3), u, AMPLITUDES)
        self.assertTrue(all(row.defect > 0 for row in rows))
        self.assertLessEqual(ratio_drift(rows), 0.25)


class ConstraintSpinorTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.domain = TorusDomain(8, 8)
        self.u0 = linear_wrap(self.domain, CliffordTorus(), [[1, 0], [0, 1]])
        self.spectral0 = eigen_solve(self.u0, which='(1,0)')
        self.psi0 = self.spectral0.eigenfield(0)

    def perturbed(self, amplitude, seed=3):
        return perturb_map(self.u0, amplitude, np.random.default_rng(seed))

    def test_identity_at_initial_map(self):
        psi, diagnostics = constraint_spinor(self.u0, self.psi0, 0.5, spectral=self.spectral0)
        assert_allclose(psi.values, self.psi0.values, atol=1e-12)
        self.assertEqual(diagnostics['kernel_dim'], 2)
        self.assertAlmostEqual(diagnostics['gap'], 0.5)

    def test_normalized_and_in_kernel(self):
        u_t = self.perturbed(0.05)
        psi, diagnostics = constraint_spinor(u_t, self.psi0, 0.5)
        self.assertAlmostEqual(psi.norm(), 1.0, places=12)
        self.assertTrue(diagnostics['within_half_bound'])
        self.assertLessEqual(apply_dirac(u_t, psi, '(1,0)').norm(), 1e-8)

    def test_contour_agrees_with_eigen(self):
        u_t = self.perturbed(0.05)
        eigen, _ = constraint_spinor(u_t, self.psi0, 0.5)
        contour, _ = constraint_spinor(u_t, self.psi0, 0.5, method='contour')
        self.assertLessEqual(eigen.with_values(eigen.values - contour.values).norm(), 1e-8)

    def test_lipschitz_scaling(self):
        rows = []
        for h in AMPLITUDES:
            u_h = self.perturbed(h)
            psi, _ = constraint_spinor(u_h, self.psi0, 0.5)
            difference = psi.with_values(psi.values - self.psi0.values).sup_norm()
            rows.append(difference / u_h.sup_distance(self.u0))
        self.assertLessEqual(max(rows), 1.25 * min(rows))

    def test_collapsed_projection(self):
        excited = self.spectral0.eigenfield(5)
        with self.assertRaises(DegenerateProjection):
            constraint_spinor(self.u0, excited, 0.5, spectral=self.spectral0, kernel_tol=2.0)

    def test_initial_spinor_must_be_in_kernel(self):
        psi = random_10_spinor(self.u0, np.random.default_rng(17))
        with self.assertRaises(ConfigError) as ctx:
            constraint_spinor(self.perturbed(0.05), psi, 0.5)
        self.assertGreater(ctx.exception.details['kernel_residual'], 1e-3)
        with self.assertRaises(ConfigError):
            constraint_spinor(self.u0, self.spectral0.eigenfield(5), 0.5, spectral=self.spectral0)

    def test_requires_unit_spinor(self):
        with self.assertRaises(ValueError):
            constraint_spinor(self.u0, self.psi0.with_values(2 * self.psi0.values), 0.5)

    def test_unknown_method(self):
        with self.assertRaises(ConfigError):
            constraint_spinor(self.u0, self.psi0, 0.5, method='series')
