import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase

from lab.exceptions import ConfigError, CutLocus, OddKernelDimension, Unsupported
from spin_domain.domain import TorusDomain
from target_geometry.targets import CliffordTorus, UnitSphere
from twisted_dirac.maps import constant_map, linear_wrap, perturb_map
from twisted_dirac.quaternionic import j_commutation_defect

from .cp1 import Cp1TwistData, cp1_kernel_dim, cp1_table, h0_dim
from .index import index_I, script_I
from .spectral_flow import spectral_flow_family


class H0DimTests(SimpleTestCase):

    def test_values(self):
        self.assertEqual(h0_dim(1), 0)
        self.assertEqual(h0_dim(0), 1)
        self.assertEqual(h0_dim(-3), 4)
        self.assertEqual(h0_dim(7), 0)


class Cp1KernelTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(cp1_kernel_dim(Cp1TwistData(1, 2)), 2)
        self.assertEqual(cp1_kernel_dim(Cp1TwistData(3, 0)), 6)
        for g_N in range(6):
            self.assertEqual(cp1_kernel_dim(Cp1TwistData(0, g_N)), 0)

    def test_a_is_even(self):
        for deg in range(-10, 11):
            for g_N in range(6):
                self.assertEqual(Cp1TwistData(deg, g_N).a % 2, 0)

    def test_table_matches_closed_form(self):
        rows = cp1_table()
        self.assertEqual(len(rows), 21 * 6)
        for row in rows:
            a = 2 * row['deg'] * (1 - row['g_N'])
            self.assertEqual(row['dim_C'], h0_dim(a + 1) + h0_dim(1 - a))
            self.assertEqual(row['dim_C'], 2 * abs(row['deg'] * (row['g_N'] - 1)))
            self.assertEqual(row['script_I'], abs(row['deg'] * (row['g_N'] - 1)) % 2)

    def test_negative_genus(self):
        with self.assertRaises(ConfigError):
            Cp1TwistData(1, -1)


class IndexArithmeticTests(SimpleTestCase):

    def test_script_I(self):
        self.assertEqual(script_I(0), 0)
        self.assertEqual(script_I(2), 1)
        self.assertEqual(script_I(4), 0)
        with self.assertRaises(OddKernelDimension):
            script_I(3)

    def test_dimension_branches(self):
        self.assertEqual(index_I(2, 4), 0)
        self.assertEqual(index_I(10, 6), 1)
        self.assertEqual(index_I(9, 3), 1)
        self.assertEqual(index_I(1, 2), 0)
        for m in (3, 5, 6, 7, 11):
            self.assertEqual(index_I(m, 5), 0)

    def test_unsupported_branches(self):
        for m in (4, 8, 12):
            with self.assertRaises(Unsupported):
                index_I(m, 2)

    def test_odd_dimension_in_surface_branch(self):
        with self.assertRaises(OddKernelDimension):
            index_I(2, 3)

    def test_invalid_inputs(self):
        with self.assertRaises(ConfigError):
            index_I(0, 2)
        with self.assertRaises(ConfigError):
            script_I(-2)


class SpectralFlowTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.domain = TorusDomain(6, 6)
        self.target = CliffordTorus()

    def test_trivial_family(self):
        u = perturb_map(linear_wrap(self.domain, self.target, [[1, 0], [0, 1]]), 0.05, np.random.default_rng(1))
        report = spectral_flow_family(u, u, 3, 0.5)
        self.assertTrue(report.constant)
        self.assertEqual(report.jumps, [])

    def test_constant_maps_on_flat_target(self):
        u0 = constant_map(self.domain, self.target)
        u1 = constant_map(self.domain, self.target, self.target.point_at(np.array([0.7, -1.2])))
        report = spectral_flow_family(u0, u1, 4, 0.5)
        self.assertEqual(report.dimensions, [2] * 5)
        self.assertTrue(report.parity_checked)

    def test_random_family_has_even_dimensions(self):
        antiperiodic = TorusDomain(6, 6, spin_structure=('antiperiodic', 'antiperiodic'))
        rng = np.random.default_rng(5)
        base = linear_wrap(antiperiodic, self.target, [[1, 0], [0, 1]])
        u0 = perturb_map(base, 0.1, rng)
        u1 = perturb_map(base, 0.1, rng)
        self.assertLessEqual(j_commutation_defect(u0, probes=2), 1e-8)
        report = spectral_flow_family(u0, u1, 4, 0.3)
        self.assertTrue(report.parity_ok)
        self.assertTrue(all(d % 2 == 0 for d in report.dimensions if d is not None))

    def test_sphere_family_skips_parity(self):
        target = UnitSphere()
        u0 = perturb_map(constant_map(self.domain, target), 0.2, np.random.default_rng(3), max_mode=1)
        report = spectral_flow_family(u0, constant_map(self.domain, target), 2, 0.25, block='full')
        self.assertFalse(report.parity_checked)
        self.assertEqual(len(report.samples), 3)
        self.assertEqual(set(report.as_dict()), {'threshold', 'block', 'parity_checked', 'parity_ok',
                                                 'samples', 'jumps'})

    def test_antipodal_maps_hit_cut_locus(self):
        target = UnitSphere()
        u0 = constant_map(self.domain, target, [0.0, 0.0, 1.0])
        u1 = constant_map(self.domain, target, [0.0, 0.0, -1.0])
        with self.assertRaises(CutLocus):
            spectral_flow_family(u0, u1, 2, 0.5, block='full')

    def test_needs_a_step(self):
        u = constant_map(self.domain, self.target)
        with self.assertRaises(ConfigError):
            spectral_flow_family(u, u, 0, 0.5)
