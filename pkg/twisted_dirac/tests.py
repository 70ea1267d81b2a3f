import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase, override_settings
from numpy.testing import assert_allclose

from lab.exceptions import (
    AmbiguousCluster,
    ConfigError,
    ContourHitsSpectrum,
    OutsideTube,
    StructureUnavailable,
    TangencyViolation,
)
from spin_domain.domain import TorusDomain
from spin_domain.operators import analytic_spectrum, expand_spectrum
from target_geometry.targets import CliffordTorus, UnitSphere

from .fields import TwistedSpinorField, random_tangent_spinor
from .maps import (
    MapField,
    build_map,
    constant_map,
    linear_wrap,
    linear_wrap_degree,
    linear_wrap_energy,
    perturb_map,
    random_tangent_direction,
)
from .operator import apply_dirac, assemble_twisted, split_10_01
from .quaternionic import j_commutation_defect, quaternionic_J, random_10_spinor
from .spectral import (
    cluster_ids,
    count_below,
    eigen_solve,
    even_multiplicity,
    gap_from_values,
    kernel_dimension,
    project_kernel_contour,
    project_kernel_eigen,
    spectral_gap,
    symmetry_defect,
)

ANTIPERIODIC = ('antiperiodic', 'antiperiodic')


def perturbed_sphere_map(domain, seed=11, amplitude=0.3):
    rng = np.random.default_rng(seed)
    return perturb_map(constant_map(domain, UnitSphere()), amplitude, rng, max_mode=1)


class MapFieldTests(SimpleTestCase):

    def test_off_manifold_values_are_rejected(self):
        domain = TorusDomain(4, 4)
        with self.assertRaises(OutsideTube):
            MapField(domain, UnitSphere(), np.full((4, 4, 3), 0.5))

    def test_constant_map_has_zero_energy(self):
        u = constant_map(TorusDomain(8, 8), UnitSphere(), [0.0, 2.0, 0.0])
        assert_allclose(u.values[3, 5], [0.0, 1.0, 0.0])
        assert_allclose(u.energy_density, 0.0, atol=1e-20)

    def test_linear_wrap_energy_and_degree(self):
        domain = TorusDomain(16, 16)
        target = CliffordTorus()
        wraps = [[1, 0], [0, 1]]
        u = linear_wrap(domain, target, wraps)
        energy = 0.5 * domain.cell_area * u.energy_density.sum()
        self.assertAlmostEqual(energy, linear_wrap_energy(domain, target, wraps), places=10)
        self.assertAlmostEqual(energy, 4 * np.pi**2, places=10)
        self.assertEqual(linear_wrap_degree([[2, 1], [0, 3]]), 6)

    def test_linear_wrap_needs_clifford_torus(self):
        with self.assertRaises(ConfigError):
            linear_wrap(TorusDomain(4, 4), UnitSphere(), [[1, 0], [0, 1]])

    def test_build_map_with_perturbation(self):
        domain = TorusDomain(8, 8)
        spec = {'kind': 'linear_wrap', 'wraps': [[1, 0], [0, 1]], 'perturbation': {'amplitude': 0.05}}
        u = build_map(domain, CliffordTorus(), spec, np.random.default_rng(1))
        v = linear_wrap(domain, CliffordTorus(), [[1, 0], [0, 1]])
        self.assertGreater(u.sup_distance(v), 0.0)
        self.assertLess(u.sup_distance(v), 0.1)

    def test_build_map_rejects_unknown_kind(self):
        with self.assertRaises(ConfigError):
            build_map(TorusDomain(4, 4), UnitSphere(), {'kind': 'spiral'})

    def test_tangent_direction_is_tangent(self):
        u = perturbed_sphere_map(TorusDomain(8, 8))
        V = random_tangent_direction(u, np.random.default_rng(2))
        assert_allclose(np.einsum('xya,xya->xy', V, u.values), 0.0, atol=1e-14)


class OperatorAssemblyTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.rng = np.random.default_rng(17)

    def test_constant_map_doubles_plain_spectrum(self):
        for target in (CliffordTorus(), UnitSphere()):
            domain = TorusDomain(8, 8)
            matrix = assemble_twisted(constant_map(domain, target))
            expected = np.sort(np.repeat(expand_spectrum(analytic_spectrum(domain)), 2))
            assert_allclose(np.linalg.eigvalsh(matrix.compressed), expected, atol=1e-10)

    def test_hermitian_and_commutes_with_projector(self):
        matrix = assemble_twisted(perturbed_sphere_map(TorusDomain(6, 6)))
        self.assertEqual(matrix.ambient.shape, (2 * 3 * 36, 2 * 3 * 36))
        self.assertLessEqual(matrix.hermiticity_defect(), 1e-10)
        self.assertLessEqual(matrix.projector_commutation_defect(), 1e-9)

    def test_quadratic_form_is_real(self):
        u = perturbed_sphere_map(TorusDomain(6, 6))
        for _ in range(5):
            psi = random_tangent_spinor(u, self.rng)
            value = psi.inner(apply_dirac(u, psi))
            self.assertLess(abs(value.imag), 1e-10 * max(1.0, abs(value)))

    def test_unknown_block(self):
        with self.assertRaises(ConfigError):
            assemble_twisted(constant_map(TorusDomain(4, 4), CliffordTorus()), '(2,0)')

    def test_block_needs_kaehler_target(self):
        with self.assertRaises(StructureUnavailable):
            assemble_twisted(constant_map(TorusDomain(4, 4), UnitSphere(4)), '(1,0)')


class ApplyDiracTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.rng = np.random.default_rng(23)

    def test_parallel_constant_spinor_is_harmonic(self):
        u = constant_map(TorusDomain(8, 8), UnitSphere())
        frame = u.tangent_frame[..., 0]
        psi = TwistedSpinorField(u, np.einsum('s,xya->xysa', np.array([1.0, 0.5j]), frame))
        assert_allclose(apply_dirac(u, psi).values, 0.0, atol=1e-12)

    def test_matrix_free_matches_assembled(self):
        for u in (perturbed_sphere_map(TorusDomain(6, 6)),
                  linear_wrap(TorusDomain(6, 6), CliffordTorus(), [[1, 1], [0, 1]])):
            matrix = assemble_twisted(u)
            for _ in range(10):
                psi = random_tangent_spinor(u, self.rng)
                assert_allclose(apply_dirac(u, psi).values, matrix.apply(psi).values, atol=1e-10)

    def test_output_is_tangential(self):
        u = perturbed_sphere_map(TorusDomain(6, 6))
        psi = random_tangent_spinor(u, self.rng, max_mode=2)
        self.assertLessEqual(apply_dirac(u, psi).tangency_residual(), 1e-9)

    def test_normal_input_is_rejected(self):
        u = perturbed_sphere_map(TorusDomain(6, 6))
        psi = TwistedSpinorField(u, np.einsum('s,xya->xysa', np.array([1.0, 0.0]), u.values))
        with self.assertRaises(TangencyViolation):
            apply_dirac(u, psi)


class SplitTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.rng = np.random.default_rng(29)
        self.u = linear_wrap(TorusDomain(8, 8), CliffordTorus(), [[1, 0], [1, 1]])

    def test_split_of_10_spinor(self):
        psi = random_10_spinor(self.u, self.rng)
        part_10, part_01 = split_10_01(self.u, psi)
        assert_allclose(part_10.values, psi.values, atol=1e-13)
        assert_allclose(part_01.values, 0.0, atol=1e-13)

    def test_orthogonal_splitting(self):
        psi = random_tangent_spinor(self.u, self.rng)
        part_10, part_01 = split_10_01(self.u, psi)
        assert_allclose(part_10.values + part_01.values, psi.values, atol=1e-14)
        self.assertAlmostEqual(part_10.norm()**2 + part_01.norm()**2, psi.norm()**2, places=12)

    def test_dirac_preserves_type(self):
        psi = random_tangent_spinor(self.u, self.rng)
        part_10, _ = split_10_01(self.u, psi)
        image_10, _ = split_10_01(self.u, apply_dirac(self.u, psi))
        defect = apply_dirac(self.u, part_10).values - image_10.values
        self.assertLessEqual(part_10.with_values(defect).norm(), 1e-8)

    def test_sphere_split(self):
        u = perturbed_sphere_map(TorusDomain(6, 6))
        psi = random_tangent_spinor(u, self.rng)
        part_10, part_01 = split_10_01(u, psi)
        self.assertLessEqual(part_10.tangency_residual(), 1e-12)
        self.assertAlmostEqual(part_10.norm()**2 + part_01.norm()**2, 1.0, places=12)

    def test_requires_complex_structure(self):
        u = constant_map(TorusDomain(4, 4), UnitSphere(4))
        with self.assertRaises(StructureUnavailable):
            split_10_01(u, TwistedSpinorField.zeros(u))


class ClusterHelperTests(SimpleTestCase):

    def test_cluster_ids(self):
        ids = cluster_ids([0.0, 1e-12, 1.0, 1.0 + 1e-9, -1.0])
        self.assertEqual(ids.tolist(), [1, 1, 2, 2, 0])

    def test_gap_above_kernel(self):
        gap, size = gap_from_values([1e-14, 2e-14, 3e-15, 1e-14, 1.0, 1.0])
        self.assertAlmostEqual(gap, 0.5)
        self.assertEqual(size, 4)

    def test_gap_without_kernel(self):
        gap, size = gap_from_values([0.7, 0.7, 1.5, 2.1])
        self.assertAlmostEqual(gap, 0.35)
        self.assertEqual(size, 0)

    def test_gap_is_ambiguous_without_separation(self):
        with self.assertRaises(AmbiguousCluster):
            gap_from_values([1e-8, 2e-8, 4e-8])

    def test_count_below(self):
        self.assertEqual(count_below([0.0, 0.0, 1.0, 2.0], 0.5), 2)
        with self.assertRaises(AmbiguousCluster):
            count_below([0.0, 1.0], 3.0)
        with self.assertRaises(AmbiguousCluster):
            count_below([0.01, 0.05], 0.03)
        with self.assertRaises(ConfigError):
            count_below([0.0, 1.0], 0.0)


class EigenSolveTests(SimpleTestCase):

    def setUp(self):
        cache.clear()

    def test_clifford_torus_kernels(self):
        u = constant_map(TorusDomain(8, 8), CliffordTorus())
        full = eigen_solve(u)
        self.assertEqual(full.kernel_count(0.5), 4)
        self.assertEqual(full.kernel_chirality(0.5), (2, 2))
        self.assertEqual(eigen_solve(u, which='(1,0)').kernel_count(0.5), 2)
        self.assertEqual(kernel_dimension(u, 0.5, which='(1,0)'), 2)

    def test_antiperiodic_gap(self):
        u = constant_map(TorusDomain(8, 8, spin_structure=ANTIPERIODIC), CliffordTorus())
        gap = spectral_gap(u)
        self.assertAlmostEqual(gap, 1 / (2 * np.sqrt(2)), places=10)
        self.assertEqual(kernel_dimension(u, gap), 0)

    def test_periodic_gap(self):
        u = constant_map(TorusDomain(8, 8), UnitSphere())
        self.assertAlmostEqual(spectral_gap(u), 0.5, places=10)

    def test_solver_contract_on_curved_target(self):
        spectral = eigen_solve(perturbed_sphere_map(TorusDomain(6, 6)))
        self.assertLessEqual(spectral.residuals().max(), 1e-8)
        self.assertLessEqual(spectral.gram_defect(), 1e-9)
        self.assertLessEqual(symmetry_defect(spectral), 1e-8)
        self.assertTrue(np.all(np.diff(spectral.abs_values) >= 0))

    def test_truncated_solve(self):
        u = constant_map(TorusDomain(8, 8), CliffordTorus())
        spectral = eigen_solve(u, k=12)
        self.assertEqual(spectral.count, 12)
        self.assertTrue(spectral.truncated)
        assert_allclose(spectral.abs_values[:4], 0.0, atol=1e-10)
        assert_allclose(spectral.abs_values[4:], 1.0, atol=1e-10)
        self.assertLessEqual(symmetry_defect(spectral), 1e-12)

    def test_threshold_above_spectrum(self):
        spectral = eigen_solve(constant_map(TorusDomain(4, 4), CliffordTorus()))
        with self.assertRaises(AmbiguousCluster):
            spectral.kernel_count(1e3)

    def test_too_many_eigenpairs(self):
        with self.assertRaises(ConfigError):
            eigen_solve(constant_map(TorusDomain(4, 4), CliffordTorus()), k=10**4)

    def test_quaternionic_eigenspaces_are_even(self):
        u = linear_wrap(TorusDomain(8, 8, spin_structure=ANTIPERIODIC), CliffordTorus(), [[1, 0], [0, 1]])
        spectral = eigen_solve(u, which='(1,0)')
        self.assertTrue(even_multiplicity(spectral))
        self.assertLessEqual(symmetry_defect(spectral), 1e-8)

    @override_settings(DIRAC_DENSE_EIGEN_LIMIT=10)
    def test_shift_invert_path(self):
        domain = TorusDomain(4, 4, spin_structure=ANTIPERIODIC)
        u = perturbed_sphere_map(domain, amplitude=0.4)
        spectral = eigen_solve(u, k=4, which='(1,0)')
        self.assertTrue(spectral.truncated)
        self.assertLessEqual(spectral.residuals().max(), 1e-8)
        self.assertLessEqual(spectral.gram_defect(), 1e-9)
        with self.settings(DIRAC_DENSE_EIGEN_LIMIT=8192):
            dense = eigen_solve(u, which='(1,0)')
        assert_allclose(spectral.abs_values, dense.abs_values[:4], atol=1e-8)


class KernelProjectionTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.rng = np.random.default_rng(31)
        self.u = constant_map(TorusDomain(8, 8), CliffordTorus())
        self.spectral = eigen_solve(self.u)

    def test_kernel_vector_is_fixed(self):
        psi = self.spectral.eigenfield(0)
        projected = project_kernel_eigen(self.u, psi, 0.5, self.spectral)
        assert_allclose(projected.values, psi.values, atol=1e-9)

    def test_orthogonal_vector_is_annihilated(self):
        psi = self.spectral.eigenfield(10)
        projected = project_kernel_eigen(self.u, psi, 0.5, self.spectral)
        assert_allclose(projected.values, 0.0, atol=1e-9)

    def test_projection_contracts(self):
        psi = random_tangent_spinor(self.u, self.rng)
        projected = project_kernel_eigen(self.u, psi, 0.5, self.spectral)
        self.assertLessEqual(projected.norm(), psi.norm() + 1e-12)
        twice = project_kernel_eigen(self.u, projected, 0.5, self.spectral)
        assert_allclose(twice.values, projected.values, atol=1e-12)

    def test_contour_matches_eigen_projection(self):
        matrix = self.spectral.matrix
        for _ in range(3):
            psi = random_tangent_spinor(self.u, self.rng)
            eigen = project_kernel_eigen(self.u, psi, 0.5, self.spectral)
            contour = project_kernel_contour(self.u, psi, 0.5, matrix=matrix,
                                             eigenvalues=self.spectral.eigenvalues)
            self.assertLessEqual(psi.with_values(contour.values - eigen.values).norm(), 1e-8)

    def test_contour_node_refinement(self):
        psi = random_tangent_spinor(self.u, self.rng)
        coarse = project_kernel_contour(self.u, psi, 0.4, nodes=16)
        fine = project_kernel_contour(self.u, psi, 0.4, nodes=32)
        self.assertLessEqual(psi.with_values(coarse.values - fine.values).norm(), 1e-10)

    def test_contour_through_eigenvalue(self):
        psi = random_tangent_spinor(self.u, self.rng)
        with self.assertRaises(ContourHitsSpectrum):
            project_kernel_contour(self.u, psi, 2.0)

    def test_eigenvalue_between_contour_and_threshold(self):
        psi = random_tangent_spinor(self.u, self.rng)
        with self.assertRaises(AmbiguousCluster) as ctx:
            project_kernel_contour(self.u, psi, 1.5, matrix=self.spectral.matrix,
                                   eigenvalues=self.spectral.eigenvalues)
        self.assertAlmostEqual(min(ctx.exception.details['band']), 1.0, places=10)

    def test_contour_matches_eigen_on_curved_map(self):
        u = perturbed_sphere_map(TorusDomain(6, 6), amplitude=0.1)
        spectral = eigen_solve(u)
        threshold = spectral.gap()
        for _ in range(3):
            psi = random_tangent_spinor(u, self.rng)
            eigen = project_kernel_eigen(u, psi, threshold, spectral)
            contour = project_kernel_contour(u, psi, threshold, matrix=spectral.matrix,
                                             eigenvalues=spectral.eigenvalues)
            self.assertLessEqual(psi.with_values(contour.values - eigen.values).norm(), 1e-8)


class QuaternionicTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.rng = np.random.default_rng(37)
        self.u = linear_wrap(TorusDomain(8, 8, spin_structure=ANTIPERIODIC), CliffordTorus(), [[1, 0], [0, 1]])

    def test_square_is_minus_identity(self):
        psi = random_10_spinor(self.u, self.rng)
        assert_allclose(quaternionic_J(self.u, quaternionic_J(self.u, psi)).values, -psi.values, atol=1e-14)

    def test_antilinear(self):
        psi = random_10_spinor(self.u, self.rng)
        lhs = quaternionic_J(self.u, psi.with_values(1j * psi.values)).values
        assert_allclose(lhs, -1j * quaternionic_J(self.u, psi).values, atol=1e-14)

    def test_preserves_type(self):
        psi = random_10_spinor(self.u, self.rng)
        image = quaternionic_J(self.u, psi)
        part_10, part_01 = split_10_01(self.u, image)
        assert_allclose(part_01.values, 0.0, atol=1e-13)

    def test_commutes_with_dirac(self):
        self.assertLessEqual(j_commutation_defect(self.u, probes=4, rng=self.rng), 1e-8)

    def test_sphere_has_no_real_structure(self):
        u = constant_map(TorusDomain(4, 4), UnitSphere())
        with self.assertRaises(StructureUnavailable):
            j_commutation_defect(u, probes=1)

    def test_full_bundle_structure_on_sphere(self):
        u = perturbed_sphere_map(TorusDomain(6, 6, spin_structure=ANTIPERIODIC))
        psi = random_tangent_spinor(u, self.rng)
        assert_allclose(quaternionic_J(u, quaternionic_J(u, psi, 'full'), 'full').values, -psi.values, atol=1e-14)
        self.assertLessEqual(quaternionic_J(u, psi, 'full').tangency_residual(), 1e-13)
        self.assertLessEqual(j_commutation_defect(u, probes=2, rng=self.rng, block='full'), 1e-8)
        self.assertTrue(even_multiplicity(eigen_solve(u)))

    def test_no_structure_on_01_block(self):
        with self.assertRaises(ValueError):
            j_commutation_defect(self.u, probes=1, block='(0,1)')
