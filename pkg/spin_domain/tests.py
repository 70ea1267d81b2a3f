import itertools

import numpy as np
from django.core.cache import cache
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from lab.exceptions import ConfigError

from .clifford import E1, E2, GENERATORS, GRADING, clifford_mul, grading_G, quaternionic_j1
from .domain import TorusDomain
from .fields import DomainVectorField, SpinorField
from .operators import (
    analytic_spectrum,
    assemble_plain,
    dirac_plain,
    expand_spectrum,
    grading_matrix,
    l2_inner,
    l2_norm,
    w1p_norm,
)
from .spectral import laplacian, spectral_gradient, spectral_hessian, spinor_gradient

SPIN_STRUCTURES = list(itertools.product(('periodic', 'antiperiodic'), repeat=2))


def random_spinors(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class CliffordAlgebraTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(3)

    def test_clifford_relations(self):
        for a, b in itertools.product(range(2), repeat=2):
            anticommutator = GENERATORS[a] @ GENERATORS[b] + GENERATORS[b] @ GENERATORS[a]
            assert_allclose(anticommutator, -2.0 * (a == b) * np.eye(2), atol=0)

    def test_generators_are_anti_hermitian(self):
        for e in GENERATORS:
            assert_allclose(e.conj().T, -e, atol=0)

    def test_skew_adjointness(self):
        xi = random_spinors(self.rng, (50, 2))
        eta = random_spinors(self.rng, (50, 2))
        X = self.rng.standard_normal((50, 2))
        lhs = np.einsum('ks,ks->k', clifford_mul(X, xi).conj(), eta)
        rhs = np.einsum('ks,ks->k', xi.conj(), clifford_mul(X, eta))
        assert_allclose(lhs, -rhs, atol=1e-14)

    def test_unit_vector_squares_to_minus_one(self):
        sigma = random_spinors(self.rng, (10, 2))
        e1 = np.broadcast_to([1.0, 0.0], (10, 2))
        e2 = np.broadcast_to([0.0, 1.0], (10, 2))
        assert_allclose(clifford_mul(e1, clifford_mul(e1, sigma)), -sigma, atol=1e-15)
        assert_allclose(clifford_mul(e1, clifford_mul(e2, sigma)), -clifford_mul(e2, clifford_mul(e1, sigma)), atol=1e-15)

    def test_grading(self):
        assert_allclose(GRADING, np.diag([1.0, -1.0]), atol=0)
        sigma = random_spinors(self.rng, (10, 2))
        assert_allclose(grading_G(grading_G(sigma)), sigma)
        e1 = np.broadcast_to([1.0, 0.0], (10, 2))
        assert_allclose(grading_G(clifford_mul(e1, sigma)), -clifford_mul(e1, grading_G(sigma)), atol=1e-15)

    def test_quaternionic_structure_on_spinors(self):
        sigma = random_spinors(self.rng, (10, 2))
        X = self.rng.standard_normal((10, 2))
        assert_allclose(quaternionic_j1(quaternionic_j1(sigma)), -sigma, atol=1e-15)
        assert_allclose(quaternionic_j1(clifford_mul(X, sigma)), clifford_mul(X, quaternionic_j1(sigma)), atol=1e-14)
        assert_allclose(quaternionic_j1(1j * sigma), -1j * quaternionic_j1(sigma), atol=1e-15)

    def test_vector_field_action(self):
        domain = TorusDomain(4, 4)
        psi = SpinorField(domain, random_spinors(self.rng, (4, 4, 2)))
        X = DomainVectorField(domain, np.broadcast_to([0.0, 1.0], (4, 4, 2)))
        assert_allclose(X.act_on(X.act_on(psi)).values, -psi.values, atol=1e-15)
        assert_allclose(X.pointwise_norm(), 1.0)


class TorusDomainTests(SimpleTestCase):

    def test_rejects_odd_grid(self):
        with self.assertRaises(ConfigError):
            TorusDomain(Nx=7, Ny=8)

    def test_rejects_small_grid(self):
        with self.assertRaises(ConfigError):
            TorusDomain(Nx=2, Ny=8)

    def test_rejects_unknown_spin_structure(self):
        with self.assertRaises(ConfigError):
            TorusDomain(spin_structure=('periodic', 'twisted'))

    def test_from_config_defaults(self):
        domain = TorusDomain.from_config({})
        self.assertEqual(domain.shape, (16, 16))
        self.assertAlmostEqual(domain.cell_area, (2 * np.pi) ** 2 / 256)
        assert_allclose(domain.shift, [0.0, 0.0])

    def test_antiperiodic_phase(self):
        domain = TorusDomain(8, 8, spin_structure=('antiperiodic', 'periodic'))
        X, _ = domain.coordinates
        assert_allclose(domain.phase, np.exp(0.5j * X))


class SpectralCalculusTests(SimpleTestCase):

    def setUp(self):
        self.domain = TorusDomain(16, 16, L1=2 * np.pi, L2=4 * np.pi)

    def test_derivatives_of_trigonometric_field(self):
        X, Y = self.domain.coordinates
        f = np.sin(2 * X) * np.cos(Y / 2)
        grad = spectral_gradient(self.domain, f)
        assert_allclose(grad[0], 2 * np.cos(2 * X) * np.cos(Y / 2), atol=1e-12)
        assert_allclose(grad[1], -0.5 * np.sin(2 * X) * np.sin(Y / 2), atol=1e-12)
        assert_allclose(laplacian(self.domain, f), -(4 + 0.25) * f, atol=1e-12)
        hess = spectral_hessian(self.domain, f)
        assert_allclose(hess[0, 1], hess[1, 0], atol=1e-14)
        assert_allclose(hess[0, 1], -np.cos(2 * X) * np.sin(Y / 2), atol=1e-12)

    def test_trailing_axes_are_carried(self):
        X, Y = self.domain.coordinates
        f = np.stack([np.sin(X), np.cos(Y / 2)], axis=-1)
        grad = spectral_gradient(self.domain, f)
        self.assertEqual(grad.shape, (2, 16, 16, 2))
        assert_allclose(grad[0, ..., 0], np.cos(X), atol=1e-12)

    def test_spinor_derivative_of_shifted_plane_wave(self):
        domain = TorusDomain(8, 8, spin_structure=('antiperiodic', 'antiperiodic'))
        psi = SpinorField.plane_wave(domain, (1, -2), [1.0, 0.0]).values
        grad = spinor_gradient(domain, psi)
        assert_allclose(grad[0], 1.5j * psi, atol=1e-12)
        assert_allclose(grad[1], -1.5j * psi, atol=1e-12)


class PlainDiracTests(SimpleTestCase):

    def setUp(self):
        cache.clear()
        self.rng = np.random.default_rng(5)

    def test_constant_spinor_is_harmonic(self):
        domain = TorusDomain(8, 8)
        psi = np.broadcast_to([1.0 + 0.5j, -0.25], (8, 8, 2))
        assert_allclose(dirac_plain(domain, psi), 0.0, atol=1e-13)

    def test_plane_wave_eigenvalue(self):
        for structure in SPIN_STRUCTURES:
            domain = TorusDomain(8, 8, spin_structure=structure)
            s = domain.shift
            kappa = np.array([1 + s[0], -2 + s[1]])
            psi = SpinorField.plane_wave(domain, (1, -2), [1.0, 0.0])
            twice = SpinorField(domain, dirac_plain(domain, psi.dirac().values))
            assert_allclose(twice.values, np.dot(kappa, kappa) * psi.values, atol=1e-11)

    def test_self_adjoint_in_l2(self):
        domain = TorusDomain(8, 8, spin_structure=('periodic', 'antiperiodic'))
        psi = random_spinors(self.rng, (8, 8, 2))
        phi = random_spinors(self.rng, (8, 8, 2))
        lhs = l2_inner(domain, dirac_plain(domain, psi), phi)
        rhs = l2_inner(domain, psi, dirac_plain(domain, phi))
        scale = l2_norm(domain, dirac_plain(domain, psi)) * l2_norm(domain, phi)
        self.assertLess(abs(lhs - rhs), 1e-10 * scale)

    def test_assembled_spectrum_matches_analytic(self):
        for structure in SPIN_STRUCTURES:
            domain = TorusDomain(8, 8, spin_structure=structure)
            D = assemble_plain(domain)
            assert_allclose(D, D.conj().T, atol=1e-12)
            computed = np.linalg.eigvalsh(D)
            expected = expand_spectrum(analytic_spectrum(domain))
            assert_allclose(computed, expected, atol=1e-10)
            kernel = int(np.sum(np.abs(computed) < 1e-8))
            self.assertEqual(kernel, 2 if structure == ('periodic', 'periodic') else 0)

    def test_dirac_swaps_chirality(self):
        domain = TorusDomain(6, 6)
        D = assemble_plain(domain)
        g = grading_matrix(domain)
        assert_allclose(g[:, None] * D * g[None, :], -D, atol=1e-14)

    def test_cached_matrix_is_reused(self):
        domain = TorusDomain(6, 6)
        first = assemble_plain(domain)
        assert_allclose(assemble_plain(domain), first, atol=0)


class AnalyticSpectrumTests(SimpleTestCase):

    def test_periodic_kernel(self):
        domain = TorusDomain(8, 8)
        self.assertEqual(analytic_spectrum(domain, cutoff=1), [(0.0, 2)])

    def test_antiperiodic_minimum(self):
        domain = TorusDomain(8, 8, spin_structure=('antiperiodic', 'antiperiodic'))
        lowest = analytic_spectrum(domain, cutoff=1)
        self.assertEqual([mult for _, mult in lowest], [4, 4])
        assert_allclose([value for value, _ in lowest], [-1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_symmetric_about_zero(self):
        domain = TorusDomain(8, 6, L1=3.0, spin_structure=('antiperiodic', 'periodic'))
        values = expand_spectrum(analytic_spectrum(domain))
        assert_allclose(np.sort(-values), values, atol=1e-12)
        self.assertEqual(values.size, 2 * 8 * 6)


class NormTests(SimpleTestCase):

    def test_constant_unit_spinor(self):
        domain = TorusDomain(8, 8)
        psi = np.broadcast_to([1.0, 0.0], (8, 8, 2))
        self.assertAlmostEqual(l2_inner(domain, psi, psi).real, (2 * np.pi) ** 2, places=12)
        self.assertEqual(l2_inner(domain, psi, psi).imag, 0.0)

    def test_w1p_of_plane_wave(self):
        domain = TorusDomain(8, 8)
        p = 1.5
        for k in [(0, 0), (1, 0), (2, 3)]:
            psi = SpinorField.plane_wave(domain, k, [1.0, 0.0])
            expected = domain.volume ** (1 / p) * (1.0 + np.hypot(*k))
            self.assertAlmostEqual(psi.w1p_norm(p) / expected, 1.0, places=10)

    def test_w1p_exponent_range(self):
        domain = TorusDomain(4, 4)
        with self.assertRaises(ValueError):
            w1p_norm(domain, np.zeros((4, 4, 2)), p=1.0)
