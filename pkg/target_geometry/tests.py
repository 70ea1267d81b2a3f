import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from lab.exceptions import ConfigError, CutLocus, OutsideTube, StructureUnavailable, TangencyViolation

from .points import TangentVector, TargetPoint
from .targets import TARGET_REGISTRY, CliffordTorus, UnitSphere, build_target


def random_sphere_points(rng, count, q=3):
    p = rng.standard_normal((count, q))
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def random_torus_points(rng, target, count):
    theta = rng.uniform(-np.pi, np.pi, size=(count, 2))
    return target.point_at(theta)


def tangent_sample(rng, target, p):
    X = rng.standard_normal(p.shape)
    return np.einsum('...ab,...b->...a', target.tangential_projector(p), X)


def central_difference(func, z, h=1e-5):
    """Derivative of func at z along every ambient axis, stacked last."""
    columns = []
    for b in range(z.shape[-1]):
        step = np.zeros(z.shape[-1])
        step[b] = h
        columns.append((func(z + step) - func(z - step)) / (2 * h))
    return np.stack(columns, axis=-1)


class UnitSphereProjectionTests(SimpleTestCase):

    def setUp(self):
        self.target = UnitSphere(3)
        self.rng = np.random.default_rng(7)

    def test_radial_projection(self):
        assert_allclose(self.target.project([0.0, 0.0, 2.0]), [0.0, 0.0, 1.0])

    def test_focal_point_is_outside_tube(self):
        with self.assertRaises(OutsideTube):
            self.target.project(np.zeros(3))

    def test_tube_check_is_separate_from_projection(self):
        with self.assertRaises(OutsideTube):
            self.target.check_tube(np.array([0.0, 0.0, 2.0]))

    def test_projection_is_idempotent_on_tube(self):
        p = random_sphere_points(self.rng, 200)
        z = p * self.rng.uniform(0.65, 1.35, size=(200, 1))
        once = self.target.project(z)
        assert_allclose(self.target.project(once), once, atol=1e-12)

    def test_jacobian_at_pole(self):
        assert_allclose(self.target.proj_jacobian([0.0, 0.0, 1.0]), np.diag([1.0, 1.0, 0.0]))

    def test_jacobian_matches_finite_differences(self):
        for z in random_sphere_points(self.rng, 10) * 1.2:
            fd = central_difference(self.target._project, z)
            assert_allclose(self.target.proj_jacobian(z), fd, atol=1e-7)

    def test_hessian_matches_finite_differences(self):
        for z in random_sphere_points(self.rng, 10) * 0.9:
            fd = central_difference(self.target._jacobian, z)
            assert_allclose(self.target.proj_hessian(z), fd, atol=1e-6)

    def test_hessian_is_symmetric(self):
        H = self.target.proj_hessian(random_sphere_points(self.rng, 20) * 1.1)
        assert_allclose(H, np.swapaxes(H, -1, -2), atol=0)

    def test_second_fundamental_form(self):
        p = np.array([0.0, 0.0, 1.0])
        X = np.array([1.0, 0.0, 0.0])
        assert_allclose(self.target.second_fundamental_form(p, X, X), [0.0, 0.0, -1.0], atol=1e-15)

    def test_jacobian_is_projector_on_manifold(self):
        P = self.target.proj_jacobian(random_sphere_points(self.rng, 20))
        assert_allclose(P @ P, P, atol=1e-14)


class UnitSphereGeodesicTests(SimpleTestCase):

    def setUp(self):
        self.target = UnitSphere(3)
        self.rng = np.random.default_rng(11)

    def test_slerp_midpoint(self):
        mid = self.target.geodesic([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 0.5)
        assert_allclose(mid, [1 / np.sqrt(2), 1 / np.sqrt(2), 0.0], atol=1e-15)

    def test_endpoints(self):
        p, q = random_sphere_points(self.rng, 2)
        assert_allclose(self.target.geodesic(p, q, 0.0), p, atol=1e-14)
        assert_allclose(self.target.geodesic(p, q, 1.0), q, atol=1e-14)

    def test_coincident_points(self):
        p = random_sphere_points(self.rng, 1)[0]
        assert_allclose(self.target.geodesic(p, p, 0.3), p)
        assert_allclose(self.target.log_map(p, p), np.zeros(3))

    def test_antipodal_pair_hits_cut_locus(self):
        p = np.array([0.0, 0.0, 1.0])
        with self.assertRaises(CutLocus):
            self.target.geodesic(p, -p, 0.5)

    def test_distance(self):
        self.assertAlmostEqual(
            float(self.target.geodesic_distance([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])), np.pi / 2, places=14
        )

    def test_log_map_length_is_distance(self):
        p = random_sphere_points(self.rng, 50)
        q = random_sphere_points(self.rng, 50)
        v = self.target.log_map(p, q)
        assert_allclose(np.linalg.norm(v, axis=-1), self.target.geodesic_distance(p, q), atol=1e-12)

    def test_distance_bound_on_near_pairs(self):
        p = random_sphere_points(self.rng, 10_000)
        q = self.target.project(p + 0.2 * self.rng.uniform(-1, 1, size=p.shape) / np.sqrt(3))
        near = np.linalg.norm(p - q, axis=-1) < self.target.tube_radius
        d = self.target.geodesic_distance(p[near], q[near])
        self.assertTrue(np.all(d <= self.target.distance_bound(p[near], q[near])))


class UnitSphereTransportTests(SimpleTestCase):

    def setUp(self):
        self.target = UnitSphere(3)
        self.rng = np.random.default_rng(13)

    def test_rotation_in_geodesic_plane(self):
        out = self.target.parallel_transport_tangent([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0])
        assert_allclose(out, [0.0, 0.0, 1.0], atol=1e-15)

    def test_isometry_and_round_trip(self):
        p = random_sphere_points(self.rng, 100)
        q = random_sphere_points(self.rng, 100)
        X = tangent_sample(self.rng, self.target, p)
        Y = tangent_sample(self.rng, self.target, p)
        TX = self.target.parallel_transport_tangent(p, q, X)
        TY = self.target.parallel_transport_tangent(p, q, Y)
        assert_allclose(np.einsum('ka,ka->k', TX, TY), np.einsum('ka,ka->k', X, Y), atol=1e-10)
        assert_allclose(self.target.parallel_transport_tangent(q, p, TX), X, atol=1e-9)
        self.assertLess(self.target.tangency_residual(q, TX), 1e-12)

    def test_identity_on_coincident_points(self):
        p = random_sphere_points(self.rng, 5)
        X = tangent_sample(self.rng, self.target, p)
        assert_allclose(self.target.parallel_transport_tangent(p, p, X), X, atol=1e-15)


class CurvatureTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(17)

    def test_sphere_constant_curvature(self):
        target = UnitSphere(3)
        p = np.array([0.0, 0.0, 1.0])
        X, Y = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
        assert_allclose(target.riemann_curvature(p, X, Y, Y), X)
        assert_allclose(target.riemann_curvature(p, X, X, Y), np.zeros(3))

    def test_antisymmetry_and_bianchi(self):
        target = UnitSphere(3)
        p = random_sphere_points(self.rng, 30)
        X, Y, Z = (tangent_sample(self.rng, target, p) for _ in range(3))
        R = target.riemann_curvature
        assert_allclose(R(p, X, Y, Z), -R(p, Y, X, Z), atol=1e-14)
        assert_allclose(R(p, X, Y, Z) + R(p, Y, Z, X) + R(p, Z, X, Y), 0.0, atol=1e-12)

    def test_torus_is_flat(self):
        target = CliffordTorus(1.0, 0.5)
        p = random_torus_points(self.rng, target, 10)
        X, Y, Z = (tangent_sample(self.rng, target, p) for _ in range(3))
        assert_allclose(target.riemann_curvature(p, X, Y, Z), 0.0)


class CliffordTorusTests(SimpleTestCase):

    def setUp(self):
        self.target = CliffordTorus(1.0, 1.0)
        self.rng = np.random.default_rng(19)

    def test_per_plane_projection(self):
        assert_allclose(self.target.project([1.1, 0.0, 0.9, 0.0]), [1.0, 0.0, 1.0, 0.0])

    def test_jacobian_is_block_projector(self):
        expected = np.diag([0.0, 1.0, 1.0, 0.0])
        assert_allclose(self.target.proj_jacobian([1.0, 0.0, 0.0, 1.0]), expected, atol=1e-15)

    def test_derivatives_match_finite_differences(self):
        target = CliffordTorus(1.0, 0.7)
        z = random_torus_points(self.rng, target, 6) * 1.05
        for point in z:
            assert_allclose(target.proj_jacobian(point), central_difference(target._project, point), atol=1e-7)
            assert_allclose(target.proj_hessian(point), central_difference(target._jacobian, point), atol=1e-6)

    def test_projection_is_idempotent_on_tube(self):
        p = random_torus_points(self.rng, self.target, 100)
        planes = p.reshape(100, 2, 2) * self.rng.uniform(0.8, 1.2, size=(100, 2, 1))
        once = self.target.project(planes.reshape(100, 4))
        assert_allclose(self.target.project(once), once, atol=1e-12)

    def test_transport_is_identity_in_product_frame(self):
        p = random_torus_points(self.rng, self.target, 20)
        q = random_torus_points(self.rng, self.target, 20)
        T = self.target.transport_matrix(p, q)
        frame_p = self.target.tangent_frame(p)
        frame_q = self.target.tangent_frame(q)
        assert_allclose(T @ frame_p, frame_q, atol=1e-14)

    def test_kaehler_structures(self):
        p = random_torus_points(self.rng, self.target, 10)
        frame = self.target.tangent_frame(p)
        t1, t2 = frame[..., 0], frame[..., 1]
        assert_allclose(self.target.complex_structure(p, t1), t2, atol=1e-15)
        assert_allclose(self.target.complex_structure(p, t2), -t1, atol=1e-15)
        assert_allclose(self.target.real_structure(p, t1), t1, atol=1e-15)
        assert_allclose(self.target.real_structure(p, t2), -t2, atol=1e-15)
        X = tangent_sample(self.rng, self.target, p)
        i, j = self.target.complex_structure, self.target.real_structure
        assert_allclose(i(p, i(p, X)), -X, atol=1e-14)
        assert_allclose(j(p, j(p, X)), X, atol=1e-14)
        assert_allclose(j(p, i(p, X)), -i(p, j(p, X)), atol=1e-14)

    def test_real_structure_is_parallel(self):
        p = random_torus_points(self.rng, self.target, 50)
        q = random_torus_points(self.rng, self.target, 50)
        X = tangent_sample(self.rng, self.target, p)
        moved_then_reflected = self.target.real_structure(q, self.target.parallel_transport_tangent(p, q, X))
        reflected_then_moved = self.target.parallel_transport_tangent(p, q, self.target.real_structure(p, X))
        assert_allclose(moved_then_reflected, reflected_then_moved, atol=1e-10)

    def test_distance_bound_on_near_pairs(self):
        target = CliffordTorus(1.0, 1.5)
        p = random_torus_points(self.rng, target, 10_000)
        q = target.project(p + 0.12 * self.rng.uniform(-1, 1, size=p.shape))
        near = np.linalg.norm(p - q, axis=-1) < target.tube_radius
        d = target.geodesic_distance(p[near], q[near])
        self.assertTrue(np.all(d <= target.distance_bound(p[near], q[near])))


class SphereKaehlerTests(SimpleTestCase):

    def test_cross_product_structure(self):
        target = UnitSphere(3)
        rng = np.random.default_rng(23)
        p = random_sphere_points(rng, 20)
        X = tangent_sample(rng, target, p)
        iX = target.complex_structure(p, X)
        assert_allclose(iX, np.cross(p, X), atol=1e-15)
        assert_allclose(target.complex_structure(p, iX), -X, atol=1e-14)
        assert_allclose(np.linalg.norm(iX, axis=-1), np.linalg.norm(X, axis=-1), atol=1e-14)

    def test_frame_is_adapted_to_complex_structure(self):
        target = UnitSphere(3)
        p = random_sphere_points(np.random.default_rng(29), 20)
        frame = target.tangent_frame(p)
        assert_allclose(frame[..., 1], target.complex_structure(p, frame[..., 0]), atol=1e-14)
        assert_allclose(np.swapaxes(frame, -1, -2) @ frame, np.broadcast_to(np.eye(2), (20, 2, 2)), atol=1e-14)

    def test_real_structure_is_unavailable(self):
        with self.assertRaises(StructureUnavailable):
            UnitSphere(3).real_structure([0.0, 0.0, 1.0], [1.0, 0.0, 0.0])

    def test_odd_sphere_is_not_kaehler(self):
        target = UnitSphere(4)
        self.assertFalse(target.is_kaehler)
        with self.assertRaises(StructureUnavailable):
            target.complex_structure_matrix([0.0, 0.0, 0.0, 1.0])
        frame = target.tangent_frame(random_sphere_points(np.random.default_rng(31), 5, q=4))
        self.assertEqual(frame.shape, (5, 4, 3))


class TargetRegistryTests(SimpleTestCase):

    def test_sampling_for_every_registered_target(self):
        rng = np.random.default_rng(29)
        for target_class in TARGET_REGISTRY.values():
            target = target_class()
            p = target.sample_points(rng, 200)
            self.assertLessEqual(target.on_manifold_residual(p), 1e-12)
            z = target.jitter(rng, p, fraction=0.5)
            self.assertLessEqual(np.max(target.distance_to_target(z)), 0.5 * target.tube_radius)
            assert_allclose(target.proj_jacobian(z), central_difference(target.project, z), atol=1e-7)

    def test_build_known_targets(self):
        self.assertIsInstance(build_target({'target': 'sphere', 'q': 3}), UnitSphere)
        torus = build_target({'target': 'clifford_torus', 'r1': 1.0, 'r2': 2.0})
        self.assertAlmostEqual(torus.tube_radius, 0.3)
        self.assertLess(torus.tube_radius * torus.weingarten_bound, 1.0)

    def test_unknown_target(self):
        with self.assertRaises(ConfigError):
            build_target({'target': 'hyperboloid'})

    def test_invalid_parameters(self):
        with self.assertRaises(ConfigError):
            build_target({'target': 'sphere', 'q': 7})


class PointTypeTests(SimpleTestCase):

    def test_point_residual_is_checked(self):
        target = UnitSphere(3)
        TargetPoint(target, [0.0, 0.0, 1.0])
        with self.assertRaises(OutsideTube):
            TargetPoint(target, [0.0, 0.0, 1.01])

    def test_tangent_vector_is_checked(self):
        base = TargetPoint(UnitSphere(3), [0.0, 0.0, 1.0])
        TangentVector(base, [1.0, 0.0, 0.0])
        with self.assertRaises(TangencyViolation):
            TangentVector(base, [0.0, 0.0, 1.0])

    def test_transport_and_structures_through_types(self):
        torus = CliffordTorus()
        p = TargetPoint.project(torus, [1.1, 0.0, 0.9, 0.0])
        q = TargetPoint(torus, torus.point_at(np.array([0.5, -0.3])))
        X = TangentVector(p, [0.0, 1.0, 0.0, 0.0])
        moved = X.transport_to(q)
        self.assertAlmostEqual(moved.norm(), 1.0, places=14)
        assert_allclose(X.rotate().rotate().vec, -X.vec, atol=1e-15)
        assert_allclose(p.geodesic_to(q, 1.0).coords, q.coords, atol=1e-14)
        self.assertAlmostEqual(p.log(q).norm(), p.distance(q), places=13)
