from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from tkindex import bundlegeom, cech
from tkindex.bundlegeom import (
    NORTH,
    SOUTH,
    HermitianLineBundle,
    InvariantForm,
    MeshCircleMap,
    build_circle_bundle,
    build_primitive_bundle,
    catalog_mesh,
    check_primitivity,
    curvature_report,
    curvature_study,
    holonomy,
)
from tkindex.cech import ManifoldTag
from tkindex.forms import Cycle, DiscreteForm, circle_cycle, random_trigonometric_form
from tkindex.utils import StructuralError, ValidationError, centered

from ..testutils import MeshTestMixin, PrimitiveBundleTestMixin


class TestPatches(MeshTestMixin, SimpleTestCase):
    def test_patches_cover_every_cell(self):
        for mesh in (self.sphere, self.sphere.refined(), self.s1xs2):
            north, south = bundlegeom.sphere_patches(mesh, bundlegeom.find_factor(mesh, "sphere"))
            for degree in range(mesh.dimension + 1):
                with self.subTest(mesh=mesh, degree=degree):
                    self.assertTrue((north.masks[degree] | south.masks[degree]).all())
                    self.assertTrue((north.masks[degree] & south.masks[degree]).any())

    def test_north_patch_avoids_the_south_pole(self):
        mesh = self.sphere.refined()
        north, _south = bundlegeom.sphere_patches(mesh, 0)
        index = mesh.index(0)
        self.assertFalse(north.masks[0][index[((1, 1, 0), ())]])
        self.assertTrue(north.masks[0][index[((1, 1, 2), ())]])


class TestHermitianLineBundle(MeshTestMixin, SimpleTestCase):
    def test_monopole_connection_is_consistent(self):
        for degree in (1, -2, 3):
            for mesh in (self.sphere, self.sphere.refined(), self.s1xs2):
                with self.subTest(degree=degree, mesh=mesh):
                    L = HermitianLineBundle(mesh, degree)
                    self.assertAlmostEqual(L.chern_number(), degree, places=10)
                    self.assertLess(L.curvature_residual(), 1e-12)
                    self.assertLess(L.transition_residual(), 1e-12)

    def test_trivial_bundle_has_one_patch(self):
        L = HermitianLineBundle(self.torus)
        self.assertEqual(len(L.patches), 1)
        self.assertEqual(L.chern_number(), 0.0)
        self.assertEqual(L.cover.vertex_count, 1)

    def test_degree_needs_a_sphere(self):
        with self.assertRaisesMessage(ValidationError, "needs a sphere factor"):
            HermitianLineBundle(self.torus, 1)

    def test_refined_keeps_the_degree(self):
        L = HermitianLineBundle(self.sphere, 2).refined()
        self.assertEqual(L.base.resolution, 1)
        self.assertAlmostEqual(L.chern_number(), 2.0, places=10)

    def test_unknown_patch(self):
        with self.assertRaises(StructuralError):
            HermitianLineBundle(self.sphere, 1).patch("E")


class TestHolonomy(MeshTestMixin, SimpleTestCase):
    def test_trivial_connection(self):
        L = HermitianLineBundle(self.torus)
        for factor in (0, 1):
            self.assertEqual(holonomy(L, circle_cycle(self.torus, factor)), 0.0)

    def test_equator_holonomy_is_half_the_degree(self):
        mesh = self.sphere.refined()
        equator = bundlegeom.equator_cycle(mesh, 0)
        for degree in (1, 2, 3, -1):
            with self.subTest(degree=degree):
                L = HermitianLineBundle(mesh, degree)
                value = holonomy(L, equator)
                self.assertLess(abs(float(centered(value - Fraction(degree, 2)))), 1e-10)

    def test_upper_cap_flux(self):
        mesh = self.sphere.refined()
        L = HermitianLineBundle(mesh, 1)
        cap = bundlegeom.upper_cap_chain(mesh, 0)
        self.assertAlmostEqual(float(cap @ L.curvature.component(2)), 0.5, places=12)

    def test_odd_lattice_has_no_equator(self):
        with self.assertRaises(ValidationError):
            bundlegeom.equator_cycle(self.sphere, 0)

    def test_stokes_on_bottom_squares(self):
        """Loops that switch charts around the south pole."""
        mesh = self.sphere.refined()
        L = HermitianLineBundle(mesh, 1)
        for r, (anchor, dirs) in enumerate(mesh.cells(2)):
            if dirs == (0, 1) and anchor[2] == 0:
                chain = np.zeros(mesh.count(2))
                chain[r] = 1
                with self.subTest(anchor=anchor):
                    self.assertLess(bundlegeom.stokes_defect(L, chain), 1e-10)

    def test_stokes_study_sits_at_the_floor(self):
        verdict = bundlegeom.stokes_study(1, [0, 1, 2])
        self.assertTrue(verdict["passed"])
        self.assertTrue(verdict["at_floor"])

    def test_open_chain_rejected(self):
        L = HermitianLineBundle(self.sphere, 1)
        chain = np.zeros(self.sphere.count(1))
        chain[0] = 1
        with self.assertRaisesMessage(ValidationError, "not closed"):
            holonomy(L, chain)

    def test_holonomy_of_boundaries_accepts_cycles(self):
        L = HermitianLineBundle(self.sphere, 1)
        chain = np.zeros(self.sphere.count(2))
        chain[2] = 1
        cycle = Cycle.boundary_of_chain(self.sphere, 2, chain)
        expected = float(L.curvature.component(2)[2]) % 1.0
        self.assertLess(abs(float(centered(holonomy(L, cycle) - expected))), 1e-10)


class TestCircleBundle(MeshTestMixin, SimpleTestCase):
    def test_fiber_points_minimum(self):
        L = HermitianLineBundle(self.sphere, 1)
        with self.assertRaisesMessage(ValidationError, "at least 8 points, got 4"):
            build_circle_bundle(L, 4)

    def test_trivial_bundle_connection_is_dtheta(self):
        t = build_circle_bundle(HermitianLineBundle(self.torus), 8)
        self.assertEqual(list(t.connection_form.components), [(1,)])
        self.assertEqual(t.connection_form.d().norm(), 0.0)
        self.assertEqual(t.chern_number(), 0.0)

    def test_chern_number_from_dgamma(self):
        t = build_circle_bundle(HermitianLineBundle(self.sphere, 1), 8)
        self.assertAlmostEqual(t.chern_number(), 1.0, places=10)

    def test_chart_change_round_trip(self):
        L = HermitianLineBundle(self.sphere.refined(), 1)
        t = build_circle_bundle(L, 16)
        overlap = np.flatnonzero(~np.isnan(L.transition))
        vertex = int(overlap[0])
        theta = Fraction(3, 16)
        there = t.change_chart(vertex, theta, SOUTH, NORTH)
        self.assertEqual(t.change_chart(vertex, there, NORTH, SOUTH), theta)
        self.assertEqual(set(t.charts_at(vertex)), {NORTH, SOUTH})

    def test_chart_change_outside_overlap(self):
        mesh = self.sphere.refined()
        t = build_circle_bundle(HermitianLineBundle(mesh, 1), 8)
        pole = mesh.index(0)[((1, 1, 2), ())]
        with self.assertRaises(ValidationError):
            t.change_chart(pole, Fraction(0), NORTH, SOUTH)


class TestShiftCharacter(MeshTestMixin, SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.total = build_circle_bundle(HermitianLineBundle(cls.sphere.refined(), 1), 16)
        cls.s = bundlegeom.shift_character(cls.total)

    def test_diagonal_is_zero(self):
        z = (0, NORTH, Fraction(5, 16))
        self.assertEqual(self.s(z, z), 0)

    def test_character_identity_is_exact(self):
        rng = self.rng(11)
        overlap = np.flatnonzero(~np.isnan(self.total.base_bundle.transition))
        for _ in range(50):
            vertex = int(rng.choice(overlap))
            points = [
                (vertex, [NORTH, SOUTH][int(rng.integers(2))], Fraction(int(rng.integers(16)), 16))
                for _j in range(3)
            ]
            z1, z2, z3 = points
            self.assertEqual(centered(self.s(z1, z2) + self.s(z2, z3) - self.s(z1, z3)), 0)

    def test_points_in_different_fibers(self):
        with self.assertRaises(ValidationError):
            self.s((0, NORTH, Fraction(0)), (1, NORTH, Fraction(0)))

    def test_dlog_matches_gamma_difference(self):
        self.assertEqual(self.s.dlog_residual(samples=40), 0)
        self.assertEqual(sorted(self.s.dlog().components), [(1,), (2,)])


class TestInvariantForms(MeshTestMixin, SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.L = HermitianLineBundle(cls.s1xs2, 1)
        cls.total = build_circle_bundle(cls.L, 8)

    def test_d_of_gamma_is_minus_curvature(self):
        dgamma = self.total.gamma(1, 1).d()
        self.assertFormsAlmostEqual(dgamma.component(()), -1 * self.L.curvature, 1e-15)

    def test_d_squares_to_zero(self):
        a = random_trigonometric_form(self.s1xs2, [0, 1], self.rng(12))
        form = InvariantForm(self.s1xs2, 2, {(1,): a, (1, 2): a, (): a}, self.L.curvature)
        self.assertLess(form.d().d().norm(), 1e-12)

    def test_invariant_forms_have_no_lie_derivative(self):
        a = random_trigonometric_form(self.s1xs2, [1], self.rng(13))
        form = InvariantForm(self.s1xs2, 2, {(1,): a, (2,): a}, self.L.curvature)
        self.assertLess(form.lie(1).norm(), 1e-12)

    def test_gammas_anticommute(self):
        g1, g2 = self.total.gamma(1, 2), self.total.gamma(2, 2)
        total = g1.wedge(g2) + g2.wedge(g1)
        self.assertEqual(total.norm(), 0.0)

    def test_relabel_sign(self):
        g12 = self.total.gamma(1, 2).wedge(self.total.gamma(2, 2))
        swapped = g12.relabel({1: 2, 2: 1}, 2)
        self.assertEqual(swapped.component((1, 2)).norm(), 1.0)
        self.assertEqual((swapped + g12).norm(), 0.0)

    def test_fiber_integral_of_gamma(self):
        one = self.total.gamma(1, 1).fiber_integral(1).component(())
        np.testing.assert_array_equal(one.component(0), np.ones(self.s1xs2.count(0)))

    def test_bad_generator_index(self):
        with self.assertRaises(StructuralError):
            InvariantForm(self.s1xs2, 1, {(2,): DiscreteForm.constant(self.s1xs2)}, self.L.curvature)


class TestMeshCircleMap(MeshTestMixin, SimpleTestCase):
    def test_lift_jumps_across_the_cut(self):
        u = MeshCircleMap(self.s1xs2, 2)
        self.assertAlmostEqual(u.winding_number(), 2.0)
        self.assertEqual(u.cut.component(1).sum(), self.s1xs2.count(0) / 8)

    def test_rebranching_keeps_the_derivative(self):
        u = MeshCircleMap(self.circle, 1)
        v = u.rebranched(1)
        self.assertFormsAlmostEqual(v.lift - u.lift, DiscreteForm.constant(self.circle), 1e-15)
        self.assertFormsAlmostEqual(v.lift.d(), u.lift.d(), 1e-15)

    def test_winding_needs_a_circle(self):
        with self.assertRaises(ValidationError):
            MeshCircleMap(self.sphere, 1)

    def test_from_cech_generator(self):
        nerve = cech.nerve_catalog(ManifoldTag.CIRCLE)
        u = cech.CircleValuedMap.from_transitions(
            nerve, cech.circle_generator(nerve).scaled(3)
        )
        self.assertEqual(MeshCircleMap.from_cech(self.circle, u).winding, 3)


class TestPrimitiveBundle(PrimitiveBundleTestMixin, SimpleTestCase):
    def test_constant_map_gives_flat_bundle(self):
        J = self.primitive_bundle(winding=0)
        self.assertEqual(J.connection_1form.norm(), 0.0)
        self.assertEqual(J.curvature().norm(), 0.0)
        report = curvature_report(J)
        self.assertEqual(report["mu"].norm(), 0.0)
        self.assertLess(report["checks"]["curvature_split"], 1e-12)

    def test_generator_primitivity(self):
        report = check_primitivity(self.primitive_bundle(), seed=3)
        self.assertEqual(report["transition_defect"], 0)
        self.assertEqual(report["associativity_defect"], 0)
        self.assertLessEqual(report["connection_defect"], 1e-9)

    def test_generator_curvature(self):
        checks = curvature_report(self.primitive_bundle())["checks"]
        self.assertLess(checks["curvature_split"], 1e-9)
        self.assertLess(checks["dmu_twist"], 1e-4)
        self.assertAlmostEqual(checks["fiber_product_period"], 1.0, places=9)
        self.assertLess(checks["fiber_product_period_defect"], 1e-6)

    def test_curvature_is_alpha_wedge_gamma_difference(self):
        J = self.primitive_bundle(winding=2)
        F = J.curvature()
        self.assertFormsAlmostEqual(F.component((1,)), -1 * J.u.alpha_bar, 1e-12)
        self.assertFormsAlmostEqual(F.component((2,)), J.u.alpha_bar, 1e-12)

    def test_rebranching_changes_the_connection_by_dlog_s(self):
        J = self.primitive_bundle()
        K = J.rebranched(1)
        difference = K.connection_1form - J.connection_1form
        self.assertFormsAlmostEqual(difference.component((1,)), DiscreteForm.constant(self.s1xs2), 1e-14)
        self.assertLess((K.curvature() - J.curvature()).norm(), 1e-12)

    def test_torus_base(self):
        J = self.primitive_bundle(mesh=self.torus, degree=0)
        self.assertEqual(check_primitivity(J)["transition_defect"], 0)
        checks = curvature_report(J)["checks"]
        self.assertLess(checks["dmu_twist"], 1e-12)

    def test_map_on_another_mesh(self):
        L = HermitianLineBundle(self.s1xs2, 1)
        t = build_circle_bundle(L, 8)
        with self.assertRaises(ValidationError):
            build_primitive_bundle(MeshCircleMap(self.circle, 1), t)

    def test_curvature_study_over_three_resolutions(self):
        bundles = [
            self.primitive_bundle(
                mesh=catalog_mesh(ManifoldTag.CIRCLE_TIMES_SPHERE2, r),
                fiber_points=self.fiber_points * 2 ** r,
            )
            for r in (0, 1, 2)
        ]
        study = curvature_study(bundles, min_slope=1.5, floor=1e-9)
        self.assertEqual(study["steps"], [2.0, 1.0, 0.5])
        self.assertEqual(len(study["checks"]), 3)
        for name, verdict in study["verdicts"].items():
            with self.subTest(residual=name):
                self.assertTrue(verdict["passed"], verdict)
                self.assertTrue(verdict["at_floor"] or verdict["slope"] >= 1.5)
