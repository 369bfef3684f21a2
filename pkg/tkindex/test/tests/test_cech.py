from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from tkindex import cech
from tkindex.cech import CechCochain, CoefficientGroup, ManifoldTag
from tkindex.utils import CoefficientError, StructuralError, ValidationError


class TestNerves(SimpleTestCase):
    def test_catalog_nerves_are_closed_under_faces(self):
        for tag in ManifoldTag:
            with self.subTest(tag=tag):
                nerve = cech.nerve_catalog(tag)
                self.assertEqual(nerve.manifold_tag, tag)

    def test_product_dimension(self):
        self.assertEqual(cech.nerve_catalog(ManifoldTag.TORUS2).dimension, 2)
        self.assertEqual(
            cech.nerve_catalog(ManifoldTag.CIRCLE_TIMES_SPHERE2).dimension, 3
        )

    def test_missing_face_rejected(self):
        with self.assertRaisesMessage(ValidationError, "Face (1, 2) is not listed"):
            cech.Nerve(3, {1: [(0, 1), (0, 2)], 2: [(0, 1, 2)]})

    def test_unsorted_simplex_rejected(self):
        with self.assertRaises(ValidationError):
            cech.Nerve(2, {1: [(1, 0)]})


class TestCoboundary(SimpleTestCase):
    def setUp(self):
        self.circle = cech.nerve_catalog(ManifoldTag.CIRCLE)
        self.sphere = cech.nerve_catalog(ManifoldTag.SPHERE2)

    def test_zero_maps_to_zero(self):
        zero = CechCochain.zero(self.sphere, 1)
        self.assertTrue(cech.coboundary(zero, self.sphere).is_zero())

    def test_zero_cochain_on_circle(self):
        """(δf)(j, k) = f_k - f_j"""
        f = CechCochain(0, CoefficientGroup.INTEGER, {(0,): 5, (1,): 2, (2,): -1})
        df = cech.coboundary(f, self.circle)
        self.assertEqual(df.values, {(0, 1): -3, (1, 2): -3, (0, 2): -6})

    def test_coboundary_squares_to_zero(self):
        for tag in (ManifoldTag.SPHERE2, ManifoldTag.TORUS2, ManifoldTag.CIRCLE_TIMES_SPHERE2):
            nerve = cech.nerve_catalog(tag)
            for coefficients, values in (
                (CoefficientGroup.INTEGER, lambda i: i * i - 3 * i),
                (CoefficientGroup.REAL, lambda i: Fraction(i, 7)),
                (CoefficientGroup.CIRCLE, lambda i: Fraction(3 * i + 1, 11)),
            ):
                with self.subTest(tag=tag, coefficients=coefficients):
                    c = CechCochain(
                        0,
                        coefficients,
                        {s: values(i) for i, s in enumerate(nerve.simplices_of(0))},
                    )
                    twice = cech.coboundary(cech.coboundary(c, nerve), nerve)
                    self.assertTrue(twice.is_zero())

    def test_missing_degree_is_structural(self):
        c = CechCochain.zero(self.circle, 1)
        with self.assertRaises(StructuralError):
            cech.coboundary(c, self.circle)


class TestSmithNormalForm(SimpleTestCase):
    def test_factorization(self):
        matrix = [[2, 4, 4], [-6, 6, 12], [10, -4, -16]]
        form = cech.smith_normal_form(matrix)
        self.assertEqual(form.diagonal, [2, 6, 12])
        product = form.left.dot(np.array(matrix, dtype=object)).dot(form.right)
        for i in range(3):
            for j in range(3):
                self.assertEqual(product[i, j], form.diagonal[i] if i == j else 0)
        identity = form.left.dot(form.left_inverse)
        for i in range(3):
            for j in range(3):
                self.assertEqual(identity[i, j], int(i == j))

    def test_invariant_factors_divide(self):
        form = cech.smith_normal_form([[4, 0], [0, 6]])
        self.assertEqual(form.diagonal, [2, 12])


class TestCohomology(SimpleTestCase):
    def test_point(self):
        point = cech.nerve_catalog(ManifoldTag.POINT)
        self.assertEqual(cech.cohomology(point, 0), cech.CohomologyGroup(1))
        self.assertEqual(cech.cohomology(point, 1), cech.CohomologyGroup(0))

    def test_circle(self):
        circle = cech.nerve_catalog(ManifoldTag.CIRCLE)
        self.assertEqual(cech.cohomology(circle, 1).free_rank, 1)

    def test_sphere(self):
        sphere = cech.nerve_catalog(ManifoldTag.SPHERE2)
        self.assertEqual(cech.cohomology(sphere, 1), cech.CohomologyGroup(0))
        self.assertEqual(cech.cohomology(sphere, 2), cech.CohomologyGroup(1))

    def test_circle_times_sphere(self):
        nerve = cech.nerve_catalog(ManifoldTag.CIRCLE_TIMES_SPHERE2)
        ranks = [cech.cohomology(nerve, k).free_rank for k in range(4)]
        self.assertEqual(ranks, [1, 1, 1, 1])
        self.assertEqual(
            cech.cohomology(nerve, 2, CoefficientGroup.REAL).free_rank, 1
        )

    def test_torus(self):
        nerve = cech.nerve_catalog(ManifoldTag.TORUS2)
        ranks = [cech.cohomology(nerve, k).free_rank for k in range(3)]
        self.assertEqual(ranks, [1, 2, 1])

    def test_empty_nerve(self):
        with self.assertRaises(StructuralError):
            cech.cohomology(cech.Nerve(0, {}), 0)

    def test_filled_triangle(self):
        nerve = cech.Nerve(3, {1: [(0, 1), (0, 2), (1, 2)], 2: [(0, 1, 2)]})
        self.assertEqual(cech.cohomology(nerve, 1), cech.CohomologyGroup(0))
        self.assertEqual(cech.cohomology(nerve, 2), cech.CohomologyGroup(0))


class TestCupAndClasses(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.nerve = cech.nerve_catalog(ManifoldTag.CIRCLE_TIMES_SPHERE2)
        cls.a = cech.pullback(
            cech.circle_generator(cls.nerve.factors[0]), cls.nerve, 0
        )
        cls.b = cech.pullback(
            cech.sphere_generator(cls.nerve.factors[1]), cls.nerve, 1
        )

    def test_generator_product(self):
        z = cech.cup(self.a, self.b, self.nerve)
        self.assertTrue(cech.is_cocycle(self.a, self.nerve))
        self.assertTrue(cech.is_cocycle(self.b, self.nerve))
        self.assertEqual(tuple(map(abs, cech.class_coordinates(z, self.nerve))), (1,))

    def test_linearity(self):
        z = cech.cup(self.a, self.b, self.nerve)
        (one,) = cech.class_coordinates(z, self.nerve)
        self.assertEqual(cech.class_coordinates(z.scaled(2), self.nerve), (2 * one,))

    def test_coboundary_has_zero_class(self):
        g = CechCochain(
            2,
            CoefficientGroup.INTEGER,
            {s: i % 3 - 1 for i, s in enumerate(self.nerve.simplices_of(2))},
        )
        dg = cech.coboundary(g, self.nerve)
        self.assertEqual(cech.class_coordinates(dg, self.nerve), (0,))

    def test_graded_commutativity_on_torus(self):
        torus = cech.nerve_catalog(ManifoldTag.TORUS2)
        p = cech.pullback(cech.circle_generator(torus.factors[0]), torus, 0)
        q = cech.pullback(cech.circle_generator(torus.factors[1]), torus, 1)
        pq = cech.class_coordinates(cech.cup(p, q, torus), torus)
        qp = cech.class_coordinates(cech.cup(q, p, torus), torus)
        self.assertEqual(pq, tuple(-x for x in qp))
        self.assertEqual(tuple(map(abs, pq)), (1,))

    def test_zero_factor(self):
        zero = CechCochain.zero(self.nerve, 1)
        self.assertTrue(cech.cup(zero, self.b, self.nerve).is_zero())

    def test_incompatible_coefficients(self):
        circle = CechCochain.zero(self.nerve, 1, CoefficientGroup.CIRCLE)
        with self.assertRaises(CoefficientError):
            cech.cup(circle, circle, self.nerve)
        with self.assertRaises(TypeError):
            cech.cup(circle, circle, self.nerve)

    def test_non_cocycle_rejected(self):
        bad = CechCochain.zero(self.nerve, 1)
        bad.values[self.nerve.simplices_of(1)[0]] = 1
        with self.assertRaises(ValidationError):
            cech.class_coordinates(bad, self.nerve)


class TestDixmierDouady(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.data = cech.decomposable_twist_data(
            ManifoldTag.CIRCLE_TIMES_SPHERE2, u_winding=1, bundle_degree=1
        )
        cls.nerve = cls.data["nerve"]

    def test_line_bundle_cocycle_is_cocycle(self):
        c = self.data["c"]
        self.assertTrue(c.sampled)
        self.assertTrue(cech.is_cocycle(c, self.nerve))

    def test_generator_class(self):
        d = cech.dd_cocycle(self.data["u"], self.data["c"], self.nerve)
        delta = cech.bockstein(d, self.nerve)
        expected = cech.cup(self.data["alpha"], self.data["beta"], self.nerve)
        self.assertEqual(
            cech.class_coordinates(delta, self.nerve),
            cech.class_coordinates(expected, self.nerve),
        )
        self.assertEqual(tuple(map(abs, cech.class_coordinates(delta, self.nerve))), (1,))

    def test_pairing_with_fundamental_cycle(self):
        d = cech.dd_cocycle(self.data["u"], self.data["c"], self.nerve)
        delta = cech.bockstein(d, self.nerve)
        (cycle,) = cech.homology_basis(self.nerve, 3)
        pairing = sum(a * b for a, b in zip(delta.vector(self.nerve), cycle))
        self.assertEqual(abs(pairing), 1)

    def test_constant_u_gives_trivial_cocycle(self):
        data = cech.decomposable_twist_data(
            ManifoldTag.CIRCLE_TIMES_SPHERE2, u_winding=0, bundle_degree=1
        )
        d = cech.dd_cocycle(data["u"], data["c"], self.nerve)
        self.assertTrue(d.is_zero())

    def test_trivial_bundle_gives_trivial_cocycle(self):
        data = cech.decomposable_twist_data(
            ManifoldTag.CIRCLE_TIMES_SPHERE2, u_winding=1, bundle_degree=0
        )
        d = cech.dd_cocycle(data["u"], data["c"], self.nerve)
        self.assertTrue(d.is_zero())
        self.assertEqual(
            cech.class_coordinates(cech.bockstein(d, self.nerve), self.nerve), (0,)
        )

    def test_rebranching_keeps_class(self):
        u = self.data["u"].rebranch({0: 2, 5: -1, 7: 3})
        d = cech.dd_cocycle(u, self.data["c"], self.nerve)
        reference = cech.dd_cocycle(self.data["u"], self.data["c"], self.nerve)
        self.assertEqual(
            cech.class_coordinates(cech.bockstein(d, self.nerve), self.nerve),
            cech.class_coordinates(cech.bockstein(reference, self.nerve), self.nerve),
        )

    def test_circle_coboundary_keeps_class(self):
        g = CechCochain(
            0,
            CoefficientGroup.REAL,
            {s: Fraction(i, 5) for i, s in enumerate(self.nerve.simplices_of(0))},
        )
        c = cech.twist_by_coboundary(self.data["c"], g, self.nerve)
        d = cech.dd_cocycle(self.data["u"], c, self.nerve)
        reference = cech.dd_cocycle(self.data["u"], self.data["c"], self.nerve)
        self.assertEqual(
            cech.class_coordinates(cech.bockstein(d, self.nerve), self.nerve),
            cech.class_coordinates(cech.bockstein(reference, self.nerve), self.nerve),
        )

    def test_relifting_keeps_class(self):
        d = cech.dd_cocycle(self.data["u"], self.data["c"], self.nerve)
        shifts = {s: (3 * i) % 5 - 2 for i, s in enumerate(self.nerve.simplices_of(2))}
        relifted = CechCochain(
            2,
            CoefficientGroup.CIRCLE,
            d.values,
            sampled=True,
            lifts={key: lift + shifts[key[0]] for key, lift in d.lifts.items()},
        )
        self.assertEqual(
            cech.class_coordinates(cech.bockstein(relifted, self.nerve), self.nerve),
            cech.class_coordinates(cech.bockstein(d, self.nerve), self.nerve),
        )

    def test_bockstein_needs_lifts(self):
        d = cech.dd_cocycle(self.data["u"], self.data["c"], self.nerve)
        bare = CechCochain(2, CoefficientGroup.CIRCLE, d.values, sampled=True)
        with self.assertRaisesMessage(ValidationError, "needs continuous lifts"):
            cech.bockstein(bare, self.nerve)

    def test_non_cocycle_circle_cochain(self):
        bad = CechCochain(
            1,
            CoefficientGroup.CIRCLE,
            {s: Fraction(1, 3) if s == (0, 1) else 0 for s in self.nerve.simplices_of(1)},
        )
        with self.assertRaisesMessage(ValidationError, "is not a cocycle"):
            cech.dd_cocycle(self.data["u"], bad, self.nerve)

    def test_all_catalog_twists(self):
        for tag, w, k in (
            (ManifoldTag.TORUS2, 1, 0),
            (ManifoldTag.SPHERE2, 0, 2),
            (ManifoldTag.CIRCLE_TIMES_SPHERE2, 2, 3),
        ):
            with self.subTest(tag=tag):
                data = cech.decomposable_twist_data(tag, w, k)
                nerve = data["nerve"]
                d = cech.dd_cocycle(data["u"], data["c"], nerve)
                delta = cech.bockstein(d, nerve)
                if 3 in nerve.simplices:
                    expected = cech.cup(data["alpha"], data["beta"], nerve)
                    self.assertEqual(
                        cech.class_coordinates(delta, nerve),
                        cech.class_coordinates(expected, nerve),
                    )
                else:
                    self.assertEqual(delta.values, {})

    def test_vanishing_degree_rejected(self):
        with self.assertRaises(ValidationError):
            cech.decomposable_twist_data(ManifoldTag.SPHERE2, u_winding=1)


class TestCircleValuedMap(SimpleTestCase):
    def test_from_transitions_matches_jumps(self):
        nerve = cech.nerve_catalog(ManifoldTag.CIRCLE)
        u = cech.CircleValuedMap.from_transitions(
            nerve, cech.circle_generator(nerve).scaled(3)
        )
        self.assertEqual(
            u.local_lifts[0][(0, 2)] - u.local_lifts[2][(0, 2)], -3
        )

    def test_inconsistent_lifts_rejected(self):
        nerve = cech.nerve_catalog(ManifoldTag.CIRCLE)
        u = cech.CircleValuedMap.from_transitions(nerve, cech.circle_generator(nerve))
        lifts = {j: dict(v) for j, v in u.local_lifts.items()}
        lifts[1][(0, 1)] += Fraction(1, 2)
        with self.assertRaisesMessage(ValidationError, "At simplex (0, 1)"):
            cech.CircleValuedMap(nerve, lifts, u.transitions)


class TestInterchange(SimpleTestCase):
    def test_document_round_trip(self):
        data = cech.decomposable_twist_data(ManifoldTag.SPHERE2, 0, 1)
        document = cech.nerve_to_json(data["nerve"], [data["beta"], data["c"]])
        self.assertEqual(document["simplices"]["2"][0], [0, 1, 2])
        self.assertIn("0,1|0,1,2", document["cochains"][1]["values"])
        nerve, (beta, c) = cech.nerve_from_json(document)
        self.assertEqual(nerve.simplices, data["nerve"].simplices)
        self.assertEqual(beta.values, data["beta"].values)
        self.assertEqual(c.lifts, data["c"].lifts)

    def test_circle_values_are_decimal_strings(self):
        nerve = cech.nerve_catalog(ManifoldTag.CIRCLE)
        exact = CechCochain(
            1,
            CoefficientGroup.CIRCLE,
            {(0, 1): Fraction(3, 8), (1, 2): Fraction(1, 3), (0, 2): Fraction(0)},
        )
        floating = CechCochain(
            1, CoefficientGroup.CIRCLE, {(0, 1): 0.1, (1, 2): 0.25, (0, 2): 0.0}
        )
        document = cech.nerve_to_json(nerve, [exact, floating])
        self.assertEqual(
            document["cochains"][0]["values"], {"0,1": "0.375", "1,2": "1/3", "0,2": 0}
        )
        self.assertTrue(document["cochains"][0]["exact"])
        self.assertEqual(document["cochains"][1]["values"]["0,1"], "0.1")
        self.assertFalse(document["cochains"][1]["exact"])
        _, (exact_back, floating_back) = cech.nerve_from_json(document)
        self.assertEqual(exact_back.values, exact.values)
        self.assertIsInstance(exact_back.values[(0, 1)], Fraction)
        self.assertEqual(floating_back.values[(0, 1)], 0.1)
        self.assertIsInstance(floating_back.values[(0, 1)], float)

    def test_json_numbers_are_accepted(self):
        document = {
            "vertices": 3,
            "simplices": {"1": [[0, 1], [1, 2], [0, 2]]},
            "cochains": [
                {"degree": 1, "coeff": "U1", "values": {"0,1": 0.5, "1,2": "1/4", "0,2": "0.75"}}
            ],
        }
        _, (c,) = cech.nerve_from_json(document)
        self.assertEqual(c.values[(0, 1)], 0.5)
        self.assertEqual(c.values[(1, 2)], Fraction(1, 4))
        self.assertEqual(c.values[(0, 2)], 0.75)

    def test_malformed_document(self):
        with self.assertRaises(ValidationError):
            cech.nerve_from_json({"simplices": {}})
