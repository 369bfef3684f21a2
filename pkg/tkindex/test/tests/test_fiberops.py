from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase

from tkindex import fiberops
from tkindex.fiberops import (
    Heisenberg,
    TruncatedKernel,
    analytic_index,
    build_projective_family,
    index_idempotent,
    parametrix,
    symbol_of,
    toeplitz,
    toeplitz_winding,
    twisted_conjugate,
)
from tkindex.utils import ComputationError, StructuralError, ValidationError

from ..testutils import PrimitiveBundleTestMixin


def decaying_kernel(N, seed, width=3.0):
    rng = np.random.default_rng(seed)
    modes = np.arange(-N, N + 1)
    envelope = np.exp(-(modes[:, None] ** 2 + modes[None, :] ** 2) / width ** 2)
    values = rng.normal(size=envelope.shape) + 1j * rng.normal(size=envelope.shape)
    return TruncatedKernel(N, envelope * values)


class TestTruncatedKernel(SimpleTestCase):
    def test_shape_must_match_modes(self):
        with self.assertRaisesMessage(StructuralError, "expected (9, 9)"):
            TruncatedKernel(4, np.eye(8))

    def test_non_finite_entries(self):
        matrix = np.eye(5)
        matrix[0, 0] = np.nan
        with self.assertRaises(ValidationError):
            TruncatedKernel(2, matrix)

    def test_compose_with_identity(self):
        a = decaying_kernel(6, 0)
        np.testing.assert_array_equal((a @ TruncatedKernel.identity(6)).matrix, a.matrix)

    def test_compose_needs_equal_cutoffs(self):
        with self.assertRaisesMessage(StructuralError, "cutoffs 4 and 5"):
            TruncatedKernel.identity(4) @ TruncatedKernel.identity(5)

    def test_compose_needs_matching_modes(self):
        with self.assertRaises(StructuralError):
            toeplitz_winding(6, 1) @ toeplitz_winding(6, 1)

    def test_rank_one(self):
        u = np.zeros(5)
        u[2] = 1.0
        kernel = TruncatedKernel.rank_one(2, u, u)
        self.assertEqual(kernel.block(0, 0)[0, 0], 1.0)
        self.assertEqual(np.count_nonzero(kernel.matrix), 1)


class TestTwistedConjugate(SimpleTestCase):
    def test_zero_shift(self):
        a = decaying_kernel(8, 1)
        shifted = twisted_conjugate(a, 0)
        np.testing.assert_array_equal(shifted.matrix, a.matrix)
        self.assertEqual(shifted.truncation, 0.0)

    def test_shift_moves_entries_along_both_indices(self):
        a = decaying_kernel(8, 2)
        shifted = twisted_conjugate(a, 3)
        self.assertEqual(shifted.block(4, 1)[0, 0], a.block(1, -2)[0, 0])

    def test_shifts_of_one_sign_compose(self):
        a = decaying_kernel(10, 3)
        twice = twisted_conjugate(twisted_conjugate(a, 2), 3)
        np.testing.assert_array_equal(twice.matrix, twisted_conjugate(a, 5).matrix)

    def test_opposite_shifts_agree_on_the_interior(self):
        a = decaying_kernel(10, 4)
        there_and_back = twisted_conjugate(twisted_conjugate(a, 3), -3)
        inner = slice(3, 21 - 3)
        np.testing.assert_allclose(there_and_back.matrix[inner, inner], a.matrix[inner, inner])

    def test_truncation_is_reported(self):
        wide = decaying_kernel(6, 5, width=20.0)
        self.assertGreater(twisted_conjugate(wide, 2).truncation, 0.0)
        narrow = TruncatedKernel.diagonal(6, [0] * 6 + [1] + [0] * 6)
        self.assertEqual(twisted_conjugate(narrow, 2).truncation, 0.0)

    def test_shift_longer_than_the_band(self):
        with self.assertRaisesMessage(ValidationError, "leaves the band"):
            twisted_conjugate(decaying_kernel(4, 6), 5)

    def test_rectangular_kernels_are_rejected(self):
        with self.assertRaises(StructuralError):
            twisted_conjugate(toeplitz_winding(6, 1), 1)


class TestHeisenberg(SimpleTestCase):
    def setUp(self):
        self.H = Heisenberg(12)

    def test_commutator_is_central(self):
        for n, phi in ((1, 0.3), (2, -1.1), (-3, 2.0)):
            with self.subTest(n=n, phi=phi):
                inner = self.H.interior(abs(n))
                commutator = self.H.commutator(n, phi)[inner, inner]
                expected = np.exp(1j * n * phi) * np.eye(commutator.shape[0])
                np.testing.assert_allclose(commutator, expected, atol=1e-14)

    def test_group_law(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            g1 = (rng.uniform(0, 2 * np.pi), int(rng.integers(-2, 3)), np.exp(1j * rng.uniform(0, 6)))
            g2 = (rng.uniform(0, 2 * np.pi), int(rng.integers(-2, 3)), np.exp(1j * rng.uniform(0, 6)))
            inner = self.H.interior(abs(g1[1]) + abs(g2[1]))
            left = (self.H.element(*g1) @ self.H.element(*g2))[:, inner]
            right = self.H.element(*Heisenberg.product(g1, g2))[:, inner]
            np.testing.assert_allclose(left, right, atol=1e-13)

    def test_needs_a_band(self):
        with self.assertRaises(ValidationError):
            Heisenberg(0)


class TestToeplitz(SimpleTestCase):
    def test_winding_index(self):
        for k in (0, 1, 2, -1, -2):
            with self.subTest(k=k):
                R, data = analytic_index(toeplitz_winding(16, k))
                self.assertEqual(R.index, -k)
                self.assertAlmostEqual(data.trace, k, places=10)

    def test_positive_winding_reaches_the_whole_band(self):
        P = toeplitz_winding(10, 2)
        np.testing.assert_allclose(P.range_projection, np.eye(21), atol=1e-12)
        self.assertEqual(len(P.domain), 19)

    def test_cokernel_is_interior(self):
        R = parametrix(toeplitz_winding(10, 2))
        diagonal = np.diag(R.S1).real
        self.assertAlmostEqual(diagonal[10], 1.0)
        self.assertAlmostEqual(diagonal[11], 1.0)
        self.assertAlmostEqual(diagonal.sum(), 2.0)

    def test_bott_clutching_has_a_line_of_cokernel(self):
        for x in ((0, 0, 1), (1, 0, 0), (0.6, 0, -0.8)):
            with self.subTest(x=x):
                R, data = analytic_index(toeplitz(8, fiberops.bott_symbol(np.array(x, dtype=float))))
                self.assertEqual(R.kernel_dimension, 0)
                self.assertEqual(R.cokernel_dimension, 1)
                self.assertAlmostEqual(data.trace, 1.0, places=10)

    def test_bandwidth_must_fit(self):
        with self.assertRaisesMessage(ValidationError, "does not fit"):
            toeplitz_winding(3, 4)


class TestIndexIdempotent(SimpleTestCase):
    def random_operator(self, rng):
        m, n = (int(v) for v in rng.integers(3, 9, size=2))
        matrix = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
        return TruncatedKernel(0, matrix, domain=tuple(range(n)), codomain=tuple(range(m)))

    def test_moore_penrose_parametrix(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            P = self.random_operator(rng)
            R = parametrix(P)
            data = index_idempotent(P, R.Q, R.S0, R.S1)
            self.assertLess(data.idempotency_residual, 1e-10)
            m, n = P.matrix.shape
            self.assertAlmostEqual(data.trace, m - n, places=8)

    def test_any_generalized_inverse(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            P = self.random_operator(rng)
            pinv = np.linalg.pinv(P.matrix)
            m, n = P.matrix.shape
            Z = rng.normal(size=(n, m))
            Q = pinv + 0.3 * Z @ (np.eye(m) - P.matrix @ pinv)
            S0 = np.eye(n) - Q @ P.matrix
            S1 = np.eye(m) - P.matrix @ Q
            data = index_idempotent(P, Q, S0, S1)
            self.assertLess(data.idempotency_residual, 1e-9)
            self.assertAlmostEqual(data.trace, m - n, places=8)

    def test_inconsistent_projections_are_rejected(self):
        P = self.random_operator(np.random.default_rng(0))
        R = parametrix(P)
        with self.assertRaisesMessage(ComputationError, "not idempotent"):
            index_idempotent(P, R.Q, R.S0 + 0.1, R.S1)

    def test_near_idempotent_is_polished(self):
        rng = np.random.default_rng(7)
        P = self.random_operator(rng)
        R = parametrix(P)
        nudge = 1e-11 * rng.normal(size=R.S0.shape)
        data = index_idempotent(P, R.Q, R.S0 + nudge, R.S1)
        self.assertLessEqual(data.idempotency_residual, 1e-12)
        m, n = P.matrix.shape
        self.assertAlmostEqual(data.trace, m - n, places=8)

    def test_ill_conditioned_kernel_warns(self):
        P = TruncatedKernel(0, np.diag([1.0, 1e-13]), domain=(0, 1), codomain=(0, 1))
        with self.assertLogs("tkindex.fiberops", "WARNING"):
            R = parametrix(P)
        self.assertTrue(R.ill_conditioned)


class TestFamilies(PrimitiveBundleTestMixin, SimpleTestCase):
    def scenario(self, **values):
        return SimpleNamespace(**dict({"N": 8, "symbol_winding": 0, "family": "toeplitz"}, **values))

    def test_toeplitz_family_symbol(self):
        family = build_projective_family(self.scenario(symbol_winding=1))
        ((plus, minus),) = symbol_of(family)
        self.assertEqual(list(plus), [1])
        self.assertEqual(list(minus), [0])

    def test_bott_family(self):
        family = build_projective_family(self.scenario(family="bott"), mesh=self.sphere)
        self.assertEqual(len(family), self.sphere.count(0))
        for _R, data in family.index_data():
            self.assertAlmostEqual(data.trace, 1.0, places=10)
        plus, minus = symbol_of(family)[0]
        self.assertEqual(sorted(plus), [0, 1])
        for j, block in plus.items():
            np.testing.assert_allclose(block, family.symbol[0][j], atol=1e-14)
        np.testing.assert_allclose(minus[0], np.eye(2))

    def test_bott_needs_a_mesh(self):
        with self.assertRaises(ValidationError):
            build_projective_family(self.scenario(family="bott"))

    def test_twisted_family(self):
        J = self.primitive_bundle()
        family = build_projective_family(self.scenario(family="twisted"), J=J)
        self.assertEqual(family.deck_shift, 1)
        self.assertLess(family.overlap_residual(), 1e-14)
        for _R, data in family.index_data()[:5]:
            self.assertAlmostEqual(data.trace, 0.0, places=10)

    def test_twisted_family_has_rank_zero(self):
        with self.assertRaisesMessage(ValidationError, "rank-zero"):
            build_projective_family(self.scenario(family="twisted", symbol_winding=1), J=self.primitive_bundle())

    def test_deck_shift_is_twisted_conjugation(self):
        J = self.primitive_bundle()
        self.assertLess(fiberops.deck_residual(J, 8, shift=1), 1e-12)
        self.assertLess(fiberops.deck_residual(J, 8, shift=-2), 1e-12)

    def test_unknown_family(self):
        with self.assertRaisesMessage(ValidationError, "Unknown operator family"):
            build_projective_family(self.scenario(family="wave"))
