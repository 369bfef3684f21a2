from unittest import mock

import numpy as np
from django.test import SimpleTestCase
from scipy import integrate

from tkindex import sclquant
from tkindex.cherncalc import even_chern
from tkindex.forms import sphere_cycle
from tkindex.sclquant import (
    SclSymbol,
    compactified_symbol,
    even_scl_index,
    odd_scl_index,
    odd_scl_pairing,
    quantize,
    relative_scl_pairings,
    scl_composition_defect,
    symbol_of_kernel,
    symbol_winding,
    thom_ground_state,
    thom_isotropic_check,
    winding_symbol,
)
from tkindex.utils import ComputationError, ValidationError

from ..testutils import MeshTestMixin


def gaussian(theta, xi):
    return np.exp(-(xi ** 2)) + 0 * theta


def modulated(theta, xi):
    return (1 + 0.5 * np.cos(theta)) * np.exp(-(xi ** 2))


def multiplier(theta, xi):
    return 1 + 0.5 * np.cos(theta) + 0 * xi


class TestQuantize(SimpleTestCase):
    def test_zero_symbol(self):
        K = quantize(SclSymbol(lambda theta, xi: 0 * theta, 1.0), 0.25, 8)
        self.assertEqual(np.abs(K.matrix).max(), 0.0)

    def test_fourier_multiplier_is_diagonal(self):
        eps, N = 0.25, 20
        K = quantize(SclSymbol(gaussian, 4.0), eps, N)
        modes = np.arange(-N, N + 1)
        np.testing.assert_allclose(K.matrix, np.diag(np.exp(-((eps * modes) ** 2))), atol=1e-14)

    def test_entries_match_the_oscillatory_integral(self):
        eps, N = 0.25, 20
        K = quantize(SclSymbol(modulated, 4.0), eps, N)
        for k, l in ((0, 0), (1, 0), (3, 2), (-4, -5), (2, 0)):
            with self.subTest(k=k, l=l):
                def real(theta):
                    return np.real(modulated(theta, eps * l) * np.exp(-1j * (k - l) * theta))

                def imag(theta):
                    return np.imag(modulated(theta, eps * l) * np.exp(-1j * (k - l) * theta))

                expected = (
                    integrate.quad(real, 0, 2 * np.pi)[0] + 1j * integrate.quad(imag, 0, 2 * np.pi)[0]
                ) / (2 * np.pi)
                self.assertAlmostEqual(K.block(k, l)[0, 0], expected, delta=1e-8)

    def test_symbol_is_recovered_on_the_grid(self):
        eps, N = 0.25, 24
        a = SclSymbol(modulated, 4.0)
        theta, xi, values = symbol_of_kernel(quantize(a, eps, N), eps)
        np.testing.assert_allclose(values, a.sample(theta, xi), atol=1e-13)

    def test_band_must_cover_the_support(self):
        with self.assertRaisesMessage(ValidationError, "need N >= 16"):
            quantize(SclSymbol(gaussian, 4.0), 0.25, 10)

    def test_symbol_must_settle_outside_its_support(self):
        with self.assertRaises(ValidationError):
            SclSymbol(gaussian, 0.5)

    def test_conjugate_symmetric_symbols_give_hermitian_kernels(self):
        K = quantize(SclSymbol(multiplier, 1.0), 0.25, 8)
        np.testing.assert_allclose(K.matrix, K.matrix.conj().T, atol=1e-14)


class TestCompositionDefect(SimpleTestCase):
    eps_grid = (1 / 4, 1 / 8, 1 / 16, 1 / 32)

    def test_defect_is_first_order(self):
        report = scl_composition_defect(
            SclSymbol(gaussian, 4.0), SclSymbol(modulated, 4.0), self.eps_grid
        )
        self.assertTrue(report["passed"])
        self.assertGreaterEqual(report["slope"], 0.9)
        self.assertEqual(report["defects"], sorted(report["defects"], reverse=True))

    def test_multiplication_on_the_left_is_exact(self):
        report = scl_composition_defect(
            SclSymbol(multiplier, 1.0), SclSymbol(modulated, 4.0), self.eps_grid
        )
        self.assertTrue(report["at_floor"])

    def test_fourier_multiplier_on_the_right_is_exact(self):
        report = scl_composition_defect(
            SclSymbol(modulated, 4.0), SclSymbol(gaussian, 4.0), self.eps_grid
        )
        self.assertTrue(report["at_floor"])

    def test_grid_too_short(self):
        with self.assertRaisesMessage(ValidationError, "at least 4"):
            scl_composition_defect(SclSymbol(gaussian, 4.0), SclSymbol(gaussian, 4.0), (0.5, 0.25))


class TestOddIndex(SimpleTestCase):
    def test_zero_perturbation_gives_the_identity(self):
        family = odd_scl_index(SclSymbol(lambda theta, xi: 1 + 0 * theta, 1.0))
        (kernel,) = family.restricted().kernels
        np.testing.assert_allclose(kernel.matrix, np.eye(kernel.matrix.shape[0]))
        self.assertAlmostEqual(odd_scl_pairing(family), 0.0, places=12)

    def test_winding_symbol_pairs_to_one(self):
        a = winding_symbol()
        family = odd_scl_index(a)
        self.assertLess(family.polish_residuals[0], 1e-12)
        self.assertAlmostEqual(odd_scl_pairing(family), 1.0, places=8)
        self.assertAlmostEqual(symbol_winding(a), 1.0, places=8)

    def test_pairing_does_not_depend_on_the_restriction(self):
        family = odd_scl_index(winding_symbol(), eps_grid=(0.5, 0.25))
        self.assertAlmostEqual(odd_scl_pairing(family, 0.5), odd_scl_pairing(family, 0.25), delta=1e-6)

    def modulated_winding(self):
        base = winding_symbol()
        return SclSymbol(
            lambda theta, xi: base.func(theta, xi) * (1 + 0.3 * np.exp(1j * theta)),
            base.support_radius,
        )

    def test_polish_restores_an_exact_inverse(self):
        family = odd_scl_index(self.modulated_winding())
        ((A,),), ((B,),) = family.operators, family.inverses
        np.testing.assert_allclose(A.matrix @ B.matrix, np.eye(A.matrix.shape[0]), atol=1e-11)
        self.assertAlmostEqual(odd_scl_pairing(family), 1.0, places=8)

    def test_polish_failure_is_reported(self):
        with mock.patch.object(sclquant, "POLISH_ITERATIONS", 0):
            with self.assertRaisesMessage(ComputationError, "smallest singular values"):
                odd_scl_index(self.modulated_winding())

    def test_compactified_symbol_closes_up_at_infinity(self):
        coefficients = compactified_symbol(winding_symbol())
        self.assertEqual(sorted(coefficients), list(range(-64, 65)))
        value = sum(c[0, 0] for c in coefficients.values())
        self.assertAlmostEqual(abs(value), 1.0, delta=1e-4)

    def test_mode_loop_agrees_with_the_relative_character(self):
        family = odd_scl_index(winding_symbol(), eps_grid=(0.5, 0.25))
        (relative,) = relative_scl_pairings(winding_symbol())
        self.assertAlmostEqual(relative, 1.0, places=8)
        for eps in family.epsilons:
            with self.subTest(eps=eps):
                self.assertAlmostEqual(odd_scl_pairing(family, eps), relative, delta=1e-6)


class TestOddIndexOverABase(MeshTestMixin, SimpleTestCase):
    def test_constant_symbol_is_quantized_once(self):
        a = winding_symbol()
        family = odd_scl_index(a, eps_grid=(0.5,), base=self.sphere)
        members = family.restricted(0.5).kernels
        self.assertEqual(len(members), self.sphere.count(0))
        self.assertIs(members[0], members[-1])
        relative = relative_scl_pairings(a, base=self.sphere)
        self.assertEqual(len(relative), self.sphere.count(0))
        for vertex in (0, self.sphere.count(0) - 1):
            with self.subTest(vertex=vertex):
                pairing = odd_scl_pairing(family, 0.5, vertex=vertex)
                self.assertAlmostEqual(pairing, relative[vertex], delta=1e-6)

    def test_symbols_per_vertex(self):
        unit = SclSymbol(lambda theta, xi: 1 + 0 * theta, 1.0)
        a = winding_symbol()
        symbols = [a if v % 2 == 0 else unit for v in range(self.sphere.count(0))]
        family = odd_scl_index(symbols, base=self.sphere)
        self.assertAlmostEqual(odd_scl_pairing(family, vertex=0), 1.0, places=8)
        self.assertAlmostEqual(odd_scl_pairing(family, vertex=1), 0.0, places=8)

    def test_symbol_count_must_match_the_base(self):
        with self.assertRaisesMessage(ValidationError, "symbols for"):
            odd_scl_index([winding_symbol()], base=self.sphere)


class TestEvenIndex(MeshTestMixin, SimpleTestCase):
    def test_bott_line_has_index_minus_one(self):
        e, e0 = even_scl_index()
        (E,) = e.values
        self.assertLess(np.abs(E @ E - E).max(), 1e-12)
        self.assertAlmostEqual(np.trace(E - e0).real, -1.0, places=8)

    def test_reference_symbol_is_trivial(self):
        reference = SclSymbol(
            lambda theta, xi: np.where(xi[..., None, None] < 0, np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
            + 0 * theta[..., None, None],
            1.0,
        )
        e, e0 = even_scl_index(reference, eps=0.5)
        np.testing.assert_allclose(e.values[0], e0, atol=1e-12)

    def test_bott_family_over_the_sphere(self):
        e, e0 = even_scl_index(base=self.sphere)
        character = even_chern(e, e0)
        self.assertEqual(character.degree0, -1.0)
        self.assertAlmostEqual(abs(character.pairing(sphere_cycle(self.sphere, 0))), 1.0, places=8)

    def test_spectrum_near_one_half_is_rejected(self):
        with self.assertRaisesMessage(ComputationError, "from 1/2"):
            sclquant.contour_projection(np.diag([0.0, 0.45, 1.0]))

    def test_symbol_must_be_idempotent(self):
        quarter = SclSymbol(lambda theta, xi: 0.25 * np.ones(np.shape(theta) + (2, 2)), 1.0)
        with self.assertRaises(ValidationError):
            even_scl_index(quarter)


class TestThom(SimpleTestCase):
    def test_ground_state_projector(self):
        index, trace, mass = thom_ground_state(32, 0.5, 0.5)
        self.assertEqual(index, 1)
        self.assertAlmostEqual(trace, 1.0, places=10)
        self.assertAlmostEqual(mass, 1.0, places=12)

    def test_check_returns_one(self):
        self.assertEqual(thom_isotropic_check(), 1)
        self.assertEqual(thom_isotropic_check(64), 1)

    def test_truncation_too_small(self):
        with self.assertRaisesMessage(ComputationError, "Hermite truncation"):
            thom_isotropic_check(4)
