import math

import numpy as np
from django.test import SimpleTestCase

from purikit.exceptions import PreconditionError
from tensors.spectra import Spectrum, assemble_density, make_distribution
from tensors.utils import (
    operator_schmidt_rank, purification_cut_ranks, purification_rank, trace_norm, trace_out_ancilla,
)
from .fitting import (
    CurvePoint, DecayFit, check_monotone, distance_curve, fit_exponential, fit_sos,
    k_for_accuracy, line_ansatz, rescale_check, sos_bound_from_decay,
)
from .polynomials import (
    GramPolynomial, build_purifying_state, eval_poly, exact_gram, exp_ansatz, lagrange_squared,
    real_reduce, rescaled, sigma_of_poly, sos_decompose, sos_distance, sos_rank_bound, vandermonde,
)
from .sdp import InteriorPointSolver, build_standard_form, solve, strictly_feasible_point


def random_class_spectrum(rng: np.random.Generator) -> Spectrum:
    """2..6 distinct values of random multiplicity on 2..6 qubits, sometimes with a zero class."""
    n_sites = int(rng.integers(2, 7))
    dim = 2 ** n_sites
    m = int(rng.integers(2, min(6, dim) + 1))
    with_zero = bool(rng.random() < 0.3)
    classes = np.sort(0.05 + rng.random(m))[::-1]
    if with_zero:
        classes[-1] = 0.0
    counts = 1 + rng.multinomial(dim - m, np.full(m, 1.0 / m))
    values = np.repeat(classes, counts)
    values = values[values > 0]
    return Spectrum(values=values / values.sum(), ambient_dim=dim, kind='random_classes')


class GramPolynomialTest(SimpleTestCase):
    """Test cases for Gram-form polynomials and their closed-form constructions."""

    def setUp(self):
        self.spec = Spectrum(values=np.array([0.5, 0.3, 0.2]), ambient_dim=3, normalized=True)

    def test_vandermonde(self):
        rows = vandermonde(np.array([2.0, 3.0]), 3)
        np.testing.assert_array_equal(rows, [[1, 2, 4], [1, 3, 9]])
        np.testing.assert_array_equal(vandermonde(2.0, 2), [1, 2])

    def test_exact_gram_interpolates(self):
        gp = exact_gram(self.spec)
        self.assertTrue(gp.is_psd())
        self.assertEqual(gp.degree_param, 3)
        np.testing.assert_allclose(eval_poly(gp, self.spec.values), self.spec.values, atol=1e-12)
        self.assertLess(sos_distance(self.spec, gp), 1e-12)

    def test_exact_gram_with_zero_class(self):
        spec = Spectrum(values=np.array([0.5, 0.3, 0.2]), ambient_dim=4, normalized=True)
        gp = exact_gram(spec)
        self.assertEqual(gp.degree_param, 4)
        self.assertAlmostEqual(eval_poly(gp, 0.0), 0.0, places=12)
        self.assertLess(sos_distance(spec, gp), 1e-12)

    def test_unscaled_gram_matches(self):
        gp = exact_gram(self.spec)
        plain = GramPolynomial(scaled_gram=gp.gram, scale=1.0)
        grid = np.linspace(0.0, 0.6, 7)
        np.testing.assert_allclose(eval_poly(plain, grid), eval_poly(gp, grid), atol=1e-12)

    def test_sos_decomposition(self):
        gp = exact_gram(self.spec)
        decomposition = sos_decompose(gp)
        grid = np.linspace(0.0, 0.6, 13)
        np.testing.assert_allclose(decomposition.evaluate(grid), eval_poly(gp, grid), atol=1e-10)
        self.assertLessEqual(decomposition.rank, 3)

    def test_lagrange_squared(self):
        points = [0.5, 0.3, 0.1]
        gp = lagrange_squared(points)
        np.testing.assert_allclose(eval_poly(gp, points), points, atol=1e-12)
        gram_form = GramPolynomial(scaled_gram=gp.scaled_gram, scale=gp.scale)
        grid = np.linspace(0.0, 0.6, 11)
        np.testing.assert_allclose(eval_poly(gram_form, grid), eval_poly(gp, grid), atol=1e-12)
        with self.assertRaises(PreconditionError):
            lagrange_squared([0.5, 0.0])

    def test_exp_ansatz(self):
        spec = make_distribution('exponential', 10, b=1.0)
        gp = exp_ansatz(spec, 5)
        nodes = spec.values[:3]
        np.testing.assert_allclose(eval_poly(gp, nodes), nodes, rtol=1e-12)
        self.assertEqual(eval_poly(gp, 0.0), 0.0)
        gram_form = GramPolynomial(scaled_gram=gp.scaled_gram, scale=gp.scale)
        grid = np.linspace(0.0, spec.values[0], 9)
        np.testing.assert_allclose(eval_poly(gram_form, grid), eval_poly(gp, grid), atol=1e-10)
        with self.assertRaises(PreconditionError):
            exp_ansatz(spec, 2)

    def test_exp_ansatz_log_domain(self):
        spec = make_distribution('exponential', 40, b=0.5)
        gp = exp_ansatz(spec, 12)
        nodes = spec.values[:10]
        np.testing.assert_allclose(eval_poly(gp, nodes), nodes, rtol=1e-8)

    def test_rescaled(self):
        gp = lagrange_squared([0.5, 0.3])
        moved = rescaled(gp, 0.5)
        self.assertAlmostEqual(eval_poly(moved, 0.1), 0.5 * eval_poly(gp, 0.2), places=14)
        gram_form = rescaled(GramPolynomial(scaled_gram=gp.scaled_gram, scale=gp.scale), 0.5)
        self.assertAlmostEqual(eval_poly(gram_form, 0.1), eval_poly(moved, 0.1), places=12)

    def test_sigma_of_poly(self):
        spec = make_distribution('equally_spaced', 5)
        sigma = sigma_of_poly(spec, lagrange_squared([spec.values[0]]), normalize=True)
        self.assertAlmostEqual(sigma.values.sum(), 1.0, places=12)
        self.assertTrue(np.all(np.diff(sigma.values) <= 0))

    def test_polynomials_nonnegative_on_real_line(self):
        lam = np.random.default_rng(5).uniform(-2.0, 2.0, 1000)
        spec = make_distribution('equally_spaced', 12)
        polynomials = {
            'exact': exact_gram(spec),
            'exact_wide': exact_gram(make_distribution('exponential', 9, b=1.0)),
            'lagrange': lagrange_squared([0.5, 0.25, 0.1]),
            'exp_ansatz': exp_ansatz(spec, 5),
            'sdp': fit_sos(spec, 3).gram,
        }
        for name, gp in polynomials.items():
            with self.subTest(name):
                values = eval_poly(gp, lam)
                self.assertTrue(np.all(np.isfinite(values)))
                self.assertGreaterEqual(values.min(), -1e-10 * max(1.0, np.abs(values).max()))

    def test_real_reduce_keeps_values_and_psd(self):
        gp = GramPolynomial(scaled_gram=np.array([[1.0, 1j], [-1j, 1.0]]))
        self.assertTrue(gp.is_psd())
        reduced = real_reduce(gp)
        self.assertFalse(np.iscomplexobj(reduced.scaled_gram))
        self.assertTrue(reduced.is_psd())
        lam = np.linspace(-2.0, 2.0, 41)
        np.testing.assert_allclose(eval_poly(reduced, lam), eval_poly(gp, lam), atol=1e-12)
        np.testing.assert_allclose(eval_poly(reduced, lam), 1.0 + lam ** 2, atol=1e-12)

    def test_exact_gram_is_not_diagonal(self):
        gram = exact_gram(make_distribution('equally_spaced', 6)).scaled_gram
        off_diagonal = gram - np.diag(np.diag(gram))
        self.assertGreater(np.abs(off_diagonal).max(), 1e-6)

    def test_exact_gram_on_close_values(self):
        values = np.concatenate([np.full(60, 0.01618), [0.0102, 0.0067, 0.0064, 0.0061]])
        spec = Spectrum(values=values, ambient_dim=64)
        gp = exact_gram(spec)
        self.assertEqual(gp.degree_param, 5)
        np.testing.assert_allclose(eval_poly(gp, np.unique(values)), np.unique(values), rtol=1e-9)
        self.assertEqual(sos_decompose(gp).rank, 5)

    def test_rank_bound(self):
        self.assertEqual(sos_rank_bound(2, 3), 7)
        self.assertEqual(sos_rank_bound(1, 5), 5)
        self.assertEqual(sos_rank_bound(10, 30, with_flag=True), (2 ** 63 - 1, True))
        with self.assertRaises(PreconditionError):
            sos_rank_bound(0, 3)


class PurifyingStateTest(SimpleTestCase):
    """Test cases for the local purification built from a Gram polynomial."""

    def test_exact_polynomial_purifies_rho(self):
        spec = Spectrum(values=np.array([0.4, 0.3, 0.3]), ambient_dim=4, normalized=True)
        rho = assemble_density(spec, seed=1, local_dim=2)
        gp = exact_gram(spec)
        psi = build_purifying_state(rho, gp)
        self.assertEqual(psi.meta['origin'], 'exact')
        self.assertLess(trace_norm(trace_out_ancilla(psi).data - rho.data), 1e-8)
        D = operator_schmidt_rank(rho)[1]
        self.assertLessEqual(purification_rank(psi), sos_rank_bound(D, gp.degree_param))

    def test_close_values_keep_every_factor(self):
        values = np.concatenate([np.full(60, 0.01618), [0.0102, 0.0067, 0.0064, 0.0061]])
        spec = Spectrum(values=values, ambient_dim=64)
        rho = assemble_density(spec, seed=4, local_dim=2)
        gp = exact_gram(spec)
        psi = build_purifying_state(rho, gp)
        self.assertEqual(psi.ancilla_dims[-1], 2 * 5)
        self.assertLessEqual(trace_norm(trace_out_ancilla(psi).data - rho.data), 1e-7)
        D = operator_schmidt_rank(rho)[1]
        self.assertLessEqual(purification_rank(psi), sos_rank_bound(D, gp.degree_param))

    def test_random_spectra_are_purified_exactly(self):
        rng = np.random.default_rng(2024)
        for instance in range(50):
            spec = random_class_spectrum(rng)
            with self.subTest(instance=instance, dim=spec.ambient_dim, m=spec.m_distinct):
                rho = assemble_density(spec, seed=instance, local_dim=2)
                gp = exact_gram(spec)
                self.assertEqual(gp.degree_param, spec.m_distinct)
                psi = build_purifying_state(rho, gp)
                sigma = trace_out_ancilla(psi)
                self.assertLessEqual(trace_norm(sigma.data - rho.data), 1e-7)
                D = operator_schmidt_rank(rho)[1]
                self.assertLessEqual(purification_rank(psi), sos_rank_bound(D, gp.degree_param))
                for osr, bond in zip(operator_schmidt_rank(sigma)[0], purification_cut_ranks(psi)):
                    self.assertLessEqual(osr, bond ** 2)

    def test_zero_polynomial_rejected(self):
        rho = assemble_density(make_distribution('uniform', 4), seed=0)
        zero = GramPolynomial(scaled_gram=np.zeros((2, 2)))
        with self.assertRaises(PreconditionError):
            build_purifying_state(rho, zero)


class SdpTest(SimpleTestCase):
    """Test cases for the interior-point fitting SDP."""

    def test_strictly_feasible_point(self):
        problem = build_standard_form(make_distribution('equally_spaced', 10), 3)
        z, R = strictly_feasible_point(problem)
        self.assertGreaterEqual(problem.margins(z, R).min(), 1.0 - 1e-12)
        self.assertGreater(np.linalg.eigvalsh(R)[0], 0.0)

    def test_feasible_point_needs_distinct_values(self):
        problem = build_standard_form(make_distribution('uniform', 4), 2)
        with self.assertRaises(PreconditionError):
            strictly_feasible_point(problem)

    def test_solve_reaches_optimality(self):
        spec = make_distribution('equally_spaced', 12)
        solution = solve(build_standard_form(spec, 3))
        self.assertEqual(solution.status, 'optimal')
        self.assertLessEqual(solution.duality_gap, 1e-6)
        self.assertTrue(solution.gram().is_psd())
        self.assertAlmostEqual(solution.objective, sos_distance(spec, solution.gram()), delta=1e-6)

    def test_feasible_point_on_clustered_spectrum(self):
        problem = build_standard_form(make_distribution('one_fixed', 100), 4)
        z, R = strictly_feasible_point(problem)
        self.assertGreaterEqual(problem.margins(z, R).min(), 1e-6)
        self.assertGreater(np.linalg.eigvalsh(R)[0], 0.0)

    def test_clustered_spectrum_reaches_optimality(self):
        spec = make_distribution('one_fixed', 100)
        problem = build_standard_form(spec, 4)
        solution = solve(problem)
        self.assertEqual(solution.status, 'optimal')
        self.assertLessEqual(solution.duality_gap, 1e-6)
        self.assertAlmostEqual(solution.objective, sos_distance(spec, solution.gram()), delta=1e-6)
        margins = problem.margins(solution.z / solution.scale, solution.R)
        self.assertGreaterEqual(margins.min(), -1e-5)

    def test_weak_duality_on_every_iterate(self):
        for kind, k in [('one_fixed', 4), ('equally_spaced', 3), ('exponential', 4)]:
            problem = build_standard_form(make_distribution(kind, 40), k)
            for start in ('feasible', 'identity'):
                with self.subTest(kind=kind, start=start):
                    solution = InteriorPointSolver(problem, start=start).run()
                    self.assertEqual(solution.start, start)
                    self.assertTrue(solution.history)
                    for entry in solution.history:
                        slack = 1e-9 * max(1.0, abs(entry['pcost']))
                        self.assertGreaterEqual(entry['pcost'], entry['dcost'] - slack)
                    self.assertGreaterEqual(solution.objective, solution.dual_objective - 1e-9)

    def test_returned_block_satisfies_constraints(self):
        problem = build_standard_form(make_distribution('equally_spaced', 12), 3)
        solution = solve(problem)
        self.assertLessEqual(solution.primal_residual, 1e-7)
        self.assertGreaterEqual(problem.margins(solution.z / solution.scale, solution.R).min(), -1e-6)
        self.assertGreaterEqual(np.linalg.eigvalsh(solution.R)[0], -1e-10 * np.abs(solution.R).max())

    def test_solve_is_deterministic(self):
        problem = build_standard_form(make_distribution('one_fixed', 8), 2)
        first, second = solve(problem), solve(problem)
        np.testing.assert_array_equal(first.R, second.R)
        self.assertEqual(first.iterations, second.iterations)


class FittingTest(SimpleTestCase):
    """Test cases for distance curves and decay fits."""

    def test_uniform_is_fitted_exactly(self):
        fit = fit_sos(make_distribution('uniform', 8), 2)
        self.assertLess(fit.distance, 1e-7)

    def test_enough_terms_give_exact_fit(self):
        fit = fit_sos(make_distribution('equally_spaced', 6), 6)
        self.assertLess(fit.distance, 1e-8)

    def test_distance_curve_decreases(self):
        curve = distance_curve(make_distribution('exponential', 20, b=1.0), 1, 3)
        self.assertEqual([point.k for point in curve], [1, 2, 3])
        self.assertFalse(any(point.flagged for point in curve))
        for previous, point in zip(curve, curve[1:]):
            self.assertLessEqual(point.distance, previous.distance + 1e-6)

    def test_decay_rates_per_distribution(self):
        bands = {
            'equally_spaced': (1.0, 3.0),
            'one_fixed': (0.7, 2.0),
            'exponential': (0.8, 1.8),
        }
        for kind, (low, high) in bands.items():
            with self.subTest(kind):
                curve = distance_curve(make_distribution(kind, 100, b=1.0), 2, 4)
                distances = [point.distance for point in curve]
                self.assertTrue(all(b < a for a, b in zip(distances, distances[1:])), distances)
                fit = fit_exponential(curve)
                self.assertGreaterEqual(fit.B, low)
                self.assertLessEqual(fit.B, high)
                if kind == 'equally_spaced':
                    self.assertGreaterEqual(fit.A, 1.0)
                    self.assertLessEqual(fit.A, 10.0)
        self.assertLessEqual(fit_sos(make_distribution('uniform', 100), 2).distance, 1e-7)

    def test_decay_rate_does_not_depend_on_n(self):
        for kind in ('equally_spaced', 'one_fixed', 'exponential'):
            with self.subTest(kind):
                rates = [fit_exponential(distance_curve(make_distribution(kind, n, b=1.0), 2, 4)).B
                         for n in (50, 100, 200)]
                self.assertLessEqual((max(rates) - min(rates)) / np.mean(rates), 0.3, rates)

    def test_exp_ansatz_rate_follows_b(self):
        spec = make_distribution('exponential', 40, b=1.0)
        curve = [(k, sos_distance(spec, exp_ansatz(spec, k))) for k in range(3, 11)]
        fit = fit_exponential(curve, k_range=(3, 10))
        self.assertGreaterEqual(fit.B, 0.7)
        self.assertLessEqual(fit.B, 1.3)

    def test_distance_monotone_on_random_spectra(self):
        for seed in range(20):
            spec = make_distribution('random', 8 + seed, seed=seed)
            with self.subTest(seed=seed):
                curve = distance_curve(spec, 1, 4)
                self.assertFalse(any(point.flagged for point in curve))
                for previous, point in zip(curve, curve[1:]):
                    self.assertLessEqual(point.distance, previous.distance + 1e-6)

    def test_standalone_fits_do_not_increase(self):
        spec = make_distribution('random', 20, seed=10)
        three, four = fit_sos(spec, 3), fit_sos(spec, 4)
        self.assertLessEqual(four.distance, three.distance + 1e-6)
        self.assertLess(four.distance, 1.0)

    def test_stalled_fit_keeps_previous(self):
        spec = make_distribution('equally_spaced', 12)
        previous = fit_sos(spec, 2)
        stalled = fit_sos(spec, 3, max_iter=0, previous=previous.gram)
        self.assertEqual(stalled.status, 'embedded')
        self.assertEqual(stalled.gram.degree_param, 3)
        self.assertAlmostEqual(stalled.distance, previous.distance, places=12)

    def test_check_monotone_flags_increase(self):
        points = [CurvePoint(1, 0.5, 'optimal'), CurvePoint(2, 0.6, 'optimal'), CurvePoint(3, 0.1, 'optimal')]
        flags = [point.flagged for point in check_monotone(points)]
        self.assertEqual(flags, [False, True, False])

    def test_fit_exponential_recovers_rates(self):
        curve = [(k, 4.0 * math.exp(-2.0 * k)) for k in range(1, 6)]
        fit = fit_exponential(curve, k_range=(1, 5))
        self.assertAlmostEqual(fit.A, 4.0, places=9)
        self.assertAlmostEqual(fit.B, 2.0, places=9)
        self.assertLess(fit.residual, 1e-12)

    def test_fit_exponential_rejects_bad_curves(self):
        with self.assertRaises(PreconditionError):
            fit_exponential([(2, 0.1), (3, -0.01), (4, 0.001)])
        with self.assertRaises(PreconditionError):
            fit_exponential([(2, 0.1), (3, 0.0), (4, 0.0)])

    def test_bounds_from_decay(self):
        fit = DecayFit(A=4.0, B=2.0, residual=0.0, k_range=(2, 4))
        self.assertEqual(k_for_accuracy(fit, 0.01), 3)
        self.assertEqual(sos_bound_from_decay(2, fit, 0.01), 7)
        with self.assertRaises(PreconditionError):
            k_for_accuracy(DecayFit(A=1.0, B=-0.1, residual=0.0, k_range=(2, 4)), 0.01)

    def test_rescale_check(self):
        report = rescale_check(make_distribution('exponential', 10, b=1.0), k=3)
        self.assertLessEqual(report.distance_rescaled, report.distance_raw + 1e-6)
        self.assertLess(report.cond_rescaled, report.cond_raw)

    def test_line_ansatz_scales_with_lambda_1(self):
        gp = line_ansatz(3, 1.0, grid=20)
        moved = line_ansatz(3, 0.1, grid=20)
        self.assertEqual(moved.origin, 'line')
        self.assertTrue(moved.is_psd())
        self.assertAlmostEqual(eval_poly(moved, 0.05), 0.1 * eval_poly(gp, 0.5), places=12)
