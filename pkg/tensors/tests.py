import numpy as np
from django.test import SimpleTestCase, override_settings

from purikit.exceptions import DenseCapExceeded, DimensionMismatch, PreconditionError
from .spectra import (
    Spectrum, assemble_density, distinct_count, distinct_values, make_distribution, random_mps_mixture,
)
from .states import DensityMatrix, PureState
from .utils import (
    classical_purification, contract_mpdo, contract_mps, diagonal_operator_schmidt_rank,
    mpdo_from_dense, mps_from_vector, operator_schmidt_rank, purification_cut_ranks,
    purification_rank, schmidt_rank, standard_purification, trace_norm, trace_out_ancilla,
)


def bell_state() -> DensityMatrix:
    vector = np.array([1, 0, 0, 1]) / np.sqrt(2)
    return DensityMatrix.from_array(np.outer(vector, vector), 2, 2, normalized=True)


class DistributionTest(SimpleTestCase):
    """Test cases for the benchmark eigenvalue distributions."""

    def test_uniform(self):
        spec = make_distribution('uniform', 8)
        np.testing.assert_allclose(spec.values, np.full(8, 1 / 8))
        self.assertEqual(spec.m_distinct, 1)

    def test_equally_spaced(self):
        spec = make_distribution('equally_spaced', 4)
        np.testing.assert_allclose(spec.values, [0.4, 0.3, 0.2, 0.1])

    def test_one_fixed(self):
        spec = make_distribution('one_fixed', 10)
        self.assertAlmostEqual(spec.values[0], 0.5)
        self.assertAlmostEqual(spec.values.sum(), 1.0, places=12)

    def test_exponential_ratio(self):
        spec = make_distribution('exponential', 20, b=0.5)
        np.testing.assert_allclose(spec.values[1:] / spec.values[:-1], np.exp(-0.5))
        self.assertAlmostEqual(spec.values.sum(), 1.0, places=12)

    def test_random_is_seeded(self):
        first = make_distribution('random', 12, seed=7)
        second = make_distribution('random', 12, seed=7)
        np.testing.assert_array_equal(first.values, second.values)
        self.assertTrue(np.all(np.diff(first.values) <= 0))
        with self.assertRaises(PreconditionError):
            make_distribution('random', 12)

    def test_invalid_requests(self):
        with self.assertRaises(PreconditionError):
            make_distribution('zipf', 5)
        with self.assertRaises(PreconditionError):
            make_distribution('one_fixed', 1)

    def test_distinct_values_include_zero_class(self):
        spec = Spectrum(values=np.array([0.5, 0.5]), ambient_dim=4)
        np.testing.assert_allclose(distinct_values(spec), [0.5, 0.0])
        self.assertEqual(distinct_count(spec, ambient_dim=2), 1)

    def test_spectrum_validation(self):
        with self.assertRaises(PreconditionError):
            Spectrum(values=np.array([0.2, 0.8]), ambient_dim=2)
        with self.assertRaises(PreconditionError):
            Spectrum(values=np.array([0.5, -0.1]), ambient_dim=2)
        with self.assertRaises(PreconditionError):
            Spectrum(values=np.array([0.5, 0.4]), ambient_dim=2, normalized=True)


class DensityMatrixTest(SimpleTestCase):
    """Test cases for dense states and their assembly."""

    def test_assemble_density_matches_spectrum(self):
        spec = make_distribution('equally_spaced', 4)
        rho = assemble_density(spec, seed=3, local_dim=2)
        self.assertEqual((rho.n_sites, rho.local_dim), (2, 2))
        self.assertAlmostEqual(rho.trace, 1.0, places=12)
        np.testing.assert_allclose(rho.eigensystem[0], spec.values, atol=1e-12)

    def test_validation_rejects_bad_input(self):
        with self.assertRaises(PreconditionError):
            DensityMatrix.from_array(np.array([[1, 1], [0, 0]]), 1, 2)
        with self.assertRaises(PreconditionError):
            DensityMatrix.from_array(np.diag([1.0, -0.5]), 1, 2)
        with self.assertRaises(DimensionMismatch):
            DensityMatrix.from_array(np.eye(3), 2, 2)

    def test_pure_state_shape_check(self):
        with self.assertRaises(DimensionMismatch):
            PureState(n_sites=2, local_dims=(2, 2), amplitudes=np.ones(3))

    @override_settings(PURIKIT_DENSE_CAP=8)
    def test_dense_cap(self):
        with self.assertRaises(DenseCapExceeded):
            assemble_density(make_distribution('uniform', 16), seed=0)


class RankTest(SimpleTestCase):
    """Test cases for Schmidt and operator Schmidt ranks."""

    def test_product_state_has_osr_one(self):
        single = np.diag([0.7, 0.3])
        rho = DensityMatrix.from_array(np.kron(single, single), 2, 2)
        self.assertEqual(operator_schmidt_rank(rho)[1], 1)

    def test_bell_state_has_osr_four(self):
        self.assertEqual(operator_schmidt_rank(bell_state())[1], 4)

    def test_ghz_schmidt_ranks(self):
        amplitudes = np.zeros(8)
        amplitudes[[0, 7]] = 1 / np.sqrt(2)
        ranks, top = schmidt_rank(PureState(3, (2, 2, 2), amplitudes))
        self.assertEqual(ranks, [2, 2])
        self.assertEqual(top, 2)

    def test_diagonal_osr_matches_dense(self):
        rng = np.random.default_rng(1)
        diagonal = rng.random(16)
        rho = DensityMatrix.from_array(np.diag(diagonal), 2, 4)
        self.assertEqual(diagonal_operator_schmidt_rank(diagonal, [4, 4])[0],
                         operator_schmidt_rank(rho)[0])

    def test_mps_split_reproduces_vector(self):
        rng = np.random.default_rng(2)
        vector = rng.standard_normal(27) + 1j * rng.standard_normal(27)
        tensors = mps_from_vector(vector, [3, 3, 3])
        np.testing.assert_allclose(contract_mps(tensors), vector, atol=1e-12)


class PurificationTest(SimpleTestCase):
    """Test cases for MPDO and purification conversions."""

    def setUp(self):
        self.rho = random_mps_mixture(3, 2, rank=2, bond=2, seed=4)

    def test_mpdo_roundtrip(self):
        mpdo = mpdo_from_dense(self.rho)
        self.assertEqual(mpdo.operator_schmidt_rank, operator_schmidt_rank(self.rho)[1])
        np.testing.assert_allclose(contract_mpdo(mpdo).data, self.rho.data, atol=1e-12)

    def test_mixture_osr_bound(self):
        self.assertLessEqual(operator_schmidt_rank(self.rho)[1], 2 * 2 ** 2)

    def test_standard_purification(self):
        psi = standard_purification(self.rho)
        self.assertEqual(psi.ancilla_dims, [1, 1, 2])
        self.assertLess(trace_norm(trace_out_ancilla(psi).data - self.rho.data), 1e-10)

    def test_cut_ranks_from_sweep(self):
        psi = standard_purification(self.rho)
        self.assertEqual(purification_cut_ranks(psi), psi.schmidt_ranks)
        osr = operator_schmidt_rank(self.rho)[0]
        for d, rank in zip(osr, purification_cut_ranks(psi)):
            self.assertLessEqual(d, rank ** 2)

    def test_osr_bounded_by_purification_rank(self):
        rng = np.random.default_rng(11)
        for instance in range(50):
            n_sites, rank, bond = int(rng.integers(2, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 3))
            with self.subTest(instance=instance, n_sites=n_sites, rank=rank, bond=bond):
                rho = random_mps_mixture(n_sites, 2, rank=rank, bond=bond, seed=instance)
                self.assertLessEqual(operator_schmidt_rank(rho)[1], rank * bond ** 2)
                psi = standard_purification(rho)
                sigma = trace_out_ancilla(psi)
                self.assertLess(trace_norm(sigma.data - rho.data), 1e-9)
                for d, cut_rank in zip(operator_schmidt_rank(sigma)[0], purification_cut_ranks(psi)):
                    self.assertLessEqual(d, cut_rank ** 2)

    def test_classical_purification(self):
        rho = DensityMatrix.from_array(np.diag([0.4, 0.3, 0.2, 0.1]), 2, 2, normalized=True)
        psi = classical_purification(rho)
        self.assertLess(trace_norm(trace_out_ancilla(psi).data - rho.data), 1e-12)
        self.assertEqual(purification_rank(psi), 2)
        with self.assertRaises(PreconditionError):
            classical_purification(bell_state())
