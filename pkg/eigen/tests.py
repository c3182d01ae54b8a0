import math

import numpy as np
from django.test import SimpleTestCase

from purikit.exceptions import PreconditionError
from tensors.spectra import assemble_density, make_distribution, random_mps_mixture
from tensors.states import DensityMatrix
from tensors.utils import operator_schmidt_rank, purification_cut_ranks, trace_norm, trace_out_ancilla
from .purification import (
    bound_table, eigen_purification, minimal_truncation, select_product_basis, truncate_spectrum,
)


class ProductBasisTest(SimpleTestCase):
    """Test cases for choosing product states whose images span the range."""

    def test_diagonal_state(self):
        rho = DensityMatrix.from_array(np.diag([0.5, 0.0, 0.3, 0.2]), 2, 2)
        self.assertEqual(select_product_basis(rho), [0, 2, 3])

    def test_bell_state_needs_one_label(self):
        vector = np.array([1, 0, 0, 1]) / np.sqrt(2)
        rho = DensityMatrix.from_array(np.outer(vector, vector), 2, 2)
        self.assertEqual(select_product_basis(rho), [0])

    def test_labels_are_lexicographic(self):
        rho = random_mps_mixture(2, 3, rank=3, bond=2, seed=5)
        labels = select_product_basis(rho)
        self.assertEqual(len(labels), 3)
        self.assertEqual(labels, sorted(labels))
        self.assertEqual(np.linalg.matrix_rank(rho.data[:, labels], tol=1e-9), 3)


class EigenPurificationTest(SimpleTestCase):
    """Test cases for purifications built from product-state images."""

    def test_mixture_of_product_states(self):
        rho = random_mps_mixture(4, 2, rank=3, bond=1, seed=0)
        psi, certificate = eigen_purification(rho)
        self.assertLess(trace_norm(trace_out_ancilla(psi).data - rho.data), 1e-8)
        np.testing.assert_allclose(certificate.f_matrix @ certificate.g_matrix, np.eye(3), atol=1e-8)
        self.assertEqual(certificate.n, 3)
        self.assertTrue(certificate.holds)
        self.assertLessEqual(certificate.purification_rank, certificate.bound_Dn2)
        self.assertEqual(psi.ancilla_dims, [1, 1, 1, 3])

    def test_pure_state(self):
        rho = random_mps_mixture(3, 2, rank=1, bond=2, seed=2)
        psi, certificate = eigen_purification(rho)
        self.assertLess(trace_norm(trace_out_ancilla(psi).data - rho.data), 1e-8)
        self.assertLessEqual(certificate.purification_rank, certificate.D)

    def test_random_mixtures(self):
        rng = np.random.default_rng(7)
        for instance in range(50):
            n_sites, rank, bond = int(rng.integers(3, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 3))
            with self.subTest(instance=instance, n_sites=n_sites, rank=rank, bond=bond):
                rho = random_mps_mixture(n_sites, 2, rank=rank, bond=bond, seed=100 + instance)
                psi, certificate = eigen_purification(rho)
                sigma = trace_out_ancilla(psi)
                self.assertLessEqual(trace_norm(sigma.data - rho.data), 1e-8)
                self.assertEqual(certificate.n, rank)
                self.assertLessEqual(max(certificate.chi_sr), certificate.D)
                self.assertLessEqual(max(certificate.per_eigenvector_sr), certificate.bound_Dn)
                self.assertLessEqual(certificate.purification_rank, certificate.bound_Dn2)
                for osr, bond_dim in zip(operator_schmidt_rank(sigma)[0], purification_cut_ranks(psi)):
                    self.assertLessEqual(osr, bond_dim ** 2)

    def test_classical_state(self):
        rho = DensityMatrix.from_array(np.diag([0.4, 0.3, 0.2, 0.1]), 2, 2, normalized=True)
        psi, certificate = eigen_purification(rho)
        self.assertLess(trace_norm(trace_out_ancilla(psi).data - rho.data), 1e-10)
        self.assertEqual(certificate.product_indices, [0, 1, 2, 3])
        self.assertEqual(max(certificate.per_eigenvector_sr), 1)


class TruncationTest(SimpleTestCase):
    """Test cases for spectral truncation and the bound table."""

    def setUp(self):
        self.spec = make_distribution('equally_spaced', 4)
        self.rho = assemble_density(self.spec, seed=3, local_dim=2)

    def test_truncation_distance(self):
        result = truncate_spectrum(self.rho, 2)
        self.assertAlmostEqual(result.distance, 0.6, places=9)
        self.assertAlmostEqual(result.tail_bound, 0.6, places=12)
        self.assertAlmostEqual(result.sigma.trace, 1.0, places=12)

    def test_full_truncation_is_identity(self):
        result = truncate_spectrum(self.rho, 4)
        self.assertLess(result.distance, 1e-10)
        with self.assertRaises(PreconditionError):
            truncate_spectrum(self.rho, 5)

    def test_truncation_distance_equals_tail(self):
        for kind in ('equally_spaced', 'one_fixed', 'exponential', 'random'):
            spec = make_distribution(kind, 16, seed=8)
            rho = assemble_density(spec, seed=9, local_dim=2)
            for s in (1, 5, 12, 16):
                with self.subTest(kind=kind, s=s):
                    result = truncate_spectrum(rho, s)
                    self.assertLessEqual(abs(result.distance - result.tail_bound), 1e-9)

    def test_minimal_truncation(self):
        self.assertEqual(minimal_truncation(self.spec, 0.65), 2)
        self.assertEqual(minimal_truncation(self.spec, 0.0), 4)
        self.assertEqual(minimal_truncation(self.spec, 2.0), 1)

    def test_bound_table(self):
        self.assertEqual(bound_table('uniform', 1, 2.0, 10), 0.0)
        self.assertEqual(bound_table('uniform', 1, 0.0, 10), 100.0)
        self.assertAlmostEqual(bound_table('exponential', 2, 0.01, 50, b=1.0),
                               2 * math.log(200) ** 2, places=9)
        self.assertAlmostEqual(bound_table('exponential', 2, 0.01, 50, b=1.0), 56.15, delta=0.01)

    def test_bound_table_rejects_bad_input(self):
        with self.assertRaises(PreconditionError):
            bound_table('exponential', 1, 0.0, 10)
        with self.assertRaises(PreconditionError):
            bound_table('uniform', 1, 2.5, 10)
        with self.assertRaises(PreconditionError):
            bound_table('zipf', 1, 0.1, 10)
