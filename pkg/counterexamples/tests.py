import numpy as np
from django.test import SimpleTestCase, override_settings

from purikit.exceptions import PreconditionError
from tensors.utils import contract_mpdo, operator_schmidt_rank, schmidt_rank
from .factorization import psd_factorization_search
from .polygons import (
    binary_sites, circulant_eigenvalues, fourier_mpo, fourier_support, is_circulant, mpo_entry,
    phi_schmidt_ranks, phi_states, rho_t, rho_t_cut_ranks, tgon_slack, verify_fourier_mpo,
)


class SlackMatrixTest(SimpleTestCase):
    """Test cases for regular polygon slack matrices."""

    def test_hexagon_row(self):
        slack = tgon_slack(6)
        np.testing.assert_allclose(slack.circulant_row, [0, 1, 2, 2, 1, 0], atol=1e-9)
        self.assertTrue(is_circulant(slack.entries))

    def test_rank_is_three(self):
        for t in (4, 5, 6, 8, 16, 32, 64, 128):
            with self.subTest(t=t):
                self.assertEqual(tgon_slack(t).rank(), 3)

    def test_slack_is_b_minus_ax(self):
        slack = tgon_slack(5)
        manual = slack.offsets[None, :] - slack.vertices @ slack.normals.T
        np.testing.assert_allclose(slack.entries, slack.normalization * manual, atol=1e-9)

    def test_invalid_sizes(self):
        with self.assertRaises(PreconditionError):
            tgon_slack(2)
        with self.assertRaises(PreconditionError):
            binary_sites(6)
        self.assertEqual(binary_sites(16), 4)

    def test_circulant_eigenvalues(self):
        slack = tgon_slack(8)
        eigenvalues = circulant_eigenvalues(slack)
        self.assertEqual(fourier_support(eigenvalues), [0, 1, 7])
        self.assertAlmostEqual(eigenvalues[0].real, slack.circulant_row.sum(), places=10)
        fourier = np.exp(2j * np.pi * np.outer(np.arange(8), np.arange(8)) / 8)
        np.testing.assert_allclose(slack.entries @ fourier, fourier * eigenvalues[None, :], atol=1e-9)


class RhoTTest(SimpleTestCase):
    """Test cases for the classical state built from the slack matrix."""

    def test_flat_layout_has_osr_three(self):
        slack = tgon_slack(6)
        self.assertEqual(rho_t_cut_ranks(slack), [3])
        self.assertEqual(operator_schmidt_rank(rho_t(slack))[0], [3])

    def test_binary_layout(self):
        ranks = rho_t_cut_ranks(tgon_slack(8), 'binary')
        self.assertEqual(len(ranks), 5)
        self.assertEqual(max(ranks), 3)
        with self.assertRaises(PreconditionError):
            rho_t_cut_ranks(tgon_slack(6), 'binary')

    def test_normalized(self):
        rho = rho_t(tgon_slack(6), normalize=True)
        self.assertAlmostEqual(rho.trace, 1.0, places=12)
        self.assertTrue(rho.normalized)


class FourierMpoTest(SimpleTestCase):
    """Test cases for the bond-dimension-3 MPO of rho_t."""

    def test_bond_dimensions(self):
        self.assertEqual(fourier_mpo(2).bond_dims, [3, 3, 3])
        self.assertEqual(fourier_mpo(3).bond_dims, [3] * 5)

    def test_dense_verification(self):
        self.assertLess(verify_fourier_mpo(2), 1e-9)
        self.assertLess(verify_fourier_mpo(3), 1e-9)

    def test_dense_build_for_sixteen_gon(self):
        mpo = fourier_mpo(4)
        self.assertEqual(mpo.bond_dims, [3] * 7)
        self.assertLess(verify_fourier_mpo(4), 1e-9)
        dense = rho_t(tgon_slack(16), layout='binary').data
        contracted = contract_mpdo(mpo).data
        self.assertLessEqual(np.max(np.abs(contracted - dense)), 1e-9 * np.max(np.abs(dense)))

    def test_binary_osr_at_most_three(self):
        for m in (2, 3, 4):
            with self.subTest(m=m):
                self.assertLessEqual(max(rho_t_cut_ranks(tgon_slack(2 ** m), 'binary')), 3)
                self.assertTrue(all(bond == 3 for bond in fourier_mpo(m).bond_dims))

    def test_sampled_verification(self):
        self.assertLess(verify_fourier_mpo(5, samples=50), 1e-9)

    @override_settings(PURIKIT_VERIFY_DENSE_MAX_M=1)
    def test_sampled_path_matches_entries(self):
        mpo = fourier_mpo(3)
        slack = tgon_slack(8)
        self.assertAlmostEqual(mpo_entry(mpo, 1, 3).real, slack.entries[1, 3], places=10)
        self.assertLess(verify_fourier_mpo(3, samples=20), 1e-9)

    def test_needs_two_bits(self):
        with self.assertRaises(PreconditionError):
            fourier_mpo(1)


class PhiStateTest(SimpleTestCase):
    """Test cases for the square-root purification of rho_t and its square."""

    def test_phi_purifies_rho_t(self):
        slack = tgon_slack(4)
        phi, _ = phi_states(slack)
        tensor = phi.amplitudes.reshape(4, 4, 4, 4)
        reduced = np.einsum('abcd,ebfd->acef', tensor, tensor.conj()).reshape(16, 16)
        np.testing.assert_allclose(reduced, rho_t(slack).data, atol=1e-12)

    def test_squared_state_has_rank_three(self):
        _, phi_sq = phi_states(tgon_slack(8))
        self.assertEqual(schmidt_rank(phi_sq)[0], [3])

    def test_binary_squared_state(self):
        _, phi_sq = phi_states(tgon_slack(8), 'binary')
        ranks = schmidt_rank(phi_sq)[0]
        self.assertEqual(max(ranks), 3)
        self.assertEqual(ranks, phi_schmidt_ranks(tgon_slack(8), 'binary')[1])

    def test_squared_state_rank_stays_three(self):
        for t in (4, 8, 16, 32):
            with self.subTest(t=t):
                self.assertEqual(phi_schmidt_ranks(tgon_slack(t))[1], [3])

    def test_phi_rank_grows_with_t(self):
        ranks = [max(phi_schmidt_ranks(tgon_slack(t))[0]) for t in (4, 8, 16, 32)]
        self.assertEqual(ranks[0], 3)
        self.assertEqual(ranks, sorted(ranks))
        self.assertGreater(ranks[-1], 3)


class PsdFactorizationTest(SimpleTestCase):
    """Test cases for the heuristic psd factorization search."""

    def test_rank_one_matrix(self):
        S = np.outer([1.0, 2.0, 3.0], [0.5, 1.0, 4.0])
        result = psd_factorization_search(S, 1, restarts=4, seed=0)
        self.assertTrue(result.success)
        np.testing.assert_allclose(result.reconstruct(), S, atol=1e-4)

    def test_identity_needs_two(self):
        result = psd_factorization_search(np.eye(2), 2, restarts=8, seed=1)
        self.assertLess(result.residual, 1e-3)
        self.assertGreaterEqual(result.min_eigenvalue(), -1e-12)

    def test_hexagon_factors_are_psd(self):
        slack = tgon_slack(6)
        result = psd_factorization_search(slack.entries, 3, restarts=2, seed=0, max_iter=200)
        self.assertEqual(len(result.E), 6)
        self.assertGreaterEqual(result.min_eigenvalue(), -1e-10)
        self.assertAlmostEqual(result.residual, np.linalg.norm(result.reconstruct() - slack.entries))
        self.assertIsInstance(result.success, bool)

    def test_search_is_seeded(self):
        S = np.outer([1.0, 2.0], [3.0, 1.0])
        first = psd_factorization_search(S, 1, restarts=1, seed=3)
        second = psd_factorization_search(S, 1, restarts=1, seed=3)
        self.assertEqual(first.residual, second.residual)

    def test_rejects_negative_entries(self):
        with self.assertRaises(PreconditionError):
            psd_factorization_search(np.array([[1.0, -1.0]]), 1)
