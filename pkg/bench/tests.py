import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from rest_framework.exceptions import ValidationError

from eigen.purification import truncate_spectrum
from tensors.spectra import assemble_density, make_distribution, random_mps_mixture
from tensors.states import DensityMatrix
from tensors.utils import operator_schmidt_rank
from .base import EXIT_IO, EXIT_VALIDATION
from .exports import clean, format_cell, read_csv, read_density_matrix, sidecar_path, write_density_matrix
from .models import RunRecord
from .runners import RunOutcome, dispatch
from .serializers import DensityMatrixSerializer, RunRecordSerializer
from .tasks import counterexample_task, fit_point_task


class WorkspaceMixin:
    """Temporary output directory per test."""

    def setUp(self):
        self.workdir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.workdir, ignore_errors=True)

    def run_command(self, name, **options):
        out = self.workdir / f'{name}.csv'
        call_command(name, out=str(out), stdout=StringIO(), **options)
        return read_csv(out), json.loads(sidecar_path(out).read_text())


class ExportTest(WorkspaceMixin, SimpleTestCase):
    """Test cases for result files."""

    def test_clean_replaces_non_finite(self):
        cleaned = clean({'a': np.float64('inf'), 'b': np.array([1, 2]), 'c': np.bool_(True)})
        self.assertEqual(cleaned, {'a': None, 'b': [1, 2], 'c': True})

    def test_format_cell(self):
        self.assertEqual(format_cell(None), '')
        self.assertEqual(format_cell(True), 'true')
        self.assertEqual(format_cell(0.1), '0.1')
        self.assertEqual(format_cell([3, 3]), '3;3')

    def test_density_matrix_file(self):
        """Test writing and reading back a density matrix."""
        rho = random_mps_mixture(2, 2, rank=2, bond=2, seed=0)
        path = write_density_matrix(self.workdir / 'rho.json', rho)
        loaded = read_density_matrix(path)
        self.assertEqual((loaded.n_sites, loaded.local_dim), (2, 2))
        np.testing.assert_allclose(loaded.data, rho.data, atol=1e-15)

    def test_density_matrix_size_mismatch(self):
        serializer = DensityMatrixSerializer(data={'n_sites': 2, 'local_dim': 2, 'entries': [[1, 0]] * 9})
        self.assertFalse(serializer.is_valid())

    def test_non_hermitian_input_rejected(self):
        serializer = DensityMatrixSerializer(
            data={'n_sites': 1, 'local_dim': 2, 'entries': [[1, 0], [1, 0], [0, 0], [0, 0]]}
        )
        self.assertTrue(serializer.is_valid())
        with self.assertRaises(ValidationError):
            serializer.save()


class TaskTest(SimpleTestCase):
    """Test cases for Celery tasks run in-process."""

    def test_fit_point_task(self):
        result = fit_point_task.apply(kwargs={'kind': 'uniform', 'n': 6, 'k': 2, 'with_gram': True}).get()
        self.assertTrue(result['success'])
        self.assertLess(result['distance'], 1e-7)
        self.assertEqual(len(result['scaled_gram']), 2)

    def test_fit_point_task_reports_errors(self):
        result = fit_point_task.apply(kwargs={'kind': 'zipf', 'n': 6, 'k': 2}).get()
        self.assertFalse(result['success'])
        self.assertIn('error', result)

    def test_counterexample_task(self):
        result = counterexample_task.apply(kwargs={'t': 8, 'layout': 'binary'}).get()
        self.assertTrue(result['success'])
        self.assertEqual(result['slack_rank'], 3)
        self.assertEqual(max(result['osr_cuts']), 3)
        self.assertEqual(result['sr_phi_sq'], 3)

    def test_dispatch_keeps_call_order(self):
        calls = [{'kind': 'uniform', 'n': n, 'k': 1} for n in (5, 3, 4)]
        self.assertEqual([r['n'] for r in dispatch(fit_point_task, calls, jobs=3)], [5, 3, 4])

    def test_outcome_status(self):
        self.assertEqual(RunOutcome([], [{}, {}]).status, 'ok')
        self.assertEqual(RunOutcome([], [{}, {}], failures=1).status, 'partial')
        self.assertEqual(RunOutcome([], [{}], failures=1).status, 'failed')


class CounterexampleCommandTest(WorkspaceMixin, TestCase):
    """Test cases for the counterexample command."""

    def test_rank_profile(self):
        """Test that the slack rank and OSR stay 3 while t grows."""
        rows, sidecar = self.run_command('counterexample', t_list='4,6,8')
        self.assertEqual([row['t'] for row in rows], ['4', '6', '8'])
        self.assertTrue(all(row['slack_rank'] == '3' for row in rows))
        self.assertTrue(all(row['osr_max'] == '3' for row in rows))
        self.assertTrue(sidecar['summary']['slack_rank_constant'])
        self.assertEqual(sidecar['summary']['sr_phi_sq_values'], [3])
        self.assertEqual(sidecar['status'], 'ok')

    def test_run_record_stored(self):
        self.run_command('counterexample', t_list='6')
        record = RunRecord.objects.get()
        self.assertEqual(record.command, 'counterexample')
        self.assertEqual(record.config['t_list'], [6])
        data = RunRecordSerializer(record).data
        self.assertEqual(data['status'], 'ok')

    def test_reruns_are_identical(self):
        first = self.workdir / 'first.csv'
        second = self.workdir / 'second.csv'
        for out in (first, second):
            call_command('counterexample', t_list='4,8', r_list='1', restarts=1, out=str(out), stdout=StringIO())
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_binary_layout_needs_powers_of_two(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('counterexample', t_list='6', layout='binary')
        self.assertEqual(ctx.exception.returncode, EXIT_VALIDATION)

    def test_json_format(self):
        out = self.workdir / 'result.json'
        call_command('counterexample', t_list='5', out=str(out), format='json', stdout=StringIO())
        payload = json.loads(out.read_text())
        self.assertEqual(payload['rows'][0]['slack_rank'], 3)
        self.assertFalse(sidecar_path(out).exists())


class DistributionCommandTest(WorkspaceMixin, TestCase):
    """Test cases for the sos benchmark commands."""

    def test_bench_distributions(self):
        rows, sidecar = self.run_command('bench_distributions', kinds='uniform', n_list='10', k_min=1, k_max=3)
        self.assertEqual([row['k'] for row in rows], ['1', '2', '3'])
        self.assertTrue(all(float(row['distance']) < 1e-7 for row in rows))
        self.assertIn('error', sidecar['summary']['decay_fits'][0])

    def test_invalid_k_range(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('bench_distributions', kinds='uniform', n_list='10', k_min=4, k_max=2)
        self.assertEqual(ctx.exception.returncode, EXIT_VALIDATION)

    def test_poly_export(self):
        rows, sidecar = self.run_command('poly_export', kind='uniform', n=4, k_list='1', grid=5)
        curve = [row for row in rows if row['record'] == 'curve']
        eigen = [row for row in rows if row['record'] == 'eigenvalue']
        self.assertEqual(len(curve), 5)
        self.assertEqual(len(eigen), 1)
        for row in curve:
            self.assertAlmostEqual(float(row['p_minus_lam']), 0.25 - float(row['lam']), places=6)

    def test_compare_methods(self):
        rows, sidecar = self.run_command('compare_methods', kind='uniform', n=8, D=2, eps_list='0.1', k_max=2)
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]['sos_k'], '1')
        self.assertEqual(rows[0]['sos_bound'], '1')
        self.assertEqual(rows[0]['eigen_s'], '8')
        self.assertEqual(rows[0]['eigen_bound'], '128')
        self.assertEqual(rows[0]['winner'], 'sos')
        self.assertIsNone(sidecar['summary']['decay_fit'])


class PurifyCommandTest(WorkspaceMixin, TestCase):
    """Test cases for the purify command."""

    def write_input(self, rho: DensityMatrix) -> str:
        return str(write_density_matrix(self.workdir / 'rho.json', rho))

    def test_maximally_mixed_state(self):
        """Test that I/4 gets a purification of rank 1 from the exact polynomial."""
        rho = DensityMatrix.from_array(np.eye(4) / 4, 2, 2, normalized=True)
        rows, sidecar = self.run_command('purify', input=self.write_input(rho), method='sos_exact')
        self.assertEqual(sidecar['summary']['purification_rank'], 1)
        self.assertLess(sidecar['summary']['trace_distance'], 1e-10)
        self.assertEqual(rows[0]['osr_le_rank_squared'], 'true')

    def test_eigen_exact(self):
        rho = random_mps_mixture(3, 2, rank=2, bond=2, seed=1)
        rows, sidecar = self.run_command('purify', input=self.write_input(rho), method='eigen_exact')
        self.assertEqual(len(rows), 2)
        self.assertLess(sidecar['summary']['trace_distance'], 1e-8)
        self.assertTrue(sidecar['summary']['bound_holds'])
        self.assertTrue(sidecar['summary']['certificate']['holds'])

    def test_eigen_trunc(self):
        rho = assemble_density(make_distribution('equally_spaced', 4), seed=3, local_dim=2)
        rows, sidecar = self.run_command('purify', input=self.write_input(rho), method='eigen_trunc', s=2)
        self.assertAlmostEqual(sidecar['summary']['trace_distance'], 0.6, places=9)
        self.assertAlmostEqual(sidecar['summary']['tail_bound'], 0.6, places=12)
        sigma = truncate_spectrum(rho, 2).sigma
        self.assertEqual(sidecar['summary']['certificate']['D'], operator_schmidt_rank(sigma)[1])
        self.assertEqual(sidecar['summary']['bound'], operator_schmidt_rank(sigma)[1] * 4)
        self.assertTrue(sidecar['summary']['bound_holds'])

    def test_sos_sdp_needs_k(self):
        rho = DensityMatrix.from_array(np.eye(4) / 4, 2, 2, normalized=True)
        with self.assertRaises(CommandError) as ctx:
            self.run_command('purify', input=self.write_input(rho), method='sos_sdp')
        self.assertEqual(ctx.exception.returncode, EXIT_VALIDATION)

    def test_missing_input(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('purify', input=str(self.workdir / 'missing.json'), method='sos_exact')
        self.assertEqual(ctx.exception.returncode, EXIT_IO)

    def test_malformed_input(self):
        path = self.workdir / 'broken.json'
        path.write_text('{"n_sites": 1, "local_dim": 2, "entries": [[1, 0], [0, 0]]}')
        with self.assertRaises(CommandError) as ctx:
            self.run_command('purify', input=str(path), method='eigen_exact')
        self.assertEqual(ctx.exception.returncode, EXIT_VALIDATION)
