"""
Experiment runners behind the management commands.

Every runner takes a validated config dict and returns a RunOutcome. Independent
points go through Celery tasks; results are merged in a fixed key order so the
CSV body is identical between reruns.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from celery import group
from django.conf import settings

from eigen.purification import bound_table, eigen_purification, minimal_truncation, truncate_spectrum
from purikit.exceptions import PreconditionError
from sos.fitting import CurvePoint, check_monotone, fit_exponential, k_for_accuracy, fit_sos
from sos.polynomials import (
    GramPolynomial, build_purifying_state, eval_poly, exact_gram, sos_rank_bound,
)
from tensors.spectra import Spectrum, distinct_values, make_distribution
from tensors.states import DensityMatrix
from tensors.utils import operator_schmidt_rank, purification_cut_ranks, trace_norm, trace_out_ancilla
from .exports import read_density_matrix
from .serializers import (
    DecayFitSerializer, EigenCertificateSerializer, MPSPurificationSerializer,
)
from .tasks import counterexample_task, fit_point_task

logger = logging.getLogger(__name__)

COLUMNS = {
    'counterexample': ['t', 'layout', 'slack_rank', 'osr_cuts', 'osr_max', 'sr_phi', 'sr_phi_sq',
                       'psd_search', 'status'],
    'bench_distributions': ['distribution', 'n', 'k', 'distance', 'status', 'flagged'],
    'poly_export': ['record', 'k', 'lam', 'p_minus_lam', 'floor'],
    'compare_methods': ['eps', 'sos_k', 'sos_bound', 'sos_decay_bound', 'eigen_s', 'eigen_bound',
                        'eigen_formula_bound', 'winner'],
    'purify': ['cut', 'purification_rank', 'osr', 'osr_le_rank_squared'],
}


@dataclass
class RunOutcome:
    columns: List[str]
    rows: List[dict]
    summary: dict = field(default_factory=dict)
    failures: int = 0

    @property
    def status(self) -> str:
        if not self.failures:
            return 'ok'
        return 'failed' if self.failures >= max(len(self.rows), 1) else 'partial'


def dispatch(task, calls: Sequence[dict], jobs: int = 1) -> List[dict]:
    """
    Run ``task`` once per kwargs dict and return the results in call order.

    Without a broker, or with jobs=1, the calls run in-process one after another;
    otherwise groups of at most ``jobs`` tasks are sent to the workers.
    """
    if settings.CELERY_TASK_ALWAYS_EAGER or jobs <= 1:
        return [task.apply(kwargs=kwargs).get() for kwargs in calls]
    results = []
    for start in range(0, len(calls), jobs):
        chunk = calls[start:start + jobs]
        results.extend(group(task.s(**kwargs) for kwargs in chunk).apply_async().get())
    return results


def run_counterexample(config: dict) -> RunOutcome:
    calls = [
        {'t': t, 'layout': config['layout'], 'r_list': config['r_list'],
         'restarts': config['restarts'], 'seed': config['seed'], 'tol': config['tol']}
        for t in sorted(set(config['t_list']))
    ]
    rows, failures = [], 0
    for result in dispatch(counterexample_task, calls, config['jobs']):
        if not result['success']:
            failures += 1
            rows.append({'t': result['t'], 'layout': result['layout'], 'status': 'error'})
            continue
        rows.append({
            't': result['t'],
            'layout': result['layout'],
            'slack_rank': result['slack_rank'],
            'osr_cuts': result['osr_cuts'],
            'osr_max': max(result['osr_cuts']),
            'sr_phi': result['sr_phi'],
            'sr_phi_sq': result['sr_phi_sq'],
            'psd_search': [f"{item['r']}:{item['residual']:.6e}" for item in result['psd_search']],
            'status': 'ok',
        })
    sr_phi = [row['sr_phi'] for row in rows if row['status'] == 'ok']
    summary = {
        'slack_rank_constant': len({row.get('slack_rank') for row in rows if row['status'] == 'ok'}) == 1,
        'sr_phi_sq_values': sorted({row['sr_phi_sq'] for row in rows if row['status'] == 'ok'}),
        'sr_phi_nondecreasing': all(a <= b for a, b in zip(sr_phi, sr_phi[1:])),
    }
    return RunOutcome(COLUMNS['counterexample'], rows, summary, failures)


def _fit_calls(kind: str, n: int, ks: Sequence[int], config: dict, **extra) -> List[dict]:
    return [{'kind': kind, 'n': n, 'k': k, 'b': config['b'], 'seed': config['seed'], **extra}
            for k in ks]


def _curve(results: Sequence[dict], label: str) -> List[CurvePoint]:
    points = [CurvePoint(k=r['k'], distance=r['distance'], status=r['status'])
              for r in results if r['success']]
    return check_monotone(points, label=label)


def run_bench_distributions(config: dict) -> RunOutcome:
    ks = list(range(config['k_min'], config['k_max'] + 1))
    keys = [(kind, n) for kind in sorted(set(config['kinds'])) for n in sorted(set(config['n_list']))]
    calls = [call for kind, n in keys for call in _fit_calls(kind, n, ks, config)]
    results = dispatch(fit_point_task, calls, config['jobs'])

    rows, fits, failures = [], [], 0
    for kind, n in keys:
        block = [r for r in results if r['kind'] == kind and r['n'] == n]
        failures += sum(1 for r in block if not r['success'])
        curve = _curve(block, f"{kind}/n={n}")
        flagged = {point.k for point in curve if point.flagged}
        for r in sorted(block, key=lambda r: r['k']):
            rows.append({
                'distribution': kind,
                'n': n,
                'k': r['k'],
                'distance': r.get('distance'),
                'status': r['status'] if r['success'] else 'error',
                'flagged': r['k'] in flagged,
            })
        entry = {'distribution': kind, 'n': n}
        try:
            decay = fit_exponential(curve, (config['fit_k_min'], config['fit_k_max']))
            entry.update(DecayFitSerializer(decay).data)
        except PreconditionError as e:
            entry['error'] = ' '.join(e.messages)
        fits.append(entry)

    b_spread = {}
    for kind in sorted(set(config['kinds'])):
        values = [f['B'] for f in fits if f['distribution'] == kind and f.get('B') is not None]
        if len(values) > 1 and np.mean(values) > 0:
            b_spread[kind] = float((max(values) - min(values)) / np.mean(values))
    return RunOutcome(COLUMNS['bench_distributions'], rows,
                      {'decay_fits': fits, 'b_relative_spread': b_spread}, failures)


def _gram_from_result(result: dict) -> GramPolynomial:
    return GramPolynomial(scaled_gram=np.array(result['scaled_gram']), origin='sdp',
                          scale=result['scale'])


def run_poly_export(config: dict) -> RunOutcome:
    kind, n = config['kind'], config['n']
    spec = make_distribution(kind, n, b=config['b'], seed=config['seed'])
    ks = sorted(set(config['k_list']))
    results = dispatch(fit_point_task, _fit_calls(kind, n, ks, config, with_gram=True), config['jobs'])

    grid = np.linspace(0.0, float(spec.values[0]), config['grid'])
    abscissas = distinct_values(spec)
    rows, distances, failures = [], {}, 0
    for result in results:
        k = result['k']
        if not result['success']:
            failures += 1
            continue
        gram = _gram_from_result(result)
        distances[k] = result['distance']
        for lam, value in zip(grid, eval_poly(gram, grid)):
            rows.append({'record': 'curve', 'k': k, 'lam': lam, 'p_minus_lam': value - lam, 'floor': -lam})
        for lam, value in zip(abscissas, eval_poly(gram, abscissas)):
            rows.append({'record': 'eigenvalue', 'k': k, 'lam': lam, 'p_minus_lam': value - lam,
                         'floor': -lam})
    return RunOutcome(COLUMNS['poly_export'], rows, {'distances': distances}, failures)


def run_compare_methods(config: dict) -> RunOutcome:
    kind, n, D = config['kind'], config['n'], config['D']
    spec = make_distribution(kind, n, b=config['b'], seed=config['seed'])
    ks = list(range(1, config['k_max'] + 1))
    results = dispatch(fit_point_task, _fit_calls(kind, n, ks, config), config['jobs'])
    curve = _curve(results, f"{kind}/n={n}")
    failures = sum(1 for r in results if not r['success'])

    try:
        decay = fit_exponential(curve)
    except PreconditionError:
        decay = None

    rows = []
    for eps in config['eps_list']:
        reached = [point.k for point in curve if point.distance <= eps]
        sos_k = min(reached) if reached else None
        sos_bound = sos_rank_bound(D, sos_k) if sos_k else None
        decay_bound = None
        if decay is not None and eps > 0 and decay.B > 0:
            decay_bound = sos_rank_bound(D, k_for_accuracy(decay, eps))
        eigen_s = minimal_truncation(spec, eps)
        eigen_bound = D * eigen_s ** 2
        try:
            formula = bound_table(kind, D, eps, n, b=config['b'])
        except PreconditionError:
            formula = None
        if sos_bound is None:
            winner = 'eigen'
        else:
            winner = 'sos' if sos_bound < eigen_bound else ('tie' if sos_bound == eigen_bound else 'eigen')
        rows.append({
            'eps': eps,
            'sos_k': sos_k,
            'sos_bound': sos_bound,
            'sos_decay_bound': decay_bound,
            'eigen_s': eigen_s,
            'eigen_bound': eigen_bound,
            'eigen_formula_bound': formula,
            'winner': winner,
        })
    summary = {
        'curve': [{'k': point.k, 'distance': point.distance, 'status': point.status} for point in curve],
        'decay_fit': DecayFitSerializer(decay).data if decay is not None else None,
    }
    return RunOutcome(COLUMNS['compare_methods'], rows, summary, failures)


def _purify(rho: DensityMatrix, config: dict):
    """Return (purification, sigma, distance, bound, extra summary) for the chosen method."""
    method, tol = config['method'], config['tol']
    D = operator_schmidt_rank(rho, tol)[1]
    if method in ('sos_exact', 'sos_sdp'):
        spec = Spectrum.from_density(rho, tol)
        if method == 'sos_exact':
            gram = exact_gram(spec)
        else:
            gram = fit_sos(spec, config['k'], ambient_dim=rho.dim).gram
        psi = build_purifying_state(rho, gram, tol)
        sigma = trace_out_ancilla(psi)
        bound = sos_rank_bound(D, gram.degree_param)
        return psi, trace_norm(rho.data - sigma.data), bound, {'k': gram.degree_param}
    if method == 'eigen_exact':
        psi, certificate = eigen_purification(rho, tol)
        sigma = trace_out_ancilla(psi)
        return psi, trace_norm(rho.data - sigma.data), certificate.bound_Dn2, {
            'certificate': EigenCertificateSerializer(certificate).data,
        }
    truncation = truncate_spectrum(rho, config['s'], tol)
    psi, certificate = eigen_purification(truncation.sigma, tol)
    # D of sigma_s, the state actually purified
    return psi, truncation.distance, certificate.bound_Dn2, {
        'tail_bound': truncation.tail_bound,
        'certificate': EigenCertificateSerializer(certificate).data,
    }


def run_purify(config: dict, rho: Optional[DensityMatrix] = None) -> RunOutcome:
    rho = read_density_matrix(config['input']) if rho is None else rho
    psi, distance, bound, extra = _purify(rho, config)
    ranks = purification_cut_ranks(psi, config['tol'])
    osr = operator_schmidt_rank(rho, config['tol'])[0]
    rows = [
        {'cut': cut + 1, 'purification_rank': rank, 'osr': d, 'osr_le_rank_squared': d <= rank ** 2}
        for cut, (rank, d) in enumerate(zip(ranks, osr))
    ]
    purification_rank = max(ranks, default=1)
    if purification_rank > bound:
        logger.warning(f"purification rank {purification_rank} exceeds the bound {bound}")
    summary: Dict = {
        'method': config['method'],
        'trace_distance': distance,
        'purification_rank': purification_rank,
        'bound': bound,
        'bound_holds': purification_rank <= bound,
        'purification': MPSPurificationSerializer(psi).data,
        **extra,
    }
    return RunOutcome(COLUMNS['purify'], rows, summary)


RUNNERS = {
    'counterexample': run_counterexample,
    'bench_distributions': run_bench_distributions,
    'poly_export': run_poly_export,
    'compare_methods': run_compare_methods,
    'purify': run_purify,
}
