from celery import shared_task

from counterexamples.factorization import psd_factorization_search
from counterexamples.polygons import phi_schmidt_ranks, rho_t_cut_ranks, tgon_slack
from sos.fitting import fit_sos
from tensors.spectra import make_distribution
import logging

logger = logging.getLogger(__name__)


@shared_task
def fit_point_task(kind: str, n: int, k: int, b: float = 1.0, seed: int = 0,
                   ambient_dim: int = None, with_gram: bool = False):
    """
    Celery task fitting one sos polynomial to one benchmark spectrum.

    Args:
        kind: distribution name
        n: number of nonzero eigenvalues
        k: Gram matrix size
        b: decay rate of the exponential distribution
        seed: seed of the random distribution
        ambient_dim: total dimension, defaults to n
        with_gram: include the scaled Gram matrix and its scale in the result
    """
    try:
        spec = make_distribution(kind, n, b=b, seed=seed, ambient_dim=ambient_dim)
        fit = fit_sos(spec, k)

        result = {
            'success': True,
            'kind': kind,
            'n': n,
            'k': k,
            'distance': fit.distance,
            'status': fit.status,
            'iterations': fit.iterations,
            'raw_trace': fit.raw_trace,
        }
        if with_gram:
            result['scaled_gram'] = fit.gram.scaled_gram.real.tolist()
            result['scale'] = fit.gram.scale

        logger.info(f"Fitted {kind} n={n} k={k}: distance {fit.distance:.3e} [{fit.status}]")
        return result

    except Exception as e:
        logger.error(f"Error fitting {kind} n={n} k={k}: {e}")
        return {
            'success': False,
            'kind': kind,
            'n': n,
            'k': k,
            'error': str(e)
        }


@shared_task
def counterexample_task(t: int, layout: str = 'flat', r_list: list = None, restarts: int = 4,
                        seed: int = 0, tol: float = None):
    """
    Celery task computing the rank profile of one t-gon instance.

    Args:
        t: number of polygon vertices
        layout: flat (two t-level sites) or binary (2 log2 t qubits)
        r_list: factor sizes tried by the psd factorization search
        restarts: random starts per factor size
        seed: seed of the psd search
        tol: relative rank tolerance
    """
    try:
        slack = tgon_slack(t)
        osr_cuts = rho_t_cut_ranks(slack, layout, tol)
        sr_phi, sr_phi_sq = phi_schmidt_ranks(slack, layout, tol)

        psd_results = []
        for r in r_list or []:
            search = psd_factorization_search(slack.entries, r, restarts=restarts, seed=seed)
            psd_results.append({'r': r, 'residual': search.residual, 'success': search.success})

        logger.info(f"Counterexample t={t} ({layout}): OSR {max(osr_cuts)}, SR(phi) {max(sr_phi)}")
        return {
            'success': True,
            't': t,
            'layout': layout,
            'slack_rank': slack.rank(),
            'osr_cuts': osr_cuts,
            'sr_phi': max(sr_phi),
            'sr_phi_cuts': sr_phi,
            'sr_phi_sq': max(sr_phi_sq),
            'sr_phi_sq_cuts': sr_phi_sq,
            'psd_search': psd_results,
        }

    except Exception as e:
        logger.error(f"Error analysing t-gon t={t}: {e}")
        return {
            'success': False,
            't': t,
            'layout': layout,
            'error': str(e)
        }
