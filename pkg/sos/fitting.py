"""Fitting sos polynomials to spectra with the SDP, and exponential decay fits over k."""
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from purikit.exceptions import NumericalFailure, PreconditionError
from tensors.spectra import Spectrum, distinct_count
from .polynomials import (
    GramPolynomial, exact_gram, rescaled, sigma_of_poly, sos_distance, sos_rank_bound, vandermonde,
)
from .sdp import build_standard_form, solve

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-6
LOG_FIT_FLOOR = 1e-9
DEFAULT_FIT_RANGE = (2, 4)


@dataclass(frozen=True, eq=False)
class FitResult:
    k: int
    gram: GramPolynomial
    distance: float
    status: str
    raw_trace: float
    iterations: int = 0
    objective: Optional[float] = None


class CurvePoint(NamedTuple):
    k: int
    distance: float
    status: str
    flagged: bool = False


@dataclass(frozen=True)
class DecayFit:
    A: float
    B: float
    residual: float
    k_range: Tuple[int, int]

    def predict(self, k) -> np.ndarray:
        return self.A * np.exp(-self.B * np.asarray(k, dtype=float))


@dataclass(frozen=True)
class RescaleReport:
    k: int
    distance_rescaled: float
    distance_raw: float
    cond_rescaled: float
    cond_raw: float

    @property
    def preferred(self) -> str:
        return 'rescaled' if self.distance_rescaled <= self.distance_raw else 'raw'


def _embed(gp: GramPolynomial, k: int) -> GramPolynomial:
    """Same polynomial with its Gram matrix in the top-left corner of a k x k one."""
    m = gp.degree_param
    gram = np.zeros((k, k), dtype=gp.scaled_gram.dtype)
    gram[:m, :m] = gp.scaled_gram
    return dataclasses.replace(gp, scaled_gram=gram)


def fit_sos(spec: Spectrum, k: int, ambient_dim: Optional[int] = None, rescale: bool = True,
            tol_gap: Optional[float] = None, max_iter: Optional[int] = None,
            feastol: Optional[float] = None,
            previous: Optional[GramPolynomial] = None) -> FitResult:
    """
    Best degree-2(k-1) sos approximation of the spectrum in trace distance.

    Args:
        spec: target spectrum; zeros up to ``ambient_dim`` take part in the fit
        k: Gram matrix size
        ambient_dim: total dimension d**N (defaults to the spectrum's)
        rescale: fit in the variable lam / lam_1
        previous: a fit with smaller k; its embedding is kept when it is closer

    Returns:
        FitResult with the extracted Gram polynomial and its distance. The
        distance never exceeds that of ``previous``; without one, a solver run
        that is not optimal falls back to the fit at k - 1.
    """
    if k < 1:
        raise PreconditionError("k must be at least 1")
    ambient = spec.ambient_dim if ambient_dim is None else ambient_dim
    target = spec if ambient == spec.ambient_dim else dataclasses.replace(spec, ambient_dim=ambient)
    solver_options = {'tol_gap': tol_gap, 'max_iter': max_iter, 'feastol': feastol}

    problem = build_standard_form(target, k, rescale=rescale)
    solution = solve(problem, **solver_options)
    gram = solution.gram()
    distance = sos_distance(target, gram)
    status = solution.status

    # with k >= m the interpolating polynomial is feasible and exact
    if k >= distinct_count(target):
        try:
            exact = _embed(exact_gram(target, rescale=rescale), k)
        except NumericalFailure as e:
            logger.warning(f"exact Gram unavailable at k={k}: {e}")
        else:
            exact_distance = sos_distance(target, exact)
            if exact_distance < distance:
                gram, distance, status = exact, exact_distance, 'exact'

    if previous is None and status not in ('optimal', 'exact') and k > 1:
        previous = fit_sos(target, k - 1, rescale=rescale, **solver_options).gram
    if previous is not None and previous.degree_param <= k:
        embedded = _embed(previous, k)
        embedded_distance = sos_distance(target, embedded)
        if embedded_distance < distance:
            logger.info(f"fit k={k} [{status}] replaced by the k={previous.degree_param} fit")
            gram, distance, status = embedded, embedded_distance, 'embedded'

    raw_trace = sigma_of_poly(target, gram).params['raw_trace']
    logger.debug(f"fit k={k} on {target.kind} (n={target.n_nonzero}): distance={distance:.3e} [{status}]")
    return FitResult(
        k=k,
        gram=gram,
        distance=distance,
        status=status,
        raw_trace=raw_trace,
        iterations=solution.iterations,
        objective=solution.objective,
    )


def check_monotone(points: Sequence[CurvePoint], label: str = '') -> List[CurvePoint]:
    """Flag points whose distance exceeds the previous one by more than MONOTONE_SLACK."""
    checked = []
    previous = None
    for point in sorted(points, key=lambda p: p.k):
        flagged = previous is not None and point.distance > previous + MONOTONE_SLACK
        if flagged:
            logger.warning(
                f"distance curve {label} increases at k={point.k}: "
                f"{previous:.3e} -> {point.distance:.3e}"
            )
        checked.append(point._replace(flagged=flagged))
        previous = point.distance if previous is None else min(previous, point.distance)
    return checked


def distance_curve(spec: Spectrum, k_min: int, k_max: int, **fit_options) -> List[CurvePoint]:
    """
    Cold-started fits for k_min..k_max, ordered by k.

    Each fit is compared against the embedding of the one before it, so the
    curve cannot rise when the solver stalls.
    """
    if k_min < 1 or k_min > k_max:
        raise PreconditionError(f"invalid k range {k_min}..{k_max}")
    points = []
    previous = None
    for k in range(k_min, k_max + 1):
        result = fit_sos(spec, k, previous=previous, **fit_options)
        previous = result.gram
        points.append(CurvePoint(k=k, distance=result.distance, status=result.status))
    return check_monotone(points, label=spec.kind)


def fit_exponential(curve: Sequence, k_range: Tuple[int, int] = DEFAULT_FIT_RANGE) -> DecayFit:
    """
    Least-squares fit of ln(distance) = ln A - B k over ``k_range``.

    Entries of ``curve`` are (k, distance, ...) tuples or CurvePoints. Distances
    below LOG_FIT_FLOOR are left out of the fit.
    """
    low, high = k_range
    ks, logs = [], []
    for point in curve:
        k, distance = int(point[0]), float(point[1])
        if not low <= k <= high:
            continue
        if distance < 0:
            raise PreconditionError(f"negative distance {distance!r} at k={k}")
        if distance < LOG_FIT_FLOOR:
            continue
        ks.append(k)
        logs.append(math.log(distance))
    if len(ks) < 2:
        raise PreconditionError(
            f"need two distances above {LOG_FIT_FLOOR} in k={low}..{high}, found {len(ks)}"
        )
    slope, intercept = np.polyfit(np.array(ks, dtype=float), np.array(logs), 1)
    fitted = intercept + slope * np.array(ks, dtype=float)
    residual = float(np.sqrt(np.mean((fitted - np.array(logs)) ** 2)))
    return DecayFit(A=float(np.exp(intercept)), B=float(-slope), residual=residual,
                    k_range=(int(low), int(high)))


def rescale_check(spec: Spectrum, k: int = 3, **fit_options) -> RescaleReport:
    """Compare fits with and without lam / lam_1 rescaling."""
    fit_rescaled = fit_sos(spec, k, rescale=True, **fit_options)
    fit_raw = fit_sos(spec, k, rescale=False, **fit_options)
    full = spec.full_values()
    scale = full[0] if full[0] > 0 else 1.0
    report = RescaleReport(
        k=k,
        distance_rescaled=fit_rescaled.distance,
        distance_raw=fit_raw.distance,
        cond_rescaled=float(np.linalg.cond(vandermonde(full / scale, k))),
        cond_raw=float(np.linalg.cond(vandermonde(full, k))),
    )
    if report.distance_rescaled > report.distance_raw + 1e-8:
        logger.warning(
            f"rescaled fit worse than raw on {spec.kind}: "
            f"{report.distance_rescaled:.3e} > {report.distance_raw:.3e}"
        )
    return report


def line_ansatz(k: int, lambda_1: float, grid: int = 50, **fit_options) -> GramPolynomial:
    """sos fit of p(lam) = lam on a grid of [0, 1], rescaled to [0, lambda_1]."""
    if lambda_1 <= 0:
        raise PreconditionError("lambda_1 must be positive")
    if grid < 2:
        raise PreconditionError("the grid needs at least two points")
    points = Spectrum(values=np.linspace(1.0, 0.0, grid), ambient_dim=grid, kind='line')
    fit = fit_sos(points, k, rescale=False, **fit_options)
    return rescaled(dataclasses.replace(fit.gram, origin='line'), lambda_1)


def k_for_accuracy(fit: DecayFit, eps: float) -> int:
    """Smallest k with A exp(-B k) <= eps."""
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    if fit.B <= 0:
        raise PreconditionError(f"decay rate B={fit.B:.3g} does not decrease")
    return max(1, math.ceil(math.log(fit.A / eps) / fit.B))


def sos_bound_from_decay(D: int, fit: DecayFit, eps: float) -> int:
    """Purification-rank bound implied by the fitted decay at accuracy ``eps``."""
    return sos_rank_bound(D, k_for_accuracy(fit, eps))
