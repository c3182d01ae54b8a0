"""
Sum-of-squares polynomials in Gram form and the purifications built from them.

A GramPolynomial stores the Gram matrix of the rescaled variable mu = lam / scale,

    p(lam) = scale * v(lam / scale)^T R~ v(lam / scale),   v(x) = (1, x, ..., x^{k-1}),

so that small eigenvalues never have to be raised to high powers. The Gram
matrix in the original variable is available as ``gram``.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from django.conf import settings
from numpy.polynomial import polynomial as npoly
from scipy.special import logsumexp

from purikit.exceptions import DenseCapExceeded, NumericalFailure, PreconditionError
from tensors.spectra import Spectrum, distinct_values
from tensors.states import DensityMatrix, MPSPurification
from tensors.utils import check_dense_cap, purification_from_vector

logger = logging.getLogger(__name__)

ORIGINS = ('exact', 'lagrange', 'exp_ansatz', 'sdp', 'line')
LOG_DOMAIN_MIN_K = 9
RANK_BOUND_SATURATION = 2 ** 63 - 1


@dataclass(frozen=True, eq=False)
class GramPolynomial:
    scaled_gram: np.ndarray
    origin: str = 'exact'
    scale: float = 1.0
    # Product form sum_j w_j prod_{i != j} ((lam - nu_i) / (nu_j - nu_i))^2, times lam**root_power.
    nodes: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    root_power: int = 0

    @property
    def degree_param(self) -> int:
        return self.scaled_gram.shape[0]

    @property
    def gram(self) -> np.ndarray:
        """Gram matrix R_k in the original variable."""
        powers = float(self.scale) ** -np.arange(self.degree_param)
        return self.scale * (powers[:, None] * self.scaled_gram * powers[None, :])

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.scaled_gram)[0])

    def is_psd(self, tol: float = 1e-10) -> bool:
        norm = max(np.linalg.norm(self.scaled_gram, 2), np.finfo(float).tiny)
        return self.min_eigenvalue() >= -tol * norm


@dataclass(frozen=True, eq=False)
class SosDecomposition:
    """Rows y_u of A with R = A^H A, so that p(lam) = sum_u |y_u . v(lam)|^2."""
    rows: np.ndarray
    rank: int

    def evaluate(self, lam) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        v = vandermonde(lam, self.rows.shape[1])
        return np.sum(np.abs(v @ self.rows.T) ** 2, axis=1)


def vandermonde(lam, k: int) -> np.ndarray:
    """(1, lam, ..., lam^{k-1}); one row per entry when ``lam`` is an array."""
    if k < 1:
        raise PreconditionError("k must be at least 1")
    lam_arr = np.asarray(lam, dtype=float)
    rows = np.vander(lam_arr.reshape(-1), k, increasing=True)
    return rows[0] if lam_arr.ndim == 0 else rows


def exact_gram(spec: Spectrum, tol: Optional[float] = None, rescale: bool = True) -> GramPolynomial:
    """
    Gram matrix of the degree-2(m-1) sos polynomial interpolating all m distinct eigenvalues.

    Args:
        spec: spectrum whose distinct values (zero included when rank-deficient) are interpolated
        tol: distinctness tolerance
        rescale: divide eigenvalues by the largest before building the Vandermonde matrix

    Returns:
        GramPolynomial with p(lam_i) = lam_i on every representative. The
        biorthogonal vectors are the coefficient vectors of the Lagrange basis
        on the representatives, so the polynomial also keeps that node form
        for evaluation and factoring.
    """
    representatives = distinct_values(spec, tol)
    scale = float(representatives[0]) if rescale and representatives[0] > 0 else 1.0
    mu = representatives / scale
    m = mu.size
    min_gap = tol if tol is not None else 0.0
    if m > 1 and np.min(-np.diff(mu)) <= min_gap:
        raise NumericalFailure(f"distinct values closer than {min_gap} after rescaling")

    v = vandermonde(mu, m)
    try:
        lu_piv = scipy.linalg.lu_factor(v)
        biorthogonal = scipy.linalg.lu_solve(lu_piv, np.eye(m))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"Vandermonde system of size {m} is singular: {e}") from e
    if not np.all(np.isfinite(biorthogonal)):
        raise NumericalFailure(f"Vandermonde system of size {m} is numerically singular")
    residual = np.max(np.abs(v @ biorthogonal - np.eye(m)))
    if residual > 1e-6:
        logger.warning(f"biorthogonal basis of size {m} off by {residual:.2e}; Gram entries are inexact")

    scaled = (biorthogonal * mu) @ biorthogonal.T
    logger.debug(f"exact Gram of size {m}, cond(V)={np.linalg.cond(v):.3e}")
    return GramPolynomial(
        scaled_gram=0.5 * (scaled + scaled.T), origin='exact', scale=scale,
        nodes=representatives.copy(), weights=representatives.copy(), root_power=0,
    )


def _lagrange_basis(nodes: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """ell_j(lam) for every node j, one row per lam."""
    diffs = lam[:, None] - nodes[None, :]
    gaps = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(gaps, 1.0)
    basis = np.empty((lam.size, nodes.size))
    for j in range(nodes.size):
        ratio = np.delete(diffs, j, axis=1) / np.delete(gaps[j], j)[None, :]
        basis[:, j] = np.prod(ratio, axis=1)
    return basis


def _eval_product_form(gp: GramPolynomial, lam: np.ndarray) -> np.ndarray:
    nodes, weights = gp.nodes, gp.weights
    if gp.degree_param < LOG_DOMAIN_MIN_K:
        total = _lagrange_basis(nodes, lam) ** 2 @ weights
    else:
        diffs = lam[:, None] - nodes[None, :]
        gaps = nodes[:, None] - nodes[None, :]
        np.fill_diagonal(gaps, 1.0)
        with np.errstate(divide='ignore'):
            log_diffs = np.log(np.abs(diffs))
        log_gaps = np.log(np.abs(gaps)).sum(axis=1)
        log_terms = np.empty((lam.size, nodes.size))
        for j in range(nodes.size):
            log_terms[:, j] = 2.0 * (np.delete(log_diffs, j, axis=1).sum(axis=1) - log_gaps[j])
        with np.errstate(divide='ignore'):
            total = np.exp(logsumexp(log_terms, b=weights[None, :], axis=1))
    return lam ** gp.root_power * total


def eval_poly(gp: GramPolynomial, lam) -> Union[float, np.ndarray]:
    lam_arr = np.asarray(lam, dtype=float)
    flat = lam_arr.reshape(-1)
    if gp.nodes is not None:
        values = _eval_product_form(gp, flat)
    else:
        v = vandermonde(flat / gp.scale, gp.degree_param)
        values = gp.scale * np.real(np.einsum('pi,ij,pj->p', v, gp.scaled_gram, v))
    values = values.reshape(lam_arr.shape)
    return float(values) if values.ndim == 0 else values


def _product_rows(nodes: np.ndarray, weights: np.ndarray, root_power: int,
                  k: int, scale: float) -> np.ndarray:
    """
    One row per positive weight: sqrt(w_j scale**(root_power - 1)) times the
    coefficients of mu**(root_power / 2) ell_j(mu) in the scaled variable.
    """
    scaled_nodes = np.asarray(nodes, dtype=float) / scale
    shift = root_power // 2
    rows = []
    for j, node in enumerate(scaled_nodes):
        if weights[j] <= 0:
            continue
        others = np.delete(scaled_nodes, j)
        coefficients = npoly.polyfromroots(others) / np.prod(node - others)
        padded = np.zeros(k)
        padded[shift:shift + coefficients.size] = coefficients
        rows.append(np.sqrt(weights[j] * scale ** (root_power - 1)) * padded)
    return np.array(rows).reshape(-1, k)


def _factor_scaled(gp: GramPolynomial) -> np.ndarray:
    """
    Rows B with scaled_gram = B^H B.

    Node-form polynomials are factored from their nodes. Otherwise only
    eigenvalues at the rounding level of eigh are dropped.
    """
    if gp.nodes is not None:
        return _product_rows(gp.nodes, gp.weights, gp.root_power, gp.degree_param, gp.scale)
    gram = gp.scaled_gram
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    norm = max(np.max(np.abs(eigenvalues)), np.finfo(float).tiny)
    if eigenvalues[0] < -1e-10 * norm:
        raise PreconditionError(f"Gram matrix is not PSD (min eigenvalue {eigenvalues[0]:.3e})")
    keep = eigenvalues > gram.shape[0] * np.finfo(float).eps * norm
    return np.sqrt(eigenvalues[keep])[:, None] * eigenvectors[:, keep].conj().T


def _factor_values(gp: GramPolynomial, lam: np.ndarray) -> np.ndarray:
    """g_u(lam) for every factor u, so that p(lam) = sum_u |g_u(lam)|^2."""
    if gp.nodes is not None:
        keep = gp.weights > 0
        basis = _lagrange_basis(gp.nodes, lam)[:, keep]
        return lam[:, None] ** (gp.root_power // 2) * basis * np.sqrt(gp.weights[keep])[None, :]
    rows = _factor_scaled(gp)
    return np.sqrt(gp.scale) * (vandermonde(lam / gp.scale, gp.degree_param) @ rows.T)


def sos_decompose(gp: GramPolynomial) -> SosDecomposition:
    scaled_rows = _factor_scaled(gp)
    powers = float(gp.scale) ** -np.arange(gp.degree_param)
    rows = np.sqrt(gp.scale) * scaled_rows * powers[None, :]
    if not np.iscomplexobj(gp.scaled_gram):
        rows = np.real(rows)
    return SosDecomposition(rows=rows, rank=rows.shape[0])


def real_reduce(gp: GramPolynomial) -> GramPolynomial:
    """Re(R) represents the same polynomial on the real line and stays PSD."""
    return GramPolynomial(
        scaled_gram=np.real(gp.scaled_gram).copy(),
        origin=gp.origin,
        scale=gp.scale,
        nodes=gp.nodes,
        weights=gp.weights,
        root_power=gp.root_power,
    )


def rescaled(gp: GramPolynomial, factor: float) -> GramPolynomial:
    """p'(lam) = factor * p(lam / factor)."""
    return GramPolynomial(
        scaled_gram=gp.scaled_gram,
        origin=gp.origin,
        scale=gp.scale * factor,
        nodes=None if gp.nodes is None else gp.nodes * factor,
        weights=None if gp.weights is None else gp.weights * factor ** (1 - gp.root_power),
        root_power=gp.root_power,
    )


def _product_form(nodes: Sequence[float], weights: np.ndarray, root_power: int,
                  k: int, origin: str) -> GramPolynomial:
    nodes = np.asarray(nodes, dtype=float)
    if np.unique(nodes).size != nodes.size:
        raise PreconditionError("interpolation points must be distinct")
    scale = float(np.max(nodes))
    rows = _product_rows(nodes, weights, root_power, k, scale)
    return GramPolynomial(scaled_gram=rows.T @ rows, origin=origin, scale=scale,
                          nodes=nodes, weights=np.asarray(weights, dtype=float),
                          root_power=root_power)


def lagrange_squared(points: Sequence[float]) -> GramPolynomial:
    """
    sos polynomial sum_j mu_j prod_{i != j} ((lam - mu_i) / (mu_j - mu_i))^2 through k-1 points.

    Each point is reproduced exactly: p(mu_j) = mu_j.
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0 or np.any(points <= 0):
        raise PreconditionError("interpolation points must be positive")
    return _product_form(points, points, 0, points.size + 1, 'lagrange')


def exp_ansatz(spec: Spectrum, k: int) -> GramPolynomial:
    """
    sos polynomial through the k-2 largest eigenvalues with a double root at zero:

        p(lam) = lam^2 sum_r (1 / lam_r) prod_{j != r} ((lam - lam_j) / (lam_r - lam_j))^2
    """
    if k < 3:
        raise PreconditionError("the exponential ansatz needs k >= 3")
    nodes = np.asarray(spec.values, dtype=float)[:k - 2]
    if nodes.size < k - 2 or np.any(nodes <= 0):
        raise PreconditionError(f"k - 2 = {k - 2} exceeds the {spec.n_nonzero} nonzero eigenvalues")
    return _product_form(nodes, 1.0 / nodes, 2, k, 'exp_ansatz')


def build_purifying_state(rho: DensityMatrix, gp: GramPolynomial,
                          tol: Optional[float] = None) -> MPSPurification:
    """
    Local purification |Psi> = sum_l |rho^l>_{KB} |a_l> of sigma_k = p_k(rho).

    K is the physical system and B a copy of it, split site by site so that B_i
    is the ancilla of site i; the r-dimensional span of the a_l sits with the
    last site. With p = sum_u g_u^2 the state equals sum_u |g_u(rho)>|u>, and
    g_u(rho) is formed on the eigenvalues of rho rather than from its powers.
    """
    n, d, dim = rho.n_sites, rho.local_dim, rho.dim
    k = gp.degree_param
    check_dense_cap(dim)
    if np.iscomplexobj(gp.scaled_gram):
        gp = real_reduce(gp)

    values, vectors = rho.eigensystem
    factor_values = _factor_values(gp, np.clip(values, 0.0, None))
    r = factor_values.shape[1]
    if r == 0:
        raise PreconditionError("the zero polynomial has no purification")
    if dim * dim * r > settings.PURIKIT_DENSE_CAP ** 2:
        raise DenseCapExceeded(f"purifying state of size {dim * dim * r} is too large")
    psi = np.einsum('iq,qu,jq->iju', vectors, factor_values, vectors.conj())

    tensor = psi.reshape((d,) * (2 * n) + (r,))
    axes = [axis for site in range(n) for axis in (site, n + site)] + [2 * n]
    amplitudes = tensor.transpose(axes).reshape(-1)
    ancillas = [d] * (n - 1) + [d * r]
    return purification_from_vector(
        amplitudes, [d] * n, ancillas, tol, method='sos', origin=gp.origin, k=k,
    )


def sigma_of_poly(spec: Spectrum, gp: GramPolynomial, normalize: bool = False) -> Spectrum:
    """Spectrum of sigma_k = p_k(rho), zeros of rho included as p_k(0)."""
    mapped = np.clip(eval_poly(gp, spec.full_values()), 0.0, None)
    raw_trace = float(mapped.sum())
    if normalize:
        if raw_trace <= 0:
            raise PreconditionError("sigma has zero trace and cannot be normalized")
        mapped = mapped / raw_trace
    return Spectrum(
        values=np.sort(mapped)[::-1],
        ambient_dim=spec.ambient_dim,
        kind='sigma',
        params={'origin': gp.origin, 'k': gp.degree_param, 'raw_trace': raw_trace},
        normalized=normalize,
    )


def sos_distance(spec: Spectrum, gp: GramPolynomial, ambient_dim: Optional[int] = None) -> float:
    """sum_i |lam_i - p(lam_i)| + (d^N - n) p(0)."""
    ambient = spec.ambient_dim if ambient_dim is None else ambient_dim
    values = np.asarray(spec.values, dtype=float)
    zeros = ambient - values.size
    if zeros < 0:
        raise PreconditionError(f"ambient dimension {ambient} is smaller than the spectrum")
    distance = float(np.sum(np.abs(values - eval_poly(gp, values))))
    if zeros:
        distance += zeros * abs(eval_poly(gp, 0.0))
    return distance


def sos_rank_bound(D: int, k: int, with_flag: bool = False) -> Union[int, Tuple[int, bool]]:
    """(D^k - 1) / (D - 1), saturating at 2**63 - 1."""
    if D < 1 or k < 1:
        raise PreconditionError("D and k must be at least 1")
    bound = k if D == 1 else (D ** k - 1) // (D - 1)
    saturated = bound > RANK_BOUND_SATURATION
    if saturated:
        logger.warning(f"rank bound for D={D}, k={k} saturated")
        bound = RANK_BOUND_SATURATION
    return (bound, saturated) if with_flag else bound
