"""
Eigenbasis purification.

Each eigenvector of rho is rewritten as a combination of images rho|x_a> of
computational-basis product states. An image has Schmidt rank at most D, so
every eigenvector has Schmidt rank at most D*n and the spectral purification
sum_i sqrt(lam_i) |phi_i>|i> has purification rank at most D*n**2.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from purikit.exceptions import NumericalFailure, PreconditionError
from tensors.spectra import DISTRIBUTIONS, Spectrum
from tensors.states import DensityMatrix, MPSPurification, PureState
from tensors.utils import (
    check_dense_cap, operator_schmidt_rank, purification_from_vector, purification_rank, rank_tol,
    schmidt_rank, trace_norm,
)

logger = logging.getLogger(__name__)

INVERSE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EigenCertificate:
    product_indices: List[int]
    f_matrix: np.ndarray
    g_matrix: np.ndarray
    per_eigenvector_sr: List[int]
    chi_sr: List[int]
    D: int
    purification_rank: int

    @property
    def n(self) -> int:
        return len(self.product_indices)

    @property
    def bound_Dn(self) -> int:
        return self.D * self.n

    @property
    def bound_Dn2(self) -> int:
        return self.D * self.n ** 2

    @property
    def holds(self) -> bool:
        return (max(self.chi_sr, default=0) <= self.D
                and max(self.per_eigenvector_sr, default=0) <= self.bound_Dn
                and self.purification_rank <= self.bound_Dn2)


@dataclass(frozen=True, eq=False)
class TruncationResult:
    sigma: DensityMatrix
    s: int
    distance: float
    tail_bound: float


def select_product_basis(rho: DensityMatrix, tol: Optional[float] = None) -> List[int]:
    """
    Labels x whose images rho|x> span the range of rho.

    Labels are scanned in lexicographic order and kept when the image has a
    component orthogonal to the images kept so far larger than tol * ||rho||.
    """
    tol = rank_tol(tol)
    check_dense_cap(rho.dim)
    n = rho.rank(tol)
    if n == 0:
        raise PreconditionError("the zero operator has no range to span")
    threshold = tol * max(rho.eigensystem[0][0], np.finfo(float).tiny)

    labels: List[int] = []
    basis = np.zeros((rho.dim, n), dtype=complex)
    for x in range(rho.dim):
        image = rho.data[:, x].astype(complex)
        kept = basis[:, :len(labels)]
        # two passes of Gram-Schmidt
        for _ in range(2):
            image = image - kept @ (kept.conj().T @ image)
        norm = np.linalg.norm(image)
        if norm > threshold:
            basis[:, len(labels)] = image / norm
            labels.append(x)
            if len(labels) == n:
                return labels
    raise PreconditionError(
        f"only {len(labels)} of {n} independent product-state images found at tol={tol}"
    )


def _state_schmidt_rank(vector: np.ndarray, rho: DensityMatrix, tol: Optional[float]) -> int:
    state = PureState(n_sites=rho.n_sites, local_dims=(rho.local_dim,) * rho.n_sites,
                      amplitudes=vector)
    return schmidt_rank(state, tol)[1]


def eigen_purification(rho: DensityMatrix,
                       tol: Optional[float] = None) -> Tuple[MPSPurification, EigenCertificate]:
    """
    Purify rho through its eigenvectors expressed in product-state images.

    Args:
        rho: dense density matrix within the dense cap
        tol: relative rank tolerance

    Returns:
        (purification with the n-dimensional ancilla on the last site, certificate)
    """
    tol = rank_tol(tol)
    labels = select_product_basis(rho, tol)
    n = len(labels)
    values, vectors = rho.eigensystem
    lam = np.clip(values[:n], 0.0, None)
    phi = vectors[:, :n]

    f_matrix = lam[:, None] * phi[labels, :].conj().T
    try:
        g_matrix = scipy.linalg.solve(f_matrix, np.eye(n, dtype=complex))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"coefficient matrix of size {n} is singular: {e}") from e
    error = np.max(np.abs(f_matrix @ g_matrix - np.eye(n)))
    if not np.isfinite(error) or error > INVERSE_TOL:
        raise NumericalFailure(f"coefficient inverse off by {error:.2e}")

    images = rho.data[:, labels]
    rebuilt = images @ g_matrix
    amplitudes = (rebuilt * np.sqrt(lam)[None, :]).reshape(-1)
    psi = purification_from_vector(
        amplitudes, [rho.local_dim] * rho.n_sites, [1] * (rho.n_sites - 1) + [n], tol,
        method='eigen',
    )

    certificate = EigenCertificate(
        product_indices=labels,
        f_matrix=f_matrix,
        g_matrix=g_matrix,
        per_eigenvector_sr=[_state_schmidt_rank(rebuilt[:, i], rho, tol) for i in range(n)],
        chi_sr=[_state_schmidt_rank(images[:, a], rho, tol) for a in range(n)],
        D=operator_schmidt_rank(rho, tol)[1],
        purification_rank=purification_rank(psi, tol),
    )
    if not certificate.holds:
        logger.warning(
            f"eigenbasis bounds fail numerically: D={certificate.D}, n={n}, "
            f"max SR={max(certificate.per_eigenvector_sr)}, rank={certificate.purification_rank}"
        )
    return psi, certificate


def truncate_spectrum(rho: DensityMatrix, s: int, tol: Optional[float] = None) -> TruncationResult:
    """
    Keep the s largest eigenvalues and renormalize.

    rho is trace-normalized first; the distance then equals 2 * sum_{i>s} lam_i.
    """
    check_dense_cap(rho.dim)
    n = rho.rank(rank_tol(tol))
    if not 1 <= s <= n:
        raise PreconditionError(f"s={s} outside 1..{n}")
    values, vectors = rho.eigensystem
    trace = float(np.sum(values))
    if trace <= 0:
        raise PreconditionError("rho has nonpositive trace")
    lam = np.clip(values, 0.0, None) / trace
    kept = lam[:s]
    weight = kept.sum()
    data = (vectors[:, :s] * (kept / weight)) @ vectors[:, :s].conj().T
    sigma = DensityMatrix(n_sites=rho.n_sites, local_dim=rho.local_dim,
                          data=0.5 * (data + data.conj().T), normalized=True)

    distance = trace_norm(rho.data / trace - sigma.data)
    tail_bound = 2.0 * float(np.sum(lam[s:]))
    if abs(distance - tail_bound) > 1e-9:
        logger.warning(f"truncation at s={s}: distance {distance:.3e} vs tail {tail_bound:.3e}")
    return TruncationResult(sigma=sigma, s=s, distance=distance, tail_bound=tail_bound)


def minimal_truncation(spec: Spectrum, eps: float) -> int:
    """Smallest s with 2 * sum_{i>s} lam_i <= eps on the trace-normalized spectrum."""
    if eps < 0:
        raise PreconditionError("eps must be nonnegative")
    values = np.asarray(spec.values, dtype=float)
    values = values / values.sum()
    tails = 2.0 * (1.0 - np.cumsum(values))
    hits = np.nonzero(tails <= eps + 1e-15)[0]
    return int(hits[0]) + 1 if hits.size else values.size


def bound_table(kind: str, D: int, eps: float, n: int, b: float = 1.0) -> float:
    """
    Purification-rank bound of the eigenbasis method with truncation, per distribution.

    Closed forms of D * s(eps)**2 with s(eps) from ``minimal_truncation``. D is
    the OSR of rho, the only one known before truncating; the truncated state
    can have a larger OSR, so the certificate of an actual eigen_trunc run
    reports D(sigma_s) * s**2 instead.
    """
    if kind not in DISTRIBUTIONS:
        raise PreconditionError(f"unknown distribution {kind!r}")
    if not 0 <= eps <= 2:
        raise PreconditionError(f"eps={eps} outside [0, 2]")

    def quadratic_root(arg: float) -> float:
        return max(np.sqrt(max(arg, 0.0)) - 1.0, 0.0) ** 2

    if kind in ('uniform', 'random'):
        return float(D * n ** 2 * (1 - eps / 2) ** 2)
    if kind == 'equally_spaced':
        return D / 4 * quadratic_root(1 + 4 * n * (n + 1) * (1 - eps / 2))
    if kind == 'one_fixed':
        return D / 4 * quadratic_root(1 + 4 * n * (n + 1) * (1 - eps) + 8 * eps)
    if eps == 0:
        raise PreconditionError("the exponential bound diverges at eps=0")
    if b <= 0:
        raise PreconditionError("decay rate b must be positive")
    return float(D / b ** 2 * np.log(2 / eps) ** 2)
