"""Rank computations and conversions between dense, MPDO and purification forms."""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from django.conf import settings

from purikit.exceptions import DenseCapExceeded, DimensionMismatch, PreconditionError
from .states import DensityMatrix, MPDO, MPSPurification, PureState

logger = logging.getLogger(__name__)


def rank_tol(tol: Optional[float]) -> float:
    return settings.PURIKIT_RANK_TOL if tol is None else tol


def check_dense_cap(dim: int, what: str = 'operator') -> None:
    cap = settings.PURIKIT_DENSE_CAP
    if dim > cap:
        raise DenseCapExceeded(
            f"{what} of dimension {dim} exceeds PURIKIT_DENSE_CAP={cap}"
        )


def numerical_rank(singular_values: np.ndarray, tol: Optional[float] = None) -> int:
    """Count singular values above ``tol`` times the largest one."""
    tol = rank_tol(tol)
    if singular_values.size == 0 or singular_values[0] <= 0:
        return 0
    return int(np.count_nonzero(singular_values > tol * singular_values[0]))


def cut_ranks(array: np.ndarray, dims: Sequence[int], tol: Optional[float] = None) -> List[int]:
    """Numerical ranks of ``array`` reshaped across each linear cut of ``dims``."""
    flat = np.asarray(array).reshape(-1)
    ranks = []
    for k in range(1, len(dims)):
        left = int(np.prod(dims[:k]))
        ranks.append(numerical_rank(scipy.linalg.svdvals(flat.reshape(left, -1)), tol))
    return ranks


def vectorize(rho: DensityMatrix) -> PureState:
    """
    Vectorise an operator so that each site carries its (ket, bra) pair.

    Args:
        rho: operator on N sites of dimension d

    Returns:
        PureState on N sites of dimension d**2 with amplitudes rho[i, j]
    """
    n, d = rho.n_sites, rho.local_dim
    tensor = rho.data.reshape((d,) * (2 * n))
    axes = [axis for site in range(n) for axis in (site, n + site)]
    amplitudes = tensor.transpose(axes).reshape(-1)
    return PureState(n_sites=n, local_dims=(d * d,) * n, amplitudes=amplitudes)


def schmidt_rank(psi: PureState, tol: Optional[float] = None) -> Tuple[List[int], int]:
    ranks = cut_ranks(psi.amplitudes, psi.local_dims, tol)
    return ranks, max(ranks, default=1)


def operator_schmidt_rank(rho: DensityMatrix, tol: Optional[float] = None) -> Tuple[List[int], int]:
    if rho.data.shape != (rho.dim, rho.dim):
        raise DimensionMismatch(f"matrix of shape {rho.data.shape} for dimension {rho.dim}")
    return schmidt_rank(vectorize(rho), tol)


def diagonal_operator_schmidt_rank(diagonal: np.ndarray, dims: Sequence[int],
                                   tol: Optional[float] = None) -> Tuple[List[int], int]:
    """OSR of a diagonal operator computed from its diagonal alone."""
    diagonal = np.asarray(diagonal)
    if diagonal.size != int(np.prod(dims)):
        raise DimensionMismatch(f"diagonal of length {diagonal.size} for dimensions {tuple(dims)}")
    ranks = cut_ranks(diagonal, dims, tol)
    return ranks, max(ranks, default=1)


def trace_norm(matrix: np.ndarray) -> float:
    return float(np.sum(scipy.linalg.svdvals(np.asarray(matrix))))


def mps_from_vector(amplitudes: np.ndarray, dims: Sequence[int],
                    tol: Optional[float] = None) -> List[np.ndarray]:
    """
    Split a state vector into site tensors (Dl, d_k, Dr) by successive SVD.

    Singular values below ``tol`` times the largest at each cut are dropped,
    so bond dimensions are the numerical Schmidt ranks.
    """
    tol = rank_tol(tol)
    remainder = np.asarray(amplitudes, dtype=complex).reshape(1, -1)
    tensors = []
    left = 1
    for dim in dims[:-1]:
        matrix = remainder.reshape(left * dim, -1)
        u, s, vh = scipy.linalg.svd(matrix, full_matrices=False, lapack_driver='gesvd')
        keep = max(numerical_rank(s, tol), 1)
        tensors.append(u[:, :keep].reshape(left, dim, keep))
        remainder = s[:keep, None] * vh[:keep]
        left = keep
    tensors.append(remainder.reshape(left, dims[-1], 1))
    return tensors


def contract_mps(tensors: Sequence[np.ndarray]) -> np.ndarray:
    result = np.ones((1, 1), dtype=complex)
    for tensor in tensors:
        result = np.tensordot(result, tensor, axes=(1, 0))
        result = result.reshape(-1, tensor.shape[2])
    return result.reshape(-1)


def bond_spectra(tensors: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Schmidt coefficients at every bond of an MPS, via a QR sweep then an SVD sweep."""
    tensors = [np.asarray(tensor) for tensor in tensors]
    n = len(tensors)
    for i in range(n - 1):
        left, phys, right = tensors[i].shape
        q, r = scipy.linalg.qr(tensors[i].reshape(left * phys, right), mode='economic')
        tensors[i] = q.reshape(left, phys, q.shape[1])
        tensors[i + 1] = np.tensordot(r, tensors[i + 1], axes=(1, 0))
    spectra: List[np.ndarray] = [np.empty(0)] * (n - 1)
    for i in range(n - 1, 0, -1):
        left, phys, right = tensors[i].shape
        u, s, vh = scipy.linalg.svd(tensors[i].reshape(left, phys * right), full_matrices=False)
        spectra[i - 1] = s
        tensors[i] = vh.reshape(-1, phys, right)
        tensors[i - 1] = np.tensordot(tensors[i - 1], u * s, axes=(2, 0))
    return spectra


def mpdo_from_dense(rho: DensityMatrix, tol: Optional[float] = None) -> MPDO:
    vec = vectorize(rho)
    tensors = mps_from_vector(vec.amplitudes, vec.local_dims, tol)
    d = rho.local_dim
    site_tensors = tuple(t.reshape(t.shape[0], d, d, t.shape[2]) for t in tensors)
    mpdo = MPDO(site_tensors=site_tensors, local_dim=d)
    logger.debug(f"MPDO bond dimensions {mpdo.bond_dims}")
    return mpdo


def contract_mpdo(mpdo: MPDO) -> DensityMatrix:
    mpdo.check_bonds()
    n, d = mpdo.n_sites, mpdo.local_dim
    check_dense_cap(d ** n)
    merged = [t.reshape(t.shape[0], d * d, t.shape[3]) for t in mpdo.site_tensors]
    tensor = contract_mps(merged).reshape((d,) * (2 * n))
    axes = [2 * site for site in range(n)] + [2 * site + 1 for site in range(n)]
    data = tensor.transpose(axes).reshape(d ** n, d ** n)
    return DensityMatrix(n_sites=n, local_dim=d, data=data)


def purification_from_vector(amplitudes: np.ndarray, physical_dims: Sequence[int],
                             ancilla_dims: Sequence[int], tol: Optional[float] = None,
                             **meta) -> MPSPurification:
    """Build a local purification from amplitudes ordered (p1, a1, p2, a2, ...)."""
    dims = [p * a for p, a in zip(physical_dims, ancilla_dims)]
    tensors = mps_from_vector(amplitudes, dims, tol)
    site_tensors = tuple(
        t.reshape(t.shape[0], p, a, t.shape[2])
        for t, p, a in zip(tensors, physical_dims, ancilla_dims)
    )
    return MPSPurification(site_tensors=site_tensors, meta=meta)


def trace_out_ancilla(psi: MPSPurification) -> DensityMatrix:
    physical = psi.physical_dims
    if len(set(physical)) != 1:
        raise DimensionMismatch(f"non-uniform physical dimensions {physical}")
    d, n = physical[0], psi.n_sites
    check_dense_cap(d ** n)
    vector = contract_mps(psi.merged_tensors())
    tensor = vector.reshape([dim for site in psi.site_tensors for dim in site.shape[1:3]])
    axes = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    matrix = tensor.transpose(axes).reshape(d ** n, -1)
    data = matrix @ matrix.conj().T
    return DensityMatrix(n_sites=n, local_dim=d, data=0.5 * (data + data.conj().T))


def purification_cut_ranks(psi: MPSPurification, tol: Optional[float] = None) -> List[int]:
    return [numerical_rank(s, tol) for s in bond_spectra(psi.merged_tensors())]


def purification_rank(psi: MPSPurification, tol: Optional[float] = None) -> int:
    return max(purification_cut_ranks(psi, tol), default=1)


def standard_purification(rho: DensityMatrix, tol: Optional[float] = None) -> MPSPurification:
    """Spectral purification with an n-dimensional ancilla attached to the last site."""
    check_dense_cap(rho.dim)
    values, vectors = rho.eigensystem
    n = rho.rank(rank_tol(tol))
    if n == 0:
        raise PreconditionError("cannot purify the zero operator")
    amplitudes = vectors[:, :n] * np.sqrt(np.clip(values[:n], 0.0, None))
    ancillas = [1] * (rho.n_sites - 1) + [n]
    return purification_from_vector(
        amplitudes.reshape(-1), [rho.local_dim] * rho.n_sites, ancillas, tol, method='standard'
    )


def classical_purification(rho: DensityMatrix, power: float = 0.5,
                           tol: Optional[float] = None) -> MPSPurification:
    """
    Copy purification of a diagonal state: sum_x rho(x)**power |x>|x>, one copy per site.

    power = 0.5 purifies rho; power = 1 gives the coefficient-squared state.
    """
    n, d = rho.n_sites, rho.local_dim
    check_dense_cap(rho.dim)
    diagonal = np.real(np.diag(rho.data))
    off = rho.data - np.diag(np.diag(rho.data))
    if np.max(np.abs(off), initial=0.0) > 1e-12 * max(np.linalg.norm(rho.data), 1e-300):
        raise PreconditionError("classical purification needs a diagonal state")
    digits = np.array(np.unravel_index(np.arange(rho.dim), (d,) * n))
    positions = np.ravel_multi_index(tuple(digits * (d + 1)), (d * d,) * n)
    amplitudes = np.zeros(rho.dim ** 2, dtype=complex)
    amplitudes[positions] = np.clip(diagonal, 0.0, None) ** power
    return purification_from_vector(amplitudes, [d] * n, [d] * n, tol, method='classical')
