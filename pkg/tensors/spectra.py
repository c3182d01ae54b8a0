"""Benchmark eigenvalue distributions and density-matrix assembly."""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from django.conf import settings
from scipy.stats import unitary_group

from purikit.exceptions import PreconditionError
from .states import DensityMatrix, ensure_square_sites
from .utils import check_dense_cap, contract_mps

logger = logging.getLogger(__name__)

DISTRIBUTIONS = ('uniform', 'equally_spaced', 'random', 'one_fixed', 'exponential')


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Non-increasing nonnegative eigenvalues; zeros up to ``ambient_dim`` are implicit."""
    values: np.ndarray
    ambient_dim: int
    kind: str = 'custom'
    params: dict = field(default_factory=dict)
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise PreconditionError("spectrum needs at least one value")
        if values.size > self.ambient_dim:
            raise PreconditionError(f"{values.size} values exceed ambient dimension {self.ambient_dim}")
        if np.any(values < 0):
            raise PreconditionError("eigenvalues must be nonnegative")
        if np.any(np.diff(values) > 0):
            raise PreconditionError("eigenvalues must be sorted non-increasing")
        if self.normalized and abs(values.sum() - 1.0) > 1e-12:
            raise PreconditionError(f"normalized spectrum sums to {values.sum()!r}")

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(np.asarray(self.values) > 0))

    @property
    def m_distinct(self) -> int:
        return distinct_count(self)

    @property
    def raw_trace(self) -> float:
        return float(np.sum(self.full_values()))

    def full_values(self) -> np.ndarray:
        values = np.asarray(self.values, dtype=float)
        return np.concatenate([values, np.zeros(self.ambient_dim - values.size)])

    @classmethod
    def from_density(cls, rho: DensityMatrix, tol: Optional[float] = None) -> 'Spectrum':
        tol = settings.PURIKIT_RANK_TOL if tol is None else tol
        values = np.clip(rho.eigensystem[0], 0.0, None)
        values = values[values > tol * values[0]] if values[0] > 0 else values[:1]
        return cls(values=values, ambient_dim=rho.dim, kind='density')


def make_distribution(kind: str, n: int, b: float = 1.0, seed: Optional[int] = None,
                      interval: Tuple[float, float] = (0.0, 1.0),
                      ambient_dim: Optional[int] = None) -> Spectrum:
    """
    Generate one of the five benchmark distributions, normalized to unit sum.

    Args:
        kind: uniform, equally_spaced, random, one_fixed or exponential
        n: number of nonzero eigenvalues
        b: decay rate of the exponential distribution
        seed: required for the random distribution
        interval: (low, high] range of the random distribution before normalization
        ambient_dim: total dimension d**N (defaults to n)

    Returns:
        Spectrum sorted non-increasing
    """
    if n < 1:
        raise PreconditionError("n must be at least 1")
    j = np.arange(1, n + 1, dtype=float)
    params = {'b': b, 'seed': seed, 'interval': list(interval)}

    if kind == 'uniform':
        values = np.full(n, 1.0 / n)
    elif kind == 'equally_spaced':
        values = 2.0 * j / (n * (n + 1))
    elif kind == 'random':
        low, high = interval
        if seed is None:
            raise PreconditionError("the random distribution needs a seed")
        if low < 0 or high <= low:
            raise PreconditionError(f"invalid interval {interval!r}")
        rng = np.random.default_rng(seed)
        values = low + (high - low) * (1.0 - rng.random(n))
        values = values / values.sum()
    elif kind == 'one_fixed':
        if n < 2:
            raise PreconditionError("one_fixed needs n >= 2")
        values = j / (n * (n + 1) - 2)
        values[0] = 0.5
    elif kind == 'exponential':
        if b <= 0:
            raise PreconditionError("exponential decay rate b must be positive")
        # sum_{j=0}^{n-1} e^{-bj} = (1 - e^{-nb}) / (1 - e^{-b})
        normalizer = np.expm1(-n * b) / np.expm1(-b)
        values = np.exp(-b * (j - 1)) / normalizer
    else:
        raise PreconditionError(f"unknown distribution {kind!r}")

    values = np.sort(values)[::-1]
    if kind != 'exponential':
        values = values / values.sum()
    return Spectrum(
        values=values,
        ambient_dim=n if ambient_dim is None else ambient_dim,
        kind=kind,
        params=params,
        normalized=True,
    )


def distinct_values(spec: Spectrum, tol: Optional[float] = None,
                    ambient_dim: Optional[int] = None) -> np.ndarray:
    """Largest member of each class of values closer than ``tol``, zero class included."""
    tol = settings.PURIKIT_DISTINCT_TOL if tol is None else tol
    ambient = spec.ambient_dim if ambient_dim is None else ambient_dim
    values = np.asarray(spec.values, dtype=float)
    padded = np.concatenate([values, np.zeros(max(ambient - values.size, 0))])
    padded = np.sort(padded)[::-1]
    starts = np.concatenate([[True], np.diff(padded) < -tol])
    return padded[starts]


def distinct_count(spec: Spectrum, tol: Optional[float] = None,
                   ambient_dim: Optional[int] = None) -> int:
    return int(distinct_values(spec, tol, ambient_dim).size)


def haar_unitary(dim: int, seed: Optional[int] = None) -> np.ndarray:
    if dim == 1:
        return np.eye(1, dtype=complex)
    return unitary_group.rvs(dim, random_state=seed)


def assemble_density(spec: Spectrum, basis: Union[str, np.ndarray] = 'random_haar',
                     seed: Optional[int] = None, local_dim: Optional[int] = 2) -> DensityMatrix:
    """rho = sum_i lambda_i |phi_i><phi_i| with phi_i the columns of ``basis``."""
    dim = spec.ambient_dim
    check_dense_cap(dim)
    n_sites, local_dim = ensure_square_sites(dim, local_dim)

    if isinstance(basis, str):
        if basis == 'random_haar':
            unitary = haar_unitary(dim, seed)
        elif basis == 'computational':
            unitary = np.eye(dim, dtype=complex)
        else:
            raise PreconditionError(f"unknown basis {basis!r}")
    else:
        unitary = np.asarray(basis, dtype=complex)
        if unitary.shape != (dim, dim):
            raise PreconditionError(f"basis of shape {unitary.shape} for dimension {dim}")
        if np.max(np.abs(unitary.conj().T @ unitary - np.eye(dim))) > 1e-10:
            raise PreconditionError("basis columns are not orthonormal")

    data = (unitary * spec.full_values()) @ unitary.conj().T
    data = 0.5 * (data + data.conj().T)
    return DensityMatrix(n_sites=n_sites, local_dim=local_dim, data=data,
                         normalized=spec.normalized)


def random_mps_mixture(n_sites: int, local_dim: int, rank: int, bond: int,
                       seed: Optional[int] = None) -> DensityMatrix:
    """
    Random mixed state of the given rank whose components are random MPS of bond ``bond``.

    The operator Schmidt rank is at most rank * bond**2 at every cut.
    """
    check_dense_cap(local_dim ** n_sites)
    rng = np.random.default_rng(seed)
    weights = rng.random(rank) + 0.1
    weights = weights / weights.sum()
    data = np.zeros((local_dim ** n_sites,) * 2, dtype=complex)
    for weight in weights:
        tensors = []
        for site in range(n_sites):
            left = 1 if site == 0 else bond
            right = 1 if site == n_sites - 1 else bond
            shape = (left, local_dim, right)
            tensors.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        vector = contract_mps(tensors)
        vector = vector / np.linalg.norm(vector)
        data += weight * np.outer(vector, vector.conj())
    return DensityMatrix.from_array(data, n_sites, local_dim, normalized=True)
