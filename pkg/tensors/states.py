"""Value types for multipartite states.

All types are frozen dataclasses holding numpy arrays; they are never mutated
after construction and can be shared between threads and tasks.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from purikit.exceptions import DimensionMismatch, PreconditionError


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense operator on ``n_sites`` sites of dimension ``local_dim``."""
    n_sites: int
    local_dim: int
    data: np.ndarray
    normalized: bool = False

    @property
    def dim(self) -> int:
        return self.local_dim ** self.n_sites

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.data)))

    @cached_property
    def eigensystem(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Eigenvalues in non-increasing order and matching eigenvector columns.

        Each eigenvector is rotated so that its largest-magnitude entry (lowest
        index on ties) is real and positive, which makes degenerate blocks and
        certificates reproducible.
        """
        values, vectors = np.linalg.eigh(self.data)
        order = np.argsort(values, kind='stable')[::-1]
        values = values[order]
        vectors = np.array(vectors[:, order], dtype=complex)
        for col in range(vectors.shape[1]):
            pivot = int(np.argmax(np.abs(vectors[:, col])))
            entry = vectors[pivot, col]
            if abs(entry) > 0:
                vectors[:, col] *= np.conj(entry) / abs(entry)
        return values, vectors

    def rank(self, tol: float) -> int:
        values = self.eigensystem[0]
        top = values[0] if values.size else 0.0
        if top <= 0:
            return 0
        return int(np.count_nonzero(values > tol * top))

    def validate(self) -> 'DensityMatrix':
        if self.data.shape != (self.dim, self.dim):
            raise DimensionMismatch(
                f"matrix of shape {self.data.shape} does not match "
                f"{self.n_sites} sites of dimension {self.local_dim}"
            )
        scale = max(np.linalg.norm(self.data), np.finfo(float).tiny)
        if np.max(np.abs(self.data - self.data.conj().T)) > 1e-12 * scale:
            raise PreconditionError("density matrix is not Hermitian")
        if self.eigensystem[0][-1] < -1e-10 * scale:
            raise PreconditionError(
                f"density matrix is not positive semidefinite "
                f"(min eigenvalue {self.eigensystem[0][-1]:.3e})"
            )
        if self.normalized and abs(self.trace - 1.0) > 1e-12 * max(self.dim, 100):
            raise PreconditionError(f"trace {self.trace!r} differs from 1")
        return self

    @classmethod
    def from_array(cls, data, n_sites: int, local_dim: int,
                   normalized: bool = False, validate: bool = True) -> 'DensityMatrix':
        data = np.asarray(data, dtype=complex)
        rho = cls(n_sites=n_sites, local_dim=local_dim, data=data, normalized=normalized)
        return rho.validate() if validate else rho

    def normalized_copy(self) -> 'DensityMatrix':
        return DensityMatrix(self.n_sites, self.local_dim, self.data / self.trace, normalized=True)


@dataclass(frozen=True, eq=False)
class PureState:
    n_sites: int
    local_dims: Tuple[int, ...]
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if len(self.local_dims) != self.n_sites:
            raise DimensionMismatch(f"{len(self.local_dims)} local dimensions for {self.n_sites} sites")
        if self.amplitudes.size != int(np.prod(self.local_dims)):
            raise DimensionMismatch(
                f"{self.amplitudes.size} amplitudes for dimensions {tuple(self.local_dims)}"
            )
        if self.normalized and abs(np.linalg.norm(self.amplitudes) - 1.0) > 1e-12:
            raise PreconditionError("state flagged normalized has norm != 1")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, eq=False)
class MPDO:
    """Chain of site tensors indexed (left bond, ket, bra, right bond)."""
    site_tensors: Tuple[np.ndarray, ...]
    local_dim: int

    @property
    def n_sites(self) -> int:
        return len(self.site_tensors)

    @property
    def bond_dims(self) -> List[int]:
        return [tensor.shape[3] for tensor in self.site_tensors[:-1]]

    @property
    def operator_schmidt_rank(self) -> int:
        return max(self.bond_dims, default=1)

    def check_bonds(self) -> None:
        tensors = self.site_tensors
        if not tensors:
            raise DimensionMismatch("MPDO has no sites")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1:
            raise DimensionMismatch("boundary bonds must be trivial")
        for k, (left, right) in enumerate(zip(tensors, tensors[1:])):
            if left.shape[3] != right.shape[0]:
                raise DimensionMismatch(
                    f"bond {k + 1}: {left.shape[3]} != {right.shape[0]}"
                )


@dataclass(frozen=True, eq=False)
class MPSPurification:
    """Chain of site tensors indexed (left bond, physical, ancilla, right bond)."""
    site_tensors: Tuple[np.ndarray, ...]
    meta: dict = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return len(self.site_tensors)

    @property
    def physical_dims(self) -> List[int]:
        return [tensor.shape[1] for tensor in self.site_tensors]

    @property
    def ancilla_dims(self) -> List[int]:
        return [tensor.shape[2] for tensor in self.site_tensors]

    @property
    def schmidt_ranks(self) -> List[int]:
        return [tensor.shape[3] for tensor in self.site_tensors[:-1]]

    @property
    def purification_rank(self) -> int:
        return max(self.schmidt_ranks, default=1)

    def merged_tensors(self) -> List[np.ndarray]:
        """Site tensors with physical and ancilla legs fused, shape (Dl, d*a, Dr)."""
        return [
            tensor.reshape(tensor.shape[0], tensor.shape[1] * tensor.shape[2], tensor.shape[3])
            for tensor in self.site_tensors
        ]


def ensure_square_sites(dim: int, local_dim: Optional[int]) -> Tuple[int, int]:
    """Return (n_sites, local_dim) with local_dim**n_sites == dim."""
    if local_dim is None or local_dim == dim:
        return 1, dim
    n_sites = int(round(np.log(dim) / np.log(local_dim)))
    if local_dim ** n_sites != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of {local_dim}")
    return n_sites, local_dim
