"""
Regular t-gon slack matrices and the classical states built from them.

rho_t = sum_{x,y} S_t(x, y) |x, y><x, y| has operator Schmidt rank 3 for
every t, while its purifications inherit the psd rank of S_t.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.fft
import scipy.linalg
from django.conf import settings

from purikit.exceptions import DimensionMismatch, NumericalFailure, PreconditionError
from tensors.states import DensityMatrix, MPDO, PureState
from tensors.utils import check_dense_cap, contract_mpdo, diagonal_operator_schmidt_rank, numerical_rank

logger = logging.getLogger(__name__)

LAYOUTS = ('flat', 'binary')
SLACK_RANK_TOL = 1e-8
CIRCULANT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class SlackMatrix:
    """
    S(i, j) = b_j - <a_j, v_i> for vertex v_i and facet j, where facet j
    supports the edge from v_j to v_{j+1}. Entries are multiplied by
    ``normalization`` so the smallest nonzero slack is 1.
    """
    t: int
    entries: np.ndarray
    normalization: float
    circulant_row: np.ndarray
    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    def validate(self) -> 'SlackMatrix':
        if self.entries.shape != (self.t, self.t):
            raise DimensionMismatch(f"slack matrix of shape {self.entries.shape} for t={self.t}")
        if np.min(self.entries) < -1e-12:
            raise PreconditionError("slack entries must be nonnegative")
        if not is_circulant(self.entries):
            raise PreconditionError("slack matrix is not circulant")
        return self

    def rank(self, tol: float = SLACK_RANK_TOL) -> int:
        return numerical_rank(scipy.linalg.svdvals(self.entries), tol)

    @property
    def bits(self) -> int:
        return binary_sites(self.t)


def binary_sites(t: int) -> int:
    m = int(t).bit_length() - 1
    if t < 2 or 2 ** m != t:
        raise PreconditionError(f"t={t} is not a power of two")
    return m


def is_circulant(matrix: np.ndarray, tol: float = CIRCULANT_TOL) -> bool:
    t = matrix.shape[0]
    rolled = np.stack([np.roll(matrix[0], i) for i in range(t)])
    return bool(np.max(np.abs(matrix - rolled), initial=0.0) <= tol * max(np.max(np.abs(matrix)), 1.0))


def tgon_slack(t: int) -> SlackMatrix:
    """Slack matrix of the regular t-gon inscribed in the unit circle."""
    if t < 3:
        raise PreconditionError("a polygon needs t >= 3")
    angles = 2 * np.pi * np.arange(t) / t
    vertices = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    facet_angles = angles + np.pi / t
    normals = np.stack([np.cos(facet_angles), np.sin(facet_angles)], axis=1)
    offsets = np.full(t, np.cos(np.pi / t))

    raw = offsets[None, :] - vertices @ normals.T
    raw[np.abs(raw) < 1e-12] = 0.0
    normalization = 1.0 / np.min(raw[raw > 0])
    entries = raw * normalization
    slack = SlackMatrix(
        t=t,
        entries=entries,
        normalization=float(normalization),
        circulant_row=entries[0].copy(),
        vertices=vertices,
        normals=normals,
        offsets=offsets,
    )
    return slack.validate()


def slack_table(slack: SlackMatrix, layout: str = 'flat') -> Tuple[np.ndarray, List[int]]:
    """Diagonal of rho_t with its site dimensions, (t, t) or 2m binary sites."""
    if layout == 'flat':
        return slack.entries.reshape(-1), [slack.t, slack.t]
    if layout == 'binary':
        return slack.entries.reshape(-1), [2] * (2 * slack.bits)
    raise PreconditionError(f"unknown layout {layout!r}")


def rho_t(slack: SlackMatrix, normalize: bool = False, layout: str = 'flat') -> DensityMatrix:
    """Dense diagonal state with S_t(x, y) at |x, y>, unnormalized unless asked."""
    diagonal, dims = slack_table(slack, layout)
    check_dense_cap(diagonal.size)
    if normalize:
        diagonal = diagonal / diagonal.sum()
    return DensityMatrix(n_sites=len(dims), local_dim=dims[0], data=np.diag(diagonal).astype(complex),
                         normalized=normalize)


def rho_t_cut_ranks(slack: SlackMatrix, layout: str = 'flat',
                    tol: Optional[float] = None) -> List[int]:
    """Operator Schmidt ranks of rho_t at every linear cut, without forming it."""
    diagonal, dims = slack_table(slack, layout)
    return diagonal_operator_schmidt_rank(diagonal, dims, tol)[0]


def circulant_eigenvalues(slack: SlackMatrix, tol: float = CIRCULANT_TOL) -> np.ndarray:
    """
    Eigenvalues lam_q = sum_c row[c] exp(2 pi i q c / t), paired with the
    Fourier vectors f_q(j) = exp(2 pi i q j / t).
    """
    if not is_circulant(slack.entries, tol):
        raise PreconditionError("eigenvalues by FFT need a circulant matrix")
    return slack.t * scipy.fft.ifft(slack.circulant_row)


def fourier_support(eigenvalues: np.ndarray, tol: float = 1e-9) -> List[int]:
    top = np.max(np.abs(eigenvalues))
    return [int(q) for q in np.nonzero(np.abs(eigenvalues) > tol * top)[0]]


def fourier_mpo(m: int) -> MPDO:
    """
    Bond-dimension-3 MPO for rho_t, t = 2**m, on 2m binary sites.

    With x = sum_k x_k 2**(m-k), S(x, y) = (1/t) sum_q lam_q w^{q x} w^{-q y} and
    w^{q x} = prod_k exp(2 pi i q x_k / 2**k), so every site tensor is diagonal
    in the three surviving modes q = 0, 1, t-1. Site m carries lam_q / t.
    """
    if m < 2:
        raise PreconditionError("the Fourier MPO needs m >= 2 so that modes 1 and t-1 differ")
    t = 2 ** m
    eigenvalues = circulant_eigenvalues(tgon_slack(t))
    support = fourier_support(eigenvalues)
    modes = np.array([0, 1, t - 1])
    if support != list(modes):
        raise NumericalFailure(f"Fourier support {support} differs from {list(modes)}")

    tensors = []
    for site in range(2 * m):
        k = site % m + 1
        sign = 1.0 if site < m else -1.0
        # phases[b, a] for bit b and mode a
        phases = np.exp(sign * 2j * np.pi * np.outer([0, 1], modes) / 2 ** k)
        if site == m - 1:
            phases = phases * (eigenvalues[modes] / t)[None, :]
        core = np.zeros((3, 2, 2, 3), dtype=complex)
        for bit in (0, 1):
            core[:, bit, bit, :] = np.diag(phases[bit])
        if site == 0:
            core = core.sum(axis=0, keepdims=True)
        if site == 2 * m - 1:
            core = core.sum(axis=3, keepdims=True)
        tensors.append(core)
    return MPDO(site_tensors=tuple(tensors), local_dim=2)


def mpo_entry(mpo: MPDO, x: int, y: int) -> complex:
    """<x, y| O |x, y> by a single chain of matrix products."""
    m = mpo.n_sites // 2
    bits = [(x >> (m - 1 - k)) & 1 for k in range(m)] + [(y >> (m - 1 - k)) & 1 for k in range(m)]
    vector = np.ones(1, dtype=complex)
    for bit, tensor in zip(bits, mpo.site_tensors):
        vector = vector @ tensor[:, bit, bit, :]
    return complex(vector[0])


def verify_fourier_mpo(m: int, samples: int = 200, seed: int = 0) -> float:
    """
    Largest deviation between the MPO and S_t, relative to max S_t.

    Dense up to PURIKIT_VERIFY_DENSE_MAX_M, otherwise on seeded random (x, y).
    """
    mpo = fourier_mpo(m)
    slack = tgon_slack(2 ** m)
    if any(bond != 3 for bond in mpo.bond_dims):
        raise NumericalFailure(f"unexpected bond dimensions {mpo.bond_dims}")
    scale = np.max(slack.entries)

    if m <= settings.PURIKIT_VERIFY_DENSE_MAX_M:
        dense = contract_mpdo(mpo).data
        error = np.max(np.abs(dense - np.diag(slack.entries.reshape(-1))))
    else:
        rng = np.random.default_rng(seed)
        pairs = rng.integers(0, slack.t, size=(samples, 2))
        error = max(abs(mpo_entry(mpo, int(x), int(y)) - slack.entries[x, y]) for x, y in pairs)
    relative = float(error / scale)
    logger.info(f"Fourier MPO m={m}: relative error {relative:.2e}")
    return relative


def _copy_embed(table: np.ndarray, dims: List[int]) -> PureState:
    """sum_x table(x) |x, x> with each site holding a (physical, copy) pair."""
    amplitudes = np.zeros([d * d for d in dims], dtype=complex)
    positions = np.ix_(*[np.arange(d) * (d + 1) for d in dims])
    amplitudes[positions] = table.reshape(dims)
    return PureState(n_sites=len(dims), local_dims=tuple(d * d for d in dims),
                     amplitudes=amplitudes.reshape(-1))


def phi_states(slack: SlackMatrix, layout: str = 'flat') -> Tuple[PureState, PureState]:
    """
    phi_t = sum sqrt(S(x, y)) |x, x, y, y> and phi_t^2 = sum S(x, y) |x, x, y, y>.

    Each site pairs a physical index with its ancilla copy, so tracing out the
    copies of phi_t gives rho_t.
    """
    diagonal, dims = slack_table(slack, layout)
    check_dense_cap(diagonal.size, 'phi state')
    table = np.clip(diagonal, 0.0, None)
    return _copy_embed(np.sqrt(table), dims), _copy_embed(table, dims)


def phi_schmidt_ranks(slack: SlackMatrix, layout: str = 'flat',
                      tol: Optional[float] = None) -> Tuple[List[int], List[int]]:
    """Per-cut Schmidt ranks of (phi_t, phi_t^2) from their amplitude tables."""
    diagonal, dims = slack_table(slack, layout)
    table = np.clip(diagonal, 0.0, None)
    return (diagonal_operator_schmidt_rank(np.sqrt(table), dims, tol)[0],
            diagonal_operator_schmidt_rank(table, dims, tol)[0])
