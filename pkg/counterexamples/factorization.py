"""Heuristic search for psd factorizations S(x, y) = tr(E_x F_y)."""
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.optimize import minimize

from purikit.exceptions import PreconditionError

logger = logging.getLogger(__name__)

SUCCESS_RTOL = 1e-6
ALTERNATING_ROUNDS = 4
LBFGS_OPTIONS = {'ftol': 1e-20, 'gtol': 1e-13}


@dataclass(frozen=True, eq=False)
class PsdFactorization:
    """
    Best factors found. ``success`` means residual <= 1e-6 ||S||_F; a failed
    search says nothing about whether a factorization of size r exists.
    """
    r: int
    E: List[np.ndarray]
    F: List[np.ndarray]
    residual: float
    success: bool
    restarts: int
    seed: int
    history: List[float] = field(default_factory=list)

    def reconstruct(self) -> np.ndarray:
        return np.einsum('xij,yji->xy', np.array(self.E), np.array(self.F))

    def min_eigenvalue(self) -> float:
        blocks = list(self.E) + list(self.F)
        return float(min(np.linalg.eigvalsh(block)[0] for block in blocks))


def _grams(factors: np.ndarray) -> np.ndarray:
    return np.einsum('xij,xkj->xik', factors, factors)


def _loss(A: np.ndarray, B: np.ndarray, S: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """sum (tr(A_x A_x^T B_y B_y^T) - S_xy)^2 with its gradients in A and B."""
    E, F = _grams(A), _grams(B)
    residual = np.einsum('xij,yji->xy', E, F) - S
    grad_A = 4.0 * np.einsum('xy,yij,xjk->xik', residual, F, A)
    grad_B = 4.0 * np.einsum('xy,xij,yjk->yik', residual, E, B)
    return float(np.sum(residual ** 2)), grad_A, grad_B


def _minimize(fun, x0: np.ndarray, max_iter: int) -> np.ndarray:
    result = minimize(fun, x0, jac=True, method='L-BFGS-B',
                      options={'maxiter': max_iter, **LBFGS_OPTIONS})
    return result.x


def _search_once(S: np.ndarray, r: int, rng: np.random.Generator,
                 max_iter: int) -> Tuple[np.ndarray, np.ndarray, float]:
    n_x, n_y = S.shape
    shape_A, shape_B = (n_x, r, r), (n_y, r, r)
    # tr(E F) is a sum of r**3 products of four entries
    sigma = (max(np.mean(S), 1e-12) / r ** 3) ** 0.25
    A = sigma * rng.standard_normal(shape_A)
    B = sigma * rng.standard_normal(shape_B)

    def loss_A(flat):
        value, grad, _ = _loss(flat.reshape(shape_A), B, S)
        return value, grad.reshape(-1)

    def loss_B(flat):
        value, _, grad = _loss(A, flat.reshape(shape_B), S)
        return value, grad.reshape(-1)

    def loss_joint(flat):
        value, grad_A, grad_B = _loss(flat[:A.size].reshape(shape_A), flat[A.size:].reshape(shape_B), S)
        return value, np.concatenate([grad_A.reshape(-1), grad_B.reshape(-1)])

    for _ in range(ALTERNATING_ROUNDS):
        A = _minimize(loss_A, A.reshape(-1), max_iter).reshape(shape_A)
        B = _minimize(loss_B, B.reshape(-1), max_iter).reshape(shape_B)
    joint = _minimize(loss_joint, np.concatenate([A.reshape(-1), B.reshape(-1)]), max_iter)
    A, B = joint[:A.size].reshape(shape_A), joint[A.size:].reshape(shape_B)
    value = _loss(A, B, S)[0]
    return A, B, float(np.sqrt(value))


def psd_factorization_search(S: np.ndarray, r: int, restarts: int = 8, seed: int = 0,
                             max_iter: int = 500) -> PsdFactorization:
    """
    Alternating L-BFGS over factors E_x = A_x A_x^T, F_y = B_y B_y^T from random starts.

    Args:
        S: nonnegative matrix
        r: size of the PSD factors
        restarts: number of random starts; stops early on success
        seed: seed of the start generator
        max_iter: L-BFGS iterations per sweep

    Returns:
        PsdFactorization holding the best factors found, rescaled to S
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or np.min(S) < 0:
        raise PreconditionError("psd factorization needs a nonnegative matrix")
    if r < 1 or restarts < 1:
        raise PreconditionError("r and restarts must be at least 1")
    scale = float(np.max(S))
    if scale == 0:
        zeros = [np.zeros((r, r))]
        return PsdFactorization(r=r, E=zeros * S.shape[0], F=zeros * S.shape[1], residual=0.0,
                                success=True, restarts=0, seed=seed)

    target = S / scale
    rng = np.random.default_rng(seed)
    best = None
    history = []
    used = 0
    for attempt in range(restarts):
        used = attempt + 1
        A, B, residual = _search_once(target, r, rng, max_iter)
        history.append(residual * scale)
        if best is None or residual < best[2]:
            best = (A, B, residual)
        if residual * scale <= SUCCESS_RTOL * np.linalg.norm(S):
            break

    A, B, residual = best
    # E picks up the scale of S
    E = [scale * block for block in _grams(A)]
    F = list(_grams(B))
    residual = float(np.linalg.norm(np.einsum('xij,yji->xy', np.array(E), np.array(F)) - S))
    success = bool(residual <= SUCCESS_RTOL * np.linalg.norm(S))
    logger.info(
        f"psd search r={r} on {S.shape[0]}x{S.shape[1]}: residual {residual:.3e} "
        f"after {used} restart(s), success={success}"
    )
    return PsdFactorization(r=r, E=E, F=F, residual=residual, success=success,
                            restarts=used, seed=seed, history=history)
