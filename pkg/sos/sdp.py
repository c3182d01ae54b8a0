"""
Dense primal-dual interior-point solver for the sos fitting SDP.

The problem

    min sum_i z_i  s.t.  z_i >= +-(lam_i - v_i^T R v_i),  R >= 0

is kept in conic form  min c^T x  s.t.  G x + s = h,  s in R_+^{2M} x S_+^k
with x = (z, svec R). The Newton system is reduced to a k(k+1)/2 system by
eliminating z.
The solver works on R' = T R T^T where V = Q T is a thin QR factorization of
the Vandermonde rows, so the data rows q_i are orthonormal columns instead of
nearly parallel monomials. Gram matrices are mapped back on output.
Scaling is Nesterov-Todd; the centering parameter follows Mehrotra's rule
with a fixed sigma = 0.3 fallback.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from django.conf import settings

from purikit.exceptions import PreconditionError
from tensors.spectra import Spectrum, distinct_values
from .polynomials import GramPolynomial, vandermonde

logger = logging.getLogger(__name__)

STATUSES = ('optimal', 'max_iter', 'infeasible', 'numerical_failure')
STARTS = ('feasible', 'identity')
STEP_FRACTION = 0.99
FALLBACK_SIGMA = 0.3
DUAL_START_DELTA = 0.1
BASIS_RANK_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """
    Standard form with block structure X = diag(z) + R and 2M inequalities
    tr(A_j X) <= b_j, M = ambient dimension. Eigenvalues are stored divided by ``scale``.
    """
    eigenvalues: np.ndarray
    vandermonde_rows: np.ndarray
    scale: float = 1.0

    @property
    def ambient_dim(self) -> int:
        return self.eigenvalues.size

    @property
    def k(self) -> int:
        return self.vandermonde_rows.shape[1]

    @property
    def block_dims(self) -> Tuple[int, int]:
        return self.ambient_dim, self.k

    @property
    def n_constraints(self) -> int:
        return 2 * self.ambient_dim

    @property
    def b(self) -> np.ndarray:
        return np.concatenate([-self.eigenvalues, self.eigenvalues])

    @property
    def cost(self) -> Tuple[np.ndarray, np.ndarray]:
        """C = I (+) 0 as its diagonal and PSD blocks."""
        return np.ones(self.ambient_dim), np.zeros((self.k, self.k))

    def constraint(self, j: int) -> Tuple[np.ndarray, np.ndarray]:
        """A_j as (diagonal block, PSD block)."""
        if not 0 <= j < self.n_constraints:
            raise PreconditionError(f"constraint index {j} out of range")
        i = j % self.ambient_dim
        sign = -1.0 if j < self.ambient_dim else 1.0
        diagonal = np.zeros(self.ambient_dim)
        diagonal[i] = -1.0
        v = self.vandermonde_rows[i]
        return diagonal, sign * np.outer(v, v)

    def poly_values(self, R: np.ndarray) -> np.ndarray:
        V = self.vandermonde_rows
        return np.real(np.einsum('ik,kl,il->i', V, R, V))

    def constraint_values(self, z: np.ndarray, R: np.ndarray) -> np.ndarray:
        """tr(A_j X) for every j."""
        p = self.poly_values(R)
        return np.concatenate([-z - p, -z + p])

    def margins(self, z: np.ndarray, R: np.ndarray) -> np.ndarray:
        """b_j - tr(A_j X); nonnegative exactly when (z, R) is feasible."""
        return self.b - self.constraint_values(z, R)

    def orthogonal_basis(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """(Q, T) with V = Q T, or None when V lacks full column rank."""
        V = self.vandermonde_rows
        if V.shape[0] < V.shape[1]:
            return None
        Q, T = np.linalg.qr(V)
        diagonal = np.abs(np.diag(T))
        if diagonal.min() <= BASIS_RANK_TOL * diagonal.max():
            return None
        return Q, T


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """
    Best iterate of one solver run, in the rescaled variable.

    ``R`` is the PSD slack block S of that iterate, mapped to the monomial
    basis. It equals smat(r) of the primal variable up to ``primal_residual``
    and is the block that is PSD on every iterate, so it is the one extracted.
    """
    z: np.ndarray
    R: np.ndarray
    objective: float
    dual_objective: float
    duality_gap: float
    iterations: int
    status: str
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    scale: float = 1.0
    start: str = 'feasible'
    history: List[dict] = field(default_factory=list)

    @property
    def merit(self) -> float:
        return self.duality_gap / self.scale + self.primal_residual + self.dual_residual

    def gram(self) -> GramPolynomial:
        return GramPolynomial(scaled_gram=0.5 * (self.R + self.R.T), origin='sdp', scale=self.scale)


def build_standard_form(spec: Spectrum, k: int, ambient_dim: Optional[int] = None,
                        rescale: bool = True) -> SdpProblem:
    if k < 1:
        raise PreconditionError("k must be at least 1")
    ambient = spec.ambient_dim if ambient_dim is None else ambient_dim
    values = np.asarray(spec.values, dtype=float)
    if values.size > ambient:
        raise PreconditionError(f"ambient dimension {ambient} is smaller than the spectrum")
    full = np.concatenate([values, np.zeros(ambient - values.size)])
    scale = float(full[0]) if rescale and full[0] > 0 else 1.0
    eigenvalues = full / scale
    return SdpProblem(eigenvalues=eigenvalues, vandermonde_rows=vandermonde(eigenvalues, k), scale=scale)


def strictly_feasible_point(problem: SdpProblem, spec: Optional[Spectrum] = None,
                            tol: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Interior point built from the biorthogonal basis of k distinct Vandermonde vectors.

    The k representatives are spread evenly over the sorted distinct values.
    R = sum_i |w_i><w_i| is positive definite and z_i = |lam_i - p(lam_i)| + 1 leaves
    every inequality slack by at least 1.
    """
    k = problem.k
    if spec is not None:
        representatives = distinct_values(spec, tol) / problem.scale
    else:
        grid = Spectrum(values=np.sort(problem.eigenvalues)[::-1], ambient_dim=problem.ambient_dim)
        representatives = distinct_values(grid, tol)
    m = representatives.size
    if k >= m:
        raise PreconditionError(f"k={k} needs at least k+1 distinct eigenvalues, found {m}")
    chosen = representatives[np.round(np.linspace(0, m - 1, k)).astype(int)]
    square = vandermonde(chosen, k)
    biorthogonal = scipy.linalg.solve(square, np.eye(k))
    R = biorthogonal @ biorthogonal.T
    z = np.abs(problem.eigenvalues - problem.poly_values(R)) + 1.0
    return z, 0.5 * (R + R.T)


def _svec_basis(k: int) -> np.ndarray:
    """Rows are vec(E_a) for the orthonormal basis of symmetric k x k matrices."""
    rows = []
    for p in range(k):
        for q in range(p, k):
            basis = np.zeros((k, k))
            if p == q:
                basis[p, p] = 1.0
            else:
                basis[p, q] = basis[q, p] = np.sqrt(0.5)
            rows.append(basis.reshape(-1))
    return np.array(rows)


class InteriorPointSolver:
    """Mehrotra predictor-corrector on one SdpProblem; one instance per problem."""

    def __init__(self, problem: SdpProblem, tol_gap: Optional[float] = None,
                 feastol: Optional[float] = None, max_iter: Optional[int] = None,
                 start: str = 'feasible'):
        if start not in STARTS:
            raise PreconditionError(f"unknown start {start!r}")
        self.problem = problem
        self.start = start
        self.tol_gap = settings.PURIKIT_SDP_TOL_GAP if tol_gap is None else tol_gap
        self.feastol = settings.PURIKIT_SDP_FEASTOL if feastol is None else feastol
        self.max_iter = settings.PURIKIT_SDP_MAX_ITER if max_iter is None else max_iter

        k = problem.k
        self.M = problem.ambient_dim
        self.basis = _svec_basis(k)
        self.K = self.basis.shape[0]
        orthogonal = problem.orthogonal_basis()
        if orthogonal is None:
            self.rows, self.T = problem.vandermonde_rows, None
        else:
            self.rows, self.T = orthogonal
        # a_i = svec(q_i q_i^T), so that a_i . svec(R') = q_i^T R' q_i
        self.A = np.einsum('ik,il,akl->ia', self.rows, self.rows, self.basis.reshape(self.K, k, k))
        self.lam = problem.eigenvalues
        self.h_norm = max(1.0, np.linalg.norm(np.concatenate([self.lam, self.lam])))
        self.c_norm = max(1.0, np.sqrt(self.M))
        self.nu = 2 * self.M + k

    # symmetric-matrix helpers
    def smat(self, u: np.ndarray) -> np.ndarray:
        k = self.problem.k
        return (self.basis.T @ u).reshape(k, k)

    def svec(self, matrix: np.ndarray) -> np.ndarray:
        return self.basis @ matrix.reshape(-1)

    def to_solver_basis(self, R: np.ndarray) -> np.ndarray:
        return R if self.T is None else self.T @ R @ self.T.T

    def to_monomial_basis(self, R: np.ndarray) -> np.ndarray:
        if self.T is None:
            return R
        half = scipy.linalg.solve_triangular(self.T, R, lower=False)
        full = scipy.linalg.solve_triangular(self.T, half.T, lower=False)
        return 0.5 * (full + full.T)

    # G and G^T for the linear block; the PSD block is G_s x = -smat(r)
    def g_lin(self, dz: np.ndarray, dr: np.ndarray) -> np.ndarray:
        Ar = self.A @ dr
        return np.concatenate([-dz - Ar, -dz + Ar])

    def h_lin(self) -> np.ndarray:
        return np.concatenate([-self.lam, self.lam])

    def residuals(self, z, r, s_lin, S, y_lin, Y):
        y1, y2 = y_lin[:self.M], y_lin[self.M:]
        rp_lin = self.g_lin(z, r) + s_lin - self.h_lin()
        rp_sdp = S - self.smat(r)
        rd_z = 1.0 - y1 - y2
        rd_r = self.A.T @ (y2 - y1) - self.svec(Y)
        return rp_lin, rp_sdp, rd_z, rd_r

    def initial_point(self):
        k = self.problem.k
        R = np.eye(k)
        if self.start == 'feasible':
            try:
                _, R = strictly_feasible_point(self.problem)
            except PreconditionError:
                pass
            else:
                R = self.to_solver_basis(R)
                R = 0.5 * (R + R.T) * (k / np.trace(R))
        r = self.svec(R)
        z = np.abs(self.lam - self.A @ r) + 1.0
        s_lin = self.h_lin() - self.g_lin(z, r)
        y_lin = np.concatenate([
            np.full(self.M, 0.5 * (1.0 - DUAL_START_DELTA)),
            np.full(self.M, 0.5 * (1.0 + DUAL_START_DELTA)),
        ])
        Y = DUAL_START_DELTA * self.rows.T @ self.rows
        eigenvalues = np.linalg.eigvalsh(Y)
        if eigenvalues[0] <= 1e-8 * eigenvalues[-1]:
            # fewer distinct values than k: no strictly feasible dual point exists
            Y = Y + DUAL_START_DELTA * max(1.0, eigenvalues[-1]) * np.eye(k)
        return z, r, s_lin, self.smat(r), y_lin, Y

    @staticmethod
    def nt_scaling(S: np.ndarray, Y: np.ndarray):
        """Return (scal, lam) with scal^-1 S scal^-T = scal^T Y scal = diag(lam)."""
        Ls = scipy.linalg.cholesky(S, lower=True)
        Ly = scipy.linalg.cholesky(Y, lower=True)
        U, sv, Vt = scipy.linalg.svd(Ly.T @ Ls)
        scal = Ls @ Vt.T / np.sqrt(sv)[None, :]
        return scal, sv

    @staticmethod
    def max_step_lin(v: np.ndarray, dv: np.ndarray) -> float:
        negative = dv < 0
        if not np.any(negative):
            return np.inf
        return float(np.min(-v[negative] / dv[negative]))

    @staticmethod
    def max_step_psd(X: np.ndarray, dX: np.ndarray) -> float:
        L = scipy.linalg.cholesky(X, lower=True)
        half = scipy.linalg.solve_triangular(L, dX, lower=True)
        inner = scipy.linalg.solve_triangular(L, half.T, lower=True)
        smallest = np.linalg.eigvalsh(0.5 * (inner + inner.T))[0]
        return np.inf if smallest >= 0 else float(-1.0 / smallest)

    def factor_newton(self, w: np.ndarray, T_inv: np.ndarray):
        d = 1.0 / w ** 2
        d1, d2 = d[:self.M], d[self.M:]
        Dz = d1 + d2
        B = (d1 - d2)[:, None] * self.A
        H_sdp = self.basis @ np.kron(T_inv, T_inv) @ self.basis.T
        H_rr = self.A.T @ (Dz[:, None] * self.A) + H_sdp
        schur = H_rr - B.T @ (B / Dz[:, None])
        schur = 0.5 * (schur + schur.T)
        try:
            factor = ('cho', scipy.linalg.cho_factor(schur))
        except np.linalg.LinAlgError:
            factor = ('lstsq', schur)
        return Dz, B, factor

    @staticmethod
    def solve_schur(factor, rhs: np.ndarray) -> np.ndarray:
        kind, data = factor
        if kind == 'cho':
            return scipy.linalg.cho_solve(data, rhs)
        return scipy.linalg.lstsq(data, rhs)[0]

    def newton_step(self, residuals, w, lam_lin, scal, T_inv, newton, q_lin, Xq):
        rp_lin, rp_sdp, rd_z, rd_r = residuals
        Dz, B, factor = newton
        u = (rp_lin + w * q_lin) / w ** 2
        u1, u2 = u[:self.M], u[self.M:]
        U = T_inv @ (rp_sdp + scal @ Xq @ scal.T) @ T_inv
        rhs_z = -rd_z + u1 + u2
        rhs_r = -rd_r + self.A.T @ (u1 - u2) + self.svec(0.5 * (U + U.T))

        dr = self.solve_schur(factor, rhs_r - B.T @ (rhs_z / Dz))
        dz = (rhs_z - B @ dr) / Dz
        g = self.g_lin(dz, dr)
        ds_lin = -rp_lin - g
        dS = -rp_sdp + self.smat(dr)
        dy_lin = (g + rp_lin + w * q_lin) / w ** 2
        dY = T_inv @ (-self.smat(dr) + rp_sdp + scal @ Xq @ scal.T) @ T_inv
        return dz, dr, ds_lin, 0.5 * (dS + dS.T), dy_lin, 0.5 * (dY + dY.T)

    def step_length(self, s_lin, S, y_lin, Y, ds_lin, dS, dy_lin, dY) -> float:
        return min(
            self.max_step_lin(s_lin, ds_lin),
            self.max_step_lin(y_lin, dy_lin),
            self.max_step_psd(S, dS),
            self.max_step_psd(Y, dY),
        )

    def run(self) -> SdpSolution:
        z, r, s_lin, S, y_lin, Y = self.initial_point()
        status = 'max_iter'
        history: List[dict] = []
        best = None
        iteration = 0

        for iteration in range(self.max_iter + 1):
            residuals = self.residuals(z, r, s_lin, S, y_lin, Y)
            rp_lin, rp_sdp, rd_z, rd_r = residuals
            pcost = float(np.sum(z))
            dcost = float(self.lam @ (y_lin[:self.M] - y_lin[self.M:]))
            gap = float(s_lin @ y_lin + np.sum(S * Y))
            pres = np.sqrt(rp_lin @ rp_lin + np.sum(rp_sdp ** 2)) / self.h_norm
            dres = np.sqrt(rd_z @ rd_z + rd_r @ rd_r) / self.c_norm
            history.append({'iteration': iteration, 'pcost': pcost, 'dcost': dcost,
                            'gap': gap, 'pres': float(pres), 'dres': float(dres)})
            merit = gap + pres + dres
            if best is None or merit < best[0]:
                best = (merit, iteration, z.copy(), S.copy(), pcost, dcost, gap, pres, dres)

            if gap <= self.tol_gap and pres <= self.feastol and dres <= self.feastol:
                status = 'optimal'
                best = (merit, iteration, z.copy(), S.copy(), pcost, dcost, gap, pres, dres)
                break
            if iteration == self.max_iter:
                break
            if np.any(s_lin <= 0) or np.any(y_lin <= 0):
                logger.warning(f"SDP iteration {iteration}: iterate left the linear cone")
                status = 'numerical_failure'
                break

            mu = gap / self.nu
            w = np.sqrt(s_lin / y_lin)
            lam_lin = np.sqrt(s_lin * y_lin)
            try:
                scal, lam_sdp = self.nt_scaling(S, Y)
                scal_inv = scipy.linalg.solve(scal, np.eye(self.problem.k))
                T_inv = scal_inv.T @ scal_inv
                newton = self.factor_newton(w, T_inv)
            except (np.linalg.LinAlgError, ValueError) as e:
                logger.warning(f"SDP iteration {iteration}: scaling failed ({e})")
                status = 'numerical_failure'
                break
            pair_sum = lam_sdp[:, None] + lam_sdp[None, :]

            try:
                # predictor
                aff = self.newton_step(residuals, w, lam_lin, scal, T_inv, newton,
                                       -lam_lin, -np.diag(lam_sdp))
                alpha = min(1.0, self.step_length(s_lin, S, y_lin, Y, *aff[2:]))
                mu_aff = ((s_lin + alpha * aff[2]) @ (y_lin + alpha * aff[4])
                          + np.sum((S + alpha * aff[3]) * (Y + alpha * aff[5]))) / self.nu
                sigma = float(np.clip((mu_aff / mu) ** 3, 0.0, 1.0))

                # corrector with the second-order term
                ds_t = scal_inv @ aff[3] @ scal_inv.T
                dy_t = scal.T @ aff[5] @ scal
                rc_lin = sigma * mu - lam_lin ** 2 - aff[2] * aff[4]
                rc_sdp = sigma * mu * np.eye(self.problem.k) - np.diag(lam_sdp ** 2) \
                    - 0.5 * (ds_t @ dy_t + dy_t @ ds_t)
                step = self.newton_step(residuals, w, lam_lin, scal, T_inv, newton,
                                        rc_lin / lam_lin, 2.0 * rc_sdp / pair_sum)
                if not all(np.all(np.isfinite(part)) for part in step):
                    raise np.linalg.LinAlgError("non-finite corrector")
            except np.linalg.LinAlgError as e:
                logger.warning(f"SDP iteration {iteration}: corrector failed ({e}), trying sigma=0.3")
                try:
                    rc_lin = FALLBACK_SIGMA * mu - lam_lin ** 2
                    rc_sdp = FALLBACK_SIGMA * mu * np.eye(self.problem.k) - np.diag(lam_sdp ** 2)
                    step = self.newton_step(residuals, w, lam_lin, scal, T_inv, newton,
                                            rc_lin / lam_lin, 2.0 * rc_sdp / pair_sum)
                except np.linalg.LinAlgError:
                    status = 'numerical_failure'
                    break
                if not all(np.all(np.isfinite(part)) for part in step):
                    status = 'numerical_failure'
                    break

            try:
                alpha = min(1.0, STEP_FRACTION * self.step_length(s_lin, S, y_lin, Y, *step[2:]))
            except np.linalg.LinAlgError:
                status = 'numerical_failure'
                break
            if alpha < 1e-12:
                status = 'numerical_failure'
                break
            history[-1]['step'] = alpha
            dz, dr, ds_lin, dS, dy_lin, dY = step
            z = z + alpha * dz
            r = r + alpha * dr
            s_lin = s_lin + alpha * ds_lin
            S = S + alpha * dS
            y_lin = y_lin + alpha * dy_lin
            Y = Y + alpha * dY

        _, _, z_best, S_best, pcost, dcost, gap, pres, dres = best
        if status != 'optimal':
            logger.warning(
                f"SDP (M={self.M}, k={self.problem.k}, start={self.start}) stopped with status "
                f"{status} after {iteration} iterations, gap={gap:.2e}"
            )
        # z and the objectives are reported in the original eigenvalue units
        scale = self.problem.scale
        return SdpSolution(
            z=scale * z_best,
            R=self.to_monomial_basis(0.5 * (S_best + S_best.T)),
            objective=scale * pcost,
            dual_objective=scale * dcost,
            duality_gap=scale * max(gap, 0.0),
            iterations=iteration,
            status=status,
            primal_residual=float(pres),
            dual_residual=float(dres),
            scale=scale,
            start=self.start,
            history=history,
        )


def solve(problem: SdpProblem, tol_gap: Optional[float] = None, max_iter: Optional[int] = None,
          feastol: Optional[float] = None) -> SdpSolution:
    """
    Solve one fitting SDP; deterministic for identical inputs.

    Starts from the normalized strictly feasible point and, when that run is
    not optimal, once more from the identity. The better run is returned.
    """
    runs = []
    for start in STARTS:
        solution = InteriorPointSolver(problem, tol_gap=tol_gap, feastol=feastol,
                                       max_iter=max_iter, start=start).run()
        runs.append(solution)
        if solution.status == 'optimal':
            break
    return min(runs, key=lambda s: (s.status != 'optimal', s.merit))
