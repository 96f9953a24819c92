"""Dense reference computations for checking the short-recurrence solvers.

Everything here forms explicit bases with full (twice-iterated Gram-Schmidt)
reorthogonalization and solves the projected problems with dense LAPACK
routines.  Work is O(n^3); sizes above ``MAX_ORACLE_N`` are refused.
Rank decisions use a single relative threshold ``RANK_RTOL * sigma_max``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .operators import LinearOperator

MAX_ORACLE_N = 400
RANK_RTOL = 1e-10


class OracleSizeError(ValueError):
    pass


class GalerkinUndefined(ArithmeticError):
    """The projected Galerkin matrix is singular at this ``k``."""

    def __init__(self, k: int):
        super().__init__(f"Galerkin point undefined at k={k}: projected matrix is singular")
        self.k = k


class KrylovSolution(NamedTuple):
    x: np.ndarray
    k: int          # subspace dimension actually used
    clamped: bool   # requested k exceeded the Krylov grade


def as_dense(A) -> np.ndarray:
    M = A.to_dense() if isinstance(A, LinearOperator) else np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("oracle expects a square matrix")
    if M.shape[0] > MAX_ORACLE_N:
        raise OracleSizeError(f"oracle limited to n <= {MAX_ORACLE_N}, got n={M.shape[0]}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def _vec(b, n: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise ValueError(f"vector must have length {n}")
    return b


# --- pseudoinverse and subspaces ----------------------------------------------

def pseudoinverse(A) -> np.ndarray:
    M = as_dense(A)
    U, s, Vt = np.linalg.svd(M)
    keep = s > RANK_RTOL * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def dense_pseudoinverse_solution(A, b) -> np.ndarray:
    """``A^+ b``: the least-squares solution of minimum norm."""
    M = as_dense(A)
    return pseudoinverse(M) @ _vec(b, M.shape[0])


def numerical_rank(A) -> int:
    s = np.linalg.svd(as_dense(A), compute_uv=False)
    return int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0


def null_space_basis(A) -> np.ndarray:
    """Orthonormal basis of ``null(A)`` (n x (n - rank))."""
    M = as_dense(A)
    _, s, Vt = np.linalg.svd(M)
    r = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
    return Vt[r:].T


def in_range(A, b) -> bool:
    """``b in ran(A)``, decided by the least-squares residual ``<= RANK_RTOL ||b||``."""
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    r = b - M @ dense_pseudoinverse_solution(M, b)
    return bool(np.linalg.norm(r) <= RANK_RTOL * max(np.linalg.norm(b), 1e-300))


# --- explicit Krylov bases ------------------------------------------------------

def _orthonormalize(v: np.ndarray, Q: np.ndarray) -> np.ndarray:
    for _ in range(2):
        v = v - Q @ (Q.T @ v)
    return v


def arnoldi_basis(A, b, k: int) -> np.ndarray:
    """Orthonormal basis of ``K_m(A, b)`` with ``m = min(k, grade)``.

    A new direction is rejected once its norm after reorthogonalization
    drops to ``RANK_RTOL * max(||A||_2, ||b||)``, which fixes the grade.
    """
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ValueError("start vector must be nonzero")
    cut = RANK_RTOL * max(np.linalg.norm(M, 2), 1.0)
    Q = np.zeros((M.shape[0], 0))
    v = b / nb
    while Q.shape[1] < k:
        Q = np.column_stack([Q, v])
        v = _orthonormalize(M @ v, Q)
        nv = np.linalg.norm(v)
        if nv <= cut:
            break
        v = v / nv
    return Q


def krylov_grade(A, b) -> int:
    M = as_dense(A)
    return arnoldi_basis(M, b, M.shape[0] + 1).shape[1]


def _lstsq_min_norm(H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(H)
    d = np.abs(np.diag(R))
    if d.size and d.min() > RANK_RTOL * d.max():
        return sla.solve_triangular(R, Q.T @ rhs)
    return np.linalg.lstsq(H, rhs, rcond=RANK_RTOL)[0]


def explicit_krylov_minres(A, b, k: int) -> KrylovSolution:
    """``argmin ||b - A x||`` over ``K_k(A, b)`` (minimum-norm when not unique)."""
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    if k == 0:
        return KrylovSolution(np.zeros_like(b), 0, False)
    W = arnoldi_basis(M, b, k + 1)
    m = min(k, W.shape[1])
    Wk = W[:, :m]
    H = W.T @ M @ Wk
    rhs = np.zeros(W.shape[1])
    rhs[0] = np.linalg.norm(b)
    return KrylovSolution(Wk @ _lstsq_min_norm(H, rhs), m, m < k)


def explicit_krylov_galerkin(A, b, k: int) -> KrylovSolution:
    """``x in K_k(A, b)`` with ``b - A x`` orthogonal to ``K_k(A, b)``."""
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    W = arnoldi_basis(M, b, k)
    m = W.shape[1]
    H = W.T @ M @ W
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] <= RANK_RTOL * max(s[0], np.linalg.norm(M, 2)):
        raise GalerkinUndefined(m)
    rhs = np.zeros(m)
    rhs[0] = np.linalg.norm(b)
    return KrylovSolution(W @ np.linalg.solve(H, rhs), m, m < k)


def explicit_minlen_galerkin(A, b, k: int) -> KrylovSolution:
    """``W_k y`` with ``y`` the minimum-norm solution of ``T_{k-1,k} y = ||b|| e_1``.

    Beyond the grade ``l`` the full space is used, which gives ``A^+ b``
    restricted to ``K_l`` (the exact solution for nonsingular ``A``).
    """
    if k < 2:
        raise ValueError("minimum-length point needs k >= 2")
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    W = arnoldi_basis(M, b, k)
    ell = W.shape[1]
    kk = min(k, ell + 1)
    cols = min(kk, ell)
    T = W[:, :kk - 1].T @ M @ W[:, :cols]
    rhs = np.zeros(kk - 1)
    rhs[0] = np.linalg.norm(b)
    y = np.linalg.pinv(T, rcond=RANK_RTOL) @ rhs
    return KrylovSolution(W[:, :cols] @ y, cols, k > ell + 1)


def explicit_lsqr(A, b, j: int) -> KrylovSolution:
    """``argmin ||b - A x||`` over ``K_j(A^T A, A^T b)``."""
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    if j == 0:
        return KrylovSolution(np.zeros_like(b), 0, False)
    V = arnoldi_basis(M.T @ M, M.T @ b, j)
    y = np.linalg.lstsq(M @ V, b, rcond=RANK_RTOL)[0]
    return KrylovSolution(V @ y, V.shape[1], V.shape[1] < j)


def explicit_craig(A, b, j: int) -> KrylovSolution:
    """``x = A^T U c`` with ``U^T A A^T U c = U^T b``, ``U`` spanning ``K_j(A A^T, b)``."""
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    if j == 0:
        return KrylovSolution(np.zeros_like(b), 0, False)
    U = arnoldi_basis(M @ M.T, b, j)
    G = U.T @ M @ M.T @ U
    c = np.linalg.solve(G, U.T @ b)
    return KrylovSolution(M.T @ (U @ c), U.shape[1], U.shape[1] < j)


# --- explicit SSY tridiagonalization ---------------------------------------------

def explicit_ssy_bases(A, b, c, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided bases ``(U~_m, V~_m)``, ``m <= k``, fully reorthogonalized.

    ``u_{j+1}`` comes from ``A v_j`` and ``v_{j+1}`` from ``A^T u_j``; the
    process stops when either new direction falls below the rank threshold.
    """
    M = as_dense(A)
    n = M.shape[0]
    b, c = _vec(b, n), _vec(c, n)
    cut = RANK_RTOL * max(np.linalg.norm(M, 2), 1.0)
    U = (b / np.linalg.norm(b))[:, None]
    V = (c / np.linalg.norm(c))[:, None]
    while U.shape[1] < k:
        q = _orthonormalize(M @ V[:, -1], U)
        p = _orthonormalize(M.T @ U[:, -1], V)
        nq, np_ = np.linalg.norm(q), np.linalg.norm(p)
        if nq <= cut or np_ <= cut:
            break
        U = np.column_stack([U, q / nq])
        V = np.column_stack([V, p / np_])
    return U, V


def explicit_usymqr(A, b, c, k: int) -> KrylovSolution:
    """``V~_k argmin ||b - A V~_k y||``, solved through ``U~_{k+1}^T A V~_k``."""
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    U, V = explicit_ssy_bases(M, b, c, k + 1)
    m = min(k, V.shape[1])
    rows = min(m + 1, U.shape[1])
    T = U[:, :rows].T @ M @ V[:, :m]
    rhs = np.zeros(rows)
    rhs[0] = np.linalg.norm(b)
    return KrylovSolution(V[:, :m] @ _lstsq_min_norm(T, rhs), m, m < k)


def explicit_usymlq(A, b, c, k: int) -> KrylovSolution:
    """``V~_k y`` with ``y`` of minimum norm solving ``T~_{k-1,k} y = ||b|| e_1``."""
    if k < 2:
        raise ValueError("minimum-length point needs k >= 2")
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    U, V = explicit_ssy_bases(M, b, c, k)
    ell = V.shape[1]
    kk = min(k, ell + 1)
    cols = min(kk, ell)
    T = U[:, :kk - 1].T @ M @ V[:, :cols]
    rhs = np.zeros(kk - 1)
    rhs[0] = np.linalg.norm(b)
    y = np.linalg.pinv(T, rcond=RANK_RTOL) @ rhs
    return KrylovSolution(V[:, :cols] @ y, cols, k > ell + 1)


# --- second formulations --------------------------------------------------------
# Different basis (column-scaled monomial Krylov matrix) and a different solver
# (pivoted QR through gelsy).  Only well conditioned for small k.

def _monomial_basis(M: np.ndarray, b: np.ndarray, k: int) -> np.ndarray:
    cols = [b / np.linalg.norm(b)]
    for _ in range(k - 1):
        v = M @ cols[-1]
        nv = np.linalg.norm(v)
        if nv == 0:
            break
        cols.append(v / nv)
    return np.column_stack(cols)


def monomial_minres(A, b, k: int) -> np.ndarray:
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    K = _monomial_basis(M, b, k)
    y = sla.lstsq(M @ K, b, lapack_driver="gelsy", cond=1e-14)[0]
    return K @ y


def monomial_galerkin(A, b, k: int) -> np.ndarray:
    M = as_dense(A)
    b = _vec(b, M.shape[0])
    K = _monomial_basis(M, b, k)
    y = sla.lstsq(K.T @ M @ K, K.T @ b, lapack_driver="gelsy", cond=1e-14)[0]
    return K @ y


# --- Golub-Kahan on shifted skew matrices -------------------------------------------

@dataclass
class GkShiftedReport:
    rows: list[dict] = field(default_factory=list)
    k0: int | None = None
    ell: int | None = None

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(r["ok"] for r in self.rows)

    def max_beta_deviation(self) -> float:
        return max((r["beta_rel_dev"] for r in self.rows if not math.isnan(r["beta_rel_dev"])), default=0.0)

    def format(self) -> str:
        out = ["# check: appendix-gk", "j,alpha_j,gamma_2j,alpha_lower_bound,beta_rel_dev,u_dev,ok"]
        for r in self.rows:
            out.append(f"{r['j']},{r['alpha']!r},{r['gamma_even']!r},{r['alpha_lower']!r},"
                       f"{r['beta_rel_dev']!r},{r['u_dev']!r},{int(r['ok'])}")
        out.append(f"# k0={self.k0} l={self.ell}")
        out.append(("PASS" if self.passed else "FAIL") + f" max_beta_rel_dev={self.max_beta_deviation()!r}")
        return "\n".join(out)


def gk_shifted_properties_check(A: LinearOperator, b, *, reorthogonalize: bool = True,
                                tol: float = 1e-10, u_tol: float | None = 1e-8) -> GkShiftedReport:
    """Golub-Kahan on ``A = alpha I + S`` against Lanczos on ``S``, row ``j`` checks:

    ``a_j >= sqrt(alpha^2 + g_{2j}^2)`` (up to ``tol``), ``a_j > g_{2j}``,
    ``|b_{j+1} - g_{2j+1} g_{2j} / a_j| <= tol * g_{2j+1}`` and
    ``u_{j+1} = (-1)^j w_{2j+1}`` (max-norm deviation ``<= u_tol``; ``None``
    reports the deviation without checking it).
    """
    from .factorizations import run_golub_kahan, run_lanczos

    if not A.is_shifted_skew:
        raise ValueError("appendix check needs a shifted skew-symmetric operator")
    alpha = A.shift
    S = A.skew_part
    lz = run_lanczos(S, b, store_basis=True, reorthogonalize=reorthogonalize)
    gk = run_golub_kahan(A, b, store_basis=True, reorthogonalize=reorthogonalize)
    g, W = lz.gammas, lz.basis
    rep = GkShiftedReport(k0=gk.k0, ell=lz.ell)
    for j in range(1, len(gk.alphas) + 1):
        a = gk.alphas[j - 1]
        if a == 0.0 or 2 * j > len(g) - 1:
            break
        g_even = g[2 * j - 1]
        lower = math.sqrt(alpha * alpha + g_even * g_even)
        row = {"j": j, "alpha": a, "gamma_even": g_even, "alpha_lower": lower,
               "beta_rel_dev": math.nan, "u_dev": math.nan}
        ok = a >= lower * (1 - tol) and a > g_even
        if len(gk.betas) > j and len(g) > 2 * j:
            g_odd = g[2 * j]
            pred = g_odd * g_even / a
            dev = abs(gk.betas[j] - pred)
            row["beta_rel_dev"] = dev / g_odd if g_odd > 0 else dev
            ok = ok and (dev <= tol * g_odd if g_odd > 0 else dev <= tol)
            if g_odd > 0 and len(gk.basis_u) > j and len(W) > 2 * j:
                row["u_dev"] = float(np.max(np.abs(gk.basis_u[j] - (-1.0) ** j * W[2 * j])))
                if u_tol is not None:
                    ok = ok and row["u_dev"] <= u_tol
        row["ok"] = bool(ok)
        rep.rows.append(row)
    return rep
