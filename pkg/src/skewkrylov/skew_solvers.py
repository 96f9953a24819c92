"""Krylov solvers for ``S x = b`` with skew-symmetric ``S``.

S2CG and S2MR run on the Lanczos process of ``S``; CRAIG and LSQR run on
Golub-Kahan bidiagonalization and accept any square operator.  On singular
systems S2MR and LSQR return the pseudoinverse solution, while S2CG and
CRAIG do so only when ``b`` lies in the range of ``S``.
"""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from ._kernels import LqStep, TridiagQR
from .factorizations import TerminationSide, golub_kahan_start, golub_kahan_step, lanczos_start, lanczos_step
from .history import ConvergenceHistory, Outcome, Recorder, SolverConfig, require_rhs
from .operators import LinearOperator


def _require_skew(S: LinearOperator, name: str) -> None:
    if not S.is_skew:
        raise ValueError(f"{name} needs a skew-symmetric operator (got {S.structure.value})")


def _check_size(A: LinearOperator, b: np.ndarray) -> None:
    if b.shape != (A.n,):
        raise ValueError(f"right-hand side has length {b.shape[0]}, operator is {A.n}x{A.n}")


def skew_lq_sweep(S: LinearOperator, b: np.ndarray, alpha: float, cfg: SolverConfig) -> Iterator[LqStep]:
    """LQ recurrences for ``(alpha I + S) x = b`` with the rotation sign ``s_k = -g_{k+1}/delta_k``.

    Step ``k`` reports the LQ point ``x_k`` (``x_1 = 0``), its residual norm
    ``hypot(eta_k xi_{k-2}, eta_{k+1} xi_{k-1})``, the Galerkin point
    ``x_k + xi~_k p~_k`` when ``dt_k != 0``, and ``x_{k+1} = x_k + xi_k p_k``.
    ``alpha = 0`` is allowed; then ``dt_k`` vanishes exactly at odd ``k``.
    """
    st = lanczos_start(S, b, reorthogonalize=cfg.reorthogonalize, breakdown_tol=cfg.breakdown_tol)
    g1 = st.gammas[0]
    tiny = cfg.breakdown_tol
    scale = max(1.0, g1, abs(alpha))
    dt = alpha
    c1 = 1.0            # c_{k-1}
    s1 = s2 = 0.0       # s_{k-1}, s_{k-2}
    xi1 = xi2 = 0.0     # xi_{k-1}, xi_{k-2}
    x = np.zeros(S.n)
    p_tilde = st.w.copy()
    k = 0
    while True:
        k += 1
        lanczos_step(st, S)
        g_k, g_next, w_next = st.gammas[k - 1], st.gammas[k], st.w
        scale = max(scale, g_next)
        eta = g_k * s2
        est = g1 if k == 1 else math.hypot(eta * xi2, g_next * s1 * xi1)
        x_cg = cg_est = None
        if abs(dt) > tiny * scale:
            xt = g1 / dt if k == 1 else -eta * xi2 / dt
            x_cg = x + xt * p_tilde
            cg_est = g_next * abs(s1 * xi1 + c1 * xt)
        delta = math.hypot(dt, g_next)
        if delta <= tiny * scale:
            yield LqStep(k, x, est, x_cg, cg_est, None, dt, math.nan, True)
            return
        c, s = dt / delta, -g_next / delta
        dt_next = alpha * c - g_next * c1 * s
        if k == 1:
            xi = g1 / delta
        elif k == 2:
            xi = 0.0
        else:
            xi = -g_k * s2 * xi2 / delta
        p = c * p_tilde + s * w_next
        x_next = x + xi * p
        p_tilde = c * w_next - s * p_tilde
        yield LqStep(k, x, est, x_cg, cg_est, x_next, dt, xi, st.terminated)
        if st.terminated:
            return
        s2, s1, c1 = s1, s, c
        xi2, xi1 = xi1, xi
        x, dt = x_next, dt_next


def s2cg_solve(S: LinearOperator, b, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """Galerkin iterates ``x_{2j}`` for skew ``S``.

    Odd-index Galerkin points do not exist (the projected matrix is singular),
    so only even iterates are recorded.  If the Lanczos process ends at an
    odd step, ``b`` is not in the range of ``S`` and the outcome is
    ``NOT_APPLICABLE`` with the last even iterate kept.
    """
    _require_skew(S, "S2CG")
    b, bnorm = require_rhs(b)
    _check_size(S, b)
    cfg = cfg or SolverConfig()
    rec = Recorder("s2cg", S, b, cfg, x_ref)
    cap = cfg.iteration_cap(S.n)
    x = np.zeros(S.n)
    for step in skew_lq_sweep(S, b, 0.0, cfg):
        if step.k % 2 == 0 and step.x_cg is not None:
            x = step.x_cg
            rec.emit(step.k, x, step.cg_estimate)
            if step.terminated:
                return rec.finish(Outcome.TERMINATED, x, f"Lanczos terminated at even l={step.k}")
            if step.cg_estimate <= cfg.tol * bnorm:
                return rec.finish(Outcome.CONVERGED, x)
        elif step.terminated:
            return rec.finish(Outcome.NOT_APPLICABLE, x,
                              f"Lanczos terminated at odd l={step.k}: b is not in the range of S")
        if step.k >= cap:
            break
    return rec.finish(Outcome.MAX_ITERS, x)


def s2mr_solve(S: LinearOperator, b, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """Minimum-residual iterates over ``K_k(S, b)`` via Givens QR of ``H_{k+1,k}``."""
    _require_skew(S, "S2MR")
    b, bnorm = require_rhs(b)
    _check_size(S, b)
    cfg = cfg or SolverConfig()
    rec = Recorder("s2mr", S, b, cfg, x_ref)
    cap = cfg.iteration_cap(S.n)
    st = lanczos_start(S, b, reorthogonalize=cfg.reorthogonalize, breakdown_tol=cfg.breakdown_tol)
    qr = TridiagQR(st.gammas[0], S.n, cfg.breakdown_tol)
    x = qr.x
    for k in range(1, cap + 1):
        w_k = st.w
        lanczos_step(st, S)
        a = -st.gammas[k - 1] if k > 1 else 0.0
        x, est, _ = qr.add_column(a, 0.0, st.gammas[k], w_k)
        rec.emit(k, x, est)
        if st.terminated:
            return rec.finish(Outcome.TERMINATED, x, f"Lanczos terminated at l={k}")
        if est <= cfg.tol * bnorm:
            return rec.finish(Outcome.CONVERGED, x)
    return rec.finish(Outcome.MAX_ITERS, x)


def craig_solve(A: LinearOperator, b, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """CRAIG: ``x_j = x_{j-1} + tau_j v_j`` with ``tau_1 = b_1/a_1``, ``tau_j = -b_j tau_{j-1}/a_j``.

    An alpha-side breakdown of the bidiagonalization means ``b`` is not in
    the range of ``A``; the outcome is then ``BREAKDOWN`` with the last iterate.
    """
    b, bnorm = require_rhs(b)
    _check_size(A, b)
    cfg = cfg or SolverConfig()
    rec = Recorder("craig", A, b, cfg, x_ref)
    cap = cfg.iteration_cap(A.n)
    gk = golub_kahan_start(A, b, store_basis=False, reorthogonalize=cfg.reorthogonalize,
                           breakdown_tol=cfg.breakdown_tol)
    x = np.zeros(A.n)
    if gk.terminated:
        return rec.finish(Outcome.BREAKDOWN, x, "A^T b = 0: alpha_1 vanished")
    tau = 0.0
    for j in range(1, cap + 1):
        tau = gk.betas[0] / gk.alphas[0] if j == 1 else -gk.betas[j - 1] * tau / gk.alphas[j - 1]
        x = x + tau * gk.v
        golub_kahan_step(gk, A)
        rec.emit(j, x, gk.betas[j] * abs(tau))
        if gk.terminated:
            if gk.termination_side is TerminationSide.BETA_ZERO:
                return rec.finish(Outcome.TERMINATED, x, f"bidiagonalization terminated (beta) at k0={j}")
            return rec.finish(Outcome.BREAKDOWN, x,
                              f"alpha_{j + 1} = 0: b is not in the range of A")
        if gk.betas[j] * abs(tau) <= cfg.tol * bnorm:
            return rec.finish(Outcome.CONVERGED, x)
    return rec.finish(Outcome.MAX_ITERS, x)


def lsqr_solve(A: LinearOperator, b, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """LSQR with the Paige-Saunders rotation scheme.

    Stops when ``|phi_bar| <= tol ||b||``, when ``||A^T r|| <= tol ||B||_F ||r||``
    (inconsistent systems), or when the bidiagonalization terminates.
    """
    b, bnorm = require_rhs(b)
    _check_size(A, b)
    cfg = cfg or SolverConfig()
    rec = Recorder("lsqr", A, b, cfg, x_ref)
    cap = cfg.iteration_cap(A.n)
    gk = golub_kahan_start(A, b, reorthogonalize=cfg.reorthogonalize, breakdown_tol=cfg.breakdown_tol)
    x = np.zeros(A.n)
    if gk.terminated:
        return rec.finish(Outcome.TERMINATED, x, "A^T b = 0: x = 0 solves the least-squares problem")
    w = gk.v.copy()
    phi_bar, rho_bar = gk.betas[0], gk.alphas[0]
    anorm2 = rho_bar**2
    for j in range(1, cap + 1):
        golub_kahan_step(gk, A)
        beta = gk.betas[j]
        alpha = gk.alphas[j] if len(gk.alphas) > j else 0.0
        anorm2 += beta**2 + alpha**2
        rho = math.hypot(rho_bar, beta)
        c, s = rho_bar / rho, beta / rho
        theta = s * alpha
        rho_bar = -c * alpha
        phi = c * phi_bar
        phi_bar = s * phi_bar
        x = x + (phi / rho) * w
        w = gk.v - (theta / rho) * w
        rec.emit(j, x, phi_bar)
        if gk.terminated:
            return rec.finish(Outcome.TERMINATED, x,
                              f"bidiagonalization terminated ({gk.termination_side.value}) at k0={j}")
        if abs(phi_bar) <= cfg.tol * bnorm:
            return rec.finish(Outcome.CONVERGED, x)
        if abs(phi_bar * alpha * c) <= cfg.tol * math.sqrt(anorm2) * abs(phi_bar):
            return rec.finish(Outcome.CONVERGED, x, "normal-equation residual below tolerance")
    return rec.finish(Outcome.MAX_ITERS, x)
