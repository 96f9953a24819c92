"""Solvers for ``(alpha I + S) x = b`` with skew ``S`` and ``alpha != 0``.

S3CG, S3MR and S3LQ use the Lanczos process of ``S`` (or plain CG-like
updates with ``A``).  USYMQR and USYMLQ run on the Saunders-Simon-Yip
process and work for general square ``A``; they serve as an independent
route to the same iterates when ``A`` is shifted skew and ``c = b``.

A negative shift is handled by solving ``(-A) x = -b``; iterates and
recorded residuals are the same in either orientation.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ._kernels import TridiagLQ, TridiagQR
from .factorizations import TerminationSide, lanczos_start, lanczos_step, ssy_start, ssy_step
from .history import ConvergenceHistory, Outcome, Recorder, SolverConfig, require_rhs
from .operators import LinearOperator, random_rhs
from .skew_solvers import _check_size, skew_lq_sweep


def _oriented(A: LinearOperator, b: np.ndarray, name: str) -> tuple[LinearOperator, np.ndarray]:
    if not A.is_shifted_skew:
        raise ValueError(f"{name} needs a shifted skew-symmetric operator alpha*I + S with alpha != 0")
    if A.shift < 0:
        return A.negated(), -b
    return A, b


def s3cg_solve(A: LinearOperator, b, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """CG-type iteration with ``beta_k = -||r_k||^2 / ||r_{k-1}||^2``.

    With ``cfg.store_basis`` the residuals and directions are kept in
    ``history.vectors['r']`` and ``['p']``.  A non-positive curvature
    ``p^T A p`` (impossible in exact arithmetic) ends the run with ``BREAKDOWN``.
    """
    b, bnorm = require_rhs(b)
    _check_size(A, b)
    cfg = cfg or SolverConfig()
    Aw, bw = _oriented(A, b, "S3CG")
    rec = Recorder("s3cg", A, b, cfg, x_ref)
    x = np.zeros(A.n)
    r = bw.copy()
    p = r.copy()
    rr = float(r @ r)
    rec.keep("r", r)
    rec.keep("p", p)
    for k in range(1, cfg.iteration_cap(A.n) + 1):
        Ap = Aw.apply(p)
        pAp = float(p @ Ap)
        if not pAp > 0.0:
            return rec.finish(Outcome.BREAKDOWN, x, f"p^T A p = {pAp!r} at step {k}")
        step = rr / pAp
        x = x + step * p
        r = r - step * Ap
        rr_new = float(r @ r)
        p = r + (-rr_new / rr) * p
        rr = rr_new
        rec.keep("r", r)
        rec.keep("p", p)
        rec.emit(k, x, math.sqrt(rr))
        if math.sqrt(rr) <= cfg.tol * bnorm:
            return rec.finish(Outcome.CONVERGED, x)
    return rec.finish(Outcome.MAX_ITERS, x)


def s3mr_solve(A: LinearOperator, b, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """Minimum residual over ``K_k(A, b)``; ``||r_k|| = |psi~_{k+1}|``.

    Rotation sign ``s_k = +g_{k+1}/delta_k``; the direction update drops the
    ``p_{k-1}`` term, whose coefficient vanishes for shifted skew matrices.
    """
    b, bnorm = require_rhs(b)
    _check_size(A, b)
    cfg = cfg or SolverConfig()
    Aw, bw = _oriented(A, b, "S3MR")
    S, alpha = Aw.skew_part, Aw.shift
    rec = Recorder("s3mr", A, b, cfg, x_ref)
    st = lanczos_start(S, bw, reorthogonalize=cfg.reorthogonalize, breakdown_tol=cfg.breakdown_tol)
    dt = alpha
    c1 = 1.0               # c_{k-1}
    s1 = s2 = 0.0          # s_{k-1}, s_{k-2}
    psi_t = st.gammas[0]
    p1 = p2 = np.zeros(A.n)
    x = np.zeros(A.n)
    for k in range(1, cfg.iteration_cap(A.n) + 1):
        w_k = st.w
        lanczos_step(st, S)
        g_k, g_next = st.gammas[k - 1], st.gammas[k]
        delta = math.hypot(dt, g_next)
        c, s = dt / delta, g_next / delta
        dt_next = alpha * c + g_next * c1 * s
        psi = c * psi_t
        psi_t = -s * psi_t
        p = w_k / delta if k <= 2 else (w_k + g_k * s2 * p2) / delta
        x = x + psi * p
        rec.emit(k, x, psi_t)
        if st.terminated:
            return rec.finish(Outcome.TERMINATED, x, f"Lanczos terminated at l={k}")
        if abs(psi_t) <= cfg.tol * bnorm:
            return rec.finish(Outcome.CONVERGED, x)
        s2, s1, c1 = s1, s, c
        p2, p1 = p1, p
        dt = dt_next
    return rec.finish(Outcome.MAX_ITERS, x)


def s3lq_solve(A: LinearOperator, b, cfg: SolverConfig | None = None, *, emit_cg_points: bool = False,
               x_ref=None) -> ConvergenceHistory:
    """Minimum-length iterates ``x_k`` subject to ``T_{k-1,k} y = g_1 e_1``.

    Record ``k`` holds ``x_k`` (``x_1 = 0``) with the residual norm
    ``hypot(eta_k xi_{k-2}, eta_{k+1} xi_{k-1})``; since ``xi_{2j} = 0`` this
    equals ``|eta_{2j+1} xi_{2j-1}|`` for ``k = 2j, 2j+1``.  When the Lanczos
    process ends at ``l`` and ``x_l`` is not yet a solution, ``x_{l+1}`` (the
    exact solution) is recorded as well.  With ``emit_cg_points`` each record
    also carries the Galerkin point ``x_k + xi~_k p~_k``.
    """
    b, bnorm = require_rhs(b)
    _check_size(A, b)
    cfg = cfg or SolverConfig()
    Aw, bw = _oriented(A, b, "S3LQ")
    rec = Recorder("s3lq", A, b, cfg, x_ref)
    cap = cfg.iteration_cap(A.n)
    x = np.zeros(A.n)
    for step in skew_lq_sweep(Aw.skew_part, bw, Aw.shift, cfg):
        x = step.x
        if emit_cg_points:
            rec.emit(step.k, x, step.estimate, x_cg=step.x_cg, cg_skipped=step.x_cg is None)
        else:
            rec.emit(step.k, x, step.estimate)
        if step.estimate <= cfg.tol * bnorm:
            outcome = Outcome.TERMINATED if step.terminated else Outcome.CONVERGED
            return rec.finish(outcome, x)
        if step.terminated:
            if step.x_next is None:
                return rec.finish(Outcome.BREAKDOWN, x, f"LQ diagonal vanished at step {step.k}")
            x = step.x_next
            rec.emit(step.k + 1, x, step.cg_estimate if step.cg_estimate is not None else math.nan)
            return rec.finish(Outcome.TERMINATED, x, f"Lanczos terminated at l={step.k}")
        if step.k >= cap:
            break
    return rec.finish(Outcome.MAX_ITERS, x)


def usymqr_solve(A: LinearOperator, b, c, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """Minimum residual over ``span(V~_k)`` via Givens QR of the SSY matrix ``T~_{k+1,k}``."""
    b, bnorm = require_rhs(b)
    c, _ = require_rhs(c)
    _check_size(A, b)
    _check_size(A, c)
    cfg = cfg or SolverConfig()
    rec = Recorder("usymqr", A, b, cfg, x_ref)
    st = ssy_start(A, b, c, reorthogonalize=cfg.reorthogonalize, breakdown_tol=cfg.breakdown_tol)
    qr = TridiagQR(st.betas[0], A.n, cfg.breakdown_tol)
    x = qr.x
    for k in range(1, cfg.iteration_cap(A.n) + 1):
        v_k = st.v
        ssy_step(st, A)
        a = st.alphas[k - 1] if k > 1 else 0.0
        x, est, _ = qr.add_column(a, st.thetas[k - 1], st.betas[k], v_k)
        rec.emit(k, x, est)
        if est <= cfg.tol * bnorm:
            return rec.finish(Outcome.TERMINATED if st.terminated else Outcome.CONVERGED, x)
        if st.terminated:
            if st.termination_side is TerminationSide.BETA_ZERO:
                return rec.finish(Outcome.TERMINATED, x, f"SSY terminated (beta) after {k} steps")
            return rec.finish(Outcome.BREAKDOWN, x, f"SSY alpha_{k + 1} = 0 before convergence")
    return rec.finish(Outcome.MAX_ITERS, x)


def usymlq_solve(A: LinearOperator, b, c, cfg: SolverConfig | None = None, *, x_ref=None) -> ConvergenceHistory:
    """Minimum-length iterates subject to ``T~_{k-1,k} y = b_1 e_1`` on the SSY process."""
    b, bnorm = require_rhs(b)
    c, _ = require_rhs(c)
    _check_size(A, b)
    _check_size(A, c)
    cfg = cfg or SolverConfig()
    rec = Recorder("usymlq", A, b, cfg, x_ref)
    st = ssy_start(A, b, c, reorthogonalize=cfg.reorthogonalize, breakdown_tol=cfg.breakdown_tol)
    lq = TridiagLQ(st.betas[0], st.v, cfg.breakdown_tol)
    x = lq.x
    for k in range(1, cfg.iteration_cap(A.n) + 1):
        ssy_step(st, A)
        step = lq.step(st.betas[k - 1], st.thetas[k - 1], st.alphas[k], st.betas[k], st.v)
        x = step.x
        rec.emit(k, x, step.estimate)
        if step.estimate <= cfg.tol * bnorm:
            return rec.finish(Outcome.TERMINATED if st.terminated else Outcome.CONVERGED, x)
        if st.terminated:
            if step.x_next is None:
                return rec.finish(Outcome.BREAKDOWN, x, f"LQ diagonal vanished at step {k}")
            x = step.x_next
            est = step.cg_estimate if step.cg_estimate is not None else math.nan
            rec.emit(k + 1, x, est)
            if st.termination_side is TerminationSide.BETA_ZERO and step.cg_estimate is not None:
                return rec.finish(Outcome.TERMINATED, x, f"SSY terminated (beta) after {k} steps")
            return rec.finish(Outcome.BREAKDOWN, x, f"SSY alpha_{k + 1} = 0 before convergence")
    return rec.finish(Outcome.MAX_ITERS, x)


# --- convergence theory helpers ------------------------------------------------

def error_bound(alpha: float, beta: float, k: int, which: str) -> float:
    """Upper bound on the relative error (``cg``: of ``x_{2k}``) or relative residual (``mr``: of ``x_k``).

    ``beta`` bounds the spectrum of ``S`` (eigenvalues in ``i[-beta, beta]``).
    """
    if alpha == 0:
        raise ValueError("alpha must be nonzero")
    if beta < 0 or k < 0:
        raise ValueError("beta and k must be nonnegative")
    t = beta / abs(alpha)
    root = math.sqrt(1.0 + t * t)
    if which == "cg":
        ratio = (root - 1.0) / (root + 1.0)
    elif which == "mr":
        ratio = t / (root + 1.0)
    else:
        raise ValueError("which must be 'cg' or 'mr'")
    return 2.0 * ratio**k


class SpectralEstimate(NamedTuple):
    beta: float
    converged: bool
    iterations: int


def estimate_spectral_interval(S: LinearOperator, *, rtol: float = 1e-6, max_iters: int = 20000,
                               seed: int = 0x5EED) -> SpectralEstimate:
    """``||S||_2`` by power iteration on ``S^T S``, i.e. the half-width of the spectrum of skew ``S``.

    Stops when ``||M v - lam v|| <= rtol * lam``.  The start vector is drawn
    from the package PRNG so results are reproducible.
    """
    if not S.is_skew:
        raise ValueError("spectral interval estimate needs a skew-symmetric operator")
    v = random_rhs(S.n, seed)
    v /= np.linalg.norm(v)
    lam = 0.0
    for it in range(1, max_iters + 1):
        y = S.apply_transpose(S.apply(v))
        lam = float(v @ y)
        if lam <= 0.0:
            return SpectralEstimate(0.0, True, it)
        if np.linalg.norm(y - lam * v) <= rtol * lam:
            return SpectralEstimate(math.sqrt(lam), True, it)
        v = y / np.linalg.norm(y)
    return SpectralEstimate(math.sqrt(lam), False, max_iters)
