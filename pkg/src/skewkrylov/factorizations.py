"""Lanczos, Golub-Kahan and Saunders-Simon-Yip processes as resumable states.

Each process is started with ``*_start`` and advanced one step at a time with
``*_step``.  States are mutated in place and also returned.  A normalization
``gamma w := v`` is declared zero when ``||v|| <= breakdown_tol * scale`` where
``scale = max(1, ||b||, largest norm produced so far)``; the recorded
coefficient is then exactly ``0.0`` and the process is terminated.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .operators import LinearOperator

BREAKDOWN_TOL = 1e-13


class ProcessTerminatedError(RuntimeError):
    """A step was requested from a process that has already terminated."""


def _reorth(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    # classical Gram-Schmidt, applied twice
    if not basis:
        return v
    Q = np.column_stack(basis)
    for _ in range(2):
        v = v - Q @ (Q.T @ v)
    return v


def _start_vector(b, n: int) -> tuple[np.ndarray, float]:
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise ValueError(f"start vector must have length {n}")
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        raise ValueError("start vector must be nonzero")
    return b / nb, nb


# --- Lanczos tridiagonalization for skew-symmetric operators ----------------

@dataclass
class LanczosState:
    """After ``k`` steps: ``gammas = [g_1, ..., g_{k+1}]``, ``w = w_{k+1}``, ``w_prev = w_k``."""

    k: int
    w_prev: np.ndarray
    w: np.ndarray
    gammas: list[float]
    basis: list[np.ndarray] | None
    terminated: bool = False
    ell: int | None = None
    reorthogonalize: bool = False
    breakdown_tol: float = BREAKDOWN_TOL
    scale: float = 1.0
    last_raw_norm: float = float("nan")


def lanczos_start(S: LinearOperator, b, *, store_basis: bool = False, reorthogonalize: bool = False,
                  breakdown_tol: float = BREAKDOWN_TOL) -> LanczosState:
    if not S.is_skew:
        raise ValueError("Lanczos tridiagonalization here requires a skew-symmetric operator")
    w1, g1 = _start_vector(b, S.n)
    keep = store_basis or reorthogonalize
    return LanczosState(0, np.zeros(S.n), w1, [g1], [w1] if keep else None,
                        reorthogonalize=reorthogonalize, breakdown_tol=breakdown_tol,
                        scale=max(1.0, g1))


def lanczos_step(state: LanczosState, S: LinearOperator) -> LanczosState:
    """``g_{k+1} w_{k+1} := S w_k + g_k w_{k-1}``."""
    if state.terminated:
        raise ProcessTerminatedError(f"Lanczos process terminated at l={state.ell}")
    if not S.is_skew:
        raise ValueError("Lanczos tridiagonalization here requires a skew-symmetric operator")
    k = state.k + 1
    v = S.apply(state.w) + state.gammas[k - 1] * state.w_prev
    if state.reorthogonalize:
        v = _reorth(v, state.basis)
    g = float(np.linalg.norm(v))
    state.last_raw_norm = g
    state.w_prev = state.w
    if g <= state.breakdown_tol * state.scale:
        state.gammas.append(0.0)
        state.w = np.zeros(S.n)
        state.terminated = True
        state.ell = k
    else:
        state.scale = max(state.scale, g)
        state.gammas.append(g)
        state.w = v / g
        if state.basis is not None:
            state.basis.append(state.w)
    state.k = k
    return state


def run_lanczos(S: LinearOperator, b, steps: int | None = None, **kw) -> LanczosState:
    """Run to termination, or for at most ``steps`` steps."""
    st = lanczos_start(S, b, **kw)
    limit = S.n + 1 if steps is None else steps
    while not st.terminated and st.k < limit:
        lanczos_step(st, S)
    return st


def lanczos_hessenberg(gammas, k: int) -> np.ndarray:
    """``H_{k+1,k}``: zero diagonal, ``g_{i+1}`` below and ``-g_{i+1}`` above."""
    H = np.zeros((k + 1, k))
    for i in range(k):
        H[i + 1, i] = gammas[i + 1]
        if i + 1 < k:
            H[i, i + 1] = -gammas[i + 1]
    return H


def even_sections_nonsingular(gammas, ell: int, rtol: float = 1e-10) -> bool:
    """Whether every leading ``H_{2j}`` with ``2j <= ell`` has full rank."""
    H = lanczos_hessenberg(gammas, ell)[:ell, :ell]
    for m in range(2, ell + 1, 2):
        sv = np.linalg.svd(H[:m, :m], compute_uv=False)
        if sv[-1] <= rtol * sv[0]:
            return False
    return True


# --- Golub-Kahan bidiagonalization --------------------------------------------

class TerminationSide(enum.Enum):
    ALPHA_ZERO = "alpha_zero"
    BETA_ZERO = "beta_zero"


@dataclass
class BidiagState:
    """After ``j`` completed pairs: ``betas = [b_1..b_j]``, ``alphas = [a_1..a_j]``.

    On termination the vanishing coefficient is appended as ``0.0``.
    """

    j: int
    u: np.ndarray
    v: np.ndarray
    alphas: list[float]
    betas: list[float]
    basis_u: list[np.ndarray] | None
    basis_v: list[np.ndarray] | None
    terminated: bool = False
    k0: int | None = None
    termination_side: TerminationSide | None = None
    reorthogonalize: bool = False
    breakdown_tol: float = BREAKDOWN_TOL
    scale: float = 1.0


def golub_kahan_start(A: LinearOperator, b, *, store_basis: bool = False, reorthogonalize: bool = False,
                      breakdown_tol: float = BREAKDOWN_TOL) -> BidiagState:
    u1, b1 = _start_vector(b, A.n)
    keep = store_basis or reorthogonalize
    st = BidiagState(0, u1, np.zeros(A.n), [], [b1], [u1] if keep else None, [] if keep else None,
                     reorthogonalize=reorthogonalize, breakdown_tol=breakdown_tol, scale=max(1.0, b1))
    p = A.apply_transpose(u1)
    a1 = float(np.linalg.norm(p))
    if a1 <= st.breakdown_tol * st.scale:
        st.alphas.append(0.0)
        st.terminated, st.k0, st.termination_side = True, 0, TerminationSide.ALPHA_ZERO
        return st
    st.scale = max(st.scale, a1)
    st.alphas.append(a1)
    st.v = p / a1
    if keep:
        st.basis_v.append(st.v)
    st.j = 1
    return st


def golub_kahan_step(state: BidiagState, A: LinearOperator) -> BidiagState:
    """``b_{j+1} u_{j+1} := A v_j - a_j u_j``;  ``a_{j+1} v_{j+1} := A^T u_{j+1} - b_{j+1} v_j``."""
    if state.terminated:
        raise ProcessTerminatedError(f"Golub-Kahan process terminated at k0={state.k0}")
    j = state.j
    tiny = state.breakdown_tol
    q = A.apply(state.v) - state.alphas[j - 1] * state.u
    if state.reorthogonalize:
        q = _reorth(q, state.basis_u)
    beta = float(np.linalg.norm(q))
    if beta <= tiny * state.scale:
        state.betas.append(0.0)
        state.terminated, state.k0, state.termination_side = True, j, TerminationSide.BETA_ZERO
        return state
    state.scale = max(state.scale, beta)
    state.betas.append(beta)
    state.u = q / beta
    if state.basis_u is not None:
        state.basis_u.append(state.u)
    p = A.apply_transpose(state.u) - beta * state.v
    if state.reorthogonalize:
        p = _reorth(p, state.basis_v)
    alpha = float(np.linalg.norm(p))
    if alpha <= tiny * state.scale:
        state.alphas.append(0.0)
        state.terminated, state.k0, state.termination_side = True, j, TerminationSide.ALPHA_ZERO
        return state
    state.scale = max(state.scale, alpha)
    state.alphas.append(alpha)
    state.v = p / alpha
    if state.basis_v is not None:
        state.basis_v.append(state.v)
    state.j = j + 1
    return state


def run_golub_kahan(A: LinearOperator, b, steps: int | None = None, **kw) -> BidiagState:
    st = golub_kahan_start(A, b, **kw)
    limit = A.n + 1 if steps is None else steps
    while not st.terminated and st.j < limit:
        golub_kahan_step(st, A)
    return st


def bidiagonal(alphas, betas, j: int) -> np.ndarray:
    """``B_{j+1,j}``: ``a_i`` on the diagonal, ``b_{i+1}`` below it."""
    B = np.zeros((j + 1, j))
    for i in range(j):
        B[i, i] = alphas[i]
        B[i + 1, i] = betas[i + 1]
    return B


# --- Saunders-Simon-Yip tridiagonalization ---------------------------------

@dataclass
class SsyState:
    """After ``k`` steps: ``thetas = [t_1..t_k]``, ``betas``/``alphas`` run to index ``k+1``.

    ``u``/``v`` hold the newest vectors (index ``k+1``), ``u_prev``/``v_prev`` index ``k``.
    """

    k: int
    u_prev: np.ndarray
    u: np.ndarray
    v_prev: np.ndarray
    v: np.ndarray
    alphas: list[float]
    betas: list[float]
    thetas: list[float] = field(default_factory=list)
    basis_u: list[np.ndarray] | None = None
    basis_v: list[np.ndarray] | None = None
    terminated: bool = False
    termination_side: TerminationSide | None = None
    reorthogonalize: bool = False
    breakdown_tol: float = BREAKDOWN_TOL
    scale: float = 1.0


def ssy_start(A: LinearOperator, b, c, *, store_basis: bool = False, reorthogonalize: bool = False,
              breakdown_tol: float = BREAKDOWN_TOL) -> SsyState:
    u1, b1 = _start_vector(b, A.n)
    v1, a1 = _start_vector(c, A.n)
    keep = store_basis or reorthogonalize
    z = np.zeros(A.n)
    return SsyState(0, z, u1, z, v1, [a1], [b1], [], [u1] if keep else None, [v1] if keep else None,
                    reorthogonalize=reorthogonalize, breakdown_tol=breakdown_tol,
                    scale=max(1.0, a1, b1))


def ssy_step(state: SsyState, A: LinearOperator) -> SsyState:
    if state.terminated:
        raise ProcessTerminatedError(f"SSY process terminated after {state.k} steps")
    k = state.k + 1
    uk, vk = state.u, state.v
    q = A.apply(vk) - state.alphas[k - 1] * state.u_prev
    theta = float(uk @ q)
    q = q - theta * uk
    p = A.apply_transpose(uk) - state.betas[k - 1] * state.v_prev - theta * vk
    if state.reorthogonalize:
        q = _reorth(q, state.basis_u)
        p = _reorth(p, state.basis_v)
    beta, alpha = float(np.linalg.norm(q)), float(np.linalg.norm(p))
    tiny = state.breakdown_tol * state.scale
    state.thetas.append(theta)
    state.u_prev, state.v_prev = uk, vk
    state.k = k
    beta_zero, alpha_zero = beta <= tiny, alpha <= tiny
    state.betas.append(0.0 if beta_zero else beta)
    state.alphas.append(0.0 if alpha_zero else alpha)
    state.u = np.zeros(A.n) if beta_zero else q / beta
    state.v = np.zeros(A.n) if alpha_zero else p / alpha
    if beta_zero or alpha_zero:
        state.terminated = True
        state.termination_side = TerminationSide.BETA_ZERO if beta_zero else TerminationSide.ALPHA_ZERO
        return state
    state.scale = max(state.scale, beta, alpha)
    if state.basis_u is not None:
        state.basis_u.append(state.u)
        state.basis_v.append(state.v)
    return state


def run_ssy(A: LinearOperator, b, c, steps: int | None = None, **kw) -> SsyState:
    st = ssy_start(A, b, c, **kw)
    limit = A.n + 1 if steps is None else steps
    while not st.terminated and st.k < limit:
        ssy_step(st, A)
    return st


def ssy_tridiagonal(state: SsyState, k: int) -> np.ndarray:
    """``H~_{k+1,k}``: ``theta`` on the diagonal, ``beta`` below, ``alpha`` above."""
    T = np.zeros((k + 1, k))
    for i in range(k):
        T[i, i] = state.thetas[i]
        T[i + 1, i] = state.betas[i + 1]
        if i + 1 < k:
            T[i, i + 1] = state.alphas[i + 1]
    return T


# --- sign patterns relating SSY and Lanczos bases -----------------------------

def sign_pattern_u(length: int) -> np.ndarray:
    """Diagonal of ``D``: ``u~_{2j-1} = (-1)^{j+1} w_{2j-1}``, ``u~_{2j} = (-1)^{j+1} w_{2j}``."""
    i = np.arange(1, length + 1)
    j = (i + 1) // 2
    return np.where(j % 2 == 1, 1.0, -1.0)


def sign_pattern_v(length: int) -> np.ndarray:
    """Diagonal of ``D~``: ``v~_{2j-1} = (-1)^{j+1} w_{2j-1}``, ``v~_{2j} = (-1)^j w_{2j}``."""
    d = sign_pattern_u(length)
    d[1::2] *= -1.0
    return d


def sign_pattern_last(length: int) -> tuple[float, float]:
    """Closed forms for the final diagonal entries: ``(-1)^floor((l+3)/2)`` and ``(-1)^ceil((l+3)/2)``."""
    return (-1.0) ** ((length + 3) // 2), (-1.0) ** (-(-(length + 3) // 2))


# --- equivalence checkers ---------------------------------------------------------

@dataclass
class EquivalenceReport:
    name: str
    rows: list[tuple[int, float]]
    threshold: float
    details: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max((d for _, d in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return bool(self.rows) and self.max_deviation <= self.threshold

    def format(self) -> str:
        out = [f"# check: {self.name}"]
        out += [f"# {note}" for note in self.notes]
        out.append("index,max_deviation")
        out += [f"{i},{d!r}" for i, d in self.rows]
        for key, val in self.details.items():
            out.append(f"# {key} = {val!r}")
        verdict = "PASS" if self.passed else "FAIL"
        out.append(f"{verdict} max_deviation={self.max_deviation!r} threshold={self.threshold!r}")
        return "\n".join(out)


def _rel(x: float, y: float) -> float:
    return abs(x - y) / abs(y) if y != 0 else abs(x)


def check_gk_lanczos_equivalence(S: LinearOperator, b, steps: int, *, reorthogonalize: bool = False,
                                 threshold: float = 1e-9) -> EquivalenceReport:
    """One Golub-Kahan step on skew ``S`` against two Lanczos steps.

    Row ``j`` holds the largest of the relative deviations in
    ``b_j = g_{2j-1}``, ``a_j = g_{2j}`` and the absolute vector deviations in
    ``u_j = (-1)^{j-1} w_{2j-1}``, ``v_j = (-1)^j w_{2j}``.
    """
    if not S.is_skew:
        raise ValueError("the Golub-Kahan/Lanczos relation needs a skew-symmetric operator")
    lz = run_lanczos(S, b, 2 * steps, store_basis=True, reorthogonalize=reorthogonalize)
    gk = run_golub_kahan(S, b, steps, store_basis=True, reorthogonalize=reorthogonalize)
    W, g = lz.basis, lz.gammas
    rows = []
    for j in range(1, min(steps, len(gk.basis_v)) + 1):
        if 2 * j > len(W):
            break
        su, sv = (-1.0) ** (j - 1), (-1.0) ** j
        dev = max(_rel(gk.betas[j - 1], g[2 * j - 2]), _rel(gk.alphas[j - 1], g[2 * j - 1]),
                  float(np.max(np.abs(gk.basis_u[j - 1] - su * W[2 * j - 2]))),
                  float(np.max(np.abs(gk.basis_v[j - 1] - sv * W[2 * j - 1]))))
        rows.append((j, dev))
    rep = EquivalenceReport("gk-lanczos", rows, threshold)
    if gk.terminated:
        rep.notes.append(f"Golub-Kahan terminated: k0={gk.k0}, side={gk.termination_side.value}")
    if lz.terminated:
        rep.notes.append(f"Lanczos terminated: l={lz.ell}")
        if gk.terminated:
            # termination must be consistent with l0 = ceil(l/2)
            l0 = -(-lz.ell // 2)
            expected = (l0, TerminationSide.BETA_ZERO) if lz.ell % 2 == 0 else (l0 - 1, TerminationSide.ALPHA_ZERO)
            rep.rows.append((steps + 1, 0.0 if (gk.k0, gk.termination_side) == expected else math.inf))
    return rep


def check_ssy_lanczos_equivalence(S: LinearOperator, b, steps: int, *, reorthogonalize: bool = False,
                                  threshold: float = 1e-9) -> EquivalenceReport:
    """SSY on skew ``S`` with ``c = b`` against Lanczos.

    Checks ``theta_k = 0``, ``alpha_k = beta_k = g_k``, ``U~ = W D`` and ``V~ = W D~``,
    with ``D``, ``D~`` built entrywise from the induction relations.
    """
    if not S.is_skew:
        raise ValueError("the SSY/Lanczos relation needs a skew-symmetric operator")
    lz = run_lanczos(S, b, steps, store_basis=True, reorthogonalize=reorthogonalize)
    ssy = run_ssy(S, b, b, steps, store_basis=True, reorthogonalize=reorthogonalize)
    W, g = lz.basis, lz.gammas
    m = min(len(W), len(ssy.basis_u))
    D, Dt = sign_pattern_u(m), sign_pattern_v(m)
    scale = max(g[1:], default=1.0) or 1.0
    rows = []
    for k in range(1, m + 1):
        dev = max(abs(ssy.thetas[k - 1]) / scale if k <= len(ssy.thetas) else 0.0,
                  _rel(ssy.alphas[k - 1], g[k - 1]), _rel(ssy.betas[k - 1], g[k - 1]),
                  float(np.max(np.abs(ssy.basis_u[k - 1] - D[k - 1] * W[k - 1]))),
                  float(np.max(np.abs(ssy.basis_v[k - 1] - Dt[k - 1] * W[k - 1]))))
        rows.append((k, dev))
    rep = EquivalenceReport("ssy-lanczos", rows, threshold)
    if m:
        d_last, dt_last = sign_pattern_last(m)
        rep.details["closed_form_last_D_matches"] = float(d_last == D[-1])
        rep.details["closed_form_last_Dtilde_matches"] = float(dt_last == Dt[-1])
        if d_last != D[-1] or dt_last != Dt[-1]:
            rep.rows.append((m + 1, math.inf))
    return rep


class Parity(enum.Enum):
    EVEN_IN_RANGE = "even_in_range"
    ODD_NOT_IN_RANGE = "odd_not_in_range"


@dataclass
class ParityReport:
    ell: int
    classification: Parity
    oracle_in_range: bool | None
    h_even_nonsingular: bool

    @property
    def agrees(self) -> bool | None:
        if self.oracle_in_range is None:
            return None
        return self.oracle_in_range == (self.classification is Parity.EVEN_IN_RANGE)


def termination_parity(S: LinearOperator, b, *, reorthogonalize: bool = True,
                       breakdown_tol: float = BREAKDOWN_TOL, oracle: bool = True) -> ParityReport:
    """Classify ``b`` by the parity of the Lanczos termination index ``l``.

    When ``oracle`` is set (and the size permits), ``b in ran(S)`` is also
    decided by a dense least-squares projection for cross-checking.
    """
    from . import oracle as _oracle

    st = run_lanczos(S, b, reorthogonalize=reorthogonalize, breakdown_tol=breakdown_tol)
    if not st.terminated:
        raise RuntimeError("Lanczos process did not terminate within n+1 steps")
    ell = st.ell
    cls = Parity.EVEN_IN_RANGE if ell % 2 == 0 else Parity.ODD_NOT_IN_RANGE
    in_range = None
    if oracle and S.n <= _oracle.MAX_ORACLE_N:
        in_range = _oracle.in_range(S.to_dense(), np.asarray(b, dtype=float))
    return ParityReport(ell, cls, in_range, even_sections_nonsingular(st.gammas, ell))
