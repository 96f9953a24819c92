"""Incremental QR and LQ factorizations of projected tridiagonal matrices.

Column ``k`` of a ``(k+1) x k`` tridiagonal ``T`` is described by three
numbers: ``a_k`` (row ``k-1``), ``d_k`` (row ``k``) and ``b_{k+1}`` (row ``k+1``).
The QR kernel drives minimum-residual methods, the LQ kernel drives
minimum-length methods on ``T_{k-1,k} y = beta_1 e_1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class TridiagQR:
    """QR of ``T_{k+1,k}`` one column at a time, with the MINRES update of ``x``."""

    def __init__(self, beta1: float, n: int, breakdown_tol: float):
        self.psi_bar = beta1
        self.c1, self.s1 = 1.0, 0.0   # rotation k-1
        self.c2, self.s2 = 1.0, 0.0   # rotation k-2
        self.p1 = np.zeros(n)
        self.p2 = np.zeros(n)
        self.x = np.zeros(n)
        self.tiny = breakdown_tol
        self.scale = max(1.0, beta1)
        self.k = 0

    def add_column(self, a: float, d: float, b_next: float, v: np.ndarray) -> tuple[np.ndarray, float, bool]:
        """Returns ``(x_k, |psi_bar_{k+1}|, singular)``.

        ``singular`` means the new diagonal of ``R`` vanished; the iterate is
        then left unchanged, which is the minimum-norm choice.
        """
        self.k += 1
        self.scale = max(self.scale, abs(a), abs(d), abs(b_next))
        r_far = self.s2 * a
        tmp = self.c2 * a
        r_near = self.c1 * tmp + self.s1 * d
        dbar = -self.s1 * tmp + self.c1 * d
        r = math.hypot(dbar, b_next)
        singular = r <= self.tiny * self.scale
        if singular:
            c, s = 1.0, 0.0
            p = np.zeros_like(v)
        else:
            c, s = dbar / r, b_next / r
            p = (v - r_near * self.p1 - r_far * self.p2) / r
            self.x = self.x + (c * self.psi_bar) * p
            self.psi_bar = -s * self.psi_bar
        self.c2, self.s2, self.c1, self.s1 = self.c1, self.s1, c, s
        self.p2, self.p1 = self.p1, p
        return self.x, abs(self.psi_bar), singular


@dataclass
class LqStep:
    """Quantities available at step ``k`` of an LQ sweep."""

    k: int
    x: np.ndarray                  # LQ point x_k
    estimate: float                # ||b - A x_k||
    x_cg: np.ndarray | None        # Galerkin point x_k (None when T_k is singular)
    cg_estimate: float | None
    x_next: np.ndarray | None      # x_{k+1}; None if the LQ diagonal vanished
    delta_tilde: float
    xi: float
    terminated: bool = False       # the basis process stopped at this step


class TridiagLQ:
    """LQ of ``T_{k-1,k}`` by right Givens rotations (sub ``b``, diagonal ``d``, super ``a``).

    The rotation at step ``k`` maps ``(dt_k, a_{k+1})`` to ``(delta_k, 0)`` with
    ``c = dt_k/delta_k`` and ``s = a_{k+1}/delta_k``; directions follow
    ``p_k = c p~_k + s v_{k+1}``, ``p~_{k+1} = c v_{k+1} - s p~_k``.
    """

    def __init__(self, beta1: float, v1: np.ndarray, breakdown_tol: float):
        self.beta1 = beta1
        self.c1, self.s1 = 1.0, 0.0
        self.c2, self.s2 = 1.0, 0.0
        self.xi1 = self.xi2 = 0.0     # xi_{k-1}, xi_{k-2}
        self.p_tilde = v1.copy()
        self.x = np.zeros_like(v1)
        self.tiny = breakdown_tol
        self.scale = max(1.0, beta1)
        self.k = 0

    def step(self, b: float, d: float, a_next: float, b_next: float, v_next: np.ndarray) -> LqStep:
        self.k = k = self.k + 1
        self.scale = max(self.scale, abs(b), abs(d), abs(a_next), abs(b_next))
        if k == 1:
            eta = lam = 0.0
            dt = d
        else:
            eta = self.s2 * b
            lam = self.c1 * self.c2 * b + self.s1 * d
            dt = -self.s1 * self.c2 * b + self.c1 * d
        rhs = (self.beta1 if k == 1 else 0.0) - eta * self.xi2 - lam * self.xi1
        if k == 1:
            est = self.beta1
        else:
            est = math.hypot(eta * self.xi2 + lam * self.xi1, b_next * self.s1 * self.xi1)
        x_cg = cg_est = None
        if abs(dt) > self.tiny * self.scale:
            xt = rhs / dt
            x_cg = self.x + xt * self.p_tilde
            cg_est = abs(b_next * (self.s1 * self.xi1 + self.c1 * xt))
        x_k = self.x
        delta = math.hypot(dt, a_next)
        if delta <= self.tiny * self.scale:
            return LqStep(k, x_k, est, x_cg, cg_est, None, dt, math.nan)
        c, s = dt / delta, a_next / delta
        xi = rhs / delta
        p = c * self.p_tilde + s * v_next
        self.x = x_k + xi * p
        self.p_tilde = c * v_next - s * self.p_tilde
        self.c2, self.s2, self.c1, self.s1 = self.c1, self.s1, c, s
        self.xi2, self.xi1 = self.xi1, xi
        return LqStep(k, x_k, est, x_cg, cg_est, self.x, dt, xi)
