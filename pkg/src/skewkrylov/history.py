"""Solver configuration and convergence histories."""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np


class Outcome(enum.Enum):
    CONVERGED = "converged"            # residual estimate below tolerance
    TERMINATED = "terminated"          # basis process exhausted the Krylov space
    NOT_APPLICABLE = "not-applicable"  # e.g. S2CG on an inconsistent system
    BREAKDOWN = "breakdown"            # e.g. CRAIG alpha-side breakdown
    MAX_ITERS = "max-iters"

    @property
    def ok(self) -> bool:
        return self in (Outcome.CONVERGED, Outcome.TERMINATED)


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iters: int | None = None  # None means 4n
    breakdown_tol: float = 1e-13
    store_basis: bool = False
    reorthogonalize: bool = False
    seed: int = 0
    keep_iterates: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def iteration_cap(self, n: int) -> int:
        return self.max_iters if self.max_iters is not None else 4 * n


@dataclass
class IterationRecord:
    iter: int
    residual_norm: float
    estimate_norm: float
    error_norm: float | None = None
    elapsed_ns: int = 0
    x: np.ndarray | None = None
    # Galerkin (CG) point transferred from an LQ iterate, when requested.
    x_cg: np.ndarray | None = None
    cg_skipped: bool = False


@dataclass
class ConvergenceHistory:
    solver: str
    records: list[IterationRecord] = field(default_factory=list)
    outcome: Outcome = Outcome.MAX_ITERS
    x: np.ndarray | None = None
    message: str = ""
    # diagnostic vectors (residuals, directions, ...) kept when store_basis is set
    vectors: dict[str, list[np.ndarray]] = field(default_factory=dict)

    @property
    def iterations(self) -> list[int]:
        return [r.iter for r in self.records]

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    def iterate(self, k: int) -> np.ndarray:
        for r in self.records:
            if r.iter == k:
                if r.x is None:
                    raise ValueError("iterates were not kept; set keep_iterates=True")
                return r.x
        raise KeyError(f"{self.solver}: no iterate with index {k}")

    def iterate_map(self) -> dict[int, np.ndarray]:
        return {r.iter: r.x for r in self.records if r.x is not None}

    def cg_points(self) -> dict[int, np.ndarray]:
        return {r.iter: r.x_cg for r in self.records if r.x_cg is not None}

    def residual_norms(self) -> np.ndarray:
        return np.array([r.residual_norm for r in self.records])

    def estimate_norms(self) -> np.ndarray:
        return np.array([r.estimate_norm for r in self.records])

    def error_norms(self) -> np.ndarray:
        return np.array([np.nan if r.error_norm is None else r.error_norm for r in self.records])


class Recorder:
    """Builds a :class:`ConvergenceHistory` while a solver runs."""

    def __init__(self, solver: str, A, b, cfg: SolverConfig, x_ref=None):
        self.history = ConvergenceHistory(solver)
        self.A = A
        self.b = b
        self.cfg = cfg
        self.x_ref = None if x_ref is None else np.asarray(x_ref, dtype=float)
        self.t0 = time.perf_counter_ns()

    def emit(self, k: int, x: np.ndarray, estimate: float, *, x_cg=None, cg_skipped=False) -> IterationRecord:
        res = float(np.linalg.norm(self.b - self.A.apply(x)))
        err = None if self.x_ref is None else float(np.linalg.norm(x - self.x_ref))
        keep = self.cfg.keep_iterates
        rec = IterationRecord(
            iter=k,
            residual_norm=res,
            estimate_norm=abs(float(estimate)),
            error_norm=err,
            elapsed_ns=time.perf_counter_ns() - self.t0,
            x=x.copy() if keep else None,
            x_cg=None if x_cg is None or not keep else x_cg.copy(),
            cg_skipped=cg_skipped,
        )
        self.history.records.append(rec)
        return rec

    def keep(self, name: str, v: np.ndarray) -> None:
        if self.cfg.store_basis:
            self.history.vectors.setdefault(name, []).append(v.copy())

    def finish(self, outcome: Outcome, x: np.ndarray, message: str = "") -> ConvergenceHistory:
        h = self.history
        h.outcome = outcome
        h.x = x.copy()
        h.message = message
        return h


def require_rhs(b) -> tuple[np.ndarray, float]:
    b = np.asarray(b, dtype=float)
    if b.ndim != 1:
        raise ValueError("right-hand side must be a vector")
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0 or not math.isfinite(bnorm):
        raise ValueError("right-hand side must be nonzero and finite")
    return b, bnorm
