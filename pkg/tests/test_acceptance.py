"""Acceptance suite: twelve end-to-end criteria, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py`` (lines appear in the terminal
summary) or ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import functools
import time

import numpy as np
import pytest

import frozen
from instances import fig1_system, fig2_system, fig3_system, random_shifted, random_skew
from skewkrylov import oracle
from skewkrylov.factorizations import Parity, termination_parity
from skewkrylov.history import Outcome, SolverConfig
from skewkrylov.operators import Structure, from_matrix
from skewkrylov.shifted_solvers import (error_bound, s3cg_solve, s3lq_solve, s3mr_solve, usymlq_solve,
                                        usymqr_solve)
from skewkrylov.skew_solvers import craig_solve, lsqr_solve, s2cg_solve, s2mr_solve

RESULTS: dict[int, str] = {}
KEEP = SolverConfig(keep_iterates=True)


def rel(x, y, floor: float = 0.0) -> float:
    """``||x - y|| / max(||y||, floor)``; ``floor`` covers iterates that vanish exactly."""
    ny = max(np.linalg.norm(y), floor)
    return float(np.linalg.norm(x - y) / ny) if ny > 0 else float(np.linalg.norm(x))


def report(num: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {num:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    RESULTS[num] = line
    print(line)
    assert passed, line


# --- shared systems and runs ---------------------------------------------------

def shifted_family(count: int) -> list:
    """Random shifted systems with n in [10, 100] drawn from the seed."""
    out = []
    for seed in range(count):
        n = int(np.random.default_rng(seed).integers(10, 101))
        out.append(random_shifted(n, seed))
    return out


@functools.cache
def shifted_systems() -> list:
    """fig3 followed by 20 random shifted systems, each with its dense solution."""
    systems = [fig3_system()] + shifted_family(20)
    return [(A, b, np.linalg.solve(A.to_dense(), b)) for A, b in systems]


@functools.cache
def shifted_runs() -> list[dict]:
    runs = []
    for A, b, xs in shifted_systems():
        runs.append({
            "A": A, "b": b, "xs": xs,
            "G": s3cg_solve(A, b, KEEP, x_ref=xs),
            "C": craig_solve(A, b, KEEP, x_ref=xs),
            "L": s3lq_solve(A, b, KEEP, x_ref=xs),
            "M": s3mr_solve(A, b, KEEP, x_ref=xs),
            "Q": lsqr_solve(A, b, KEEP, x_ref=xs),
        })
    return runs


# --- criteria ------------------------------------------------------------------

def test_c01_fig1_reproduction():
    S, b, xs = fig1_system()
    lines, ok = [], True
    for name, solve in (("S2CG", s2cg_solve), ("S2MR", s2mr_solve)):
        t0 = time.perf_counter()
        h = solve(S, b, x_ref=xs)
        dt = time.perf_counter() - t0
        err = h.final.error_norm
        good = h.outcome is Outcome.TERMINATED and h.final.iter == 24 and err <= 1e-8 and dt < 1.0
        ok &= good
        lines.append(f"{name} {h.outcome.value} at {h.final.iter}, err={err:.2e}, {dt * 1e3:.1f} ms")
    ok &= abs(np.linalg.norm(xs) - frozen.FIG1_XSTAR_NORM) < 1e-14
    report(1, "fig1 termination at 24", ok, "; ".join(lines))


def test_c02_s2cg_craig():
    S, b, _ = fig1_system()
    g = s2cg_solve(S, b, KEEP).iterate_map()
    c = craig_solve(S, b, KEEP).iterate_map()
    devs = [rel(g[2 * j], c[j]) for j in c if 2 * j in g]
    ok = len(devs) == 12 and max(devs) <= 1e-9
    report(2, "x_2j(S2CG) = x_j(CRAIG) on fig1", ok, f"{len(devs)} pairs, max rel dev {max(devs):.2e}")


def test_c03_s2mr_lsqr():
    parts, ok = [], True
    for label, (S, b) in (("fig1", fig1_system()[:2]), ("fig2", fig2_system())):
        m = s2mr_solve(S, b, KEEP).iterate_map()
        q = lsqr_solve(S, b, KEEP).iterate_map()
        devs = [rel(m[i], q[j]) for j in q for i in (2 * j, 2 * j + 1) if i in m]
        ok &= len(devs) >= 2 * len(q) - 1 and max(devs) <= 1e-9
        parts.append(f"{label}: {len(devs)} pairs, max {max(devs):.2e}")
    report(3, "x_2j(S2MR) = x_2j+1(S2MR) = x_j(LSQR)", ok, "; ".join(parts))


def test_c04_fig2_pseudoinverse():
    S, b = fig2_system()
    x_pinv = oracle.dense_pseudoinverse_solution(S.to_dense(), b)
    h = s2mr_solve(S, b, KEEP)
    err = float(np.linalg.norm(h.iterate(24) - x_pinv))
    ok = (err <= 1e-8 and abs(np.linalg.norm(x_pinv) - frozen.FIG2_PINV_NORM) < 1e-12
          and abs(x_pinv[1] - frozen.FIG2_PINV_ENTRY_1) < 1e-6)
    report(4, "fig2 S2MR step 24 = A^+ b", ok,
           f"||x_24 - A^+ b|| = {err:.2e} (rel {err / np.linalg.norm(x_pinv):.2e}), outcome {h.outcome.value}")


def test_c05_parity():
    rng = np.random.default_rng(2024)
    agree = in_range_cases = 0
    failures = []
    for case in range(50):
        n = int(rng.integers(6, 31))
        rank = int(rng.integers(2, n)) // 2 * 2
        rank = min(rank, n - 1 if n % 2 else n - 2)
        M = random_skew(n, rng, rank)
        S = from_matrix(M, Structure.SKEW)
        b = M @ rng.standard_normal(n)
        if case % 2:
            null = oracle.null_space_basis(M)
            b = b + null @ rng.standard_normal(null.shape[1])
        truth = oracle.in_range(M, b)
        pr = termination_parity(S, b)
        if pr.agrees and truth == (pr.classification is Parity.EVEN_IN_RANGE):
            agree += 1
        else:
            failures.append((case, n, rank, pr.ell, truth))
        in_range_cases += truth
    report(5, "termination parity vs oracle", agree == 50,
           f"{agree}/50 agree ({in_range_cases} in range, {50 - in_range_cases} not){' ' + str(failures) if failures else ''}")


def test_c06_shifted_equivalences():
    worst_gc = worst_lg = 0.0
    for r in shifted_runs():
        g, c, lq = r["G"].iterate_map(), r["C"].iterate_map(), r["L"].iterate_map()
        worst_gc = max([worst_gc] + [rel(g[2 * j], c[j]) for j in c if 2 * j in g])
        worst_lg = max([worst_lg] + [rel(lq[i], g[2 * j]) for j in range(1, len(g) + 1) if 2 * j in g
                                     for i in (2 * j, 2 * j + 1) if i in lq])
    ok = worst_gc <= 1e-9 and worst_lg <= 1e-9
    report(6, "x_2k(S3CG) = x_k(CRAIG), x_2j(S3LQ) = x_2j+1(S3LQ) = x_2j(S3CG)", ok,
           f"{len(shifted_runs())} systems, max {worst_gc:.2e} (CG/CRAIG), {worst_lg:.2e} (LQ/CG)")


def test_c07_s3mr_vs_lsqr():
    worst_gap, worst_final = -np.inf, 0.0
    strict = pairs = 0
    for r in shifted_runs():
        bn = np.linalg.norm(r["b"])
        rm = {rec.iter: rec.residual_norm for rec in r["M"].records}
        for rec in r["Q"].records:
            if 2 * rec.iter in rm:
                worst_gap = max(worst_gap, (rm[2 * rec.iter] - rec.residual_norm) / bn)
                # strictness is observed, not required; only count pairs before LSQR converges
                if rec.residual_norm > 10 * KEEP.tol * bn:
                    pairs += 1
                    strict += rm[2 * rec.iter] < rec.residual_norm
        for h in (r["M"], r["Q"]):
            worst_final = max(worst_final, rel(h.x, r["xs"]))
    ok = worst_gap <= 1e-12 and worst_final <= 1e-8
    report(7, "||r_2k(S3MR)|| <= ||r_k(LSQR)|| + 1e-12||b||", ok,
           f"max (r_M - r_LSQR)/||b|| = {worst_gap:.2e}, strict in {strict}/{pairs} pairs, "
           f"final rel error {worst_final:.2e}")


def test_c08_s3mr_residual_identity():
    worst_rel = worst_abs = 0.0
    decreasing = True
    for r in shifted_runs():
        h, bn = r["M"], np.linalg.norm(r["b"])
        # skip residuals at rounding level (the Krylov space is exhausted there)
        recs = [rec for rec in h.records if rec.residual_norm > 1e-13 * bn]
        for rec in recs:
            d = abs(rec.estimate_norm - rec.residual_norm)
            worst_rel = max(worst_rel, d / rec.residual_norm)
            worst_abs = max(worst_abs, d / bn)
        est = h.estimate_norms()
        decreasing &= bool(np.all(np.diff(est) < 0))
    ok = worst_rel <= 1e-8 and decreasing
    report(8, "|psi_k+1| = ||b - A x_k(S3MR)||, strictly decreasing", ok,
           f"max |est - res|/res = {worst_rel:.2e}, max |est - res|/||b|| = {worst_abs:.2e}, "
           f"strictly decreasing: {decreasing}")


def test_c09_error_bounds():
    worst_cg = worst_mr = 0.0
    for r in shifted_runs():
        A = r["A"]
        alpha = A.shift
        beta = float(np.abs(np.linalg.eigvals(A.skew_part.to_dense())).max())
        if A.n == 225:
            assert abs(beta - frozen.FIG3_BETA) < 1e-12
        xn, bn = np.linalg.norm(r["xs"]), np.linalg.norm(r["b"])
        for rec in r["G"].records:
            if rec.iter % 2 == 0:
                worst_cg = max(worst_cg, rec.error_norm / xn / error_bound(alpha, beta, rec.iter // 2, "cg"))
        for rec in r["M"].records:
            worst_mr = max(worst_mr, rec.residual_norm / bn / error_bound(alpha, beta, rec.iter, "mr"))
    ok = worst_cg <= 1.0 and worst_mr <= 1.0
    report(9, "measured error/residual within the convergence bounds", ok,
           f"max measured/bound = {worst_cg:.3f} (S3CG), {worst_mr:.3f} (S3MR)")


def test_c10_gk_on_shifted():
    alpha_ok = True
    worst, first_bad, rows = 0.0, [], 0
    for A, b in shifted_family(20):
        rep = oracle.gk_shifted_properties_check(A, b, tol=1e-10, u_tol=None)
        rows += len(rep.rows)
        alpha_ok &= all(r["alpha"] > r["gamma_even"] for r in rep.rows)
        worst = max(worst, rep.max_beta_deviation())
        bad = [r["j"] for r in rep.rows if not r["beta_rel_dev"] <= 1e-10]
        if bad:
            first_bad.append((A.n, bad[0], len(rep.rows)))
    ok = alpha_ok and not first_bad
    detail = f"alpha_j > gamma_2j on all {rows} rows: {alpha_ok}; max beta rel dev {worst:.2e}"
    if first_bad:
        detail += f"; beta relation lost on {len(first_bad)}/20 systems, (n, first j, rows): {first_bad}"
    report(10, "Golub-Kahan on alpha I + S vs Lanczos on S", ok, detail)


def test_c11_usym_equivalence():
    worst_qr = worst_lq = 0.0
    for A, b, xs in shifted_systems()[:11]:
        m = s3mr_solve(A, b, KEEP).iterate_map()
        lq = s3lq_solve(A, b, KEEP).iterate_map()
        uq = usymqr_solve(A, b, b, KEEP).iterate_map()
        ul = usymlq_solve(A, b, b, KEEP).iterate_map()
        worst_qr = max([worst_qr] + [rel(uq[k], m[k]) for k in m if k in uq])
        worst_lq = max([worst_lq] + [rel(ul[k], lq[k]) for k in lq if k in ul and np.linalg.norm(lq[k]) > 0])
    ok = worst_qr <= 1e-9 and worst_lq <= 1e-9
    report(11, "S3MR = USYMQR and S3LQ = USYMLQ with c = b", ok,
           f"max rel dev {worst_qr:.2e} (QR), {worst_lq:.2e} (LQ)")


def _oracle_cases():
    rng = np.random.default_rng(99)
    cases = []
    for i in range(2):
        M = random_skew(20, rng)
        cases.append(("skew", from_matrix(M, Structure.SKEW), rng.standard_normal(20), True))
    M = random_skew(20, rng, rank=14)
    S = from_matrix(M, Structure.SKEW)
    cases.append(("skew-consistent", S, M @ rng.standard_normal(20), True))
    cases.append(("skew-inconsistent", S, rng.standard_normal(20), False))
    for seed in (101, 102, 103):
        A, b = random_shifted(20, seed)
        cases.append(("shifted", A, b, True))
    return cases


def test_c12_oracle_equivalence():
    cfg = SolverConfig(tol=1e-300, keep_iterates=True)
    worst: dict[str, float] = {}
    floor = 0.0

    def track(name, x, y):
        worst[name] = max(worst.get(name, 0.0), rel(x, y, floor))

    for kind, A, b, consistent in _oracle_cases():
        M = A.to_dense()
        # x_1 of S2MR is exactly 0 for skew S (b is orthogonal to S b)
        floor = 1e-3 * np.linalg.norm(oracle.dense_pseudoinverse_solution(M, b))
        if A.is_skew:
            for k, x in s2mr_solve(A, b, cfg).iterate_map().items():
                if k <= 30:
                    track("s2mr", x, oracle.explicit_krylov_minres(M, b, k).x)
            for j, x in lsqr_solve(A, b, cfg).iterate_map().items():
                if j <= 30:
                    track("lsqr", x, oracle.explicit_lsqr(M, b, j).x)
            if consistent:
                for k, x in s2cg_solve(A, b, cfg).iterate_map().items():
                    if k <= 30:
                        track("s2cg", x, oracle.explicit_krylov_galerkin(M, b, k).x)
                for j, x in craig_solve(A, b, cfg).iterate_map().items():
                    if j <= 30:
                        track("craig", x, oracle.explicit_craig(M, b, j).x)
            continue
        runs = {
            "s3cg": (s3cg_solve(A, b, cfg), oracle.explicit_krylov_galerkin),
            "s3mr": (s3mr_solve(A, b, cfg), oracle.explicit_krylov_minres),
            "s3lq": (s3lq_solve(A, b, cfg), oracle.explicit_minlen_galerkin),
            "craig": (craig_solve(A, b, cfg), oracle.explicit_craig),
            "lsqr": (lsqr_solve(A, b, cfg), oracle.explicit_lsqr),
        }
        for name, (h, ref) in runs.items():
            for k, x in h.iterate_map().items():
                if k <= 30 and not (name == "s3lq" and k == 1):
                    track(name, x, ref(M, b, k).x)
        for k, x in usymqr_solve(A, b, b, cfg).iterate_map().items():
            if k <= 30:
                track("usymqr", x, oracle.explicit_usymqr(M, b, b, k).x)
        for k, x in usymlq_solve(A, b, b, cfg).iterate_map().items():
            if 2 <= k <= 30:
                track("usymlq", x, oracle.explicit_usymlq(M, b, b, k).x)
    ok = len(worst) == 9 and max(worst.values()) <= 1e-9
    report(12, "short recurrences vs explicit-basis oracles (n = 20, k <= 30)", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in sorted(worst.items())))


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
