import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import fig1_system, fig2_system, random_skew
from skewkrylov import oracle
from skewkrylov.history import Outcome, SolverConfig
from skewkrylov.operators import Structure, from_matrix, shifted
from skewkrylov.skew_solvers import craig_solve, lsqr_solve, s2cg_solve, s2mr_solve

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
E1 = np.array([1.0, 0.0])
KEEP = SolverConfig(keep_iterates=True)


def skew2():
    return from_matrix(J, Structure.SKEW)


def rel(x, y):
    return np.linalg.norm(x - y) / np.linalg.norm(y)


def test_2x2_examples():
    assert np.allclose(s2cg_solve(skew2(), E1, KEEP).iterate(2), [0.0, 1.0], atol=1e-15)
    assert np.allclose(s2mr_solve(skew2(), E1, KEEP).iterate(2), [0.0, 1.0], atol=1e-15)
    assert np.allclose(craig_solve(skew2(), E1, KEEP).iterate(1), [0.0, 1.0], atol=1e-15)
    assert np.allclose(lsqr_solve(skew2(), E1, KEEP).iterate(1), [0.0, 1.0], atol=1e-15)
    assert np.allclose(craig_solve(shifted(1.0, skew2()), E1, KEEP).iterate(1), [0.5, 0.5], atol=1e-15)


def test_fig1_solvers_reach_xstar():
    S, b, xs = fig1_system()
    for solve, last in ((s2cg_solve, 24), (s2mr_solve, 24), (craig_solve, 12), (lsqr_solve, 12)):
        h = solve(S, b, KEEP, x_ref=xs)
        assert h.outcome is Outcome.TERMINATED and h.final.iter == last
        assert np.linalg.norm(h.x - xs) <= 1e-8


def test_fig2_outcomes():
    S, b = fig2_system()
    x_pinv = oracle.dense_pseudoinverse_solution(S.to_dense(), b)
    h = s2cg_solve(S, b)
    assert h.outcome is Outcome.NOT_APPLICABLE and "range" in h.message
    h = craig_solve(S, b)
    assert h.outcome is Outcome.BREAKDOWN and not h.outcome.ok
    h = s2mr_solve(S, b, KEEP)
    assert h.outcome.ok and np.linalg.norm(h.iterate(24) - x_pinv) <= 1e-8
    h = lsqr_solve(S, b)
    assert h.outcome.ok and np.linalg.norm(h.x - x_pinv) <= 1e-8
    N = oracle.null_space_basis(S.to_dense())
    assert np.linalg.norm(N.T @ h.x) <= 1e-8


def test_s2mr_residuals_pair_up():
    S, b, _ = fig1_system()
    r = s2mr_solve(S, b).residual_norms()
    assert np.all(np.diff(r) <= 1e-14)
    # r_{2j} = r_{2j+1}: records are 1-based, so r[1::2] are even steps
    evens, odds = r[1:-1:2], r[2::2]
    assert np.allclose(evens[:len(odds)], odds, rtol=1e-12)


def test_only_even_galerkin_points():
    S, b, _ = fig1_system()
    assert all(k % 2 == 0 for k in s2cg_solve(S, b).iterations)


def test_input_validation():
    with pytest.raises(ValueError):
        s2cg_solve(shifted(1.0, skew2()), E1)
    with pytest.raises(ValueError):
        s2mr_solve(from_matrix(np.eye(2)), E1)
    with pytest.raises(ValueError):
        s2mr_solve(skew2(), np.zeros(2))
    with pytest.raises(ValueError):
        lsqr_solve(skew2(), np.ones(3))


def test_max_iters_outcome():
    S, b, _ = fig1_system()
    h = s2mr_solve(S, b, SolverConfig(max_iters=5))
    assert h.outcome is Outcome.MAX_ITERS and h.final.iter == 5


def skew_system(n, seed, rank, consistent):
    rng = np.random.default_rng(seed)
    M = random_skew(n, rng, rank)
    b = M @ rng.standard_normal(n) if consistent else rng.standard_normal(n)
    return from_matrix(M, Structure.SKEW), b


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 40), seed=st.integers(0, 2**32 - 1), deficient=st.booleans())
def test_s2cg_matches_craig(n, seed, deficient):
    rank = n - 2 if deficient else None
    S, b = skew_system(n, seed, rank, consistent=True)
    g = s2cg_solve(S, b, KEEP).iterate_map()
    c = craig_solve(S, b, KEEP).iterate_map()
    pairs = [(g[2 * j], c[j]) for j in c if 2 * j in g]
    assert pairs
    for x, y in pairs:
        assert np.linalg.norm(x - y) <= 1e-10 * np.linalg.norm(y)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(4, 40), seed=st.integers(0, 2**32 - 1), consistent=st.booleans())
def test_s2mr_matches_lsqr(n, seed, consistent):
    S, b = skew_system(n, seed, n - 2, consistent)
    m = s2mr_solve(S, b, KEEP).iterate_map()
    q = lsqr_solve(S, b, KEEP).iterate_map()
    for j, y in q.items():
        for i in (2 * j, 2 * j + 1):
            if i in m:
                assert np.linalg.norm(m[i] - y) <= 1e-10 * np.linalg.norm(y)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(6, 30), seed=st.integers(0, 2**32 - 1), consistent=st.booleans())
def test_singular_solutions_avoid_null_space(n, seed, consistent):
    S, b = skew_system(n, seed, n - 3, consistent)
    M = S.to_dense()
    N = oracle.null_space_basis(M)
    x_pinv = oracle.dense_pseudoinverse_solution(M, b)
    solvers = [s2mr_solve, lsqr_solve] + ([s2cg_solve, craig_solve] if consistent else [])
    for solve in solvers:
        h = solve(S, b, SolverConfig(reorthogonalize=True))
        assert h.outcome.ok
        assert np.linalg.norm(N.T @ h.x) <= 1e-8
        assert np.linalg.norm(h.x - x_pinv) <= 1e-7 * np.linalg.norm(x_pinv)
