import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from detnmf import (LinearProgram, cofactor_vector, determinant, mse, project_simplex,
                    solve_lp, solve_proposed)

from oracles import lp_vertex_enumeration, project_simplex_kkt

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
# multiples of 1/8: exact, and singular matrices come up often
grid = st.integers(-80, 80).map(lambda v: v / 8.0)


@given(arrays(np.float64, (4, 4), elements=grid), st.integers(0, 3))
def test_cofactor_row_identity(Q, k):
    p = cofactor_vector(Q, k)
    d = determinant(Q)
    scale = np.prod(np.linalg.norm(Q, axis=1)) + 1e-300
    assert abs(p @ Q[k] - d) <= 1e-10 * scale


@given(arrays(np.float64, 5, elements=finite), st.floats(0.1, 5))
def test_projection_matches_kkt(v, rho):
    p = project_simplex(v[:, None], rho)[:, 0]
    assert p.min() >= 0
    assert abs(p.sum() - rho) <= 1e-10 * max(1.0, rho)
    assert np.allclose(p, project_simplex_kkt(v, rho), atol=1e-8)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    A = rng.standard_normal((int(rng.integers(0, 7)), n))
    b = rng.standard_normal(A.shape[0])
    c = rng.standard_normal(n)
    ref, _ = lp_vertex_enumeration(c, A, b, -np.ones(n), np.ones(n))
    out = solve_lp(LinearProgram(c=c, A=A, b=b, lower=-1, upper=1))
    assert (ref is None) == (not out.optimal)
    if ref is not None:
        assert abs(out.value - ref) <= 1e-7


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_mse_invariance(seed, r):
    rng = np.random.default_rng(seed)
    H = rng.uniform(0.01, 1, size=(8, r))
    perm = rng.permutation(r)
    assert mse(H[:, perm] * rng.uniform(0.1, 10, r), H) == 0.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_proposed_feasible_and_monotone(seed):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(2, 5))
    H = rng.uniform(size=(20, r))
    H[rng.uniform(size=H.shape) < 0.3] = 0
    H[:r] += np.eye(r)  # keeps rank r
    H = H / H.sum(axis=0)
    X = rng.uniform(size=(15, r)) @ H.T
    res = solve_proposed(X, r)
    t = np.array(res.objective_trace)
    assert np.all(np.diff(t) >= -1e-12 * t[:-1])
    assert res.H.min() >= 0
    assert np.allclose(res.H.sum(axis=0), 1.0, atol=1e-8)
    assert res.residuals["fit"] < 1e-8
