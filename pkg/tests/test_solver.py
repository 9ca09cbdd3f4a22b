import itertools

import numpy as np
import pytest

from detnmf import (SolverOptions, ao_sweep, determinant, gram_det, init_q, mse,
                    solve_proposed, svd_reduce)
from detnmf.solver import successive_projection


def colnorm(H):
    return H / H.sum(axis=0)


def small_instance(seed, M=30, N=30, r=4, zeros=0.35):
    rng = np.random.default_rng(seed)
    H = rng.uniform(size=(N, r))
    H.flat[rng.permutation(N * r)[:int(zeros * N * r)]] = 0.0
    H = colnorm(H)
    W = rng.uniform(size=(M, r))
    return W @ H.T, W, H


def test_r2_example():
    W = np.array([[1.0, 0], [0, 1], [1, 1]])
    H = colnorm(np.array([[1.0, 0], [0, 1], [1, 1], [2, 1]]))
    res = solve_proposed(W @ H.T, 2)
    assert mse(res.H, H) < 1e-10
    assert res.converged


def test_feasibility_and_recovery():
    X, W, H = small_instance(0)
    res = solve_proposed(X, 4)
    assert res.H.min() >= 0
    assert np.allclose(res.H.sum(axis=0), 1.0, atol=1e-9)
    assert res.residuals["fit"] < 1e-9
    assert mse(res.H, H) < 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_trace_monotone(seed):
    X, _, _ = small_instance(seed, r=5)
    res = solve_proposed(X, 5, SolverOptions(init="random", seed=seed))
    t = np.array(res.objective_trace)
    assert np.all(np.diff(t) >= -1e-12 * t[:-1])


def test_objective_identity():
    # det(W^T W) = prod(sigma)^2 / det(Q)^2
    X, _, _ = small_instance(3)
    res = solve_proposed(X, 4)
    model = svd_reduce(X, 4)
    expected = np.prod(model.sigma) ** 2 / determinant(res.Q) ** 2
    assert gram_det(res.W) == pytest.approx(expected, rel=1e-8)


def test_rho_scaling_exact():
    X, _, _ = small_instance(4)
    a = solve_proposed(X, 4)
    b = solve_proposed(X, 4, SolverOptions(rho=2.0))
    assert np.array_equal(b.H, 2 * a.H)
    assert np.allclose(b.W, a.W / 2, rtol=1e-12)
    assert np.allclose(b.H.sum(axis=0), 2.0)


def test_scaled_permutation_transform():
    X, _, H = small_instance(5, r=3)
    res = solve_proposed(X, 3)
    A = np.linalg.lstsq(H, res.H, rcond=None)[0]
    P = (np.abs(A) > 1e-6).astype(int)
    assert (P.sum(axis=0) == 1).all() and (P.sum(axis=1) == 1).all()


def test_spa_picks_pure_columns():
    rng = np.random.default_rng(6)
    r, N = 3, 20
    H = colnorm(np.vstack([np.eye(r), rng.uniform(size=(N - r, r))]))
    W = rng.uniform(size=(15, r))
    model = svd_reduce(W @ H.T, r)
    cols = successive_projection(model.xtilde, r)
    assert sorted(cols) == [0, 1, 2]
    Q0 = init_q(model, SolverOptions())
    assert (Q0 @ model.xtilde).min() >= -1e-9
    assert np.allclose(Q0 @ model.s, 1.0)


def test_init_identity_data():
    model = svd_reduce(np.eye(3), 3)
    Q0 = init_q(model, SolverOptions())
    assert abs(determinant(Q0)) == pytest.approx(1.0)
    P = np.abs(Q0) > 1e-12
    assert (P.sum(axis=0) == 1).all() and (P.sum(axis=1) == 1).all()


def test_random_init_deterministic():
    X, _, _ = small_instance(7)
    model = svd_reduce(X, 4)
    opts = SolverOptions(init="random", seed=3)
    a, b = init_q(model, opts), init_q(model, opts)
    assert np.array_equal(a, b)
    assert (a @ model.xtilde).min() >= -1e-9


def test_sweep_never_decreases():
    X, _, _ = small_instance(8, r=5)
    model = svd_reduce(X, 5)
    opts = SolverOptions(init="random", seed=1)
    Q = init_q(model, opts)
    for _ in range(3):
        Q2, _, _ = ao_sweep(Q, model, opts)
        assert abs(determinant(Q2)) >= abs(determinant(Q)) * (1 - 1e-12)
        Q = Q2


def test_ground_truth_is_fixed_point():
    X, W, H = small_instance(9, r=3)
    model = svd_reduce(X, 3)
    # H^T = Q Xt  ->  Q = H^T Xt^+
    Q = H.T @ np.linalg.pinv(model.xtilde)
    _, improved, _ = ao_sweep(Q, model, SolverOptions())
    assert not improved


def test_not_scattered_only_feasible():
    P = np.array(sorted(set(itertools.permutations((2.0, 1.0, 0.0)))))
    H = colnorm(np.vstack([P, P[:2]]))
    W = np.random.default_rng(0).uniform(size=(10, 3))
    res = solve_proposed(W @ H.T, 3)
    assert res.H.min() >= 0
    assert np.allclose(res.H.sum(axis=0), 1.0)
    t = np.array(res.objective_trace)
    assert np.all(np.diff(t) >= -1e-12 * t[:-1])


def test_bad_options():
    with pytest.raises(ValueError):
        SolverOptions(rho=0)
    with pytest.raises(ValueError):
        SolverOptions(init="nope")
    with pytest.raises(ValueError):
        SolverOptions(max_sweeps=0)


def test_rank_mismatch_raises_or_flags():
    from detnmf import ResidualAboveTolerance
    X = np.random.default_rng(1).uniform(size=(12, 12))
    with pytest.raises(ResidualAboveTolerance):
        solve_proposed(X, 3)
    res = solve_proposed(X, 3, SolverOptions(allow_rank_deficit=True, max_sweeps=5))
    assert "rank_residual" in res.flags
