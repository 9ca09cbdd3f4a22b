"""Comparison methods: least-squares NMF, VolMin and the determinant-regularised fit.

* ``solve_plain_nmf``: min ||X - W H^T||_F^2 with W, H >= 0, by HALS.
* ``solve_volmin_mves``: VolMin with row-stochastic H. Columns of X are
  l1-normalised, reduced to r-1 affine dimensions, and a minimum-volume
  simplex enclosing the reduced points is found by cyclic vertex LPs.
* ``solve_regularized``: min ||X - W H^T||_F^2 + lam * det(W^T W) with
  H^T 1 = rho 1 and H >= 0, by alternating (projected) gradient steps.
"""
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import LpFailure, NegativeData, ZeroColumn
from .linprog import LinearProgram, solve_lp
from .numerics import as_matrix, gram_det
from .solver import SolverResult, successive_projection

log = logging.getLogger(__name__)


@dataclass
class BaselineOptions:
    max_iters: int = 2000
    rel_tol: float = 1e-10
    seed: int = 0
    lam: float = 0.0
    feas_tol: float = 1e-9
    rho: float = 1.0
    clip_negative_input: bool = False
    # optional (W0, H0) starting point for the regularised solver
    init: tuple = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.feas_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


def _fit(X, W, H):
    return float(np.linalg.norm(X - W @ H.T) / max(np.linalg.norm(X), 1e-300))


def _stalled(prev, cur, tol):
    return abs(prev - cur) <= tol * max(abs(prev), 1e-300)


# ---------------------------------------------------------------------------
# plain NMF

def solve_plain_nmf(X, r, options=None):
    """Least-squares NMF by hierarchical alternating least squares.

    Negative entries raise :class:`NegativeData` unless
    ``options.clip_negative_input`` is set, in which case X is clipped at 0
    and the result carries the ``clipped_input`` flag.
    """
    options = options or BaselineOptions()
    t0 = time.perf_counter()
    X0 = as_matrix(X, "X")
    flags = []
    X = X0
    if X.min() < 0:
        if not options.clip_negative_input:
            raise NegativeData("plain NMF needs X >= 0")
        X = np.maximum(X, 0.0)
        flags.append("clipped_input")
    M, N = X.shape
    rng = np.random.default_rng(options.seed)
    W = rng.uniform(size=(M, r))
    H = rng.uniform(size=(N, r))
    # scale the start so that W H^T has the best overall magnitude
    P = W @ H.T
    alpha = float(np.sum(X * P) / max(np.sum(P * P), 1e-300))
    if alpha > 0:
        W *= math.sqrt(alpha)
        H *= math.sqrt(alpha)
    W = np.ascontiguousarray(W)
    H = np.ascontiguousarray(H)

    def objective():
        return float(np.sum((X - W @ H.T) ** 2))

    trace = [objective()]
    converged = False
    it = 0
    for it in range(1, options.max_iters + 1):
        W_prev, H_prev = W.copy(), H.copy()
        kernels.hals_update(H, X.T @ W, W.T @ W)
        kernels.hals_update(W, X @ H, H.T @ H)
        f = objective()
        if f > trace[-1]:
            # exact HALS never increases the objective; this is rounding
            # noise at the floor, so keep the previous iterate and stop
            W, H = W_prev, H_prev
            converged = True
            break
        trace.append(f)
        if f == 0.0 or _stalled(trace[-2], f, options.rel_tol):
            converged = True
            break
    if not converged:
        flags.append("not_converged")
    residuals = {"fit": _fit(X0, W, H), "min_h": float(H.min()), "colsum": None}
    return SolverResult(W=W, H=H, objective_trace=trace, sweeps=it,
                        converged=converged, residuals=residuals, flags=flags,
                        method="plain",
                        runtime_ms=1e3 * (time.perf_counter() - t0))


# ---------------------------------------------------------------------------
# VolMin via a minimum-volume enclosing simplex

def _lift(V):
    return np.vstack([V, np.ones((1, V.shape[1]))])


def _barycentric(V, alpha):
    """Barycentric coordinates (r x N) of the columns of ``alpha`` with
    respect to the simplex whose vertices are the columns of ``V``."""
    return np.linalg.solve(_lift(V), _lift(alpha))


def _vertex_lp(V, alpha, i, sign, feas_tol):
    """Best position of vertex i with the others fixed, on one sign branch.

    Moving vertex i to ``nu`` gives ``D' = D + ([nu; 1] - d_i) e_i^T``. With
    ``u = D^{-1} [nu; 1]`` (affine in nu), ``det D' = det D * u_i`` and the
    new barycentric coordinates times ``u_i`` are ``u_i b_j - b_i u_j`` for
    j != i and ``b_i`` for j = i, all affine in nu. ``sign`` is the sign
    of ``u_i``; the current vertex sits on the ``+1`` branch (u = e_i).
    Returns ``(nu, |det D'|)`` or None when the branch is infeasible.
    """
    D = _lift(V)
    Dinv = np.linalg.inv(D)
    detD = abs(np.linalg.det(D))
    B = Dinv @ _lift(alpha)                     # r x N
    bi = B[i]
    if np.any(sign * bi < -feas_tol):
        return None
    P, q0 = Dinv[:, :-1], Dinv[:, -1]
    others = [j for j in range(D.shape[0]) if j != i]
    # rows: sign * (B[j, n] * (P_i nu + q0_i) - b_i[n] * (P_j nu + q0_j)) >= 0
    A = np.concatenate([
        sign * (np.outer(B[j], P[i]) - np.outer(bi, P[j])) for j in others])
    b = -np.concatenate([
        sign * (B[j] * q0[i] - bi * q0[j]) for j in others])
    # keep the simplex nondegenerate on this branch
    A = np.vstack([A, sign * detD * P[i]])
    b = np.append(b, 1e-12 - sign * detD * q0[i])
    c = -sign * detD * P[i]
    lp = LinearProgram(c=c, A=A, b=b)
    out = solve_lp(lp, feas_tol=feas_tol)
    if out.status == "infeasible":
        return None
    if not out.optimal:
        raise LpFailure(f"vertex {i} subproblem ended {out.status}")
    nu = out.x
    return nu, abs(detD * (P[i] @ nu + q0[i]))


def _simplex_volume(V):
    k = V.shape[0]
    return abs(np.linalg.det(_lift(V))) / math.factorial(k)


def _vertex_sweep(V, alpha, feas_tol):
    r = V.shape[1]
    for i in range(r):
        cur = abs(np.linalg.det(_lift(V)))
        best = None
        for sign in (1.0, -1.0):
            got = _vertex_lp(V, alpha, i, sign, feas_tol)
            if got is not None and (best is None or got[1] < best[1]):
                best = got
        if best is not None and best[1] < cur * (1 - 1e-13):
            V[:, i] = best[0]
    return V


def _joint_phase(V, alpha, feas_tol, max_lps=200):
    """Trust-region sequential LP on all vertices at once.

    Works with ``G = D^{-1}`` (rows = facet normals, barycentric coordinates
    ``G [a; 1]``); the feasible set ``G [a_n; 1] >= 0, 1^T G = e_r^T`` is a
    polytope, and the step maximises the linearisation ``tr(G_k^{-1} G)`` of
    ``log|det G|`` inside a box around ``G_k``. A step is kept only if
    ``|det G|`` grows, i.e. the simplex shrinks. Vertex moves alone stall
    once several facets are pinned by data points; this moves all facets
    together.
    """
    k, N = alpha.shape
    r = k + 1
    At = _lift(alpha).T
    A = np.zeros((r * N, r * r))
    E = np.zeros((r, r * r))
    for j in range(r):
        A[j * N:(j + 1) * N, j * r:(j + 1) * r] = At
        E[:, j * r:(j + 1) * r] = np.eye(r)
    f = np.zeros(r)
    f[-1] = 1.0
    G = np.linalg.inv(_lift(V))
    logdet = math.log(abs(np.linalg.det(G)))
    radius = 0.1 * np.abs(G).max()
    moved = False
    for _ in range(max_lps):
        c = np.linalg.inv(G).T.ravel()
        g0 = G.ravel()
        out = solve_lp(LinearProgram(c=c, A=A, b=np.zeros(r * N), E=E, f=f,
                                     lower=g0 - radius, upper=g0 + radius),
                       feas_tol=feas_tol)
        if not out.optimal:
            break
        pred = float(c @ (out.x - g0))
        if pred <= 1e-13:
            break
        Gn = out.x.reshape(r, r)
        dn = abs(np.linalg.det(Gn))
        gain = math.log(dn) - logdet if dn > 0 else -math.inf
        if gain > 0:
            G, logdet, moved = Gn, logdet + gain, True
        ratio = gain / pred
        if ratio > 0.75:
            radius *= 2.0
        elif ratio < 0.25:
            radius *= 0.25
        if radius < 1e-13 * np.abs(G).max():
            break
    return np.linalg.inv(G)[:k], moved


def mves(alpha, options, V0=None):
    """Minimum-volume simplex enclosing the columns of ``alpha`` ((r-1) x N).

    Cyclic single-vertex LP updates; when a cycle stops shrinking the
    simplex, a joint trust-region phase is run and the cycles resume if it
    made progress. Returns ``(V, trace, sweeps, converged, flags)`` with
    vertices as the columns of V and one volume per cycle in ``trace``.
    """
    k, N = alpha.shape
    r = k + 1
    flags = []
    if V0 is None:
        cols = successive_projection(_lift(alpha), r)
        centre = alpha[:, cols].mean(axis=1, keepdims=True)
        grow = 1.05
        for _ in range(60):
            V = centre + grow * (alpha[:, cols] - centre)
            Dl = _lift(V)
            if abs(np.linalg.det(Dl)) > 0 and np.linalg.cond(Dl) < 1e12:
                if _barycentric(V, alpha).min() >= -options.feas_tol:
                    break
            grow = 1.0 + 2.0 * (grow - 1.0)
        else:
            raise LpFailure("could not inflate the initial simplex to contain the data")
        if grow > 1.05:
            flags.append("init_inflated")
    else:
        V = np.array(V0, dtype=np.float64, copy=True)
    trace = [_simplex_volume(V)]
    converged = False
    sweep = 0
    for sweep in range(1, options.max_iters + 1):
        V = _vertex_sweep(V, alpha, options.feas_tol)
        vol = _simplex_volume(V)
        if _stalled(trace[-1], vol, options.rel_tol):
            Vj, moved = _joint_phase(V, alpha, options.feas_tol)
            if moved and _simplex_volume(Vj) < vol:
                V, vol = Vj, _simplex_volume(Vj)
                if "joint_steps" not in flags:
                    flags.append("joint_steps")
            if _stalled(trace[-1], vol, options.rel_tol):
                trace.append(min(vol, trace[-1]))
                converged = True
                break
        trace.append(vol)
    if not converged:
        flags.append("not_converged")
    return V, trace, sweep, converged, flags


def solve_volmin_mves(X, r, options=None):
    """VolMin (row-stochastic H) after l1 column normalisation of X."""
    options = options or BaselineOptions()
    t0 = time.perf_counter()
    X = as_matrix(X, "X")
    norms = X.sum(axis=0)
    mass = np.abs(X).sum(axis=0)
    if mass.max() <= 0:
        raise ZeroColumn("X is zero")
    keep = np.abs(norms) >= 1e-12 * mass.max()
    flags = [] if keep.all() else ["zero_columns_skipped"]
    Xn = X[:, keep] / norms[keep]
    d = Xn.mean(axis=1, keepdims=True)
    N = X.shape[1]
    if r == 1:
        W = d.copy()
        H = np.where(keep, norms, 0.0)[:, None]
        return SolverResult(W=W, H=H, objective_trace=[0.0], sweeps=0,
                            converged=True, flags=flags,
                            residuals={"fit": _fit(X, W, H), "min_h": float(H.min()),
                                       "colsum": None},
                            method="volmin",
                            runtime_ms=1e3 * (time.perf_counter() - t0))
    U = np.linalg.svd(Xn - d, full_matrices=False)[0]
    B = U[:, :r - 1]
    alpha = B.T @ (Xn - d)
    V, trace, sweeps, converged, mflags = mves(alpha, options)
    flags += mflags
    W = B @ V + d
    Hn = _barycentric(V, alpha).T                # rows sum to 1
    min_h = float(Hn.min())
    Hn = np.where((Hn < 0) & (Hn >= -1e-8), 0.0, Hn)
    H = np.zeros((N, r))
    H[keep] = Hn * norms[keep, None]
    residuals = {"fit": _fit(X, W, H), "min_h": min_h,
                 "colsum": float(np.max(np.abs(Hn.sum(axis=1) - 1.0)))}
    return SolverResult(W=W, H=H, objective_trace=trace, sweeps=sweeps,
                        converged=converged, residuals=residuals, flags=flags,
                        method="volmin",
                        runtime_ms=1e3 * (time.perf_counter() - t0))


# ---------------------------------------------------------------------------
# determinant-regularised fit

def project_simplex(V, rho=1.0):
    """Euclidean projection of each column of ``V`` onto {h >= 0, sum h = rho}."""
    V = np.asarray(V, dtype=np.float64)
    vec = V.ndim == 1
    if vec:
        V = V[:, None]
    n = V.shape[0]
    U = -np.sort(-V, axis=0)
    css = np.cumsum(U, axis=0) - rho
    idx = np.arange(1, n + 1)[:, None]
    cond = U - css / idx > 0
    k = n - 1 - np.argmax(cond[::-1], axis=0)    # last index where cond holds
    theta = css[k, np.arange(V.shape[1])] / (k + 1)
    out = np.maximum(V - theta, 0.0)
    return out[:, 0] if vec else out


def _reg_objective(X, W, H, lam):
    fit = float(np.sum((X - W @ H.T) ** 2))
    return fit + lam * gram_det(W) if lam else fit


def _w_step(X, W, H, lam, flags, inner=10):
    f = _reg_objective(X, W, H, lam)
    HtH = H.T @ H
    XH = X @ H
    step = 1.0 / max(2.0 * np.linalg.norm(HtH, 2), 1e-300)
    for _ in range(inner):
        grad = -2.0 * (XH - W @ HtH)
        if lam:
            G = W.T @ W
            dg = gram_det(W)
            if dg < 1e-300:
                if "gram_singular" not in flags:
                    flags.append("gram_singular")
            else:
                grad += 2.0 * lam * dg * np.linalg.solve(G, W.T).T
        gg = float(np.sum(grad * grad))
        if gg == 0.0:
            break
        t = step * 4.0
        gmax = float(np.abs(grad).max())
        wmax = max(float(np.abs(W).max()), 1e-300)
        while True:
            Wn = W - t * grad
            fn = _reg_objective(X, Wn, H, lam)
            if fn <= f - 0.5 * t * gg:
                break
            t *= 0.5
            if t * gmax < 1e-16 * wmax:
                # the step no longer changes W
                return W, f
        W, f = Wn, fn
        step = t
    return W, f


def _h_step(X, W, H, rho, inner=10):
    WtW = W.T @ W
    XtW = X.T @ W
    L = 2.0 * np.linalg.norm(WtW, 2)
    if L <= 0:
        return H
    for _ in range(inner):
        grad = -2.0 * (XtW - H @ WtW)
        Hn = project_simplex(H - grad / L, rho)
        if np.array_equal(Hn, H):
            break
        H = Hn
    return H


def solve_regularized(X, r, options=None):
    """min ||X - W H^T||_F^2 + lam det(W^T W), H^T 1 = rho 1, H >= 0.

    Alternates a backtracking gradient phase on W with a projected gradient
    phase on H (step 1/L); each phase only accepts decreasing steps, so the
    objective trace is non-increasing.
    """
    options = options or BaselineOptions()
    t0 = time.perf_counter()
    X = as_matrix(X, "X")
    M, N = X.shape
    lam, rho = options.lam, options.rho
    flags = []
    if options.init is not None:
        W = np.array(options.init[0], dtype=np.float64, copy=True)
        H = np.array(options.init[1], dtype=np.float64, copy=True)
    else:
        rng = np.random.default_rng(options.seed)
        H = project_simplex(rng.uniform(size=(N, r)) * (2.0 * rho / N), rho)
        W = np.linalg.lstsq(H, X.T, rcond=None)[0].T
    trace = [_reg_objective(X, W, H, lam)]
    converged = False
    it = 0
    for it in range(1, options.max_iters + 1):
        W, _ = _w_step(X, W, H, lam, flags)
        Hn = _h_step(X, W, H, rho)
        if _reg_objective(X, W, Hn, lam) <= _reg_objective(X, W, H, lam):
            H = Hn
        trace.append(_reg_objective(X, W, H, lam))
        if trace[-1] == 0.0 or _stalled(trace[-2], trace[-1], options.rel_tol):
            converged = True
            break
    if not converged:
        flags.append("not_converged")
    residuals = {"fit": _fit(X, W, H), "min_h": float(H.min()),
                 "colsum": float(np.max(np.abs(H.sum(axis=0) - rho)))}
    return SolverResult(W=W, H=H, objective_trace=trace, sweeps=it,
                        converged=converged, residuals=residuals, flags=flags,
                        method="regularized",
                        runtime_ms=1e3 * (time.perf_counter() - t0))
