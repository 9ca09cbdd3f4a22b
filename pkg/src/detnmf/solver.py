"""Determinant-maximisation solver for the column-sum-constrained criterion.

Given ``X = W H^T`` of rank r, the criterion

    minimise det(W^T W)  s.t.  X = W H^T,  H^T 1 = rho 1,  H >= 0

is solved after a rank-r SVD ``X = U diag(sigma) V^T``. With
``Xt = V^T`` every feasible pair is ``H^T = Q Xt`` for an invertible r x r
``Q`` and ``W = U diag(sigma) Q^{-1}``, so the problem becomes

    maximise |det Q|  s.t.  Q Xt >= 0,  Q Xt 1 = rho 1.

The constraints act on each row of ``Q`` separately, and ``det Q`` is linear
in any single row (cofactor expansion), so each row update is a pair of
small linear programs. Rows are updated cyclically until ``log|det Q|``
stalls.
"""
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InitSingular, LpFailure, ResidualAboveTolerance
from .linprog import LinearProgram, solve_lp
from .numerics import as_matrix, cofactor_vector, determinant, svd_reduce

log = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    max_sweeps: int = 200
    rel_tol: float = 1e-10
    feas_tol: float = 1e-9
    rho: float = 1.0
    init: str = "spa"
    seed: int = 0
    clip_negatives: bool = True
    rank_tol: float = 1e-8
    box: float = 1e6
    allow_rank_deficit: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not (self.rel_tol > 0 and self.feas_tol > 0 and self.rank_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.init not in ("spa", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")


@dataclass
class SolverResult:
    """Output shared by every solver in the package.

    ``objective_trace`` holds one value per sweep/iteration: ``|det Q|`` for
    the proposed solver, the minimised objective for the baselines.
    ``residuals`` has keys ``fit`` (relative Frobenius residual), ``min_h``
    (smallest entry of H before clipping) and ``colsum`` (largest deviation
    of a column sum of H from its target, where one exists).
    """
    W: np.ndarray
    H: np.ndarray
    Q: np.ndarray = None
    objective_trace: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    residuals: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    method: str = "proposed"
    runtime_ms: float = 0.0


def _row_lp(model, c, rho, box):
    xt = model.xtilde
    r, N = xt.shape
    return LinearProgram(c=c, A=xt.T, b=np.zeros(N), E=model.s[None, :],
                         f=[rho], lower=np.full(r, -box),
                         upper=np.full(r, box))


def _row_feasible(q, model, options):
    h = model.xtilde.T @ q
    return (h.min() >= -options.feas_tol * options.rho
            and abs(model.s @ q - options.rho) <= 1e-8 * options.rho)


def _random_row(model, options, rng):
    r = model.rank
    for _ in range(50):
        out = solve_lp(_row_lp(model, rng.standard_normal(r), options.rho,
                               options.box), feas_tol=options.feas_tol)
        if out.optimal:
            return out.x
    raise LpFailure("no feasible row found for the random initialisation")


def successive_projection(M, k):
    """Greedy column selection: repeatedly take the column of largest
    residual norm and project it out of all columns."""
    R = np.array(M, dtype=np.float64, copy=True)
    chosen = []
    for _ in range(k):
        norms = np.einsum("ij,ij->j", R, R)
        norms[chosen] = -1.0
        j = int(np.argmax(norms))
        chosen.append(j)
        u = R[:, j]
        nu = np.linalg.norm(u)
        if nu == 0.0:
            break
        u = u / nu
        R -= np.outer(u, u @ R)
    return chosen


def init_q(model, options):
    """Starting matrix for the sweeps.

    ``spa``: invert the r columns of ``Xt`` picked by successive projection
    and scale each row so that ``s @ q_k = rho`` where that sum is nonzero.
    ``random``: each row maximises a random linear objective over its own
    feasible set; retried until the rows are independent.
    """
    r = model.rank
    if options.init == "spa":
        cols = successive_projection(model.xtilde, r)
        B = model.xtilde[:, cols]
        if len(set(cols)) == r and np.linalg.cond(B) < 1e12:
            Q = np.linalg.inv(B)
            t = Q @ model.s
            ok = np.abs(t) > 1e-12 * np.linalg.norm(Q, axis=1) * np.linalg.norm(model.s)
            Q[ok] *= (options.rho / t[ok])[:, None]
            return Q
        log.warning("successive projection picked a singular basis; "
                    "falling back to random rows")
    rng = np.random.default_rng(options.seed)
    for _ in range(50):
        Q = np.array([_random_row(model, options, rng) for _ in range(r)])
        if abs(determinant(Q)) > 0.0 and np.linalg.cond(Q) < 1e12:
            return Q
    raise InitSingular("could not draw linearly independent feasible rows")


def ao_sweep(Q, model, options, rng=None):
    """One cyclic pass over the rows of ``Q``.

    Row k is replaced by the better of the two LP solutions maximising
    ``+p @ q`` and ``-p @ q`` (p the cofactors of row k), ties going to
    ``+p``; a feasible row is only replaced by a strictly better one.
    Returns ``(Q_new, improved, flags)``.
    """
    Q = np.array(Q, dtype=np.float64, copy=True)
    r = Q.shape[0]
    flags = []
    improved = False
    for k in range(r):
        p = cofactor_vector(Q, k)
        if not np.any(p):
            # remaining rows are dependent; restart this row
            if rng is None:
                rng = np.random.default_rng(options.seed)
            Q[k] = _random_row(model, options, rng)
            flags.append("degenerate_cofactor")
            improved = True
            continue
        best_x, best_val = None, -1.0
        for sign in (1.0, -1.0):
            out = solve_lp(_row_lp(model, sign * p, options.rho, options.box),
                           feas_tol=options.feas_tol)
            if not out.optimal:
                raise LpFailure(f"row {k} subproblem ended {out.status}")
            val = abs(p @ out.x)
            if val > best_val:
                best_x, best_val = out.x, val
        current = abs(p @ Q[k])
        if _row_feasible(Q[k], model, options) and not best_val > current * (1 + 1e-13):
            continue
        if np.max(np.abs(best_x)) >= options.box * (1 - 1e-9):
            flags.append("box_active")
        Q[k] = best_x
        improved = True
    return Q, improved, flags


def recover_factors(Q, model, options):
    """``H = (Q Xt)^T`` and ``W = U diag(sigma) Q^{-1}``."""
    H = (Q @ model.xtilde).T
    min_h = float(H.min())
    if options.clip_negatives:
        H = np.where((H < 0) & (H >= -options.feas_tol * options.rho), 0.0, H)
    W = (model.U * model.sigma) @ np.linalg.inv(Q)
    return W, H, min_h


def solve_proposed(X, r, options=None):
    """Factor ``X`` under the column-sum-to-rho criterion.

    Returns a :class:`SolverResult`; ``converged`` is False when the sweep
    budget ran out (the last iterate is still returned).
    """
    options = options or SolverOptions()
    t0 = time.perf_counter()
    X = as_matrix(X, "X")
    flags = []
    try:
        model = svd_reduce(X, r, options.rank_tol)
    except ResidualAboveTolerance as err:
        if not options.allow_rank_deficit or err.model is None:
            raise
        model = err.model
        flags.append("rank_residual")
    # Work at rho = 1 and rescale at the end: Q scales linearly with rho,
    # so this keeps the rho = 2 output an exact multiple of the rho = 1 one.
    rho = options.rho
    unit = replace(options, rho=1.0)
    rng = np.random.default_rng(options.seed)
    Q = init_q(model, unit)
    trace = []
    converged = False
    sweeps = 0
    for sweeps in range(1, options.max_sweeps + 1):
        Q, improved, sweep_flags = ao_sweep(Q, model, unit, rng)
        flags.extend(f for f in sweep_flags if f not in flags)
        val = abs(determinant(Q)) * rho ** model.rank
        trace.append(val)
        if sweeps >= 2:
            prev = trace[-2]
            if not improved:
                converged = True
                break
            if prev > 0 and val > 0 and abs(np.log(val) - np.log(prev)) < options.rel_tol:
                converged = True
                break
    if not converged:
        flags.append("not_converged")
    Q = Q * rho
    W, H, min_h = recover_factors(Q, model, options)
    fit = float(np.linalg.norm(X - W @ H.T) / max(np.linalg.norm(X), 1e-300))
    residuals = {
        "fit": fit,
        "min_h": min_h,
        "colsum": float(np.max(np.abs(H.sum(axis=0) - options.rho))),
    }
    return SolverResult(W=W, H=H, Q=Q, objective_trace=trace, sweeps=sweeps,
                        converged=converged, residuals=residuals, flags=flags,
                        method="proposed",
                        runtime_ms=1e3 * (time.perf_counter() - t0))
