"""Pure-Python/numpy versions of the hot kernels.

These mirror ``_core.pyx`` operation for operation; the simplex loop is
bit-identical to the compiled one.
"""
import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
GUARD = 2


def _pivot(T, basis, row, col):
    prow = T[row] / T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, prow)
    T[row] = prow
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def simplex_loop(T, basis, n_elig, max_pivots, opt_tol, piv_tol):
    """Run primal simplex pivots on tableau ``T`` in place.

    ``T`` is (m+1) x (n+1): constraint rows ``[A | b]`` then the reduced-cost
    row (minimisation). Columns ``>= n_elig`` never enter. Dantzig's rule is
    used unless the previous pivot was degenerate, in which case Bland's rule
    picks the entering column. Ratio-test ties go to the smallest basic index.

    Returns ``(status, pivots)``.
    """
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    pivots = 0
    bland = False
    while True:
        cost = T[m, :n_elig]
        if bland:
            cand = np.flatnonzero(cost < -opt_tol)
            if cand.size == 0:
                return OPTIMAL, pivots
            col = int(cand[0])
        else:
            col = int(np.argmin(cost))
            if not cost[col] < -opt_tol:
                return OPTIMAL, pivots
        column = T[:m, col]
        cmax = column.max(initial=0.0)
        if cmax < 1e-14:
            return UNBOUNDED, pivots
        rows = np.flatnonzero(column > cmax * piv_tol)
        if pivots >= max_pivots:
            return GUARD, pivots
        ratios = np.maximum(T[rows, rhs], 0.0) / column[rows]
        best = ratios.min()
        tie = 1e-12 * (1.0 + best)
        near = rows[ratios <= best + tie]
        row = int(near[np.argmin(basis[near])])
        _pivot(T, basis, row, col)
        pivots += 1
        bland = best <= tie


def hals_update(F, XtG, GtG):
    """One HALS pass over the columns of ``F`` (in place).

    Minimises ``||X - G F^T||_F^2`` over each column of ``F`` in turn with
    the other columns fixed, given ``XtG = X^T G`` and ``GtG = G^T G``.
    """
    r = F.shape[1]
    for k in range(r):
        g = GtG[k, k]
        if g <= 0.0:
            continue
        F[:, k] = np.maximum(F[:, k] + (XtG[:, k] - F @ GtG[:, k]) / g, 0.0)
