"""Small dense linear programs by the two-phase tableau simplex method.

Problems have the form::

    maximize    c @ x
    subject to  A @ x >= b
                E @ x == f
                lower <= x <= upper      (optional, entries may be infinite)

with ``x`` otherwise free. When inequalities far outnumber variables the
Lagrangian dual (a tableau with one row per variable) is solved instead and
the primal vertex is read off the optimal dual basis. Either way the returned
vertex is polished by solving its active constraints directly.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._fallback import _pivot
from .errors import CycleGuardExceeded

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_OPT_TOL = 1e-11
_PIV_TOL = 1e-10


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    E: np.ndarray = None
    f: np.ndarray = None
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        n = self.c.size
        self.A, self.b = _pair(self.A, self.b, n, "A", "b")
        self.E, self.f = _pair(self.E, self.f, n, "E", "f")
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                v = np.broadcast_to(np.asarray(v, dtype=np.float64), (n,)).copy()
                setattr(self, name, v)

    @property
    def n_vars(self):
        return self.c.size


def _pair(M, v, n, mname, vname):
    if M is None:
        return np.zeros((0, n)), np.zeros(0)
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    v = np.asarray(v, dtype=np.float64).ravel()
    if M.shape[1] != n:
        raise ValueError(f"{mname} has {M.shape[1]} columns, expected {n}")
    if v.size != M.shape[0]:
        raise ValueError(f"{vname} has length {v.size}, expected {M.shape[0]}")
    return M, v


@dataclass
class LpOutcome:
    status: str
    x: np.ndarray = None
    value: float = None
    pivots: int = 0
    route: str = ""
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL


def _row_scale(M):
    return np.abs(M).max(axis=1) if M.size else np.zeros(M.shape[0])


# rows this small relative to the largest row are rounding noise of an
# exactly zero row; equilibrating them would turn noise into constraints
_NULL_ROW = 1e-13


def _scaled(M, v, feas_tol, equality, ref):
    """Scale rows to unit max-norm; ``None`` if a zero row is violated."""
    sc = _row_scale(M)
    zero = sc <= _NULL_ROW * ref
    bad = np.abs(v[zero]) > feas_tol if equality else v[zero] > feas_tol
    if np.any(bad):
        return None
    keep = ~zero
    return M[keep] / sc[keep, None], v[keep] / sc[keep]


_CHUNK = 256


class _Budget:
    """Pivot counter shared by every phase of one solve."""

    def __init__(self, limit):
        self.limit = limit
        self.used = 0

    def charge(self, count):
        self.used += count
        if self.used > self.limit:
            raise CycleGuardExceeded(f"simplex exceeded {self.limit} pivots")


def _tableau(M, rhs, cost, basis):
    """Tableau for ``basis`` computed from the original data."""
    m, n = M.shape
    T = np.empty((m + 1, n + 1))
    B = M[:, basis]
    T[:m] = np.linalg.solve(B, np.column_stack([M, rhs]))
    T[:m, basis] = np.eye(m)
    T[m, :n] = cost
    T[m, n] = 0.0
    T[m] -= cost[basis] @ T[:m]
    T[m, basis] = 0.0
    return T


def _iterate(M, rhs, cost, basis, n_elig, budget):
    """Pivot to optimality, refactorising the tableau every ``_CHUNK`` pivots
    and once more at the end so that accumulated rounding never decides the
    outcome."""
    while True:
        T = _tableau(M, rhs, cost, basis)
        status, count = kernels.simplex_loop(T, basis, n_elig, _CHUNK,
                                             _OPT_TOL, _PIV_TOL)
        budget.charge(count)
        if status == kernels.UNBOUNDED or (status == kernels.OPTIMAL and count == 0):
            return status, T


def _two_phase(M, rhs, cost, budget, feas_tol):
    """Minimise ``cost @ z`` over ``M z = rhs, z >= 0``.

    Returns ``(status, T, basis)``; T covers the rows that survived
    redundancy elimination and the columns of ``M`` plus the rhs.
    """
    m, n = M.shape
    neg = rhs < 0
    M = M.copy()
    rhs = rhs.copy()
    M[neg] *= -1.0
    rhs[neg] *= -1.0
    # unit columns already present can start the basis
    basis = np.full(m, -1, dtype=np.int64)
    nz = M != 0
    for j in np.flatnonzero(nz.sum(axis=0) == 1):
        i = int(np.argmax(nz[:, j]))
        if M[i, j] == 1.0 and basis[i] < 0:
            basis[i] = j
    need = np.flatnonzero(basis < 0)
    n_art = need.size
    if n_art:
        M1 = np.zeros((m, n + n_art))
        M1[:, :n] = M
        M1[need, n + np.arange(n_art)] = 1.0
        basis[need] = n + np.arange(n_art)
        cost1 = np.zeros(n + n_art)
        cost1[n:] = 1.0
        _, T = _iterate(M1, rhs, cost1, basis, n + n_art, budget)
        scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
        if -T[m, -1] > feas_tol * scale:
            return INFEASIBLE, None, None
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n:
                row = np.abs(T[i, :n])
                j = int(np.argmax(row))
                if row[j] > _PIV_TOL:
                    _pivot(T, basis, i, j)
                else:
                    keep[i] = False
        M = M[keep]
        rhs = rhs[keep]
        basis = basis[keep].copy()
    status, T = _iterate(M, rhs, cost, basis, n, budget)
    return (UNBOUNDED if status == kernels.UNBOUNDED else OPTIMAL), T, basis


def _violation(x, A, b, E, f, lo, up):
    """Largest constraint violation of ``x`` (0 when feasible)."""
    v = 0.0
    if A.shape[0]:
        v = max(v, float(np.max(b - A @ x)))
    if E.shape[0]:
        v = max(v, float(np.max(np.abs(E @ x - f))))
    v = max(v, float(np.max(lo - x, initial=0.0)), float(np.max(x - up, initial=0.0)))
    return v


def _solve_active(rows, rhs, n, fixed, fixed_vals):
    """Solve the active system with some variables pinned to their bounds.

    Returns the vertex or ``None`` when the system does not determine one.
    """
    x = np.zeros(n)
    x[fixed] = fixed_vals
    rest = np.flatnonzero(~fixed)
    if rest.size == 0:
        return x
    if rows.shape[0] < rest.size:
        return None
    sub = rows[:, rest]
    sol, _, rank, _ = np.linalg.lstsq(sub, rhs - rows[:, fixed] @ fixed_vals, rcond=None)
    if rank < rest.size:
        return None
    x[rest] = sol
    return x


def _solve_primal(c, A, b, E, f, lo, up, budget, feas_tol):
    """Standard-form primal: variables with a finite lower bound are shifted,
    the others split into positive and negative parts; upper bounds become
    rows."""
    n, q = c.size, E.shape[0]
    lv = np.isfinite(lo)
    uv = np.flatnonzero(np.isfinite(up))
    shift = np.where(lv, lo, 0.0)
    free = np.flatnonzero(~lv)
    G = np.vstack([A, -np.eye(n)[uv]])
    g = np.concatenate([b, -up[uv]])
    gk = g - G @ shift
    fk = f - E @ shift
    p, nf = G.shape[0], free.size
    # columns: x (n), negative part of free x (nf), slack (p)
    M = np.zeros((p + q, n + nf + p))
    M[:p, :n] = G
    M[:p, n:n + nf] = -G[:, free]
    M[:p, n + nf:] = -np.eye(p)
    M[p:, :n] = E
    M[p:, n:n + nf] = -E[:, free]
    rhs = np.concatenate([gk, fk])
    cost = np.concatenate([-c, c[free], np.zeros(p)])
    status, T, basis = _two_phase(M, rhs, cost, budget, feas_tol)
    if status != OPTIMAL:
        return status, None
    z = np.zeros(n + nf + p)
    z[basis] = T[:-1, -1]
    x = z[:n] + shift
    x[free] -= z[n:n + nf]
    # polish: nonbasic slacks and nonbasic shifted variables are tight
    tight = np.ones(p, dtype=bool)
    tight[basis[basis >= n + nf] - n - nf] = False
    at_lower = lv.copy()
    at_lower[basis[basis < n]] = False
    rows = np.vstack([G[tight], E])
    rhs_a = np.concatenate([g[tight], f])
    sol = _solve_active(rows, rhs_a, n, at_lower, lo[at_lower])
    if sol is not None:
        before = _violation(x, A, b, E, f, lo, up)
        if _violation(sol, A, b, E, f, lo, up) <= max(before, feas_tol):
            x = sol
    return OPTIMAL, x


def _solve_dual(c, A, b, E, f, lo, up, budget, feas_tol):
    """Solve through ``min -g.l - f.mu  s.t. G^T l + E^T mu = -c, l >= 0``
    where ``G x >= g`` collects the inequalities and bounds.

    Returns ``None`` when the route cannot decide (dual infeasible, dual
    unbounded or the recovered vertex is not usable); the caller then falls
    back to the primal. A dual ray found at the pivot tolerance is not proof
    of primal infeasibility, so that verdict is left to the primal phase 1.
    """
    n, q = c.size, E.shape[0]
    eye = np.eye(n)
    lv, uv = np.isfinite(lo), np.isfinite(up)
    G = np.vstack([A, eye[lv], -eye[uv]])
    g = np.concatenate([b, lo[lv], -up[uv]])
    p = G.shape[0]
    M = np.hstack([G.T, E.T, -E.T])
    cost = np.concatenate([-g, -f, f])
    status, T, basis = _two_phase(M, -c, cost, budget, feas_tol)
    if status != OPTIMAL or basis.size < n:
        return None
    # complementary slackness: basic multipliers mark tight primal rows
    ineq = basis[basis < p]
    rows = np.vstack([G[ineq], E])
    rhs = np.concatenate([g[ineq], f])
    sol = _solve_active(rows, rhs, n, np.zeros(n, dtype=bool), np.zeros(0))
    if sol is None:
        return None
    scale = max(1.0, float(np.abs(np.concatenate([g, f])).max(initial=0.0)))
    if _violation(sol, A, b, E, f, lo, up) > feas_tol * scale:
        return None
    return OPTIMAL, sol


def solve_lp(lp, feas_tol=1e-9, route="auto"):
    """Solve ``lp``; see the module docstring for the problem form.

    ``route`` is ``"primal"``, ``"dual"`` or ``"auto"`` (dual when there are
    at least four inequalities, bounds included, per variable). Raises
    ``CycleGuardExceeded`` when more than ``50 * (vars + constraints)`` pivots
    are needed.
    """
    if feas_tol <= 0:
        raise ValueError("feas_tol must be positive")
    n = lp.n_vars
    ref = max(_row_scale(lp.A).max(initial=0.0), _row_scale(lp.E).max(initial=0.0))
    ineq = _scaled(lp.A, lp.b, feas_tol, equality=False, ref=ref)
    eq = _scaled(lp.E, lp.f, feas_tol, equality=True, ref=ref)
    if ineq is None or eq is None:
        return LpOutcome(INFEASIBLE, route="trivial")
    A, b = ineq
    E, f = eq
    lo = lp.lower if lp.lower is not None else np.full(n, -np.inf)
    up = lp.upper if lp.upper is not None else np.full(n, np.inf)
    if np.any(lo > up + feas_tol):
        return LpOutcome(INFEASIBLE, route="trivial")
    n_ineq = A.shape[0] + int(np.isfinite(lo).sum()) + int(np.isfinite(up).sum())
    cscale = float(np.abs(lp.c).max(initial=0.0))
    c = lp.c / cscale if cscale > 0 else lp.c.copy()
    budget = _Budget(50 * (n + n_ineq + E.shape[0]))
    if route == "auto":
        route = "dual" if n_ineq >= 4 * n else "primal"
    result = None
    used = route
    if route == "dual":
        result = _solve_dual(c, A, b, E, f, lo, up, budget, feas_tol)
    if result is None:
        used = "primal"
        result = _solve_primal(c, A, b, E, f, lo, up, budget, feas_tol)
    status, x = result
    if status != OPTIMAL:
        return LpOutcome(status, pivots=budget.used, route=used)
    return LpOutcome(OPTIMAL, x=x, value=float(lp.c @ x), pivots=budget.used,
                     route=used)
