"""Independent brute-force oracles used by the test-suite.

Nothing in here calls into the code under test.
"""
import itertools

import numpy as np


def lp_vertex_enumeration(c, A, b, lower, upper, E=None, f=None, tol=1e-9):
    """Maximise ``c @ x`` over a bounded polytope by trying every vertex.

    Returns ``(value, x)`` or ``(None, None)`` when no vertex is feasible.
    """
    n = len(c)
    rows = [A, np.eye(n), -np.eye(n)]
    rhs = [b, lower, -upper]
    G = np.vstack(rows)
    g = np.concatenate(rhs)
    if E is None:
        E = np.zeros((0, n))
        f = np.zeros(0)
    q = E.shape[0]
    k = n - q
    combos = np.array(list(itertools.combinations(range(G.shape[0]), k)), dtype=int)
    if combos.size == 0:
        combos = np.zeros((1, 0), dtype=int)
    systems = np.concatenate([G[combos], np.broadcast_to(E, (len(combos), q, n))], axis=1)
    rhs_s = np.concatenate([g[combos], np.broadcast_to(f, (len(combos), q))], axis=1)
    dets = np.linalg.det(systems)
    ok = np.abs(dets) > 1e-10
    if not np.any(ok):
        return None, None
    xs = np.linalg.solve(systems[ok], rhs_s[ok][..., None])[..., 0]
    feas = np.all(xs @ G.T >= g - tol, axis=1)
    if q:
        feas &= np.all(np.abs(xs @ E.T - f) <= tol, axis=1)
    if not np.any(feas):
        return None, None
    xs = xs[feas]
    vals = xs @ c
    i = int(np.argmax(vals))
    return float(vals[i]), xs[i]


def dual_rays_bruteforce(H, tol=1e-9):
    """Extreme rays of ``{y : H y >= 0}`` by exhaustive active-set search."""
    N, r = H.shape
    rays = []
    for subset in itertools.combinations(range(N), r - 1):
        S = H[list(subset)]
        if r > 1:
            _, sv, vt = np.linalg.svd(S)
            if np.sum(sv > 1e-10 * max(1.0, sv[0])) != r - 1:
                continue
            y = vt[-1]
        else:
            y = np.ones(1)
        for cand in (y, -y):
            hy = H @ cand
            if np.all(hy >= -tol * np.linalg.norm(H, axis=1)):
                cand = cand / np.linalg.norm(cand)
                if not any(np.linalg.norm(cand - z) < 1e-8 for z in rays):
                    rays.append(cand)
    return rays


def same_directions(a, b, tol=1e-8):
    """Compare two collections of unit vectors as unordered sets."""
    if len(a) != len(b):
        return False
    used = [False] * len(b)
    for u in a:
        for j, v in enumerate(b):
            if not used[j] and np.linalg.norm(np.asarray(u) - np.asarray(v)) < tol:
                used[j] = True
                break
        else:
            return False
    return True


def mse_bruteforce(H_est, H_ref):
    """Permutation-minimised MSE by enumerating all permutations."""
    A = H_ref / np.linalg.norm(H_ref, axis=0)
    B = H_est / np.linalg.norm(H_est, axis=0)
    r = A.shape[1]
    best = np.inf
    for perm in itertools.permutations(range(r)):
        val = np.sum((A - B[:, list(perm)]) ** 2) / r
        best = min(best, val)
    return best


def det_cofactor_expansion(Q, row=0):
    """Recursive Laplace expansion along ``row``."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n == 1:
        return Q[0, 0]
    if n == 2:
        return Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0]
    total = 0.0
    for j in range(n):
        sub = np.delete(np.delete(Q, row, axis=0), j, axis=1)
        total += (-1) ** (row + j) * Q[row, j] * det_cofactor_expansion(sub, 0)
    return total


def project_simplex_kkt(v, rho=1.0):
    """Euclidean projection onto ``{h >= 0, sum h = rho}`` by bisection on the
    KKT threshold ``tau`` with ``sum max(v - tau, 0) = rho``."""
    v = np.asarray(v, dtype=float)
    lo, hi = v.min() - rho, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0).sum() > rho:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0)
