"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel timings call both backends directly on identical inputs and also
check that they agree. ``--end-to-end`` additionally times full solves in
subprocesses with and without ``DETNMF_PURE_PYTHON=1``.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from detnmf import kernels


def slack_tableau(m, n, rng):
    """Tableau of max c.x s.t. A x <= b, x >= 0 with the slack basis
    (minimisation form, so the cost row holds -c)."""
    A = rng.uniform(0.0, 1.0, size=(m, n))
    b = rng.uniform(1.0, 2.0, size=m)
    c = rng.uniform(0.0, 1.0, size=n)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = np.arange(n, n + m, dtype=np.int64)
    return T, basis


def time_simplex(mod, m, n, repeat, seed):
    best = np.inf
    result = None
    for k in range(repeat):
        T, basis = slack_tableau(m, n, np.random.default_rng(seed))
        t0 = time.perf_counter()
        status, piv = mod.simplex_loop(T, basis, T.shape[1] - 1, 100000, 1e-11, 1e-10)
        best = min(best, time.perf_counter() - t0)
        result = (status, piv, T[-1, -1])
    return best, result


def time_hals(mod, M, N, r, sweeps, repeat, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(M, r)) @ rng.uniform(size=(r, N))
    best = np.inf
    out = None
    for _ in range(repeat):
        W = np.ascontiguousarray(np.random.default_rng(seed + 1).uniform(size=(M, r)))
        H = np.ascontiguousarray(np.random.default_rng(seed + 2).uniform(size=(N, r)))
        t0 = time.perf_counter()
        for _ in range(sweeps):
            mod.hals_update(H, X.T @ W, W.T @ W)
            mod.hals_update(W, X @ H, H.T @ H)
        best = min(best, time.perf_counter() - t0)
        out = np.linalg.norm(X - W @ H.T)
    return best, out


def end_to_end(pure):
    code = ("import time, numpy as np\n"
            "from detnmf import generate, GenSpec, solve_proposed, solve_volmin_mves, solve_plain_nmf\n"
            "inst = generate(GenSpec(r=5, case='dense-w', seed=3))\n"
            "t = {}\n"
            "for name, f in (('proposed', solve_proposed), ('volmin', solve_volmin_mves),"
            " ('plain', solve_plain_nmf)):\n"
            "    t0 = time.perf_counter(); f(inst.X, 5); t[name] = time.perf_counter() - t0\n"
            "print(' '.join(f'{k}={v:.3f}' for k, v in t.items()))\n")
    env = dict(os.environ)
    if pure:
        env["DETNMF_PURE_PYTHON"] = "1"
    else:
        env.pop("DETNMF_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return out.stdout.strip()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':32s}" + "".join(f"{name:>12s}" for name in mods) + "   agree")
    for m, n in ((20, 40), (60, 120), (150, 300)):
        times, results = [], []
        for mod in mods.values():
            t, res = time_simplex(mod, m, n, args.repeat, seed=m)
            times.append(t)
            results.append(res)
        agree = all(r == results[0] for r in results)
        label = f"simplex {m}x{n} ({results[0][1]} pivots)"
        print(f"{label:32s}" + "".join(f"{1e3 * t:10.2f}ms" for t in times) + f"   {agree}")
    for M, N, r in ((200, 200, 5), (200, 200, 10)):
        times, results = [], []
        for mod in mods.values():
            t, res = time_hals(mod, M, N, r, 100, args.repeat, seed=r)
            times.append(t)
            results.append(res)
        agree = all(abs(x - results[0]) <= 1e-9 * max(1.0, abs(results[0])) for x in results)
        label = f"hals {M}x{N} r={r} (100 sweeps)"
        print(f"{label:32s}" + "".join(f"{1e3 * t:10.2f}ms" for t in times) + f"   {agree}")
    if args.end_to_end:
        print("end-to-end seconds (dense-w, r=5):")
        print("  compiled:", end_to_end(pure=False))
        print("  fallback:", end_to_end(pure=True))


if __name__ == "__main__":
    main()
