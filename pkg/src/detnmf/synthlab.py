"""Synthetic instances for the three benchmark cases, the permutation-matched
MSE, and the on-disk instance bundle.

Cases:
  sparse-w    W and H both uniform(0, 1) with a fixed fraction zeroed
  dense-w     W uniform(0, 1), H sparse
  gaussian-w  W standard normal, H sparse
"""
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CertifyBudgetExceeded, ShapeMismatch, ZeroColumn
from .geometry import NO, check_sufficiently_scattered, refute_by_sampling
from .numerics import as_matrix

CASES = ("sparse-w", "dense-w", "gaussian-w")
_ALIASES = {"sparsew": "sparse-w", "densew": "dense-w", "gaussianw": "gaussian-w",
            "case1": "sparse-w", "case2": "dense-w", "case3": "gaussian-w"}
MAX_REGENERATIONS = 20


def canonical_case(name):
    key = str(name).lower()
    if key in CASES:
        return key
    key = key.replace("-", "").replace("_", "")
    if key in _ALIASES:
        return _ALIASES[key]
    raise ValueError(f"unknown case {name!r}; expected one of {', '.join(CASES)}")


def parse_certify(mode):
    """``None``/"none" -> None, "exact" -> "exact", "sampling:K" -> ("sampling", K)."""
    if mode is None or mode == "none":
        return None
    if mode == "exact":
        return "exact"
    if isinstance(mode, tuple) and mode[0] == "sampling":
        k = int(mode[1])
    elif isinstance(mode, str) and mode.startswith("sampling"):
        _, _, k = mode.partition(":")
        k = int(k) if k else 1000
    else:
        raise ValueError(f"bad certify mode {mode!r}")
    if k < 1:
        raise ValueError("sampling count must be positive")
    return ("sampling", k)


def certify_label(mode):
    mode = parse_certify(mode)
    if mode is None:
        return "none"
    return mode if mode == "exact" else f"sampling:{mode[1]}"


def substream(*keys):
    """Generator seeded by hashing the key tuple (ints and strings)."""
    words = []
    for k in keys:
        if isinstance(k, str):
            words.append(int.from_bytes(hashlib.sha256(k.encode()).digest()[:8], "little"))
        else:
            words.append(int(k) % (1 << 64))
    return np.random.default_rng(np.random.SeedSequence(words))


def derive_seed(*keys):
    """Stable 63-bit integer seed from a key tuple."""
    return int(substream(*keys).integers(0, 1 << 63))


@dataclass
class GenSpec:
    m: int = 200
    n: int = 200
    r: int = 5
    case: str = "sparse-w"
    sparsity: float = 0.35
    rho: float = 1.0
    seed: int = 0
    certify: object = None

    def __post_init__(self):
        self.case = canonical_case(self.case)
        self.certify = parse_certify(self.certify)
        if not 0 <= self.sparsity < 1:
            raise ValueError("sparsity must lie in [0, 1)")
        if self.r < 1 or self.m < 1 or self.n < 1:
            raise ValueError("m, n and r must be positive")
        if self.r > min(self.m, self.n):
            raise ValueError("r must not exceed min(m, n)")
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass
class Instance:
    X: np.ndarray
    W_true: np.ndarray
    H_true: np.ndarray
    spec: GenSpec
    scatter_report: dict = field(default_factory=dict)
    attempts: int = 1


def scattered_factor(rows, r, sparsity, rng):
    """uniform(0, 1) entries with exactly floor(sparsity * rows * r) zeros."""
    F = rng.uniform(size=(rows, r))
    count = int(math.floor(sparsity * rows * r))
    F.flat[rng.permutation(rows * r)[:count]] = 0.0
    return F


def _certify(F, mode, seed):
    if mode == "exact":
        return check_sufficiently_scattered(F)
    return refute_by_sampling(F, mode[1], seed=seed)


def generate(spec):
    """Draw an instance; regenerated on a fresh substream until both factors
    have rank r and, when certification is on, H is not refuted."""
    for attempt in range(MAX_REGENERATIONS + 1):
        rng = substream(spec.seed, "instance", spec.case, spec.r, attempt)
        H = scattered_factor(spec.n, spec.r, spec.sparsity, rng)
        if spec.case == "sparse-w":
            W = scattered_factor(spec.m, spec.r, spec.sparsity, rng)
        elif spec.case == "dense-w":
            W = rng.uniform(size=(spec.m, spec.r))
        else:
            W = rng.standard_normal((spec.m, spec.r))
        colsum = H.sum(axis=0)
        if np.any(colsum <= 0):
            continue
        H = H / colsum * spec.rho
        W = W * (colsum / spec.rho)
        if (np.linalg.matrix_rank(H) < spec.r or np.linalg.matrix_rank(W) < spec.r):
            continue
        report = {}
        if spec.certify is not None:
            cseed = derive_seed(spec.seed, "certify", attempt)
            report["H"] = _certify(H, spec.certify, cseed)
            if report["H"].status == NO:
                continue
            if spec.case == "sparse-w":
                report["W"] = _certify(W, spec.certify, cseed)
        X = W @ H.T
        return Instance(X=X, W_true=W, H_true=H, spec=spec,
                        scatter_report=report, attempts=attempt + 1)
    raise CertifyBudgetExceeded(
        f"no acceptable instance after {MAX_REGENERATIONS} regenerations")


def _unit_columns(H, name):
    norms = np.linalg.norm(H, axis=0)
    if np.any(norms == 0):
        raise ZeroColumn(f"{name} has a zero column")
    return H / norms


def mse(H_est, H_ref):
    """Mean squared distance between l2-normalised columns, minimised over
    column permutations (solved as a linear assignment).

    Column costs below the rounding bound of the normalisation,
    ``4 ((m + 3) eps)^2``, are set to zero so that ``mse(H, H P D)`` is
    exactly 0 for a permutation P and positive diagonal D.
    """
    A = as_matrix(H_est, "H_est")
    B = as_matrix(H_ref, "H_ref")
    if A.shape != B.shape:
        raise ShapeMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    A = _unit_columns(A, "H_est")
    B = _unit_columns(B, "H_ref")
    diff = B[:, :, None] - A[:, None, :]
    cost = np.einsum("ikj,ikj->kj", diff, diff)
    cost[cost <= 4.0 * ((A.shape[0] + 3) * np.finfo(np.float64).eps) ** 2] = 0.0
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum() / A.shape[1])


# ---------------------------------------------------------------------------
# bundle I/O

def format_matrix(M):
    lines = [",".join(format(float(v), ".17g") for v in row) for row in np.atleast_2d(M)]
    return "\n".join(lines) + "\n"


def write_matrix(path, M):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_matrix(M))


def read_matrix(path):
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    data = [[float(tok) for tok in row.split(",")] for row in rows]
    if len({len(r) for r in data}) != 1:
        raise ShapeMismatch(f"{path}: ragged rows")
    return np.array(data, dtype=np.float64)


def _verdict_dict(v):
    return None if v is None else v.to_dict()


def write_bundle(directory, inst):
    os.makedirs(directory, exist_ok=True)
    write_matrix(os.path.join(directory, "X.csv"), inst.X)
    write_matrix(os.path.join(directory, "W.csv"), inst.W_true)
    write_matrix(os.path.join(directory, "H.csv"), inst.H_true)
    spec = inst.spec
    meta = {
        "m": spec.m, "n": spec.n, "r": spec.r, "case": spec.case,
        "sparsity": spec.sparsity, "rho": spec.rho, "seed": spec.seed,
        "certify": certify_label(spec.certify),
        "verdict": {k: _verdict_dict(v) for k, v in sorted(inst.scatter_report.items())},
        "attempts": inst.attempts,
    }
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_bundle(directory):
    """Returns ``(X, W, H, meta)``; W, H and meta are None when absent."""
    def opt(name):
        p = os.path.join(directory, name)
        return read_matrix(p) if os.path.exists(p) else None
    X = read_matrix(os.path.join(directory, "X.csv"))
    meta = None
    mp = os.path.join(directory, "meta.json")
    if os.path.exists(mp):
        with open(mp, encoding="utf-8") as fh:
            meta = json.load(fh)
    return X, opt("W.csv"), opt("H.csv"), meta


def spec_dict(spec):
    d = asdict(spec)
    d["certify"] = certify_label(spec.certify)
    return d
