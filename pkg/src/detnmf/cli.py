"""Command line entry point: ``detnmf {gen,solve,check,mse,bench}``.

Exit codes: 0 success, 2 invalid arguments or input shapes, 3 certification
budget exhausted, 4 solver or numeric failure, 5 ``check`` refuted the
sufficiently scattered condition.
"""
import argparse
import csv
import io
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geometry, synthlab
from .baselines import BaselineOptions, solve_plain_nmf, solve_regularized, solve_volmin_mves
from .errors import CertifyBudgetExceeded, DetNMFError, ShapeMismatch, ZeroColumn
from .solver import SolverOptions, solve_proposed

log = logging.getLogger("detnmf")

EXIT_OK, EXIT_USAGE, EXIT_CERTIFY, EXIT_SOLVER, EXIT_REFUTED = 0, 2, 3, 4, 5
METHODS = ("proposed", "volmin", "plain", "regularized")
DEFAULT_BENCH_METHODS = ("proposed", "volmin", "plain")
RESULT_COLUMNS = ("method", "case", "r", "trial", "seed", "mse", "fit_residual",
                  "runtime_ms", "converged", "flags")


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _fraction(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not 0 <= v < 1:
        raise argparse.ArgumentTypeError("must lie in [0, 1)")
    return v


def _certify_arg(text):
    try:
        return synthlab.certify_label(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err))


def _fmt(v):
    if v is None:
        return "nan"
    return format(float(v), ".17g")


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.generic):
        return _json_safe(v.item())
    return v


def _write_json(path, obj):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# gen

def cmd_gen(args):
    spec = synthlab.GenSpec(m=args.m, n=args.n, r=args.rank, case=args.case,
                            sparsity=args.sparsity, rho=args.rho, seed=args.seed,
                            certify=args.certify)
    try:
        inst = synthlab.generate(spec)
    except CertifyBudgetExceeded as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CERTIFY
    synthlab.write_bundle(args.out, inst)
    zeros = int(np.count_nonzero(inst.H_true == 0))
    print(f"wrote {args.out}: X {inst.X.shape[0]}x{inst.X.shape[1]}, r={spec.r}, "
          f"case={spec.case}, zeros in H={zeros}, attempts={inst.attempts}")
    for name, v in sorted(inst.scatter_report.items()):
        print(f"{name}: separable={v.separable} sufficiently_scattered={v.status} ({v.mode})")
    if not inst.scatter_report:
        print("certification: none")
    return EXIT_OK


# ---------------------------------------------------------------------------
# solve

def run_method(method, X, r, seed=0, tol=None, max_sweeps=None, lam=None, rho=1.0):
    """Dispatch one solve; returns ``(result, options_dict)``."""
    if method == "proposed":
        kw = {"seed": seed, "rho": rho}
        if tol is not None:
            kw["rel_tol"] = tol
        if max_sweeps is not None:
            kw["max_sweeps"] = max_sweeps
        opts = SolverOptions(**kw)
        return solve_proposed(X, r, opts), asdict(opts)
    kw = {"seed": seed, "rho": rho}
    if tol is not None:
        kw["rel_tol"] = tol
    if max_sweeps is not None:
        kw["max_iters"] = max_sweeps
    if method == "plain":
        kw["clip_negative_input"] = True
        opts = BaselineOptions(**kw)
        return solve_plain_nmf(X, r, opts), asdict(opts)
    if method == "volmin":
        opts = BaselineOptions(**kw)
        return solve_volmin_mves(X, r, opts), asdict(opts)
    if method == "regularized":
        kw["lam"] = 0.0 if lam is None else lam
        opts = BaselineOptions(**kw)
        return solve_regularized(X, r, opts), asdict(opts)
    raise UsageError(f"unknown method {method!r}")


def _load_input(path):
    if os.path.isdir(path):
        X, _, H, meta = synthlab.read_bundle(path)
        return X, H, meta
    return synthlab.read_matrix(path), None, None


def cmd_solve(args):
    try:
        X, H_ref, meta = _load_input(args.input)
    except (OSError, ValueError) as err:
        print(f"error: cannot read input: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.rank > min(X.shape):
        print(f"error: rank {args.rank} exceeds min{X.shape}", file=sys.stderr)
        return EXIT_USAGE
    rho = args.rho if args.rho is not None else float((meta or {}).get("rho", 1.0))
    try:
        res, opts = run_method(args.method, X, args.rank, seed=args.seed, tol=args.tol,
                               max_sweeps=args.max_sweeps, lam=args.lam, rho=rho)
    except (DetNMFError, np.linalg.LinAlgError) as err:
        print(f"error: {args.method} failed: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_SOLVER
    stem = os.path.splitext(args.out)[0]
    w_path, h_path = stem + "_W.csv", stem + "_H.csv"
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    synthlab.write_matrix(w_path, res.W)
    synthlab.write_matrix(h_path, res.H)
    out = {
        "method": args.method,
        "rank": args.rank,
        "input": args.input,
        "options": {k: v for k, v in opts.items() if k != "init"},
        "W": os.path.basename(w_path),
        "H": os.path.basename(h_path),
        "objective_trace": [float(v) for v in res.objective_trace],
        "residuals": res.residuals,
        "converged": res.converged,
        "sweeps": res.sweeps,
        "flags": res.flags,
        "runtime_ms": res.runtime_ms,
    }
    if H_ref is not None:
        try:
            out["mse"] = synthlab.mse(res.H, H_ref)
        except (ShapeMismatch, ZeroColumn) as err:
            out["mse"] = None
            out["mse_error"] = f"{type(err).__name__}: {err}"
    _write_json(args.out, out)
    msg = f"{args.method}: converged={res.converged} sweeps={res.sweeps} fit={res.residuals['fit']:.3e}"
    if out.get("mse") is not None:
        msg += f" mse={out['mse']:.6e}"
    if res.flags:
        msg += " flags=" + ",".join(res.flags)
    print(msg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check

def cmd_check(args):
    try:
        H = synthlab.read_matrix(args.h)
    except (OSError, ValueError) as err:
        print(f"error: cannot read {args.h}: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        separable, witnesses = geometry.check_separability(H, args.tol)
        if args.exact:
            verdict = geometry.check_sufficiently_scattered(H, args.tol)
        else:
            verdict = geometry.refute_by_sampling(H, args.samples, seed=args.seed, tol=args.tol)
    except (DetNMFError, np.linalg.LinAlgError) as err:
        print(f"error: check failed: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    print(f"separable: {'true' if separable else 'false'}")
    if separable:
        print("witnesses: " + ", ".join(f"e{k}<-row {v}" for k, v in sorted(witnesses.items())))
    print(f"sufficiently_scattered: {verdict.status} ({verdict.mode})")
    cert = verdict.certificate or {}
    if verdict.status == geometry.NO:
        kind = cert.get("kind", "")
        vec = cert.get("ray", cert.get("point", cert.get("direction")))
        if vec is not None:
            vec = "(" + ", ".join(_fmt(v) for v in np.ravel(vec)) + ")"
        print(f"certificate: {kind} {vec or ''}".rstrip())
    report = verdict.to_dict()
    report["separable"] = bool(separable)
    report["input"] = args.h
    path = args.report or (os.path.splitext(args.h)[0] + "_check.json")
    _write_json(path, report)
    print(f"report: {path}")
    return EXIT_REFUTED if verdict.status == geometry.NO else EXIT_OK


# ---------------------------------------------------------------------------
# mse

def cmd_mse(args):
    try:
        A = synthlab.read_matrix(args.est)
        B = synthlab.read_matrix(args.ref)
        v = synthlab.mse(A, B)
    except (OSError, ValueError, ShapeMismatch, ZeroColumn) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    print(_fmt(v))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

@dataclass
class BenchConfig:
    cases: list = field(default_factory=lambda: list(synthlab.CASES))
    ranks: list = field(default_factory=lambda: [5, 10])
    m: int = 200
    n: int = 200
    trials: int = 10
    seed: int = 0
    methods: list = field(default_factory=lambda: list(DEFAULT_BENCH_METHODS))
    sparsity: float = 0.35
    lam: float = 0.0
    tol: float = None
    max_sweeps: int = None
    out: str = "bench_out"
    threads: int = None
    record_runtime: bool = False

    def __post_init__(self):
        self.cases = [synthlab.canonical_case(c) for c in self.cases]
        self.methods = list(self.methods)
        for mth in self.methods:
            if mth not in METHODS:
                raise ValueError(f"unknown method {mth!r}")
        if not self.cases or not self.methods or not self.ranks:
            raise ValueError("cases, methods and ranks must be non-empty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(int(r) < 1 or int(r) > min(self.m, self.n) for r in self.ranks):
            raise ValueError("ranks must lie in 1..min(m, n)")
        self.ranks = [int(r) for r in self.ranks]


@dataclass
class TrialRecord:
    method: str
    case: str
    r: int
    trial: int
    seed: int
    mse: float
    fit_residual: float
    runtime_ms: float
    converged: bool
    flags: list

    def row(self, record_runtime):
        return [self.method, self.case, str(self.r), str(self.trial), str(self.seed),
                _fmt(self.mse), _fmt(self.fit_residual),
                _fmt(self.runtime_ms) if record_runtime else "nan",
                "true" if self.converged else "false", ";".join(self.flags)]


def instance_seed(seed, case, r, trial):
    """Seed of the instance shared by every method for one trial."""
    return synthlab.derive_seed(seed, case, r, trial)


def trial_seed(seed, case, r, method, trial):
    return synthlab.derive_seed(seed, case, r, method, trial)


def trace_is_monotone(trace, increasing, rel=1e-12):
    t = np.asarray(trace, dtype=np.float64)
    if t.size < 2:
        return True
    d = np.diff(t)
    slack = rel * np.abs(t[:-1])
    return bool(np.all(d >= -slack) if increasing else np.all(d <= slack))


def run_trial(job):
    """One (method, case, r, trial) job; never raises."""
    method, case, r, trial, cfg = job
    seed = trial_seed(cfg["seed"], case, r, method, trial)
    spec = synthlab.GenSpec(m=cfg["m"], n=cfg["n"], r=r, case=case,
                            sparsity=cfg["sparsity"],
                            seed=instance_seed(cfg["seed"], case, r, trial))
    t0 = time.perf_counter()
    try:
        inst = synthlab.generate(spec)
        res, _ = run_method(method, inst.X, r, seed=seed, tol=cfg["tol"],
                            max_sweeps=cfg["max_sweeps"], lam=cfg["lam"])
        flags = list(res.flags)
        if not trace_is_monotone(res.objective_trace, increasing=(method == "proposed")):
            flags.append("nonmonotone")
        return TrialRecord(method, case, r, trial, seed, synthlab.mse(res.H, inst.H_true),
                           res.residuals["fit"], 1e3 * (time.perf_counter() - t0),
                           res.converged, flags)
    except Exception as err:  # recorded, not fatal
        return TrialRecord(method, case, r, trial, seed, math.nan, math.nan,
                           1e3 * (time.perf_counter() - t0), False,
                           [f"error:{type(err).__name__}"])


def run_bench(cfg):
    """Run every job of ``cfg``; returns records sorted by (method, case, r, trial)."""
    shared = {"seed": cfg.seed, "m": cfg.m, "n": cfg.n, "sparsity": cfg.sparsity,
              "tol": cfg.tol, "max_sweeps": cfg.max_sweeps, "lam": cfg.lam}
    jobs = [(mth, case, r, t, shared) for mth in cfg.methods for case in cfg.cases
            for r in cfg.ranks for t in range(cfg.trials)]
    threads = cfg.threads or os.cpu_count() or 1
    if threads <= 1 or len(jobs) == 1:
        records = [run_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            records = list(pool.map(run_trial, jobs))
    records.sort(key=lambda rec: (rec.method, rec.case, rec.r, rec.trial))
    return records


def results_csv(records, record_runtime=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for rec in records:
        w.writerow(rec.row(record_runtime))
    return buf.getvalue()


def read_results(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _cells(records):
    cells = {}
    for rec in records:
        cells.setdefault((rec.method, rec.r, rec.case), []).append(rec)
    return cells


def summary_md(records, cfg):
    cells = _cells(records)
    rows = [(m, r) for m in cfg.methods for r in cfg.ranks]
    out = ["# Benchmark summary", "",
           f"m={cfg.m}, n={cfg.n}, trials={cfg.trials}, seed={cfg.seed}, "
           f"sparsity={cfg.sparsity}", ""]
    for title, stat in (("Mean MSE of H", statistics.fmean),
                        ("Median MSE of H", statistics.median),
                        ("Max MSE of H", max)):
        out.append(f"## {title}")
        out.append("")
        out.append("| Method | " + " | ".join(cfg.cases) + " |")
        out.append("|---|" + "---|" * len(cfg.cases))
        for m, r in rows:
            vals = []
            for case in cfg.cases:
                ok = [rec.mse for rec in cells.get((m, r, case), []) if math.isfinite(rec.mse)]
                vals.append(f"{stat(ok):.3e}" if ok else "n/a")
            out.append(f"| {m} (r={r}) | " + " | ".join(vals) + " |")
        out.append("")
    failed = [rec for rec in records if not math.isfinite(rec.mse)]
    out.append(f"Failed trials: {len(failed)}")
    for rec in failed:
        out.append(f"- {rec.method} {rec.case} r={rec.r} trial {rec.trial}: {';'.join(rec.flags)}")
    return "\n".join(out) + "\n"


def _bench_config(args):
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    for key in ("cases", "ranks", "m", "n", "trials", "seed", "methods", "sparsity",
                "tol", "max_sweeps", "out", "threads"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.lam is not None:
        data["lam"] = args.lam
    if args.record_runtime:
        data["record_runtime"] = True
    data.pop("lambda", None)
    return BenchConfig(**data)


def cmd_bench(args):
    try:
        cfg = _bench_config(args)
    except (OSError, ValueError, TypeError) as err:
        print(f"error: bad bench configuration: {err}", file=sys.stderr)
        return EXIT_USAGE
    records = run_bench(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "results.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(results_csv(records, cfg.record_runtime))
    with open(os.path.join(cfg.out, "timings.csv"), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "case", "r", "trial", "runtime_ms"))
        for rec in records:
            w.writerow((rec.method, rec.case, rec.r, rec.trial, _fmt(rec.runtime_ms)))
    text = summary_md(records, cfg)
    with open(os.path.join(cfg.out, "summary.md"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(text, end="")
    cells = _cells(records)
    ok = all(any(math.isfinite(rec.mse) for rec in cells.get((m, r, c), []))
             for m in cfg.methods for r in cfg.ranks for c in cfg.cases)
    return EXIT_OK if ok else EXIT_SOLVER


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="detnmf", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic instance bundle")
    g.add_argument("--case", required=True, choices=synthlab.CASES)
    g.add_argument("--m", type=_positive_int, default=200)
    g.add_argument("--n", type=_positive_int, default=200)
    g.add_argument("--rank", type=_positive_int, required=True)
    g.add_argument("--sparsity", type=_fraction, default=0.35)
    g.add_argument("--rho", type=_positive_float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--certify", type=_certify_arg, default="none",
                   help="none | sampling:K | exact")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="factor one matrix")
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--input", required=True, help="bundle directory or X.csv")
    s.add_argument("--rank", type=_positive_int, required=True)
    s.add_argument("--tol", type=_positive_float, default=None, help="relative stopping tolerance")
    s.add_argument("--max-sweeps", type=_positive_int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="determinant weight (regularized only)")
    s.add_argument("--rho", type=_positive_float, default=None,
                   help="column sum of H (default: bundle value or 1)")
    s.add_argument("--out", required=True, help="result.json path")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("check", help="separability and sufficiently-scattered check of H")
    c.add_argument("--h", required=True, help="H.csv (rows = samples)")
    mode = c.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", help="exact extreme-ray test (small r)")
    mode.add_argument("--samples", type=_positive_int, default=1000,
                      help="boundary samples for the refuter (default 1000)")
    c.add_argument("--tol", type=_positive_float, default=1e-9)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--report", default=None, help="report path (default <H>_check.json)")
    c.set_defaults(func=cmd_check)

    e = sub.add_parser("mse", help="permutation-matched MSE between two H files")
    e.add_argument("--est", required=True)
    e.add_argument("--ref", required=True)
    e.set_defaults(func=cmd_mse)

    b = sub.add_parser("bench", help="run the benchmark grid")
    b.add_argument("--config", default=None, help="JSON file with BenchConfig fields")
    b.add_argument("--cases", nargs="+", choices=synthlab.CASES, default=None)
    b.add_argument("--ranks", nargs="+", type=_positive_int, default=None)
    b.add_argument("--m", type=_positive_int, default=None)
    b.add_argument("--n", type=_positive_int, default=None)
    b.add_argument("--trials", type=_positive_int, default=None)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--methods", nargs="+", choices=METHODS, default=None)
    b.add_argument("--sparsity", type=_fraction, default=None)
    b.add_argument("--lambda", dest="lam", type=float, default=None)
    b.add_argument("--tol", type=_positive_float, default=None)
    b.add_argument("--max-sweeps", type=_positive_int, default=None)
    b.add_argument("--threads", type=_positive_int, default=None,
                   help="worker processes (default: CPU count)")
    b.add_argument("--record-runtime", action="store_true",
                   help="write runtimes into results.csv (breaks byte-identical reruns)")
    b.add_argument("--out", default=None, help="output directory (default bench_out)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse has already printed usage (or help)
        return err.code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
