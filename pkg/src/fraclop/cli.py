"""Command-line front end: ``fraclop <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import itertools
import json
import os
import resource
import shlex
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .control import (
    ControlProblem,
    build_modes,
    build_preconditioner,
    cost_functional,
    dense_oracle_solve,
    design_from_file,
    kkt_residuals,
    make_design,
    solve_control,
)
from .discretization import (
    COEFFICIENTS,
    assemble_sturm_liouville,
    coefficient_from_csv,
    get_coefficient,
)
from .operator_algebra import (
    CompressionError,
    SpectralFunction,
    apply,
    build_coefficient_tensor,
    build_operator,
)
from .pcg import STOP_RULES, PcgBreakdown, PcgConfig, write_history
from .preconditioner import DEFAULT_RANK, DEFAULT_TOL, analytic_bound, estimate_condition
from .tensor_formats import CanonicalTensor, canonical_inner, read_canon, write_canon

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
STORAGE_COLUMNS = ["n", "factored_operator_floats", "coefficient_floats", "basis_floats", "dense_operator_floats",
                   "peak_rss_mb"]
FUNCS = {"f1": "power", "f2": "lagrange", "f3": "lagrange_inverse"}
NUMERIC_ERRORS = (PcgBreakdown, CompressionError, np.linalg.LinAlgError, FloatingPointError, MemoryError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"grid size must be at least 2, got {v}")
    return v


def _add_problem_flags(p, multi=True):
    nargs = "+" if multi else None
    action = "extend" if multi else "store"
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    p.add_argument("--n", type=_positive_int, nargs=nargs, action=action, help="interior grid points per mode")
    p.add_argument("--alpha", type=float, nargs=nargs, action=action)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, nargs=nargs, action=action)
    p.add_argument("--coeffs", nargs="+", default=["default"],
                   help="default | modified | unit | one coefficient id or CSV file per mode")
    p.add_argument("--boundary", choices=("paper", "standard"), default="paper")
    p.add_argument("--allow-degenerate", action="store_true",
                   help="accept coefficient files with non-positive samples")


def _add_solver_flags(p):
    p.add_argument("--eps", type=float, default=1e-6, help="rank truncation tolerance")
    p.add_argument("--stop-tol", type=float, default=1e-5)
    p.add_argument("--stop-rule", choices=STOP_RULES, default="relative")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--rank-cap", type=int, default=120)
    p.add_argument("--design", default="box", help="box | h | CANON file")
    p.add_argument("--precond", choices=("aniso", "direct"), default=None,
                   help="default: direct in 2D, aniso in 3D")
    p.add_argument("--b0", choices=("unit", "scaled"), default="unit",
                   help="aniso scaling constants: 1 or (max a + min a)/2")
    p.add_argument("--precond-rank", type=int, default=DEFAULT_RANK)
    p.add_argument("--precond-tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--op-eps", type=float, default=None, help="forward operator compression tolerance")
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--from-meta", default=None, help="re-run the parameter set stored in a meta.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fraclop", description="Low-rank fractional optimal control solver")
    parser.add_argument("--version", action="version", version=f"fraclop {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    for name, helptext in (("solve", "single solve"), ("sweep", "parameter sweep, one subdirectory per point"),
                           ("bench", "per-iteration timing over grid sizes")):
        p = sub.add_parser(name, help=helptext)
        _add_problem_flags(p)
        _add_solver_flags(p)

    p = sub.add_parser("validate", help="compare low-rank and dense solves on a small grid")
    _add_problem_flags(p)
    _add_solver_flags(p)
    p.add_argument("--trials", type=int, default=20)

    p = sub.add_parser("eig", help="eigenvalues of one Sturm-Liouville factor as CSV")
    p.add_argument("--coef", required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--boundary", choices=("paper", "standard"), default="paper")
    p.add_argument("--method", choices=("lapack", "ql"), default="lapack")
    p.add_argument("--allow-degenerate", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("op", help="compress a coefficient tensor and write it as CANON")
    _add_problem_flags(p, multi=False)
    p.add_argument("--func", choices=sorted(FUNCS), required=True)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--rank-cap", type=int, default=200)
    p.add_argument("--out", required=True)
    p.add_argument("--validate", type=int, default=0, metavar="S")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("precond", help="preconditioner report as CSV")
    _add_problem_flags(p, multi=False)
    p.add_argument("--mode", choices=("aniso", "direct"), required=True)
    p.add_argument("--b0", choices=("unit", "scaled"), default="scaled")
    p.add_argument("--precond-rank", type=int, default=DEFAULT_RANK)
    p.add_argument("--precond-tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--report", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("slice", help="2D slice of a CANON tensor as CSV")
    p.add_argument("--file", required=True)
    p.add_argument("--axis", default="z", help="x | y | z or 0 | 1 | 2")
    p.add_argument("--index", type=int, default=0, help="0-based index along the axis")
    p.add_argument("--out", default=None)

    p = sub.add_parser("eval", help="print single entries of a CANON tensor (0-based indices)")
    p.add_argument("--file", required=True)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--k", type=int, default=None)
    return parser


# --------------------------------------------------------------------------- helpers

def _coefficients(args, dim):
    spec = list(args.coeffs)
    if len(spec) == 1 and spec[0] in ("default", "modified", "unit"):
        return spec[0]
    if len(spec) != dim:
        raise UsageError(f"--coeffs needs default|modified|unit or {dim} entries, got {len(spec)}")
    out = []
    for c in spec:
        if c in COEFFICIENTS:
            out.append(get_coefficient(c))
        elif Path(c).is_file():
            try:
                out.append(coefficient_from_csv(c, allow_degenerate=args.allow_degenerate))
            except ValueError as err:
                raise UsageError(str(err)) from None
        else:
            raise UsageError(f"unknown coefficient {c!r} (not a known id or an existing file)")
    return tuple(out)


def _design(spec, shape):
    if spec in ("box", "h"):
        return make_design(spec, shape)
    if not Path(spec).is_file():
        raise UsageError(f"--design must be box, h or an existing CANON file, got {spec!r}")
    try:
        return design_from_file(spec, shape)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _check_scalars(args):
    for a in args.alpha:
        if not 0 < a <= 1:
            raise UsageError(f"--alpha must lie in (0, 1], got {a}")
    if args.beta <= 0 or any(g <= 0 for g in args.gamma):
        raise UsageError("--beta and --gamma must be positive")
    if getattr(args, "eps", 1.0) < 0 or getattr(args, "stop_tol", 1.0) <= 0:
        raise UsageError("tolerances must be positive")
    if getattr(args, "max_iter", 1) < 1 or getattr(args, "rank_cap", 1) < 1:
        raise UsageError("--max-iter and --rank-cap must be at least 1")
    if getattr(args, "precond_rank", 1) < 1:
        raise UsageError("--precond-rank must be at least 1")


def _problems(args):
    """Validate flags and expand the sweep grid into ``(tag, ControlProblem)`` pairs."""
    args.n = args.n or [63]
    args.alpha = args.alpha or [1.0]
    args.gamma = args.gamma or [1.0]
    _check_scalars(args)
    coeffs = _coefficients(args, args.dim)
    out = []
    for n, alpha, gamma in itertools.product(args.n, args.alpha, args.gamma):
        shape = (n,) * args.dim
        cfg = PcgConfig(eps=args.eps, stop_tol=args.stop_tol, max_iter=args.max_iter, rank_cap=args.rank_cap,
                        deterministic=args.deterministic, stop_rule=args.stop_rule)
        try:
            p = ControlProblem(shape, alpha, args.beta, gamma, coeffs, _design(args.design, shape),
                               args.precond, args.b0, args.precond_rank, args.precond_tol, args.boundary,
                               args.op_eps, pcg=cfg)
        except ValueError as err:
            raise UsageError(str(err)) from None
        out.append((f"n{n}_alpha{alpha:g}_gamma{gamma:g}", p))
    return out


def _canonical_argv(args, n, alpha, gamma):
    argv = ["solve", "--dim", str(args.dim), "--n", str(n), "--alpha", repr(alpha), "--beta", repr(args.beta),
            "--gamma", repr(gamma), "--coeffs", *args.coeffs, "--boundary", args.boundary,
            "--eps", repr(args.eps), "--stop-tol", repr(args.stop_tol), "--stop-rule", args.stop_rule,
            "--max-iter", str(args.max_iter), "--rank-cap", str(args.rank_cap), "--design", args.design,
            "--b0", args.b0, "--precond-rank", str(args.precond_rank), "--precond-tol", repr(args.precond_tol),
            "--seed", str(args.seed)]
    if args.precond:
        argv += ["--precond", args.precond]
    if args.op_eps is not None:
        argv += ["--op-eps", repr(args.op_eps)]
    if args.allow_degenerate:
        argv.append("--allow-degenerate")
    if args.deterministic:
        argv.append("--deterministic")
    return argv


def _write_meta(path, items: dict):
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k}={v}\n")


def read_meta(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line and not line.startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _run_one(tag, p: ControlProblem, outdir, argv, timed=False):
    """Solve one problem, write its outputs; returns a summary dict."""
    t0 = time.perf_counter()
    sol = solve_control(p)
    elapsed = time.perf_counter() - t0
    rep = sol.report
    summary = {"tag": tag, "n": p.n[0], "alpha": p.alpha, "gamma": p.gamma, "iterations": rep.iterations,
               "converged": rep.converged, "rel_residual": rep.rel_residual, "max_rank": rep.max_rank,
               "seconds": elapsed,
               "seconds_per_iter": statistics.median([r.seconds for r in rep.history]) if rep.history else 0.0}
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        write_canon(outdir / "control.canon", sol.control)
        write_canon(outdir / "state.canon", sol.state)
        write_history(outdir / "history.csv", rep)
        meta = {"argv": shlex.join(argv), "dim": p.dim, "n": " ".join(map(str, p.n)), "alpha": p.alpha,
                "beta": p.beta, "gamma": p.gamma, "coeffs": " ".join(c.name for c in p.coeffs),
                "boundary": p.boundary, "design_rank": p.design.rank, "precond": p.precond, "b0": p.b0,
                "precond_rank": sol.precond_rank, "precond_rank_cap": p.precond_rank,
                "precond_tol": p.precond_tol, "op_eps": p.op_eps, "forward_rank": sol.forward_rank,
                "eps": p.pcg.eps, "stop_tol": p.pcg.stop_tol, "stop_rule": p.pcg.stop_rule,
                "max_iter": p.pcg.max_iter, "rank_cap": p.pcg.rank_cap, "iterations": rep.iterations,
                "converged": rep.converged, "termination": rep.reason, "rel_residual": repr(rep.rel_residual),
                "rank_cap_hit": rep.rank_cap_hit, "control_rank": sol.control.rank,
                "state_rank": sol.state.rank, "max_rank": rep.max_rank}
        if sol.anisotropy is not None:
            meta.update({k: repr(v) for k, v in sol.anisotropy.as_dict().items()})
            bound = analytic_bound(sol.anisotropy.q, p.alpha)
            meta["analytic_bound"] = "not applicable" if bound is None else repr(bound)
        if not p.pcg.deterministic:
            meta.update({f"seconds_{k}": f"{v:.4f}" for k, v in sol.timings.items()})
            meta["seconds_total"] = f"{elapsed:.4f}"
        _write_meta(outdir / "meta.txt", meta)
    return summary


def _run_from_argv(tag, outdir, argv):
    args = build_parser().parse_args(argv)
    (_, p), = _problems(args)
    return _run_one(tag, p, outdir, argv)


def peak_rss_mb() -> float:
    """High-water resident set size of this process in MB.

    ``VmHWM`` resets on exec, whereas ``ru_maxrss`` keeps the parent's peak.
    """
    try:
        for line in Path("/proc/self/status").read_text().splitlines():
            if line.startswith("VmHWM:"):
                return int(line.split()[1]) / 1024.0
    except OSError:
        pass
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _summary_line(s):
    return (f"{s['tag']}: iterations={s['iterations']} rel_residual={s['rel_residual']:.3e} "
            f"max_rank={s['max_rank']} seconds={s['seconds']:.2f}"
            + ("" if s["converged"] else " (not converged)"))


# --------------------------------------------------------------------------- subcommands

def cmd_solve(args, sweep=False):
    if args.from_meta:
        try:
            meta = read_meta(args.from_meta)
        except OSError as err:
            raise UsageError(f"cannot read {args.from_meta}: {err.strerror}") from None
        if "argv" not in meta:
            raise UsageError(f"{args.from_meta}: no argv entry")
        stored = build_parser().parse_args(shlex.split(meta["argv"]))
        stored.out, stored.from_meta = args.out, None
        args = stored
    problems = _problems(args)
    if not sweep and len(problems) > 1:
        raise UsageError("solve takes one value per parameter; use sweep for several")
    if args.out is None and sweep:
        raise UsageError("sweep needs --out")
    jobs = []
    for tag, p in problems:
        n = p.n[0]
        argv = _canonical_argv(args, n, p.alpha, p.gamma)
        outdir = None if args.out is None else (Path(args.out) / tag if sweep else Path(args.out))
        jobs.append((tag, p, outdir, argv))
    threads = max(1, int(os.environ.get("FRACLOP_THREADS", "1") or 1))
    if threads > 1 and len(jobs) > 1:
        # coefficient callables do not pickle; workers rebuild each problem from its argv
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as ex:
            summaries = list(ex.map(_run_from_argv, [j[0] for j in jobs], [j[2] for j in jobs],
                                    [j[3] for j in jobs]))
    else:
        summaries = [_run_one(*job) for job in jobs]
    for s in summaries:
        print(_summary_line(s))
    if sweep:
        with open(Path(args.out) / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            keys = ["tag", "n", "alpha", "gamma", "iterations", "converged", "rel_residual", "max_rank", "seconds"]
            w.writerow(keys)
            for s in summaries:
                w.writerow([s[k] for k in keys])
    return EXIT_OK if all(s["converged"] for s in summaries) else EXIT_NUMERIC


def cmd_bench(args):
    problems = _problems(args)
    rows, storage = [], []
    for tag, p in problems:
        s = _run_one(tag, p, None, [])
        peak_mb = peak_rss_mb()
        rows.append([p.n[0], f"{s['seconds_per_iter']:.6f}", s["iterations"], s["max_rank"]])
        modes = build_modes(p)
        op = build_operator(modes, SpectralFunction("lagrange", p.alpha, p.beta, p.gamma), p.op_eps,
                            rank_cap=p.op_rank_cap)
        N = p.size
        storage.append([p.n[0], op.storage(), op.coefficient_storage(), op.basis_storage(), N * N,
                        f"{peak_mb:.1f}"])
    out = sys.stdout
    w = csv.writer(out)
    w.writerow(["n", "seconds_per_iter", "iters", "max_rank"])
    w.writerows(rows)
    print()
    w.writerow(STORAGE_COLUMNS)
    w.writerows(storage)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "bench.csv", "w", newline="") as fh:
            cw = csv.writer(fh)
            cw.writerow(["n", "seconds_per_iter", "iters", "max_rank"])
            cw.writerows(rows)
        with open(Path(args.out) / "storage.csv", "w", newline="") as fh:
            cw = csv.writer(fh)
            cw.writerow(STORAGE_COLUMNS)
            cw.writerows(storage)
    return EXIT_OK


def _coef_arg(name, allow_degenerate):
    if name in COEFFICIENTS:
        return get_coefficient(name)
    if Path(name).is_file():
        try:
            return coefficient_from_csv(name, allow_degenerate=allow_degenerate)
        except ValueError as err:
            raise UsageError(str(err)) from None
    raise UsageError(f"unknown coefficient {name!r}")


def cmd_eig(args):
    coef = _coef_arg(args.coef, args.allow_degenerate)
    m = assemble_sturm_liouville(coef, args.n, args.boundary).with_eigen(args.method)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(m.eigvals):
            w.writerow([i, repr(float(lam))])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_op(args):
    if args.n is None or args.alpha is None:
        raise UsageError("op needs --n and --alpha")
    args.alpha, args.gamma = [args.alpha], [args.gamma if args.gamma is not None else 1.0]
    _check_scalars(args)
    coeffs = _coefficients(args, args.dim)
    p = ControlProblem((args.n,) * args.dim, args.alpha[0], args.beta, args.gamma[0], coeffs,
                       boundary=args.boundary)
    modes = build_modes(p)
    f = SpectralFunction(FUNCS[args.func], p.alpha, p.beta, p.gamma)
    op = build_operator(modes, f, args.eps, rank_cap=args.rank_cap)
    write_canon(args.out, op.coeff)
    print(f"rank={op.rank} eps={args.eps:g} file={args.out}")
    if args.validate > 0:
        rng = np.random.default_rng(args.seed)
        idx = [rng.integers(0, m.n, args.validate) for m in modes]
        exact = build_coefficient_tensor(modes, f)(*idx)
        err = np.abs(op.coeff.entries(*idx) - exact) / np.abs(exact)
        print(f"max_relative_error={err.max():.3e} samples={args.validate}")
    return EXIT_OK


def cmd_precond(args):
    if args.n is None or args.alpha is None:
        raise UsageError("precond needs --n and --alpha")
    args.alpha, args.gamma = [args.alpha], [args.gamma if args.gamma is not None else 1.0]
    _check_scalars(args)
    coeffs = _coefficients(args, args.dim)
    p = ControlProblem((args.n,) * args.dim, args.alpha[0], args.beta, args.gamma[0], coeffs,
                       precond=args.mode, b0=args.b0, precond_rank=args.precond_rank,
                       precond_tol=args.precond_tol, boundary=args.boundary)
    modes = build_modes(p)
    P, aniso = build_preconditioner(p, modes)
    from .preconditioner import anisotropy_from_coefficients
    aniso = aniso or anisotropy_from_coefficients(modes, p.n)
    row = {"mode": args.mode, "dim": p.dim, "n": args.n, "alpha": p.alpha}
    row.update({f"b0_{l + 1}": (b if args.mode == "aniso" and args.b0 == "scaled" else 1.0)
                for l, b in enumerate(aniso.b0)})
    row["q"] = aniso.q
    bound = analytic_bound(aniso.q, p.alpha)
    row["analytic_bound"] = "not applicable" if bound is None else bound
    row["rank"] = P.rank
    if p.size <= 4096:
        from .control import _dense_function
        F = _dense_function(modes, SpectralFunction("lagrange", p.alpha, p.beta, p.gamma))
        row["cond"] = estimate_condition(P, F).cond
    else:
        row["cond"] = "skipped (N > 4096)"
    w = csv.writer(sys.stdout)
    w.writerow(list(row))
    w.writerow(list(row.values()))
    if args.out:
        write_canon(args.out, P.coeff)
    return EXIT_OK


def cmd_slice(args):
    t = _read(args.file)
    axes = {"x": 0, "y": 1, "z": 2, "0": 0, "1": 1, "2": 2}
    if args.axis not in axes:
        raise UsageError(f"--axis must be one of x, y, z, 0, 1, 2")
    ax = axes[args.axis]
    if t.ndim == 2:
        raise UsageError("slice needs a 3D tensor; use eval for 2D entries")
    if ax >= t.ndim or not 0 <= args.index < t.shape[ax]:
        raise UsageError(f"index {args.index} out of range for axis {args.axis} of shape {t.shape}")
    factors = list(t.factors)
    row = factors[ax][args.index]
    others = [f for k, f in enumerate(factors) if k != ax]
    M = (others[0] * (t.weights * row)) @ others[1].T
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        csv.writer(fh).writerows([[repr(float(v)) for v in r] for r in M])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_eval(args):
    t = _read(args.file)
    idx = [args.i, args.j] + ([args.k] if args.k is not None else [])
    if len(idx) != t.ndim:
        raise UsageError(f"tensor has {t.ndim} modes, got {len(idx)} indices")
    if any(not 0 <= i < n for i, n in zip(idx, t.shape)):
        raise UsageError(f"index {idx} out of range for shape {t.shape}")
    print(repr(float(t.entries(*[np.array([i]) for i in idx])[0])))
    return EXIT_OK


def _read(path):
    try:
        return read_canon(path)
    except (OSError, ValueError, IndexError) as err:
        raise UsageError(f"cannot read {path}: {err}") from None


def cmd_validate(args):
    problems = _problems(args)
    rng = np.random.default_rng(args.seed)
    rows, ok = [], True
    for tag, p in problems:
        if p.size > 20_000:
            raise UsageError(f"validate needs N <= 20000 unknowns, got {p.size}")
        modes = build_modes(p)
        sol = solve_control(p, modes)
        u, y, adj = dense_oracle_solve(p, modes)
        err_u = float(np.abs(sol.control.full() - u).max())
        kkt = kkt_residuals(p, y, u, adj, modes)
        J_star = cost_functional(y, u, p.design, p.gamma)
        J_lr = cost_functional(sol.state.full(), sol.control.full(), p.design, p.gamma)
        F = build_operator(modes, SpectralFunction("lagrange", p.alpha, p.beta, p.gamma), p.op_eps)
        sym = 0.0
        for _ in range(args.trials):
            x = CanonicalTensor.from_factors([rng.standard_normal((n, 2)) for n in p.n])
            z = CanonicalTensor.from_factors([rng.standard_normal((n, 2)) for n in p.n])
            a, b = canonical_inner(apply(F, x), z), canonical_inner(x, apply(F, z))
            sym = max(sym, abs(a - b) / max(abs(a), abs(b), 1e-300))
        checks = [("control_max_abs_error", err_u, 1e-5), ("kkt_I", kkt[0], 1e-8), ("kkt_II", kkt[1], 1e-8),
                  ("kkt_III", kkt[2], 1e-8), ("cost_relative_gap", abs(J_lr - J_star) / J_star, 1e-6),
                  ("operator_symmetry", sym, 1e-10)]
        for name, val, tol in checks:
            good = val <= tol
            ok &= good
            rows.append([tag, name, f"{val:.3e}", f"{tol:g}", "pass" if good else "fail"])
    w = csv.writer(sys.stdout)
    w.writerow(["problem", "check", "value", "tolerance", "status"])
    w.writerows(rows)
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"solve": cmd_solve, "sweep": lambda a: cmd_solve(a, sweep=True), "bench": cmd_bench, "eig": cmd_eig,
            "op": cmd_op, "precond": cmd_precond, "slice": cmd_slice, "eval": cmd_eval, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"fraclop: usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as err:
        print(f"fraclop: numerical failure ({type(err).__name__}): {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
