"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from fraclop.control import (
    ControlProblem,
    _dense_function,
    build_modes,
    build_preconditioner,
    cost_functional,
    dense_oracle_solve,
    kkt_residuals,
    make_design,
    solve_control,
)
from fraclop.discretization import assemble_sturm_liouville, get_coefficient
from fraclop.operator_algebra import (
    SpectralFunction,
    apply,
    build_coefficient_tensor,
    build_operator,
    sinc_inverse_power,
)
from fraclop.pcg import PcgConfig
from fraclop.preconditioner import estimate_condition
from fraclop.tensor_formats import (
    CanonicalTensor,
    canonical_add,
    canonical_hadamard,
    canonical_inner,
    truncate,
)

ALPHAS = (1.0, 0.5, 0.1)


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print(f"\n{tag} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def test_c01_oracle_equivalence(report):
    t0 = time.perf_counter()
    errs = {}
    for a in ALPHAS:
        p = ControlProblem((63, 63), a)
        modes = build_modes(p)
        u_lr = solve_control(p, modes).control.full()
        u, _, _ = dense_oracle_solve(p, modes)
        errs[a] = float(np.abs(u_lr - u).max())
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-5 and elapsed < 30
    detail = ", ".join(f"alpha={a:g} err={e:.2e}" for a, e in errs.items())
    report("C1", ok, f"{detail}; {elapsed:.1f}s (limits 1e-5, 30s)")
    assert ok


def test_c02_grid_independent_2d(report):
    t0 = time.perf_counter()
    sizes = (63, 127, 255, 511, 1023)
    counts = {a: [solve_control(ControlProblem((n, n), a)).report.iterations for n in sizes] for a in ALPHAS}
    elapsed = time.perf_counter() - t0
    ok = all(1 <= c <= 4 for cs in counts.values() for c in cs)
    ok &= all(max(cs) - min(cs) <= 2 for cs in counts.values())
    ok &= elapsed < 300
    detail = "; ".join(f"alpha={a:g} {cs}" for a, cs in counts.items())
    report("C2", ok, f"n={list(sizes)}: {detail}; {elapsed:.0f}s")
    assert ok


def _iterations_3d(n, alpha, coeffs="default", b0="unit"):
    p = ControlProblem((n,) * 3, alpha, coeffs=coeffs, design=make_design("h", (n,) * 3), precond="aniso", b0=b0,
                       pcg=PcgConfig(stop_rule="integral"))
    return solve_control(p).report.iterations


def test_c03_iterations_3d(report):
    target = {1.0: (14, 2), 0.5: (7, 2), 0.1: (3, 1)}
    t0 = time.perf_counter()
    counts = {a: [_iterations_3d(n, a) for n in (63, 127)] for a in ALPHAS}
    elapsed = time.perf_counter() - t0
    ok = all(abs(c - target[a][0]) <= target[a][1] for a, cs in counts.items() for c in cs)
    ok &= all(abs(cs[0] - cs[1]) <= 1 for cs in counts.values())
    ok &= elapsed < 1200
    detail = "; ".join(f"alpha={a:g} n63/127={cs} (target {target[a][0]}+-{target[a][1]})"
                       for a, cs in counts.items())
    report("C3", ok, f"{detail}; {elapsed:.0f}s")
    assert ok


def test_c04_scaled_preconditioner(report):
    counts = [_iterations_3d(n, 1.0, coeffs="modified", b0="scaled") for n in (63, 127)]
    ok = all(8 <= c <= 11 for c in counts) and abs(counts[0] - counts[1]) <= 1
    report("C4", ok, f"modified coefficients, scaled b0, alpha=1: n63/127={counts} (target 8-11, +-1)")
    assert ok


def _cond(n, alpha, coeffs):
    p = ControlProblem((n, n), alpha, coeffs=coeffs, precond="aniso", b0="scaled")
    modes = build_modes(p)
    P, _ = build_preconditioner(p, modes)
    F = _dense_function(modes, SpectralFunction("lagrange", alpha, p.beta, p.gamma))
    return estimate_condition(P, F).cond


def test_c05_spectral_equivalence(report):
    t0 = time.perf_counter()
    spread = {}
    for coeffs in ("unit", "modified"):
        for a in ALPHAS:
            c = [_cond(n, a, coeffs) for n in (15, 31, 63)]
            spread[(coeffs, a)] = (c, max(c) / min(c) - 1)
    elapsed = time.perf_counter() - t0
    ok = all(s < 0.5 for _, s in spread.values()) and elapsed < 120
    detail = "; ".join(f"{k[0]} alpha={k[1]:g} cond={[round(x, 3) for x in c]} spread={s:.0%}"
                       for k, (c, s) in spread.items())
    report("C5", ok, f"{detail}; {elapsed:.0f}s (limit 50%)")
    assert ok


def test_c06_sinc_convergence(report):
    modes = [assemble_sturm_liouville(get_coefficient("unit"), 31).with_eigen()] * 3
    exact = build_coefficient_tensor(modes, SpectralFunction("inverse_power", 0.5))
    idx = np.indices((31,) * 3).reshape(3, -1)
    ref = exact(*idx)
    Ms = (5, 10, 20, 40, 80)
    errs = [float(np.max(np.abs(sinc_inverse_power(modes, 0.5, M).entries(*idx) - ref) / ref)) for M in Ms]
    corr = float(np.corrcoef(np.sqrt(Ms), np.log(errs))[0, 1])
    ok = all(np.diff(errs) < 0) and errs[-1] < 1e-6 and corr <= -0.98
    report("C6", ok, f"M={list(Ms)} err={[f'{e:.1e}' for e in errs]} corr={corr:.4f}")
    assert ok


def test_c07_singular_value_decay(report):
    t0 = time.perf_counter()
    modes = [assemble_sturm_liouville(get_coefficient(c), 511).with_eigen() for c in ("a1", "a2")]
    idx = np.indices((511, 511)).reshape(2, -1)
    ratios = {}
    for a in ALPHAS:
        M = build_coefficient_tensor(modes, SpectralFunction("lagrange", a))(*idx).reshape(511, 511)
        s = np.linalg.svd(M, compute_uv=False)
        ratios[a] = s[24] / s[0]
    elapsed = time.perf_counter() - t0
    ok = max(ratios.values()) <= 1e-6 and elapsed < 60
    detail = ", ".join(f"alpha={a:g} {r:.1e}" for a, r in ratios.items())
    report("C7", ok, f"sigma25/sigma1: {detail}; {elapsed:.1f}s")
    assert ok


_BENCH = """
import json, sys, io, contextlib
from fraclop.cli import main, peak_rss_mb
n = sys.argv[1]
if n == "0":
    import fraclop.control
    print(json.dumps({"rss": peak_rss_mb()}))
else:
    import fraclop.tensor_formats as tf
    tf.DENSE_LIMIT = int(n) ** 3 - 1  # any dense 3-way array raises MemoryError
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        rc = main(["bench", "--dim", "3", "--n", n, "--alpha", "0.5"])
    assert rc == 0, rc
    row = buf.getvalue().splitlines()[1].split(",")
    print(json.dumps({"spi": float(row[1]), "iters": int(row[2]),
                      "rss": peak_rss_mb()}))
"""


def _bench(n):
    out = subprocess.run([sys.executable, "-c", _BENCH, str(n)], capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_c08_per_iteration_scaling(report):
    base = _bench(0)["rss"]
    sizes = (63, 127, 255)
    runs = [_bench(n) for n in sizes]
    time_ratio = [b["spi"] / a["spi"] for a, b in zip(runs, runs[1:])]
    mem = [r["rss"] - base for r in runs]
    mem_ratio = [b / a for a, b in zip(mem, mem[1:])]
    ok = max(time_ratio) <= 4.8 and max(mem_ratio) < 4
    report("C8", ok, f"s/iter={[round(r['spi'], 3) for r in runs]} ratios={[round(r, 2) for r in time_ratio]} "
                     f"(limit 4.8); extra RSS MB={[round(m) for m in mem]} ratios={[round(r, 2) for r in mem_ratio]} "
                     f"(limit 4), no dense n^3 array")
    assert ok


def _random(rng, shape, rank):
    return CanonicalTensor.from_factors([rng.standard_normal((n, rank)) for n in shape], rng.standard_normal(rank))


def test_c09_invariants(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    fails = {}

    def check(name, cond):
        fails[name] = fails.get(name, 0) + (not cond)

    modes = {2: [assemble_sturm_liouville(get_coefficient(c), 10).with_eigen() for c in ("a1", "a2_modified")],
             3: [assemble_sturm_liouville(get_coefficient(c), 6).with_eigen() for c in ("a1", "a2_modified", "a3")]}
    ops = {(d, k, a): build_operator(modes[d], SpectralFunction(k, a), 1e-10)
           for d in (2, 3) for k in ("power", "inverse_power", "lagrange") for a in ALPHAS}
    dense = {k: op.dense() for k, op in ops.items()}
    keys = sorted(ops)
    for _ in range(100):
        d = int(rng.integers(2, 4))
        shape = tuple(int(v) for v in rng.integers(2, 9, d))
        a, b = _random(rng, shape, int(rng.integers(1, 5))), _random(rng, shape, int(rng.integers(1, 5)))
        A, B = a.full(), b.full()
        scale = np.linalg.norm(A) * np.linalg.norm(B)
        check("add", np.allclose(canonical_add(a, b).full(), A + B, rtol=1e-12, atol=1e-12 * scale))
        check("hadamard", np.allclose(canonical_hadamard(a, b).full(), A * B, rtol=1e-12, atol=1e-12 * scale))
        ip = canonical_inner(a, b)
        check("inner", abs(ip - np.sum(A * B)) <= 1e-12 * scale and abs(ip) <= scale * (1 + 1e-12))
        eps = 10.0 ** -rng.integers(2, 9)
        t = truncate(a, eps)
        check("truncate", np.linalg.norm(t.full() - A) <= 3 * eps * np.linalg.norm(A) and t.rank <= a.rank)

        d, kind, al = keys[int(rng.integers(len(keys)))]
        op = ops[(d, kind, al)]
        x, y = _random(rng, op.shape, int(rng.integers(1, 5))), _random(rng, op.shape, int(rng.integers(1, 5)))
        Fx = apply(op, x)
        lhs, rhs = canonical_inner(Fx, y), canonical_inner(x, apply(op, y))
        check("symmetry", abs(lhs - rhs) <= 1e-10 * np.linalg.norm(Fx.full()) * np.linalg.norm(y.full()))
        ref = dense[(d, kind, al)] @ x.full().ravel()
        check("apply_dense", np.linalg.norm(Fx.full().ravel() - ref) <= 1e-10 * np.linalg.norm(ref))
        back = apply(ops[(d, "power", al)], apply(ops[(d, "inverse_power", al)], x))
        check("inverse_composition", np.linalg.norm(back.full() - x.full()) <= 5e-10 * np.linalg.norm(x.full()))
    elapsed = time.perf_counter() - t0
    ok = not any(fails.values()) and elapsed < 120
    report("C9", ok, f"100 trials x {len(fails)} invariants, failures={fails}; {elapsed:.1f}s")
    assert ok


def test_c10_optimality_system(report):
    worst_kkt, worst_gap = 0.0, 0.0
    for a in ALPHAS:
        p = ControlProblem((31, 31), a)
        modes = build_modes(p)
        u, y, adj = dense_oracle_solve(p, modes)
        worst_kkt = max(worst_kkt, *kkt_residuals(p, y, u, adj, modes))
        sol = solve_control(p, modes)
        J_star = cost_functional(y, u, p.design, p.gamma)
        J_lr = cost_functional(sol.state.full(), sol.control.full(), p.design, p.gamma)
        worst_gap = max(worst_gap, abs(J_lr - J_star) / J_star)
    ok = worst_kkt <= 1e-8 and worst_gap <= 1e-6
    report("C10", ok, f"max KKT residual={worst_kkt:.1e} (limit 1e-8), cost gap={worst_gap:.1e} (limit 1e-6)")
    assert ok
