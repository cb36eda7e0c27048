import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclop.tensor_formats import (
    CanonicalTensor,
    TuckerTensor,
    canonical_add,
    canonical_hadamard,
    canonical_inner,
    canonical_norm,
    canonical_to_tucker,
    eps_rank,
    full_to_tucker,
    multigrid_tucker,
    read_canon,
    truncate,
    tucker_to_canonical,
    write_canon,
)
from fraclop.operator_algebra import SpectralFunction, build_coefficient_tensor
from fraclop.discretization import laplace_eigenpairs

from conftest import random_canonical

# hypothesis strategy: (seed, d, n, Ra, Rb) small enough for dense oracles
cases = st.tuples(
    st.integers(0, 2**31 - 1),
    st.integers(2, 3),
    st.integers(2, 16),
    st.integers(0, 5),
    st.integers(0, 5),
)


def _pair(case):
    seed, d, n, ra, rb = case
    rng = np.random.default_rng(seed)
    shape = tuple(int(v) for v in rng.integers(2, n + 1, size=d))
    return random_canonical(rng, shape, ra), random_canonical(rng, shape, rb)


# -- structure ---------------------------------------------------------------

def test_factor_columns_unit_norm(rng):
    a = random_canonical(rng, (5, 6, 7), 4)
    for U in a.factors:
        assert np.allclose(np.linalg.norm(U, axis=0), 1.0)


def test_entries_match_full(rng):
    a = random_canonical(rng, (5, 6, 7), 4)
    i, j, k = rng.integers(0, 5, 20), rng.integers(0, 6, 20), rng.integers(0, 7, 20)
    assert np.allclose(a.entries(i, j, k), a.full()[i, j, k], rtol=1e-14, atol=1e-14)


def test_zero_tensor_is_additive_identity(rng):
    a = random_canonical(rng, (4, 5), 1)
    z = CanonicalTensor.zeros((4, 5))
    s = canonical_add(a, z)
    assert s.rank == 1
    assert np.array_equal(s.full(), a.full())
    assert z.full().shape == (4, 5) and not z.full().any()


def test_add_cancellation():
    a = CanonicalTensor.rank_one([np.ones(4), np.ones(4)])
    s = canonical_add(a, -a)
    assert s.rank == 2
    assert np.abs(s.full()).max() <= 1e-15


def test_add_shape_mismatch():
    with pytest.raises(ValueError):
        canonical_add(CanonicalTensor.zeros((3, 3)), CanonicalTensor.zeros((3, 4)))


def test_add_random_rank2_rank3(rng):
    a = random_canonical(rng, (8, 8, 8), 2)
    b = random_canonical(rng, (8, 8, 8), 3)
    s = canonical_add(a, b)
    assert s.rank == 5
    dense = a.full() + b.full()
    assert np.abs(s.full() - dense).max() <= 1e-13 * np.abs(dense).max()


def test_hadamard_identity_and_separability(rng):
    a = random_canonical(rng, (4, 5, 6), 3)
    ones = CanonicalTensor.rank_one([np.ones(4), np.ones(5), np.ones(6)])
    assert np.allclose(canonical_hadamard(a, ones).full(), a.full(), rtol=1e-13, atol=1e-14)
    u = [rng.standard_normal(n) for n in (4, 5, 6)]
    v = [rng.standard_normal(n) for n in (4, 5, 6)]
    h = canonical_hadamard(CanonicalTensor.rank_one(u), CanonicalTensor.rank_one(v))
    assert h.rank == 1
    expect = CanonicalTensor.rank_one([x * y for x, y in zip(u, v)])
    assert np.allclose(h.full(), expect.full(), rtol=1e-13, atol=1e-14)


def test_hadamard_random(rng):
    a = random_canonical(rng, (6, 6, 6), 2)
    b = random_canonical(rng, (6, 6, 6), 2)
    h = canonical_hadamard(a, b)
    assert h.rank == 4
    dense = a.full() * b.full()
    assert np.abs(h.full() - dense).max() <= 1e-13 * np.abs(dense).max()


def test_inner_trivial_cases(rng):
    a = random_canonical(rng, (8, 8, 8), 3)
    assert canonical_inner(a, CanonicalTensor.zeros(a.shape)) == 0.0
    e0, e1 = np.eye(8)[0], np.eye(8)[1]
    x = CanonicalTensor.rank_one([e0, np.ones(8)])
    y = CanonicalTensor.rank_one([e1, np.ones(8)])
    assert canonical_inner(x, y) == 0.0


def test_inner_random(rng):
    a = random_canonical(rng, (8, 8, 8), 3)
    b = random_canonical(rng, (8, 8, 8), 3)
    ref = float(np.sum(a.full() * b.full()))
    assert canonical_inner(a, b) == pytest.approx(ref, rel=1e-12)


def test_inner_blocked_matches_unblocked(rng):
    a = random_canonical(rng, (7, 7, 7), 23)
    b = random_canonical(rng, (7, 7, 7), 11)
    assert canonical_inner(a, b, block=4) == pytest.approx(canonical_inner(a, b), rel=1e-13)


def test_eps_rank():
    s = np.array([1.0, 0.1, 0.01, 0.001])
    assert eps_rank(s, 0.0) == 4
    assert eps_rank(s, 0.0011) == 3
    assert eps_rank(s, 2.0) == 0
    assert eps_rank(np.array([1.0, 0.5, 0.5]), 0.6) == 3  # ties kept together


def test_dense_guard():
    big = CanonicalTensor.zeros((300, 300, 300))
    with pytest.raises(MemoryError):
        big.full()


# -- Tucker ------------------------------------------------------------------

def test_full_to_tucker_separable(rng):
    a = CanonicalTensor.rank_one([rng.standard_normal(n) for n in (9, 10, 11)])
    tk = full_to_tucker(a.full(), 1e-10)
    assert tk.ranks == (1, 1, 1)
    assert np.abs(tk.full() - a.full()).max() <= 1e-13 * np.abs(a.full()).max()


def test_full_to_tucker_zero():
    tk = full_to_tucker(np.zeros((4, 5, 6)), 1e-6)
    assert tk.ranks == (0, 0, 0)
    assert not tk.full().any()


def test_full_to_tucker_rejects_nan():
    t = np.ones((3, 3, 3))
    t[1, 1, 1] = np.nan
    with pytest.raises(ValueError):
        full_to_tucker(t, 1e-6)


def _lagrange_entry(n, alpha, d=3):
    lam = laplace_eigenpairs(n)
    return build_coefficient_tensor([lam] * d, SpectralFunction("lagrange", alpha))


def test_full_to_tucker_lagrange_tensor():
    entry = _lagrange_entry(65, 0.5)
    t = entry(*np.ix_(*[np.arange(65)] * 3))
    tk = full_to_tucker(t, 1e-6)
    for V in tk.factors:
        assert np.abs(V.T @ V - np.eye(V.shape[1])).max() <= 1e-12
    assert np.linalg.norm(tk.full() - t) <= 1e-6 * np.linalg.norm(t)
    assert max(tk.ranks) <= 25


def test_multigrid_separable():
    x = np.linspace(1, 2, 63)
    tk = multigrid_tucker(lambda i, j, k: x[i] * x[j] ** 2 * np.sqrt(x[k]), 63, 1e-8)
    assert tk.ranks == (1, 1, 1)


def test_multigrid_constant():
    tk = multigrid_tucker(lambda i, j, k: 3.0 + 0 * (i + j + k), 63, 1e-8)
    assert tk.ranks == (1, 1, 1)
    assert abs(abs(tk.core.item()) - 3.0 * 63**1.5) <= 1e-9 * 3.0 * 63**1.5


def test_multigrid_matches_full_hosvd():
    eps = 1e-6
    entry = _lagrange_entry(127, 0.5)
    mg = multigrid_tucker(entry, 127, eps, n_coarse=31)
    ref = full_to_tucker(entry(*np.ix_(*[np.arange(127)] * 3)), eps)
    rng = np.random.default_rng(0)
    idx = [rng.integers(0, 127, 10_000) for _ in range(3)]
    exact = entry(*idx)
    # relative 2-norm over the samples; eps is a Frobenius tolerance, so the
    # max-entry error of even the full HOSVD exceeds eps on this tensor
    err_mg = np.linalg.norm(mg.entries(*idx) - exact) / np.linalg.norm(exact)
    err_ref = np.linalg.norm(mg.entries(*idx) - ref.entries(*idx)) / np.linalg.norm(exact)
    assert err_mg <= 3 * eps
    assert err_ref <= 5 * eps


def test_canonical_to_tucker_rank_one_and_duplicates(rng):
    u = [rng.standard_normal(n) for n in (6, 7, 8)]
    a = CanonicalTensor.rank_one(u)
    tk = canonical_to_tucker(a, 1e-12)
    assert tk.ranks == (1, 1, 1)
    assert np.allclose(tk.full(), a.full(), rtol=1e-13, atol=1e-14)
    dup = canonical_add(a, a)
    assert canonical_to_tucker(dup, 1e-12).ranks == (1, 1, 1)


def test_canonical_to_tucker_decaying(rng):
    a = random_canonical(rng, (64, 64, 64), 50, decay=0.5)
    tk = canonical_to_tucker(a, 1e-6)
    dense = a.full()
    assert np.linalg.norm(tk.full() - dense) <= 1e-5 * np.linalg.norm(dense)


def test_canonical_to_tucker_matches_hosvd(rng):
    # fast singular decay: weights 2^-k
    a = random_canonical(rng, (20, 20, 20), 12, decay=0.1)
    eps = 1e-6
    nrm = np.linalg.norm(a.full())
    r1 = canonical_to_tucker(a, eps).full()
    r2 = full_to_tucker(a.full(), eps).full()
    assert np.linalg.norm(r1 - r2) <= 5 * eps * nrm


def test_tucker_to_canonical_diagonal_core(rng):
    core = np.zeros((3, 3, 3))
    for k in range(3):
        core[k, k, k] = 3.0 - k
    Q = [np.linalg.qr(rng.standard_normal((8, 3)))[0] for _ in range(3)]
    tk = TuckerTensor(core, tuple(Q))
    cp = tucker_to_canonical(tk, 1e-12)
    assert cp.rank == 3
    assert np.allclose(cp.full(), tk.full(), atol=1e-13)


def test_tucker_to_canonical_rank_one(rng):
    Q = [np.linalg.qr(rng.standard_normal((8, 1)))[0] for _ in range(3)]
    cp = tucker_to_canonical(TuckerTensor(np.full((1, 1, 1), 2.0), tuple(Q)), 1e-12)
    assert cp.rank == 1


def test_tucker_to_canonical_lagrange_core():
    eps = 1e-6
    entry = _lagrange_entry(65, 0.5)
    t = entry(*np.ix_(*[np.arange(65)] * 3))
    tk = full_to_tucker(t, eps)
    cp = tucker_to_canonical(tk, eps)
    r = sorted(tk.ranks)
    assert cp.rank <= r[0] * r[1]
    assert np.linalg.norm(cp.full() - t) <= 2 * eps * np.linalg.norm(t)


def test_tucker_to_canonical_oversized_core():
    tk = TuckerTensor(np.ones((2, 2, 2)), tuple(np.eye(4)[:, :2] for _ in range(3)))
    with pytest.raises(ValueError):
        tucker_to_canonical(tk, 1e-6, max_core_rank=1)


# -- truncation --------------------------------------------------------------

def test_truncate_rank_one(rng):
    a = CanonicalTensor.rank_one([rng.standard_normal(n) for n in (5, 6, 7)], 2.5)
    out = truncate(a, 1e-8)
    assert out.rank == 1
    assert np.allclose(out.full(), a.full(), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_truncate_duplicated_terms(rng, d):
    b = random_canonical(rng, (7,) * d, 2)
    a = canonical_add(b, b)
    out = truncate(a, 1e-10)
    assert out.rank == 2
    assert np.abs(out.full() - a.full()).max() <= 1e-12 * np.abs(a.full()).max()


def test_truncate_respects_max_rank(rng):
    a = random_canonical(rng, (10, 10, 10), 8)
    assert truncate(a, 1e-14, max_rank=3).rank <= 3


def test_truncate_pcg_iterate():
    # rank-inflated iterate of the 2D box problem at n = 63
    from fraclop.control import ControlProblem, build_forward_operator, build_modes
    from fraclop.operator_algebra import apply

    p = ControlProblem(63, 1.0)
    F = build_forward_operator(p, build_modes(p))
    x = p.design
    for _ in range(3):
        x = canonical_add(apply(F, x), x * 0.5)
    assert x.rank >= 40
    out = truncate(x, 1e-6)
    assert out.rank <= 15
    dense = x.full()
    assert np.linalg.norm(out.full() - dense) <= 1e-5 * np.linalg.norm(dense)


def test_truncate_deterministic(rng):
    a = random_canonical(rng, (12, 12, 12), 9, decay=0.3)
    o1, o2 = truncate(a, 1e-6), truncate(a, 1e-6)
    assert np.array_equal(o1.weights, o2.weights)
    assert all(np.array_equal(u, v) for u, v in zip(o1.factors, o2.factors))


# -- CANON I/O ---------------------------------------------------------------

def test_canon_roundtrip(tmp_path, rng):
    a = random_canonical(rng, (4, 5, 6), 3)
    write_canon(tmp_path / "a.canon", a)
    b = read_canon(tmp_path / "a.canon")
    assert b.shape == a.shape and b.rank == a.rank
    assert np.array_equal(b.full(), a.full())
    write_canon(tmp_path / "z.canon", CanonicalTensor.zeros((3, 3)))
    assert read_canon(tmp_path / "z.canon").rank == 0


def test_canon_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_text("HELLO 2 1 3 3\n")
    with pytest.raises(ValueError):
        read_canon(tmp_path / "bad")


# -- randomized invariants (100 trials each) ---------------------------------

@settings(max_examples=100, deadline=None, derandomize=True)
@given(cases)
def test_prop_add_matches_dense(case):
    a, b = _pair(case)
    dense = a.full() + b.full()
    scale = max(np.abs(dense).max(), np.abs(a.full()).max(), np.abs(b.full()).max(), 1e-300)
    assert np.abs(canonical_add(a, b).full() - dense).max() <= 1e-12 * scale


@settings(max_examples=100, deadline=None, derandomize=True)
@given(cases)
def test_prop_hadamard_matches_dense(case):
    a, b = _pair(case)
    dense = a.full() * b.full()
    scale = np.abs(a.full()).max() * np.abs(b.full()).max() + 1e-300
    assert np.abs(canonical_hadamard(a, b).full() - dense).max() <= 1e-12 * scale


@settings(max_examples=100, deadline=None, derandomize=True)
@given(cases)
def test_prop_inner_cauchy_schwarz(case):
    a, b = _pair(case)
    ab = canonical_inner(a, b)
    assert canonical_inner(a, a) >= 0
    assert abs(ab) <= canonical_norm(a) * canonical_norm(b) * (1 + 1e-10) + 1e-300
    ref = float(np.sum(a.full() * b.full()))
    assert abs(ab - ref) <= 1e-12 * (np.linalg.norm(a.full()) * np.linalg.norm(b.full()) + 1e-300)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(cases, st.sampled_from([1e-2, 1e-4, 1e-8]))
def test_prop_truncate_contractive(case, eps):
    a, b = _pair(case)
    x = canonical_add(a, b)
    out = truncate(x, eps)
    assert out.rank <= x.rank
    nrm = np.linalg.norm(x.full())
    assert np.linalg.norm(out.full() - x.full()) <= 3 * eps * nrm + 1e-13 * nrm


@settings(max_examples=100, deadline=None, derandomize=True)
@given(cases)
def test_prop_deterministic(case):
    a, b = _pair(case)
    x = canonical_add(a, b)
    o1, o2 = truncate(x, 1e-6), truncate(x, 1e-6)
    assert np.array_equal(o1.full(), o2.full())
    assert canonical_inner(a, b) == canonical_inner(a, b)
