import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from polarlab.channel import from_trans, make_channel, params, symmetrize
from polarlab.gf import get_field, sample_gl
from polarlab.kernel import Kernel, arikan, enum_eval, g_ye, identity, is_ergodic
from polarlab.transform import ENUM_GUARD, bec_synthesize, erasure_of, q_as_channel, synthesize, synthesize_all


def random_ergodic(q, l, seed):
    F = get_field(q)
    s = seed
    while True:
        K = Kernel(F, sample_gl(F, l, s))
        if is_ergodic(K) is True:
            return K
        s += 10_007


def random_channel(q, seed, m=None):
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(2, 4))
    return from_trans(get_field(q), rng.dirichlet(np.full(m, 0.7), size=q))


def ftpc_violations(W, K, tol=1e-9):
    prof = K.profile
    p = params(W)
    res = synthesize_all(W, K)
    out = []
    if abs(sum(c.H for c in res.params) - K.l * p.H) >= tol:
        out.append("H")
    for j, c in enumerate(res.params):
        if c.Zmxd > enum_eval(prof.fz[j], p.Zmxd) + tol:
            out.append(f"Z{j + 1}")
        if c.Smax > enum_eval(prof.fs[j], p.Smax) + tol:
            out.append(f"S{j + 1}")
    return out


def test_arikan_bec_children():
    W = make_channel("bec", epsilon=0.5)
    c1, c2 = synthesize(W, arikan(), 1), synthesize(W, arikan(), 2)
    assert erasure_of(c1) == pytest.approx(0.75, abs=1e-12)
    assert erasure_of(c2) == pytest.approx(0.25, abs=1e-12)


def test_child_index_range():
    with pytest.raises(ValueError):
        synthesize(make_channel("bsc", crossover=0.1), arikan(), 3)
    with pytest.raises(ValueError):
        synthesize(make_channel("bsc", crossover=0.1), arikan(), 0)


def test_guard_names_bound(monkeypatch):
    W = random_channel(2, 0, m=60)
    K = identity(4)
    with pytest.raises(ValueError, match=str(ENUM_GUARD)):
        synthesize(W, K, 4)
    import polarlab.transform as tr

    monkeypatch.setattr(tr, "ENUM_GUARD", 10**4)
    D = synthesize(W, K, 4, merge_cap=64)
    assert D.degraded and D.n_out <= 64
    assert params(D).H >= params(W).H - 1e-12


def test_bec_synthesize_examples():
    for eps in np.linspace(0, 1, 9):
        z1, z2 = bec_synthesize(eps, arikan())
        assert (z1, z2) == pytest.approx(oracles.arikan_bec(eps), abs=1e-15)
        assert bec_synthesize(eps, identity(3)) == pytest.approx([eps] * 3, abs=1e-15)
    W = make_channel("bec", epsilon=0.5)
    exact = [erasure_of(synthesize(W, g_ye(), j)) for j in (1, 2, 3)]
    assert bec_synthesize(0.5, g_ye()) == pytest.approx(exact, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.floats(0.01, 0.99), st.integers(0, 2**31))
def test_bec_fast_path_matches_tables(l, eps, seed):
    K = Kernel(get_field(2), sample_gl(get_field(2), l, seed))
    W = make_channel("bec", epsilon=eps)
    exact = [erasure_of(synthesize(W, K, j)) for j in range(1, l + 1)]
    assert bec_synthesize(eps, K) == pytest.approx(exact, abs=1e-12)


def test_q_as_channel():
    assert params(q_as_channel([0.5, 0.5])).H == pytest.approx(1)
    assert params(q_as_channel([1.0, 0.0])).H == pytest.approx(0, abs=1e-15)
    assert params(q_as_channel([0.89, 0.11])).H == pytest.approx(oracles.h2(0.11), abs=1e-12)
    assert params(q_as_channel([0.89, 0.11])).H == pytest.approx(0.49992, abs=1e-5)


@pytest.mark.parametrize("q,l", [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2)])
def test_ftpc_random(q, l):
    bad = []
    for s in range(8):
        bad += ftpc_violations(random_channel(q, 100 * q + s), random_ergodic(q, l, s))
    assert bad == []


def test_child_input_distribution():
    # uniform Q stays uniform; a non-uniform Q gives the exact marginal of U_j
    W = random_channel(3, 5)
    for j in (1, 2):
        assert np.allclose(synthesize(W, arikan(3), j).Q, 1 / 3)
    F = get_field(2)
    Q = np.array([0.8, 0.2])
    V = from_trans(F, [[0.9, 0.1], [0.3, 0.7]], Q)
    # U = X G^{-1}: u1 = x1 + x2, u2 = x2
    assert synthesize(V, arikan(), 1).Q == pytest.approx([0.68, 0.32])
    assert synthesize(V, arikan(), 2).Q == pytest.approx(Q)


def _sym_binary(seed):
    rng = np.random.default_rng(seed)
    F = get_field(2)
    return symmetrize(from_trans(F, rng.dirichlet(np.ones(3), size=2), rng.dirichlet(np.ones(2))))


def test_arikan_identities():
    K = arikan()
    for s in range(60):
        W = _sym_binary(s)
        p = params(W)
        a, b = params(synthesize(W, K, 1)), params(synthesize(W, K, 2))
        Z, T = p.Z, p.T
        assert b.Z == pytest.approx(Z * Z, abs=1e-9)
        assert Z * math.sqrt(2 - Z * Z) - 1e-9 <= a.Z <= 2 * Z - Z * Z + 1e-9
        assert a.T == pytest.approx(T * T, abs=1e-9)
        assert b.T <= 2 * T - T * T + 1e-9


def test_evolution_of_t_printed_form_is_too_strong():
    # T(W^(2)) <= 2T - T = T fails already on the erasure channel: 1 - eps^2 > 1 - eps
    W = make_channel("bec", epsilon=0.5)
    T = params(W).T
    T2 = params(synthesize(W, arikan(), 2)).T
    assert T2 > 2 * T - T + 0.1
    assert T2 == pytest.approx(2 * T - T * T, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3]), st.integers(0, 2**31))
def test_transformation_in_class(q, seed):
    rng = np.random.default_rng(seed)
    W = from_trans(get_field(q), rng.dirichlet(np.ones(2), size=q), rng.dirichlet(np.ones(q)))
    S = symmetrize(W)
    K = arikan(q)
    for j in (1, 2):
        a, b = params(synthesize(W, K, j)), params(synthesize(S, K, j))
        for k in ("H", "Pe", "Z", "Zmxd", "T", "S", "Smax"):
            assert getattr(a, k) == pytest.approx(getattr(b, k), abs=1e-10)
