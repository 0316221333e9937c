import math

import numpy as np
import pytest

import oracles
from polarlab.channel import from_trans, make_channel, symmetrize
from polarlab.gf import get_field
from polarlab.kernel import arikan, g_ye
from polarlab.process import (
    bec_density, bec_stopped_exact, enumerate_tree, sample_branches, sample_paths, stop_label, stopped_paths,
)
from polarlab.transform import synthesize_all


def test_enumerate_depth_one_is_synthesize_all():
    W = make_channel("bsc", crossover=0.2)
    st = enumerate_tree(W, arikan(), 1)
    res = synthesize_all(W, arikan())
    assert np.allclose(st.values[1]["H"], [p.H for p in res.params])
    assert np.allclose(st.values[1]["Zmxd"], [p.Zmxd for p in res.params])


@pytest.mark.parametrize("K", [arikan(), g_ye()])
def test_enumerate_martingale(K):
    rng = np.random.default_rng(4)
    W = from_trans(get_field(2), rng.dirichlet(np.ones(3), size=2))
    st = enumerate_tree(W, K, 3 if K.l == 2 else 2)
    for d in range(st.depth + 1):
        assert st.weights[d].sum() == pytest.approx(1)
        assert st.mean(d, "H") == pytest.approx(st.mean(0, "H"), abs=1e-9)


def test_bec_depth_two_multiset():
    st = enumerate_tree(make_channel("bec", epsilon=0.5), arikan(), 2)
    assert sorted(st.values[2]["H"]) == pytest.approx(sorted([0.9375, 0.5625, 0.4375, 0.0625]), abs=1e-12)
    ex = bec_density(0.5, arikan(), 2)
    assert sorted(ex.values[2]["H"]) == pytest.approx(sorted(st.values[2]["H"]), abs=1e-12)


def test_bec_density_exact():
    st = bec_density(0.3, arikan(), 12)
    assert st.values[0]["H"].tolist() == [0.3]
    assert np.allclose(st.values[8]["H"], oracles.bec_tree(0.3, 8), atol=1e-14)
    for d in range(13):
        assert st.mean(d, "H") == pytest.approx(0.3, abs=1e-12)
    z = [st.mean(d, "Zmxd") for d in range(13)]
    assert all(b <= a + 1e-15 for a, b in zip(z, z[1:]))
    with pytest.raises(ValueError):
        bec_density(0.5, arikan(), 30)


def test_bec_sampled_depth20():
    # finite-depth oracle: exact fraction of depth-20 leaves below 1e-6
    exact = bec_density(0.5, arikan(), 20)
    frac = float((exact.values[20]["H"] < 1e-6).mean())
    assert frac == pytest.approx(0.45938, abs=1e-4)
    st = bec_density(0.5, arikan(), 20, "sampled", trials=100_000, seed=11)
    sampled = float((st.values[20]["H"] < 1e-6).mean())
    sigma = math.sqrt(frac * (1 - frac) / 100_000)
    assert abs(sampled - frac) < 4 * sigma + 1e-12


def test_sample_branches_determinism():
    a = sample_branches(5, 1000, 7, 3, threads=1)
    b = sample_branches(5, 1000, 7, 3, threads=4)
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() <= 2
    assert np.array_equal(sample_branches(5, 10, 7, 3)[3], sample_branches(5, 4, 7, 3)[3])


def test_sample_paths_empty():
    st = sample_paths(make_channel("bsc", crossover=0.1), arikan(), 4, 0)
    assert st.values == [] and st.samples(0) == 0


def test_sample_paths_martingale_bsc():
    W = make_channel("bsc", crossover=0.11)
    st = sample_paths(W, arikan(), 8, 2000, seed=3, merge_cap=64)
    H0 = st.mean(0, "H")
    for d in range(9):
        h = st.values[d]["H"]
        sigma = h.std() / math.sqrt(h.size)
        assert abs(h.mean() - H0) < 4 * sigma + 1e-3  # slack for degrading merges
    z = [st.values[d]["Zmxd"] for d in range(9)]
    for a, b in zip(z, z[1:]):
        assert b.mean() <= a.mean() + 4 * b.std() / math.sqrt(b.size)


def test_sample_paths_thread_independent():
    W = make_channel("bsc", crossover=0.2)
    a = sample_paths(W, arikan(), 5, 300, seed=9, merge_cap=32, threads=1)
    b = sample_paths(W, arikan(), 5, 300, seed=9, merge_cap=32, threads=3)
    for d in range(6):
        for k in a.values[d]:
            assert np.array_equal(a.values[d][k], b.values[d][k])


def test_common_fate_on_nodes():
    W = symmetrize(from_trans(get_field(2), [[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]], [0.4, 0.6]))
    st = enumerate_tree(W, arikan(), 3)
    for d in range(4):
        H, Z = st.values[d]["H"], st.values[d]["Zmxd"]
        assert (Z >= H - 1e-12).all()
        assert (Z**2 <= H + 1e-12).all()
        assert (1 - Z >= (1 - H) * math.log(2) - 1e-12).all()


def test_stop_label_rules():
    lo, hi = {"Zmxd": 1e-9, "Smax": 0.9}, {"Zmxd": 0.9, "Smax": 1e-9}
    mid = {"Zmxd": 0.5, "Smax": 0.5}
    assert stop_label(lo, 1e-6) == "Z-stop"
    assert stop_label(hi, 1e-6) == "S-stop"
    assert stop_label(mid, 1e-6) is None
    assert stop_label(lo, 1e-6, hi) == "info"
    assert stop_label(hi, 1e-6, lo) == "impossible"
    assert stop_label(lo, 1e-6, lo) == "shaped"
    assert stop_label(hi, 1e-6, hi) == "frozen"
    assert stop_label(lo, 1e-6, mid) is None


def test_stopped_trivial():
    W = make_channel("bec", epsilon=0.5)
    st = stopped_paths(W, arikan(), 0.6, 5, 100)
    assert (st.s == 0).all()
    st = stopped_paths(W, arikan(), 1e-9, 5, 200)
    assert (st.s <= 5).all()
    with pytest.raises(ValueError):
        stopped_paths(W, arikan(), 1.5, 5, 10)


def test_stopped_bec_against_exact():
    ex = bec_stopped_exact(0.5, arikan(), 4.0**-16, 16)
    assert ex["Z-stop"] + ex["S-stop"] + ex["depth-out"] == pytest.approx(1, abs=1e-15)
    means = []
    for seed in (1, 2):
        st = stopped_paths(make_channel("bec", epsilon=0.5), arikan(), 4.0**-16, 16, 20_000, seed=seed)
        means.append(st.mean_s)
        assert abs(st.mean_s - ex["mean_s"]) < 0.05
        assert sum(st.frequencies().values()) == pytest.approx(1)
    assert abs(means[0] - means[1]) < 0.1


def test_stopped_general_matches_bec_path():
    # a BEC given as a generic table (duplicate erasure column) follows the table path
    F = get_field(2)
    W = from_trans(F, [[0.6, 0.0, 0.2, 0.2], [0.0, 0.6, 0.2, 0.2]])
    gen = stopped_paths(W, arikan(), 1e-3, 8, 500, seed=4, asymmetric_Q=None)
    fast = stopped_paths(make_channel("bec", epsilon=0.4), arikan(), 1e-3, 8, 500, seed=4)
    assert np.array_equal(gen.s, fast.s)


def test_csv_rows():
    st = bec_density(0.5, arikan(), 2)
    rows = list(st.csv_rows())
    assert len(rows) == 3 * 4
    assert rows[0] == (0, "H", 0.5, 1, 0)


@pytest.mark.slow
def test_sample_paths_bsc_depth10():
    W = make_channel("bsc", crossover=0.11)
    st = sample_paths(W, arikan(), 10, 10_000, seed=0xC0DE, merge_cap=64)
    h = st.values[10]["H"]
    assert abs(h.mean() - st.mean(0, "H")) < 4 * h.std() / math.sqrt(h.size)
