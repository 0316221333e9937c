"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (see conftest.py) before asserting, so the
summary lists every criterion even when one fails.
"""

import itertools
import json
import math
import time

import numpy as np
import oracles
from polarlab.channel import channel_to_json, from_trans, gallager_e0, make_channel, params, symmetrize
from polarlab.cli import main
from polarlab.codec import encode, sc_decode
from polarlab.construct import INFO, CodeSpec, build_frozen, build_pruned, theta_family
from polarlab.gf import get_field
from polarlab.kernel import DistanceStats, arikan, distances, g_barg, g_ye, kron_power
from polarlab.mdp import RHO_SBDMC, RegionSpec, bec_eigen_ratio, bec_scaling_exponent, region_boundary
from polarlab.multiterminal import TOUR, JointSource, SplitConfig, cond_entropy_set, dsbs, duty_point, solve_knob, vertex
from polarlab.transform import synthesize
from test_transform import ftpc_violations, random_channel, random_ergodic

BEC = make_channel("bec", epsilon=0.5)


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


def test_c01_eigen_ratio(report):
    with Timer() as t:
        r = bec_eigen_ratio(arikan(), "sqrt_z_1mz")
    ok = abs(r - math.sqrt(3) / 2) < 1e-6 and t.s < 1
    report(1, ok, f"ratio={r:.9f} target={math.sqrt(3) / 2:.9f} time={t.s:.2f}s")
    assert ok


def test_c02_scaling_exponent(report):
    with Timer() as t:
        res = bec_scaling_exponent(arikan())
    ok = 1 / 3.70 <= res.rho <= 1 / 3.56 and t.s < 30
    report(2, ok, f"rho={res.rho:.5f} (1/rho={1 / res.rho:.4f}) iterations={res.iterations} time={t.s:.2f}s")
    assert ok


def test_c03_tangent_point(report):
    with Timer() as t:
        res = region_boundary(RegionSpec.binary(RHO_SBDMC), 101)
    px, py = res["tangent"]
    ok = abs(px - 0.4208) <= 2e-3 and abs(py - 0.0182) <= 2e-3 and t.s < 1
    report(3, ok, f"tangent=({px:.4f}, {py:.4f}) time={t.s:.2f}s")
    assert ok


def test_c04_kernel_data(report):
    with Timer() as t:
        ye, barg = distances(g_ye()), distances(g_barg())
    got = [sorted(ye.dz), sorted(ye.ds), sorted(barg.dz), sorted(barg.ds)]
    ok = got == [[1, 1, 3], [1, 2, 2], [1, 2, 2], [1, 1, 3]] and t.s < 1
    report(4, ok, f"G_Ye=({got[0]}, {got[1]}) G_Barg=({got[2]}, {got[3]}) time={t.s:.2f}s")
    assert ok


def test_c05_ftpc(report):
    bad = []
    with Timer() as t:
        cases = list(itertools.product((2, 3, 4), (2, 3)))
        for i in range(200):
            q, l = cases[i % len(cases)]
            K = random_ergodic(q, l, i)
            W = random_channel(q, 1000 + i)
            bad += [(q, l, i, v) for v in ftpc_violations(W, K)]
    ok = not bad and t.s < 120
    report(5, ok, f"instances=200 violations={len(bad)} time={t.s:.1f}s")
    assert ok, bad[:5]


def _sym_binary(rng):
    return symmetrize(from_trans(get_field(2), rng.dirichlet(np.ones(3), size=2), rng.dirichlet(np.ones(2))))


def test_c06_arikan_identities(report):
    rng = np.random.default_rng(6)
    bad = 0
    with Timer() as t:
        for _ in range(200):
            W = _sym_binary(rng)
            p = params(W)
            a, b = params(synthesize(W, arikan(), 1)), params(synthesize(W, arikan(), 2))
            Z, T = p.Z, p.T
            bad += abs(b.Z - Z * Z) > 1e-9
            bad += abs(a.T - T * T) > 1e-9
            bad += not (Z * math.sqrt(2 - Z * Z) - 1e-9 <= a.Z <= 2 * Z - Z * Z + 1e-9)
    ok = bad == 0 and t.s < 60
    report(6, ok, f"channels=200 violations={bad} time={t.s:.1f}s")
    assert ok


def test_c07_tolls(report):
    bad = []
    with Timer() as t:
        for q in (2, 3, 4, 5):
            lq = math.log(q)
            rng = np.random.default_rng(70 + q)
            for i in range(1000):
                m = int(rng.integers(2, 6))
                alpha = (0.2, 1.0, 3.0)[i % 3]
                Q = rng.dirichlet(np.ones(q)) if i % 2 else None
                W = from_trans(get_field(q), rng.dirichlet(np.full(m, alpha), size=q), Q)
                p = params(W)
                bad += [(q, i, v) for v in oracles.toll_violations(q, p)]
                # second moment of every posterior row
                post = W.joint / W.joint.sum(axis=0, keepdims=True)
                w = np.where(post > 0, post, 1.0)
                if ((post * np.log(w) ** 2).sum(axis=0) > 1.2 * lq * lq + 1e-12).any():
                    bad.append((q, i, "second_moment"))
                if i % 4 == 0:
                    Wu = from_trans(get_field(q), W.trans)
                    pu = params(Wu)
                    for tt in (-0.4, -0.2, 0.3, 1.0):
                        e0, _ = gallager_e0(Wu, tt)
                        if e0 < pu.I * tt * lq - tt * tt * lq * lq - 1e-12:
                            bad.append((q, i, f"E0@{tt}"))
    ok = not bad and t.s < 120
    report(7, ok, f"channels=4000 violations={len(bad)} time={t.s:.1f}s")
    assert ok, bad[:5]


def test_c08_pruned_growth(report):
    ns = (10, 14, 18, 22)
    with Timer() as t:
        pw = [build_pruned(BEC, arikan(), n, 4.0**-n) for n in ns]
        el = [build_pruned(BEC, arikan(), n, theta_family("elpin", n, 2, 0.1)) for n in ns]
    es = [s.expected_s for s in pw]
    quo = [e / math.log2(n) for e, n in zip(es, ns)]
    gap = [0.5 - s.rate for s in pw]
    lin = [s.expected_s / n for s, n in zip(el, ns)]
    ok = (
        all(a < b for a, b in zip(es, es[1:]))
        and max(quo) / min(quo) < 2
        and min(lin) > 0.25
        and all(a > b for a, b in zip(gap, gap[1:]))
        and t.s < 300
    )
    report(8, ok, f"E[s]={[round(e, 3) for e in es]} E[s]/log2n max/min={max(quo) / min(quo):.3f} "
                  f"elpin E[s]/n min={min(lin):.3f} gap={[round(g, 4) for g in gap]} time={t.s:.1f}s")
    assert ok


def _ml_agreement():
    G = kron_power(arikan(), 3).G
    U = np.array(list(itertools.product(range(2), repeat=8)))
    patterns = np.array(list(itertools.product([False, True], repeat=8)))
    rng = np.random.default_rng(9)
    checked = disagree = 0
    for mask in range(256):
        info = [i for i in range(8) if mask >> (7 - i) & 1]
        label = np.array([INFO if i in info else "frozen" for i in range(8)])
        spec = CodeSpec(arikan(), 3, np.full(8, 3), np.arange(8), label, np.zeros(8), 0.0)
        # codebook: frozen positions zero
        book = U[(U[:, [i for i in range(8) if i not in info]] == 0).all(axis=1)] if len(info) < 8 else U
        C = book @ G % 2
        u = rng.integers(0, 2, len(info))
        x = encode(spec, u)
        res = sc_decode(spec, np.where(patterns, -1, x[None, :]))
        for p, ok, dec in zip(patterns, res["success"], res["info"]):
            if not ok:
                continue
            checked += 1
            hit = np.all((C == x) | p, axis=1)
            if hit.sum() != 1 or not np.array_equal(book[hit][0][info], dec):
                disagree += 1
    return checked, disagree


def _cli(capsys, *argv):
    rc = main(list(argv))
    return rc, capsys.readouterr().out


def test_c09_codec(report, tmp_path, capsys):
    with Timer() as t:
        spec = build_frozen(BEC, arikan(), 10, budget=0.01)
        rng = np.random.default_rng(90)
        u = rng.integers(0, 2, (100, spec.K))
        rt = sc_decode(spec, encode(spec, u))
        roundtrip = bool(rt["success"].all() and np.array_equal(rt["info"], u))
        sp, ch = tmp_path / "spec.json", tmp_path / "bec.json"
        sp.write_text(json.dumps(spec.to_json()))
        ch.write_text(json.dumps(channel_to_json(BEC)))
        rc, out = _cli(capsys, "sim", "--spec", str(sp), "--channel", str(ch), "--trials", "10000", "--threads", "4")
        total = [l for l in out.splitlines() if l.startswith("total,")][0].split(",")
        fer = float(total[2])
        checked, disagree = _ml_agreement()
    sigma = math.sqrt(0.01 * 0.99 / 10_000)
    ok = rc == 0 and spec.design_pe <= 0.01 and fer <= 0.01 + 3 * sigma and roundtrip and disagree == 0 and checked > 0 and t.s < 180
    report(9, ok, f"K={spec.K} design_pe={spec.design_pe:.5f} FER={fer:.5f} (limit {0.01 + 3 * sigma:.5f}) "
                  f"roundtrip={roundtrip} ML checks={checked} disagreements={disagree} time={t.s:.1f}s")
    assert ok


def test_c10_cramer(report):
    with Timer() as t:
        st = DistanceStats([1, 2])
        err = max(abs(st.L(s) - (1 - oracles.h2(s))) for s in np.linspace(0.01, 0.5, 51))
    ok = err < 1e-6 and t.s < 1
    report(10, ok, f"max |L - (1 - h2)|={err:.2e} time={t.s:.2f}s")
    assert ok


def test_c11_hypotenuse_trend(report):
    pis, rhos, errors = [], [], []
    with Timer() as t:
        for l in (16, 64, 256):
            D = [math.ceil(j * j / (3 * l)) for j in range(1, l + 1)]
            rho0 = 0.5 - 4 * math.log(math.log(l)) / math.log(l)
            try:
                res = region_boundary(RegionSpec.from_profile(rho0, D, l), 101)
                pis.append(res["pi_intercept"])
                rhos.append(res["rho_intercept"])
            except ValueError as exc:
                errors.append(f"l={l}: rho0={rho0:.4f} rejected ({exc})")
                pis.append(DistanceStats(D, l).varpi)
    ok = (
        not errors
        and all(a < b <= 1 for a, b in zip(pis, pis[1:]))
        and all(a < b <= 0.5 for a, b in zip(rhos, rhos[1:]))
        and t.s < 5
    )
    report(11, ok, f"pi_intercepts={[round(p, 4) for p in pis]} rho_intercepts={[round(r, 4) for r in rhos]} "
                   f"{'; '.join(errors)} time={t.s:.2f}s")
    assert ok


def test_c12_slepian_wolf(report):
    with Timer() as t:
        P = dsbs(0.1)
        h = oracles.h2(0.1)
        e1 = np.abs(duty_point(P, SplitConfig(2, {"1": 1.0})) - [1, h]).max()
        e2 = np.abs(duty_point(P, SplitConfig(2, {"2": 1.0})) - [h, 1]).max()
        mid = np.array([(1 + h) / 2] * 2)
        em = np.abs(duty_point(P, solve_knob(P, mid)) - mid).max()
        rng = np.random.default_rng(12)
        p3 = rng.random(12) ** 2
        P3 = JointSource((2, 3, 2), p3 / p3.sum())
        total = cond_entropy_set(P3, {1, 2, 3})
        ev, es = 0.0, abs(duty_point(P, SplitConfig(2, {"1": 0.3, "2": 0.7})).sum() - cond_entropy_set(P, {1, 2}))
        for k in TOUR:
            B = duty_point(P3, SplitConfig(3, {k: 1.0}))
            ev = max(ev, np.abs(B - vertex(P3, k)).max())
            es = max(es, abs(B.sum() - total))
        B = duty_point(P3, SplitConfig(3, {"123": 0.2, "312'": 0.5, "213'": 0.3}))
        es = max(es, abs(B.sum() - total))
    ok = e1 <= 1e-9 and e2 <= 1e-9 and em <= 1e-6 and ev <= 1e-9 and es <= 1e-12 and t.s < 30
    report(12, ok, f"endpoints err=({e1:.1e}, {e2:.1e}) midpoint err={em:.1e} vertex err={ev:.1e} "
                   f"sum err={es:.1e} time={t.s:.2f}s")
    assert ok


def test_c13_random_kernel_profile(report, capsys):
    with Timer() as t:
        rc, out = _cli(capsys, "kernel", "random", "--l", "16", "--q", "2", "--trials", "200")
        samples = json.loads(out)["samples"]
        rate = np.mean([s["dz"][15] >= 6 for s in samples])
    exact = float(oracles.nonzero_tail(16, 6))
    ok = rc == 0 and len(samples) == 200 and abs(rate - exact) <= 0.05 and t.s < 120
    report(13, ok, f"pass rate={rate:.3f} exact tail={exact:.4f} time={t.s:.1f}s")
    assert ok


def test_c14_determinism(report, tmp_path, capsys):
    spec = build_frozen(BEC, arikan(), 10, budget=0.01)
    sp, ch, bsc = tmp_path / "spec.json", tmp_path / "bec.json", tmp_path / "bsc.json"
    sp.write_text(json.dumps(spec.to_json()))
    ch.write_text(json.dumps(channel_to_json(BEC)))
    bsc.write_text(json.dumps(channel_to_json(make_channel("bsc", crossover=0.11))))
    runs = {
        "sim": ["sim", "--spec", str(sp), "--channel", str(ch), "--trials", "10000"],
        "process-bec": ["process", str(ch), "--depth", "20", "--trials", "20000"],
        "process-bsc": ["process", str(bsc), "--depth", "5", "--trials", "1000"],
        "kernel-random": ["kernel", "random", "--l", "16", "--trials", "200"],
    }
    diffs = []
    with Timer() as t:
        for name, argv in runs.items():
            outs = []
            for threads in ("1", "2", "4"):
                o = tmp_path / f"{name}-{threads}.out"
                rc, _ = _cli(capsys, *argv, "--threads", threads, "--out", str(o))
                outs.append((rc, o.read_bytes()))
            if any(r != 0 for r, _ in outs) or len({b for _, b in outs}) != 1:
                diffs.append(name)
    ok = not diffs
    report(14, ok, f"runs={list(runs)} threads=1,2,4 mismatches={diffs} time={t.s:.1f}s")
    assert ok
