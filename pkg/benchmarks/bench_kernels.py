"""Numba vs numpy timings for the two hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported side by side; POLARLAB_NO_NUMBA only changes which
one the library uses by default.
"""

import argparse
import time

import numpy as np

from polarlab import _kernels
from polarlab.gf import get_field, sample_gl


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def coset_case(l, q, seed=1):
    F = get_field(q)
    G = sample_gl(F, l, seed)
    return G[0], G[1:], F.add, F.mul, F.neg


def tail_case(l, q, batch, seed=2):
    F = get_field(q)
    rng = np.random.default_rng(seed)
    G = sample_gl(F, l, seed)
    table = _kernels.tail_table(G[1:], F.add, F.mul)
    L = rng.random((batch, l, q))
    pre = rng.integers(0, q, size=(batch, l))
    return L, pre, table, F.add


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _kernels._HAVE_NUMBA:
        print("numba not installed; nothing to compare")
        return
    print(f"default backend: {_kernels.BACKEND}")
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for l, q in ((16, 2), (20, 2), (10, 4)):
        case = coset_case(l, q)
        a = _kernels.coset_hist_numba(*case)
        b = _kernels.coset_hist_numpy(*case)
        assert np.array_equal(a, b)
        tn = best_of(lambda: _kernels.coset_hist_numba(*case), args.repeat)
        tp = best_of(lambda: _kernels.coset_hist_numpy(*case), args.repeat)
        print(f"{f'coset_hist l={l} q={q}':<28}{tn * 1e3:>12.2f}{tp * 1e3:>12.2f}{tp / tn:>10.1f}")
    for l, q, batch in ((2, 2, 1 << 16), (4, 3, 1 << 14), (8, 2, 1 << 12)):
        case = tail_case(l, q, batch)
        a = _kernels.tail_msgs_numba(*case)
        b = _kernels.tail_msgs_numpy(*case)
        assert np.allclose(a, b, rtol=1e-12, atol=0)
        tn = best_of(lambda: _kernels.tail_msgs_numba(*case), args.repeat)
        tp = best_of(lambda: _kernels.tail_msgs_numpy(*case), args.repeat)
        print(f"{f'tail_msgs l={l} q={q} B={batch}':<28}{tn * 1e3:>12.2f}{tp * 1e3:>12.2f}{tp / tn:>10.1f}")


if __name__ == "__main__":
    main()
