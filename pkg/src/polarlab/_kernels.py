"""Hot loops with two interchangeable backends.

Each kernel has a numba implementation and a pure-numpy one. The active pair is
picked once at import time: numba when it imports cleanly, unless the
environment variable ``POLARLAB_NO_NUMBA`` is set to a truthy value. Both
backends return identical results; ``benchmarks/bench_kernels.py`` times them
against each other.

Kernels
-------
coset_hist
    Weight histogram of the coset ``v + span(basis)`` over a finite field.
tail_msgs
    Successive-cancellation child message for one kernel position: sums the
    product of per-position likelihoods over all tails ``u_{j+1..l}``.
"""

from __future__ import annotations

import itertools
import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore
        def wrap(fn):
            return fn

        return wrap


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = _HAVE_NUMBA and not _flag("POLARLAB_NO_NUMBA")
BACKEND = "numba" if USE_NUMBA else "numpy"


def coset_steps(basis: np.ndarray, add_t: np.ndarray, mul_t: np.ndarray, neg_t: np.ndarray) -> np.ndarray:
    """Odometer increments: steps[i, c] = (c+1)*b_i - c*b_i, wrapping at q-1."""
    d, n = basis.shape
    q = add_t.shape[0]
    steps = np.zeros((d, q, n), dtype=np.int64)
    for i in range(d):
        for c in range(q):
            nxt = (c + 1) % q
            steps[i, c] = add_t[mul_t[nxt, basis[i]], neg_t[mul_t[c, basis[i]]]]
    return steps


@njit(cache=True)
def _coset_hist_nb(v, steps, add_t):
    d = steps.shape[0]
    q = steps.shape[1]
    n = v.shape[0]
    hist = np.zeros(n + 1, dtype=np.int64)
    cur = v.copy()
    digits = np.zeros(d, dtype=np.int64)
    w = 0
    for k in range(n):
        if cur[k] != 0:
            w += 1
    while True:
        hist[w] += 1
        i = 0
        while i < d:
            c = digits[i]
            for k in range(n):
                old = cur[k]
                new = add_t[old, steps[i, c, k]]
                if old == 0 and new != 0:
                    w += 1
                elif old != 0 and new == 0:
                    w -= 1
                cur[k] = new
            if c + 1 < q:
                digits[i] = c + 1
                break
            digits[i] = 0
            i += 1
        if i == d:
            break
    return hist


def _span(basis: np.ndarray, add_t: np.ndarray, mul_t: np.ndarray) -> np.ndarray:
    q = add_t.shape[0]
    n = basis.shape[1]
    span = np.zeros((1, n), dtype=np.int64)
    for b in basis:
        mults = mul_t[np.arange(q)[:, None], b[None, :]]
        span = add_t[span[None, :, :], mults[:, None, :]].reshape(-1, n)
    return span


def _coset_hist_np(v, basis, add_t, mul_t, chunk_bits=16):
    q = add_t.shape[0]
    d, n = basis.shape
    a = 0
    while a < d and q ** (a + 1) <= (1 << chunk_bits):
        a += 1
    low = _span(basis[:a], add_t, mul_t)
    high = basis[a:]
    hist = np.zeros(n + 1, dtype=np.int64)
    base = add_t[low, v[None, :]]
    for coeffs in itertools.product(range(q), repeat=len(high)):
        off = np.zeros(n, dtype=np.int64)
        for c, b in zip(coeffs, high):
            if c:
                off = add_t[off, mul_t[c, b]]
        w = np.count_nonzero(add_t[base, off[None, :]], axis=1)
        hist += np.bincount(w, minlength=n + 1)
    return hist


def coset_hist_numba(v, basis, add_t, mul_t, neg_t):
    v = np.ascontiguousarray(v, dtype=np.int64)
    if basis.shape[0] == 0:
        hist = np.zeros(v.shape[0] + 1, dtype=np.int64)
        hist[np.count_nonzero(v)] = 1
        return hist
    steps = coset_steps(basis.astype(np.int64), add_t, mul_t, neg_t)
    return _coset_hist_nb(v, steps, np.ascontiguousarray(add_t, dtype=np.int64))


def coset_hist_numpy(v, basis, add_t, mul_t, neg_t):
    v = np.asarray(v, dtype=np.int64)
    return _coset_hist_np(v, np.asarray(basis, dtype=np.int64).reshape(-1, v.shape[0]), add_t, mul_t)


def tail_table(Gs: np.ndarray, add_t: np.ndarray, mul_t: np.ndarray) -> np.ndarray:
    """All (a, tail) @ Gs, ordered with ``a`` as the most significant digit."""
    q = add_t.shape[0]
    r, l = Gs.shape
    out = np.zeros((q**r, l), dtype=np.int64)
    for idx, coeffs in enumerate(itertools.product(range(q), repeat=r)):
        acc = np.zeros(l, dtype=np.int64)
        for c, row in zip(coeffs, Gs):
            if c:
                acc = add_t[acc, mul_t[c, row]]
        out[idx] = acc
    return out


@njit(cache=True)
def _tail_msgs_nb(L, pre, table, add_t):
    B, l, q = L.shape
    C = table.shape[0]
    per = C // q
    out = np.zeros((B, q), dtype=np.float64)
    for b in range(B):
        for c in range(C):
            p = 1.0
            for i in range(l):
                p *= L[b, i, add_t[pre[b, i], table[c, i]]]
                if p == 0.0:
                    break
            out[b, c // per] += p
    return out


def tail_msgs_numba(L, pre, table, add_t):
    return _tail_msgs_nb(
        np.ascontiguousarray(L, dtype=np.float64),
        np.ascontiguousarray(pre, dtype=np.int64),
        np.ascontiguousarray(table, dtype=np.int64),
        np.ascontiguousarray(add_t, dtype=np.int64),
    )


def tail_msgs_numpy(L, pre, table, add_t, max_cells=1 << 22):
    B, l, q = L.shape
    C = table.shape[0]
    out = np.empty((B, q), dtype=np.float64)
    step = max(1, max_cells // max(1, C * l))
    cols = np.arange(l)[None, None, :]
    for s in range(0, B, step):
        e = min(B, s + step)
        x = add_t[pre[s:e, None, :], table[None, :, :]]
        vals = L[np.arange(s, e)[:, None, None], cols, x].prod(axis=2)
        out[s:e] = vals.reshape(e - s, q, C // q).sum(axis=2)
    return out


if USE_NUMBA:
    coset_hist = coset_hist_numba
    tail_msgs = tail_msgs_numba
else:
    coset_hist = coset_hist_numpy
    tail_msgs = tail_msgs_numpy
