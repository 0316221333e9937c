"""Encoder and successive-cancellation decoder for CodeSpecs.

Layout: a node of length l*M holds its codeword as an (l, M) block, row i
being positions i*M .. i*M+M-1. Its children carry codewords v_0..v_{l-1} of
length M and the block is x[i, t] = sum_j G[j, i] v_j[t]. At full depth this
is x = u G^{kron n} with u in lexicographic path order.

Decoding walks the tree in path order. Messages are per-position likelihood
vectors over F_q, shaped (frames, positions, q), and are rescaled by their
maximum after every step. Erasure mode is the same recursion on 0/1
indicator vectors: a symbol is decided iff exactly one value survives.
Frames are decoded in batches since the tree walk is identical for all of them.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels, _rng, gf
from .channel import Dmc
from .construct import CodeSpec, INFO
from .kernel import Kernel
from .transform import erasure_of

SOFT_MAX_L = 8
BLOCK = 256


def _combine(K: Kernel, kids: list) -> np.ndarray:
    """Children codewords (each (..., M)) -> parent codeword (..., l*M)."""
    F = K.field
    V = np.stack(kids, axis=-2)  # (..., l, M)
    X = np.zeros_like(V)
    for i in range(K.l):
        acc = np.zeros(V.shape[:-2] + V.shape[-1:], dtype=np.int64)
        for j in range(K.l):
            g = K.G[j, i]
            if g:
                acc = F.add[acc, F.mul[g, V[..., j, :]]]
        X[..., i, :] = acc
    return X.reshape(V.shape[:-2] + (-1,))


def encode_full(K: Kernel, u: np.ndarray) -> np.ndarray:
    """u G^{kron m} for u of length l**m (leading axes are frames)."""
    u = np.asarray(u, dtype=np.int64)
    size = u.shape[-1]
    if size == 1:
        return u.copy()
    M = size // K.l
    kids = [encode_full(K, u[..., j * M:(j + 1) * M]) for j in range(K.l)]
    return _combine(K, kids)


def _fill(spec: CodeSpec, d: int, i: int, size: int) -> np.ndarray:
    if spec.frozen_fill == "zeros":
        return np.zeros(size, dtype=np.int64)
    rng = _rng.stream(spec.fill_seed, i * spec.n + d)
    return encode_full(spec.kernel, rng.integers(0, spec.kernel.q, size=size))


def encode(spec: CodeSpec, info) -> np.ndarray:
    """Codeword(s) for information symbols in path order.

    ``info`` may be (K,) or (frames, K).
    """
    info = np.asarray(info, dtype=np.int64)
    single = info.ndim == 1
    if single:
        info = info[None, :]
    if info.shape[-1] != spec.K:
        raise ValueError(f"expected {spec.K} information symbols, got {info.shape[-1]}")
    if info.size and (info.min() < 0 or info.max() >= spec.kernel.q):
        raise ValueError("information symbols must be field elements")
    lm = spec.leaf_map()
    l, n = spec.l, spec.n
    pos = [0]

    def rec(d, i):
        size = l ** (n - d)
        lab = lm.get((d, i))
        if lab == INFO:
            out = info[:, pos[0]:pos[0] + size]
            pos[0] += size
            return out
        if lab is not None:
            return np.broadcast_to(_fill(spec, d, i, size), (info.shape[0], size))
        return _combine(spec.kernel, [rec(d + 1, i * l + j) for j in range(l)])

    x = np.ascontiguousarray(rec(0, 0))
    return x[0] if single else x


class _Decoder:
    def __init__(self, spec: CodeSpec, erasure: bool):
        K = spec.kernel
        if not erasure and K.l > SOFT_MAX_L:
            raise ValueError(f"soft decoding limited to l <= {SOFT_MAX_L}")
        self.spec = spec
        self.K = K
        self.F = K.field
        self.erasure = erasure
        self.lm = spec.leaf_map()
        self.tables = [_kernels.tail_table(K.G[j:], self.F.add, self.F.mul) for j in range(K.l)]
        self.ops = 0

    def _prefix(self, kids: list, M: int, B: int) -> np.ndarray:
        # contribution of decided children to every position, shape (B, M, l)
        F, K = self.F, self.K
        acc = np.zeros((B, M, K.l), dtype=np.int64)
        for j, v in enumerate(kids):
            acc = F.add[acc, F.mul[K.G[j][None, None, :], v[:, :, None]]]
        return acc

    def _norm(self, msg: np.ndarray) -> np.ndarray:
        if self.erasure:
            return (msg > 0).astype(np.float64)
        m = msg.max(axis=-1, keepdims=True)
        m[m == 0] = 1.0
        return msg / m

    def _hard(self, msg: np.ndarray):
        # ties -> smallest element; erasure mode flags ambiguous symbols
        dec = msg.argmax(axis=-1)
        amb = (msg > 0).sum(axis=-1) != 1 if self.erasure else np.zeros(dec.shape, dtype=bool)
        return dec.astype(np.int64), amb

    def run(self, L: np.ndarray):
        self.info = []
        self.fail = np.zeros(L.shape[0], dtype=bool)
        x = self.rec(0, 0, L)
        info = np.concatenate(self.info, axis=1) if self.info else np.zeros((L.shape[0], 0), dtype=np.int64)
        return info, x

    def rec(self, d: int, i: int, L: np.ndarray) -> np.ndarray:
        spec, K = self.spec, self.K
        B, size, q = L.shape
        self.ops += size
        lab = self.lm.get((d, i))
        if lab == INFO:
            dec, amb = self._hard(L)
            self.fail |= amb.any(axis=1)
            self.info.append(dec)
            return dec
        if lab is not None:
            return np.broadcast_to(_fill(spec, d, i, size), (B, size))
        l = K.l
        M = size // l
        Lb = L.reshape(B, l, M, q).transpose(0, 2, 1, 3).reshape(B * M, l, q)
        kids = []
        for j in range(l):
            pre = self._prefix(kids, M, B).reshape(B * M, l)
            msg = _kernels.tail_msgs(Lb, pre, self.tables[j], self.F.add)
            msg = self._norm(msg).reshape(B, M, q)
            kids.append(np.asarray(self.rec(d + 1, i * l + j, msg), dtype=np.int64))
        return _combine(K, kids)


def erasure_llh(q: int, received: np.ndarray) -> np.ndarray:
    """Indicator likelihoods from symbols with -1 marking an erasure."""
    r = np.asarray(received, dtype=np.int64)
    L = np.zeros(r.shape + (q,))
    er = r < 0
    L[er] = 1.0
    idx = np.nonzero(~er)
    L[idx + (r[~er],)] = 1.0
    return L


def sc_decode(spec: CodeSpec, received, mode: str = "erasure") -> dict:
    """Successive-cancellation decoding.

    erasure mode: ``received`` holds symbols, -1 for an erasure.
    soft mode: ``received`` holds per-position likelihoods, shape (..., N, q).
    Leading axes are frames.
    """
    q = spec.kernel.q
    if mode == "erasure":
        r = np.asarray(received)
        single = r.ndim == 1
        L = erasure_llh(q, r.reshape(-1, spec.N))
    elif mode == "soft":
        L = np.asarray(received, dtype=np.float64)
        single = L.ndim == 2
        L = L.reshape(-1, spec.N, q)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if L.shape[1] != spec.N:
        raise ValueError(f"expected {spec.N} positions")
    dec = _Decoder(spec, mode == "erasure")
    info, _ = dec.run(L)
    out = {"info": info, "success": ~dec.fail, "op_count": dec.ops}
    if single:
        out = {"info": info[0], "success": bool(~dec.fail[0]), "op_count": dec.ops}
    return out


def _channel_llh(W: Dmc, x: np.ndarray, rng: np.random.Generator):
    """Pass codewords through W; return received symbols and likelihood rows."""
    T = W.trans
    cdf = np.cumsum(T, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(x.shape)
    y = (u[..., None] > cdf[x]).sum(axis=-1)
    return y, T[:, y].transpose(1, 2, 0)


def wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    c = (p + z * z / (2 * n)) / den
    h = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, c - h)
    hi = 1.0 if k == n else min(1.0, c + h)
    return lo, hi


def simulate_fer(
    spec: CodeSpec,
    W: Dmc,
    trials: int,
    seed: int = _rng.DEFAULT_SEED,
    threads: int | None = None,
    block: int = BLOCK,
) -> dict:
    """Monte Carlo frame error rate with a Wilson 95% interval.

    Frames come in fixed blocks; block b uses the stream keyed by (seed, b), so
    results are identical for any thread count.
    """
    if trials <= 0:
        return {"trials": 0, "errors": 0, "fer": None, "ci": None, "avg_op_count": None, "blocks": []}
    eps = erasure_of(W)
    mode = "erasure" if eps is not None else "soft"
    if W.q != spec.kernel.q:
        raise ValueError("channel and code use different fields")
    nblocks = (trials + block - 1) // block

    def run(b):
        cnt = min(block, trials - b * block)
        rng = _rng.stream(seed, b)
        info = rng.integers(0, spec.kernel.q, size=(cnt, spec.K))
        x = encode(spec, info)
        if mode == "erasure":
            er = rng.random(x.shape) < eps
            r = np.where(er, -1, x)
            res = sc_decode(spec, r, "erasure")
        else:
            _, L = _channel_llh(W, x, rng)
            res = sc_decode(spec, L, "soft")
        err = (~res["success"]) | (res["info"] != info).any(axis=1)
        return int(err.sum()), cnt, res["op_count"]

    results = _rng.ordered_map(run, range(nblocks), threads)
    errors = sum(r[0] for r in results)
    ops = sum(r[2] for r in results) / nblocks
    lo, hi = wilson(errors, trials)
    return {
        "trials": trials,
        "errors": errors,
        "fer": errors / trials,
        "ci": (lo, hi),
        "avg_op_count": ops,
        "blocks": [(b, r[0], r[1], r[2]) for b, r in enumerate(results)],
        "mode": mode,
    }
