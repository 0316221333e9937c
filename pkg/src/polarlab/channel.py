"""Discrete memoryless channels over F_q and their parameters.

A :class:`Dmc` stores the joint law W(x, y) = Q(x) W(y|x) as a q-by-m array.
Everything the library computes (entropies, Bhattacharyya and Fourier
parameters, synthetic channels) is a function of the joint, so the joint is
the canonical representation and the transition matrix is derived from it.

Units: H and I are in log-q units; Gallager's E0 is in nats.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass

import numpy as np

from .gf import Field, field_from_pk, get_field

STOCH_TOL = 1e-12
MERGE_DIGITS = 12


@dataclass(frozen=True, eq=False)
class Dmc:
    field: Field
    joint: np.ndarray
    outputs: tuple | None = None
    degraded: bool = False

    def __post_init__(self):
        J = np.asarray(self.joint, dtype=np.float64)
        if J.ndim != 2 or J.shape[0] != self.field.q:
            raise ValueError(f"joint must have {self.field.q} rows")
        if (J < -STOCH_TOL).any():
            raise ValueError("negative probability in joint")
        J = np.clip(J, 0.0, None)
        if abs(J.sum() - 1.0) > 1e-9:
            raise ValueError(f"joint sums to {J.sum()!r}, not 1")
        J.setflags(write=False)
        object.__setattr__(self, "joint", J)

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def Q(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    @property
    def trans(self) -> np.ndarray:
        """W(y|x); rows of zero-probability inputs are set to W(y)."""
        Q = self.Q
        out = np.empty_like(self.joint)
        pos = Q > 0
        out[pos] = self.joint[pos] / Q[pos, None]
        out[~pos] = self.py
        return out

    @property
    def n_out(self) -> int:
        return self.joint.shape[1]


def from_trans(F: Field, W, Q=None, outputs=None) -> Dmc:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != F.q:
        raise ValueError(f"transition matrix needs {F.q} rows")
    if (W < 0).any() or np.abs(W.sum(axis=1) - 1).max() > STOCH_TOL:
        raise ValueError("transition rows must be non-negative and sum to 1")
    Q = np.full(F.q, 1.0 / F.q) if Q is None else np.asarray(Q, dtype=np.float64)
    if Q.shape != (F.q,) or (Q < 0).any() or abs(Q.sum() - 1) > STOCH_TOL:
        raise ValueError("input distribution must be a pmf over the field")
    return Dmc(F, Q[:, None] * W, None if outputs is None else tuple(outputs))


def make_channel(kind: str, **params) -> Dmc:
    """Build bec / bsc / qsc / dmc channels.

    bec(epsilon), bsc(crossover) are binary; qsc(crossover, q) sends x to each
    other symbol with probability crossover/(q-1); dmc takes ``trans`` and
    optional ``p``, ``k``, ``Q``, ``outputs``.
    """
    Q = params.get("Q")
    if kind == "bec":
        e = float(params["epsilon"])
        if not 0 <= e <= 1:
            raise ValueError("erasure probability must lie in [0, 1]")
        W = [[1 - e, 0.0, e], [0.0, 1 - e, e]]
        return from_trans(get_field(2), W, Q, ("0", "1", "?"))
    if kind in ("bsc", "qsc"):
        p = float(params["crossover"])
        q = 2 if kind == "bsc" else int(params.get("q", params.get("p", 2) ** params.get("k", 1)))
        if not 0 <= p <= 1:
            raise ValueError("crossover must lie in [0, 1]")
        F = get_field(q)
        W = np.full((q, q), p / (q - 1))
        np.fill_diagonal(W, 1 - p)
        return from_trans(F, W, Q, tuple(str(i) for i in range(q)))
    if kind == "dmc":
        F = field_from_pk(int(params.get("p", 2)), int(params.get("k", 1)))
        return from_trans(F, params["trans"], Q, params.get("outputs"))
    raise ValueError(f"unknown channel kind {kind!r}")


def channel_from_json(obj) -> Dmc:
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError("channel spec needs a 'kind' field")
    kw = {k: v for k, v in obj.items() if k != "kind"}
    try:
        return make_channel(obj["kind"], **kw)
    except KeyError as exc:
        raise ValueError(f"channel spec missing field {exc}") from exc


def _xlogx(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = a[pos] * np.log(a[pos])
    return out


def entropy(p, base: float = 2.0) -> float:
    p = np.asarray(p, dtype=np.float64)
    return float(-_xlogx(p).sum() / np.log(base))


def h2(x):
    """Binary entropy in bits (vectorized)."""
    x = np.asarray(x, dtype=np.float64)
    return -(_xlogx(x) + _xlogx(1 - x)) / np.log(2)


@dataclass(frozen=True)
class ParamSet:
    H: float
    I: float
    Pe: float
    Z: float
    Zd: tuple
    Zmxd: float
    T: float
    S: float
    Smax: float

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["Zd"] = list(self.Zd)
        return d


def cond_entropy(W: Dmc) -> float:
    J = W.joint
    lq = np.log(W.q)
    return float((_xlogx(W.py).sum() - _xlogx(J).sum()) / lq)


def bhattacharyya(W: Dmc) -> np.ndarray:
    """Z_d for d = 1..q-1 (indexed by field element)."""
    F, J = W.field, W.joint
    R = np.sqrt(J)
    xs = np.arange(W.q)
    return np.array([float((R * R[F.add[xs, d]]).sum()) for d in range(1, W.q)])


def fourier_norms(W: Dmc) -> np.ndarray:
    """S_w = sum_y |sum_z W(z, y) chi(w z)| for w = 1..q-1."""
    F, J = W.field, W.joint
    chi = F.chi
    xs = np.arange(W.q)
    out = []
    for w in range(1, W.q):
        c = chi[F.mul[w, xs]]
        out.append(float(np.abs(c @ J).sum()))
    return np.array(out)


def params(W: Dmc) -> ParamSet:
    q = W.q
    J = W.joint
    py = W.py
    H = cond_entropy(W)
    HQ = entropy(W.Q, base=q)
    Pe = float((py - J.max(axis=0)).sum())
    Zd = bhattacharyya(W)
    T = float(np.abs(J - py[None, :] / q).sum())
    Sw = fourier_norms(W)
    return ParamSet(
        H=H,
        I=HQ - H,
        Pe=max(Pe, 0.0),
        Z=float(Zd.mean()),
        Zd=tuple(float(z) for z in Zd),
        Zmxd=float(Zd.max()),
        T=T,
        S=float(Sw.mean()),
        Smax=float(Sw.max()),
    )


def symmetrize(W: Dmc) -> Dmc:
    """Flag construction: V = X - F with F uniform, output (F, Y).

    The result has uniform input and output alphabet of size q*|Y|, ordered
    with the flag as the slow index.
    """
    F, J, q = W.field, W.joint, W.q
    xs = np.arange(q)
    blocks = [J[F.add[xs, f]] for f in range(q)]
    return Dmc(F, np.concatenate(blocks, axis=1) / q, degraded=W.degraded)


def _posterior_keys(J: np.ndarray, py: np.ndarray) -> np.ndarray:
    post = J / py[None, :]
    return np.round(post.T, MERGE_DIGITS) + 0.0


def canonicalize(W: Dmc) -> Dmc:
    """Drop null outputs and merge outputs with equal posterior vectors."""
    J = W.joint
    py = J.sum(axis=0)
    keep = py > 0
    J, py = J[:, keep], py[keep]
    keys = _posterior_keys(J, py)
    _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    # order merged outputs by first appearance for stable output
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    merged = np.zeros((W.q, order.size))
    np.add.at(merged.T, rank[inv], J.T)
    return Dmc(W.field, merged, degraded=W.degraded)


def _xl(x: float) -> float:
    return x * math.log(x) if x > 0 else 0.0


def _merge_cost(a, b) -> float:
    # H(X | merged) - H(X | a, b) in nats for joint columns a, b
    c = 0.0
    for x, y in zip(a, b):
        c += _xl(x) + _xl(y) - _xl(x + y)
    sa, sb = sum(a), sum(b)
    return c - _xl(sa) - _xl(sb) + _xl(sa + sb)


def _prebin(J: np.ndarray, bins: int) -> np.ndarray:
    # coarse degrading pass: merge outputs whose posteriors share a grid cell
    py = J.sum(axis=0)
    post = J / py[None, :]
    cells = np.floor(post[:-1].T * bins).astype(np.int64)
    _, inv = np.unique(cells, axis=0, return_inverse=True)
    inv = inv.ravel()
    out = np.zeros((J.shape[0], inv.max() + 1))
    np.add.at(out.T, inv, J.T)
    return out


def degrade_merge(W: Dmc, max_outputs: int, prebin_factor: int = 8) -> Dmc:
    """Greedy degrading merge down to ``max_outputs`` outputs.

    Repeatedly merges the pair with the smallest conditional-entropy increase.
    Binary channels only consider neighbours in posterior order (where the
    optimal pair always lies); q-ary channels use all pairs. Channels with
    more than ``prebin_factor * max_outputs`` outputs first go through a
    posterior-grid merge. Every step is a merge of outputs, so H never
    decreases and Z never decreases.
    """
    if max_outputs < W.q:
        raise ValueError(f"max_outputs must be >= q = {W.q}")
    Wc = canonicalize(W)
    if Wc.n_out <= max_outputs:
        return Wc if Wc.n_out < W.n_out else W
    J = Wc.joint
    limit = (prebin_factor if W.q == 2 else 2) * max_outputs
    if J.shape[1] > limit:
        bins = max(2, int(round(limit ** (1.0 / (W.q - 1)))))
        J = _prebin(J, bins)
    if J.shape[1] > max_outputs:
        J = _merge_binary(J, max_outputs) if W.q == 2 else _merge_pairs(J, max_outputs)
    return Dmc(W.field, J, degraded=True)


def _merge_binary(J: np.ndarray, cap: int) -> np.ndarray:
    order = np.argsort(J[0] / J.sum(axis=0), kind="stable")
    cols = [J[:, i].tolist() for i in order]
    m = len(cols)
    prev = list(range(-1, m - 1))
    nxt = list(range(1, m + 1))
    nxt[-1] = -1
    alive = [True] * m
    version = [0] * m
    heap = [(_merge_cost(cols[i], cols[i + 1]), i, 0, 0) for i in range(m - 1)]
    heapq.heapify(heap)
    count = m
    while count > cap:
        cost, i, vi, vj = heapq.heappop(heap)
        j = nxt[i]
        if not alive[i] or j == -1 or version[i] != vi or version[j] != vj:
            continue
        cols[i] = [x + y for x, y in zip(cols[i], cols[j])]
        alive[j] = False
        version[i] += 1
        nxt[i] = nxt[j]
        if nxt[j] != -1:
            prev[nxt[j]] = i
        count -= 1
        if prev[i] != -1:
            a = prev[i]
            heapq.heappush(heap, (_merge_cost(cols[a], cols[i]), a, version[a], version[i]))
        if nxt[i] != -1:
            b = nxt[i]
            heapq.heappush(heap, (_merge_cost(cols[i], cols[b]), i, version[i], version[b]))
    return np.array([cols[i] for i in range(m) if alive[i]]).T


def _col_f(J: np.ndarray) -> np.ndarray:
    return _xlogx(J).sum(axis=0) - _xlogx(J.sum(axis=0))


def _merge_pairs(J: np.ndarray, cap: int) -> np.ndarray:
    J = J.copy()
    m = J.shape[1]
    f = _col_f(J)
    S = J[:, :, None] + J[:, None, :]
    C = f[:, None] + f[None, :] - _col_f(S.reshape(J.shape[0], -1)).reshape(m, m)
    del S
    C[np.arange(m), np.arange(m)] = np.inf
    alive = np.ones(m, dtype=bool)
    for _ in range(m - cap):
        i, j = np.unravel_index(np.argmin(C), C.shape)
        i, j = min(i, j), max(i, j)
        J[:, i] += J[:, j]
        alive[j] = False
        C[j, :] = np.inf
        C[:, j] = np.inf
        f[i] = _col_f(J[:, i:i + 1])[0]
        row = f[i] + f - _col_f(J[:, i:i + 1] + J)
        row[~alive] = np.inf
        row[i] = np.inf
        C[i, :] = row
        C[:, i] = row
    return J[:, alive]


def gallager_e0(W: Dmc, t: float) -> tuple[float, float]:
    """Gallager's E0(t) and its complement E0bar(t), both in nats."""
    if not -0.4 - 1e-15 <= t <= 1 + 1e-15:
        raise ValueError(f"t={t} outside [-2/5, 1]")
    J = W.joint
    Wt = W.trans
    Q = W.Q
    r = 1.0 / (1.0 + t)
    inner = (Q[:, None] * Wt**r).sum(axis=0)
    e0 = -np.log((inner ** (1.0 + t)).sum())
    innerbar = (J**r).sum(axis=0)
    e0bar = np.log((innerbar ** (1.0 + t)).sum())
    return float(e0), float(e0bar)


def random_channel(q: int, m: int, rng: np.random.Generator, Q=None) -> Dmc:
    """Transition rows drawn from a flat Dirichlet; uniform input by default."""
    F = get_field(q)
    W = rng.dirichlet(np.ones(m), size=q)
    return from_trans(F, W, Q)


def channel_to_json(W: Dmc) -> dict:
    d = {
        "kind": "dmc",
        "p": W.field.p,
        "k": W.field.k,
        "Q": W.Q.tolist(),
        "trans": W.trans.tolist(),
    }
    if W.outputs is not None:
        d["outputs"] = list(W.outputs)
    return d
