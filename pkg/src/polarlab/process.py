"""Channel processes W_n, H_n, Z_n, T_n, S_n down the channel tree.

Four ways to look at depth-n statistics:

* :func:`enumerate_tree` synthesizes every node exactly (small n).
* :func:`bec_density` pushes erasure probabilities through the closed-form
  child maps, either for all l**n leaves or along sampled paths.
* :func:`sample_paths` follows random branches with seeded per-trial streams,
  synthesizing (and, past a size cap, degrading) only the visited nodes.
* :func:`stopped_paths` runs the stopped process used by pruned codes.

Branch choices are uniform on 1..l. Trial t draws from the stream keyed by
(seed, t), so results do not depend on how trials are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .channel import Dmc, params
from .kernel import Kernel, bec_maps
from .transform import DEFAULT_MERGE_CAP, erasure_of, q_as_channel, synthesize

STATS = ("H", "Zmxd", "T", "Smax")
EXACT_GUARD = 10**7


@dataclass
class DepthStats:
    """Per-depth parameter records.

    ``values[d]`` maps a statistic name to an array (one entry per leaf in exact
    modes, one per trial otherwise); ``weights[d]`` holds the matching
    probabilities (they sum to 1 at every depth).
    """

    mode: str
    values: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    seed: int | None = None
    degraded: bool = False

    @property
    def depth(self) -> int:
        return len(self.values) - 1

    def samples(self, d: int) -> int:
        return int(self.weights[d].size) if d < len(self.weights) else 0

    def mean(self, d: int, stat: str) -> float:
        return float(np.dot(self.weights[d], self.values[d][stat]))

    def csv_rows(self):
        for d in range(len(self.values)):
            for s in STATS:
                yield d, s, self.mean(d, s), self.samples(d), int(self.degraded)


def _param_row(W: Dmc) -> dict:
    p = params(W)
    return {"H": p.H, "Zmxd": p.Zmxd, "T": p.T, "Smax": p.Smax}


def _bec_row(eps: np.ndarray) -> dict:
    eps = np.asarray(eps, dtype=np.float64)
    return {"H": eps, "Zmxd": eps, "T": 1 - eps, "Smax": 1 - eps}


def _stack(rows: list) -> dict:
    return {s: np.array([r[s] for r in rows], dtype=np.float64) for s in STATS}


def enumerate_tree(W: Dmc, K: Kernel, n: int, merge_cap: int | None = None) -> DepthStats:
    """Exact synthesis of all l**n leaves, weighted l**-n each."""
    l = K.l
    if l**n > EXACT_GUARD:
        raise ValueError(f"{l}^{n} leaves exceed the exact-enumeration guard")
    level = [W]
    out = DepthStats("exact")
    out.degraded = W.degraded
    for d in range(n + 1):
        out.values.append(_stack([_param_row(c) for c in level]))
        out.weights.append(np.full(len(level), float(l) ** -d))
        out.degraded |= any(c.degraded for c in level)
        if d == n:
            break
        level = [synthesize(c, K, j, merge_cap) for c in level for j in range(1, l + 1)]
    out.leaves = level
    return out


def bec_levels(eps: float, K: Kernel, n: int):
    """Yield the exact depth-d erasure arrays (path order) for d = 0..n."""
    arr = np.array([float(eps)])
    yield arr
    for _ in range(n):
        arr = bec_maps(K, arr).T.ravel()
        yield arr


def bec_density(
    eps: float,
    K: Kernel,
    n: int,
    mode: str = "exact",
    trials: int = 0,
    seed: int = _rng.DEFAULT_SEED,
    threads: int | None = None,
) -> DepthStats:
    if mode == "exact":
        if K.l**n > EXACT_GUARD:
            raise ValueError(f"{K.l}^{n} leaves exceed the exact guard {EXACT_GUARD}")
        out = DepthStats("bec-exact")
        for d, arr in enumerate(bec_levels(eps, K, n)):
            out.values.append(_bec_row(arr))
            out.weights.append(np.full(arr.size, float(K.l) ** -d))
        return out
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    out = DepthStats("bec-sampled", seed=seed)
    if trials <= 0:
        return out
    branches = sample_branches(seed, trials, n, K.l, threads)
    cur = np.full(trials, float(eps))
    out.values.append(_bec_row(cur))
    out.weights.append(np.full(trials, 1.0 / trials))
    for d in range(n):
        kids = bec_maps(K, cur)
        cur = kids[branches[:, d], np.arange(trials)]
        out.values.append(_bec_row(cur))
        out.weights.append(np.full(trials, 1.0 / trials))
    return out


def sample_branches(seed: int, trials: int, n: int, l: int, threads: int | None = None) -> np.ndarray:
    """(trials, n) branch indices in 0..l-1; row t comes from stream (seed, t)."""
    block = 4096

    def draw(start):
        stop = min(trials, start + block)
        return np.stack([_rng.stream(seed, t).integers(0, l, size=n) for t in range(start, stop)]) if stop > start else None

    parts = _rng.ordered_map(draw, range(0, trials, block), threads)
    return np.concatenate(parts).reshape(trials, n)


class _NodeCache:
    """Synthesized channels keyed by path prefix (tuple of 0-based branches)."""

    def __init__(self, W: Dmc, K: Kernel, merge_cap: int | None):
        self.K = K
        self.cap = merge_cap
        self.nodes = {(): W}

    def get(self, path: tuple) -> Dmc:
        if path not in self.nodes:
            parent = self.get(path[:-1])
            self.nodes[path] = synthesize(parent, self.K, path[-1] + 1, self.cap)
        return self.nodes[path]


def sample_paths(
    W: Dmc,
    K: Kernel,
    n: int,
    trials: int,
    seed: int = _rng.DEFAULT_SEED,
    merge_cap: int | None = DEFAULT_MERGE_CAP,
    threads: int | None = None,
) -> DepthStats:
    out = DepthStats("sampled", seed=seed)
    if trials <= 0:
        return out
    branches = sample_branches(seed, trials, n, K.l, threads)
    cache = _NodeCache(W, K, merge_cap)
    rows = {}
    for d in range(n + 1):
        paths = [tuple(int(b) for b in branches[t, :d]) for t in range(trials)]
        for p in sorted(set(paths)):
            if p not in rows:
                node = cache.get(p)
                rows[p] = _param_row(node)
                out.degraded |= node.degraded
        out.values.append(_stack([rows[p] for p in paths]))
        out.weights.append(np.full(trials, 1.0 / trials))
    return out


@dataclass
class StoppedStats:
    s: np.ndarray
    cause: np.ndarray  # per-path stop cause label
    final: dict  # statistic -> per-path value at the stopping node
    seed: int | None = None

    @property
    def mean_s(self) -> float:
        return float(self.s.mean()) if self.s.size else 0.0

    def frequencies(self) -> dict:
        labels, counts = np.unique(self.cause, return_counts=True)
        tot = max(1, self.cause.size)
        return {str(a): c / tot for a, c in zip(labels, counts)}


def stop_label(pw: dict, theta: float, pq: dict | None = None) -> str | None:
    """Stop decision at one node; None means keep going.

    Symmetric rule: stop once min(Zmxd, Smax) < theta. With a Q-process the
    Q-channel has to clear the same test too.
    """
    zw, sw = pw["Zmxd"] < theta, pw["Smax"] < theta
    if pq is None:
        if zw:
            return "Z-stop"
        if sw:
            return "S-stop"
        return None
    zq, sq = pq["Zmxd"] < theta, pq["Smax"] < theta
    if not ((zw or sw) and (zq or sq)):
        return None
    if zw and sq:
        return "info"
    if sw and zq:
        return "impossible"
    if zq:
        return "shaped"
    return "frozen"


def stopped_paths(
    W: Dmc,
    K: Kernel,
    theta: float,
    n_max: int,
    trials: int,
    seed: int = _rng.DEFAULT_SEED,
    asymmetric_Q=None,
    merge_cap: int | None = DEFAULT_MERGE_CAP,
    threads: int | None = None,
) -> StoppedStats:
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if trials <= 0:
        return StoppedStats(np.zeros(0, int), np.zeros(0, dtype="<U10"), {s: np.zeros(0) for s in STATS}, seed)
    branches = sample_branches(seed, trials, n_max, K.l, threads)
    eps = erasure_of(W) if asymmetric_Q is None else None
    if eps is not None:
        return _stopped_bec(eps, K, theta, n_max, branches, seed)
    wc = _NodeCache(W, K, merge_cap)
    qc = None if asymmetric_Q is None else _NodeCache(q_as_channel(asymmetric_Q), K, merge_cap)
    memo: dict = {}

    def node(path):
        if path not in memo:
            pw = _param_row(wc.get(path))
            pq = None if qc is None else _param_row(qc.get(path))
            memo[path] = (pw, stop_label(pw, theta, pq))
        return memo[path]

    s = np.zeros(trials, dtype=np.int64)
    cause = np.empty(trials, dtype="<U10")
    final = {k: np.zeros(trials) for k in STATS}
    for t in range(trials):
        path = ()
        while True:
            pw, lab = node(path)
            if lab is None and len(path) == n_max:
                lab = "depth-out"
            if lab is not None:
                break
            path = path + (int(branches[t, len(path)]),)
        s[t] = len(path)
        cause[t] = lab
        for k in STATS:
            final[k][t] = pw[k]
    return StoppedStats(s, cause, final, seed)


def _stopped_bec(eps, K, theta, n_max, branches, seed) -> StoppedStats:
    trials = branches.shape[0]
    cur = np.full(trials, float(eps))
    s = np.full(trials, n_max, dtype=np.int64)
    cause = np.full(trials, "depth-out", dtype="<U10")
    active = np.ones(trials, dtype=bool)
    for d in range(n_max + 1):
        zs = active & (cur < theta)
        ss = active & ~zs & (1 - cur < theta)
        s[zs | ss] = d
        cause[zs] = "Z-stop"
        cause[ss] = "S-stop"
        active &= ~(zs | ss)
        if d == n_max or not active.any():
            break
        idx = np.nonzero(active)[0]
        kids = bec_maps(K, cur[idx])
        cur[idx] = kids[branches[idx, d], np.arange(idx.size)]
    return StoppedStats(s, cause, _bec_row(cur), seed)


def bec_stopped_exact(eps: float, K: Kernel, theta: float, n_max: int) -> dict:
    """Exact E[s] and stop-cause probabilities by density evolution."""
    l = K.l
    cur = np.array([float(eps)])
    es = 0.0
    probs = {"Z-stop": 0.0, "S-stop": 0.0, "depth-out": 0.0}
    for d in range(n_max + 1):
        w = float(l) ** -d
        zs = cur < theta
        ss = ~zs & (1 - cur < theta)
        probs["Z-stop"] += w * zs.sum()
        probs["S-stop"] += w * ss.sum()
        es += w * d * (zs | ss).sum()
        cur = cur[~(zs | ss)]
        if d == n_max:
            probs["depth-out"] += w * cur.size
            es += w * d * cur.size
            break
        if cur.size == 0:
            break
        cur = bec_maps(K, cur).T.ravel()
    return {"mean_s": es, **probs}
