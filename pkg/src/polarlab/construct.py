"""Code construction: frozen sets, pruned trees and the error/complexity sweep.

A code is described by its leaves: prefix-free tree nodes (depth d, index i)
where i is the base-l path index j_1..j_d read most-significant first. A
full-depth code has every leaf at depth n; a pruned code stops early wherever
the stopping rule fires. Leaves carry one of the labels

``info``        Z-stop leaf; carries l**(n-d) raw information symbols
``frozen``      S-stop leaf (or a non-selected full-depth leaf)
``depth-out``   reached depth n without stopping; frozen
``shaped``      asymmetric analysis only: determined by the Q-process
``impossible``  asymmetric analysis only: never expected to occur
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Dmc, params
from .kernel import Kernel, bec_maps
from .process import enumerate_tree, stop_label
from .transform import erasure_of, q_as_channel, synthesize

INFO = "info"
FROZEN = "frozen"
DEPTH_OUT = "depth-out"
PATH_ORDER = "lexicographic j1..jn, most significant first, no bit reversal"


@dataclass
class CodeSpec:
    kernel: Kernel
    n: int
    depth: np.ndarray
    index: np.ndarray
    label: np.ndarray
    z: np.ndarray
    design_pe: float
    theta: float | None = None
    exact: bool = True
    frozen_fill: str = "zeros"
    fill_seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def l(self) -> int:
        return self.kernel.l

    @property
    def N(self) -> int:
        return self.kernel.l**self.n

    @property
    def measure(self) -> np.ndarray:
        return float(self.l) ** -self.depth.astype(np.float64)

    @property
    def info_mask(self) -> np.ndarray:
        return self.label == INFO

    @property
    def rate(self) -> float:
        return float(self.measure[self.info_mask].sum())

    @property
    def K(self) -> int:
        """Number of information symbols."""
        sizes = self.l ** (self.n - self.depth.astype(np.int64))
        return int(sizes[self.info_mask].sum())

    @property
    def expected_s(self) -> float:
        return float((self.measure * self.depth).sum())

    @property
    def eu_du_pairs(self) -> float:
        """Kernel applications: (N/l) * total measure of internal nodes."""
        return self.N / self.l * self.expected_s

    @property
    def is_pruned(self) -> bool:
        return bool((self.depth < self.n).any())

    def leaf_map(self) -> dict:
        return {(int(d), int(i)): str(s) for d, i, s in zip(self.depth, self.index, self.label)}

    def path_string(self, d: int, i: int) -> str:
        digits = []
        for _ in range(d):
            digits.append(str(i % self.l))
            i //= self.l
        return "".join(reversed(digits))

    def tree(self):
        """Nested arrays: an internal node is a list of l subtrees, a leaf its label."""
        lm = self.leaf_map()

        def build(d, i):
            if (d, i) in lm:
                return lm[(d, i)]
            return [build(d + 1, i * self.l + j) for j in range(self.l)]

        return build(0, 0)

    def to_json(self) -> dict:
        frozen = [self.path_string(int(d), int(i)) for d, i, s in zip(self.depth, self.index, self.label) if s != INFO]
        return {
            "kernel": self.kernel.to_json(),
            "n": self.n,
            "N": self.N,
            "path_order": PATH_ORDER,
            "frozen": frozen,
            "tree": self.tree(),
            "z": [float(x) for x in self.z],
            "design_pe": self.design_pe,
            "rate": self.rate,
            "eu_du_pairs": self.eu_du_pairs,
            "expected_s": self.expected_s,
            "theta": self.theta,
            "exact": self.exact,
            "frozen_fill": self.frozen_fill,
            "fill_seed": self.fill_seed,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj) -> "CodeSpec":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        try:
            K = Kernel.from_json(obj["kernel"])
            n = int(obj["n"])
            tree = obj["tree"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed code spec: {exc}") from exc
        depth, index, label = [], [], []

        def walk(node, d, i):
            if isinstance(node, str):
                depth.append(d)
                index.append(i)
                label.append(node)
                return
            if len(node) != K.l or d >= n:
                raise ValueError("tree does not match the kernel size and depth")
            for j, sub in enumerate(node):
                walk(sub, d + 1, i * K.l + j)

        walk(tree, 0, 0)
        z = obj.get("z") or [0.0] * len(depth)
        return cls(
            K, n, np.array(depth), np.array(index, dtype=np.int64), np.array(label),
            np.array(z, dtype=np.float64), float(obj.get("design_pe", 0.0)), obj.get("theta"),
            bool(obj.get("exact", True)), obj.get("frozen_fill", "zeros"), int(obj.get("fill_seed", 0)),
            dict(obj.get("meta", {})),
        )


def _sort_leaves(l, n, depth, index, label, z):
    depth = np.asarray(depth, dtype=np.int64)
    index = np.asarray(index, dtype=np.int64)
    start = index * (l ** (n - depth))
    o = np.argsort(start, kind="stable")
    return depth[o], index[o], np.asarray(label)[o], np.asarray(z, dtype=np.float64)[o]


def leaf_z(W: Dmc, K: Kernel, n: int, merge_cap: int | None = None):
    """Depth-n Bhattacharyya values in path order and whether they are exact."""
    eps = erasure_of(W)
    if eps is not None:
        arr = np.array([eps])
        for _ in range(n):
            arr = bec_maps(K, arr).T.ravel()
        return arr, True
    st = enumerate_tree(W, K, n, merge_cap)
    return np.array([params(c).Z for c in st.leaves]), not st.degraded


def select_budget(z: np.ndarray, budget: float) -> int:
    """Largest K whose K smallest values sum to at most ``budget``."""
    zs = np.sort(z, kind="stable")
    return int(np.searchsorted(np.cumsum(zs), budget, side="right"))


def build_frozen(
    W: Dmc,
    K: Kernel,
    n: int,
    theta: float | None = None,
    top_k: int | None = None,
    budget: float | None = None,
    merge_cap: int | None = None,
) -> CodeSpec:
    """Full-depth code; pick leaves by threshold, by count, or by an error budget."""
    if sum(x is not None for x in (theta, top_k, budget)) != 1:
        raise ValueError("give exactly one of theta, top_k, budget")
    z, exact = leaf_z(W, K, n, merge_cap)
    N = z.size
    idx = np.arange(N, dtype=np.int64)
    if budget is not None:
        top_k = select_budget(z, budget)
    if theta is not None:
        chosen = z < theta
    else:
        if not 0 <= top_k <= N:
            raise ValueError(f"top_k must lie in 0..{N}")
        order = np.lexsort((idx, z))
        chosen = np.zeros(N, dtype=bool)
        chosen[order[:top_k]] = True
    label = np.where(chosen, INFO, FROZEN)
    return CodeSpec(
        K, n, np.full(N, n), idx, label, z, float(z[chosen].sum()), theta, exact,
        meta={"strategy": "threshold" if theta is not None else ("budget" if budget is not None else "top_k")},
    )


def default_theta(q: int, N: int) -> float:
    return 1.0 / (3 * q * N * N)


def _pruned_bec(eps, K, n, theta):
    l = K.l
    cur = np.array([float(eps)])
    idx = np.zeros(1, dtype=np.int64)
    D, I, L, Zs = [], [], [], []
    for d in range(n + 1):
        zs = cur < theta
        ss = ~zs & (1 - cur < theta)
        if d == n:
            out = ~(zs | ss)
        else:
            out = np.zeros_like(zs)
        for mask, lab in ((zs, INFO), (ss, FROZEN), (out, DEPTH_OUT)):
            if mask.any():
                D.append(np.full(mask.sum(), d))
                I.append(idx[mask])
                L.append(np.full(mask.sum(), lab, dtype="<U10"))
                Zs.append(cur[mask])
        go = ~(zs | ss)
        if d == n or not go.any():
            break
        cur = bec_maps(K, cur[go]).T.ravel()
        idx = (idx[go][:, None] * l + np.arange(l)[None, :]).ravel()
    return (np.concatenate(x) for x in (D, I, L, Zs))


def _pruned_general(W, K, n, theta, merge_cap, Qch=None):
    D, I, L, Zs, Zq = [], [], [], [], []
    degraded = False

    def visit(w, qc, d, i):
        nonlocal degraded
        degraded |= w.degraded
        pw = params(w)
        rw = {"Zmxd": pw.Zmxd, "Smax": pw.Smax}
        rq = None
        if qc is not None:
            pq = params(qc)
            rq = {"Zmxd": pq.Zmxd, "Smax": pq.Smax}
        lab = stop_label(rw, theta, rq)
        if lab is None and d == n:
            lab = DEPTH_OUT
        if lab is not None:
            lab = {"Z-stop": INFO, "S-stop": FROZEN}.get(lab, lab)
            D.append(d)
            I.append(i)
            L.append(lab)
            Zs.append(pw.Zmxd)
            Zq.append(rq["Smax"] if rq else 0.0)
            return
        for j in range(K.l):
            cw = synthesize(w, K, j + 1, merge_cap)
            cq = None if qc is None else synthesize(qc, K, j + 1, merge_cap)
            visit(cw, cq, d + 1, i * K.l + j)

    visit(W, Qch, 0, 0)
    return np.array(D), np.array(I, dtype=np.int64), np.array(L), np.array(Zs), np.array(Zq), degraded


def build_pruned(W: Dmc, K: Kernel, n: int, theta: float | None = None, merge_cap: int | None = None) -> CodeSpec:
    """Pruned tree: expand a node while min(Zmxd, Smax) >= theta and depth < n."""
    q, N = K.q, K.l**n
    theta = default_theta(q, N) if theta is None else float(theta)
    eps = erasure_of(W)
    if eps is not None:
        D, I, L, Zs = _pruned_bec(eps, K, n, theta)
        exact = True
    else:
        D, I, L, Zs, _, degraded = _pruned_general(W, K, n, theta, merge_cap)
        exact = not degraded
    D, I, L, Zs = _sort_leaves(K.l, n, D, I, L, Zs)
    meas = float(K.l) ** -D.astype(np.float64)
    info = L == INFO
    design = float(N * (meas[info] * Zs[info]).sum())
    spec = CodeSpec(K, n, D, I, L, Zs, design, theta, exact, meta={"strategy": "pruned"})
    spec.meta["error_bound"] = q * N * theta
    return spec


def build_pruned_asymmetric(
    W: Dmc, Q, K: Kernel, n: int, theta: float | None = None, merge_cap: int | None = None
) -> CodeSpec:
    """Analysis-only pruned tree tracking the channel and the Q-process jointly.

    W is re-weighted to input distribution Q. A leaf is ``info`` when Zmxd of
    the channel and Smax of the Q-channel are both below theta.
    """
    Q = np.asarray(Q, dtype=np.float64)
    q, N = K.q, K.l**n
    theta = default_theta(q, N) if theta is None else float(theta)
    Wq = Dmc(W.field, Q[:, None] * W.trans)
    D, I, L, Zs, Sq, degraded = _pruned_general(Wq, K, n, theta, merge_cap, q_as_channel(Q))
    o = np.argsort(I * (K.l ** (n - D)), kind="stable")
    D, I, L, Zs, Sq = D[o], I[o], L[o], Zs[o], Sq[o]
    meas = float(K.l) ** -D.astype(np.float64)
    info = L == INFO
    design = float(N * (meas[info] * (Zs[info] + Sq[info])).sum())
    spec = CodeSpec(K, n, D, I, L, Zs, design, theta, not degraded, meta={"strategy": "pruned-asymmetric"})
    spec.meta["error_bound"] = 3 * q * N * theta
    spec.meta["impossible_leaves"] = int((L == "impossible").sum())
    return spec


def theta_family(name: str, n: int, l: int = 2, param: float | None = None) -> float:
    if name == "pow4":
        return 4.0**-n
    if name == "exp_n_tau":
        return math.exp(-(n ** (2.0 if param is None else param)))
    if name == "elpin":
        return math.exp(-(l ** ((0.1 if param is None else param) * n)))
    raise ValueError(f"unknown theta family {name!r}")


def tradeoff_sweep(W: Dmc, K: Kernel, n_list, family: str = "pow4", param: float | None = None) -> list[dict]:
    rows = []
    for n in n_list:
        th = theta_family(family, n, K.l, param)
        spec = build_pruned(W, K, n, th)
        rows.append({"n": n, "theta": th, "E_s": spec.expected_s, "rate": spec.rate, "design_pe": spec.design_pe})
    return rows
