"""Distributed lossless compression: rate regions and source splitting.

Sources are indexed 1..M. Entropies are in bits.

Source splitting places fragment X[m]<l> at (2l-1)/2**m on the unit interval.
Given the knob Q, exactly one fragment of each split source carries the true
value and the others hold the placeholder SPADE. Sender m's duty is the sum,
over its fragments, of H(fragment | all fragments to its right, Q).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

SPADE = -1
AUG_GUARD = 10**6

# knob value -> (fragment index of X3, fragment index of X2), 1-based
TABLE_M3 = {
    "123": (4, 2),
    "132": (3, 2),
    "312": (2, 2),
    "312'": (1, 2),
    "321": (1, 1),
    "231": (2, 1),
    "213": (3, 1),
    "213'": (4, 1),
}
TOUR = ("123", "132", "312", "321", "231", "213")


@dataclass
class JointSource:
    alphabets: tuple
    pmf: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.pmf, dtype=np.float64).reshape(tuple(self.alphabets))
        if (P < 0).any() or abs(P.sum() - 1) > 1e-12:
            raise ValueError("pmf must be non-negative and sum to 1")
        self.pmf = P
        self.alphabets = tuple(int(a) for a in self.alphabets)

    @property
    def M(self) -> int:
        return len(self.alphabets)

    @classmethod
    def from_json(cls, obj) -> "JointSource":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        try:
            return cls(tuple(obj["alphabets"]), np.asarray(obj["pmf"], dtype=np.float64))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed source record: {exc}") from exc

    def to_json(self) -> dict:
        return {"alphabets": list(self.alphabets), "pmf": self.pmf.ravel().tolist()}


def _H(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def cond_entropy_set(P: JointSource, S, T=()) -> float:
    """H(X[S] | X[T]) in bits; S and T are disjoint sets of 1-based indices."""
    S, T = set(S), set(T)
    if S & T:
        raise ValueError("S and T overlap")
    if not S | T <= set(range(1, P.M + 1)):
        raise ValueError("index out of range")

    def marg(keep):
        drop = tuple(i for i in range(P.M) if i + 1 not in keep)
        return P.pmf.sum(axis=drop).ravel()

    return _H(marg(S | T)) - (_H(marg(T)) if T else 0.0)


def dsbs(flip: float) -> JointSource:
    """X1 fair bit, X2 = X1 xor Bern(flip)."""
    return JointSource((2, 2), np.array([[0.5 * (1 - flip), 0.5 * flip], [0.5 * flip, 0.5 * (1 - flip)]]))


def _subsets(M: int):
    for r in range(1, M + 1):
        yield from itertools.combinations(range(1, M + 1), r)


def region_check(P: JointSource, rates, helper: dict | None = None, tol: float = 1e-12) -> bool:
    """Membership in the Slepian-Wolf region (optionally with a helper).

    helper = {"index": i, "channel": V (|X_i| x |U|), "rate": R}: source i is
    the helper, described through U ~ V(u|x_i) at rate R >= I(X_i; U); the
    other sources need sum_{S} R >= H(X[S] | U, X[S^c]).
    """
    rates = np.asarray(rates, dtype=np.float64)
    if helper is None:
        if rates.size != P.M:
            raise ValueError(f"need {P.M} rates")
        full = set(range(1, P.M + 1))
        return all(rates[[i - 1 for i in S]].sum() >= cond_entropy_set(P, S, full - set(S)) - tol for S in _subsets(P.M))
    h = int(helper["index"])
    V = np.asarray(helper["channel"], dtype=np.float64)
    others = [i for i in range(1, P.M + 1) if i != h]
    if rates.size != len(others):
        raise ValueError(f"need {len(others)} rates for the non-helper sources")
    # joint of (others..., U)
    Pm = np.moveaxis(P.pmf, h - 1, -1)
    PU = Pm @ V
    aug = JointSource(PU.shape, PU / PU.sum())
    u_idx = aug.M
    px = P.pmf.sum(axis=tuple(i for i in range(P.M) if i != h - 1))
    pxu = px[:, None] * V
    I = _H(px) + _H(pxu.sum(axis=0)) - _H(pxu.ravel())
    if float(helper["rate"]) < I - tol:
        return False
    full = set(range(1, len(others) + 1))
    for S in _subsets(len(others)):
        need = cond_entropy_set(aug, S, (full - set(S)) | {u_idx})
        if rates[[i - 1 for i in S]].sum() < need - tol:
            return False
    return True


def vertex(P: JointSource, order) -> np.ndarray:
    """Corner point where sources are compressed in the given order.

    ``order`` lists senders from last-decoded to first-decoded, matching the
    permutation labels (e.g. "231" gives (H(1), H(2|31), H(3|1))).
    """
    seq = [int(c) for c in order][::-1]
    B = np.zeros(P.M)
    seen: set = set()
    for m in seq:
        B[m - 1] = cond_entropy_set(P, {m}, seen)
        seen.add(m)
    return B


@dataclass
class SplitConfig:
    """Knob distribution: {knob label: probability}."""

    M: int
    knob: dict = field(default_factory=dict)

    def __post_init__(self):
        valid = ("1", "2") if self.M == 2 else tuple(TABLE_M3)
        if self.M not in (2, 3):
            raise ValueError("source splitting is implemented for M in {2, 3}")
        for k, w in self.knob.items():
            if k not in valid:
                raise ValueError(f"unknown knob value {k!r}")
            if w < -1e-15:
                raise ValueError("negative knob probability")
        if abs(sum(self.knob.values()) - 1) > 1e-12:
            raise ValueError("knob distribution must sum to 1")

    def to_json(self) -> dict:
        return {"M": self.M, "knob": dict(self.knob)}


def fragment_layout(M: int) -> list:
    """(source, fragment) pairs sorted by position (2l-1)/2**m."""
    frags = [(m, l) for m in range(1, M + 1) for l in range(1, 2 ** (m - 1) + 1)]
    return sorted(frags, key=lambda f: (2 * f[1] - 1) / 2 ** f[0])


def _holder(M: int, knob: str, m: int) -> int:
    if m == 1:
        return 1
    if M == 2:
        return int(knob)
    x3, x2 = TABLE_M3[knob]
    return x3 if m == 3 else x2


def fragments(M: int, knob: str, x) -> tuple:
    """Fragment values in layout order for source values x (1-based sources)."""
    return tuple(x[m - 1] if _holder(M, knob, m) == l else SPADE for m, l in fragment_layout(M))


def _augmented(P: JointSource, cfg: SplitConfig):
    states = int(np.prod(P.alphabets)) * len(cfg.knob)
    if states > AUG_GUARD:
        raise ValueError(f"augmented support {states} exceeds {AUG_GUARD}")
    layout = fragment_layout(P.M)
    knobs = sorted(cfg.knob)
    rows, probs = [], []
    for qi, k in enumerate(knobs):
        w = cfg.knob[k]
        if w <= 0:
            continue
        for x in itertools.product(*(range(a) for a in P.alphabets)):
            p = P.pmf[x]
            if p <= 0:
                continue
            rows.append(fragments(P.M, k, x) + (qi,))
            probs.append(w * p)
    return layout, np.array(rows, dtype=np.int64), np.array(probs)


def _Hcols(rows: np.ndarray, probs: np.ndarray, cols) -> float:
    if not cols:
        return 0.0
    _, inv = np.unique(rows[:, cols], axis=0, return_inverse=True)
    m = np.bincount(inv.ravel(), weights=probs)
    return _H(m)


def duty_point(P: JointSource, cfg: SplitConfig) -> np.ndarray:
    """B[m] = sum over m's fragments of H(fragment | fragments to its right, Q)."""
    if cfg.M != P.M:
        raise ValueError("config and source disagree on M")
    layout, rows, probs = _augmented(P, cfg)
    qcol = len(layout)
    B = np.zeros(P.M)
    for pos, (m, _) in enumerate(layout):
        right = list(range(pos + 1, len(layout))) + [qcol]
        B[m - 1] += _Hcols(rows, probs, [pos] + right) - _Hcols(rows, probs, right)
    return B


def task_list(P: JointSource, cfg: SplitConfig) -> list[dict]:
    """Per-fragment single-sender compression tasks with their rates."""
    layout, rows, probs = _augmented(P, cfg)
    qcol = len(layout)
    out = []
    for pos, (m, l) in enumerate(layout):
        right = list(range(pos + 1, len(layout))) + [qcol]
        rate = _Hcols(rows, probs, [pos] + right) - _Hcols(rows, probs, right)
        side = [f"X{layout[r][0]}<{layout[r][1]}>" for r in right[:-1]] + ["Q"]
        out.append({"fragment": f"X{m}<{l}>", "sender": m, "given": side, "rate": rate})
    return out


def on_dominant_face(P: JointSource, B, tol: float = 1e-9) -> bool:
    B = np.asarray(B, dtype=np.float64)
    total = cond_entropy_set(P, range(1, P.M + 1))
    return abs(B.sum() - total) <= tol and region_check(P, B, tol=tol)


def solve_knob(P: JointSource, target, tol: float = 1e-9) -> SplitConfig:
    """Knob distribution whose duty point hits ``target`` on the dominant face.

    M = 2 bisects on P{Q=2}. M = 3 walks the hexagon: if the target sits on an
    edge it bisects the two-vertex mixture, otherwise it splits the hexagon
    into triangles from the first vertex and solves barycentric coordinates.
    """
    target = np.asarray(target, dtype=np.float64)
    if not on_dominant_face(P, target, tol=max(tol, 1e-9)):
        raise ValueError("target is not on the dominant face")
    if P.M == 2:
        lo_b = duty_point(P, SplitConfig(2, {"1": 1.0}))[0]
        hi_b = duty_point(P, SplitConfig(2, {"2": 1.0}))[0]
        if abs(hi_b - lo_b) < 1e-15:
            return SplitConfig(2, {"1": 1.0})
        a, b = 0.0, 1.0
        f = lambda w: duty_point(P, SplitConfig(2, {"1": 1 - w, "2": w}) if 0 < w < 1 else SplitConfig(2, {"2" if w >= 1 else "1": 1.0}))[0] - target[0]
        fa = f(a)
        if abs(fa) <= tol:
            return SplitConfig(2, {"1": 1.0})
        if abs(f(b)) <= tol:
            return SplitConfig(2, {"2": 1.0})
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = f(m)
            if abs(fm) <= tol * 0.01 or b - a < 1e-15:
                break
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        w = 0.5 * (a + b)
        return SplitConfig(2, {"1": 1 - w, "2": w})
    if P.M != 3:
        raise ValueError("solve_knob supports M in {2, 3}")
    V = [duty_point(P, SplitConfig(3, {k: 1.0})) for k in TOUR]
    for i, k in enumerate(TOUR):
        if np.abs(V[i] - target).max() <= tol:
            return SplitConfig(3, {k: 1.0})
    for i in range(6):
        a, b = V[i], V[(i + 1) % 6]
        d = b - a
        if np.dot(d, d) < 1e-30:
            continue
        w = float(np.dot(target - a, d) / np.dot(d, d))
        if -tol <= w <= 1 + tol and np.abs(a + w * d - target).max() <= tol:
            w = min(max(w, 0.0), 1.0)
            return _mix({TOUR[i]: 1 - w, TOUR[(i + 1) % 6]: w})
    for i in range(1, 5):
        A = np.stack([V[0], V[i], V[i + 1]], axis=1)
        # two independent coordinates plus the barycentric sum
        lhs = np.vstack([A[:2], np.ones(3)])
        try:
            lam = np.linalg.solve(lhs, np.append(target[:2], 1.0))
        except np.linalg.LinAlgError:
            continue
        if (lam >= -1e-12).all() and np.abs(A @ lam - target).max() <= max(tol, 1e-9):
            lam = np.clip(lam, 0, None)
            lam /= lam.sum()
            return _mix({TOUR[0]: lam[0], TOUR[i]: lam[1], TOUR[i + 1]: lam[2]})
    raise ValueError("target not reachable by a knob mixture")


def _mix(weights: dict) -> SplitConfig:
    w = {k: float(v) for k, v in weights.items() if v > 0}
    s = sum(w.values())
    return SplitConfig(3, {k: v / s for k, v in w.items()})


def tour_knob(t: float) -> SplitConfig:
    """Closed tour through the six vertices in TOUR order, t in [0, 6)."""
    t = t % 6.0
    i = int(np.floor(t))
    f = t - i
    return _mix({TOUR[i]: 1 - f, TOUR[(i + 1) % 6]: f}) if f > 0 else SplitConfig(3, {TOUR[i]: 1.0})
