"""Kernels: invertible l-by-l matrices over F_q and their polarizing data."""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import gf
from .gf import Field, get_field

UNDETERMINED = "undetermined"
GOLDEN_T_MIN = -60.0


class Kernel:
    """An invertible matrix G with its inverse and cached analysis data."""

    def __init__(self, field: Field, G, name: str | None = None):
        G = gf.as_mat(field, G)
        if G.shape[0] != G.shape[1]:
            raise ValueError("kernel must be square")
        r, Ginv = gf.mat_rank_inverse(field, G)
        if Ginv is None:
            raise ValueError(f"kernel is singular over F_{field.q} (rank {r})")
        G.setflags(write=False)
        Ginv.setflags(write=False)
        self.field = field
        self.G = G
        self.Ginv = Ginv
        self.l = G.shape[0]
        self.name = name
        self._cache: dict = {}

    @property
    def q(self) -> int:
        return self.field.q

    def __repr__(self):
        return f"Kernel(q={self.q}, l={self.l}, G={self.G.tolist()})"

    def __eq__(self, other):
        return isinstance(other, Kernel) and self.field == other.field and np.array_equal(self.G, other.G)

    def __hash__(self):
        return hash((self.q, self.G.tobytes()))

    def to_json(self) -> dict:
        d = gf.mat_to_json(self.field, self.G)
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_json(cls, obj) -> "Kernel":
        if isinstance(obj, (str, bytes)):
            obj = json.loads(obj)
        F, G = gf.mat_from_json(obj)
        return cls(F, G, obj.get("name"))

    @property
    def lowered(self):
        if "lowered" not in self._cache:
            self._cache["lowered"] = lowered_form(self)
        return self._cache["lowered"]

    @property
    def profile(self) -> "DistanceProfile":
        if "profile" not in self._cache:
            self._cache["profile"] = distances(self)
        return self._cache["profile"]


def arikan(q: int = 2) -> Kernel:
    return Kernel(get_field(q), [[1, 0], [1, 1]], "arikan")


def identity(l: int, q: int = 2) -> Kernel:
    return Kernel(get_field(q), np.eye(l, dtype=np.int64), "identity")


def g_ye() -> Kernel:
    return Kernel(get_field(2), [[1, 0, 0], [0, 1, 0], [1, 1, 1]], "G_Ye")


def g_barg() -> Kernel:
    return Kernel(get_field(2), [[1, 0, 0], [1, 1, 0], [1, 0, 1]], "G_Barg")


def lowered_form(K: Kernel):
    """Lower-unitriangular G~ = U G with U upper triangular, or None.

    Rows are fixed from the bottom up: row i is reduced by the already-lowered
    rows below it (each has a 1 on its diagonal and zeros to the right), then
    scaled. A zero diagonal after reduction means no such G~ exists.
    """
    F, l = K.field, K.l
    out = np.zeros((l, l), dtype=np.int64)
    for i in range(l - 1, -1, -1):
        r = K.G[i].copy()
        for c in range(l - 1, i, -1):
            if r[c]:
                r = F.sub(r, F.mul[r[c], out[c]])
        if r[i] == 0:
            return None
        out[i] = F.mul[F.inv[r[i]], r]
    return out


def _generated_subfield(F: Field, gens) -> set:
    elems = set(range(F.p)) | {int(g) for g in gens}
    # F_p multiples of 1 are the integers 0..p-1 under the digit encoding
    while True:
        cur = sorted(elems)
        a = np.array(cur)
        new = set(F.add[a[:, None], a[None, :]].ravel().tolist())
        new |= set(F.mul[a[:, None], a[None, :]].ravel().tolist())
        if new <= elems:
            return elems
        elems |= new


def is_ergodic(K: Kernel):
    """True / False, or the string ``"undetermined"`` if G~ does not exist."""
    Lw = K.lowered
    if Lw is None:
        return UNDETERMINED
    off = Lw[~np.eye(K.l, dtype=bool)]
    gens = off[off != 0]
    if gens.size == 0:
        return False
    return len(_generated_subfield(K.field, gens)) == K.q


@dataclass(frozen=True)
class DistanceProfile:
    l: int
    dz: tuple
    ds: tuple
    fz: tuple  # fz[j][w] = number of coset words of weight w
    fs: tuple

    def as_dict(self) -> dict:
        return {
            "dz": list(self.dz),
            "ds": list(self.ds),
            "fz": [list(f) for f in self.fz],
            "fs": [list(f) for f in self.fs],
        }


def coset_enumerators(K: Kernel, cap: int = gf.COSET_CAP):
    """Weight histograms of {0^{j-1} 1 u G} and {u 1 0^{l-j} G^{-T}}, j = 1..l."""
    F, l = K.field, K.l
    cols = K.Ginv.T  # rows of G^{-T} are the columns of G^{-1}
    fz, fs = [], []
    for j in range(l):
        fz.append(gf.coset_weight_hist(F, K.G[j], K.G[j + 1:], cap))
        fs.append(gf.coset_weight_hist(F, cols[j], cols[:j], cap))
    return fz, fs


def distances(K: Kernel, cap: int = gf.COSET_CAP) -> DistanceProfile:
    fz, fs = coset_enumerators(K, cap)
    dz = tuple(int(np.nonzero(h)[0][0]) for h in fz)
    ds = tuple(int(np.nonzero(h)[0][0]) for h in fs)
    return DistanceProfile(
        K.l, dz, ds,
        tuple(tuple(int(c) for c in h) for h in fz),
        tuple(tuple(int(c) for c in h) for h in fs),
    )


def enum_eval(coeffs, x: float) -> float:
    """Evaluate sum_w coeffs[w] x^w."""
    return float(np.polyval(np.asarray(coeffs, dtype=np.float64)[::-1], x))


def dual_kernel(K: Kernel) -> Kernel:
    """Kernel whose coset distances are the dual distances of K (reversed)."""
    l = K.l
    P = np.eye(l, dtype=np.int64)[::-1]
    M = P @ K.Ginv.T @ P
    return Kernel(K.field, M)


def check_random_profile(K: Kernel) -> tuple[bool, list]:
    """Per-index truth of D_Z^(j) >= ceil(j^2/3l) and D_S^(l-j+1) >= ceil(j^2/3l)."""
    prof = K.profile
    l = K.l
    per = []
    for j in range(1, l + 1):
        b = math.ceil(j * j / (3 * l))
        per.append(prof.dz[j - 1] >= b and prof.ds[l - j] >= b)
    return all(per), per


def profile_bound(l: int) -> list[int]:
    return [math.ceil(j * j / (3 * l)) for j in range(1, l + 1)]


class DistanceStats:
    """Cumulant K(t), Cramer function L(s) and mean exponent of a distance multiset."""

    def __init__(self, D, l: int | None = None):
        D = np.asarray(D, dtype=np.float64)
        if D.size == 0 or (D < 1).any():
            raise ValueError("distance profile must be a nonempty multiset of integers >= 1")
        self.D = D
        self.l = int(l if l is not None else D.size)
        self.logD = np.log(D) / np.log(self.l)
        self.varpi = float(self.logD.mean())

    def K(self, t: float) -> float:
        a = t * np.log(self.D)
        m = a.max()
        return float((m + np.log(np.exp(a - m).mean())) / np.log(self.l))

    def _argsup(self, s: float, tol: float = 1e-10) -> float:
        f = lambda t: s * t - self.K(t)
        a, b = GOLDEN_T_MIN, 0.0
        g = (math.sqrt(5) - 1) / 2
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = f(c), f(d)
        while b - a > tol:
            if fc > fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = f(d)
        t = (a + b) / 2
        best = max((f(t), t), (f(0.0), 0.0), (f(GOLDEN_T_MIN), GOLDEN_T_MIN))
        return best[1]

    def L(self, s: float) -> float:
        t = self._argsup(s)
        return float(s * t - self.K(t))


def distance_stats(profile, t: float | None = None, s: float | None = None, l: int | None = None) -> dict:
    """K(t), L(s) and varpi for a DistanceProfile (uses dz) or a raw multiset."""
    D = profile.dz if isinstance(profile, DistanceProfile) else profile
    st = DistanceStats(D, l)
    out = {"varpi": st.varpi}
    if t is not None:
        out["K"] = st.K(t)
    if s is not None:
        out["L"] = st.L(s)
    return out


def kron_power(K: Kernel, m: int) -> Kernel:
    if m < 1:
        raise ValueError("power must be >= 1")
    G = K.G
    for _ in range(m - 1):
        G = gf.kron(K.field, G, K.G)
    if G.shape[0] > 4096:
        raise ValueError(f"kernel size {G.shape[0]} exceeds the supported bound")
    name = f"{K.name}^{m}" if K.name else None
    return Kernel(K.field, G, name)


@functools.lru_cache(maxsize=64)
def _bec_counts_cached(q: int, key: bytes, l: int) -> np.ndarray:
    F = get_field(q)
    G = np.frombuffer(key, dtype=np.int64).reshape(l, l)
    counts = np.zeros((l, l + 1), dtype=np.int64)
    for mask in range(1 << l):
        erased = [(mask >> k) & 1 for k in range(l)]
        seen = [k for k in range(l) if not erased[k]]
        w = l - len(seen)
        for j in range(l):
            A = G[j:, seen]  # functionals on (u_j..u_l), one column per seen position
            if A.size == 0:
                counts[j, w] += 1
                continue
            e1 = np.zeros((l - j, 1), dtype=np.int64)
            e1[0, 0] = 1
            if gf.rank(F, np.hstack([A, e1])) > gf.rank(F, A):
                counts[j, w] += 1
    return counts


def bec_counts(K: Kernel) -> np.ndarray:
    """counts[j, w] = erasure patterns of size w leaving U_j undetermined."""
    if K.l > 20:
        raise ValueError("erasure-pattern enumeration limited to l <= 20")
    return _bec_counts_cached(K.q, K.G.astype(np.int64).tobytes(), K.l)


def bec_maps(K: Kernel, eps) -> np.ndarray:
    """Erasure probabilities of the l children for each entry of eps.

    Returns an array of shape (l,) + eps.shape.
    """
    eps = np.asarray(eps, dtype=np.float64)
    counts = bec_counts(K)
    l = K.l
    w = np.arange(l + 1)
    pw = eps[..., None] ** w * (1 - eps[..., None]) ** (l - w)
    return np.moveaxis(pw @ counts.T.astype(np.float64), -1, 0)
