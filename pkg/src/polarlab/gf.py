"""Finite fields of order q <= 256 and dense linear algebra over them.

Elements are integers ``0..q-1``; the base-p digits of an element are the
coefficients (low to high) of a polynomial reduced modulo a fixed monic
primitive polynomial. The polynomial is the lexicographically smallest
primitive one of degree k, so the encoding is reproducible and is written out
with every serialized matrix.
"""

from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels

COSET_CAP = 24


def _factor_prime_power(q: int) -> tuple[int, int]:
    if q < 2:
        raise ValueError(f"field order must be >= 2, got {q}")
    p = next(d for d in range(2, q + 1) if q % d == 0)
    k, r = 0, q
    while r % p == 0:
        r //= p
        k += 1
    if r != 1:
        raise ValueError(f"{q} is not a prime power")
    return p, k


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(p**0.5) + 1))


def _poly_mulx(a: list[int], mod: list[int], p: int) -> list[int]:
    # a * x mod (monic) mod; a has length k
    k = len(a)
    top = a[-1]
    shifted = [0] + a[:-1]
    return [(shifted[i] - top * mod[i]) % p for i in range(k)]


def _find_primitive(p: int, k: int) -> list[int]:
    if k == 1:
        # x - g for the smallest generator g of F_p^*
        for g in range(1, p):
            if p == 2 or len({pow(g, e, p) for e in range(1, p)}) == p - 1:
                return [(-g) % p, 1]
    order = p**k - 1
    for tail in itertools.product(range(p), repeat=k):
        mod = list(reversed(tail))  # low-to-high, lexicographic in high coefficients first
        if mod[0] == 0:
            continue
        a = [0] * k
        a[0] = 1
        seen = 0
        for e in range(1, order + 1):
            a = _poly_mulx(a, mod, p)
            seen = e
            if a == [1] + [0] * (k - 1):
                break
        if seen == order and a == [1] + [0] * (k - 1):
            return mod + [1]
    raise RuntimeError("no primitive polynomial found")  # pragma: no cover


@dataclass(frozen=True, eq=False)
class Field:
    """The field F_q with q = p**k, backed by full operation tables."""

    p: int
    k: int
    q: int
    modulus: tuple[int, ...]
    add: np.ndarray = dc_field(repr=False)
    mul: np.ndarray = dc_field(repr=False)
    neg: np.ndarray = dc_field(repr=False)
    inv: np.ndarray = dc_field(repr=False)
    trace: np.ndarray = dc_field(repr=False)

    def __eq__(self, other):
        return isinstance(other, Field) and (self.p, self.k) == (other.p, other.k)

    def __hash__(self):
        return hash((self.p, self.k))

    @property
    def chi(self) -> np.ndarray:
        """Additive character exp(2 pi i tr(x) / p) for every element."""
        return np.exp(2j * np.pi * self.trace / self.p)

    def sub(self, a, b):
        return self.add[a, self.neg[b]]

    def to_json(self) -> dict:
        return {"p": self.p, "k": self.k, "modulus": list(self.modulus)}


@functools.lru_cache(maxsize=None)
def get_field(q: int) -> Field:
    """Return the cached field of order q (q <= 256, q a prime power)."""
    if q > 256:
        raise ValueError(f"fields with q > 256 are not supported (q={q})")
    p, k = _factor_prime_power(q)
    mod = _find_primitive(p, k)
    digits = np.array([[(x // p**i) % p for i in range(k)] for x in range(q)], dtype=np.int64)
    weights = p ** np.arange(k)
    add = ((digits[:, None, :] + digits[None, :, :]) % p) @ weights
    neg = ((-digits) % p) @ weights

    # powers of the primitive element x
    exp = np.zeros(q - 1, dtype=np.int64)
    a = [0] * k
    a[0] = 1
    if k == 1:
        g = (-mod[0]) % p
        for e in range(q - 1):
            exp[e] = pow(g, e, p)
    else:
        for e in range(q - 1):
            exp[e] = int(np.dot(a, weights))
            a = _poly_mulx(a, mod[:-1], p)
    log = np.zeros(q, dtype=np.int64)
    log[exp] = np.arange(q - 1)
    mul = np.zeros((q, q), dtype=np.int64)
    nz = np.arange(1, q)
    mul[1:, 1:] = exp[(log[nz][:, None] + log[nz][None, :]) % (q - 1)]
    inv = np.full(q, -1, dtype=np.int64)
    inv[nz] = exp[(-log[nz]) % (q - 1)]

    tr = np.zeros(q, dtype=np.int64)
    for x in range(q):
        acc, pw = 0, x
        for _ in range(k):
            acc = add[acc, pw]
            y = pw
            for _ in range(p - 1):
                y = mul[y, pw]
            pw = y
        tr[x] = acc
    for t in (add, mul, neg, inv, tr):
        t.setflags(write=False)
    return Field(p, k, q, tuple(mod), add, mul, neg, inv, tr)


def field_from_pk(p: int, k: int = 1) -> Field:
    if not _is_prime(p):
        raise ValueError(f"characteristic {p} is not prime")
    if k < 1:
        raise ValueError("extension degree must be >= 1")
    return get_field(p**k)


def field_arith(F: Field, op: str, a: int, b: int | None = None) -> int:
    """Scalar field operation: add, mul, inv or neg."""
    for x in (a, b):
        if x is not None and not 0 <= x < F.q:
            raise ValueError(f"{x} is not an element of F_{F.q}")
    if op == "add":
        return int(F.add[a, b])
    if op == "mul":
        return int(F.mul[a, b])
    if op == "neg":
        return int(F.neg[a])
    if op == "inv":
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return int(F.inv[a])
    raise ValueError(f"unknown field operation {op!r}")


def as_mat(F: Field, M) -> np.ndarray:
    A = np.array(M, dtype=np.int64)
    if A.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    if A.size and (A.min() < 0 or A.max() >= F.q):
        raise ValueError(f"entries must lie in 0..{F.q - 1}")
    return A


def matmul(F: Field, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.shape[-1] != B.shape[0]:
        raise ValueError("inner dimensions differ")
    if F.k == 1:
        return (A @ B) % F.p
    out = np.zeros(A.shape[:-1] + B.shape[1:], dtype=np.int64)
    for i in range(A.shape[-1]):
        out = F.add[out, F.mul[A[..., i, None], B[i]]]
    return out


def _echelon(F: Field, M: np.ndarray, aug: np.ndarray | None = None):
    A = M.copy()
    X = None if aug is None else aug.copy()
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = np.nonzero(A[r:, c])[0]
        if piv.size == 0:
            continue
        pr = r + piv[0]
        if pr != r:
            A[[r, pr]] = A[[pr, r]]
            if X is not None:
                X[[r, pr]] = X[[pr, r]]
        s = F.inv[A[r, c]]
        A[r] = F.mul[s, A[r]]
        if X is not None:
            X[r] = F.mul[s, X[r]]
        f = A[:, c].copy()
        f[r] = 0
        nz = np.nonzero(f)[0]
        if nz.size:
            A[nz] = F.sub(A[nz], F.mul[f[nz, None], A[r][None, :]])
            if X is not None:
                X[nz] = F.sub(X[nz], F.mul[f[nz, None], X[r][None, :]])
        r += 1
    return A, X, r


def rank(F: Field, M) -> int:
    A = as_mat(F, M)
    if A.size == 0:
        return 0
    return _echelon(F, A)[2]


def mat_rank_inverse(F: Field, M) -> tuple[int, np.ndarray | None]:
    """Rank by Gaussian elimination and, for square full-rank input, the inverse."""
    A = as_mat(F, M)
    rows, cols = A.shape
    if rows != cols:
        return rank(F, A), None
    _, X, r = _echelon(F, A, np.eye(rows, dtype=np.int64))
    return r, (X if r == rows else None)


def inverse(F: Field, M) -> np.ndarray:
    r, X = mat_rank_inverse(F, M)
    if X is None:
        raise np.linalg.LinAlgError(f"matrix is singular over F_{F.q} (rank {r})")
    return X


def kron(F: Field, A, B) -> np.ndarray:
    A = as_mat(F, A)
    B = as_mat(F, B)
    out = F.mul[A[:, None, :, None], B[None, :, None, :]]
    return out.reshape(A.shape[0] * B.shape[0], A.shape[1] * B.shape[1])


def hamming(v, w=None) -> int:
    v = np.asarray(v)
    if w is None:
        return int(np.count_nonzero(v))
    w = np.asarray(w)
    if v.shape != w.shape:
        raise ValueError("vectors have different lengths")
    return int(np.count_nonzero(v != w))


def coset_weight_hist(F: Field, v, basis, cap: int = COSET_CAP) -> np.ndarray:
    """Histogram of Hamming weights over the coset v + span(basis).

    Enumerates all q**len(basis) combinations, so the basis size is capped.
    """
    v = np.asarray(v, dtype=np.int64)
    B = np.asarray(basis, dtype=np.int64).reshape(-1, v.shape[0])
    if B.shape[0] > cap:
        raise ValueError(
            f"basis dimension {B.shape[0]} exceeds the exhaustive cap {cap}; "
            "use a weight-enumerator method for larger cosets"
        )
    return _kernels.coset_hist(v, B, F.add, F.mul, F.neg)


def coset_min_weight(F: Field, v, basis, cap: int = COSET_CAP) -> int:
    """min over c in span(basis) of hwt(v + c)."""
    hist = coset_weight_hist(F, v, basis, cap)
    return int(np.nonzero(hist)[0][0])


def sample_gl(F: Field, l: int, seed: int) -> np.ndarray:
    """Uniform draw from GL(l, q) by rejection on uniform matrices."""
    if l < 1:
        raise ValueError("l must be >= 1")
    rng = np.random.default_rng(seed)
    while True:
        M = rng.integers(0, F.q, size=(l, l))
        if rank(F, M) == l:
            return M.astype(np.int64)


def mat_to_json(F: Field, M) -> dict:
    A = as_mat(F, M)
    return {
        "p": F.p,
        "k": F.k,
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "entries": [int(x) for x in A.ravel()],
        "modulus": list(F.modulus),
    }


def mat_from_json(obj) -> tuple[Field, np.ndarray]:
    """Parse the matrix JSON format (dict or JSON text)."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    try:
        F = field_from_pk(int(obj["p"]), int(obj.get("k", 1)))
        rows, cols = int(obj["rows"]), int(obj["cols"])
        entries = [int(x) for x in obj["entries"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix record: {exc}") from exc
    if len(entries) != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, got {len(entries)}")
    if "modulus" in obj and tuple(obj["modulus"]) != F.modulus:
        raise ValueError(f"modulus {obj['modulus']} differs from the built-in {list(F.modulus)}")
    return F, as_mat(F, np.array(entries, dtype=np.int64).reshape(rows, cols))
