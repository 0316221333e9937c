"""One kernel step: exact synthetic channels W^(1..l) of a channel W."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import gf
from .channel import Dmc, ParamSet, canonicalize, degrade_merge, params
from .kernel import Kernel, bec_maps

ENUM_GUARD = 10**7
DEFAULT_MERGE_CAP = 512


@dataclass(frozen=True)
class SynthesisResult:
    children: tuple
    params: tuple
    merged_output_sizes: tuple


def _all_inputs(K: Kernel) -> tuple[np.ndarray, np.ndarray]:
    l, q = K.l, K.q
    U = np.array(list(itertools.product(range(q), repeat=l)), dtype=np.int64).reshape(-1, l)
    return U, gf.matmul(K.field, U, K.G)


def synthesize(W: Dmc, K: Kernel, j: int, merge_cap: int | None = None) -> Dmc:
    """The synthetic channel U_j -> (Y_1..Y_l, U_1..U_{j-1}), with j 1-based.

    The joint is the sum over u_{j+1..l} of prod_k W((uG)_k, y_k); outputs are
    interned row-major as (u_{<j}, y_1, ..., y_l) and then canonicalized.
    """
    l, q = K.l, K.q
    if not 1 <= j <= l:
        raise ValueError(f"child index {j} outside 1..{l}")
    if K.field != W.field:
        raise ValueError("kernel and channel live over different fields")
    degraded = W.degraded
    m = W.n_out
    if m**l * q ** (j - 1) > ENUM_GUARD:
        if merge_cap is None:
            raise ValueError(
                f"synthesis table {m}^{l}*{q}^{j - 1} exceeds the enumeration guard {ENUM_GUARD}; pass merge_cap"
            )
        cap = max(q, int((ENUM_GUARD / q ** (j - 1)) ** (1.0 / l)))
        W = degrade_merge(W, min(cap, merge_cap))
        m = W.n_out
        degraded = True
    J = W.joint
    U, X = _all_inputs(K)
    # U rows enumerate u in lexicographic order: index = (u_<j, u_j, u_>j)
    tail = q ** (l - j)
    out = np.zeros((q ** (j - 1), q, m**l))
    for idx in range(U.shape[0]):
        vec = J[X[idx, 0]]
        for k in range(1, l):
            vec = np.multiply.outer(vec, J[X[idx, k]]).ravel()
        head = idx // tail
        out[head // q, head % q] += vec
    joint = out.transpose(1, 0, 2).reshape(q, -1)
    child = canonicalize(Dmc(W.field, joint, degraded=degraded))
    if merge_cap is not None and child.n_out > merge_cap:
        child = degrade_merge(child, merge_cap)
    return child


def synthesize_all(W: Dmc, K: Kernel, merge_cap: int | None = None) -> SynthesisResult:
    kids = tuple(synthesize(W, K, j, merge_cap) for j in range(1, K.l + 1))
    return SynthesisResult(kids, tuple(params(c) for c in kids), tuple(c.n_out for c in kids))


def bec_synthesize(eps: float, K: Kernel) -> list[float]:
    """Erasure probabilities of the l synthetic channels of an erasure channel."""
    if not 0 <= eps <= 1:
        raise ValueError("erasure probability must lie in [0, 1]")
    return [float(e) for e in bec_maps(K, eps)]


def q_as_channel(Q) -> Dmc:
    """The input distribution Q seen as a channel with one constant output."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 1 or (Q < 0).any() or abs(Q.sum() - 1) > 1e-12:
        raise ValueError("Q must be a probability vector")
    return Dmc(gf.get_field(Q.size), Q[:, None])


def erasure_of(W: Dmc) -> float | None:
    """If W is equivalent to a binary erasure channel, its erasure probability."""
    if W.q != 2:
        return None
    J = W.joint
    py = J.sum(axis=0)
    post = J[0] / np.where(py > 0, py, 1)
    mid = np.isclose(post, 0.5, atol=1e-12) & (py > 0)
    ends = (np.isclose(post, 0, atol=1e-12) | np.isclose(post, 1, atol=1e-12)) & (py > 0)
    if not (mid | ends | (py == 0)).all():
        return None
    return float(py[mid].sum())
