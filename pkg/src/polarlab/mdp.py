"""Moderate-deviation region and erasure-channel scaling numerics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import h2
from .kernel import DistanceStats, Kernel, bec_maps

RHO_SBDMC = 1 / 4.714
RHO_BEC = 1 / 3.627
DERIV_STEP = 1e-6
MARGIN = 1e-9


def binary_cramer(s: float) -> float:
    """Closed-form L for the profile {1, 2}: 1 - h2(s) below 1/2, else 0."""
    s = min(max(s, 0.0), 0.5)
    return float(1 - h2(s))


@dataclass
class RegionSpec:
    rho0: float
    L: Callable[[float], float]
    varpi: float
    tangent: tuple | None = None

    def __post_init__(self):
        if not 0 < self.rho0 < 1:
            raise ValueError(f"rho0 must lie in (0, 1), got {self.rho0}")
        if not 0 < self.varpi <= 1:
            raise ValueError(f"varpi must lie in (0, 1], got {self.varpi}")

    @classmethod
    def binary(cls, rho0: float = RHO_SBDMC) -> "RegionSpec":
        return cls(rho0, binary_cramer, 0.5)

    @classmethod
    def from_profile(cls, rho0: float, D, l: int | None = None) -> "RegionSpec":
        st = DistanceStats(D, l)
        return cls(rho0, st.L, st.varpi)

    def dL(self, x: float) -> float:
        h = min(DERIV_STEP, x / 2) if x > 0 else DERIV_STEP
        return (self.L(x + h) - self.L(x - h)) / (2 * h)

    def solve_tangent(self) -> tuple | None:
        """Tangent point of the line from (0, rho0) to the graph of L.

        Returns None when rho0 >= L(0+), in which case the boundary is L itself.
        """
        g = lambda x: self.L(x) - x * self.dL(x) - self.rho0
        lo, hi = 1e-5, self.varpi - 1e-7
        if g(lo) <= 0:
            return None
        a, b = lo, hi
        ga = g(a)
        while b - a > 1e-10:
            m = 0.5 * (a + b)
            gm = g(m)
            if (gm > 0) == (ga > 0):
                a, ga = m, gm
            else:
                b = m
        x = 0.5 * (a + b)
        self.tangent = (x, self.L(x))
        return self.tangent

    def boundary(self, x: float) -> float:
        if self.tangent is None:
            self.solve_tangent()
        if x >= self.varpi:
            return 0.0
        if self.tangent is None:
            return min(self.rho0, self.L(x))
        px, py = self.tangent
        if x <= px:
            return self.rho0 + x * (py - self.rho0) / px
        return max(0.0, self.L(x))


def in_region(pi: float, rho: float, spec: RegionSpec) -> bool:
    """True iff (pi, rho) lies strictly under the envelope boundary."""
    if pi < 0 or rho < 0:
        raise ValueError("pi and rho must be non-negative")
    if pi >= spec.varpi:
        return False
    return rho < spec.boundary(pi) - MARGIN


def region_boundary(spec: RegionSpec, grid: int = 101) -> dict:
    tan = spec.solve_tangent()
    xs = np.linspace(0.0, spec.varpi, grid)
    return {
        "tangent": tan,
        "degenerate": tan is None,
        "samples": [(float(x), float(spec.boundary(x))) for x in xs],
        "pi_intercept": spec.varpi,
        "rho_intercept": spec.boundary(0.0),
    }


def _h(name: str, alpha: float = 0.5):
    if name == "sqrt_z_1mz":
        return lambda z: np.sqrt(np.clip(z * (1 - z), 0, None))
    if name == "sqrt_min":
        return lambda z: np.sqrt(np.minimum(z, 1 - z))
    if name == "power_alpha":
        return lambda z: np.minimum(z, 1 - z) ** alpha
    raise ValueError(f"unknown eigenfunction {name!r}")


def bec_eigen_ratio(K: Kernel, h: str = "sqrt_z_1mz", grid: int = 2001, alpha: float = 0.5) -> float:
    """sup over z in (0,1) of (1/l) sum_j h(eps_j(z)) / h(z)."""
    f = _h(h, alpha)

    def ratio(z):
        z = np.asarray(z, dtype=np.float64)
        return f(bec_maps(K, z)).mean(axis=0) / f(z)

    zs = np.linspace(0, 1, grid + 2)[1:-1]
    r = ratio(zs)
    k = int(np.argmax(r))
    lo, hi = zs[max(k - 1, 0)], zs[min(k + 1, zs.size - 1)]
    best = float(r[k])
    if hi > lo:
        res = minimize_scalar(lambda z: -float(ratio(z)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


@dataclass
class ScalingResult:
    lam: float
    rho: float
    iterations: int
    h: np.ndarray
    z: np.ndarray


def bec_scaling_exponent(K: Kernel, grid: int = 10_000, tol: float = 1e-12, max_iter: int = 100_000) -> ScalingResult:
    """Dominant eigenvalue of T[h](z) = (1/l) sum_j h(eps_j(z)) by power iteration.

    h lives on a uniform grid of (0, 1) with h(0) = h(1) = 0 and is linearly
    interpolated between nodes.
    """
    if grid < 1000:
        raise ValueError("grid must have at least 1000 interior points")
    z = np.linspace(0.0, 1.0, grid + 2)
    kids = bec_maps(K, z)  # (l, grid+2)
    h = np.sqrt(z * (1 - z))
    lam_old = 0.0
    for it in range(1, max_iter + 1):
        new = np.mean([np.interp(kids[j], z, h) for j in range(K.l)], axis=0)
        new[0] = new[-1] = 0.0
        lam = float(new.max() / h.max()) if h.max() > 0 else 0.0
        if new.max() > 0:
            h = new / new.max()
        if abs(lam - lam_old) < tol:
            break
        lam_old = lam
    else:
        raise RuntimeError("power iteration did not converge")
    rho = -math.log(lam) / math.log(K.l) if lam > 0 else math.inf
    return ScalingResult(lam, rho + 0.0, it, h, z)
