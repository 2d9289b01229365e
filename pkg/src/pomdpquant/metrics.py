"""Distances between probability measures.

Lp distances on the simplex, total variation, Wasserstein-1 on the line and
the bounded-Lipschitz distance between finitely supported measures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, sparse

from .beliefs import IntervalReciprocalBelief


@dataclass(frozen=True, eq=False)
class DiscreteMeasure1D:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        w = np.asarray(self.weights, float)
        if pts.ndim != 1 or pts.shape != w.shape or pts.size == 0:
            raise ValueError("points and weights must be equal-length nonempty vectors")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must form a probability vector")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, points, weights) -> "DiscreteMeasure1D":
        """Sort, merge coincident atoms and drop zero weights."""
        pts, inv = np.unique(np.asarray(points, float), return_inverse=True)
        w = np.bincount(inv.ravel(), weights=np.asarray(weights, float).ravel(), minlength=pts.size)
        keep = w > 0
        w = w[keep] / w[keep].sum()
        return cls(pts[keep], w)

    @classmethod
    def dirac(cls, x: float) -> "DiscreteMeasure1D":
        return cls(np.array([float(x)]), np.array([1.0]))

    def cdf(self, t):
        idx = np.searchsorted(self.points, t, side="right")
        return np.concatenate(([0.0], np.cumsum(self.weights)))[idx]

    def moment(self, fn: Callable = np.abs) -> float:
        return float(self.weights @ fn(self.points))

    @property
    def breakpoints(self) -> np.ndarray:
        return self.points


@dataclass(frozen=True)
class ContinuousMeasure1D:
    """An absolutely continuous measure on [lower, upper] given by its CDF.

    ``kinks`` lists interior points where the CDF is not smooth.
    """

    cdf: Callable
    lower: float
    upper: float
    kinks: tuple = ()

    @classmethod
    def uniform(cls, lower: float, upper: float) -> "ContinuousMeasure1D":
        return cls(lambda t: np.clip((np.asarray(t, float) - lower) / (upper - lower), 0.0, 1.0),
                   lower, upper)

    @classmethod
    def from_interval_belief(cls, z: IntervalReciprocalBelief) -> "ContinuousMeasure1D":
        return cls(z.cdf, z.lower, z.upper)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([self.lower, *self.kinks, self.upper], float)


def lp_distance(z1, z2, p=2) -> float:
    z1, z2 = np.asarray(z1, float), np.asarray(z2, float)
    if z1.shape != z2.shape:
        raise ValueError(f"length mismatch: {z1.shape} vs {z2.shape}")
    d = np.abs(z1 - z2)
    if p in (np.inf, "inf"):
        return float(d.max(initial=0.0))
    if p == 1:
        return float(d.sum())
    if p == 2:
        return float(np.sqrt(d @ d))
    raise ValueError(f"unsupported norm {p!r}")


def _interval_tv(z1: IntervalReciprocalBelief, z2: IntervalReciprocalBelief) -> float:
    # on each piece between breakpoints both densities are (constant)/x
    pts = sorted({z1.lower, z1.upper, z2.lower, z2.upper})
    total = 0.0
    for left, right in zip(pts[:-1], pts[1:]):
        mid = (left + right) / 2
        c1 = z1.gamma if z1.lower <= mid <= z1.upper else 0.0
        c2 = z2.gamma if z2.lower <= mid <= z2.upper else 0.0
        total += abs(c1 - c2) * math.log(right / left)
    return min(total, 2.0)


def total_variation(m1, m2) -> float:
    """Total variation norm, i.e. the L1 distance of densities (max 2)."""
    if isinstance(m1, IntervalReciprocalBelief) and isinstance(m2, IntervalReciprocalBelief):
        return _interval_tv(m1, m2)
    if isinstance(m1, DiscreteMeasure1D) and isinstance(m2, DiscreteMeasure1D):
        pts = np.union1d(m1.points, m2.points)
        w1 = np.zeros(pts.size)
        w2 = np.zeros(pts.size)
        w1[np.searchsorted(pts, m1.points)] = m1.weights
        w2[np.searchsorted(pts, m2.points)] = m2.weights
        return float(np.abs(w1 - w2).sum())
    if isinstance(m1, (IntervalReciprocalBelief, DiscreteMeasure1D)) or isinstance(
            m2, (IntervalReciprocalBelief, DiscreteMeasure1D)):
        raise TypeError(f"kind mismatch: {type(m1).__name__} vs {type(m2).__name__}")
    return lp_distance(m1, m2, 1)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _gl(fn, a, b) -> np.ndarray:
    """20-point Gauss-Legendre over each interval [a_k, b_k]."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    mid, half = (a + b) / 2, (b - a) / 2
    return half * (fn(mid[:, None] + half[:, None] * _GL_X[None, :]) @ _GL_W)


def _abs_gap_integrals(F: ContinuousMeasure1D, c, a, b) -> float:
    """Sum over k of the integral of |F(t) - c_k| on [a_k, b_k], for a
    nondecreasing CDF F. The sign change, if any, is located by bisection."""
    c = np.asarray(c, float)
    fa, fb = np.asarray(F.cdf(a), float) - c, np.asarray(F.cdf(b), float) - c
    cross = (fa < 0) & (fb > 0)
    lo, hi = a.copy(), b.copy()
    for _ in range(80):
        mid = (lo + hi) / 2
        below = np.asarray(F.cdf(mid), float) < c
        lo = np.where(cross & below, mid, lo)
        hi = np.where(cross & ~below, mid, hi)
    root = np.where(cross, (lo + hi) / 2, b)
    total = np.abs(_gl(lambda t: np.asarray(F.cdf(t), float) - c[:, None], a, root)).sum()
    if cross.any():
        cc = c[cross][:, None]
        total += np.abs(_gl(lambda t: np.asarray(F.cdf(t), float) - cc, root[cross], b[cross])).sum()
    return float(total)


def wasserstein1_1d(mu, nu) -> float:
    """W1 on the line, as the integral of |F_mu - F_nu|."""
    if isinstance(mu, DiscreteMeasure1D) and isinstance(nu, DiscreteMeasure1D):
        pts = np.union1d(mu.points, nu.points)
        gaps = np.diff(pts)
        diff = mu.cdf(pts[:-1]) - nu.cdf(pts[:-1])
        return float(np.abs(diff) @ gaps)
    if isinstance(mu, DiscreteMeasure1D):
        mu, nu = nu, mu
    pts = np.union1d(mu.breakpoints, nu.breakpoints)
    total = 0.0
    if isinstance(nu, DiscreteMeasure1D):
        return _abs_gap_integrals(mu, nu.cdf(pts[:-1]), pts[:-1], pts[1:])
    for left, right in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda t: abs(float(mu.cdf(t)) - float(nu.cdf(t))), left, right,
                                epsabs=1e-12, epsrel=1e-10, limit=200)
        total += val
    return total


def bounded_lipschitz(mu: DiscreteMeasure1D, nu: DiscreteMeasure1D) -> float:
    """Exact bounded-Lipschitz distance between finitely supported measures.

    Solves max sum f(s) (mu(s) - nu(s)) over f on the support union with
    |f| <= b, Lipschitz constant <= l and b + l <= 1. On the line it suffices
    to constrain neighbouring support points.
    """
    pts = np.union1d(mu.points, nu.points)
    n = pts.size
    w = np.zeros(n)
    w[np.searchsorted(pts, mu.points)] += mu.weights
    w[np.searchsorted(pts, nu.points)] -= nu.weights
    if n == 1:
        return 0.0
    # variables: f_0..f_{n-1}, b, l
    ib, il = n, n + 1
    rows, cols, vals = [], [], []
    r = 0
    for i in range(n):
        for sign in (1.0, -1.0):
            rows += [r, r]; cols += [i, ib]; vals += [sign, -1.0]; r += 1
    d = np.diff(pts)
    for i in range(n - 1):
        for sign in (1.0, -1.0):
            rows += [r, r, r]; cols += [i + 1, i, il]; vals += [sign, -sign, -d[i]]; r += 1
    rows += [r, r]; cols += [ib, il]; vals += [1.0, 1.0]; r += 1
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(r, n + 2))
    ub = np.zeros(r)
    ub[-1] = 1.0
    c = np.concatenate((-w, [0.0, 0.0]))
    bounds = [(None, None)] * n + [(0, None), (0, None)]
    res = optimize.linprog(c, A_ub=A, b_ub=ub, bounds=bounds, method="highs",
                           options={"primal_feasibility_tolerance": 1e-10,
                                    "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise RuntimeError(f"bounded-Lipschitz LP did not converge: {res.message}")
    return max(0.0, -float(res.fun))
