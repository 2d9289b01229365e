"""Quantizers for actions, beliefs on a finite simplex, 1-D measures and the
population model's measurement-indexed beliefs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .beliefs import (IntervalReciprocalBelief, ObsCells, belief_record, f_posterior,
                      has_support, representative_indices)
from .metrics import ContinuousMeasure1D, DiscreteMeasure1D
from .models import PopulationModel

NORMS = {"l1": 1, "l2": 2, "linf": np.inf}


def uniform_action_net(interval: tuple[float, float], n: int) -> np.ndarray:
    """n midpoint levels on ``interval``; covering radius is (hi - lo) / (2n)."""
    lo, hi = map(float, interval)
    if n < 1 or hi < lo:
        raise ValueError("need n >= 1 and a nonempty interval")
    if hi == lo:
        return np.array([lo])
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


# -- type lattice -------------------------------------------------------------

@dataclass(frozen=True)
class TypeLatticePoint:
    counts: tuple[int, ...]
    n: int

    def __post_init__(self):
        if sum(self.counts) != self.n or min(self.counts) < 0:
            raise ValueError(f"counts {self.counts} do not form a type with denominator {self.n}")

    @property
    def probs(self) -> np.ndarray:
        return np.array(self.counts, float) / self.n


def type_lattice_counts(Z, n: int) -> np.ndarray:
    """Nearest type-lattice counts (L2) for each row of ``Z``.

    Round n*z, then repair the total: with excess d > 0 decrement the d
    coordinates with the largest rounding errors, with deficit increment the
    |d| coordinates with the smallest. Errors are sorted stably, so among equal
    errors the higher coordinate index sits later in the order.
    """
    Z = np.atleast_2d(np.asarray(Z, float))
    m = Z.shape[1]
    scaled = n * Z
    k = np.floor(scaled + 0.5).astype(np.int64)
    delta = k.sum(axis=1) - n
    bad = np.flatnonzero(delta)
    if bad.size:
        err = k[bad] - scaled[bad]
        order = np.argsort(err, axis=1, kind="stable")
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(m)[None, :].repeat(bad.size, 0), axis=1)
        d = delta[bad][:, None]
        down = (d > 0) & (rank >= m - d)
        up = (d < 0) & (rank < -d)
        k[bad] += up.astype(np.int64) - down.astype(np.int64)
    return k


def type_lattice_nearest(z, n: int) -> TypeLatticePoint:
    counts = type_lattice_counts(np.asarray(z, float)[None, :], n)[0]
    return TypeLatticePoint(tuple(int(c) for c in counts), n)


def enumerate_type_lattice(m: int, n: int) -> np.ndarray:
    """All count vectors of length m summing to n, in lexicographic order."""
    out: list[tuple[int, ...]] = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for k in range(remaining + 1):
            rec(prefix + (k,), remaining - k, slots - 1)

    rec((), n, m)
    return np.array(out, dtype=np.int64)


def covering_radius(m: int, n: int, norm="l2") -> float:
    """Largest distance from a simplex point to the type lattice Z_n."""
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and n >= 1")
    p = NORMS.get(norm, norm)
    a = m // 2
    if p == np.inf:
        return (1 - 1 / m) / n
    if p == 2:
        return math.sqrt(a * (m - a) / m) / n
    if p == 1:
        return 2 * a * (m - a) / m / n
    raise ValueError(f"unsupported norm {norm!r}")


def _pairwise(Z: np.ndarray, G: np.ndarray, p) -> np.ndarray:
    diff = np.abs(Z[:, None, :] - G[None, :, :])
    if p == np.inf:
        return diff.max(axis=2)
    if p == 1:
        return diff.sum(axis=2)
    return np.sqrt((diff ** 2).sum(axis=2))


def brute_force_nearest(Z, G, norm="l2", chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """Index of (lowest-index) nearest row of G and its distance, per row of Z."""
    Z = np.atleast_2d(np.asarray(Z, float))
    G = np.asarray(G, float)
    p = NORMS.get(norm, norm)
    idx = np.empty(Z.shape[0], dtype=np.int64)
    dist = np.empty(Z.shape[0])
    for s in range(0, Z.shape[0], chunk):
        D = _pairwise(Z[s:s + chunk], G, p)
        j = D.argmin(axis=1)
        idx[s:s + chunk] = j
        dist[s:s + chunk] = D[np.arange(j.size), j]
    return idx, dist


@dataclass(frozen=True)
class MomentStructure:
    """Moment function v over the states and the bound m defining
    F_m = {z : sum_x v(x) z(x) <= m}.

    ``kind`` is "one" (v = 1) or "square" (v(x) = |x|^2 with x taken from
    ``state_points``).
    """

    kind: str = "one"
    bound: float = 1.0
    state_points: tuple = ()
    growth: float = 1.0

    def values(self, n_states: int) -> np.ndarray:
        if self.kind == "one":
            return np.ones(n_states)
        if self.kind == "square":
            pts = np.asarray(self.state_points, float).reshape(n_states, -1)
            return np.sum(pts ** 2, axis=1)
        raise ValueError(f"unknown moment function {self.kind!r}")

    def is_proper(self, n_states: int) -> bool:
        return bool(self.values(n_states).max() > self.bound)


@dataclass(frozen=True, eq=False)
class SimplexGrid:
    """Type-lattice grid on the belief simplex with nearest-neighbor cells.

    When ``moment`` cuts out a proper subset F_m, grid points are restricted to
    F_m and every belief outside F_m maps to one extra pseudo-state, whose
    representative is the Dirac at the state with the largest moment value.
    """

    m: int
    n: int
    metric: str = "l2"
    moment: MomentStructure | None = None
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.metric not in NORMS:
            raise ValueError(f"unsupported metric {self.metric!r}")
        counts = enumerate_type_lattice(self.m, self.n)
        if self.proper_moment:
            v = self.moment.values(self.m)
            counts = counts[(counts @ v) / self.n <= self.moment.bound + 1e-12]
        object.__setattr__(self, "counts", counts)

    @property
    def proper_moment(self) -> bool:
        return self.moment is not None and self.moment.is_proper(self.m)

    @cached_property
    def lattice_points(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def pseudo_state(self) -> int | None:
        return len(self.counts) if self.proper_moment else None

    @cached_property
    def points(self) -> np.ndarray:
        if self.pseudo_state is None:
            return self.lattice_points
        v = self.moment.values(self.m)
        rep = np.zeros(self.m)
        rep[int(np.argmax(v))] = 1.0
        return np.vstack([self.lattice_points, rep])

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @cached_property
    def _lookup(self) -> dict:
        return {tuple(c): i for i, c in enumerate(self.counts.tolist())}

    @property
    def radius(self) -> float:
        """Cell-radius certificate in the grid metric."""
        return covering_radius(self.m, self.n, self.metric)

    def cell_indices(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, float))
        if self.proper_moment:
            v = self.moment.values(self.m)
            inside = Z @ v <= self.moment.bound + 1e-12
            out = np.full(Z.shape[0], self.pseudo_state, dtype=np.int64)
            if inside.any():
                out[inside] = brute_force_nearest(Z[inside], self.lattice_points, self.metric)[0]
            return out
        if self.metric != "l2":
            return brute_force_nearest(Z, self.lattice_points, self.metric)[0]
        counts = type_lattice_counts(Z, self.n)
        return np.array([self._lookup[tuple(c)] for c in counts.tolist()], dtype=np.int64)

    def cell_index(self, z) -> int:
        return int(self.cell_indices(np.asarray(z, float)[None, :])[0])

    def distance(self, z, i: int) -> float:
        from .metrics import lp_distance
        return lp_distance(z, self.points[i], NORMS[self.metric])

    def records(self) -> list[str]:
        return [belief_record(p) for p in self.points]


# -- 1-D measures -------------------------------------------------------------

def _push_continuous(mu: ContinuousMeasure1D, edges: np.ndarray, levels: np.ndarray):
    lo = np.clip(edges[:-1], mu.lower, mu.upper)
    hi = np.clip(edges[1:], mu.lower, mu.upper)
    mass = np.asarray(mu.cdf(hi), float) - np.asarray(mu.cdf(lo), float)
    mass = np.clip(mass, 0.0, None)
    return levels, mass


def uniform_levels(lower: float, upper: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Edges and midpoint levels of a uniform quantizer on [lower, upper] with
    cell radius at most 1/(2n)."""
    cells = max(1, math.ceil((upper - lower) * n - 1e-12))
    width = (upper - lower) / cells if upper > lower else 0.0
    edges = lower + np.arange(cells + 1) * width
    edges[-1] = upper
    return edges, lower + (np.arange(cells) + 0.5) * width


def compact_support_quantize(mu, n: int, lower: float = 0.0, upper: float = 1.0) -> DiscreteMeasure1D:
    """Push ``mu`` (supported in [lower, upper]) through a uniform quantizer
    with cell radius below 1/n."""
    edges, levels = uniform_levels(lower, upper, n)
    if isinstance(mu, ContinuousMeasure1D):
        pts, mass = _push_continuous(mu, edges, levels)
        return DiscreteMeasure1D.from_atoms(pts, mass)
    if mu.points.min() < lower - 1e-12 or mu.points.max() > upper + 1e-12:
        raise ValueError("measure is not supported in the quantizer range")
    j = np.clip(np.searchsorted(edges, mu.points, side="right") - 1, 0, levels.size - 1)
    return DiscreteMeasure1D.from_atoms(levels[j], mu.weights)


def truncated_lattice_quantize(mu, n: int) -> DiscreteMeasure1D:
    """Lattice quantizer with step 1/n on [-n, n]; mass outside goes to 0."""
    if isinstance(mu, ContinuousMeasure1D):
        lo, hi = max(mu.lower, -n), min(mu.upper, n)
        mass_out = 1.0
        pts, mass = np.array([0.0]), np.array([0.0])
        if hi > lo:
            kmin, kmax = math.floor(lo * n + 0.5), math.floor(hi * n + 0.5)
            ks = np.arange(kmin, kmax + 1)
            edges = np.concatenate(((ks - 0.5) / n, [(kmax + 0.5) / n]))
            edges = np.clip(edges, lo, hi)
            pts, mass = _push_continuous(mu, edges, ks / n)
            mass_out = 1.0 - mass.sum()
        return DiscreteMeasure1D.from_atoms(np.append(pts, 0.0), np.append(mass, max(mass_out, 0.0)))
    x = mu.points
    q = np.where(np.abs(x) <= n, np.floor(x * n + 0.5) / n, 0.0)
    return DiscreteMeasure1D.from_atoms(q, mu.weights)


def second_moment(mu) -> float:
    if isinstance(mu, DiscreteMeasure1D):
        return mu.moment(np.square)
    from scipy import integrate
    # E[X^2] = int 2t (1 - F(t)) dt over t > 0 plus the mirror term
    pos, _ = integrate.quad(lambda t: 2 * t * (1 - float(mu.cdf(t))), max(mu.lower, 0.0), max(mu.upper, 0.0))
    neg, _ = integrate.quad(lambda t: 2 * (-t) * float(mu.cdf(t)), min(mu.lower, 0.0), min(mu.upper, 0.0))
    return pos + neg


# -- measurement quantizer ----------------------------------------------------

def _gamma_form2(y, tau):
    y = np.asarray(y, float)
    return 1.0 / np.log(y / (y - tau))


class MeasurementQuantizer:
    """Quantizer on the population model's beliefs f(.|a, y) obtained by
    uniformly quantizing the observation: Q_n f(.|a, y) = f(.|a, q_n(y)).

    The codebook is every (action, level) pair with a nonempty posterior. If
    q_n(y) yields an empty posterior the nearest valid level of the same
    action is used.
    """

    metric = "tv"
    pseudo_state = None

    def __init__(self, model: PopulationModel, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.model = model
        self.n = n
        self.cells = ObsCells.uniform(model.K, n)
        A = model.n_actions
        self.index_map = np.full((A, n), -1, dtype=np.int64)
        self.rep = np.empty((A, n), dtype=np.int64)
        pairs = []
        for k, a in enumerate(model.actions):
            ok = np.flatnonzero(has_support(model, a, self.cells.levels))
            for j in ok:
                self.index_map[k, j] = len(pairs)
                pairs.append((k, int(j)))
            self.rep[k] = representative_indices(model, a, self.cells)
        self.pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)

    @property
    def delta(self) -> float:
        return self.model.K / self.n

    @property
    def size(self) -> int:
        return len(self.pairs)

    @cached_property
    def points(self) -> list[IntervalReciprocalBelief]:
        m = self.model
        return [f_posterior(m, m.actions[k], self.cells.levels[j]) for k, j in self.pairs]

    @cached_property
    def supports(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.model
        a = m.actions[self.pairs[:, 0]]
        y = self.cells.levels[self.pairs[:, 1]]
        return np.maximum(y - m.tau, np.exp(-a)), np.minimum(y, np.exp(m.lam - a))

    def action_index(self, a: float) -> int:
        k = int(np.argmin(np.abs(self.model.actions - a)))
        if not math.isclose(self.model.actions[k], a, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"action {a} is not on the model's action grid")
        return k

    def index_for(self, action_index: int, y) -> np.ndarray | int:
        j = self.cells.index(y)
        return self.index_map[action_index, self.rep[action_index, j]]

    def cell_index(self, z: IntervalReciprocalBelief) -> int:
        return int(self.index_for(self.action_index(z.action), z.obs))

    def quantize(self, z: IntervalReciprocalBelief) -> IntervalReciprocalBelief:
        return self.points[self.cell_index(z)]

    # constants of the total-variation error bound
    @property
    def K1(self) -> float:
        m = self.model
        top = math.exp(m.lam - m.actions[0])
        return 1.0 / math.log((top + m.tau) / top)

    @property
    def K2(self) -> float:
        return math.exp(-self.model.actions[-1]) - self.model.theta

    @property
    def L1(self) -> float:
        m = self.model
        bot = math.exp(-m.actions[-1])
        return math.log((bot + m.tau) / bot)

    def gamma_modulus(self, step: float, samples: int = 20001) -> float:
        """Measured sup |gamma(y) - gamma(y')| over |y - y'| <= step on the
        range where posteriors have the form [y - tau, y]."""
        m = self.model
        lo = math.exp(-m.actions[-1]) + m.tau
        hi = math.exp(m.lam - m.actions[0])
        if hi <= lo:
            return 0.0
        y = np.linspace(lo, hi, samples)
        g = _gamma_form2(y, m.tau)
        shifted = _gamma_form2(np.minimum(y + step, hi), m.tau)
        return float(np.max(np.abs(shifted - g)))

    def tv_bound(self) -> float:
        d = self.delta
        return 2 * self.K1 * d / self.K2 + self.L1 * self.gamma_modulus(d / 2)

    @property
    def radius(self) -> float:
        return self.tv_bound()

    def records(self) -> list[str]:
        return [belief_record(p) for p in self.points]
