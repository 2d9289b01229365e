"""Belief-MDP primitives: the nonlinear filter, the observation predictive,
the belief transition kernel and the belief one-stage cost."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .models import FinitePomdp, PopulationModel

ZERO_LIKELIHOOD = 1e-300
BELIEF_TOL = 1e-12


class ZeroLikelihood(ArithmeticError):
    """The observation has zero probability under the predicted belief."""


class EmptySupport(ValueError):
    """The posterior support [y - tau, y] intersected with the state support is empty."""


def check_belief(z, n_states: int | None = None) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or (n_states is not None and z.size != n_states):
        raise ValueError(f"belief must be a vector of length {n_states}")
    if np.any(z < 0) or abs(z.sum() - 1.0) > BELIEF_TOL:
        raise ValueError("belief must be a probability vector")
    return z


@dataclass(frozen=True)
class IntervalReciprocalBelief:
    """Density gamma / x on [lower, upper], generated by action ``action`` and
    observation ``obs``."""

    lower: float
    upper: float
    action: float
    obs: float

    def __post_init__(self):
        if not 0 < self.lower < self.upper:
            raise ValueError(f"need 0 < lower < upper, got [{self.lower}, {self.upper}]")

    @property
    def gamma(self) -> float:
        return 1.0 / (math.log(self.upper) - math.log(self.lower))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        return np.where(inside, self.gamma / np.where(inside, x, 1.0), 0.0)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lower, self.upper)
        return self.gamma * np.log(x / self.lower)

    def form(self, model: PopulationModel) -> int:
        """1: [e^-a, y], 2: [y - tau, y], 3: [y - tau, e^(lam - a)], 4: whole state support."""
        lo_clip = self.lower > self.obs - model.tau
        hi_clip = self.upper < self.obs
        return {(True, False): 1, (False, False): 2, (False, True): 3, (True, True): 4}[(lo_clip, hi_clip)]


# -- finite models ------------------------------------------------------------

def predict(model: FinitePomdp, z, a: int) -> np.ndarray:
    return np.asarray(z, float) @ model.transition[:, a, :]


def correct(model: FinitePomdp, prior, y: int) -> np.ndarray:
    """Bayes correction of a state distribution with observation ``y``."""
    w = model.channel[:, y] * np.asarray(prior, float)
    total = w.sum()
    if total < ZERO_LIKELIHOOD:
        raise ZeroLikelihood(f"observation {y} has zero likelihood")
    return w / total


def filter_update(model: FinitePomdp, z, a: int, y: int) -> np.ndarray:
    """One step of the nonlinear filter F(z, a, y)."""
    return correct(model, predict(model, z, a), y)


def obs_predictive(model, z, a):
    """Distribution H(.|z, a) of the next observation.

    For the population model this is z-independent and returned as a
    :class:`ObsDensity` over y.
    """
    if isinstance(model, PopulationModel):
        return ObsDensity(model, a)
    return predict(model, z, a) @ model.channel


# -- population model ---------------------------------------------------------

def h_density(model: PopulationModel, y, a: float):
    """Observation density h(y|a); vectorized over y."""
    y = np.asarray(y, dtype=float)
    lo, hi = math.exp(-a), math.exp(model.lam - a)
    upper = np.minimum(y, hi)
    lower = np.maximum(y - model.tau, lo)
    ok = upper > lower
    val = np.log(np.where(ok, upper, 1.0)) - np.log(np.where(ok, lower, 1.0))
    return np.where(ok, val, 0.0) / (model.tau * model.lam)


@dataclass(frozen=True)
class ObsDensity:
    model: PopulationModel
    action: float

    def __call__(self, y):
        return h_density(self.model, y, self.action)

    @property
    def support(self) -> tuple[float, float]:
        return math.exp(-self.action), math.exp(self.model.lam - self.action) + self.model.tau

    def kinks(self) -> list[float]:
        lo, hi = math.exp(-self.action), math.exp(self.model.lam - self.action)
        t = self.model.tau
        return sorted({lo, lo + t, hi, hi + t})


@lru_cache(maxsize=8)
def _gauss_nodes(k: int):
    return np.polynomial.legendre.leggauss(k)


def h_cell_masses(model: PopulationModel, a: float, edges, nodes: int = 24) -> np.ndarray:
    """Mass of h(.|a) on each cell [edges[j], edges[j+1]).

    Composite Gauss-Legendre: every cell is split at the kinks of h, so each
    piece integrates a smooth function.
    """
    edges = np.asarray(edges, dtype=float)
    dens = ObsDensity(model, a)
    x, w = _gauss_nodes(nodes)
    masses = np.zeros(edges.size - 1)
    kinks = np.array(dens.kinks())
    s_lo, s_hi = dens.support
    for j in range(edges.size - 1):
        left, right = max(edges[j], s_lo), min(edges[j + 1], s_hi)
        if right <= left:
            continue
        pts = np.concatenate(([left], kinks[(kinks > left) & (kinks < right)], [right]))
        mid, half = (pts[1:] + pts[:-1]) / 2, (pts[1:] - pts[:-1]) / 2
        ys = mid[:, None] + half[:, None] * x[None, :]
        masses[j] = float(np.sum(half * (dens(ys) @ w)))
    return masses


def posterior_support(model: PopulationModel, a: float, y: float) -> tuple[float, float]:
    lower = max(y - model.tau, math.exp(-a))
    upper = min(y, math.exp(model.lam - a))
    return lower, upper


def has_support(model: PopulationModel, a: float, y) -> np.ndarray | bool:
    """Whether f(.|a, y) is well defined (nondegenerate support)."""
    y = np.asarray(y, dtype=float)
    out = np.minimum(y, math.exp(model.lam - a)) > np.maximum(y - model.tau, math.exp(-a))
    return bool(out) if out.ndim == 0 else out


def f_posterior(model: PopulationModel, a: float, y: float) -> IntervalReciprocalBelief:
    """Posterior f(.|a, y): density proportional to 1/x on the support intersection."""
    lower, upper = posterior_support(model, a, y)
    if not upper > lower:
        raise EmptySupport(f"no state is consistent with action {a} and observation {y}")
    return IntervalReciprocalBelief(lower, upper, float(a), float(y))


def _interval_square_cost(z: IntervalReciprocalBelief, a: float) -> float:
    g, lo, hi = z.gamma, z.lower, z.upper
    return g * (hi * hi - lo * lo) / 2 - 2 * a * g * (hi - lo) + a * a


def belief_cost(model, z, a) -> float:
    """Belief one-stage cost c~(z, a), a reward for maximize-sense models.

    For finite models ``a`` is an action index; for the population model it is
    the action value.
    """
    if isinstance(model, FinitePomdp):
        return float(np.asarray(z, float) @ model.cost[:, a])
    if model.utility == "square":
        return _interval_square_cost(z, a)
    val, _ = integrate.quad(lambda x: float(model.u(x - a)) * z.gamma / x, z.lower, z.upper,
                            epsabs=1e-10, epsrel=1e-10, limit=200)
    return val


def interval_square_costs(lower, upper, actions) -> np.ndarray:
    """Vectorized closed-form c~ for u(t) = t^2: rows are beliefs, columns actions."""
    lower, upper = np.asarray(lower, float)[:, None], np.asarray(upper, float)[:, None]
    a = np.asarray(actions, float)[None, :]
    g = 1.0 / np.log(upper / lower)
    return g * (upper ** 2 - lower ** 2) / 2 - 2 * a * g * (upper - lower) + a * a


@dataclass(frozen=True)
class ObsCells:
    """Partition of the observation interval with one representative level per cell."""

    edges: np.ndarray
    levels: np.ndarray

    @classmethod
    def uniform(cls, upper: float, n: int, lower: float = 0.0) -> "ObsCells":
        """n equal cells on [lower, upper] with midpoint levels."""
        delta = (upper - lower) / n
        edges = lower + np.arange(n + 1) * delta
        edges[-1] = upper
        return cls(edges, lower + (np.arange(n) + 0.5) * delta)

    @property
    def n(self) -> int:
        return self.levels.size

    def index(self, y) -> np.ndarray | int:
        j = np.searchsorted(self.edges, y, side="right") - 1
        j = np.clip(j, 0, self.n - 1)
        return int(j) if np.ndim(j) == 0 else j


def representative_indices(model: PopulationModel, a: float, cells: ObsCells) -> np.ndarray:
    """Level index used for each cell under action ``a``.

    A cell whose level gives an empty posterior is represented by the nearest
    valid level of the same action (lowest index on ties); -1 if none exists.
    """
    valid = np.flatnonzero(has_support(model, a, cells.levels))
    if valid.size == 0:
        return np.full(cells.n, -1)
    j = np.arange(cells.n)
    pos = np.clip(np.searchsorted(valid, j), 0, valid.size - 1)
    left = valid[np.maximum(pos - 1, 0)]
    right = valid[pos]
    use_left = np.abs(j - left) <= np.abs(right - j)
    return np.where(use_left, left, right)


def belief_successors(model, z, a, obs_cells: ObsCells | None = None):
    """Enumerate eta(.|z, a) as (next belief, probability) pairs.

    Finite models use every observation; the population model uses one
    successor per observation cell (quantized measurements), with z ignored.
    Zero-probability branches are dropped.
    """
    if isinstance(model, FinitePomdp):
        prior = predict(model, z, a)
        joint = model.channel * prior[:, None]
        probs = joint.sum(axis=0)
        return [(joint[:, y] / probs[y], float(probs[y]))
                for y in range(model.n_obs) if probs[y] >= ZERO_LIKELIHOOD]
    if obs_cells is None:
        raise ValueError("the population model needs observation cells")
    masses = h_cell_masses(model, a, obs_cells.edges)
    reps = representative_indices(model, a, obs_cells)
    merged: dict[int, float] = {}
    for j in np.flatnonzero(masses > 0):
        merged[int(reps[j])] = merged.get(int(reps[j]), 0.0) + float(masses[j])
    return [(f_posterior(model, a, float(obs_cells.levels[j])), p) for j, p in sorted(merged.items())]


# -- plain-text records -------------------------------------------------------

def belief_record(z) -> str:
    if isinstance(z, IntervalReciprocalBelief):
        return f"interval {z.lower!r} {z.upper!r} {z.action!r} {z.obs!r}"
    return "vector " + " ".join(repr(float(v)) for v in np.asarray(z, float))


def parse_belief_record(line: str):
    kind, *fields = line.split()
    if kind == "interval":
        lo, hi, a, y = map(float, fields)
        return IntervalReciprocalBelief(lo, hi, a, y)
    if kind == "vector":
        return np.array([float(f) for f in fields])
    raise ValueError(f"unknown belief record kind {kind!r}")
