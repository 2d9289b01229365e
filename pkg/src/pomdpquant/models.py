"""POMDP data model: finite tabular POMDPs, the machine repair example and the
partially observed population growth family."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np

STOCHASTIC_TOL = 1e-12


class Sense(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class ModelError(ValueError):
    """Raised when model parameters fall outside their valid range."""


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class FinitePomdp:
    """Tabular POMDP.

    ``transition[x, a]`` is the next-state distribution p(.|x, a),
    ``channel[x]`` the observation distribution r(.|x) and ``cost[x, a]`` the
    one-stage cost (a reward when ``sense`` is maximize).
    """

    transition: np.ndarray
    channel: np.ndarray
    cost: np.ndarray
    discount: float
    sense: Sense = Sense.MINIMIZE
    initial: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "channel", _frozen(self.channel))
        object.__setattr__(self, "cost", _frozen(self.cost))
        object.__setattr__(self, "sense", Sense(self.sense))
        if self.initial is not None:
            object.__setattr__(self, "initial", _frozen(self.initial))
        t, c, r = self.transition, self.channel, self.cost
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise ModelError(f"transition must have shape (m_x, m_a, m_x), got {t.shape}")
        if c.ndim != 2 or c.shape[0] != t.shape[0]:
            raise ModelError(f"channel must have shape (m_x, m_y), got {c.shape}")
        if r.shape != t.shape[:2]:
            raise ModelError(f"cost must have shape {t.shape[:2]}, got {r.shape}")
        if not 0.0 < self.discount < 1.0:
            raise ModelError(f"discount must lie in (0, 1), got {self.discount}")
        if self.initial is not None and self.initial.shape != (t.shape[0],):
            raise ModelError("initial distribution has the wrong length")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def n_obs(self) -> int:
        return self.channel.shape[1]

    @property
    def max_abs_cost(self) -> float:
        return float(np.max(np.abs(self.cost)))


@dataclass(frozen=True)
class MachineRepairParams:
    epsilon: float = 0.17
    kappa: float = 0.9
    alpha: float = 0.9545
    repair_cost: float = 1.0
    break_cost: float = 2.0
    discount: float = 0.3
    # completions of the transitions the example leaves open
    working_repair_stay: float = 1.0
    broken_idle_stay: float = 1.0
    initial_state: int = 1


def machine_repair(params: MachineRepairParams | None = None, **overrides) -> FinitePomdp:
    """Two-state machine repair POMDP.

    State/observation 1 means working, 0 broken; action 1 means repair.
    ``alpha`` is the probability a working, unrepaired machine stays working.
    """
    p = params or MachineRepairParams()
    if overrides:
        p = MachineRepairParams(**{**p.__dict__, **overrides})
    if not 0.0 <= p.epsilon <= 1.0:
        raise ModelError(f"epsilon must lie in [0, 1], got {p.epsilon}")
    for name in ("kappa", "alpha", "working_repair_stay", "broken_idle_stay"):
        v = getattr(p, name)
        if not 0.0 <= v <= 1.0:
            raise ModelError(f"{name} must lie in [0, 1], got {v}")
    if p.repair_cost < 0 or p.break_cost < 0:
        raise ModelError("repair_cost and break_cost must be nonnegative")
    if not 0.0 < p.discount < 1.0:
        raise ModelError(f"discount must lie in (0, 1), got {p.discount}")
    if p.initial_state not in (0, 1):
        raise ModelError(f"initial_state must be 0 or 1, got {p.initial_state}")

    t = np.zeros((2, 2, 2))
    t[0, 0] = (p.broken_idle_stay, 1.0 - p.broken_idle_stay)
    t[0, 1] = (1.0 - p.kappa, p.kappa)
    t[1, 0] = (1.0 - p.alpha, p.alpha)
    t[1, 1] = (1.0 - p.working_repair_stay, p.working_repair_stay)
    channel = np.array([[1.0 - p.epsilon, p.epsilon], [p.epsilon, 1.0 - p.epsilon]])
    R, E = p.repair_cost, p.break_cost
    cost = np.array([[E, R + E], [0.0, R]])
    initial = np.eye(2)[p.initial_state]
    return FinitePomdp(t, channel, cost, p.discount, Sense.MINIMIZE, initial)


UTILITIES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "square": lambda t: np.square(t),
    "abs": lambda t: np.abs(t),
    "identity": lambda t: np.asarray(t, dtype=float),
}

Utility = Union[str, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """Partially observed population growth model.

    Dynamics x' = exp(-a + v), y = x + xi with v ~ U[0, lam], xi ~ U[0, tau].
    The one-stage reward is u(x - a); actions are the finite grid ``actions``.
    """

    lam: float
    tau: float
    discount: float
    actions: np.ndarray
    utility: Utility = "square"
    theta: float | None = None
    sense: Sense = Sense.MAXIMIZE
    initial_state: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "actions", _frozen(self.actions))
        object.__setattr__(self, "sense", Sense(self.sense))
        if self.lam <= 0 or self.tau <= 0:
            raise ModelError("lam and tau must be positive")
        if not 0.0 < self.discount < 1.0:
            raise ModelError(f"discount must lie in (0, 1), got {self.discount}")
        a = self.actions
        if a.ndim != 1 or a.size == 0:
            raise ModelError("action grid must be a nonempty 1-D list")
        if a[0] <= 0:
            raise ModelError(f"smallest action must be positive, got {a[0]}")
        if np.any(np.diff(a) <= 0):
            raise ModelError("action grid must be strictly increasing")
        if a[-1] > self.L * (1 + 1e-12):
            raise ModelError(f"actions must lie in (0, L] with L = {self.L}")
        if isinstance(self.utility, str) and self.utility not in UTILITIES:
            raise ModelError(f"unknown utility {self.utility!r}")
        if self.theta is None:
            object.__setattr__(self, "theta", min(0.01, math.exp(-a[-1]) / 2))
        if not 0 < self.theta < math.exp(-a[-1]):
            raise ModelError("theta must satisfy 0 < theta < exp(-a_max)")
        if not 0.0 <= self.initial_state <= self.L:
            raise ModelError(f"initial_state must lie in [0, L], got {self.initial_state}")

    @property
    def L(self) -> float:
        return math.exp(self.lam)

    @property
    def K(self) -> float:
        return self.L + self.tau

    @property
    def n_actions(self) -> int:
        return self.actions.size

    def u(self, t):
        fn = UTILITIES[self.utility] if isinstance(self.utility, str) else self.utility
        return fn(t)

    def g_v(self, v):
        v = np.asarray(v, dtype=float)
        return np.where((v >= 0) & (v <= self.lam), 1.0 / self.lam, 0.0)

    def g_xi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.where((xi >= 0) & (xi <= self.tau), 1.0 / self.tau, 0.0)

    def state_support(self, action_index: int) -> tuple[float, float]:
        a = self.actions[action_index]
        return math.exp(-a), math.exp(self.lam - a)

    @property
    def max_abs_cost(self) -> float:
        # x - a ranges over [-L, L]
        grid = np.linspace(-self.L, self.L, 4001)
        return float(np.max(np.abs(self.u(grid))))


def population_growth(
    lam: float = 1.0,
    tau: float = 0.5,
    discount: float = 0.2,
    actions: int | list[float] | np.ndarray = 20,
    utility: Utility = "square",
    theta: float | None = None,
    initial_state: float = 2.0,
) -> PopulationModel:
    """Build the population model; an integer ``actions`` is a count of
    uniform midpoint levels on [0, L]."""
    if isinstance(actions, (int, np.integer)):
        if actions < 1:
            raise ModelError("action grid must be nonempty")
        from .quantizers import uniform_action_net

        actions = uniform_action_net((0.0, math.exp(lam)), int(actions))
    if len(actions) == 0:
        raise ModelError("action grid must be nonempty")
    return PopulationModel(lam, tau, discount, np.asarray(actions, float), utility, theta,
                           initial_state=initial_state)


@dataclass
class AssumptionReport:
    clauses: dict[str, tuple[bool, str]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.clauses.values())

    def failures(self) -> list[str]:
        return [k for k, (passed, _) in self.clauses.items() if not passed]

    def lines(self) -> list[str]:
        return [f"{'PASS' if ok else 'FAIL'} {name}: {msg}" for name, (ok, msg) in self.clauses.items()]


def _rows_stochastic(rows: np.ndarray) -> tuple[bool, str]:
    rows = np.asarray(rows, float).reshape(-1, rows.shape[-1])
    neg = float(rows.min())
    dev = float(np.max(np.abs(rows.sum(axis=1) - 1.0)))
    ok = neg >= 0 and dev <= STOCHASTIC_TOL
    return ok, f"min entry {neg:.3g}, max |row sum - 1| {dev:.3g}"


def validate_assumptions(model) -> AssumptionReport:
    """Check the standing model assumptions clause by clause (report only)."""
    rep = AssumptionReport()
    if isinstance(model, FinitePomdp):
        finite = bool(np.all(np.isfinite(model.cost)))
        rep.clauses["a: cost bounded"] = (finite, f"max |c| = {model.max_abs_cost:.6g}")
        if model.sense is Sense.MINIMIZE:
            nonneg = bool(np.all(model.cost >= 0))
            rep.clauses["a: cost nonnegative"] = (nonneg, f"min c = {float(model.cost.min()):.6g}")
        rep.clauses["b: transition stochastic"] = _rows_stochastic(model.transition)
        rep.clauses["c: channel stochastic"] = _rows_stochastic(model.channel)
        rep.clauses["d: action set finite"] = (model.n_actions >= 1, f"{model.n_actions} actions")
        rep.clauses["e: moment growth (v = 1)"] = (True, "holds with constant 1 on a finite state space")
        if model.initial is not None:
            rep.clauses["f: initial distribution"] = _rows_stochastic(model.initial[None, :])
    elif isinstance(model, PopulationModel):
        bound = model.max_abs_cost
        rep.clauses["a: cost bounded"] = (
            math.isfinite(bound), f"max |u| over [-L, L] = {bound:.6g} (belief cost inherits the bound)")
        gv = _quad_mass(model.g_v, 0.0, model.lam)
        gx = _quad_mass(model.g_xi, 0.0, model.tau)
        rep.clauses["b: noise densities normalized"] = (
            abs(gv - 1) < 1e-10 and abs(gx - 1) < 1e-10, f"int g_v = {gv:.12f}, int g_xi = {gx:.12f}")
        lo = math.exp(-model.actions[-1])
        rep.clauses["b: state support in (0, L]"] = (
            lo > 0 and math.exp(model.lam - model.actions[0]) <= model.L * (1 + 1e-12),
            f"x in [{lo:.6g}, {math.exp(model.lam - model.actions[0]):.6g}], L = {model.L:.6g}")
        rep.clauses["d: action set finite"] = (model.n_actions >= 1, f"{model.n_actions} actions")
        rep.clauses["e: moment growth (v = 1)"] = (True, "holds with constant 1")
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return rep


def _quad_mass(fn, a, b) -> float:
    x, w = np.polynomial.legendre.leggauss(16)
    mid, half = (a + b) / 2, (b - a) / 2
    return float(np.sum(w * fn(mid + half * x)) * half)
