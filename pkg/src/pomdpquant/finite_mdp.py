"""Construction of the finite belief-MDP on a quantized belief grid."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .beliefs import (ZERO_LIKELIHOOD, IntervalReciprocalBelief, belief_cost, belief_successors,
                      has_support, interval_square_costs)
from .models import FinitePomdp, PopulationModel, Sense
from .quantizers import MeasurementQuantizer, MomentStructure, SimplexGrid

ROW_TOL = 1e-8


class NonStochasticRow(ArithmeticError):
    """A transition row of the finite model does not sum to one."""


@dataclass(frozen=True, eq=False)
class GridModel:
    """Finite MDP over grid states.

    Transition rows are stored once per distinct row: the distribution of the
    next grid state from (i, a) is ``kernel[row_map[i, a]]``. This keeps
    models whose kernel does not depend on the current belief small.
    """

    kernel: sparse.csr_matrix
    row_map: np.ndarray
    cost: np.ndarray
    discount: float
    sense: Sense = Sense.MINIMIZE
    actions: np.ndarray | None = None
    pseudo_state: int | None = None

    def __post_init__(self):
        S, A = self.cost.shape
        if self.row_map.shape != (S, A):
            raise ValueError("row_map must have the shape of the cost table")
        if self.kernel.shape[1] != S:
            raise ValueError("kernel columns must index grid states")
        if not np.all(np.isfinite(self.cost)):
            raise ValueError("costs must be finite")

    @property
    def n_states(self) -> int:
        return self.cost.shape[0]

    @property
    def n_actions(self) -> int:
        return self.cost.shape[1]

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.kernel.sum(axis=1)).ravel()

    def check_rows(self, tol: float = ROW_TOL) -> None:
        dev = np.abs(self.row_sums() - 1.0)
        if dev.size and dev.max() > tol:
            r = int(dev.argmax())
            raise NonStochasticRow(f"kernel row {r} sums to {1 - dev[r]:.12g} (tolerance {tol})")
        if self.kernel.nnz and self.kernel.data.min() < 0:
            raise NonStochasticRow("negative transition probability")

    def transition_row(self, i: int, a: int) -> np.ndarray:
        return self.kernel[self.row_map[i, a]].toarray().ravel()

    def expected_next(self, V: np.ndarray) -> np.ndarray:
        """E[V(next) | i, a] as an (n_states, n_actions) table."""
        return (self.kernel @ V)[self.row_map]

    @classmethod
    def dense(cls, P, cost, discount, sense=Sense.MINIMIZE) -> "GridModel":
        """From a dense transition array P[i, a, j]."""
        P = np.asarray(P, float)
        S, A, _ = P.shape
        return cls(sparse.csr_matrix(P.reshape(S * A, S)), np.arange(S * A).reshape(S, A),
                   np.asarray(cost, float), discount, Sense(sense))

    def to_dense(self) -> np.ndarray:
        K = self.kernel.toarray()
        return K[self.row_map]

    def to_json(self, states: list[str] | None = None) -> dict:
        coo = self.kernel.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return {
            "format": "pomdpquant-grid-model/1",
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "discount": self.discount,
            "sense": self.sense.value,
            "actions": None if self.actions is None else [float(a) for a in self.actions],
            "pseudo_state": self.pseudo_state,
            "states": states,
            "cost": self.cost.tolist(),
            "row_map": self.row_map.tolist(),
            "kernel_rows": int(self.kernel.shape[0]),
            "kernel": [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k])] for k in order],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GridModel":
        trip = np.array(doc["kernel"], dtype=float).reshape(-1, 3)
        kernel = sparse.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))),
                                   shape=(doc["kernel_rows"], doc["n_states"]))
        acts = doc.get("actions")
        return cls(kernel, np.array(doc["row_map"], dtype=np.int64), np.array(doc["cost"], float),
                   float(doc["discount"]), Sense(doc["sense"]),
                   None if acts is None else np.array(acts, float), doc.get("pseudo_state"))

    def dumps(self, states=None) -> str:
        return json.dumps(self.to_json(states), separators=(",", ":"))


@dataclass(frozen=True)
class WeightingMeasure:
    """Per-cell weighting of beliefs used to average costs and transitions.

    ``dirac`` puts unit mass on each grid point; ``uniform`` draws ``samples``
    beliefs uniformly from each cell (seeded).
    """

    kind: str = "dirac"
    samples: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("dirac", "uniform"):
            raise ValueError(f"unknown weighting measure {self.kind!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


def build_grid(model, n: int, metric: str = "l2", moment: MomentStructure | None = None):
    """Belief grid: the type lattice for finite models, the measurement
    quantizer codebook for the population model."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(model, FinitePomdp):
        return SimplexGrid(model.n_states, n, metric, moment)
    if isinstance(model, PopulationModel):
        return MeasurementQuantizer(model, n)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def pushforward(successors, grid) -> np.ndarray:
    """Accumulate successor masses at their grid cells."""
    out = np.zeros(grid.size)
    if not successors:
        return out
    beliefs = [b for b, _ in successors]
    probs = np.array([p for _, p in successors], float)
    if isinstance(beliefs[0], IntervalReciprocalBelief):
        idx = np.array([grid.cell_index(b) for b in beliefs], dtype=np.int64)
    else:
        idx = grid.cell_indices(np.vstack(beliefs))
    np.add.at(out, idx, probs)
    return out


def _simplex_cell_samples(grid: SimplexGrid, nu: WeightingMeasure):
    """Sample beliefs and weights per grid state: list of (Z_i, w_i)."""
    if nu.kind == "dirac":
        return [(grid.points[i][None, :], np.ones(1)) for i in range(grid.size)]
    rng = np.random.default_rng(nu.seed)
    b = 1.0 - 1.0 / grid.m  # L_inf covering radius times n
    out = []
    for i in range(grid.size):
        if i == grid.pseudo_state:
            out.append((grid.points[i][None, :], np.ones(1)))
            continue
        got: list[np.ndarray] = []
        for _ in range(10_000):
            d = rng.uniform(-b, b, size=(4 * nu.samples, grid.m - 1)) / grid.n
            cand = grid.points[i] + np.hstack([d, -d.sum(axis=1, keepdims=True)])
            cand = cand[np.all(cand >= 0, axis=1)]
            if cand.size:
                cand = cand[grid.cell_indices(cand) == i]
            got.extend(cand)
            if len(got) >= nu.samples:
                break
        if len(got) < nu.samples:
            raise RuntimeError(f"could not sample cell {i}")
        Z = np.vstack(got[:nu.samples])
        out.append((Z, np.full(nu.samples, 1.0 / nu.samples)))
    return out


def _build_finite(model: FinitePomdp, grid: SimplexGrid, nu: WeightingMeasure) -> GridModel:
    S, A = grid.size, model.n_actions
    samples = _simplex_cell_samples(grid, nu)
    owner = np.concatenate([np.full(len(w), i) for i, (_, w) in enumerate(samples)])
    Z = np.vstack([z for z, _ in samples])
    W = np.concatenate([w for _, w in samples])
    cost = np.zeros((S, A))
    np.add.at(cost, owner, W[:, None] * (Z @ model.cost))
    rows, cols, vals = [], [], []
    for a in range(A):
        prior = Z @ model.transition[:, a, :]
        joint = prior[:, :, None] * model.channel[None, :, :]
        probs = joint.sum(axis=1)
        for y in range(model.n_obs):
            live = probs[:, y] >= ZERO_LIKELIHOOD
            if not live.any():
                continue
            post = joint[live, :, y] / probs[live, y][:, None]
            rows.append(owner[live] * A + a)
            cols.append(grid.cell_indices(post))
            vals.append(W[live] * probs[live, y])
    kernel = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(S * A, S))
    kernel.sum_duplicates()
    return GridModel(kernel, np.arange(S * A).reshape(S, A), cost, model.discount, model.sense,
                     np.arange(A, dtype=float), grid.pseudo_state)


def _population_cost_samples(model: PopulationModel, grid: MeasurementQuantizer, nu: WeightingMeasure):
    lower, upper = grid.supports
    if nu.kind == "dirac":
        return lower[:, None], upper[:, None]
    rng = np.random.default_rng(nu.seed)
    lo = np.empty((grid.size, nu.samples))
    hi = np.empty((grid.size, nu.samples))
    half = grid.delta / 2
    for s, (k, j) in enumerate(grid.pairs):
        a = model.actions[k]
        y0 = grid.cells.levels[j]
        ys: list[float] = []
        while len(ys) < nu.samples:
            cand = rng.uniform(y0 - half, y0 + half, size=4 * nu.samples)
            ys.extend(cand[has_support(model, a, cand)].tolist())
        ys_arr = np.array(ys[:nu.samples])
        lo[s] = np.maximum(ys_arr - model.tau, np.exp(-a))
        hi[s] = np.minimum(ys_arr, np.exp(model.lam - a))
    return lo, hi


def _build_population(model: PopulationModel, grid: MeasurementQuantizer, nu: WeightingMeasure) -> GridModel:
    S, A = grid.size, model.n_actions
    lo, hi = _population_cost_samples(model, grid, nu)
    if model.utility == "square":
        cost = np.mean([interval_square_costs(lo[:, s], hi[:, s], model.actions)
                        for s in range(lo.shape[1])], axis=0)
    else:
        cost = np.zeros((S, A))
        for i in range(S):
            for s in range(lo.shape[1]):
                z = IntervalReciprocalBelief(lo[i, s], hi[i, s], 0.0, 0.0)
                cost[i] += [belief_cost(model, z, a) for a in model.actions]
        cost /= lo.shape[1]
    # the kernel does not depend on the current belief: one row per action
    kernel = np.zeros((A, S))
    for k, a in enumerate(model.actions):
        kernel[k] = pushforward(belief_successors(model, None, a, grid.cells), grid)
    row_map = np.tile(np.arange(A), (S, 1))
    return GridModel(sparse.csr_matrix(kernel), row_map, cost, model.discount, model.sense,
                     np.array(model.actions, float))


def build_finite_mdp(model, grid, nu: WeightingMeasure | None = None) -> GridModel:
    """Finite belief-MDP: costs and quantized transitions averaged over each
    cell's weighting measure."""
    nu = nu or WeightingMeasure()
    if isinstance(model, FinitePomdp):
        gm = _build_finite(model, grid, nu)
    elif isinstance(model, PopulationModel):
        gm = _build_population(model, grid, nu)
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    gm.check_rows()
    return gm
