"""Value iteration on finite grid models and policy extension to all beliefs."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .finite_mdp import GridModel
from .models import Sense


class IterationCap(RuntimeError):
    """Value iteration hit its iteration cap before certifying convergence."""


@dataclass(frozen=True, eq=False)
class ValueFunction:
    values: np.ndarray
    residual: float = float("inf")
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class GridPolicy:
    actions: np.ndarray

    def __getitem__(self, i):
        return self.actions[i]


def _signed_cost(gm: GridModel) -> np.ndarray:
    # reward maximization runs as cost minimization on the negated table
    return gm.cost if gm.sense is Sense.MINIMIZE else -gm.cost


def q_values(gm: GridModel, V) -> np.ndarray:
    """Q(i, a) in the model's own sense."""
    V = np.asarray(getattr(V, "values", V), float)
    return gm.cost + gm.discount * gm.expected_next(V)


def bellman_backup(gm: GridModel, V) -> ValueFunction:
    """One application of the Bellman operator (min for costs, max for rewards)."""
    V = np.asarray(getattr(V, "values", V), float)
    if V.shape != (gm.n_states,):
        raise ValueError(f"value vector has shape {V.shape}, expected ({gm.n_states},)")
    Q = q_values(gm, V)
    TV = Q.min(axis=1) if gm.sense is Sense.MINIMIZE else Q.max(axis=1)
    return ValueFunction(TV, float(np.max(np.abs(TV - V), initial=0.0)))


def greedy_policy(gm: GridModel, V) -> GridPolicy:
    """Optimizing action per state; lowest action index on ties."""
    Q = q_values(gm, V)
    idx = Q.argmin(axis=1) if gm.sense is Sense.MINIMIZE else Q.argmax(axis=1)
    return GridPolicy(idx.astype(np.int64))


def value_iteration(gm: GridModel, tolerance: float = 1e-9,
                    max_iterations: int = 1_000_000) -> tuple[ValueFunction, GridPolicy]:
    """Iterate from V = 0 until beta * residual / (1 - beta) <= tolerance, which
    bounds the sup-norm distance of the returned values to the fixed point."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    beta = gm.discount
    c = _signed_cost(gm)
    V = np.zeros(gm.n_states)
    for it in range(1, max_iterations + 1):
        TV = (c + beta * gm.expected_next(V)).min(axis=1)
        residual = float(np.max(np.abs(TV - V), initial=0.0))
        V = TV
        if beta * residual / (1 - beta) <= tolerance:
            break
    else:
        raise IterationCap(f"no convergence within {max_iterations} iterations (residual {residual:.3g})")
    values = V if gm.sense is Sense.MINIMIZE else -V
    return ValueFunction(values, residual, it), greedy_policy(gm, values)


class ExtendedPolicy:
    """Grid policy extended to all beliefs, constant on each quantizer cell."""

    def __init__(self, policy: GridPolicy, grid):
        self.policy = policy
        self.grid = grid

    def __call__(self, z) -> int:
        return int(self.policy.actions[self.grid.cell_index(z)])

    def batch(self, Z) -> np.ndarray:
        return self.policy.actions[self.grid.cell_indices(Z)]


def extend_policy(policy: GridPolicy, grid) -> ExtendedPolicy:
    if policy.actions.size != grid.size:
        raise ValueError(f"policy has {policy.actions.size} entries for a grid of {grid.size}")
    return ExtendedPolicy(policy, grid)


def solution_json(vf: ValueFunction, policy: GridPolicy, config: dict | None = None, **extra) -> str:
    doc = {
        "values": [float(v) for v in vf.values],
        "policy": [int(a) for a in policy.actions],
        "residual": vf.residual,
        "iterations": vf.iterations,
        **extra,
        "config": config,
    }
    return json.dumps(doc, indent=1, sort_keys=False)


def load_solution(text: str) -> tuple[ValueFunction, GridPolicy, dict]:
    doc = json.loads(text)
    vf = ValueFunction(np.array(doc["values"], float), float(doc["residual"]), int(doc["iterations"]))
    return vf, GridPolicy(np.array(doc["policy"], dtype=np.int64)), doc
