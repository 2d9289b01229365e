"""Monte Carlo evaluation of extended policies on the original POMDP and
resolution sweeps over the finite models."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .beliefs import ZERO_LIKELIHOOD, ZeroLikelihood
from .finite_mdp import GridModel, WeightingMeasure, build_finite_mdp, build_grid
from .models import FinitePomdp, PopulationModel, Sense
from .solver import ExtendedPolicy, ValueFunction, value_iteration

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "grid_size", "value_at_init", "vi_iterations", "residual", "wall_ms")


def truncation_horizon(discount: float, max_cost: float, tol: float = 1e-9) -> int:
    """Smallest T with discount^T * max_cost / (1 - discount) <= tol."""
    if max_cost <= 0:
        return 1
    return max(1, math.ceil(math.log(tol * (1 - discount) / max_cost) / math.log(discount)))


def initial_belief(model: FinitePomdp, initial_state: int | None = None) -> np.ndarray:
    if initial_state is not None:
        z = np.zeros(model.n_states)
        z[initial_state] = 1.0
        return z
    if model.initial is not None:
        return np.array(model.initial)
    raise ValueError("no initial state or distribution given")


@dataclass(frozen=True)
class RolloutConfig:
    replications: int = 10_000
    seed: int = 42
    horizon: int | None = None
    initial_state: float | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass(frozen=True)
class RolloutResult:
    mean: float
    stderr: float
    truncation_bound: float
    reps: int
    seed: int
    horizon: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)


def _uniform_streams(seed: int, reps: int, steps: int) -> np.ndarray:
    """(reps, steps, 2) uniforms; replication r always reads its own substream."""
    children = np.random.SeedSequence(seed).spawn(reps)
    return np.stack([np.random.Generator(np.random.PCG64(c)).random((steps, 2)) for c in children])


def _sample_rows(P: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw from each row of P."""
    cdf = np.cumsum(P, axis=1)
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, P.shape[1] - 1)


def _summarize(totals: np.ndarray, cfg: RolloutConfig, T: int, bound: float) -> RolloutResult:
    reps = totals.size
    mean = float(np.sum(totals) / reps)
    spread = reps > 1 and np.ptp(totals) > 0
    stderr = float(np.std(totals, ddof=1) / math.sqrt(reps)) if spread else 0.0
    return RolloutResult(mean, stderr, bound, reps, cfg.seed, T)


def _rollout_finite(model: FinitePomdp, policy: ExtendedPolicy, cfg: RolloutConfig) -> RolloutResult:
    beta = model.discount
    T = cfg.horizon or truncation_horizon(beta, model.max_abs_cost)
    R = cfg.replications
    mu = initial_belief(model, None if cfg.initial_state is None else int(cfg.initial_state))
    U = _uniform_streams(cfg.seed, R, T + 1)
    x = _sample_rows(np.broadcast_to(mu, (R, mu.size)), U[:, 0, 0])
    y = _sample_rows(model.channel[x], U[:, 0, 1])
    w = mu[None, :] * model.channel[:, y].T
    Z = w / w.sum(axis=1, keepdims=True)
    totals = np.zeros(R)
    for t in range(T):
        a = policy.batch(Z)
        totals += beta ** t * model.cost[x, a]
        x = _sample_rows(model.transition[x, a], U[:, t + 1, 0])
        y = _sample_rows(model.channel[x], U[:, t + 1, 1])
        prior = np.einsum("ri,rij->rj", Z, model.transition[:, a, :].transpose(1, 0, 2))
        w = prior * model.channel[:, y].T
        norm = w.sum(axis=1)
        if np.any(norm < ZERO_LIKELIHOOD):
            r = int(np.flatnonzero(norm < ZERO_LIKELIHOOD)[0])
            raise ZeroLikelihood(f"replication {r}, step {t + 1}: observation {int(y[r])} impossible")
        Z = w / norm[:, None]
    bound = beta ** T * model.max_abs_cost / (1 - beta)
    return _summarize(totals, cfg, T, bound)


def population_initial_q(model: PopulationModel, gm: GridModel, values) -> np.ndarray:
    """Q-values at the Dirac belief on the initial state: the first step is
    taken from the known state, after which beliefs are on the grid."""
    x0 = model.initial_state
    V = np.asarray(getattr(values, "values", values), float)
    return model.u(x0 - model.actions) + model.discount * (gm.kernel @ V)


def population_initial_action(model: PopulationModel, gm: GridModel, values) -> int:
    q = population_initial_q(model, gm, values)
    return int(np.argmax(q) if model.sense is Sense.MAXIMIZE else np.argmin(q))


def _rollout_population(model: PopulationModel, policy: ExtendedPolicy, cfg: RolloutConfig,
                        first_action: int) -> RolloutResult:
    beta = model.discount
    T = cfg.horizon or truncation_horizon(beta, model.max_abs_cost)
    R = cfg.replications
    grid = policy.grid
    U = _uniform_streams(cfg.seed, R, T)
    x = np.full(R, model.initial_state if cfg.initial_state is None else float(cfg.initial_state))
    k = np.full(R, first_action, dtype=np.int64)
    totals = np.zeros(R)
    for t in range(T):
        a = model.actions[k]
        totals += beta ** t * model.u(x - a)
        x = np.exp(-a + model.lam * U[:, t, 0])
        y = x + model.tau * U[:, t, 1]
        cell = grid.index_for(k, y)
        if np.any(cell < 0):
            raise ZeroLikelihood(f"step {t + 1}: observation outside every posterior support")
        k = policy.policy.actions[cell]
    bound = beta ** T * model.max_abs_cost / (1 - beta)
    return _summarize(totals, cfg, T, bound)


def rollout(model, policy: ExtendedPolicy, cfg: RolloutConfig, first_action: int | None = None) -> RolloutResult:
    """Simulate the POMDP under the extended grid policy, tracking beliefs with
    the exact filter; mean discounted cost (or reward) over replications."""
    if isinstance(model, FinitePomdp):
        return _rollout_finite(model, policy, cfg)
    if first_action is None:
        raise ValueError("the population rollout needs the action taken at the initial state")
    return _rollout_population(model, policy, cfg, first_action)


@dataclass
class SolvedModel:
    grid: object
    gm: GridModel
    values: ValueFunction
    policy: object
    value_at_init: float
    first_action: int | None = None


def solve(model, n: int, tolerance: float = 1e-9, max_iterations: int = 1_000_000,
          nu: WeightingMeasure | None = None, metric: str = "l2", moment=None,
          initial_state=None) -> SolvedModel:
    """Grid, finite model and value iteration at resolution n, plus the value
    read out at the initial belief."""
    grid = build_grid(model, n, metric, moment)
    gm = build_finite_mdp(model, grid, nu)
    vf, pol = value_iteration(gm, tolerance, max_iterations)
    if isinstance(model, FinitePomdp):
        z0 = initial_belief(model, initial_state)
        return SolvedModel(grid, gm, vf, pol, float(vf.values[grid.cell_index(z0)]))
    q = population_initial_q(model, gm, vf)
    first = population_initial_action(model, gm, vf)
    return SolvedModel(grid, gm, vf, pol, float(q[first]), first)


@dataclass
class SweepResult:
    rows: list[dict] = field(default_factory=list)
    errors: dict[int, str] = field(default_factory=dict)

    def values(self) -> dict[int, float]:
        return {r["n"]: r["value_at_init"] for r in self.rows}

    def to_csv(self, timing: bool = True) -> str:
        """CSV rows ordered by n. With ``timing=False`` the wall_ms column is
        left empty so reruns are byte-identical."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r["n"], r["grid_size"], repr(r["value_at_init"]), r["vi_iterations"],
                        repr(r["residual"]), r["wall_ms"] if timing else ""])
        return buf.getvalue()

    def to_gnuplot(self) -> str:
        return "".join(f"{r['n']} {r['value_at_init']!r}\n" for r in self.rows)

    def gaps(self) -> dict[int, float]:
        """|J_n - J_{n_max}| per n."""
        vals = self.values()
        ref = vals[max(vals)]
        return {n: abs(v - ref) for n, v in vals.items()}

    def doubling_pairs(self) -> list[tuple[int, int, float, float]]:
        """(n, 2n, d_n, d_2n) for each doubling pair present."""
        d = self.gaps()
        return [(n, 2 * n, d[n], d[2 * n]) for n in sorted(d) if 2 * n in d]


def _sweep_point(args):
    model, n, tolerance, max_iterations, nu, initial_state = args
    t0 = time.perf_counter()
    try:
        s = solve(model, n, tolerance, max_iterations, nu, initial_state=initial_state)
    except Exception as exc:  # recorded per n; the sweep continues
        return n, None, f"{type(exc).__name__}: {exc}"
    wall = round((time.perf_counter() - t0) * 1000, 3)
    return n, {"n": n, "grid_size": s.grid.size, "value_at_init": s.value_at_init,
               "vi_iterations": s.values.iterations, "residual": s.values.residual,
               "wall_ms": wall}, None


def sweep(model, n_list, tolerance: float = 1e-9, max_iterations: int = 1_000_000,
          nu: WeightingMeasure | None = None, initial_state=None, jobs: int = 1) -> SweepResult:
    n_list = sorted(int(n) for n in n_list)
    if not n_list:
        raise ValueError("empty n list")
    tasks = [(model, n, tolerance, max_iterations, nu, initial_state) for n in n_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    out = SweepResult()
    for n, row, err in results:
        if err is not None:
            log.warning("sweep point n=%d failed: %s", n, err)
            out.errors[n] = err
        else:
            out.rows.append(row)
    return out
