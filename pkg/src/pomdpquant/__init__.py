"""Finite-grid approximation of discounted POMDPs through quantized belief-MDPs."""

from .beliefs import (EmptySupport, IntervalReciprocalBelief, ObsCells, ZeroLikelihood, belief_cost,
                      belief_successors, correct, f_posterior, filter_update, h_density, obs_predictive,
                      predict)
from .config import ConfigError, RunConfig, example_config
from .evaluation import RolloutConfig, RolloutResult, SweepResult, rollout, solve, sweep
from .finite_mdp import GridModel, NonStochasticRow, WeightingMeasure, build_finite_mdp, build_grid
from .metrics import (ContinuousMeasure1D, DiscreteMeasure1D, bounded_lipschitz, lp_distance,
                      total_variation, wasserstein1_1d)
from .models import (FinitePomdp, MachineRepairParams, ModelError, PopulationModel, Sense, machine_repair,
                     population_growth, validate_assumptions)
from .quantizers import (MeasurementQuantizer, MomentStructure, SimplexGrid, compact_support_quantize,
                         covering_radius, enumerate_type_lattice, truncated_lattice_quantize,
                         type_lattice_nearest, uniform_action_net)
from .solver import (GridPolicy, IterationCap, ValueFunction, bellman_backup, extend_policy,
                     value_iteration)

__version__ = "0.1.0"
