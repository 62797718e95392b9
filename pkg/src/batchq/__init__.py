"""Service policies for a two-queue, single-server batch-service system."""

from .cyclic import CyclicPolicy, KStarResult, cost_curve, cycle_cost, optimal_k, threshold_g, total_cost
from .mdp import SolverConfig, ValueTable, extract_policy, opt_cost, solve
from .model import ModelParams, QueueState, make_params, poisson_pmf, sample_poisson
from .schedule import Queue, Schedule, enumerate_best_cycle, schedule_cycle_cost, schedule_total_cost
from .sim import SimConfig, SimEstimate, compare_policies, simulate

__version__ = "0.1.0"
