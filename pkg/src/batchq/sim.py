"""Monte Carlo estimate of the discounted waiting cost of a policy.

Accounting follows the Bellman equation period by period: the served
queue's customers leave without further cost, the other queue's
customers each wait the full period, and customers arriving during the
period wait until its end and join their queue afterwards.

Episodes are simulated in fixed-size blocks.  Block b draws from its own
substream seeded by (seed, b) and always draws a full block, so an
episode's sample path depends only on (seed, episode index); growing the
episode count or changing the worker count never changes earlier
episodes.  All policies compared in one call see the same arrivals.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .cyclic import CyclicPolicy
from .mdp import ActionMap
from .model import ModelParams, QueueState, ValidationError

log = logging.getLogger(__name__)

BLOCK = 1024
DEFAULT_REL_TAIL = 1e-3

Policy = Union[CyclicPolicy, ActionMap]


class CostMode(str, enum.Enum):
    EXPECTED = "expected"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class SimConfig:
    episodes: int = 100_000
    horizon: int | None = None  # None: default_horizon(params)
    seed: int = 0
    cost_mode: CostMode = CostMode.EXPECTED
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "cost_mode", CostMode(self.cost_mode))
        if self.episodes < 1:
            raise ValidationError("episodes", f"must be >= 1, got {self.episodes!r}")
        if self.horizon is not None and self.horizon < 0:
            raise ValidationError("horizon", f"must be >= 0, got {self.horizon!r}")
        if self.threads < 1:
            raise ValidationError("threads", f"must be >= 1, got {self.threads!r}")


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    stderr: float
    episodes: int
    seed: int
    horizon: int = 0
    clamp_warnings: int = 0

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "episodes": self.episodes,
            "seed": self.seed,
            "horizon": self.horizon,
            "clamp_warnings": self.clamp_warnings,
        }


def tail_bound(params: ModelParams, horizon: int) -> float:
    """Allowance for the cost beyond the simulated horizon."""
    g = params.gamma
    return g**horizon * (params.lambda2 * horizon + params.lambda_bar / (1 - g))


def default_horizon(params: ModelParams, rel_tol: float = DEFAULT_REL_TAIL) -> int:
    """Smallest T whose tail allowance is below rel_tol of lam/(1-gamma).

    lam/(1-gamma) is the arrival-wait cost every policy pays, so it is a
    floor on the expected cost being estimated.
    """
    floor = params.lambda_bar / (1 - params.gamma)
    t = 0
    while tail_bound(params, t) >= rel_tol * floor:
        t += 1
    return t


def _draw_block(params, rng, horizon, cost_mode):
    z1 = rng.poisson(params.lambda1, size=(horizon, BLOCK))
    z2 = rng.poisson(params.lambda2, size=(horizon, BLOCK))
    if cost_mode is CostMode.EXPECTED:
        wait = np.full((horizon, BLOCK), params.lambda_bar)
    else:
        counts = (z1 + z2).ravel()
        u = rng.random(int(counts.sum()))
        csum = np.concatenate(([0.0], np.cumsum(1.0 - u)))
        ends = np.cumsum(counts)
        wait = (csum[ends] - csum[ends - counts]).reshape(horizon, BLOCK)
    return z1, z2, wait


def _run_policy(policy, init, z1, z2, wait, disc, active):
    horizon = len(disc)
    x = np.full(BLOCK, init.x, dtype=np.int64)
    y = np.full(BLOCK, init.y, dtype=np.int64)
    cost = np.zeros(BLOCK)
    clamps = 0
    table = policy.serve_q1 if isinstance(policy, ActionMap) else None
    for t in range(horizon):
        if table is None:
            q1 = np.full(BLOCK, policy.serves_q1(t))
        else:
            top = table.shape[0] - 1
            over = (x > top) | (y > top)
            clamps += int(over[:active].sum())
            q1 = table[np.minimum(x, top), np.minimum(y, top)]
        carried = np.where(q1, y, x)
        cost += disc[t] * (wait[t] + carried)
        x, y = np.where(q1, z1[t], x + z1[t]), np.where(q1, y + z2[t], z2[t])
    return cost, clamps


def _simulate_block(params, policies, init, config, horizon, block):
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(block,)))
    disc = params.gamma ** np.arange(horizon)
    z1, z2, wait = _draw_block(params, rng, horizon, config.cost_mode)
    active = min(BLOCK, config.episodes - block * BLOCK)
    return [_run_policy(p, init, z1, z2, wait, disc, active) for p in policies]


def episode_costs(
    params: ModelParams,
    policies: Sequence[Policy],
    init: QueueState,
    config: SimConfig,
) -> tuple[int, list[np.ndarray], list[int]]:
    """Per-episode discounted costs for each policy under common arrivals.

    Returns (horizon, costs per policy, clamped state visits per policy).
    """
    horizon = default_horizon(params) if config.horizon is None else config.horizon
    for p in policies:
        if isinstance(p, ActionMap) and (init.x > p.xmax or init.y > p.xmax):
            raise ValidationError("init", f"{init} lies outside the policy grid (xmax={p.xmax})")
    nblocks = math.ceil(config.episodes / BLOCK)

    def work(b):
        return _simulate_block(params, policies, init, config, horizon, b)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            blocks = list(pool.map(work, range(nblocks)))
    else:
        blocks = [work(b) for b in range(nblocks)]

    costs = [np.concatenate([blk[i][0] for blk in blocks])[: config.episodes] for i in range(len(policies))]
    clamps = [sum(blk[i][1] for blk in blocks) for i in range(len(policies))]
    return horizon, costs, clamps


def compare_policies(
    params: ModelParams,
    policies: Sequence[Policy],
    init: QueueState,
    config: SimConfig,
) -> list[SimEstimate]:
    horizon, costs, clamps = episode_costs(params, policies, init, config)
    n = config.episodes
    out = []
    for policy, c, clamped in zip(policies, costs, clamps):
        if clamped:
            log.warning("policy %s: %d state visits clamped onto the table grid", policy, clamped)
        # a single episode carries no spread information
        stderr = float(c.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(SimEstimate(float(c.mean()), stderr, n, config.seed, horizon, clamped))
    return out


def simulate(params: ModelParams, policy: Policy, init: QueueState, config: SimConfig) -> SimEstimate:
    return compare_policies(params, [policy], init, config)[0]
