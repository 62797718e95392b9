"""Truncated value iteration for the state-dependent optimum.

V(x, y) is the optimal expected discounted waiting cost with x customers
in Q1 and y in Q2 at the start of a period:

    V(x, y) = lam + min(gamma * E[V(Z1, Z2 + y)] + y,      # serve Q1
                        gamma * E[V(Z1 + x, Z2)] + x)      # serve Q2

The grid is 0..xmax in both coordinates; transitions past xmax are
clamped onto the boundary.  E[V(Z1, Z2 + y)] depends on y only and
E[V(Z1 + x, Z2)] on x only, so each sweep builds two 1-d arrays and the
2-d update is a broadcast minimum.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DEFAULT_TAIL_CUTOFF, ModelParams, TruncatedPmf, ValidationError, poisson_pmf

log = logging.getLogger(__name__)

TABLE_FORMAT = "batchq.value-table"
TABLE_VERSION = 1
DEFAULT_MAX_SWEEPS = 10**6
ACTION_TIE_RTOL = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, sweeps: int, last_delta: float):
        super().__init__(f"value iteration did not converge in {sweeps} sweeps (last delta {last_delta:.3e})")
        self.sweeps = sweeps
        self.last_delta = last_delta


class TruncationError(RuntimeError):
    """The grid is too small for the big-M initial state argument."""


@dataclass(frozen=True)
class SolverConfig:
    xmax: int
    epsilon: float
    tail_cutoff: float = DEFAULT_TAIL_CUTOFF
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    def __post_init__(self):
        if int(self.xmax) != self.xmax or self.xmax < 1:
            raise ValidationError("xmax", f"must be a positive integer, got {self.xmax!r}")
        if not self.epsilon > 0:
            raise ValidationError("epsilon", f"must be > 0, got {self.epsilon!r}")
        if not (0 < self.tail_cutoff < 1):
            raise ValidationError("tail_cutoff", f"must lie in (0, 1), got {self.tail_cutoff!r}")

    def check(self, params: ModelParams) -> None:
        need = 5 * max(params.lambda1, params.lambda2)
        if self.xmax < need:
            raise ValidationError("xmax", f"{self.xmax} is below 5*max(lambda1, lambda2) = {need:g}")

    def as_dict(self) -> dict:
        return {
            "xmax": self.xmax,
            "epsilon": self.epsilon,
            "tail_cutoff": self.tail_cutoff,
            "max_sweeps": self.max_sweeps,
        }


def default_config(params: ModelParams, **overrides) -> SolverConfig:
    """Grid and tolerance that reproduce the OPT column comfortably."""
    base, eps = (40, 1e-3) if params.gamma <= 0.8 else (80, 1e-2)
    top = max(params.lambda1, params.lambda2)
    xmax = max(base, math.ceil(base * top / 10), math.ceil(5 * top))
    kwargs = {"xmax": xmax, "epsilon": eps}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**kwargs)


@dataclass(eq=False)
class ValueTable:
    params: ModelParams
    config: SolverConfig
    values: np.ndarray
    actions: np.ndarray  # True where serving Q1 is optimal
    iterations: int
    sup_delta: float
    deltas: list[float] = field(default_factory=list)

    @property
    def xmax(self) -> int:
        return self.values.shape[0] - 1

    def value(self, x: int, y: int) -> float:
        return float(self.values[x, y])


@dataclass(frozen=True, eq=False)
class ActionMap:
    """Optimal action per grid state; used by the simulator."""

    serve_q1: np.ndarray

    @property
    def xmax(self) -> int:
        return self.serve_q1.shape[0] - 1

    def __str__(self):
        return f"mdp(xmax={self.xmax})"


def arrival_pmfs(params: ModelParams, tail_cutoff: float = DEFAULT_TAIL_CUTOFF) -> tuple[TruncatedPmf, TruncatedPmf]:
    return poisson_pmf(params.lambda1, tail_cutoff), poisson_pmf(params.lambda2, tail_cutoff)


def _fold(probs: np.ndarray, n: int) -> np.ndarray:
    """Distribution of min(Z, n-1) on 0..n-1."""
    out = np.zeros(n)
    head = min(len(probs), n)
    out[:head] = probs[:head]
    out[n - 1] += probs[n:].sum()
    return out


def _shifted_expectation(vec: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """out[s] = sum_z probs[z] * vec[min(s + z, xmax)], fixed summation order."""
    n = len(vec)
    out = np.zeros(n)
    for z, p in enumerate(probs):
        if z < n:
            out[: n - z] += p * vec[z:]
            if z:
                out[n - z:] += p * vec[-1]
        else:
            out += p * vec[-1]
    return out


def action_values(params: ModelParams, values: np.ndarray, pmfs) -> tuple[np.ndarray, np.ndarray]:
    """Both bracketed terms of the Bellman equation on the full grid.

    Returns (serve_q1, serve_q2) arrays of shape (n, n) excluding the
    constant arrival term.
    """
    p1, p2 = pmfs
    n = values.shape[0]
    idx = np.arange(n, dtype=float)
    q1 = _fold(p1.probs, n)
    q2 = _fold(p2.probs, n)
    # E over Z1 of V(Z1, b) for every column b, and E over Z2 of V(a, Z2) for every row a
    col = np.zeros(n)
    for a in np.flatnonzero(q1):
        col += q1[a] * values[a, :]
    row = np.zeros(n)
    for b in np.flatnonzero(q2):
        row += q2[b] * values[:, b]
    e_serve1 = _shifted_expectation(col, p2.probs)  # indexed by y
    e_serve2 = _shifted_expectation(row, p1.probs)  # indexed by x
    g = params.gamma
    serve1 = np.broadcast_to(g * e_serve1 + idx, (n, n))
    serve2 = np.broadcast_to((g * e_serve2 + idx)[:, None], (n, n))
    return serve1, serve2


def _prefer_q1(serve1, serve2) -> np.ndarray:
    # exact ties (e.g. symmetric rates at x == y) go to Q1 despite rounding
    return serve1 <= serve2 + ACTION_TIE_RTOL * np.maximum(1.0, np.abs(serve2))


def bellman_sweep(params: ModelParams, values: np.ndarray, pmfs) -> tuple[np.ndarray, np.ndarray, float]:
    """One synchronous sweep; returns (new values, serve-Q1 mask, sup-norm change)."""
    serve1, serve2 = action_values(params, values, pmfs)
    new = params.lambda_bar + np.minimum(serve1, serve2)
    delta = float(np.max(np.abs(new - values)))
    return new, _prefer_q1(serve1, serve2), delta


def solve(params: ModelParams, config: SolverConfig | None = None) -> ValueTable:
    """Value iteration from V = 0 until the values are within epsilon of the fixed point."""
    config = config or default_config(params)
    config.check(params)
    pmfs = arrival_pmfs(params, config.tail_cutoff)
    g = params.gamma
    stop = config.epsilon * (1 - g) / (2 * g)
    n = config.xmax + 1
    values = np.zeros((n, n))
    deltas = []
    for sweep in range(1, config.max_sweeps + 1):
        values, actions, delta = bellman_sweep(params, values, pmfs)
        deltas.append(delta)
        if delta <= stop:
            log.debug("value iteration converged after %d sweeps (delta %.3e)", sweep, delta)
            return ValueTable(params, config, values, actions, sweep, delta, deltas)
    raise ConvergenceError(config.max_sweeps, deltas[-1])


def initial_q2(params: ModelParams) -> int:
    y0 = round(params.lambda2)
    if y0 != params.lambda2:
        log.info("lambda2=%g is not an integer; initial Q2 length rounded to %d", params.lambda2, y0)
    return y0


def opt_cost(params: ModelParams, table: ValueTable) -> float:
    """V(M, lambda2) with M = xmax.

    While serving Q1 is optimal at (M, y) the value does not depend on M,
    so evaluating at the grid edge is exact.
    """
    y0 = initial_q2(params)
    if y0 > table.xmax:
        raise TruncationError(f"initial Q2 length {y0} exceeds xmax={table.xmax}")
    if not table.actions[table.xmax, y0]:
        raise TruncationError(
            f"serving Q2 is optimal at (xmax={table.xmax}, {y0}); enlarge xmax for the big-M state"
        )
    return table.value(table.xmax, y0)


def extract_policy(table: ValueTable) -> ActionMap:
    """Serve Q1 iff its action value is <= that of serving Q2."""
    pmfs = arrival_pmfs(table.params, table.config.tail_cutoff)
    serve1, serve2 = action_values(table.params, table.values, pmfs)
    mask = np.array(_prefer_q1(serve1, serve2))
    mask.flags.writeable = False
    return ActionMap(mask)


# -- persistence -------------------------------------------------------------

def cache_key(params: ModelParams, config: SolverConfig) -> str:
    raw = json.dumps(
        [params.lambda1, params.lambda2, params.gamma, config.xmax, config.epsilon, config.tail_cutoff]
    )
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def cache_path(cache_dir: str | Path, params: ModelParams, config: SolverConfig) -> Path:
    return Path(cache_dir) / f"vt-{cache_key(params, config)}.json"


def save_table(table: ValueTable, path: str | Path) -> None:
    n = table.xmax + 1
    doc = {
        "format": TABLE_FORMAT,
        "version": TABLE_VERSION,
        "params": {
            "lambda1": table.params.lambda1,
            "lambda2": table.params.lambda2,
            "gamma": table.params.gamma,
        },
        "config": table.config.as_dict(),
        "iterations": table.iterations,
        "sup_delta": table.sup_delta,
        "shape": [n, n],
        "values": table.values.ravel().tolist(),
        "actions": table.actions.astype(int).ravel().tolist(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc))
    tmp.replace(path)


def load_table(path: str | Path) -> ValueTable:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != TABLE_FORMAT or doc.get("version") != TABLE_VERSION:
        raise ValueError(f"{path}: not a version-{TABLE_VERSION} value table")
    p = doc["params"]
    params = ModelParams(p["lambda1"], p["lambda2"], p["gamma"])
    shape = tuple(doc["shape"])
    values = np.asarray(doc["values"], dtype=float).reshape(shape)
    actions = np.asarray(doc["actions"], dtype=bool).reshape(shape)
    return ValueTable(
        params, SolverConfig(**doc["config"]), values, actions, doc["iterations"], doc["sup_delta"]
    )


def solve_cached(params: ModelParams, config: SolverConfig | None = None, cache_dir=None) -> ValueTable:
    config = config or default_config(params)
    if cache_dir is None:
        return solve(params, config)
    path = cache_path(cache_dir, params, config)
    if path.exists():
        log.debug("loading value table from %s", path)
        return load_table(path)
    table = solve(params, config)
    save_table(table, path)
    return table
