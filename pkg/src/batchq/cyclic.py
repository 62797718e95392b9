"""Closed-form analysis of cyclic state-independent policies.

A cyclic policy with parameter k serves Q1 once and then Q2 k times,
forever.  Sums are accumulated term by term rather than through the
geometric closed forms, which lose precision as gamma approaches 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import DomainError, ModelParams

# relative slack used when comparing r against the thresholds
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class CyclicPolicy:
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"cyclic policy needs an integer k >= 1, got {self.k!r}")

    @property
    def length(self) -> int:
        return self.k + 1

    def serves_q1(self, t: int) -> bool:
        return t % (self.k + 1) == 0

    def __str__(self):
        return f"cyclic:{self.k}"


@dataclass(frozen=True)
class KStarResult:
    k_star: int
    threshold_low: float
    threshold_high: float
    tie: bool

    def as_dict(self) -> dict:
        return {
            "k_star": self.k_star,
            "threshold_low": self.threshold_low,
            "threshold_high": self.threshold_high,
            "tie": self.tie,
        }


class Limit(enum.Enum):
    GAMMA_TO_ONE = "gamma_to_one"
    GAMMA_TO_ZERO = "gamma_to_zero"


def _check_k(k: int) -> None:
    if int(k) != k or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k!r}")


def cycle_cost(params: ModelParams, k: int) -> float:
    """Expected discounted cost of one cycle (Q1, Q2 x k), seen from its start.

    The first period charges the one period of Q2 arrivals waiting while
    Q1 is served; period i of the Q2 block charges the i periods of Q1
    arrivals accumulated since Q1 was served.
    """
    _check_k(k)
    g = params.gamma
    arrivals = 0.0
    held_q1 = 0.0
    gi = 1.0
    for i in range(k + 1):
        arrivals += gi
        held_q1 += i * gi
        gi *= g
    return params.lambda_bar * arrivals + params.lambda2 + params.lambda1 * held_q1


def total_cost(params: ModelParams, k: int) -> float:
    """C(k): total discounted cost from the (M, lambda2) initial state."""
    _check_k(k)
    return cycle_cost(params, k) / (1.0 - params.gamma ** (k + 1))


def threshold_g(gamma: float, k: int) -> float:
    """sum_{i=0}^{k} (k+1-i) gamma^i.

    C(k+1) >= C(k) holds exactly when r <= threshold_g(gamma, k).
    """
    if int(k) != k or k < 0:
        raise DomainError(f"k must be an integer >= 0, got {k!r}")
    total = 0.0
    gi = 1.0
    for i in range(k + 1):
        total += (k + 1 - i) * gi
        gi *= gamma
    return total


def optimal_k(params: ModelParams) -> KStarResult:
    return optimal_k_for(params.gamma, params.r)


def optimal_k_for(gamma: float, r: float) -> KStarResult:
    """Smallest k >= 1 with r <= threshold_g(gamma, k).

    The threshold grows at least linearly in k, so the scan terminates.
    At an exact tie the two neighbouring cycles cost the same and the
    shorter one is returned.
    """
    if not (0 < gamma < 1):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    if not r >= 1:
        raise DomainError(f"r must be >= 1, got {r!r}")
    k = 1
    low = threshold_g(gamma, 0)
    high = threshold_g(gamma, 1)
    while r > high * (1 + TIE_RTOL):
        k += 1
        low, high = high, threshold_g(gamma, k)
    tie = math.isclose(r, high, rel_tol=TIE_RTOL)
    return KStarResult(k, low, high, tie)


def asymptotic_k(params: ModelParams, limit: Limit | str) -> float:
    limit = Limit(limit)
    if limit is Limit.GAMMA_TO_ONE:
        return math.sqrt(2 * params.r) - 1
    return params.r


def cost_curve(params: ModelParams, k_max: int) -> list[tuple[int, float]]:
    _check_k(k_max)
    return [(k, total_cost(params, k)) for k in range(1, k_max + 1)]
