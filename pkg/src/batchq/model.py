"""Parameter and state types for the two-queue batch-service system.

Also holds the small Poisson toolkit (truncated pmfs for the Bellman
expectations, seeded sampling for the simulator) shared by the other
modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

DEFAULT_TAIL_CUTOFF = 1e-12


class ValidationError(ValueError):
    """Invalid model input. ``field`` names the offending argument."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DomainError(ValueError):
    """Argument outside the domain an operation is defined on."""


@dataclass(frozen=True)
class ModelParams:
    """Arrival rates and discount factor, normalized so lambda1 <= lambda2.

    ``swapped`` records that the caller passed the queues the other way
    round; Q1 is always the slow queue afterwards.
    """

    lambda1: float
    lambda2: float
    gamma: float
    swapped: bool = False

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(name, f"arrival rate must be > 0, got {value!r}")
        if not (0 < self.gamma < 1):
            raise ValidationError("gamma", f"discount factor must lie in (0, 1), got {self.gamma!r}")
        if self.lambda1 > self.lambda2:
            raise ValidationError("lambda1", "expected lambda1 <= lambda2; use make_params to normalize")

    @property
    def lambda_bar(self) -> float:
        """Mean of the two rates; the expected in-period wait of new arrivals."""
        return (self.lambda1 + self.lambda2) / 2

    @property
    def r(self) -> float:
        return self.lambda2 / self.lambda1

    def rate(self, queue: int) -> float:
        return self.lambda1 if queue == 1 else self.lambda2

    def scaled(self, c: float) -> ModelParams:
        return ModelParams(c * self.lambda1, c * self.lambda2, self.gamma, self.swapped)

    def as_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "gamma": self.gamma,
            "swapped": self.swapped,
        }


def make_params(lambda1: float, lambda2: float, gamma: float) -> ModelParams:
    lambda1, lambda2, gamma = float(lambda1), float(lambda2), float(gamma)
    # validate each field under its caller-facing name before any swap
    for name, value in (("lambda1", lambda1), ("lambda2", lambda2)):
        if not (math.isfinite(value) and value > 0):
            raise ValidationError(name, f"arrival rate must be > 0, got {value!r}")
    if lambda1 > lambda2:
        return ModelParams(lambda2, lambda1, gamma, swapped=True)
    return ModelParams(lambda1, lambda2, gamma)


@dataclass(frozen=True)
class QueueState:
    x: int
    y: int

    def __post_init__(self):
        for name in ("x", "y"):
            value = getattr(self, name)
            if int(value) != value or value < 0:
                raise ValidationError(name, f"queue length must be a nonnegative integer, got {value!r}")


@dataclass(frozen=True, eq=False)
class TruncatedPmf:
    """Poisson pmf on 0..zmax; ``tail_mass`` is the probability beyond zmax."""

    rate: float
    probs: np.ndarray
    tail_mass: float

    @property
    def zmax(self) -> int:
        return len(self.probs) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.probs)), self.probs))


def poisson_pmf(rate: float, tail_cutoff: float = DEFAULT_TAIL_CUTOFF) -> TruncatedPmf:
    """Truncate Poisson(rate) at the smallest zmax with CDF(zmax) >= 1 - tail_cutoff."""
    if not rate >= 0:
        raise ValidationError("rate", f"Poisson rate must be >= 0, got {rate!r}")
    if not (0 < tail_cutoff < 1):
        raise ValidationError("tail_cutoff", f"must lie in (0, 1), got {tail_cutoff!r}")
    if rate == 0:
        probs = np.array([1.0])
        probs.flags.writeable = False
        return TruncatedPmf(0.0, probs, 0.0)

    dist = stats.poisson(rate)
    zmax = int(dist.isf(tail_cutoff))
    # isf can land one short of the target when the sf is near the cutoff
    while dist.sf(zmax) > tail_cutoff:
        zmax += 1
    while zmax > 0 and dist.sf(zmax - 1) <= tail_cutoff:
        zmax -= 1
    probs = dist.pmf(np.arange(zmax + 1))
    probs.flags.writeable = False
    return TruncatedPmf(float(rate), probs, float(dist.sf(zmax)))


def sample_poisson(rate: float, rng: np.random.Generator, size=None):
    if rate < 0:
        raise ValidationError("rate", f"Poisson rate must be >= 0, got {rate!r}")
    if size is None:
        return int(rng.poisson(rate))
    return rng.poisson(rate, size=size)
