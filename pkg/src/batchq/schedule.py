"""Discounted cost of arbitrary periodic service schedules.

A schedule is a finite sequence of services repeated forever.  Costs use
the steady-cycle convention: the queue not served at position t holds the
arrivals of every period since it was last served, counting back across
the cycle boundary.  Under this convention the cost of a cycle depends on
where it starts (discounting breaks rotation symmetry).  A rotation is
*admissible* when it starts with Q1 and the cycle's last service is Q2,
i.e. the cycle begins right at a Q2 -> Q1 switch; that is the phase the
(M, lambda2) initial state puts a cyclic policy in.

``enumerate_best_cycle`` searches all primitive cycles up to a length by
brute force.  It is an oracle for the cyclic structure of the optimal
state-independent policy and is deliberately independent of
:mod:`batchq.cyclic`.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .model import DomainError, ModelParams, ValidationError

log = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 8
SLOW_ENUMERATION_LEN = 12
TIE_RTOL = 1e-12


class Queue(enum.IntEnum):
    Q1 = 1
    Q2 = 2

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Schedule:
    actions: tuple[Queue, ...]

    def __post_init__(self):
        actions = tuple(Queue(a) for a in self.actions)
        object.__setattr__(self, "actions", actions)
        if len(actions) < 2 or Queue.Q1 not in actions or Queue.Q2 not in actions:
            raise ValidationError(
                "schedule", "a cycle must serve both queues (cost is unbounded otherwise)"
            )

    @classmethod
    def parse(cls, text: str) -> Schedule:
        """Accepts ``"Q1 Q2 Q2"``, ``"Q1,Q2"`` or the compact ``"122"``."""
        tokens = text.replace(",", " ").split()
        if len(tokens) == 1 and set(tokens[0]) <= {"1", "2"}:
            tokens = list(tokens[0])
        try:
            return cls(tuple(Queue[t.upper()] if t.upper().startswith("Q") else Queue(int(t)) for t in tokens))
        except (KeyError, ValueError) as exc:
            raise ValidationError("schedule", f"cannot parse {text!r}") from exc

    @classmethod
    def cyclic(cls, k: int) -> Schedule:
        return cls((Queue.Q1,) + (Queue.Q2,) * k)

    def __len__(self):
        return len(self.actions)

    def __str__(self):
        return " ".join(str(a) for a in self.actions)

    def rotate(self, shift: int) -> Schedule:
        shift %= len(self.actions)
        return Schedule(self.actions[shift:] + self.actions[:shift])

    def rotations(self) -> list[Schedule]:
        return [self.rotate(i) for i in range(len(self.actions))]

    def is_admissible(self) -> bool:
        return self.actions[0] is Queue.Q1 and self.actions[-1] is Queue.Q2

    def admissible_rotations(self) -> list[Schedule]:
        return [s for s in self.rotations() if s.is_admissible()]

    def canonical(self) -> tuple[Queue, ...]:
        """Lexicographically smallest rotation (necklace representative)."""
        return min(s.actions for s in self.rotations())

    def is_rotation_of(self, other: Schedule) -> bool:
        return len(self) == len(other) and self.canonical() == other.canonical()


def _ages(actions: Sequence[int]) -> list[int]:
    """Periods since the queue *not* served at t was last served."""
    n = len(actions)
    last = {1: None, 2: None}
    # one warm-up pass so every queue has a "last served" index before t=0
    for t in range(-n, 0):
        last[actions[t]] = t
    ages = []
    for t, a in enumerate(actions):
        other = 3 - a
        ages.append(t - last[other])
        last[a] = t
    return ages


def schedule_cycle_cost(params: ModelParams, schedule: Schedule) -> float:
    if not isinstance(schedule, Schedule):
        schedule = Schedule(tuple(schedule))
    g = params.gamma
    total = 0.0
    gt = 1.0
    for a, age in zip(schedule.actions, _ages(schedule.actions)):
        total += gt * (params.lambda_bar + params.rate(3 - a) * age)
        gt *= g
    return total


def schedule_total_cost(params: ModelParams, schedule: Schedule) -> float:
    if not isinstance(schedule, Schedule):
        schedule = Schedule(tuple(schedule))
    return schedule_cycle_cost(params, schedule) / (1.0 - params.gamma ** len(schedule))


def lyndon_words(max_len: int) -> Iterator[tuple[int, ...]]:
    """Binary Lyndon words over {1 < 2} of length 1..max_len, in lex order.

    Every primitive cycle has exactly one rotation among these.
    """
    w = [0]
    while w:
        w[-1] += 1
        yield tuple(w)
        m = len(w)
        while len(w) < max_len:
            w.append(w[len(w) - m])
        while w and w[-1] == 2:
            w.pop()


def enumerate_best_cycle(params: ModelParams, max_len: int = DEFAULT_MAX_LEN) -> tuple[Schedule, float]:
    """Cheapest admissible cycle of length 2..max_len.

    Every primitive cycle is visited once (as a Lyndon word) and each of
    its admissible rotations is costed.  Repetitions of a shorter cycle are
    the same policy and are skipped.  Ties within a relative 1e-12 go to
    the lexicographically smallest sequence.
    """
    if int(max_len) != max_len or max_len < 2:
        raise DomainError(f"max_len must be an integer >= 2, got {max_len!r}")
    if max_len > SLOW_ENUMERATION_LEN:
        log.warning("enumerating cycles up to length %d visits ~%d cycles; this is slow",
                    max_len, 2 ** (max_len + 1) // max_len)

    best: tuple[float, tuple[int, ...]] | None = None
    for word in lyndon_words(max_len):
        if len(word) < 2:
            continue
        n = len(word)
        for shift in range(n):
            rot = word[shift:] + word[:shift]
            if rot[0] != 1 or rot[-1] != 2:
                continue
            cost = schedule_total_cost(params, Schedule(rot))
            if best is None:
                best = (cost, rot)
                continue
            bc, bs = best
            if math.isclose(cost, bc, rel_tol=TIE_RTOL, abs_tol=0.0):
                if rot < bs:
                    best = (cost, rot)
            elif cost < bc:
                best = (cost, rot)
    cost, seq = best
    return Schedule(seq), cost
