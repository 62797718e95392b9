"""Table and figure data for the cyclic-policy study.

Rows pin lambda1 = 1 and lambda2 = r, so every closed-form cost is in
units of the slow queue's arrival rate.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

from . import cyclic, mdp, schedule
from .model import make_params

TABLE1_GAMMAS = (0.6, 0.8, 0.99)
TABLE1_RATIOS = (1, 3, 5, 9)
TABLE1_GRID = tuple((g, r) for g in TABLE1_GAMMAS for r in TABLE1_RATIOS)

FIGURE1A_GAMMAS = (0.6, 0.8, 0.9, 0.99)
FIGURE1A_RATIOS = tuple(range(1, 51))
FIGURE1B = (1.0, 9.0, 0.8)
FIGURE1B_KMAX = 20

TABLE1_COLUMNS = ("gamma", "r", "k_star", "C1", "Cr", "Ck_star", "OPT", "gap1", "gapr", "gapk_star")


def round2(value: float) -> str:
    """Two decimals, halves rounded away from zero (10.625 -> 10.63)."""
    return str(Decimal(value).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def pct(gap: float) -> str:
    return round2(100 * gap) + "%"


def gap(cost: float, opt: float) -> float:
    return (cost - opt) / opt


def closed_form_row(gamma: float, r: int) -> dict:
    params = make_params(1, r, gamma)
    k_star = cyclic.optimal_k(params).k_star
    return {
        "gamma": gamma,
        "r": r,
        "k_star": k_star,
        "C1": cyclic.total_cost(params, 1),
        "Cr": cyclic.total_cost(params, int(r)),
        "Ck_star": cyclic.total_cost(params, k_star),
    }


def table1_row(gamma: float, r: int, config_overrides: dict | None = None, cache_dir=None) -> tuple[dict, dict]:
    """One full row plus the solver provenance used for its OPT entry."""
    row = closed_form_row(gamma, r)
    params = make_params(1, r, gamma)
    config = mdp.default_config(params, **(config_overrides or {}))
    table = mdp.solve_cached(params, config, cache_dir)
    opt = mdp.opt_cost(params, table)
    row["OPT"] = opt
    for key, col in (("gap1", "C1"), ("gapr", "Cr"), ("gapk_star", "Ck_star")):
        row[key] = gap(row[col], opt)
    prov = {"gamma": gamma, "r": r, **config.as_dict(), "sweeps": table.iterations, "sup_delta": table.sup_delta}
    return row, prov


def format_row(row: dict) -> dict:
    out = {"gamma": f"{row['gamma']:g}", "r": f"{row['r']:g}", "k_star": str(row["k_star"])}
    for key in ("C1", "Cr", "Ck_star", "OPT"):
        if key in row:
            out[key] = round2(row[key])
    for key in ("gap1", "gapr", "gapk_star"):
        if key in row:
            out[key] = pct(row[key])
    return out


def figure1a_rows(gammas=FIGURE1A_GAMMAS, ratios=FIGURE1A_RATIOS) -> list[tuple[float, float, int]]:
    return [(g, r, cyclic.optimal_k_for(g, r).k_star) for g in gammas for r in ratios]


def figure1b_rows(k_max: int = FIGURE1B_KMAX) -> list[tuple[int, float]]:
    return cyclic.cost_curve(make_params(*FIGURE1B), k_max)


def enumeration_report(gamma: float, lambda1: float, lambda2: float, max_len: int) -> dict:
    params = make_params(lambda1, lambda2, gamma)
    best, cost = schedule.enumerate_best_cycle(params, max_len)
    k_star = cyclic.optimal_k(params).k_star
    return {
        "best_cycle": str(best),
        "cost": cost,
        "k_star": k_star,
        "match": best.is_rotation_of(schedule.Schedule.cyclic(k_star)),
    }


@dataclass
class RunReport:
    command: list[str]
    params: dict
    results: list[dict]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for rec in self.results:
            for key, value in rec.items():
                if isinstance(value, float) and not math.isfinite(value):
                    raise ValueError(f"non-finite value in report field {key!r}")

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "params": self.params,
            "results": self.results,
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv(self, columns=None, formatted=None) -> str:
        rows = formatted if formatted is not None else self.results
        if columns is None:
            columns = list(rows[0]) if rows else []
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\r\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
