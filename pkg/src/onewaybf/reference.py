"""Published relative frequencies (Tables 1-6), bundled for self-checks."""

from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources

from .montecarlo import FrequencyTable


@lru_cache(maxsize=None)
def _load() -> dict:
    text = resources.files("onewaybf").joinpath("data/published_tables.json").read_text("utf-8")
    return json.loads(text)


def published_value(table_id: int, p: int, r: int, rule_params: str, sigma_a2: float) -> float:
    doc = _load()[str(table_id)]
    col = [float(s) for s in doc["sigma_a2"]].index(float(sigma_a2))
    for row in doc["rows"]:
        if (row["p"], row["r"], row["rule_params"]) == (p, r, rule_params):
            return row["values"][col]
    raise KeyError((table_id, p, r, rule_params, sigma_a2))


def published_rows(table_id: int) -> list[dict]:
    return list(_load()[str(table_id)]["rows"])


def compare_with_published(table: FrequencyTable, table_id: int | None = None) -> list[dict]:
    """Per-cell deviations ``observed - published`` for every valid row."""
    tid = table.table_id if table_id is None else table_id
    out = []
    for row in table.rows:
        if not row.valid:
            continue
        try:
            ref = published_value(tid, row.p, row.r, row.rule_params, row.sigma_a2)
        except (KeyError, ValueError):
            continue
        out.append({
            "p": row.p, "r": row.r, "rule_params": row.rule_params, "sigma_a2": row.sigma_a2,
            "observed": row.frequency, "published": ref, "se": row.se,
            "deviation": row.frequency - ref,
        })
    return out


def max_abs_deviation(table: FrequencyTable, table_id: int | None = None) -> float:
    devs = [abs(d["deviation"]) for d in compare_with_published(table, table_id)]
    return max(devs) if devs else math.nan
