"""Group reports into mean/std rows and map them onto the [1, 5] radar scale."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import EmptyGroup
from .evaluate import METRICS, MetricReport

# metric -> (higher is better, radar transform)
DIRECTIONS: dict[str, tuple[bool, str]] = {
    "timbre_consistency": (True, "minmax"),
    "reverb_consistency": (False, "minmax"),
    "sound_fidelity": (True, "shift"),
    "content_error_rate": (False, "minmax"),
    "prosody": (True, "passthrough"),
    "richness": (True, "passthrough"),
    "hierarchy": (True, "passthrough"),
    "rtf": (False, "none"),
}
TABLE_METRICS = METRICS + ("rtf",)
RADAR_METRICS = tuple(m for m in TABLE_METRICS if DIRECTIONS[m][1] != "none")
GROUP_FIELDS = ("model", "scenario", "challenge", "language")
FIDELITY_SHIFT = 0.5
RADAR_LO, RADAR_HI = 1.0, 5.0


@dataclass
class AggregateRow:
    key: dict[str, str]
    mean: dict[str, float | None] = field(default_factory=dict)
    std: dict[str, float | None] = field(default_factory=dict)
    n: dict[str, int] = field(default_factory=dict)
    count: int = 0
    rank: dict[str, int | None] = field(default_factory=dict)  # 1 best, 2 second, else None

    def label(self) -> str:
        return " / ".join(v for v in self.key.values() if v) or "all"

    def to_dict(self) -> dict:
        return {"key": self.key, "count": self.count, "mean": self.mean, "std": self.std, "n": self.n,
                "rank": self.rank}


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def aggregate(reports: Iterable[MetricReport], group_by: Sequence[str] = ("model",),
              metrics: Sequence[str] = TABLE_METRICS) -> list[AggregateRow]:
    """Mean and population std over ok values, one row per group, sorted by key."""
    bad = [g for g in group_by if g not in GROUP_FIELDS]
    if bad:
        raise ValueError(f"cannot group by {bad}; choose from {GROUP_FIELDS}")
    groups: dict[tuple, list[MetricReport]] = defaultdict(list)
    for r in sorted(reports, key=lambda r: r.case_id):
        groups[tuple(getattr(r, g) for g in group_by)].append(r)
    if not groups:
        raise EmptyGroup("no reports to aggregate")

    rows = []
    for key in sorted(groups):
        members = groups[key]
        row = AggregateRow(dict(zip(group_by, key)), count=len(members))
        for m in metrics:
            vals = [r.values[m] for r in members if r.ok(m) and r.values.get(m) is not None]
            row.mean[m], row.std[m] = _mean_std(vals)
            row.n[m] = len(vals)
        rows.append(row)
    mark_best(rows, metrics)
    return rows


def mark_best(rows: list[AggregateRow], metrics: Sequence[str] = TABLE_METRICS) -> None:
    """Rank 1/2 for the best and second-best distinct means per metric (ties share a rank)."""
    for m in metrics:
        higher = DIRECTIONS[m][0]
        present = sorted({row.mean[m] for row in rows if row.mean.get(m) is not None}, reverse=higher)
        top = present[:2]
        for row in rows:
            v = row.mean.get(m)
            row.rank[m] = top.index(v) + 1 if v is not None and v in top else None


# ---------------------------------------------------------------------------
# radar


@dataclass
class RadarNormalizer:
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for m, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise ValueError(f"{m}: s_min {lo} > s_max {hi}")

    @classmethod
    def fit(cls, rows: Iterable[AggregateRow]) -> "RadarNormalizer":
        rows = list(rows)
        ranges = {}
        for m in RADAR_METRICS:
            if DIRECTIONS[m][1] != "minmax":
                continue
            vals = [row.mean[m] for row in rows if row.mean.get(m) is not None]
            if vals:
                ranges[m] = (min(vals), max(vals))
        return cls(ranges)

    def __call__(self, metric: str, value: float | None) -> float | None:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            return None
        higher, transform = DIRECTIONS[metric]
        if transform == "passthrough":
            return float(value)
        if transform == "shift":
            return _clip(value + FIDELITY_SHIFT)
        if transform != "minmax":
            raise KeyError(f"{metric} has no radar mapping")
        lo, hi = self.ranges[metric]
        if hi == lo:
            return 3.0
        if higher:
            return _clip(RADAR_LO + (RADAR_HI - RADAR_LO) * (value - lo) / (hi - lo))
        return _clip(RADAR_LO + (RADAR_HI - RADAR_LO) * (hi - value) / (hi - lo))


def _clip(v: float) -> float:
    return float(min(RADAR_HI, max(RADAR_LO, v)))


def radar_normalize(rows: list[AggregateRow], normalizer: RadarNormalizer | None = None,
                    per_scenario: bool = False) -> list[dict]:
    """Radar-ready values per row.

    Ranges are fitted over all rows unless ``normalizer`` is given; with
    ``per_scenario`` they are fitted separately within each scenario.
    """
    if per_scenario:
        by_scenario: dict[str, list[AggregateRow]] = defaultdict(list)
        for row in rows:
            by_scenario[row.key.get("scenario", "")].append(row)
        fitted = {s: RadarNormalizer.fit(rs) for s, rs in by_scenario.items()}
    else:
        shared = normalizer or RadarNormalizer.fit(rows)
    out = []
    for row in rows:
        norm = fitted[row.key.get("scenario", "")] if per_scenario else shared
        out.append({"key": row.key, "values": {m: norm(m, row.mean.get(m)) for m in RADAR_METRICS}})
    return out
