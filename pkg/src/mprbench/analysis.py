"""Derived quantities over reference results: gains, penalties, compute
ratios, leaderboards, and the resolution-wall comparison.

Two delta kinds exist and never mix: data-source gains are absolute
percentage points ((variant - baseline) * 100) while noise penalties,
collapse ratios, and resolution deltas are relative percent
((variant - baseline) / baseline * 100). Every report records which kind it
carries. Compute-cost ratios grow with the square of resolution and print
floored to one decimal, the only rounding that matches the published values;
the raw ratio is kept alongside.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .efficiency import classify_size, semantic_power_density


class AnalysisError(Exception):
    pass


class ZeroBaseline(AnalysisError):
    pass


class InvalidResolution(AnalysisError):
    pass


class MissingMetric(AnalysisError):
    pass


class BackboneMismatch(AnalysisError):
    pass


class DeltaKind(str, Enum):
    ABSOLUTE_POINTS = "absolute_points"
    RELATIVE_PERCENT = "relative_percent"


@dataclass(frozen=True)
class DeltaReport:
    label: str
    baseline: float
    variant: float
    delta: float
    delta_kind: DeltaKind


@dataclass(frozen=True)
class ReferenceRow:
    """One transcribed (checkpoint, pre-training dataset, resolution) result."""

    name: str
    family: str
    backbone: str
    params_millions: float
    pretrain_dataset: str
    resolution_px: int
    recall1: float | None = None
    recall3: float | None = None
    recall5: float | None = None

    def recall(self, k: int) -> float | None:
        return {1: self.recall1, 3: self.recall3, 5: self.recall5}[k]

    @property
    def key(self) -> tuple[str, str]:
        return (self.name, self.pretrain_dataset)


@dataclass
class ResultsTable:
    rows: list[ReferenceRow]

    def __post_init__(self):
        keys = [r.key for r in self.rows]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate (name, dataset) keys: {dupes}")
        for r in self.rows:
            for k in (1, 3, 5):
                v = r.recall(k)
                if v is not None and not 0.0 <= v <= 1.0:
                    raise ValueError(f"{r.name}: recall{k}={v} outside [0, 1]")

    @classmethod
    def from_csv(cls, source: Path | str) -> "ResultsTable":
        with open(source, newline="", encoding="utf-8") as fh:
            return cls._parse(csv.DictReader(fh))

    @classmethod
    def bundled(cls) -> "ResultsTable":
        """The reference CSV shipped with the package."""
        ref = resources.files("mprbench").joinpath("data/reference_results.csv")
        with ref.open("r", encoding="utf-8", newline="") as fh:
            return cls._parse(csv.DictReader(fh))

    @classmethod
    def _parse(cls, reader: csv.DictReader) -> "ResultsTable":
        rows = []
        for rec in reader:
            rows.append(
                ReferenceRow(
                    name=rec["name"],
                    family=rec["family"],
                    backbone=rec["backbone"],
                    params_millions=float(rec["params_millions"]),
                    pretrain_dataset=rec["pretrain_dataset"],
                    resolution_px=int(rec["resolution_px"]),
                    recall1=_opt_float(rec.get("recall1")),
                    recall3=_opt_float(rec.get("recall3")),
                    recall5=_opt_float(rec.get("recall5")),
                )
            )
        return cls(rows=rows)

    def lookup(self, name: str, pretrain_dataset: str) -> ReferenceRow:
        for r in self.rows:
            if r.name == name and r.pretrain_dataset == pretrain_dataset:
                return r
        raise MissingMetric(f"no row for ({name!r}, {pretrain_dataset!r})")


def _opt_float(value: str | None) -> float | None:
    if value is None or value.strip() == "":
        return None
    return float(value)


def absolute_gain_points(baseline: float, variant: float) -> float:
    """Gain in accuracy percentage points: (variant - baseline) * 100."""
    return (variant - baseline) * 100.0


def relative_change_percent(baseline: float, variant: float) -> float:
    """Change relative to the baseline, in percent."""
    if baseline == 0:
        raise ZeroBaseline("relative change undefined for a zero baseline")
    return (variant - baseline) / baseline * 100.0


def flops_ratio(res_low: int, res_high: int) -> float:
    """Raw compute-cost ratio (res_high / res_low)^2; cost is quadratic in resolution."""
    if res_low <= 0 or res_high <= 0:
        raise InvalidResolution(f"resolutions must be positive, got {res_low}, {res_high}")
    if res_high < res_low:
        raise InvalidResolution(f"res_high {res_high} below res_low {res_low}")
    ratio = res_high / res_low
    return ratio * ratio


def floor_to_tenth(value: float) -> float:
    """Floor to one decimal, the printing convention for compute ratios."""
    return math.floor(value * 10.0 + 1e-9) / 10.0


def leaderboard(
    table: ResultsTable,
    metric: str = "recall1",
    group_by: str | None = None,
) -> list[ReferenceRow] | dict[str, list[ReferenceRow]]:
    """Rows sorted descending by metric, optionally within groups.

    ``metric`` is one of recall1/recall3/recall5/phi (phi derives from
    recall1 and size). ``group_by`` is one of size_class/family/dataset.
    Ties break by ascending model name, so output never depends on input
    order.
    """

    def metric_value(row: ReferenceRow) -> float:
        if metric == "phi":
            if row.recall1 is None:
                raise MissingMetric(f"{row.name}: phi needs recall1")
            return semantic_power_density(row.recall1, row.params_millions)
        if metric in ("recall1", "recall3", "recall5"):
            v = row.recall(int(metric[-1]))
            if v is None:
                raise MissingMetric(f"{row.name}: no {metric}")
            return v
        raise MissingMetric(f"unknown metric {metric!r}")

    def group_label(row: ReferenceRow) -> str:
        if group_by == "size_class":
            return classify_size(row.params_millions).value
        if group_by == "family":
            return row.family
        if group_by == "dataset":
            return row.pretrain_dataset
        raise ValueError(f"unknown group_by {group_by!r}")

    ordered = sorted(table.rows, key=lambda r: (-metric_value(r), r.name))
    if group_by is None:
        return ordered
    groups: dict[str, list[ReferenceRow]] = {}
    for row in ordered:
        groups.setdefault(group_label(row), []).append(row)
    return groups


@dataclass(frozen=True)
class ResolutionWallEntry:
    """Accuracy delta plus compute cost for one low-res/high-res pair."""

    report: DeltaReport
    res_low: int
    res_high: int
    flops_raw: float
    flops_printed: float


def resolution_wall(pairs: list[tuple[ReferenceRow, ReferenceRow]]) -> list[ResolutionWallEntry]:
    """Relative accuracy change vs quadratic compute growth per backbone pair."""
    entries = []
    for low, high in pairs:
        if low.backbone != high.backbone:
            raise BackboneMismatch(f"{low.name} vs {high.name}: backbones {low.backbone!r} != {high.backbone!r}")
        if low.recall1 is None or high.recall1 is None:
            raise MissingMetric(f"{low.backbone}: resolution pair needs recall1 on both sides")
        raw = flops_ratio(low.resolution_px, high.resolution_px)
        entries.append(
            ResolutionWallEntry(
                report=DeltaReport(
                    label=f"{low.backbone} {low.resolution_px}px vs {high.resolution_px}px",
                    baseline=low.recall1,
                    variant=high.recall1,
                    delta=relative_change_percent(low.recall1, high.recall1),
                    delta_kind=DeltaKind.RELATIVE_PERCENT,
                ),
                res_low=low.resolution_px,
                res_high=high.resolution_px,
                flops_raw=raw,
                flops_printed=floor_to_tenth(raw),
            )
        )
    return entries
