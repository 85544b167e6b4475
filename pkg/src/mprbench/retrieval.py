"""Recall@K, CMC curves, and the discriminative gap under the
single-gallery-shot protocol (each probe has exactly one correct gallery
entry). Ranks are 1-based: rank 1 is the best match. All functions are pure
over immutable inputs and safe to call concurrently.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .similarity import RankingResult
from .store import ModelCard


class MetricError(Exception):
    pass


class MissingProbe(MetricError):
    pass


class KOutOfRange(MetricError):
    pass


class MissingK(MetricError):
    pass


@dataclass(frozen=True)
class ProbeSet:
    """Ground truth: one gallery id per probe id, total over the probes."""

    probe_ids: tuple[str, ...]
    ground_truth: dict[str, str]

    def __post_init__(self):
        missing = [p for p in self.probe_ids if p not in self.ground_truth]
        if missing:
            raise MissingProbe(f"no ground truth for probes: {missing[:5]}")

    @classmethod
    def from_mapping(cls, ground_truth: dict[str, str]) -> "ProbeSet":
        return cls(probe_ids=tuple(ground_truth), ground_truth=dict(ground_truth))


@dataclass
class EvalReport:
    """Recall@K map, CMC curve, and discriminative gap for one model run."""

    recall_at: dict[int, float]
    cmc: list[float]
    gap_delta: float | None = None
    model: ModelCard | None = None
    probe_count: int = 0
    gallery_size: int = 0

    def to_json_dict(self) -> dict:
        out = {
            "recall_at": {str(k): v for k, v in sorted(self.recall_at.items())},
            "cmc": self.cmc,
            "gap_delta": self.gap_delta,
            "probe_count": self.probe_count,
            "gallery_size": self.gallery_size,
        }
        if self.model is not None:
            out["model"] = self.model.name
        return out

    def csv_header(self) -> list[str]:
        return ["model", "recall@1", "recall@3", "recall@5", "delta"]

    def to_csv_row(self) -> list[str]:
        name = self.model.name if self.model else ""
        cells = [name]
        for k in (1, 3, 5):
            cells.append(f"{self.recall_at[k]:.3f}" if k in self.recall_at else "")
        cells.append(f"{self.gap_delta:.3f}" if self.gap_delta is not None else "")
        return cells

    def write(self, json_path: Path | str, csv_path: Path | str) -> None:
        Path(json_path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.csv_header())
            writer.writerow(self.to_csv_row())


def truth_ranks(ranking: RankingResult, truth: ProbeSet) -> np.ndarray:
    """1-based rank of each probe's ground-truth entry, in truth probe order.

    A ground truth that fell outside a top-k prefix gets the sentinel rank
    ``depth + 1``; callers must not ask about cutoffs beyond the prefix.
    """
    probe_pos = {p: i for i, p in enumerate(ranking.probe_ids)}
    gallery_pos = {g: i for i, g in enumerate(ranking.gallery_ids)}

    ranks = np.empty(len(truth.probe_ids), dtype=np.int64)
    sentinel = ranking.depth + 1
    for out_i, probe in enumerate(truth.probe_ids):
        if probe not in probe_pos:
            raise MissingProbe(f"probe {probe!r} absent from ranking")
        gt = truth.ground_truth[probe]
        if gt not in gallery_pos:
            raise MissingProbe(f"ground truth {gt!r} for probe {probe!r} absent from gallery")
        row = ranking.indices[probe_pos[probe]]
        hits = np.flatnonzero(row == gallery_pos[gt])
        ranks[out_i] = int(hits[0]) + 1 if hits.size else sentinel
    return ranks


def recall_at_k(ranking: RankingResult, truth: ProbeSet, k: int) -> float:
    """Fraction of probes whose ground truth ranks within the top k."""
    _check_k(ranking, k)
    ranks = truth_ranks(ranking, truth)
    return float(np.mean(ranks <= k))


def cmc_curve(ranking: RankingResult, truth: ProbeSet, kmax: int) -> np.ndarray:
    """Cumulative match curve; entry K-1 equals recall_at_k(..., K)."""
    _check_k(ranking, kmax)
    ranks = truth_ranks(ranking, truth)
    counts = np.bincount(np.clip(ranks, 1, kmax + 1), minlength=kmax + 2)[1 : kmax + 1]
    return np.cumsum(counts) / len(truth.probe_ids)


def discriminative_gap(report: EvalReport) -> float:
    """Recall@5 minus Recall@1: precision lost among shortlisted candidates."""
    for k in (1, 5):
        if k not in report.recall_at:
            raise MissingK(f"report lacks recall@{k}")
    return report.recall_at[5] - report.recall_at[1]


def evaluate(
    ranking: RankingResult,
    truth: ProbeSet,
    ks: tuple[int, ...] = (1, 3, 5),
    kmax: int | None = None,
    model: ModelCard | None = None,
) -> EvalReport:
    """Build a full report: Recall at every requested K, CMC up to kmax, gap."""
    if kmax is None:
        kmax = max(max(ks), min(ranking.depth, len(ranking.gallery_ids)))
    _check_k(ranking, kmax)
    for k in ks:
        _check_k(ranking, k)

    ranks = truth_ranks(ranking, truth)
    q = len(truth.probe_ids)
    recall = {int(k): float(np.mean(ranks <= k)) for k in ks}
    counts = np.bincount(np.clip(ranks, 1, kmax + 1), minlength=kmax + 2)[1 : kmax + 1]
    cmc = (np.cumsum(counts) / q).tolist()

    report = EvalReport(
        recall_at=recall,
        cmc=cmc,
        model=model,
        probe_count=q,
        gallery_size=len(ranking.gallery_ids),
    )
    if 1 in recall and 5 in recall:
        report.gap_delta = discriminative_gap(report)
    return report


def _check_k(ranking: RankingResult, k: int) -> None:
    gallery_size = len(ranking.gallery_ids)
    if not 1 <= k <= gallery_size:
        raise KOutOfRange(f"k={k} outside [1, {gallery_size}]")
    if k > ranking.depth:
        raise KOutOfRange(f"k={k} exceeds ranking depth {ranking.depth}; re-rank with a larger k")
