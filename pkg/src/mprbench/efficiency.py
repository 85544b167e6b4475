"""Accuracy-per-parameter metrics and the tier/size taxonomies.

The headline metric treats the retrieval odds ratio Recall@1 / (1 - Recall@1)
as a signal amplitude; effective power scales with amplitude squared, so the
semantic power density is that square per million parameters, scaled by 100
to land in a readable range. A model at 50% accuracy has odds ratio 1: the
minimum viability threshold, below which errors outnumber correct retrievals.
Linear (M1) and quadratic (M2) densities exist as the baselines the headline
metric is compared against.

All functions are pure and stateless.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .store import ModelCard

ODDS_EPSILON = 1e-6
DENSITY_SCALE = 100.0


class EfficiencyError(Exception):
    pass


class InvalidRecall(EfficiencyError):
    pass


class InvalidParams(EfficiencyError):
    pass


class Tier(str, Enum):
    """Power-density tiers; lower bounds inclusive, Tier1 strictly above 2."""

    TIER1 = "Tier1"  # hyper-efficient, phi > 2.0
    TIER2 = "Tier2"  # high utility, 1.0 <= phi <= 2.0
    TIER3 = "Tier3"  # moderate density, 0.5 <= phi < 1.0
    TIER4 = "Tier4"  # low density or diminishing returns, phi < 0.5


class SizeClass(str, Enum):
    SMALL = "Small"  # < 200M params
    MEDIUM = "Medium"  # 200M - 400M
    LARGE = "Large"  # 400M - 1B
    VERY_LARGE = "VeryLarge"  # > 1B


def _check_inputs(recall1: float, params_millions: float) -> None:
    if not 0.0 <= recall1 <= 1.0:
        raise InvalidRecall(f"recall1 must be in [0, 1], got {recall1}")
    if params_millions <= 0:
        raise InvalidParams(f"params_millions must be positive, got {params_millions}")


def semantic_power_density(recall1: float, params_millions: float) -> float:
    """Squared odds ratio per million parameters, scaled by 100.

    phi = (recall1 / (1 - recall1 + 1e-6))^2 / params_millions * 100

    Strictly increasing in recall1, strictly decreasing in parameter count,
    and finite even at recall1 = 1.0 thanks to the epsilon.
    """
    _check_inputs(recall1, params_millions)
    odds = recall1 / (1.0 - recall1 + ODDS_EPSILON)
    return odds * odds / params_millions * DENSITY_SCALE


def linear_density(recall1: float, params_millions: float) -> float:
    """M1 = recall1 / params_millions * 100; rewards smallness over accuracy."""
    _check_inputs(recall1, params_millions)
    return recall1 / params_millions * DENSITY_SCALE


def quadratic_density(recall1: float, params_millions: float) -> float:
    """M2 = recall1^2 / params_millions * 100; better ordering, no threshold."""
    _check_inputs(recall1, params_millions)
    return recall1 * recall1 / params_millions * DENSITY_SCALE


def classify_tier(phi: float) -> Tier:
    """Tier boundaries: lower bound inclusive, so phi = 2.0 is Tier2."""
    if phi < 0:
        raise ValueError(f"phi must be non-negative, got {phi}")
    if phi > 2.0:
        return Tier.TIER1
    if phi >= 1.0:
        return Tier.TIER2
    if phi >= 0.5:
        return Tier.TIER3
    return Tier.TIER4


def classify_size(params_millions: float) -> SizeClass:
    """Size classes at 200M / 400M / 1000M, boundary values in the upper class."""
    if params_millions <= 0:
        raise InvalidParams(f"params_millions must be positive, got {params_millions}")
    if params_millions < 200:
        return SizeClass.SMALL
    if params_millions < 400:
        return SizeClass.MEDIUM
    if params_millions < 1000:
        return SizeClass.LARGE
    return SizeClass.VERY_LARGE


@dataclass(frozen=True)
class EfficiencyRecord:
    """One model's efficiency profile; built via :func:`build_record`."""

    model: ModelCard
    recall1: float
    phi: float
    m1: float
    m2: float
    tier: Tier
    size_class: SizeClass

    CSV_HEADER = ("Model", "Size (M)", "Recall@1", "M1", "M2", "phi")

    def to_csv_row(self) -> list[str]:
        return [
            self.model.name,
            f"{self.model.params_millions:g}",
            f"{self.recall1:.3f}",
            f"{self.m1:.2f}",
            f"{self.m2:.2f}",
            f"{self.phi:.2f}",
        ]


def build_record(model: ModelCard, recall1: float) -> EfficiencyRecord:
    phi = semantic_power_density(recall1, model.params_millions)
    return EfficiencyRecord(
        model=model,
        recall1=recall1,
        phi=phi,
        m1=linear_density(recall1, model.params_millions),
        m2=quadratic_density(recall1, model.params_millions),
        tier=classify_tier(phi),
        size_class=classify_size(model.params_millions),
    )
