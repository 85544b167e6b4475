import math

import pytest

from mprbench.efficiency import (
    InvalidParams,
    InvalidRecall,
    SizeClass,
    Tier,
    build_record,
    classify_size,
    classify_tier,
    linear_density,
    quadratic_density,
    semantic_power_density,
)

from conftest import make_card

# published five-model comparison: (name, size M, recall@1, M1, M2, phi)
COMPARISON_ROWS = [
    ("ViTamin-S", 62, 0.432, 0.70, 0.30, 0.93),
    ("ResNet50", 102, 0.405, 0.40, 0.16, 0.45),
    ("MobileCLIP-B", 150, 0.653, 0.44, 0.28, 2.37),
    ("ViT-L-14", 428, 0.568, 0.13, 0.08, 0.41),
    ("PE-Core-L-14", 671, 0.758, 0.11, 0.09, 1.46),
]


class TestSemanticPowerDensity:
    @pytest.mark.parametrize("name,size,recall,_m1,_m2,phi", COMPARISON_ROWS)
    def test_published_values(self, name, size, recall, _m1, _m2, phi):
        assert semantic_power_density(recall, size) == pytest.approx(phi, abs=0.02)

    def test_viability_threshold(self):
        # odds ratio crosses 1 at 50% accuracy
        assert semantic_power_density(0.5, 100) == pytest.approx(1.0, abs=1e-3)

    def test_threshold_times_params_is_hundred(self):
        for n in (1.0, 62.0, 150.0, 1871.0):
            assert semantic_power_density(0.5, n) * n == pytest.approx(100.0, rel=1e-3)

    def test_zero_signal(self):
        assert semantic_power_density(0.0, 123.0) == 0.0

    def test_finite_at_perfect_recall(self):
        phi = semantic_power_density(1.0, 100.0)
        assert math.isfinite(phi) and phi > 0

    def test_strictly_increasing_in_recall(self):
        values = [semantic_power_density(r / 100, 150.0) for r in range(0, 101)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_strictly_decreasing_in_params(self):
        values = [semantic_power_density(0.6, n) for n in (50, 100, 200, 400, 800, 1600)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_input_validation(self):
        with pytest.raises(InvalidRecall):
            semantic_power_density(1.2, 100)
        with pytest.raises(InvalidRecall):
            semantic_power_density(-0.1, 100)
        with pytest.raises(InvalidParams):
            semantic_power_density(0.5, 0)


class TestBaselineMetrics:
    @pytest.mark.parametrize("name,size,recall,m1,_m2,_phi", COMPARISON_ROWS)
    def test_linear_published(self, name, size, recall, m1, _m2, _phi):
        assert linear_density(recall, size) == pytest.approx(m1, abs=0.02)

    @pytest.mark.parametrize("name,size,recall,_m1,m2,_phi", COMPARISON_ROWS)
    def test_quadratic_published(self, name, size, recall, _m1, m2, _phi):
        assert quadratic_density(recall, size) == pytest.approx(m2, abs=0.02)

    def test_trivial_values(self):
        assert linear_density(0.0, 77.0) == 0.0
        assert quadratic_density(1.0, 100.0) == pytest.approx(1.0, abs=1e-12)

    def test_metric_ordering_disagreement(self):
        # the linear metric crowns the small inaccurate model; the
        # density metric crowns the accurate compact one
        m1_best = max(COMPARISON_ROWS, key=lambda r: linear_density(r[2], r[1]))
        phi_best = max(COMPARISON_ROWS, key=lambda r: semantic_power_density(r[2], r[1]))
        assert m1_best[0] == "ViTamin-S"
        assert phi_best[0] == "MobileCLIP-B"


class TestClassifyTier:
    @pytest.mark.parametrize(
        "phi,tier",
        [
            (2.82, Tier.TIER1),
            (2.37, Tier.TIER1),
            (2.0, Tier.TIER2),  # strict upper boundary belongs below
            (1.46, Tier.TIER2),
            (1.0, Tier.TIER2),
            (0.99, Tier.TIER3),
            (0.5, Tier.TIER3),
            (0.45, Tier.TIER4),
            (0.0, Tier.TIER4),
        ],
    )
    def test_boundaries(self, phi, tier):
        assert classify_tier(phi) is tier


class TestClassifySize:
    @pytest.mark.parametrize(
        "params,size",
        [
            (150, SizeClass.SMALL),
            (199.9, SizeClass.SMALL),
            (200, SizeClass.MEDIUM),  # boundary to the upper class
            (351, SizeClass.MEDIUM),
            (400, SizeClass.LARGE),
            (671, SizeClass.LARGE),
            (1000, SizeClass.VERY_LARGE),
            (1800, SizeClass.VERY_LARGE),
        ],
    )
    def test_boundaries(self, params, size):
        assert classify_size(params) is size

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            classify_size(0)


class TestEfficiencyRecord:
    def test_build_record_consistency(self):
        card = make_card("MobileCLIP-B", params=150.0)
        record = build_record(card, 0.653)
        assert record.tier is Tier.TIER1
        assert record.size_class is SizeClass.SMALL
        assert record.phi == pytest.approx(2.361, abs=0.001)

    def test_csv_row_precision(self):
        record = build_record(make_card("m", params=62.0), 0.432)
        assert record.to_csv_row() == ["m", "62", "0.432", "0.70", "0.30", "0.93"]
