"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line (run with -s or -rA to see them). Tolerances are pinned in
the assertions; runtime budgets are measured inside the tests.
"""

import math
import time

import numpy as np
import pytest

from mprbench.analysis import ResultsTable
from mprbench.captions import audit_caption, count_tokens
from mprbench.efficiency import classify_size, classify_tier, semantic_power_density
from mprbench.reports import (
    reproduce_data_quality_gain,
    reproduce_discriminative_gap,
    reproduce_efficiency_metrics,
    reproduce_family_tiers,
    reproduce_noise_penalty,
    reproduce_resolution_wall,
    reproduce_scale_collapse,
    reproduce_size_class_leaders,
)
from mprbench.retrieval import ProbeSet, cmc_curve, evaluate, recall_at_k
from mprbench.similarity import (
    LossConfig,
    ScoreMatrix,
    calibrate_scores,
    info_nce_loss,
    rank,
    score_matrix,
)
from mprbench.store import EmbeddingMatrix, Side, l2_normalize

from conftest import make_matrix
from test_captions import HERSHEYS, SYNTH_CAPTION
from test_similarity import infonce_oracle


def report_line(criterion: str, ok: bool):
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}")
    assert ok


@pytest.fixture(scope="module")
def reference():
    return ResultsTable.bundled()


def test_criterion_1_efficiency_table_reproduction(reference):
    start = time.perf_counter()
    result = reproduce_efficiency_metrics(reference)
    elapsed = time.perf_counter() - start
    ok = result.ok and elapsed < 1.0
    report_line(f"1. efficiency metric table: M1/M2/phi within +-0.02 for all five rows in {elapsed * 1000:.0f}ms", ok)


def test_criterion_2_gap_table_reproduction(reference):
    start = time.perf_counter()
    result = reproduce_discriminative_gap(reference)
    elapsed = time.perf_counter() - start
    deltas_ok = all(abs(float(c.computed) - float(c.published)) <= 0.001 for c in result.cells)
    ok = result.ok and deltas_ok and elapsed < 1.0
    report_line(f"2. discriminative gap table: all five deltas within +-0.001 in {elapsed * 1000:.0f}ms", ok)


def test_criterion_3_delta_tables_reproduction(reference):
    start = time.perf_counter()
    wall = reproduce_resolution_wall(reference)
    quality = reproduce_data_quality_gain(reference)
    noise = reproduce_noise_penalty(reference)
    collapse = reproduce_scale_collapse(reference)
    elapsed = time.perf_counter() - start
    flops = [c for c in wall.cells if c.column == "flops_ratio"]
    ok = (
        all(t.ok for t in (wall, quality, noise, collapse))
        and [c.computed for c in flops] == ["1.7", "2.2", "2.2"]
        and elapsed < 1.0
    )
    report_line(
        f"3. gain/penalty/collapse/resolution tables within +-0.15/+-0.2, compute ratios exact, in {elapsed * 1000:.0f}ms",
        ok,
    )


def test_criterion_4_taxonomies(reference):
    start = time.perf_counter()
    tiers = reproduce_family_tiers(reference)
    sizes = reproduce_size_class_leaders(reference)
    elapsed = time.perf_counter() - start
    tier_cells = [c for c in tiers.cells if c.column == "tier"]
    ok = (
        len(tier_cells) == 14
        and all(c.ok for c in tier_cells)
        and sizes.ok
        and elapsed < 1.0
    )
    report_line(f"4. all 14 family tiers and 4 size-class leaders reproduced in {elapsed * 1000:.0f}ms", ok)


def test_criterion_5_ranking_oracle_equivalence():
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    all_ok = True
    for trial in range(200):
        q = int(rng.integers(1, 101))
        g = 409
        dim = 64
        gallery = make_matrix(rng, g, dim, side=Side.GALLERY, prefix=f"g{trial}-")
        probes = make_matrix(rng, q, dim, side=Side.PROBE, prefix=f"p{trial}-")
        gt = [int(rng.integers(g)) for _ in range(q)]
        truth = ProbeSet.from_mapping({probes.ids[i]: gallery.ids[gt[i]] for i in range(q)})

        scores = score_matrix(probes, gallery)
        top5 = rank(scores, k=5)
        full = rank(scores)

        # independent oracle: same float64 scores, python full sort + scan
        oracle_scores = np.einsum("id,jd->ij", probes.rows.astype(np.float64), gallery.rows.astype(np.float64))
        hits = {1: 0, 3: 0, 5: 0}
        for i in range(q):
            order = sorted(range(g), key=lambda j: (-oracle_scores[i, j], j))
            if top5.indices[i].tolist() != order[:5]:
                all_ok = False
            position = order.index(gt[i]) + 1
            for k in hits:
                hits[k] += position <= k
        for k in hits:
            if recall_at_k(full, truth, k) != hits[k] / q:
                all_ok = False
    elapsed = time.perf_counter() - start
    ok = all_ok and elapsed < 30.0
    report_line(f"5. 200 random instances: top-5 and recall@1/3/5 match the naive oracle exactly in {elapsed:.1f}s", ok)


def test_criterion_6_contrastive_diagnostics():
    rng = np.random.default_rng(6)
    ok = True

    for b in (2, 4, 16):
        base = rng.standard_normal(32).astype(np.float32)
        rows = np.tile(base, (b, 1))
        img = l2_normalize(EmbeddingMatrix(ids=[f"i{i}" for i in range(b)], rows=rows, side=Side.PROBE))
        txt = l2_normalize(EmbeddingMatrix(ids=[f"t{i}" for i in range(b)], rows=rows.copy(), side=Side.GALLERY))
        out = info_nce_loss(img, txt, LossConfig(batch_size=b, temperature=0.07))
        ok &= abs(out.total - math.log(b)) <= 1e-9

    for _ in range(10):
        img = make_matrix(rng, 3, 12, side=Side.PROBE)
        txt = make_matrix(rng, 3, 12)
        out = info_nce_loss(img, txt, LossConfig(batch_size=3, temperature=0.07))
        i2t, t2i, total = infonce_oracle(img.rows, txt.rows, 0.07)
        ok &= abs(out.image_to_text - i2t) <= 1e-9
        ok &= abs(out.text_to_image - t2i) <= 1e-9
        ok &= abs(out.total - total) <= 1e-9

    for _ in range(100):
        b = int(rng.integers(2, 9))
        img = make_matrix(rng, b, 8, side=Side.PROBE)
        txt = make_matrix(rng, b, 8)
        cfg = LossConfig(batch_size=b, temperature=0.07)
        forward = info_nce_loss(img, txt, cfg)
        ok &= abs(forward.total - info_nce_loss(txt, img, cfg).total) <= 1e-12
        perm = rng.permutation(b)
        img_p = EmbeddingMatrix(ids=[img.ids[i] for i in perm], rows=img.rows[perm], side=Side.PROBE)
        txt_p = EmbeddingMatrix(ids=[txt.ids[i] for i in perm], rows=txt.rows[perm], side=Side.GALLERY)
        ok &= abs(info_nce_loss(img_p, txt_p, cfg).total - forward.total) <= 1e-12

    report_line("6. contrastive diagnostic: ln B exact, double-loop match 1e-9, symmetry+permutation 1e-12", ok)


def test_criterion_7_invariant_suite():
    rng = np.random.default_rng(7)
    ok = True

    # CMC monotone and recall@G = 1.0 on random fixtures
    for _ in range(10):
        q, g = int(rng.integers(5, 40)), int(rng.integers(3, 25))
        scores = ScoreMatrix(
            probe_ids=[f"p{i}" for i in range(q)],
            gallery_ids=[f"g{j}" for j in range(g)],
            scores=rng.standard_normal((q, g)),
        )
        ranking = rank(scores)
        truth = ProbeSet.from_mapping({f"p{i}": f"g{int(rng.integers(g))}" for i in range(q)})
        curve = cmc_curve(ranking, truth, g)
        ok &= bool(np.all(np.diff(curve) >= 0)) and curve[-1] == 1.0

    # rank invariance under monotone calibration
    scores = ScoreMatrix(
        probe_ids=[f"p{i}" for i in range(30)],
        gallery_ids=[f"g{j}" for j in range(20)],
        scores=rng.uniform(-1, 1, (30, 20)),
    )
    base = rank(scores, k=20).indices
    for transformed in (
        calibrate_scores(scores, "softmax", 0.07),
        calibrate_scores(scores, "sigmoid"),
        3.7 * scores.scores + 0.4,
    ):
        recal = ScoreMatrix(probe_ids=scores.probe_ids, gallery_ids=scores.gallery_ids, scores=np.asarray(transformed))
        ok &= bool(np.array_equal(rank(recal, k=20).indices, base))

    # scale invariance of cosine scores
    raw = rng.standard_normal((25, 16)).astype(np.float32)
    gallery = make_matrix(rng, 12, 16)
    ref = None
    for alpha in (1.0, 0.25, 40.0):
        m = l2_normalize(EmbeddingMatrix(ids=[f"p{i}" for i in range(25)], rows=raw * alpha, side=Side.PROBE))
        s = score_matrix(m, gallery).scores
        ref = s if ref is None else ref
        ok &= bool(np.allclose(s, ref, atol=1e-6))

    # worker-count determinism, bit identical
    probes = make_matrix(rng, 1200, 48, side=Side.PROBE)
    gal = make_matrix(rng, 200, 48)
    blobs = {w: score_matrix(probes, gal, workers=w).scores.tobytes() for w in (1, 2, 8)}
    ok &= blobs[1] == blobs[2] == blobs[8]

    report_line("7. invariants: CMC monotone, recall@G=1, rank invariance, scale invariance, 1/2/8-worker determinism", ok)


def test_criterion_8_desk_scale_throughput():
    rng = np.random.default_rng(8)
    probes = make_matrix(rng, 12944, 1152, side=Side.PROBE)
    gallery = make_matrix(rng, 409, 1152)
    start = time.perf_counter()
    scores = score_matrix(probes, gallery, workers=8)
    top5 = rank(scores, k=5)
    elapsed = time.perf_counter() - start
    ok = elapsed < 2.0 and top5.indices.shape == (12944, 5)
    report_line(f"8. 12944 x 409 @ dim 1152 scored and ranked in {elapsed:.2f}s (< 2s)", ok)


def test_criterion_9_caption_audit():
    fig_audit = audit_caption(SYNTH_CAPTION, HERSHEYS, token_budget=77)
    # "The product is" is 3 content tokens; 75 single-token words + 2 markers = 80
    over_budget = "The product is " + " ".join(["syrup"] * 75)
    assert count_tokens(over_budget) == 80
    over_audit = audit_caption(over_budget, HERSHEYS, token_budget=77)
    prefix_audit = audit_caption("A syrup bottle with a black cap.", HERSHEYS, token_budget=77)
    ok = (
        fig_audit.pass_
        and fig_audit.token_compliant
        and fig_audit.prefix_ok
        and not fig_audit.missing_attributes
        and not over_audit.token_compliant
        and not over_audit.pass_
        and not prefix_audit.prefix_ok
        and not prefix_audit.pass_
    )
    report_line("9. caption audit: reference caption passes; over-budget and prefix-violating captions fail", ok)
