"""Probe-gallery scoring, ranking, score calibration, and the contrastive
diagnostic loss.

Determinism contract: scores are accumulated in float64 over fixed 512-row
probe blocks. A worker count only changes which thread computes which block,
never the block boundaries, so two runs with different worker counts produce
bit-identical score matrices. Ranking always consumes raw cosine scores;
both calibrations are strictly monotone, so they exist for score reporting
only and can never change an ordering.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .store import EmbeddingMatrix

SCORE_BLOCK_ROWS = 512
DEFAULT_TEMPERATURE = 0.07
TIE_POLICY = "ascending-gallery-index"


class SimilarityError(Exception):
    pass


class DimensionMismatch(SimilarityError):
    pass


class KOutOfRange(SimilarityError):
    pass


class InvalidTemperature(SimilarityError):
    pass


class BatchMismatch(SimilarityError):
    pass


@dataclass(eq=False)
class ScoreMatrix:
    """P x G cosine similarities with the identifiers of both sides."""

    probe_ids: list[str]
    gallery_ids: list[str]
    scores: np.ndarray  # float64, shape (P, G)

    def __post_init__(self):
        if self.scores.shape != (len(self.probe_ids), len(self.gallery_ids)):
            raise DimensionMismatch(
                f"scores shape {self.scores.shape} does not match "
                f"{len(self.probe_ids)} probes x {len(self.gallery_ids)} gallery entries"
            )


@dataclass(eq=False)
class RankingResult:
    """Per-probe gallery indices sorted by descending score.

    ``indices[i]`` is a length-k prefix of a permutation of gallery indices;
    ``scores[i]`` is non-increasing. Ties are broken by ascending gallery
    index, the one deterministic policy used everywhere.
    """

    probe_ids: list[str]
    gallery_ids: list[str]
    indices: np.ndarray  # int64, shape (P, k)
    scores: np.ndarray  # float64, shape (P, k)
    tie_policy: str = TIE_POLICY

    @property
    def depth(self) -> int:
        return int(self.indices.shape[1])


@dataclass(frozen=True)
class LossConfig:
    """Temperature and batch size for the contrastive diagnostic."""

    batch_size: int
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.temperature <= 0:
            raise InvalidTemperature(f"temperature must be positive, got {self.temperature}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be at least 2, got {self.batch_size}")


@dataclass(frozen=True)
class InfoNceResult:
    image_to_text: float
    text_to_image: float
    total: float


def score_matrix(probes: EmbeddingMatrix, gallery: EmbeddingMatrix, workers: int = 1) -> ScoreMatrix:
    """Cosine scores between every probe row and every gallery row.

    Inputs are expected unit-norm (see ``l2_normalize``); scores are then
    plain dot products. Parallelism is across fixed probe blocks only and
    the output is bit-identical for any ``workers`` value.
    """
    if probes.dim != gallery.dim:
        raise DimensionMismatch(f"probe dim {probes.dim} != gallery dim {gallery.dim}")

    probe_rows = probes.rows.astype(np.float64)
    gallery_t = gallery.rows.astype(np.float64).T
    out = np.empty((probes.count, gallery.count), dtype=np.float64)

    blocks = [(start, min(start + SCORE_BLOCK_ROWS, probes.count)) for start in range(0, probes.count, SCORE_BLOCK_ROWS)]

    def fill(block: tuple[int, int]) -> None:
        lo, hi = block
        np.matmul(probe_rows[lo:hi], gallery_t, out=out[lo:hi])

    if workers <= 1 or len(blocks) <= 1:
        for block in blocks:
            fill(block)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))

    return ScoreMatrix(probe_ids=list(probes.ids), gallery_ids=list(gallery.ids), scores=out)


def rank(scores: ScoreMatrix, k: int | None = None) -> RankingResult:
    """Sort gallery indices per probe by descending score, keeping the top k.

    ``k=None`` keeps the full gallery. Ties resolve to the lower gallery
    index (stable sort on negated scores).
    """
    gallery_size = len(scores.gallery_ids)
    if k is None:
        k = gallery_size
    if not 1 <= k <= gallery_size:
        raise KOutOfRange(f"k={k} outside [1, {gallery_size}]")

    order = np.argsort(-scores.scores, axis=1, kind="stable")[:, :k]
    ranked = np.take_along_axis(scores.scores, order, axis=1)
    return RankingResult(
        probe_ids=list(scores.probe_ids),
        gallery_ids=list(scores.gallery_ids),
        indices=order.astype(np.int64),
        scores=ranked,
    )


def calibrate_scores(scores: ScoreMatrix, mode: str = "softmax", temperature: float = DEFAULT_TEMPERATURE) -> np.ndarray:
    """Map raw scores to probabilities; never used for ranking.

    ``softmax`` normalizes each probe row at the given temperature (rows sum
    to 1); ``sigmoid`` squashes each score independently. Both are strictly
    increasing in the raw score, so argsort is unchanged by construction.
    """
    if mode == "softmax":
        if temperature <= 0:
            raise InvalidTemperature(f"temperature must be positive, got {temperature}")
        z = scores.scores / temperature
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)
    if mode == "sigmoid":
        s = scores.scores
        out = np.empty_like(s)
        pos = s >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
        ez = np.exp(s[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    raise ValueError(f"unknown calibration mode {mode!r}")


def _log_softmax_diag_loss(logits: np.ndarray) -> float:
    # mean over rows of (logsumexp(row) - row[diag]); stable via row max shift
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return float(np.mean(lse - np.diag(logits)))


def info_nce_loss(image_emb: EmbeddingMatrix, text_emb: EmbeddingMatrix, config: LossConfig) -> InfoNceResult:
    """Symmetric contrastive loss over matched rows (row i pairs with row i).

    Image-to-text and text-to-image cross-entropies over in-batch negatives,
    averaged. Forward-only diagnostic; no gradients, no learnable temperature.
    """
    if image_emb.count != text_emb.count:
        raise BatchMismatch(f"image batch {image_emb.count} != text batch {text_emb.count}")
    if image_emb.count != config.batch_size:
        raise BatchMismatch(f"config batch_size {config.batch_size} != input batch {image_emb.count}")
    if image_emb.dim != text_emb.dim:
        raise DimensionMismatch(f"image dim {image_emb.dim} != text dim {text_emb.dim}")

    sims = image_emb.rows.astype(np.float64) @ text_emb.rows.astype(np.float64).T
    logits = sims / config.temperature
    i2t = _log_softmax_diag_loss(logits)
    t2i = _log_softmax_diag_loss(logits.T)
    return InfoNceResult(image_to_text=i2t, text_to_image=t2i, total=0.5 * (i2t + t2i))
