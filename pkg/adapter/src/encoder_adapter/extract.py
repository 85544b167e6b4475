"""Batched embedding extraction from registry checkpoints into OMPR stores.

Runs single-threaded torch in evaluation mode with a fixed seed, so the
same spec always produces the same bytes: weights (when randomly
initialized), batch walk order, and normalization are all pinned. Weights
load from a local state-dict file when one is given; there is no network
path. Reduced-precision (bfloat16) inference sits behind a flag and is off
by default, trading the published setup's speed for cross-run determinism
on ordinary CPUs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .ompr import CardInfo, WriteFailure, write_store
from .registry import CheckpointSpec, parameter_count_millions, resolve

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")
CONTEXT_LENGTH = 77


class UnreadableInput(Exception):
    pass


@dataclass(frozen=True)
class ExtractionSpec:
    """One extraction run: checkpoint, input set, and output destination."""

    checkpoint: str
    input_kind: str  # "images" | "texts"
    input_path: str
    output: str
    pretrained: str | None = None  # zoo tag; resolvable offline only via weights_path
    weights_path: str | None = None
    side: str | None = None  # defaults: images -> probe, texts -> gallery
    resolution: int | None = None
    batch_size: int = 16
    bfloat16: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.input_kind not in ("images", "texts"):
            raise ValueError(f"input_kind must be images or texts, got {self.input_kind!r}")
        if self.resolution is not None and self.resolution <= 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")

    @property
    def effective_side(self) -> str:
        if self.side:
            return self.side
        return "probe" if self.input_kind == "images" else "gallery"


def model_card(checkpoint: str, pretrained: str | None = None) -> CardInfo:
    """Checkpoint metadata: computed parameter count plus registry geometry."""
    spec = resolve(checkpoint)
    return CardInfo(
        name=checkpoint,
        family=spec.family,
        params_millions=parameter_count_millions(checkpoint),
        pretrain_dataset=pretrained or "random-init",
        resolution_px=spec.resolution_px,
        backbone=checkpoint,
    )


def _build_model(spec: CheckpointSpec, run: ExtractionSpec):
    import torch
    from transformers import CLIPModel

    torch.set_num_threads(1)  # fixed reduction order across runs
    torch.manual_seed(run.seed)
    model = CLIPModel(spec.config())
    if run.weights_path:
        state = torch.load(run.weights_path, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.eval()
    if run.bfloat16:
        model.to(torch.bfloat16)
    return model


def _projected(features):
    # transformers >= 5 returns the pooling output object; 4.x the tensor
    return features.pooler_output if hasattr(features, "pooler_output") else features


def _tokenizer():
    from transformers import CLIPTokenizer

    data = resources.files("encoder_adapter").joinpath("data")
    vocab = json.loads(data.joinpath("vocab.json").read_text(encoding="utf-8"))
    lines = data.joinpath("merges.txt").read_text(encoding="utf-8").splitlines()
    merges = [tuple(line.split()) for line in lines if line and not line.startswith("#version")]
    return CLIPTokenizer(vocab=vocab, merges=merges)


def _image_processor(resolution: int):
    from transformers import CLIPImageProcessor

    return CLIPImageProcessor(
        size={"shortest_edge": resolution},
        crop_size={"height": resolution, "width": resolution},
    )


def _read_texts(path: Path) -> tuple[list[str], list[str]]:
    """Catalog texts: (ids, descriptions). CSV/JSONL need sku_id; plain .txt
    uses ``id<TAB>text`` lines or bare text with the line number as id."""
    if not path.exists():
        raise UnreadableInput(f"text input not found: {path}")
    ids, texts = [], []
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            ids.append(str(rec["sku_id"]))
            texts.append(rec.get("caption") or rec.get("raw_description") or "")
    elif path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                ids.append(str(rec["sku_id"]))
                texts.append(rec.get("caption") or rec.get("raw_description") or "")
    else:
        for i, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
            if not line.strip():
                continue
            ident, tab, rest = line.partition("\t")
            if tab:
                ids.append(ident)
                texts.append(rest)
            else:
                ids.append(f"{i:06d}")
                texts.append(line)
    if not ids:
        raise UnreadableInput(f"no usable text rows in {path}")
    if any(not t for t in texts):
        raise UnreadableInput(f"{path}: empty description for id {ids[texts.index('')]}")
    return ids, texts


def _read_images(path: Path):
    from PIL import Image, UnidentifiedImageError

    if not path.is_dir():
        raise UnreadableInput(f"image input must be a directory: {path}")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise UnreadableInput(f"no images under {path}")
    ids, images = [], []
    for file in files:
        try:
            with Image.open(file) as img:
                images.append(img.convert("RGB"))
        except (OSError, UnidentifiedImageError) as exc:
            raise UnreadableInput(f"cannot read image {file}: {exc}") from exc
        ids.append(file.stem)
    return ids, images


def extract_embeddings(run: ExtractionSpec) -> Path:
    """Encode the inputs and write a normalized OMPR store; returns its path."""
    import torch

    spec = resolve(run.checkpoint)
    resolution = run.resolution or spec.resolution_px
    model = _build_model(spec, run)

    if run.input_kind == "texts":
        ids, texts = _read_texts(Path(run.input_path))
        tokenizer = _tokenizer()
        chunks = []
        with torch.no_grad():
            for start in range(0, len(texts), run.batch_size):
                batch = tokenizer(
                    texts[start : start + run.batch_size],
                    padding="max_length",
                    truncation=True,
                    max_length=CONTEXT_LENGTH,
                    return_tensors="pt",
                )
                features = _projected(model.get_text_features(**batch))
                chunks.append(features.float().numpy())
    else:
        ids, images = _read_images(Path(run.input_path))
        processor = _image_processor(resolution)
        chunks = []
        with torch.no_grad():
            for start in range(0, len(images), run.batch_size):
                pixels = processor(images=images[start : start + run.batch_size], return_tensors="pt").pixel_values
                if run.bfloat16:
                    pixels = pixels.to(torch.bfloat16)
                features = _projected(model.get_image_features(pixel_values=pixels))
                chunks.append(features.float().numpy())

    raw = np.concatenate(chunks, axis=0).astype(np.float64)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise WriteFailure("encoder produced a zero embedding; refusing to write")
    rows = (raw / norms).astype(np.float32)

    card = CardInfo(
        name=run.checkpoint,
        family=spec.family,
        params_millions=parameter_count_millions(run.checkpoint),
        pretrain_dataset=run.pretrained or "random-init",
        resolution_px=resolution,
        backbone=run.checkpoint,
    )
    return write_store(run.output, ids, rows, run.effective_side, card)
