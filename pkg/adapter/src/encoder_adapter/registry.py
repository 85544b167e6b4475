"""Known dual-encoder checkpoint architectures, instantiable offline.

Each entry pins the full tower geometry, so parameter counts and embedding
dimensions are exact without downloading anything. Weights load from a
local state-dict path when one is supplied; otherwise towers initialize
from a fixed seed, which keeps extraction reproducible while still
exercising the full store pipeline (manifest labels record the fallback).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache


class CheckpointNotFound(Exception):
    pass


@dataclass(frozen=True)
class CheckpointSpec:
    name: str
    family: str
    projection_dim: int
    resolution_px: int
    vision: dict = field(hash=False)
    text: dict = field(hash=False)

    def config(self):
        from transformers import CLIPConfig

        vision = dict(self.vision, projection_dim=self.projection_dim)
        text = dict(self.text, projection_dim=self.projection_dim)
        return CLIPConfig(projection_dim=self.projection_dim, vision_config=vision, text_config=text)


_VIT_B_VISION = dict(hidden_size=768, intermediate_size=3072, num_hidden_layers=12, num_attention_heads=12, image_size=224)
_VIT_L_VISION = dict(hidden_size=1024, intermediate_size=4096, num_hidden_layers=24, num_attention_heads=16, patch_size=14, image_size=224)
_TEXT_B = dict(hidden_size=512, intermediate_size=2048, num_hidden_layers=12, num_attention_heads=8)
_TEXT_L = dict(hidden_size=768, intermediate_size=3072, num_hidden_layers=12, num_attention_heads=12)

REGISTRY: dict[str, CheckpointSpec] = {
    spec.name: spec
    for spec in (
        CheckpointSpec(
            name="ViT-B-32",
            family="ViT",
            projection_dim=512,
            resolution_px=224,
            vision=dict(_VIT_B_VISION, patch_size=32),
            text=_TEXT_B,
        ),
        CheckpointSpec(
            name="ViT-B-16",
            family="ViT",
            projection_dim=512,
            resolution_px=224,
            vision=dict(_VIT_B_VISION, patch_size=16),
            text=_TEXT_B,
        ),
        CheckpointSpec(
            name="ViT-L-14",
            family="ViT",
            projection_dim=768,
            resolution_px=224,
            vision=_VIT_L_VISION,
            text=_TEXT_L,
        ),
        CheckpointSpec(
            name="ViT-L-14-336",
            family="ViT",
            projection_dim=768,
            resolution_px=336,
            vision=dict(_VIT_L_VISION, image_size=336),
            text=_TEXT_L,
        ),
    )
}


def available() -> list[str]:
    return list(REGISTRY)


def resolve(name: str) -> CheckpointSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        raise CheckpointNotFound(f"unknown checkpoint {name!r}; available: {', '.join(REGISTRY)}") from None


@lru_cache(maxsize=None)
def parameter_count_millions(name: str) -> float:
    """Total trainable parameters of both towers, in millions.

    Counted on the meta device: exact without allocating weights.
    """
    import torch
    from transformers import CLIPModel

    spec = resolve(name)
    with torch.device("meta"):
        model = CLIPModel(spec.config())
    return sum(p.numel() for p in model.parameters() if p.requires_grad) / 1e6


def smallest_checkpoint() -> str:
    return min(REGISTRY, key=parameter_count_millions)
