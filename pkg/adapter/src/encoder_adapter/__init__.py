"""Dual-encoder embedding extraction into the OMPR store format."""

from .extract import ExtractionSpec, UnreadableInput, extract_embeddings, model_card
from .ompr import CardInfo, WriteFailure, write_store
from .registry import CheckpointNotFound, available, parameter_count_millions, resolve, smallest_checkpoint

__all__ = [
    "ExtractionSpec",
    "UnreadableInput",
    "extract_embeddings",
    "model_card",
    "CardInfo",
    "WriteFailure",
    "write_store",
    "CheckpointNotFound",
    "available",
    "parameter_count_millions",
    "resolve",
    "smallest_checkpoint",
]
