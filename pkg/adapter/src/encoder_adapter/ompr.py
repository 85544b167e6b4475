"""Standalone writer for the OMPR embedding store format.

This is the cross-package boundary: the benchmark engine consumes these
files purely through the published byte layout, so the writer is
implemented here independently rather than imported.

    offset  size          field
    0       4             magic ``OMPR``
    4       4             format version, u32 little-endian (1)
    8       1             side byte (0 = probe, 1 = gallery)
    9       4             dim, u32 little-endian
    13      8             row count, u64 little-endian
    21      ...           id table: per id, u32 LE byte length + UTF-8 bytes
    ...     count*dim*4   row-major IEEE-754 float32, little-endian

The manifest sidecar (``<file>.manifest.json``) carries the model card keys
(name, family, params_millions, pretrain_dataset, resolution_px, backbone),
the side, a SHA-256 hex checksum of the float payload, and created_at.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

MAGIC = b"OMPR"
FORMAT_VERSION = 1
_SIDE_BYTE = {"probe": 0, "gallery": 1}
_HEADER = struct.Struct("<4sIBIQ")


class WriteFailure(Exception):
    pass


@dataclass(frozen=True)
class CardInfo:
    """Manifest model card: what the benchmark needs to know about a run."""

    name: str
    family: str
    params_millions: float
    pretrain_dataset: str
    resolution_px: int
    backbone: str


def payload_checksum(rows: np.ndarray) -> str:
    data = np.ascontiguousarray(rows.astype(np.float32, copy=False))
    return hashlib.sha256(data.tobytes()).hexdigest()


def write_store(destination: Path | str, ids: list[str], rows: np.ndarray, side: str, card: CardInfo) -> Path:
    """Serialize one embedding matrix plus its manifest sidecar."""
    if side not in _SIDE_BYTE:
        raise WriteFailure(f"side must be probe or gallery, got {side!r}")
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2 or len(ids) != rows.shape[0]:
        raise WriteFailure(f"{len(ids)} ids for payload of shape {rows.shape}")
    if len(set(ids)) != len(ids):
        raise WriteFailure("ids must be unique")

    destination = Path(destination)
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, _SIDE_BYTE[side], rows.shape[1], rows.shape[0])]
    for identifier in ids:
        raw = identifier.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(rows.tobytes())

    manifest = {
        "name": card.name,
        "family": card.family,
        "params_millions": card.params_millions,
        "pretrain_dataset": card.pretrain_dataset,
        "resolution_px": card.resolution_px,
        "backbone": card.backbone,
        "side": side,
        "checksum": payload_checksum(rows),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    try:
        destination.write_bytes(b"".join(parts))
        sidecar = destination.with_name(destination.name + ".manifest.json")
        sidecar.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise WriteFailure(f"cannot write {destination}: {exc}") from exc
    return destination
