"""Bit-exact embedding container: the OMPR binary format plus validation.

Every other module consumes embeddings through this one. A store file holds
one identified matrix (probe or gallery side) of 32-bit floats:

    offset  size          field
    0       4             magic ``OMPR``
    4       4             format version, u32 little-endian (currently 1)
    8       1             side byte (0 = probe, 1 = gallery)
    9       4             dim, u32 little-endian
    13      8             row count, u64 little-endian
    21      ...           id table: per id, u32 LE byte length + UTF-8 bytes
    ...     count*dim*4   row-major IEEE-754 float32, little-endian

The manifest travels as an adjacent UTF-8 JSON sidecar (``<file>.manifest.json``)
carrying the model card, the side, a creation timestamp, and a SHA-256 hex
checksum of the float payload. Matrices are immutable after construction and
safe to share across threads; concurrent reads are fine, writers need
exclusive access to the destination path.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

MAGIC = b"OMPR"
FORMAT_VERSION = 1
ZERO_NORM_THRESHOLD = 1e-12
NORM_TOLERANCE = 1e-3

_HEADER = struct.Struct("<4sIBIQ")


class StoreError(Exception):
    """Base class for embedding store failures."""


class ZeroVectorRow(StoreError):
    def __init__(self, index: int):
        super().__init__(f"row {index} has L2 norm below {ZERO_NORM_THRESHOLD:g}; direction undefined")
        self.index = index


class InvalidMatrix(StoreError):
    pass


class IoFailure(StoreError):
    pass


class BadMagic(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


class ChecksumMismatch(StoreError):
    pass


class TruncatedPayload(StoreError):
    pass


class Side(str, Enum):
    PROBE = "probe"
    GALLERY = "gallery"


_SIDE_BYTE = {Side.PROBE: 0, Side.GALLERY: 1}
_BYTE_SIDE = {v: k for k, v in _SIDE_BYTE.items()}


@dataclass(frozen=True)
class ModelCard:
    """Checkpoint metadata: everything the efficiency metrics need."""

    name: str
    family: str
    params_millions: float
    pretrain_dataset: str
    resolution_px: int
    backbone: str

    def __post_init__(self):
        if self.params_millions <= 0:
            raise ValueError(f"params_millions must be positive, got {self.params_millions}")
        if self.resolution_px <= 0:
            raise ValueError(f"resolution_px must be positive, got {self.resolution_px}")


@dataclass(frozen=True)
class Manifest:
    model: ModelCard
    side: Side
    created_at: str = ""
    checksum: str = ""

    def to_json_dict(self) -> dict:
        return {
            "name": self.model.name,
            "family": self.model.family,
            "params_millions": self.model.params_millions,
            "pretrain_dataset": self.model.pretrain_dataset,
            "resolution_px": self.model.resolution_px,
            "backbone": self.model.backbone,
            "side": self.side.value,
            "checksum": self.checksum,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Manifest":
        card = ModelCard(
            name=payload["name"],
            family=payload["family"],
            params_millions=float(payload["params_millions"]),
            pretrain_dataset=payload["pretrain_dataset"],
            resolution_px=int(payload["resolution_px"]),
            backbone=payload["backbone"],
        )
        return cls(
            model=card,
            side=Side(payload["side"]),
            created_at=payload.get("created_at", ""),
            checksum=payload.get("checksum", ""),
        )


@dataclass(eq=False)
class EmbeddingMatrix:
    """Identified set of fixed-dimension float32 vectors, one side of a run.

    ``rows`` is coerced to a C-contiguous float32 array; ``dim`` survives for
    empty matrices because the column count is kept even at zero rows.
    Structural problems (id/row count mismatch, non-2D payload) fail fast;
    content problems (duplicate ids, non-finite values, norm drift) are the
    business of :func:`validate`, which reports instead of raising.
    """

    ids: list[str]
    rows: np.ndarray
    side: Side = Side.GALLERY

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float32))
        if rows.ndim != 2:
            raise InvalidMatrix(f"rows must be 2-D, got shape {rows.shape}")
        if len(self.ids) != rows.shape[0]:
            raise InvalidMatrix(f"{len(self.ids)} ids for {rows.shape[0]} rows")
        self.ids = [str(i) for i in self.ids]
        self.rows = rows

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @property
    def count(self) -> int:
        return int(self.rows.shape[0])

    def identical(self, other: "EmbeddingMatrix") -> bool:
        """Bit-exact equality: ids, side, shape, and payload bytes."""
        return (
            self.ids == other.ids
            and self.side == other.side
            and self.rows.shape == other.rows.shape
            and self.rows.tobytes() == other.rows.tobytes()
        )


@dataclass
class ValidationReport:
    """Findings from :func:`validate`; empty lists mean a clean matrix."""

    duplicate_ids: list[str] = field(default_factory=list)
    nonfinite_entries: list[tuple[int, int]] = field(default_factory=list)
    norm_deviations: list[tuple[int, float]] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (self.duplicate_ids or self.nonfinite_entries or self.norm_deviations)

    def findings(self) -> list[str]:
        out = [f"duplicate id {i!r}" for i in self.duplicate_ids]
        out += [f"non-finite value at row {r} col {c}" for r, c in self.nonfinite_entries]
        out += [f"row {r} norm {n:.6f} deviates from 1.0 by more than {NORM_TOLERANCE:g}" for r, n in self.norm_deviations]
        return out


def l2_normalize(matrix: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit L2 norm, preserving direction.

    Norms are accumulated in float64 and the result is stored back as
    float32, so repeated application is stable to ~1e-7 per element.

    Raises ZeroVectorRow for any row whose norm is below 1e-12.
    """
    rows = matrix.rows.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    below = np.flatnonzero(norms < ZERO_NORM_THRESHOLD)
    if below.size:
        raise ZeroVectorRow(int(below[0]))
    normalized = (rows / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(ids=list(matrix.ids), rows=normalized, side=matrix.side)


def validate(matrix: EmbeddingMatrix) -> ValidationReport:
    """Report duplicate ids, non-finite entries, and unit-norm deviations."""
    report = ValidationReport()

    seen: set[str] = set()
    for i in matrix.ids:
        if i in seen and i not in report.duplicate_ids:
            report.duplicate_ids.append(i)
        seen.add(i)

    bad = np.argwhere(~np.isfinite(matrix.rows))
    report.nonfinite_entries = [(int(r), int(c)) for r, c in bad]

    if matrix.count and not report.nonfinite_entries:
        norms = np.linalg.norm(matrix.rows.astype(np.float64), axis=1)
        off = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOLERANCE)
        report.norm_deviations = [(int(r), float(norms[r])) for r in off]

    return report


def payload_checksum(rows: np.ndarray) -> str:
    """SHA-256 hex digest of the row-major float32 little-endian payload."""
    data = np.ascontiguousarray(rows.astype(np.float32, copy=False))
    if data.dtype.byteorder == ">":
        data = data.astype("<f4")
    return hashlib.sha256(data.tobytes()).hexdigest()


def manifest_path(store_path: Path | str) -> Path:
    p = Path(store_path)
    return p.with_name(p.name + ".manifest.json")


def write_embeddings(matrix: EmbeddingMatrix, manifest: Manifest, destination: Path | str) -> Path:
    """Serialize one matrix plus its manifest sidecar; returns the store path.

    The manifest's checksum is recomputed from the payload being written; a
    missing created_at is stamped with the current UTC time. Round-trip
    guarantee: ``read_embeddings(write_embeddings(m))`` is bit-identical to m.
    """
    if len(set(matrix.ids)) != len(matrix.ids):
        seen: set[str] = set()
        dupes: set[str] = set()
        for i in matrix.ids:
            (dupes if i in seen else seen).add(i)
        raise InvalidMatrix(f"duplicate ids: {sorted(dupes)}")
    if matrix.side != manifest.side:
        raise InvalidMatrix(f"matrix side {matrix.side.value!r} != manifest side {manifest.side.value!r}")

    manifest = replace(
        manifest,
        checksum=payload_checksum(matrix.rows),
        created_at=manifest.created_at or datetime.now(timezone.utc).isoformat(),
    )

    destination = Path(destination)
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, _SIDE_BYTE[matrix.side], matrix.dim, matrix.count)]
    for identifier in matrix.ids:
        raw = identifier.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes())

    try:
        destination.write_bytes(b"".join(parts))
        manifest_path(destination).write_text(
            json.dumps(manifest.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc
    return destination


def read_embeddings(source: Path | str) -> tuple[EmbeddingMatrix, Manifest]:
    """Parse a store file, verify its checksum, and return matrix + manifest."""
    source = Path(source)
    try:
        blob = source.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {source}: {exc}") from exc

    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagic(f"{source} does not start with {MAGIC!r}")
    if len(blob) < _HEADER.size:
        raise TruncatedPayload(f"{source}: header cut short at {len(blob)} bytes")
    _, version, side_byte, dim, count = _HEADER.unpack_from(blob, 0)
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{source}: format version {version}, expected {FORMAT_VERSION}")
    if side_byte not in _BYTE_SIDE:
        raise InvalidMatrix(f"{source}: unknown side byte {side_byte}")

    offset = _HEADER.size
    ids: list[str] = []
    for _ in range(count):
        if offset + 4 > len(blob):
            raise TruncatedPayload(f"{source}: id table cut short at byte {offset}")
        (length,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        if offset + length > len(blob):
            raise TruncatedPayload(f"{source}: id table cut short at byte {offset}")
        try:
            ids.append(blob[offset : offset + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise InvalidMatrix(f"{source}: id {len(ids)} is not valid UTF-8") from exc
        offset += length

    expected = count * dim * 4
    payload = blob[offset:]
    if len(payload) < expected:
        raise TruncatedPayload(f"{source}: payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise InvalidMatrix(f"{source}: {len(payload) - expected} trailing bytes after payload")

    rows = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    matrix = EmbeddingMatrix(ids=ids, rows=rows, side=_BYTE_SIDE[side_byte])

    sidecar = manifest_path(source)
    try:
        manifest = Manifest.from_json_dict(json.loads(sidecar.read_text(encoding="utf-8")))
    except OSError as exc:
        raise IoFailure(f"manifest sidecar missing: {sidecar}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise IoFailure(f"manifest sidecar unreadable: {sidecar}: {exc}") from exc

    actual = payload_checksum(matrix.rows)
    if manifest.checksum != actual:
        raise ChecksumMismatch(f"{source}: manifest says {manifest.checksum[:12]}..., payload hashes to {actual[:12]}...")
    if manifest.side != matrix.side:
        raise InvalidMatrix(f"{source}: manifest side {manifest.side.value!r} != store side {matrix.side.value!r}")

    return matrix, manifest
