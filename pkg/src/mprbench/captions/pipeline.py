"""Catalog caption refinement: prompt construction, the pass/fail audit, and
the seeded sampling used for two-pass review.

Raw catalog descriptions routinely blow through the text encoder's token
window, truncating exactly the attributes that separate look-alike products.
The refinement prompt asks for a compact rewrite that starts with a fixed
prefix and keeps the visual attributes; the audit then checks each caption
mechanically: token budget respected, prefix present, every declared
attribute retained (case-insensitive substring over normalized text).
Audits are pure functions; identical inputs always produce identical audits.
"""

from __future__ import annotations

import csv
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .bpe import DEFAULT_BUDGET, BpeVocabulary, count_tokens

REQUIRED_PREFIX = "The product is"

ROLE_LINE = "You are a helpful assistant that generates descriptions for grocery products."
TASK_LINE = 'Generate a concise product description in ≤{budget} tokens given the product metadata. Output a JSON object with key "label".'
CONSTRAINT_PREFIX = 'Start with "The product is ..." in every description.'
CONSTRAINT_ATTRIBUTES = (
    "Prioritize prominent visual attributes from the tag description "
    "including color, shape, brand, size, packaging, and form."
)


class CaptionError(Exception):
    pass


class EmptyMetadata(CaptionError):
    pass


@dataclass(frozen=True)
class ProductMetadata:
    """One catalog entry: identifiers, source text, declared attributes."""

    sku_id: str
    raw_description: str
    tag_description: str = ""
    attributes: dict[str, str] = field(default_factory=dict)  # e.g. {"brand": "Hershey's"}

    def __post_init__(self):
        if not self.sku_id:
            raise EmptyMetadata("sku_id must be non-empty")
        if not self.raw_description:
            raise EmptyMetadata(f"sku {self.sku_id}: raw_description must be non-empty")


@dataclass(frozen=True)
class CaptionJob:
    """A fully rendered request for one product's refined caption."""

    metadata: ProductMetadata
    prompt: str
    token_budget: int = DEFAULT_BUDGET

    def messages(self) -> list[dict[str, str]]:
        """Chat messages: the role line as system, the rest as user content."""
        _, _, user = self.prompt.partition("\n\n")
        return [
            {"role": "system", "content": ROLE_LINE},
            {"role": "user", "content": user},
        ]


@dataclass(frozen=True)
class CaptionAudit:
    """Pass/fail record for one synthesized caption.

    pass_ holds exactly when the token budget, the prefix rule, and full
    attribute retention all hold.
    """

    sku_id: str
    caption: str
    token_count: int
    token_compliant: bool
    prefix_ok: bool
    retained_attributes: dict[str, str]
    missing_attributes: dict[str, str]
    pass_: bool

    def to_json_dict(self) -> dict:
        return {
            "sku_id": self.sku_id,
            "caption": self.caption,
            "token_count": self.token_count,
            "token_compliant": self.token_compliant,
            "prefix_ok": self.prefix_ok,
            "retained_attributes": self.retained_attributes,
            "missing_attributes": self.missing_attributes,
            "pass": self.pass_,
        }


def build_prompt(metadata: ProductMetadata, token_budget: int = DEFAULT_BUDGET) -> CaptionJob:
    """Render the refinement prompt for one product."""
    if token_budget <= 0:
        raise EmptyMetadata(f"token_budget must be positive, got {token_budget}")
    sections = [
        ROLE_LINE,
        TASK_LINE.format(budget=token_budget),
        "Constraints:\n- " + CONSTRAINT_PREFIX + "\n- " + CONSTRAINT_ATTRIBUTES,
        f"Product description: {metadata.raw_description}",
        f"Tag description: {metadata.tag_description}",
    ]
    return CaptionJob(metadata=metadata, prompt="\n\n".join(sections), token_budget=token_budget)


def _normalize(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip().lower()


def audit_caption(
    caption: str,
    metadata: ProductMetadata,
    token_budget: int = DEFAULT_BUDGET,
    vocabulary: BpeVocabulary | None = None,
) -> CaptionAudit:
    """Score one caption against the three mechanical checks."""
    tokens = count_tokens(caption, vocabulary)
    token_compliant = tokens <= token_budget
    prefix_ok = caption.startswith(REQUIRED_PREFIX)

    haystack = _normalize(caption)
    retained, missing = {}, {}
    for key, value in metadata.attributes.items():
        (retained if _normalize(value) in haystack else missing)[key] = value

    return CaptionAudit(
        sku_id=metadata.sku_id,
        caption=caption,
        token_count=tokens,
        token_compliant=token_compliant,
        prefix_ok=prefix_ok,
        retained_attributes=retained,
        missing_attributes=missing,
        pass_=token_compliant and prefix_ok and not missing,
    )


def sample_for_review(items: list, sample_size: int, seed: int) -> list:
    """Seeded catalog subsample; run twice with different seeds for two passes."""
    if sample_size > len(items):
        raise ValueError(f"sample_size {sample_size} exceeds catalog size {len(items)}")
    return random.Random(seed).sample(items, sample_size)


def read_catalog(path: Path | str) -> list[ProductMetadata]:
    """Load a catalog from CSV or JSON-lines (by suffix).

    Columns: sku_id, raw_description, tag_description, and optionally
    attributes (a JSON object in CSV, a plain object in JSON-lines).
    """
    path = Path(path)
    records: list[dict] = []
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(json.loads(line))
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                if isinstance(rec.get("attributes"), str) and rec["attributes"].strip():
                    rec = dict(rec, attributes=json.loads(rec["attributes"]))
                records.append(rec)

    catalog = []
    for rec in records:
        catalog.append(
            ProductMetadata(
                sku_id=str(rec["sku_id"]),
                raw_description=rec.get("raw_description", ""),
                tag_description=rec.get("tag_description", "") or "",
                attributes=dict(rec.get("attributes") or {}),
            )
        )
    return catalog


def write_captions(path: Path | str, rows: list[dict]) -> None:
    """JSON-lines output: one record per catalog row, caption or error."""
    lines = [json.dumps(row, sort_keys=True, ensure_ascii=False) for row in rows]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def write_audits(path: Path | str, audits: list[CaptionAudit]) -> None:
    write_captions(path, [a.to_json_dict() for a in audits])
