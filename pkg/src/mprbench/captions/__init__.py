"""Catalog caption refinement: tokenizer, prompt/audit pipeline, endpoint client."""

from .bpe import (
    DEFAULT_BUDGET,
    BpeVocabulary,
    VocabularyMissing,
    count_tokens,
    default_vocabulary,
)
from .client import (
    ClientError,
    EndpointConfig,
    EndpointUnreachable,
    MalformedResponse,
    MissingLabelKey,
    caption_catalog,
    request_caption,
)
from .pipeline import (
    REQUIRED_PREFIX,
    CaptionAudit,
    CaptionJob,
    EmptyMetadata,
    ProductMetadata,
    audit_caption,
    build_prompt,
    read_catalog,
    sample_for_review,
    write_audits,
    write_captions,
)

__all__ = [
    "DEFAULT_BUDGET",
    "BpeVocabulary",
    "VocabularyMissing",
    "count_tokens",
    "default_vocabulary",
    "ClientError",
    "EndpointConfig",
    "EndpointUnreachable",
    "MalformedResponse",
    "MissingLabelKey",
    "caption_catalog",
    "request_caption",
    "REQUIRED_PREFIX",
    "CaptionAudit",
    "CaptionJob",
    "EmptyMetadata",
    "ProductMetadata",
    "audit_caption",
    "build_prompt",
    "read_catalog",
    "sample_for_review",
    "write_audits",
    "write_captions",
]
