"""HTTP client for the external chat-completion captioner.

Sends the rendered prompt as system/user messages, expects the assistant
content to parse as a JSON object with a "label" key, and retries transport
failures and malformed bodies with exponential backoff. Requests default to
temperature zero so reruns are as deterministic as the endpoint allows.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

from .pipeline import CaptionJob, ProductMetadata, build_prompt


class ClientError(Exception):
    pass


class EndpointUnreachable(ClientError):
    pass


class MalformedResponse(ClientError):
    pass


class MissingLabelKey(ClientError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str = "captioner"
    api_token: str | None = None
    max_attempts: int = 3
    timeout_s: float = 30.0
    backoff_s: float = 0.5
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError(f"max_attempts must be at least 1, got {self.max_attempts}")


def request_caption(job: CaptionJob, config: EndpointConfig) -> str:
    """Fetch one caption; raises after ``max_attempts`` failed tries.

    Failure classes, in reporting priority: EndpointUnreachable for
    transport errors, MissingLabelKey when the body parses but lacks the
    key, MalformedResponse for everything else.
    """
    headers = {"Content-Type": "application/json"}
    if config.api_token:
        headers["Authorization"] = f"Bearer {config.api_token}"
    payload = {
        "model": config.model,
        "messages": job.messages(),
        "temperature": config.temperature,
    }

    failure: type[ClientError] = EndpointUnreachable
    detail = ""
    for attempt in range(config.max_attempts):
        if attempt:
            time.sleep(config.backoff_s * 2 ** (attempt - 1))
        try:
            response = requests.post(config.url, json=payload, headers=headers, timeout=config.timeout_s)
            response.raise_for_status()
        except requests.RequestException as exc:
            failure, detail = EndpointUnreachable, str(exc)
            continue
        try:
            content = response.json()["choices"][0]["message"]["content"]
            parsed = json.loads(content)
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            failure, detail = MalformedResponse, f"cannot parse response body: {exc}"
            continue
        if not isinstance(parsed, dict) or "label" not in parsed:
            failure = MissingLabelKey
            detail = f"assistant JSON lacks 'label' key: {sorted(parsed) if isinstance(parsed, dict) else type(parsed).__name__}"
            continue
        return str(parsed["label"])

    raise failure(f"{config.url} after {config.max_attempts} attempts: {detail}")


def caption_catalog(
    catalog: list[ProductMetadata],
    config: EndpointConfig,
    token_budget: int,
    workers: int = 1,
) -> list[dict]:
    """Caption every catalog row with bounded concurrency.

    Per-row failures are recorded, not raised; output order matches input.
    Each row dict carries sku_id plus either caption or error/error_kind.
    """

    def one(meta: ProductMetadata) -> dict:
        try:
            caption = request_caption(build_prompt(meta, token_budget), config)
            return {"sku_id": meta.sku_id, "caption": caption}
        except ClientError as exc:
            return {"sku_id": meta.sku_id, "caption": None, "error": str(exc), "error_kind": type(exc).__name__}

    if workers <= 1:
        return [one(meta) for meta in catalog]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, catalog))
