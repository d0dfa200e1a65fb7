"""Canonical request form used as the replay matching key."""

from __future__ import annotations

import hashlib
import json
from typing import Any, Iterable

REDACTED = "«REDACTED»"
_REDACTED_BYTES = REDACTED.encode("utf-8")


def _ordered(values: Iterable[str]) -> list[str]:
    # longest first so a value that contains another is replaced whole
    return sorted({v for v in values if v}, key=lambda v: (-len(v), v))


def redact_text(text: str, credential_values: Iterable[str]) -> str:
    for value in _ordered(credential_values):
        text = text.replace(value, REDACTED)
    return text


def redact_bytes(data: bytes, credential_values: Iterable[str]) -> bytes:
    for value in _ordered(credential_values):
        data = data.replace(value.encode("utf-8"), _REDACTED_BYTES)
    return data


def _redact_json(node: Any, values: list[str]) -> Any:
    if isinstance(node, str):
        return redact_text(node, values)
    if isinstance(node, list):
        return [_redact_json(v, values) for v in node]
    if isinstance(node, dict):
        return {redact_text(k, values): _redact_json(v, values) for k, v in node.items()}
    return node


def normalize_body(body: bytes, credential_values: Iterable[str] = ()) -> bytes:
    """Key-sorted, whitespace-free JSON when ``body`` parses as JSON; raw bytes otherwise.

    Credential values are replaced by the redaction marker in either case.
    """
    values = _ordered(credential_values)
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, ValueError):
        return redact_bytes(body, values)
    doc = _redact_json(doc, values)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def canonicalize_request(
    method: str,
    path: str,
    headers: Iterable[tuple[str, str]] = (),
    body: bytes = b"",
    credential_values: Iterable[str] = (),
) -> bytes:
    """``method \\n path \\n normalized-body``; headers never take part."""
    del headers  # volatile auth/trace headers would break matching
    values = _ordered(credential_values)
    return b"\n".join([
        method.encode("utf-8"),
        redact_text(path, values).encode("utf-8"),
        normalize_body(body, values),
    ])


def request_digest(canonical: bytes) -> str:
    return hashlib.sha256(canonical).hexdigest()
