"""Interaction transcripts: recording, serialization and sealed replay lookup."""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass, field
from typing import Iterable

from .. import __version__
from ..errors import (
    DigestExhausted,
    TranscriptFormatError,
    TranscriptNotSealed,
    TranscriptSealed,
    UnmatchedRequest,
)
from .canonical import (
    REDACTED,
    canonicalize_request,
    normalize_body,
    redact_bytes,
    redact_text,
    request_digest,
)

TRANSCRIPT_FIELDS = ("seq", "method", "path", "digest", "status", "content_type", "body_b64")


@dataclass(frozen=True)
class HttpRequest:
    method: str
    path: str
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes = b""


@dataclass(frozen=True)
class HttpResponse:
    status: int
    body: bytes = b""
    content_type: str = "application/octet-stream"


@dataclass(frozen=True)
class StoredRequest:
    method: str
    path: str
    # only known for records made in this process; not part of the file format
    canonical_body: bytes | None = None


@dataclass(frozen=True)
class InteractionRecord:
    seq: int
    request: StoredRequest
    request_digest: str
    response: HttpResponse

    def to_json(self) -> str:
        return json.dumps({
            "seq": self.seq,
            "method": self.request.method,
            "path": self.request.path,
            "digest": self.request_digest,
            "status": self.response.status,
            "content_type": self.response.content_type,
            "body_b64": base64.b64encode(self.response.body).decode("ascii"),
        }, ensure_ascii=False, separators=(",", ":"))


@dataclass
class InteractionTranscript:
    backend_kind: str = "http"
    tool_version: str = __version__
    records: list[InteractionRecord] = field(default_factory=list)
    sealed: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def seal(self) -> "InteractionTranscript":
        self.sealed = True
        return self

    def to_jsonl(self) -> bytes:
        return "".join(r.to_json() + "\n" for r in self.records).encode("utf-8")

    @classmethod
    def from_jsonl(cls, data: bytes, backend_kind: str = "http") -> "InteractionTranscript":
        """Parse a transcript file; the result is sealed for replay."""
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TranscriptFormatError(f"transcript is not UTF-8: {exc}") from None
        records = []
        for line_no, line in enumerate(text.split("\n"), start=1):
            if not line:
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise TranscriptFormatError(f"line {line_no}: {exc}") from None
            if not isinstance(obj, dict) or set(obj) != set(TRANSCRIPT_FIELDS):
                raise TranscriptFormatError(
                    f"line {line_no}: expected exactly the fields {', '.join(TRANSCRIPT_FIELDS)}")
            if obj["seq"] != len(records):
                raise TranscriptFormatError(f"line {line_no}: seq {obj['seq']} out of order")
            if not isinstance(obj["status"], int) or not isinstance(obj["method"], str) \
                    or not isinstance(obj["path"], str) or not isinstance(obj["content_type"], str) \
                    or not isinstance(obj["digest"], str) or len(obj["digest"]) != 64:
                raise TranscriptFormatError(f"line {line_no}: malformed field types")
            try:
                body = base64.b64decode(obj["body_b64"], validate=True)
            except (ValueError, TypeError):
                raise TranscriptFormatError(f"line {line_no}: body_b64 is not base64") from None
            records.append(InteractionRecord(
                seq=obj["seq"],
                request=StoredRequest(obj["method"], obj["path"]),
                request_digest=obj["digest"],
                response=HttpResponse(obj["status"], body, obj["content_type"]),
            ))
        return cls(backend_kind=backend_kind, records=records, sealed=True)


def record(
    t: InteractionTranscript,
    request: HttpRequest,
    response: HttpResponse,
    credential_values: Iterable[str] = (),
) -> InteractionTranscript:
    """Append one redacted interaction to ``t`` and return it."""
    if t.sealed:
        raise TranscriptSealed("transcript is sealed for replay; recording is not allowed")
    values = list(credential_values)
    canonical = canonicalize_request(request.method, request.path, request.headers, request.body, values)
    stored_request = StoredRequest(
        method=request.method,
        path=redact_text(request.path, values),
        canonical_body=normalize_body(request.body, values),
    )
    stored_response = HttpResponse(
        status=response.status,
        body=redact_bytes(response.body, values),
        content_type=redact_text(response.content_type, values),
    )
    t.records.append(InteractionRecord(len(t.records), stored_request, request_digest(canonical), stored_response))
    return t


class ReplayCursor:
    """Per-digest position into a sealed transcript; safe to share between threads."""

    def __init__(self, t: InteractionTranscript) -> None:
        if not t.sealed:
            raise TranscriptNotSealed("replay needs a sealed transcript")
        self.transcript = t
        self._index: dict[str, list[InteractionRecord]] = {}
        for r in t.records:
            self._index.setdefault(r.request_digest, []).append(r)
        self._next: dict[str, int] = {}
        self._lock = threading.Lock()

    def take(self, digest: str) -> InteractionRecord:
        recorded = self._index.get(digest)
        if recorded is None:
            raise UnmatchedRequest(digest)
        with self._lock:
            pos = self._next.get(digest, 0)
            if pos >= len(recorded):
                raise DigestExhausted(digest, len(recorded))
            self._next[digest] = pos + 1
        return recorded[pos]

    def served(self) -> int:
        with self._lock:
            return sum(self._next.values())

    def remaining(self) -> int:
        return len(self.transcript.records) - self.served()


def replay_lookup(t: InteractionTranscript, request: HttpRequest, cursor: ReplayCursor) -> HttpResponse:
    if not t.sealed:
        raise TranscriptNotSealed("replay needs a sealed transcript")
    if cursor.transcript is not t:
        raise ValueError("cursor belongs to a different transcript")
    canonical = canonicalize_request(request.method, request.path, request.headers, request.body)
    return cursor.take(request_digest(canonical)).response


__all__ = [
    "REDACTED",
    "HttpRequest",
    "HttpResponse",
    "InteractionRecord",
    "InteractionTranscript",
    "ReplayCursor",
    "StoredRequest",
    "record",
    "replay_lookup",
]
