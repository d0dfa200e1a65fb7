"""Record backend interactions during live runs and replay them offline."""

from .canonical import REDACTED, canonicalize_request, normalize_body, request_digest
from .service import RecordingProxy, ReplayService, serve_replay
from .simulator import SimulatedBackend, simulate_backend
from .transcript import (
    HttpRequest,
    HttpResponse,
    InteractionRecord,
    InteractionTranscript,
    ReplayCursor,
    record,
    replay_lookup,
)

__all__ = [
    "REDACTED",
    "HttpRequest",
    "HttpResponse",
    "InteractionRecord",
    "InteractionTranscript",
    "RecordingProxy",
    "ReplayCursor",
    "ReplayService",
    "SimulatedBackend",
    "canonicalize_request",
    "normalize_body",
    "record",
    "replay_lookup",
    "request_digest",
    "serve_replay",
    "simulate_backend",
]
