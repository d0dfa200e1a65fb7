"""HTTP plumbing: the replay service and the recording reverse proxy."""

from __future__ import annotations

import http.client
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Iterable
from urllib.parse import urlsplit

from ..errors import BindFailure, DigestExhausted, ReplayError, UnmatchedRequest
from .canonical import canonicalize_request, request_digest
from .transcript import (
    HttpRequest,
    HttpResponse,
    InteractionTranscript,
    ReplayCursor,
    record,
)

log = logging.getLogger(__name__)

DEFAULT_ADDRESS = ("127.0.0.1", 0)

_HOP_BY_HOP = {
    "connection", "keep-alive", "proxy-authenticate", "proxy-authorization",
    "te", "trailers", "transfer-encoding", "upgrade", "host", "content-length",
}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "qrep"
    sys_version = ""

    # set by the owning service
    respond: Callable[[HttpRequest], HttpResponse]

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        log.debug("%s - %s", self.address_string(), format % args)

    def _read_request(self) -> HttpRequest | None:
        if "chunked" in self.headers.get("Transfer-Encoding", "").lower():
            self._send(HttpResponse(411, b"chunked request bodies are not supported\n", "text/plain"))
            return None
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length else b""
        return HttpRequest(self.command, self.path, tuple(self.headers.items()), body)

    def _send(self, response: HttpResponse) -> None:
        self.send_response(response.status)
        self.send_header("Content-Type", response.content_type)
        self.send_header("Content-Length", str(len(response.body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(response.body)

    def _handle(self) -> None:
        request = self._read_request()
        if request is None:
            return
        try:
            response = self.server.respond(request)  # type: ignore[attr-defined]
        except Exception:  # the service must keep answering
            log.exception("request handler failed")
            response = HttpResponse(500, b"internal error\n", "text/plain")
        self._send(response)

    do_GET = do_POST = do_PUT = do_DELETE = do_PATCH = do_HEAD = do_OPTIONS = _handle


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address, respond: Callable[[HttpRequest], HttpResponse]) -> None:
        self.respond = respond
        super().__init__(address, _Handler)


class BackgroundService:
    """An HTTP server running on a daemon thread; use as a context manager."""

    def __init__(self, respond: Callable[[HttpRequest], HttpResponse], address=DEFAULT_ADDRESS) -> None:
        try:
            self._server = _Server(tuple(address), respond)
        except OSError as exc:
            raise BindFailure(f"cannot bind {address[0]}:{address[1]}: {exc}") from exc
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True,
                                        name=f"qrep-{type(self).__name__}")
        self._thread.start()

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ReplayService(BackgroundService):
    """Answers requests from a sealed transcript; unknown requests get 410."""

    def __init__(self, t: InteractionTranscript, address=DEFAULT_ADDRESS) -> None:
        self.transcript = t
        self.cursor = ReplayCursor(t)
        self.failures: list[ReplayError] = []
        self._failures_lock = threading.Lock()
        super().__init__(self._respond, address)

    def _respond(self, request: HttpRequest) -> HttpResponse:
        digest = request_digest(canonicalize_request(request.method, request.path, (), request.body))
        try:
            return self.cursor.take(digest).response
        except (UnmatchedRequest, DigestExhausted) as exc:
            with self._failures_lock:
                self.failures.append(exc)
            log.warning("%s %s: %s", request.method, request.path, exc)
            return HttpResponse(410, f"qrep replay: {exc}\n".encode("utf-8"), "text/plain; charset=utf-8")


def serve_replay(t: InteractionTranscript, address=DEFAULT_ADDRESS) -> ReplayService:
    return ReplayService(t, address)


class RecordingProxy(BackgroundService):
    """Reverse proxy that forwards to ``upstream`` and records every exchange.

    Clients receive the upstream response unmodified; only the stored copy is
    redacted.
    """

    def __init__(self, upstream: str, transcript: InteractionTranscript,
                 credential_values: Iterable[str] = (), address=DEFAULT_ADDRESS,
                 timeout: float = 60.0) -> None:
        parts = urlsplit(upstream)
        if parts.scheme not in ("http", "https") or not parts.hostname:
            raise ValueError(f"upstream must be an http(s) URL: {upstream!r}")
        self._scheme = parts.scheme
        self._host = parts.hostname
        self._port = parts.port
        self._prefix = parts.path.rstrip("/")
        self._timeout = timeout
        self.transcript = transcript
        self._values = [v for v in credential_values if v]
        self._lock = threading.Lock()
        self.upstream_errors: list[str] = []
        super().__init__(self._respond, address)

    def _connection(self) -> http.client.HTTPConnection:
        cls = http.client.HTTPSConnection if self._scheme == "https" else http.client.HTTPConnection
        return cls(self._host, self._port, timeout=self._timeout)

    def _respond(self, request: HttpRequest) -> HttpResponse:
        headers = {k: v for k, v in request.headers if k.lower() not in _HOP_BY_HOP}
        conn = self._connection()
        try:
            conn.request(request.method, self._prefix + request.path, body=request.body or None,
                         headers=headers)
            upstream = conn.getresponse()
            response = HttpResponse(upstream.status, upstream.read(),
                                    upstream.getheader("Content-Type", "application/octet-stream"))
        except OSError as exc:
            with self._lock:
                self.upstream_errors.append(f"{request.method} {request.path}: {exc}")
            return HttpResponse(502, f"qrep record: upstream unreachable: {exc}\n".encode("utf-8"),
                                "text/plain; charset=utf-8")
        finally:
            conn.close()
        with self._lock:
            record(self.transcript, request, response, self._values)
        return response
