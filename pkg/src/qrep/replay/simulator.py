"""Seeded stand-in for a cloud quantum backend.

``simulate_backend`` turns a job description into a pseudo-measurement
histogram.  Randomness comes from SHA-256 in counter mode so the output is
stable across Python versions and platforms.

Run ``python -m qrep.replay.simulator --port 8765 --seed 7`` to serve it over
HTTP (``GET /calibration``, ``POST /jobs``).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import threading
from bisect import bisect_right
from itertools import accumulate

from .service import DEFAULT_ADDRESS, BackgroundService
from .transcript import HttpRequest, HttpResponse

MAX_QUBITS = 12
DEFAULT_QUBITS = 2
DEFAULT_SHOTS = 1024
MAX_SHOTS = 1 << 20
_U64 = (1 << 64) - 1


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _clamp_int(value, default: int, lo: int, hi: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        return default
    return max(lo, min(hi, value))


def simulate_backend(job: bytes, seed: int) -> bytes:
    seed &= _U64
    job_digest = hashlib.sha256(job).hexdigest()
    if not job.strip():
        return _dumps({"backend": "qrep-simulator", "counts": {}, "job_digest": job_digest,
                       "qubits": 0, "seed": seed, "shots": 0})
    try:
        spec = json.loads(job.decode("utf-8"))
    except (UnicodeDecodeError, ValueError):
        spec = None
    if not isinstance(spec, dict):
        spec = {}
    qubits = _clamp_int(spec.get("qubits"), DEFAULT_QUBITS, 1, MAX_QUBITS)
    shots = _clamp_int(spec.get("shots"), DEFAULT_SHOTS, 0, MAX_SHOTS)

    key = hashlib.sha256(b"qrep-sim\0" + seed.to_bytes(8, "big") + job).digest()
    # squared hash bytes give a peaked, circuit-specific distribution
    weights = [hashlib.sha256(key + b"w" + b.to_bytes(4, "big")).digest()[0] ** 2 + 1
               for b in range(1 << qubits)]
    cumulative = list(accumulate(weights))
    total = cumulative[-1]
    counts: dict[str, int] = {}
    for shot in range(shots):
        x = int.from_bytes(hashlib.sha256(key + b"s" + shot.to_bytes(8, "big")).digest()[:8], "big")
        state = bisect_right(cumulative, (x * total) >> 64)
        label = format(state, f"0{qubits}b")
        counts[label] = counts.get(label, 0) + 1
    return _dumps({"backend": "qrep-simulator", "counts": counts, "job_digest": job_digest,
                   "qubits": qubits, "seed": seed, "shots": shots})


def calibration(seed: int, qubits: int = 8) -> bytes:
    seed &= _U64
    h = hashlib.sha256(b"qrep-cal\0" + seed.to_bytes(8, "big")).digest()
    return _dumps({
        "machine_id": f"qrep-simulator-{seed}",
        "qubits": qubits,
        "topology": [[i, i + 1] for i in range(qubits - 1)] + [[0, qubits - 1]],
        "programming_us": 1000 + h[0],
        "initialisation_us": 100 + h[1],
        "readout_us": 50 + h[2],
    })


class SimulatedBackend(BackgroundService):
    """HTTP front for ``simulate_backend``.

    Each accepted job uses seed ``base_seed + n`` where ``n`` counts prior
    submissions, so identical jobs submitted twice sample different results,
    as on real hardware.
    """

    def __init__(self, seed: int = 0, token: str | None = None, address=DEFAULT_ADDRESS) -> None:
        self.seed = seed & _U64
        self.token = token
        self.submissions = 0
        self._lock = threading.Lock()
        super().__init__(self._respond, address)

    def _authorized(self, request: HttpRequest) -> bool:
        if self.token is None:
            return True
        headers = {k.lower(): v for k, v in request.headers}
        return headers.get("authorization") == f"Bearer {self.token}"

    def _respond(self, request: HttpRequest) -> HttpResponse:
        if not self._authorized(request):
            return HttpResponse(401, _dumps({"error": "missing or invalid token"}), "application/json")
        path = request.path.split("?", 1)[0]
        if request.method == "GET" and path == "/calibration":
            return HttpResponse(200, calibration(self.seed), "application/json")
        if request.method == "POST" and path == "/jobs":
            with self._lock:
                n = self.submissions
                self.submissions += 1
            return HttpResponse(200, simulate_backend(request.body, self.seed + n), "application/json")
        return HttpResponse(404, _dumps({"error": f"no route for {request.method} {path}"}),
                            "application/json")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="python -m qrep.replay.simulator",
                                     description="Serve the seeded simulated quantum backend.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--token-env", metavar="ENVVAR",
                        help="require 'Authorization: Bearer <value of ENVVAR>'")
    args = parser.parse_args(argv)
    token = None
    if args.token_env:
        token = os.environ.get(args.token_env)
        if not token:
            parser.error(f"environment variable {args.token_env} is not set")
    service = SimulatedBackend(args.seed, token, (args.host, args.port))
    print(service.url, flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        service.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
