"""``qrep`` command line: init, generate, record, replay, verify, pack, audit.

Exit codes: 0 success, 1 I/O, 2 validation or parse error, 3 missing
credential environment variable, 4 backend unreachable, 5 no transcript.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import socket
import subprocess
import sys
import tempfile
from pathlib import Path
from urllib.parse import urlsplit

from . import __version__, audit
from .errors import CorpusError, CorruptArchive, GenerationError, ManifestError, QrepError, TranscriptFormatError
from .generator import DISPATCHER_NAME, TRANSCRIPT_PATH, generate_package
from .manifest import MANIFEST_NAME, parse_manifest, validate_manifest
from .packager import CHECKSUM_NAME, build_archive, package_id, read_archive, verify_tree_checksums
from .replay.canonical import REDACTED
from .replay.service import RecordingProxy, serve_replay
from .replay.transcript import InteractionTranscript
from .tree import PackageTree
from .verifier import verify_gold_standard

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_CREDENTIALS = 3
EXIT_BACKEND = 4
EXIT_NO_TRANSCRIPT = 5


def _err(message: str) -> None:
    print(f"qrep: {message}", file=sys.stderr)


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_workspace(root: Path, manifest) -> dict[str, bytes]:
    """Files covered by the manifest's artifacts, keyed by path relative to ``root``."""
    workspace: dict[str, bytes] = {}
    for a in manifest.artifacts:
        target = root.joinpath(*a.path.split("/"))
        if target.is_file():
            workspace[a.path] = target.read_bytes()
        elif target.is_dir():
            for sub in PackageTree.read_from(target).paths():
                workspace[f"{a.path}/{sub}"] = target.joinpath(*sub.split("/")).read_bytes()
    return workspace


def _load_manifest_file(path: Path):
    return parse_manifest(path.read_bytes())


# init ----------------------------------------------------------------------

def _skeleton(name: str) -> str:
    doc = {
        "//": "qrep project manifest. Keys starting with // are comments. Paths are relative to this file.",
        "name": name,
        "artifacts": [],
        "//artifacts": "list of {id, kind: source|data|config|results, path}",
        "pipeline": [
            {"kind": "build", "command": "echo 'replace with your build command'",
             "description": "Prepare inputs and compile code."},
            {"kind": "run", "command": "echo 'replace with your experiment command'",
             "description": "Run the experiment on the quantum backend."},
            {"kind": "analyze", "command": "echo 'replace with your analysis command'",
             "description": "Evaluate measurements and produce figures and tables."},
        ],
        "backends": [],
        "//backends": "list of {kind: dwave|ibmq|simulator|http, url}",
        "credentials": [],
        "//credentials": "environment variable NAMES only, never values",
        "environment": {"base_image": "python:3.11-slim", "install": []},
        "provenance": {
            "machine_id": "",
            "input_generation": "",
            "qbit_count": 0,
            "topology": [],
            "input_transformations": "",
            "embedding_method": "",
            "postprocessing": "",
            "timings": {"programming_us": None, "initialisation_us": None, "readout_us": None},
            "runtime_measurement": "",
            "heuristics": "",
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def cmd_init(args) -> int:
    directory = Path(args.directory)
    target = directory / MANIFEST_NAME
    if target.exists():
        _err(f"ManifestExists: {target} already exists; not overwriting")
        return EXIT_INVALID
    name = re.sub(r"[^A-Za-z0-9_-]+", "-", directory.resolve().name).strip("-") or "experiment"
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with open(target, "x", encoding="utf-8") as fh:
            fh.write(_skeleton(name))
    except FileExistsError:
        _err(f"ManifestExists: {target} already exists; not overwriting")
        return EXIT_INVALID
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    _err(f"wrote {target}")
    return EXIT_OK


# generate ------------------------------------------------------------------

def cmd_generate(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        manifest = _load_manifest_file(manifest_path)
        workspace = _read_workspace(manifest_path.parent, manifest)
        transcript = None
        if args.transcript:
            transcript = InteractionTranscript.from_jsonl(Path(args.transcript).read_bytes())
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    except (ManifestError, TranscriptFormatError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID

    report = validate_manifest(manifest, workspace)
    if not report.valid:
        for finding in report.findings:
            print(str(finding), file=sys.stderr)
        return EXIT_INVALID
    try:
        tree = generate_package(manifest, None, workspace, transcript)
    except GenerationError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID

    out = Path(args.out)
    try:
        if out.exists():
            stale = sorted(set(PackageTree.read_from(out).paths()) - set(tree.paths()) - {CHECKSUM_NAME})
            for path in stale:
                _err(f"warning: {out / path} is not part of the generated package")
        tree.write_to(out)
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    print(package_id(tree))
    return EXIT_OK


# record --------------------------------------------------------------------

def _backend_reachable(url: str, timeout: float = 5.0) -> bool:
    parts = urlsplit(url)
    port = parts.port or (443 if parts.scheme == "https" else 80)
    try:
        with socket.create_connection((parts.hostname, port), timeout=timeout):
            return True
    except OSError:
        return False


def cmd_record(args) -> int:
    manifest_path = Path(args.manifest)
    try:
        manifest = _load_manifest_file(manifest_path)
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    except ManifestError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID

    mapping = {name: name for name in manifest.credentials}
    for item in args.credential:
        name, sep, envvar = item.partition("=")
        if not sep or not name or not envvar:
            _err(f"--credential expects NAME=ENVVAR, got {item!r}")
            return EXIT_INVALID
        if name not in mapping:
            _err(f"--credential {name}: not a credential declared in {MANIFEST_NAME}")
            return EXIT_INVALID
        mapping[name] = envvar
    values: dict[str, str] = {}
    for name, envvar in mapping.items():
        value = os.environ.get(envvar)
        if not value:
            _err(f"MissingCredentialEnv: environment variable {envvar} (credential {name}) is not set")
            return EXIT_CREDENTIALS
        values[name] = value

    backend_url = args.backend_url or (manifest.backends[0].url if manifest.backends else None)
    if not backend_url:
        _err("no --backend-url given and no backend declared in the manifest")
        return EXIT_INVALID
    if not _backend_reachable(backend_url):
        _err(f"BackendUnreachable: {backend_url}")
        return EXIT_BACKEND

    # build steps produce the inputs the run steps submit
    run_steps = [s for s in manifest.pipeline if s.kind.value in ("build", "run")]
    kind = manifest.backends[0].kind if manifest.backends else "http"
    transcript = InteractionTranscript(backend_kind=kind)
    secret_values = list(values.values())
    with RecordingProxy(backend_url, transcript, secret_values) as proxy:
        env = dict(os.environ)
        env.update(values)
        env.update(QREP_BACKEND_URL=proxy.url, QREP_REPLAY="0")
        for step in run_steps:
            _err(f"recording {step.kind.value} step: {step.command}")
            status = subprocess.run(["/bin/sh", "-c", step.command], cwd=manifest_path.parent or ".",
                                    env=env).returncode
            if status != 0:
                _err(f"run step failed with status {status}; transcript not written")
                return EXIT_IO
        upstream_errors = list(proxy.upstream_errors)
    if upstream_errors:
        for line in upstream_errors[:5]:
            _err(f"BackendUnreachable: {line}")
        return EXIT_BACKEND

    data = transcript.seal().to_jsonl()
    for value in secret_values:
        if value.encode("utf-8") in data:
            raise AssertionError("credential value survived redaction")
    try:
        _write_atomic(Path(args.transcript), data)
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    _err(f"recorded {len(transcript)} interaction(s) to {args.transcript}")
    return EXIT_OK


# replay --------------------------------------------------------------------

def cmd_replay(args) -> int:
    package = Path(args.package)
    transcript_file = package.joinpath(*TRANSCRIPT_PATH.split("/"))
    if not transcript_file.is_file():
        _err(f"NoTranscript: {transcript_file} not found")
        return EXIT_NO_TRANSCRIPT
    try:
        transcript = InteractionTranscript.from_jsonl(transcript_file.read_bytes())
        manifest_file = package / MANIFEST_NAME
        credentials = parse_manifest(manifest_file.read_bytes()).credentials if manifest_file.exists() else ()
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    except (ManifestError, TranscriptFormatError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID

    try:
        service = serve_replay(transcript, ("127.0.0.1", args.port))
    except QrepError as exc:
        _err(f"BindFailure: {exc}")
        return EXIT_IO
    with service:
        env = dict(os.environ)
        # requests carrying the credential then canonicalize exactly as recorded
        env.update({name: REDACTED for name in credentials})
        env.update(QREP_REPLAY="1", QREP_BACKEND_URL=service.url)
        _err(f"replaying {len(transcript)} interaction(s) at {service.url}")
        status = subprocess.run(["/bin/sh", str(package / DISPATCHER_NAME)], cwd=package, env=env).returncode
        _err(f"served {service.cursor.served()} of {len(transcript)} recorded interaction(s)")
        if service.failures:
            _err(f"{len(service.failures)} request(s) diverged from the recording (answered 410)")
    return status


# verify --------------------------------------------------------------------

def cmd_verify(args) -> int:
    target = Path(args.target)
    try:
        if target.is_dir():
            tree = PackageTree.read_from(target)
        else:
            tree = read_archive(target.read_bytes())
    except (OSError, CorruptArchive, ValueError) as exc:
        _err(f"unreadable input: {exc}")
        return EXIT_IO

    status = EXIT_OK
    try:
        checksums = verify_tree_checksums(tree)
    except CorruptArchive as exc:
        _err(str(exc))
        return EXIT_IO
    if not target.is_dir() or CHECKSUM_NAME in tree:
        for line in checksums.lines():
            _err(line)
        if not checksums.ok:
            status = EXIT_INVALID
    if CHECKSUM_NAME in tree:
        tree = tree.copy()
        tree.remove(CHECKSUM_NAME)

    report = verify_gold_standard(tree)
    sys.stderr.write(report.render())
    sys.stdout.write(report.to_json())
    if not report.overall_pass:
        status = EXIT_INVALID
    return status


# pack ----------------------------------------------------------------------

def cmd_pack(args) -> int:
    package = Path(args.package)
    out = Path(args.out)
    if out.exists() and not args.force:
        _err(f"{out} exists; pass --force to overwrite")
        return EXIT_INVALID
    exclude = [CHECKSUM_NAME]
    try:
        rel = out.resolve().relative_to(package.resolve())
        exclude.append(rel.as_posix())
    except ValueError:
        pass
    try:
        tree = PackageTree.read_from(package, exclude=tuple(exclude))
        data = build_archive(tree)
        _write_atomic(out, data)
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    except QrepError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    print(package_id(tree))
    return EXIT_OK


# audit ---------------------------------------------------------------------

def cmd_audit(args) -> int:
    try:
        if args.corpus:
            records = audit.load_corpus(Path(args.corpus).read_text(encoding="utf-8"))
        else:
            records = audit.load_bundled_corpus()
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_IO
    except (CorpusError, UnicodeDecodeError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    rows = audit.aggregate(records)
    summary = audit.summarize(rows)
    sys.stdout.write(audit.render_table(rows, summary))
    print(f"papers={summary.total_papers} exp={summary.total_exp} "
          f"src={summary.total_src} repro={summary.total_repro}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrep", description="One-click reproduction packages for quantum software experiments.")
    parser.add_argument("--version", action="version", version=f"qrep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", help="write a skeleton qrep.json")
    p.add_argument("directory", nargs="?", default=".")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("generate", help="generate the reproduction package")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--transcript")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("record", help="run the 'run' steps and record backend traffic")
    p.add_argument("manifest")
    p.add_argument("--backend-url")
    p.add_argument("--credential", action="append", default=[], metavar="NAME=ENVVAR")
    p.add_argument("--transcript", required=True)
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("replay", help="run a package offline against its transcript")
    p.add_argument("package")
    p.add_argument("--port", type=int, default=0)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("verify", help="check a package directory or archive")
    p.add_argument("target")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("pack", help="write a deterministic archive of a package")
    p.add_argument("package")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("audit", help="tabulate a publication corpus")
    p.add_argument("corpus", nargs="?", help="corpus CSV (default: bundled survey corpus)")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)
