"""The ``qrep.json`` project manifest: parsing, serialization and validation."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import AbstractSet, Any, Mapping

from . import credscan
from .errors import (
    DuplicateArtifactId,
    InvalidField,
    InvalidPath,
    MalformedDocument,
    MissingField,
    UnknownField,
)
from .provenance import HardwareProvenance
from .tree import is_safe_relpath, normalize_relpath

MANIFEST_NAME = "qrep.json"
DEFAULT_BASE_IMAGE = "python:3.11-slim"

_IDENT = re.compile(r"^[A-Za-z0-9_-]+$")
_ENV_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ArtifactKind(str, enum.Enum):
    SOURCE = "source"
    DATA = "data"
    CONFIG = "config"
    RESULTS = "results"


class StepKind(str, enum.Enum):
    BUILD = "build"
    RUN = "run"
    ANALYZE = "analyze"
    PAPER = "paper"


STEP_ORDER = {StepKind.BUILD: 0, StepKind.RUN: 1, StepKind.ANALYZE: 2, StepKind.PAPER: 3}
REQUIRED_STEP_KINDS = (StepKind.BUILD, StepKind.RUN, StepKind.ANALYZE)


@dataclass(frozen=True)
class ArtifactDecl:
    id: str
    kind: ArtifactKind
    path: str

    def to_dict(self) -> dict[str, str]:
        return {"id": self.id, "kind": self.kind.value, "path": self.path}


@dataclass(frozen=True)
class PipelineStep:
    kind: StepKind
    command: str
    description: str = ""

    def to_dict(self) -> dict[str, str]:
        return {"kind": self.kind.value, "command": self.command, "description": self.description}


@dataclass(frozen=True)
class BackendDecl:
    kind: str
    url: str

    def to_dict(self) -> dict[str, str]:
        return {"kind": self.kind, "url": self.url}


@dataclass(frozen=True)
class Environment:
    """Container base image and dependency-install commands for the source recipe."""

    base_image: str = DEFAULT_BASE_IMAGE
    install: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"base_image": self.base_image, "install": list(self.install)}


@dataclass(frozen=True)
class ProjectManifest:
    name: str
    artifacts: tuple[ArtifactDecl, ...]
    pipeline: tuple[PipelineStep, ...]
    backends: tuple[BackendDecl, ...] = ()
    credentials: tuple[str, ...] = ()
    provenance: HardwareProvenance = field(default_factory=HardwareProvenance)
    paper_build: PipelineStep | None = None
    environment: Environment = field(default_factory=Environment)

    def artifact(self, artifact_id: str) -> ArtifactDecl | None:
        for a in self.artifacts:
            if a.id == artifact_id:
                return a
        return None

    def all_steps(self) -> tuple[PipelineStep, ...]:
        return self.pipeline + ((self.paper_build,) if self.paper_build else ())

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "name": self.name,
            "artifacts": [a.to_dict() for a in self.artifacts],
            "pipeline": [s.to_dict() for s in self.pipeline],
            "backends": [b.to_dict() for b in self.backends],
            "credentials": list(self.credentials),
            "environment": self.environment.to_dict(),
            "provenance": self.provenance.to_dict(),
        }
        if self.paper_build is not None:
            doc["paper_build"] = self.paper_build.to_dict()
        return doc


def serialize_manifest(m: ProjectManifest) -> str:
    return json.dumps(m.to_dict(), indent=2, ensure_ascii=False) + "\n"


# parsing -------------------------------------------------------------------

_TOP_LEVEL = {"name", "artifacts", "pipeline", "backends", "credentials",
              "provenance", "paper_build", "environment"}


def _check_keys(obj: Mapping[str, Any], allowed: set[str], where: str) -> None:
    for key in obj:
        # "//"-prefixed keys are comments
        if key.startswith("//"):
            continue
        if key not in allowed:
            raise UnknownField(f"{where}{key}")


def _require(obj: Mapping[str, Any], key: str, where: str = "") -> Any:
    if key not in obj:
        raise MissingField(f"{where}{key}")
    return obj[key]


def _expect(value: Any, typ: type | tuple[type, ...], where: str, what: str) -> Any:
    if not isinstance(value, typ) or isinstance(value, bool) and typ is not bool:
        raise InvalidField(where, f"expected {what}")
    return value


def _parse_step(obj: Any, where: str, default_kind: str | None = None) -> PipelineStep:
    _expect(obj, dict, where, "an object")
    _check_keys(obj, {"kind", "command", "description"}, f"{where}.")
    kind_raw = obj.get("kind", default_kind)
    if kind_raw is None:
        raise MissingField(f"{where}.kind")
    try:
        kind = StepKind(kind_raw)
    except ValueError:
        raise InvalidField(f"{where}.kind", f"one of {[k.value for k in StepKind]}") from None
    command = _expect(_require(obj, "command", f"{where}."), str, f"{where}.command", "a string")
    if not command.strip():
        raise InvalidField(f"{where}.command", "must not be empty")
    description = _expect(obj.get("description", ""), str, f"{where}.description", "a string")
    return PipelineStep(kind, command, description)


def parse_manifest(text: str | bytes) -> ProjectManifest:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"manifest is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedDocument("manifest must be a JSON object")
    _check_keys(doc, _TOP_LEVEL, "")

    name = _expect(_require(doc, "name"), str, "name", "a string")
    if not _IDENT.match(name):
        raise InvalidField("name", "must match [A-Za-z0-9_-]+")

    artifacts = []
    seen_ids: set[str] = set()
    for i, raw in enumerate(_expect(_require(doc, "artifacts"), list, "artifacts", "a list")):
        where = f"artifacts[{i}]"
        _expect(raw, dict, where, "an object")
        _check_keys(raw, {"id", "kind", "path"}, f"{where}.")
        art_id = _expect(_require(raw, "id", f"{where}."), str, f"{where}.id", "a string")
        if not _IDENT.match(art_id):
            raise InvalidField(f"{where}.id", "must match [A-Za-z0-9_-]+")
        if art_id in seen_ids:
            raise DuplicateArtifactId(art_id)
        seen_ids.add(art_id)
        try:
            kind = ArtifactKind(_require(raw, "kind", f"{where}."))
        except ValueError:
            raise InvalidField(f"{where}.kind", f"one of {[k.value for k in ArtifactKind]}") from None
        path = _expect(_require(raw, "path", f"{where}."), str, f"{where}.path", "a string")
        if not is_safe_relpath(path):
            raise InvalidPath(path)
        artifacts.append(ArtifactDecl(art_id, kind, normalize_relpath(path)))

    pipeline = tuple(
        _parse_step(raw, f"pipeline[{i}]")
        for i, raw in enumerate(_expect(_require(doc, "pipeline"), list, "pipeline", "a list"))
    )

    backends = []
    for i, raw in enumerate(_expect(doc.get("backends", []), list, "backends", "a list")):
        where = f"backends[{i}]"
        _expect(raw, dict, where, "an object")
        _check_keys(raw, {"kind", "url"}, f"{where}.")
        kind = _expect(_require(raw, "kind", f"{where}."), str, f"{where}.kind", "a string")
        url = _expect(_require(raw, "url", f"{where}."), str, f"{where}.url", "a string")
        if not re.match(r"^https?://", url):
            raise InvalidField(f"{where}.url", "expected an http(s) URL")
        backends.append(BackendDecl(kind, url))

    credentials = []
    for i, raw in enumerate(_expect(doc.get("credentials", []), list, "credentials", "a list")):
        cred = _expect(raw, str, f"credentials[{i}]", "a string")
        if not _ENV_NAME.match(cred):
            raise InvalidField(f"credentials[{i}]", "must be a valid environment variable name")
        if cred in credentials:
            raise InvalidField(f"credentials[{i}]", f"duplicate credential name {cred}")
        credentials.append(cred)

    provenance = HardwareProvenance.from_dict(doc.get("provenance", {}))

    paper_build = None
    if doc.get("paper_build") is not None:
        paper_build = _parse_step(doc["paper_build"], "paper_build", default_kind="paper")

    env_raw = _expect(doc.get("environment", {}), dict, "environment", "an object")
    _check_keys(env_raw, {"base_image", "install"}, "environment.")
    base_image = _expect(env_raw.get("base_image", DEFAULT_BASE_IMAGE), str,
                         "environment.base_image", "a string")
    install = _expect(env_raw.get("install", []), list, "environment.install", "a list")
    for i, cmd in enumerate(install):
        _expect(cmd, str, f"environment.install[{i}]", "a string")

    return ProjectManifest(
        name=name,
        artifacts=tuple(artifacts),
        pipeline=pipeline,
        backends=tuple(backends),
        credentials=tuple(credentials),
        provenance=provenance,
        paper_build=paper_build,
        environment=Environment(base_image, tuple(install)),
    )


# validation ----------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def valid(self) -> bool:
        return not self.findings

    def codes(self) -> list[str]:
        return [f.code for f in self.findings]


def artifact_files(decl: ArtifactDecl, workspace: AbstractSet[str] | Mapping[str, bytes]) -> list[str]:
    """Workspace files covered by an artifact: the file itself or everything below a directory."""
    if decl.path in workspace:
        return [decl.path]
    prefix = decl.path.rstrip("/") + "/"
    return sorted(p for p in workspace if p.startswith(prefix))


def validate_manifest(
    m: ProjectManifest, workspace: AbstractSet[str] | Mapping[str, bytes]
) -> ValidationReport:
    """Check a parsed manifest against the files that actually exist.

    ``workspace`` is either a set of relative paths or a mapping of relative
    path to file bytes; contents are only scanned for inlined credentials when
    they are available.
    """
    findings: list[Finding] = []

    for a in m.artifacts:
        if not artifact_files(a, workspace):
            findings.append(Finding("MissingArtifactFile", a.id,
                                    f"artifact {a.id!r} path {a.path!r} not found in workspace"))

    if not m.pipeline:
        findings.append(Finding("EmptyPipeline", "pipeline", "pipeline has no steps"))
    present_kinds = {s.kind for s in m.pipeline}
    for kind in REQUIRED_STEP_KINDS:
        if kind not in present_kinds:
            findings.append(Finding("MissingStepKind", kind.value,
                                    f"pipeline has no {kind.value!r} step"))
    last = -1
    for i, step in enumerate(m.pipeline):
        rank = STEP_ORDER[step.kind]
        if rank < last:
            findings.append(Finding("StepOrder", f"pipeline[{i}]",
                                    f"step {i} ({step.kind.value}) follows a later-stage step"))
        last = max(last, rank)
    if m.paper_build is not None and m.paper_build.kind is not StepKind.PAPER:
        findings.append(Finding("StepOrder", "paper_build", "paper_build must have kind 'paper'"))

    if isinstance(workspace, Mapping) and m.credentials:
        scanned: dict[str, bytes] = {MANIFEST_NAME: serialize_manifest(m).encode("utf-8")}
        for a in m.artifacts:
            for path in artifact_files(a, workspace):
                scanned[path] = workspace[path]
        for hit in credscan.scan_files(scanned, m.credentials):
            findings.append(Finding("InlinedCredential", hit.path, str(hit)))

    return ValidationReport(tuple(findings))
