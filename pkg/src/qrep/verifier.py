"""Gold-standard compliance checks for a reproduction package tree."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from typing import Iterable

from . import credscan
from .errors import ManifestError, QrepError, TranscriptFormatError, UnparsableRecipe
from .generator import ARTIFACT_ROOT, DISPATCHER_NAME, PROVENANCE_NAME, README_NAME, TRANSCRIPT_PATH
from .manifest import MANIFEST_NAME, ArtifactKind, ProjectManifest, parse_manifest
from .provenance import CompletenessLevel, HardwareProvenance, validate_provenance
from .replay.transcript import InteractionTranscript
from .tree import PackageTree


class Level(str, enum.Enum):
    REQUIRED = "REQUIRED"
    RECOMMENDED = "RECOMMENDED"


class Verdict(str, enum.Enum):
    PASS = "pass"
    PARTIAL = "partial"
    FAIL = "fail"


@dataclass(frozen=True)
class CriterionResult:
    criterion: str
    level: Level
    verdict: Verdict
    message: str


CRITERIA = {
    "C1": (Level.REQUIRED, "source code present"),
    "C2": (Level.REQUIRED, "results present"),
    "C3": (Level.REQUIRED, "step documentation present"),
    "C4": (Level.REQUIRED, "one-command dispatcher"),
    "C5": (Level.REQUIRED, "hardware provenance"),
    "C6": (Level.REQUIRED, "no embedded secrets"),
    "C7": (Level.RECOMMENDED, "paper build declared"),
}


@dataclass(frozen=True)
class ComplianceReport:
    results: tuple[CriterionResult, ...]

    @property
    def overall_pass(self) -> bool:
        return all(r.verdict is Verdict.PASS for r in self.results if r.level is Level.REQUIRED)

    def verdict(self, criterion: str) -> Verdict:
        for r in self.results:
            if r.criterion == criterion:
                return r.verdict
        raise KeyError(criterion)

    def verdicts(self) -> dict[str, str]:
        return {r.criterion: r.verdict.value for r in self.results}

    def to_json(self) -> str:
        return json.dumps(self.verdicts(), indent=2) + "\n"

    def render(self) -> str:
        lines = []
        for r in self.results:
            title = CRITERIA[r.criterion][1]
            lines.append(f"{r.criterion} {r.level.value:<11} {r.verdict.value.upper():<7} {title}: {r.message}")
        lines.append(f"overall: {'PASS' if self.overall_pass else 'FAIL'}")
        return "\n".join(lines) + "\n"


_STEP_HEADING = re.compile(r"^### Step \d+\b", re.MULTILINE)


def _load_manifest(tree: PackageTree) -> tuple[ProjectManifest | None, str]:
    entry = tree.get(MANIFEST_NAME)
    if entry is None:
        return None, f"{MANIFEST_NAME} missing"
    try:
        return parse_manifest(entry.content), ""
    except ManifestError as exc:
        return None, f"{MANIFEST_NAME} unreadable: {exc}"


def _c1(tree: PackageTree, m: ProjectManifest | None, why: str) -> tuple[Verdict, str]:
    if m is None:
        return Verdict.FAIL, why
    sources = [a for a in m.artifacts if a.kind is ArtifactKind.SOURCE]
    if not sources:
        return Verdict.FAIL, "no artifact of kind 'source' declared"
    missing = []
    for a in sources:
        base = f"{ARTIFACT_ROOT}/{a.path}"
        if base not in tree and not any(p.startswith(base + "/") for p in tree):
            missing.append(base)
    if missing:
        return Verdict.FAIL, "declared source missing: " + ", ".join(missing)
    return Verdict.PASS, f"{len(sources)} source artifact(s) bundled"


def _c2(tree: PackageTree, m: ProjectManifest | None) -> tuple[Verdict, str]:
    entry = tree.get(TRANSCRIPT_PATH)
    if entry is not None:
        try:
            t = InteractionTranscript.from_jsonl(entry.content)
        except TranscriptFormatError as exc:
            return Verdict.FAIL, f"{TRANSCRIPT_PATH} does not parse: {exc}"
        return Verdict.PASS, f"{TRANSCRIPT_PATH} with {len(t)} recorded interaction(s)"
    if m is not None and m.backends:
        bundled = [a for a in m.artifacts if a.kind is ArtifactKind.RESULTS
                   and any(p == f"{ARTIFACT_ROOT}/{a.path}" or p.startswith(f"{ARTIFACT_ROOT}/{a.path}/")
                           for p in tree)]
        if bundled:
            return Verdict.PARTIAL, (f"backends declared but {TRANSCRIPT_PATH} absent; only results "
                                     f"artifacts bundled ({', '.join(a.id for a in bundled)})")
    return Verdict.FAIL, f"{TRANSCRIPT_PATH} absent"


def _c3(tree: PackageTree, m: ProjectManifest | None, why: str) -> tuple[Verdict, str]:
    entry = tree.get(README_NAME)
    if entry is None:
        return Verdict.FAIL, f"{README_NAME} missing"
    if m is None:
        return Verdict.FAIL, why
    sections = len(_STEP_HEADING.findall(entry.content.decode("utf-8", errors="replace")))
    expected = len(m.all_steps())
    if sections != expected:
        return Verdict.FAIL, f"{README_NAME} documents {sections} step(s), pipeline has {expected}"
    return Verdict.PASS, f"{README_NAME} documents all {expected} step(s)"


def _c4(tree: PackageTree) -> tuple[Verdict, str]:
    entry = tree.get(DISPATCHER_NAME)
    if entry is None:
        return Verdict.FAIL, f"{DISPATCHER_NAME} missing"
    if not entry.executable:
        return Verdict.FAIL, f"{DISPATCHER_NAME} is not executable"
    first = entry.content.split(b"\n", 1)[0].rstrip(b"\r")
    if first != b"#!/bin/sh":
        return Verdict.FAIL, f"{DISPATCHER_NAME} does not start with #!/bin/sh"
    return Verdict.PASS, f"{DISPATCHER_NAME} is an executable POSIX shell script"


def _c5(tree: PackageTree) -> tuple[Verdict, str]:
    entry = tree.get(PROVENANCE_NAME)
    if entry is None:
        return Verdict.FAIL, f"{PROVENANCE_NAME} missing"
    try:
        p = HardwareProvenance.from_dict(json.loads(entry.content.decode("utf-8")))
    except (ValueError, QrepError) as exc:
        return Verdict.FAIL, f"{PROVENANCE_NAME} does not parse: {exc}"
    report = validate_provenance(p)
    detail = f"{report.score}/{report.total} tracked fields"
    if report.findings:
        detail += "; " + "; ".join(str(f) for f in report.findings)
    level = report.level
    if level is CompletenessLevel.COMPLETE:
        return Verdict.PASS, detail
    if level is CompletenessLevel.PARTIAL:
        return Verdict.PARTIAL, detail + " (missing: " + ", ".join(report.missing) + ")" if report.missing else detail
    return Verdict.FAIL, detail


def _c6(tree: PackageTree, credential_names: Iterable[str]) -> tuple[Verdict, str]:
    names = sorted(set(credential_names))
    if not names:
        return Verdict.PASS, "no credentials declared"
    hits = credscan.scan_files(tree.contents(), names)
    if hits:
        return Verdict.FAIL, "; ".join(str(h) for h in hits[:5]) + (" ..." if len(hits) > 5 else "")
    return Verdict.PASS, f"no value found for {', '.join(names)}"


def _c7(m: ProjectManifest | None, why: str) -> tuple[Verdict, str]:
    if m is None:
        return Verdict.FAIL, why
    if m.paper_build is None:
        return Verdict.FAIL, "no paper_build step declared"
    return Verdict.PASS, "paper_build step declared"


def verify_gold_standard(tree: PackageTree, credential_names: Iterable[str] | None = None) -> ComplianceReport:
    """Evaluate C1..C7; credential names default to those declared in the bundled manifest."""
    m, why = _load_manifest(tree)
    if credential_names is None:
        credential_names = m.credentials if m is not None else ()
    verdicts = {
        "C1": _c1(tree, m, why),
        "C2": _c2(tree, m),
        "C3": _c3(tree, m, why),
        "C4": _c4(tree),
        "C5": _c5(tree),
        "C6": _c6(tree, credential_names),
        "C7": _c7(m, why),
    }
    return ComplianceReport(tuple(
        CriterionResult(cid, CRITERIA[cid][0], verdict, message)
        for cid, (verdict, message) in verdicts.items()
    ))


# binary self-containment ---------------------------------------------------

RECIPE_INSTRUCTIONS = {"FROM", "COPY", "RUN", "ENTRYPOINT", "ADD"}

# a textual over-approximation: anything that may touch the network
NETWORK_FETCH = re.compile(
    r"(?<![\w-])(?:curl|wget|git\s+clone|pip3?\s+install|apt-get|apk\s+add|conda|npm)(?![\w-])"
)
_URL = re.compile(r"^[a-z][a-z0-9+.-]*://", re.IGNORECASE)


@dataclass(frozen=True)
class SelfContainmentVerdict:
    passed: bool
    offending: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.passed


def parse_recipe(text: str) -> list[tuple[int, str, str]]:
    """Split a restricted Dockerfile into (line number, INSTRUCTION, arguments)."""
    instructions = []
    pending: list[str] = []
    start = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not pending and (not line or line.startswith("#")):
            continue
        if not pending:
            start = line_no
        if line.endswith("\\"):
            pending.append(line[:-1])
            continue
        pending.append(line)
        joined = " ".join(p.strip() for p in pending if p.strip())
        pending = []
        keyword, _, args = joined.partition(" ")
        if keyword.upper() not in RECIPE_INSTRUCTIONS or not args.strip():
            raise UnparsableRecipe(start, joined)
        instructions.append((start, keyword.upper(), args.strip()))
    if pending:
        raise UnparsableRecipe(start, " ".join(pending))
    return instructions


def check_binary_self_containment(recipe: str) -> SelfContainmentVerdict:
    offending = []
    for _, keyword, args in parse_recipe(recipe):
        if keyword == "RUN" and NETWORK_FETCH.search(args):
            offending.append(f"RUN {args}")
        elif keyword == "ADD":
            sources = args.split()[:-1]
            if args.startswith("["):
                try:
                    sources = json.loads(args)[:-1]
                except ValueError:
                    raise UnparsableRecipe(0, f"ADD {args}") from None
            if any(_URL.match(s) for s in sources if not s.startswith("--")):
                offending.append(f"ADD {args}")
    return SelfContainmentVerdict(not offending, tuple(offending))
