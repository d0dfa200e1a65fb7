"""Meta-generation of a reproduction package from a manifest and built-in templates."""

from __future__ import annotations

import json
import re
import shlex
import warnings
from importlib import resources
from typing import TYPE_CHECKING, Mapping

from .errors import ManifestNotValid, TemplateSyntaxError, UnboundPlaceholder, UnsupportedBackendKind
from .manifest import MANIFEST_NAME, ProjectManifest, artifact_files, serialize_manifest, validate_manifest
from .provenance import validate_provenance
from .tree import PackageTree

if TYPE_CHECKING:
    from .replay.transcript import InteractionTranscript

PROVENANCE_NAME = "PROVENANCE.json"
DISPATCHER_NAME = "reproduce.sh"
README_NAME = "README.md"
SOURCE_RECIPE = "recipes/source.Dockerfile"
BINARY_RECIPE = "recipes/binary.Dockerfile"
TRANSCRIPT_PATH = "results/transcript.jsonl"
ARTIFACT_ROOT = "artifacts"

NO_DESCRIPTION = "(no description provided)"

# Vendor SDKs installed by the source recipe, per backend kind.
BACKEND_SDK_INSTALL = {
    "dwave": "pip install --no-cache-dir dwave-ocean-sdk",
    "ibmq": "pip install --no-cache-dir qiskit qiskit-ibm-runtime",
    "simulator": None,
    "http": None,
}

_TOKEN = re.compile(r"\\\{\{|\{\{([a-z0-9_]+)\}\}|\{\{")


class UnusedBindingWarning(UserWarning):
    pass


def render_template(template: str, bindings: Mapping[str, str]) -> str:
    """Substitute ``{{key}}`` placeholders; ``\\{{`` yields a literal ``{{``."""
    used: set[str] = set()

    def replace(m: re.Match[str]) -> str:
        token = m.group(0)
        if token == "\\{{":
            return "{{"
        name = m.group(1)
        if name is None:
            raise TemplateSyntaxError(f"malformed placeholder at offset {m.start()}")
        if name not in bindings:
            raise UnboundPlaceholder(name)
        used.add(name)
        return str(bindings[name])

    out = _TOKEN.sub(replace, template)
    unused = sorted(set(bindings) - used)
    if unused:
        warnings.warn(f"unused template bindings: {', '.join(unused)}", UnusedBindingWarning, stacklevel=2)
    return out


def placeholders(template: str) -> set[str]:
    names = set()
    for m in _TOKEN.finditer(template):
        if m.group(0) == "\\{{":
            continue
        if m.group(1) is None:
            raise TemplateSyntaxError(f"malformed placeholder at offset {m.start()}")
        names.add(m.group(1))
    return names


class TemplateSet(dict):
    """Template name -> template text."""

    REQUIRED = ("dispatcher", "source_recipe", "binary_recipe", "readme")

    def __init__(self, templates: Mapping[str, str]) -> None:
        super().__init__(templates)
        for name, text in self.items():
            if not isinstance(text, str):
                raise TypeError(f"template {name} must be text")
            placeholders(text)

    @classmethod
    def builtin(cls) -> "TemplateSet":
        files = {
            "dispatcher": "dispatcher.sh.tmpl",
            "source_recipe": "source.Dockerfile.tmpl",
            "binary_recipe": "binary.Dockerfile.tmpl",
            "readme": "README.md.tmpl",
        }
        root = resources.files("qrep") / "templates"
        return cls({k: (root / v).read_text(encoding="utf-8") for k, v in files.items()})


_BUILTIN: TemplateSet | None = None


def builtin_templates() -> TemplateSet:
    global _BUILTIN
    if _BUILTIN is None:
        _BUILTIN = TemplateSet.builtin()
    return _BUILTIN


def image_name(m: ProjectManifest) -> str:
    return "qrep-" + m.name.lower()


# recipes -------------------------------------------------------------------

def generate_recipe(m: ProjectManifest, mode: str, templates: TemplateSet | None = None) -> str:
    templates = templates or builtin_templates()
    if mode not in ("source", "binary"):
        raise ValueError(f"recipe mode must be 'source' or 'binary', not {mode!r}")
    install = []
    for backend in m.backends:
        if backend.kind not in BACKEND_SDK_INSTALL:
            raise UnsupportedBackendKind(backend.kind)
        sdk = BACKEND_SDK_INSTALL[backend.kind]
        if sdk and sdk not in install:
            install.append(sdk)
    install.extend(cmd for cmd in m.environment.install if cmd not in install)

    bindings = {"name": m.name, "image": image_name(m)}
    if mode == "binary":
        return render_template(templates["binary_recipe"], bindings)
    steps = "\n".join(f"RUN cd /opt/qrep/artifacts && {cmd}" for cmd in install)
    if not steps:
        steps = "# no dependency-install steps declared"
    bindings.update(base_image=m.environment.base_image, install_steps=steps)
    return render_template(templates["source_recipe"], bindings)


# dispatcher ----------------------------------------------------------------

def _step_call(number: int, kind: str, command: str) -> str:
    return f"run_step {shlex.quote(f'{number} ({kind})')} {shlex.quote(command)}"


def generate_dispatcher(m: ProjectManifest, templates: TemplateSet | None = None) -> str:
    templates = templates or builtin_templates()
    guards = []
    for name in m.credentials:
        guards.append(
            f'if [ "$QREP_REPLAY" != 1 ] && [ -z "${{{name}:-}}" ]; then\n'
            f'    echo "reproduce.sh: credential {name} is not set; export it for a live run'
            f' or set QREP_REPLAY=1" >&2\n'
            f"    exit 3\n"
            f"fi\n"
        )
    backend_default = ""
    if m.backends:
        url = shlex.quote(m.backends[0].url)
        backend_default = f"QREP_BACKEND_URL=${{QREP_BACKEND_URL:-{url}}}\nexport QREP_BACKEND_URL\n"

    steps = "\n".join(_step_call(i, s.kind.value, s.command) for i, s in enumerate(m.pipeline, start=1))
    if m.paper_build is not None:
        number = len(m.pipeline) + 1
        paper = (
            'if [ "$WITH_PAPER" = 1 ]; then\n'
            f"    {_step_call(number, 'paper', m.paper_build.command)}\n"
            "fi"
        )
    else:
        paper = (
            'if [ "$WITH_PAPER" = 1 ]; then\n'
            '    echo "reproduce.sh: no paper build step declared" >&2\n'
            "fi"
        )
    return render_template(templates["dispatcher"], {
        "name": m.name,
        "credential_list": " ".join(m.credentials) or "(none declared)",
        "backend_default": backend_default,
        "credential_guards": "\n".join(guards),
        "steps": steps,
        "paper_step": paper,
    })


# documentation -------------------------------------------------------------

def _indent(text: str) -> str:
    return "\n".join("    " + line if line else "" for line in text.splitlines())


def _provenance_summary(m: ProjectManifest) -> str:
    p = m.provenance
    report = validate_provenance(p)
    t = p.timings

    def show(value: str) -> str:
        return value.strip() or "(not recorded)"

    def us(v: int | None) -> str:
        return "(not recorded)" if v is None else f"{v} us"

    lines = [
        f"Completeness: {report.score}/{report.total} tracked fields ({report.level.value}).",
        f"Full record: `{PROVENANCE_NAME}`.",
        "",
        f"- Machine: {show(p.machine_id)}",
        f"- Input generation: {show(p.input_generation)}",
        f"- Qbit count: {p.qbit_count or '(not recorded)'}",
        f"- Connectivity: {len(p.topology)} couplers" if p.topology else "- Connectivity: (not recorded)",
        f"- Input transformations: {show(p.input_transformations)}",
        f"- Logical to physical embedding: {show(p.embedding_method)}",
        f"- Postprocessing: {show(p.postprocessing)}",
        f"- Programming / initialisation / readout time: "
        f"{us(t.programming_us)} / {us(t.initialisation_us)} / {us(t.readout_us)}",
        f"- Runtime measurement: {show(p.runtime_measurement)}",
        f"- Tuning heuristics: {show(p.heuristics)}",
    ]
    for finding in report.findings:
        lines.append(f"- Topology problem: {finding.message}")
    return "\n".join(lines)


def generate_docs(m: ProjectManifest, templates: TemplateSet | None = None) -> str:
    templates = templates or builtin_templates()
    sections = []
    for i, step in enumerate(m.all_steps(), start=1):
        text = step.description.strip() or NO_DESCRIPTION
        suffix = " (only with `--with-paper`)" if step is m.paper_build else ""
        sections.append(f"### Step {i}: {step.kind.value}{suffix}\n\n{text}\n\n{_indent(step.command)}\n")

    contents = [
        f"- `{DISPATCHER_NAME}`: one-command dispatcher",
        f"- `{MANIFEST_NAME}`: project manifest this package was generated from",
        f"- `{PROVENANCE_NAME}`: quantum hardware provenance record",
        f"- `{SOURCE_RECIPE}`, `{BINARY_RECIPE}`: container recipes",
    ]
    if m.backends:
        contents.append(f"- `{TRANSCRIPT_PATH}`: recorded backend interactions, when present")
    for a in m.artifacts:
        contents.append(f"- `{ARTIFACT_ROOT}/{a.path}`: {a.kind.value} ({a.id})")

    if m.credentials:
        cred_lines = ["Credentials are never stored in this package.  For a live run export:", ""]
        cred_lines += [f"- `{name}`" for name in m.credentials]
        credentials = "\n".join(cred_lines)
    else:
        credentials = "No credentials are needed."

    replay = ""
    if m.backends:
        targets = ", ".join(f"{b.kind} at {b.url}" for b in m.backends)
        replay = (
            "## Replaying recorded backend interactions\n\n"
            f"Live runs talk to: {targets}.  Every request and response of the\n"
            f"recorded run is kept in `{TRANSCRIPT_PATH}` with credentials redacted,\n"
            "so the experiment can be re-run after the hardware is gone:\n\n"
            "    qrep replay .\n\n"
            "This serves the transcript over HTTP and runs `reproduce.sh` with\n"
            "`QREP_REPLAY=1` and `QREP_BACKEND_URL` pointing at the replay service.\n"
            "A request that was never recorded is answered with HTTP 410: the run\n"
            "has diverged from the recorded experiment.\n\n"
        )

    return render_template(templates["readme"], {
        "name": m.name,
        "paper_note": "" if m.paper_build else " (no paper build step is declared)",
        "contents": "\n".join(contents),
        "step_sections": "\n".join(sections).rstrip("\n"),
        "provenance_summary": _provenance_summary(m),
        "credentials_section": credentials,
        "replay_section": replay,
    })


# package -------------------------------------------------------------------

def generate_package(
    m: ProjectManifest,
    templates: TemplateSet | None,
    workspace: Mapping[str, bytes],
    transcripts: "InteractionTranscript | None" = None,
) -> PackageTree:
    """Assemble the full package tree; a pure function of its inputs."""
    templates = templates or builtin_templates()
    report = validate_manifest(m, workspace)
    if not report.valid:
        raise ManifestNotValid(report.findings)

    tree = PackageTree()
    tree.add(MANIFEST_NAME, serialize_manifest(m).encode("utf-8"))
    tree.add(PROVENANCE_NAME,
             (json.dumps(m.provenance.to_dict(), indent=2, ensure_ascii=False) + "\n").encode("utf-8"))
    tree.add(DISPATCHER_NAME, generate_dispatcher(m, templates).encode("utf-8"), executable=True)
    tree.add(README_NAME, generate_docs(m, templates).encode("utf-8"))
    tree.add(SOURCE_RECIPE, generate_recipe(m, "source", templates).encode("utf-8"))
    tree.add(BINARY_RECIPE, generate_recipe(m, "binary", templates).encode("utf-8"))
    for a in m.artifacts:
        for path in artifact_files(a, workspace):
            tree.add(f"{ARTIFACT_ROOT}/{path}", workspace[path])
    if transcripts is not None:
        tree.add(TRANSCRIPT_PATH, transcripts.to_jsonl())
    return tree
