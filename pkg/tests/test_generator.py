import json
import os
import subprocess
import warnings

import pytest

from conftest import GOLDEN, minimal_doc
from qrep.errors import ManifestNotValid, TemplateSyntaxError, UnboundPlaceholder, UnsupportedBackendKind
from qrep.generator import (
    NO_DESCRIPTION,
    TemplateSet,
    UnusedBindingWarning,
    builtin_templates,
    generate_dispatcher,
    generate_docs,
    generate_package,
    generate_recipe,
    render_template,
)
from qrep.manifest import parse_manifest
from qrep.verifier import NETWORK_FETCH, check_binary_self_containment, parse_recipe

FIXED_PATHS = ["qrep.json", "PROVENANCE.json", "reproduce.sh", "README.md",
               "recipes/source.Dockerfile", "recipes/binary.Dockerfile"]


def mini(**overrides):
    return parse_manifest(json.dumps(minimal_doc(**overrides)))


# render_template -----------------------------------------------------------

def test_render_simple():
    assert render_template("Hello {{name}}", {"name": "QPU"}) == "Hello QPU"


def test_render_identity():
    assert render_template("no placeholders", {}) == "no placeholders"


def test_render_unbound():
    with pytest.raises(UnboundPlaceholder) as exc:
        render_template("{{missing}}", {})
    assert exc.value.name == "missing"


def test_render_escape_and_no_recursion():
    assert render_template(r"\{{name}} {{name}}", {"name": "{{x}}"}) == "{{name}} {{x}}"


def test_render_malformed_placeholder():
    with pytest.raises(TemplateSyntaxError):
        render_template("{{ Name }}", {"Name": "x"})


def test_unused_binding_is_a_warning():
    with pytest.warns(UnusedBindingWarning):
        assert render_template("a", {"b": "c"}) == "a"


def test_builtin_templates_render_without_warnings(demo_manifest):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        generate_docs(demo_manifest)
        generate_dispatcher(demo_manifest)
        generate_recipe(demo_manifest, "source")
        generate_recipe(demo_manifest, "binary")
    assert set(TemplateSet.REQUIRED) <= set(builtin_templates())


# recipes -------------------------------------------------------------------

def test_binary_recipe_has_no_network_fetch():
    for m in (mini(), mini(backends=[{"kind": "ibmq", "url": "https://q.example"}],
                            environment={"install": ["pip install qiskit"]})):
        recipe = generate_recipe(m, "binary")
        assert not any(NETWORK_FETCH.search(args) for _, kw, args in parse_recipe(recipe) if kw == "RUN")
        assert check_binary_self_containment(recipe)


def test_source_recipe_golden(demo_manifest):
    recipe = generate_recipe(demo_manifest, "source")
    assert recipe == (GOLDEN / "demo.source.Dockerfile").read_text()
    assert "RUN cd /opt/qrep/artifacts && pip install --no-cache-dir numpy" in recipe
    assert generate_recipe(demo_manifest, "binary") == (GOLDEN / "demo.binary.Dockerfile").read_text()


def test_recipes_use_restricted_instruction_set(demo_manifest):
    for mode in ("source", "binary"):
        kws = {kw for _, kw, _ in parse_recipe(generate_recipe(demo_manifest, mode))}
        assert kws <= {"FROM", "COPY", "RUN", "ENTRYPOINT"}


def test_vendor_sdk_per_backend_kind():
    recipe = generate_recipe(mini(backends=[{"kind": "dwave", "url": "https://cloud.example"}]), "source")
    assert "dwave-ocean-sdk" in recipe
    with pytest.raises(UnsupportedBackendKind):
        generate_recipe(mini(backends=[{"kind": "rigetti-v0", "url": "https://x.example"}]), "source")


def test_zero_artifacts_recipe_and_package():
    m = mini(artifacts=[])
    recipe = generate_recipe(m, "source")
    parse_recipe(recipe)
    tree = generate_package(m, None, {})
    assert tree.paths() == sorted(FIXED_PATHS)


# dispatcher ----------------------------------------------------------------

def test_dispatcher_golden(demo_manifest):
    script = generate_dispatcher(demo_manifest)
    assert script == (GOLDEN / "demo.reproduce.sh").read_text()
    assert script.startswith("#!/bin/sh\n")
    guard = 'if [ "$QREP_REPLAY" != 1 ] && [ -z "${QPU_TOKEN:-}" ]; then'
    assert guard in script


def test_dispatcher_step_order(demo_manifest):
    script = generate_dispatcher(demo_manifest)
    positions = [script.index(f"'{step.command}'") for step in demo_manifest.pipeline]
    assert positions == sorted(positions)


def _run(script_dir, *args, env=None):
    full_env = {"PATH": os.environ["PATH"], **(env or {})}
    return subprocess.run(["/bin/sh", str(script_dir / "reproduce.sh"), *args],
                          capture_output=True, text=True, env=full_env)


def _materialize(tmp_path, m, workspace=None):
    tree = generate_package(m, None, workspace or {"main.py": b""})
    tree.write_to(tmp_path)
    return tmp_path


def test_dispatcher_runs_in_order_and_stops_at_failure(tmp_path):
    m = mini(pipeline=[
        {"kind": "build", "command": "echo build >> ../log"},
        {"kind": "run", "command": "echo run >> ../log; exit 7"},
        {"kind": "analyze", "command": "echo analyze >> ../log"},
    ])
    pkg = _materialize(tmp_path, m)
    result = _run(pkg)
    assert result.returncode == 7
    assert (pkg / "log").read_text() == "build\nrun\n"


def test_dispatcher_paper_flag(tmp_path):
    m = mini(pipeline=[
        {"kind": "build", "command": "echo build >> ../log"},
        {"kind": "run", "command": "echo run >> ../log"},
        {"kind": "analyze", "command": "echo analyze >> ../log"},
    ], paper_build={"command": "echo paper >> ../log"})
    pkg = _materialize(tmp_path, m)
    assert _run(pkg).returncode == 0
    assert (pkg / "log").read_text() == "build\nrun\nanalyze\n"
    (pkg / "log").unlink()
    assert _run(pkg, "--with-paper").returncode == 0
    assert (pkg / "log").read_text() == "build\nrun\nanalyze\npaper\n"
    assert _run(pkg, "--bogus").returncode == 64


def test_dispatcher_credential_guard(tmp_path):
    m = mini(credentials=["QPU_TOKEN"], pipeline=[
        {"kind": "build", "command": "true"},
        {"kind": "run", "command": 'test "$QPU_TOKEN" = from-env'},
        {"kind": "analyze", "command": "true"},
    ])
    pkg = _materialize(tmp_path, m)
    unset = _run(pkg)
    assert unset.returncode == 3
    assert "QPU_TOKEN" in unset.stderr
    assert _run(pkg, env={"QPU_TOKEN": "from-env"}).returncode == 0
    # replay mode skips the guard; the run step itself then fails on the empty token
    assert _run(pkg, env={"QREP_REPLAY": "1", "QPU_TOKEN": ""}).returncode == 1


# docs ----------------------------------------------------------------------

def test_docs_step_sections():
    docs = generate_docs(mini())
    assert docs.count("\n### Step ") == 3


def test_docs_placeholder_for_empty_description():
    m = mini(pipeline=[{"kind": "build", "command": "b"}, {"kind": "run", "command": "r"},
                       {"kind": "analyze", "command": "a", "description": "  "}])
    assert generate_docs(m).count(NO_DESCRIPTION) == 3


def test_docs_golden_with_replay_section(demo_manifest):
    docs = generate_docs(demo_manifest)
    assert docs == (GOLDEN / "demo.README.md").read_text()
    assert "## Replaying recorded backend interactions" in docs
    assert "## Replaying" not in generate_docs(mini())


# package -------------------------------------------------------------------

def test_package_fixed_paths_with_transcript(complete_tree, demo_manifest, demo_files):
    paths = complete_tree.paths()
    for p in FIXED_PATHS + ["results/transcript.jsonl"]:
        assert p in paths
    assert complete_tree["reproduce.sh"].executable
    for a in demo_manifest.artifacts:
        assert complete_tree[f"artifacts/{a.path}"].content == demo_files[a.path]
    assert paths == sorted(paths, key=str.encode)


def test_package_without_transcript(demo_manifest, demo_files):
    tree = generate_package(demo_manifest, None, demo_files)
    assert "results/transcript.jsonl" not in tree


def test_package_is_deterministic(demo_manifest, demo_files, small_transcript):
    a = generate_package(demo_manifest, None, demo_files, small_transcript)
    b = generate_package(demo_manifest, builtin_templates(), dict(reversed(list(demo_files.items()))),
                         small_transcript)
    assert a == b
    assert [e.content for _, e in a.items()] == [e.content for _, e in b.items()]


def test_package_requires_valid_manifest(demo_manifest):
    with pytest.raises(ManifestNotValid):
        generate_package(demo_manifest, None, {})


def test_no_credential_value_in_generated_files(demo_manifest, demo_files):
    from conftest import PLANTED_TOKEN
    tree = generate_package(demo_manifest, None, demo_files)
    assert all(PLANTED_TOKEN.encode() not in e.content for _, e in tree.items())


def test_provenance_emitted_verbatim(complete_tree, demo_manifest):
    assert json.loads(complete_tree["PROVENANCE.json"].content) == demo_manifest.provenance.to_dict()
    assert parse_manifest(complete_tree["qrep.json"].content) == demo_manifest
