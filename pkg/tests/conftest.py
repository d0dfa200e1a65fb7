from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from qrep.generator import generate_package
from qrep.manifest import parse_manifest
from qrep.replay import HttpRequest, HttpResponse, InteractionTranscript, SimulatedBackend, record
from qrep.tree import PackageTree

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
DEMO = FIXTURES / "demo_project"

# 40 characters, planted wherever a live credential value is needed
PLANTED_TOKEN = "qpuTok_9f8e7d6c5b4a392817160f4e3d2c1b0aZ"
assert len(PLANTED_TOKEN) == 40


def demo_workspace(root: Path = DEMO) -> dict[str, bytes]:
    return {p: (root / p).read_bytes() for p in PackageTree.read_from(root).paths()
            if not p.startswith("out/") and p != "qrep.json" and p != ".gitignore"}


def minimal_doc(**overrides) -> dict:
    doc = {
        "name": "mini",
        "artifacts": [{"id": "src", "kind": "source", "path": "main.py"}],
        "pipeline": [
            {"kind": "build", "command": "true", "description": "build it"},
            {"kind": "run", "command": "true", "description": "run it"},
            {"kind": "analyze", "command": "true", "description": "analyze it"},
        ],
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def demo_manifest():
    return parse_manifest((DEMO / "qrep.json").read_bytes())


@pytest.fixture
def demo_files():
    return demo_workspace()


@pytest.fixture
def small_transcript():
    t = InteractionTranscript(backend_kind="simulator")
    record(t, HttpRequest("GET", "/calibration"), HttpResponse(200, b'{"q":4}', "application/json"))
    record(t, HttpRequest("POST", "/jobs", body=b'{"shots":8}'),
           HttpResponse(200, b'{"counts":{"00":8}}', "application/json"))
    return t.seal()


@pytest.fixture
def complete_tree(demo_manifest, demo_files, small_transcript):
    return generate_package(demo_manifest, None, demo_files, small_transcript)


@pytest.fixture
def demo_copy(tmp_path):
    target = tmp_path / "project"
    shutil.copytree(DEMO, target, ignore=shutil.ignore_patterns("out"))
    return target


@pytest.fixture
def simulated_backend():
    with SimulatedBackend(seed=7, token=PLANTED_TOKEN) as backend:
        yield backend


def write_manifest(directory: Path, doc: dict) -> Path:
    path = directory / "qrep.json"
    path.write_text(json.dumps(doc, indent=2), encoding="utf-8")
    return path


# one PASS/FAIL line per acceptance criterion in the terminal summary
_acceptance: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.failed):
        _acceptance[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _acceptance.items():
        terminalreporter.write_line(f"{verdict}  {name}")
