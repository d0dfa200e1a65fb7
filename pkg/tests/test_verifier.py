import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import PLANTED_TOKEN, minimal_doc
from qrep.errors import UnparsableRecipe
from qrep.generator import generate_package, generate_recipe
from qrep.manifest import parse_manifest
from qrep.verifier import Verdict, check_binary_self_containment, parse_recipe, verify_gold_standard

PASS, PARTIAL, FAIL = Verdict.PASS, Verdict.PARTIAL, Verdict.FAIL


def verdicts(tree):
    return {cid: Verdict(v) for cid, v in verify_gold_standard(tree).verdicts().items()}


def test_complete_package_passes_everything(complete_tree):
    report = verify_gold_standard(complete_tree)
    assert report.overall_pass
    assert set(report.verdicts()) == {f"C{i}" for i in range(1, 8)}
    assert json.loads(report.to_json())


def test_non_executable_dispatcher_fails_c4(complete_tree):
    entry = complete_tree["reproduce.sh"]
    complete_tree.add("reproduce.sh", entry.content, executable=False)
    assert verdicts(complete_tree)["C4"] is FAIL
    complete_tree.add("reproduce.sh", b"#!/bin/bash\n", executable=True)
    assert verdicts(complete_tree)["C4"] is FAIL


def test_planted_secret_fails_c6(complete_tree):
    complete_tree.add("artifacts/config/experiment.json", b'{"QPU_TOKEN": "abc123"}\n')
    assert verdicts(complete_tree)["C6"] is FAIL
    complete_tree.add("artifacts/config/experiment.json", b"QPU_TOKEN=abc123\n")
    assert verdicts(complete_tree)["C6"] is FAIL


def test_credential_reference_is_not_a_secret(complete_tree):
    complete_tree.add("artifacts/notes.sh", b'curl -H "Authorization: Bearer ${QPU_TOKEN}" x\nQPU_TOKEN=$1\n')
    assert verdicts(complete_tree)["C6"] is PASS


def test_missing_source_fails_c1(complete_tree):
    complete_tree.remove("artifacts/src/analyze.py")
    assert verdicts(complete_tree)["C1"] is FAIL


def test_transcript_rules(complete_tree):
    complete_tree.add("results/transcript.jsonl", b"garbage\n")
    assert verdicts(complete_tree)["C2"] is FAIL
    complete_tree.remove("results/transcript.jsonl")
    assert verdicts(complete_tree)["C2"] is FAIL


def test_results_without_transcript_is_partial():
    doc = minimal_doc(artifacts=[{"id": "src", "kind": "source", "path": "main.py"},
                                 {"id": "res", "kind": "results", "path": "results.csv"}],
                      backends=[{"kind": "ibmq", "url": "https://q.example"}])
    tree = generate_package(parse_manifest(json.dumps(doc)), None, {"main.py": b"", "results.csv": b"1\n"})
    assert verdicts(tree)["C2"] is PARTIAL


def test_step_count_mismatch_fails_c3(complete_tree):
    readme = complete_tree["README.md"].content.decode()
    complete_tree.add("README.md", readme.replace("### Step 2", "### Stage 2").encode())
    assert verdicts(complete_tree)["C3"] is FAIL


def test_provenance_levels(complete_tree):
    complete_tree.add("PROVENANCE.json", json.dumps({"qbit_count": 4, "heuristics": "none"}).encode())
    assert verdicts(complete_tree)["C5"] is PARTIAL
    complete_tree.add("PROVENANCE.json", b"{}")
    assert verdicts(complete_tree)["C5"] is FAIL
    complete_tree.remove("PROVENANCE.json")
    assert verdicts(complete_tree)["C5"] is FAIL


def test_missing_paper_build_fails_c7():
    tree = generate_package(parse_manifest(json.dumps(minimal_doc())), None, {"main.py": b""})
    v = verdicts(tree)
    assert v["C7"] is FAIL
    assert v["C2"] is FAIL  # no transcript, nothing to fall back on


def test_unreadable_manifest(complete_tree):
    complete_tree.add("qrep.json", b"{")
    v = verdicts(complete_tree)
    assert v["C1"] is FAIL and v["C3"] is FAIL and v["C7"] is FAIL


_removable = ["qrep.json", "README.md", "reproduce.sh", "PROVENANCE.json", "results/transcript.jsonl",
              "artifacts/src/prepare.py", "artifacts/config/experiment.json"]


# the fixture is only read, never mutated, so sharing it across examples is safe
@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.sets(st.sampled_from(_removable)))
def test_removing_files_never_improves_a_verdict(complete_tree, removed):
    rank = {FAIL: 0, PARTIAL: 1, PASS: 2}
    before = verdicts(complete_tree)
    tree = complete_tree.copy()
    for path in removed:
        tree.remove(path)
    after = verdicts(tree)
    assert all(rank[after[c]] <= rank[before[c]] for c in before)


def test_generated_packages_pass_their_own_verifier():
    for overrides in ({}, {"paper_build": {"command": "make"}},
                      {"credentials": ["API_KEY"], "provenance": {"qbit_count": 2}}):
        m = parse_manifest(json.dumps(minimal_doc(**overrides)))
        v = verdicts(generate_package(m, None, {"main.py": b"print(1)\n"}))
        assert v["C1"] is PASS and v["C3"] is PASS and v["C4"] is PASS and v["C6"] is PASS


# recipes -------------------------------------------------------------------

def test_generated_binary_recipe_is_self_contained(demo_manifest):
    assert check_binary_self_containment(generate_recipe(demo_manifest, "binary"))


@pytest.mark.parametrize("line", [
    "RUN pip install qiskit",
    "RUN apt-get update && apt-get install -y gcc",
    "RUN curl -sSL https://x.example/a.sh | sh",
    "ADD https://x.example/data.tar.gz /data/",
    'ADD ["https://x.example/a", "/a"]',
])
def test_network_fetches_are_flagged(demo_manifest, line):
    recipe = generate_recipe(demo_manifest, "binary") + line + "\n"
    verdict = check_binary_self_containment(recipe)
    assert not verdict
    assert verdict.offending == (line,)


def test_harmless_lines_pass():
    recipe = "FROM base\nADD local.tar /opt/\nRUN echo 'pipeline install' && ls\nCOPY . /x\n"
    assert check_binary_self_containment(recipe)


def test_continuations_and_comments():
    recipe = "# header\nFROM base\nRUN echo a \\\n    && pip install x\n"
    assert parse_recipe(recipe) == [(2, "FROM", "base"), (3, "RUN", "echo a && pip install x")]
    assert not check_binary_self_containment(recipe)


@pytest.mark.parametrize("recipe", ["FROM base\nEXPOSE 80\n", "FROM\n", "FROM base\nRUN x \\\n"])
def test_unparsable_recipe(recipe):
    with pytest.raises(UnparsableRecipe):
        check_binary_self_containment(recipe)


def test_report_rendering(complete_tree):
    complete_tree.remove("README.md")
    text = verify_gold_standard(complete_tree).render()
    assert "C3" in text and "fail" in text.lower()
    assert PLANTED_TOKEN not in text
