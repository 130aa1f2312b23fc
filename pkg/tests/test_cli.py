import json
import subprocess
import sys

import pytest

from forge import __version__
from forge.cli import main

HENSON_SRC = """\
theory tri_free
rel E/2
forall x y: E(x,y) -> E(y,x)
forall x: ~E(x,x)
forbid 3: E(0,1) E(1,0) E(1,2) E(2,1) E(0,2) E(2,0)
forall x exists y: E(x,y)
forall x exists y: x != y & ~E(x,y)
"""


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FORGE_THREADS", raising=False)
    (tmp_path / "henson3.fr").write_text(HENSON_SRC)
    (tmp_path / "c4.json").write_text(json.dumps({"signature": {"relations": [["E", 2]], "functions": []},
                                                   "size": 4, "relations": {"E": [[0, 1], [1, 0], [1, 2], [2, 1],
                                                                                  [2, 3], [3, 2], [3, 0], [0, 3]]}}))
    return tmp_path


def test_compile_writes_artifact(work, capsys):
    code, _, _ = run(["compile", "henson3.fr", "--out", "t.json"], capsys)
    doc = json.loads((work / "t.json").read_text())
    assert code == 0
    assert doc["forge_version"] == __version__
    assert doc["config"]["command"] == "compile" and doc["config"]["argv"][0] == "compile"
    assert doc["theory"]["name"] == "tri_free"


def test_build_duplication_failure(work, capsys):
    code, _, err = run(["build", "equiv_classes_of(2)", "--stages", "40"], capsys)
    assert code == 1
    doc = json.loads(err)
    assert doc["error"] == "duplication-failure" and "definable closure" in doc["message"]


def test_sample_missing_theory_is_usage_error(work, capsys):
    code, _, err = run(["sample", "nowhere.json", "-n", "3"], capsys)
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_sample_without_required_args(work, capsys):
    assert run(["sample"], capsys)[0] == 2


def test_bad_thread_count(work, capsys, monkeypatch):
    monkeypatch.setenv("FORGE_THREADS", "zero")
    assert run(["check-dup", "dlo"], capsys)[0] == 2


def test_dsl_error_exit_code(work, capsys):
    (work / "bad.fr").write_text("rel E/2\nforall x: E(x)\n")
    code, _, err = run(["compile", "bad.fr"], capsys)
    assert code == 1 and "arity" in json.loads(err)["message"]


def test_check_commands(work, capsys):
    code, out, _ = run(["check-dup", "henson3", "--width", "2"], capsys)
    assert code == 0 and json.loads(out)["report"]["verdict"] == "PASS"
    code, out, _ = run(["check-dup", "equiv_classes_of(2)", "--width", "3"], capsys)
    assert code == 1 and json.loads(out)["report"]["counterexample"]
    code, out, _ = run(["check-sap", "dlo", "--bound", "3"], capsys)
    assert code == 0 and json.loads(out)["report"]["verdict"] == "PASS"


def test_closure_commands(work, capsys):
    code, out, _ = run(["dcl", "c4.json", "--tuple", "0"], capsys)
    assert code == 0 and json.loads(out)["dcl"] == [0, 2]
    code, out, _ = run(["acl", "c4.json", "--tuple", "0", "--threshold", "2"], capsys)
    doc = json.loads(out)
    assert doc["acl"] == [0, 1, 2, 3] and doc["orbit_sizes"] == {"0": 1, "1": 2, "2": 1, "3": 2}
    assert run(["dcl", "c4.json", "--tuple", "a,b"], capsys)[0] == 2


def test_build_dump_graphon_pipeline(work, capsys):
    assert run(["build", "rado", "--stages", "6", "--out", "trace.json"], capsys)[0] == 0
    code, out, _ = run(["trace-dump", "trace.json", "--svg", "trace.svg"], capsys)
    assert code == 0 and json.loads(out)["stage"] == 6
    assert (work / "trace.svg").read_text().startswith("<svg")
    assert run(["graphon", "export", "trace.json", "--out", "w.json"], capsys)[0] == 0
    W = json.loads((work / "w.json").read_text())["graphon"]
    assert W["random_free"] is True
    code, out, _ = run(["graphon", "sample", "w.json", "-n", "5", "--draws", "3"], capsys)
    assert code == 0 and len(json.loads(out)["samples"]) == 3
    code, out, _ = run(["compare", "trace.json", "w.json", "--draws", "200"], capsys)
    assert code == 0 and 0 <= json.loads(out)["report"]["tv"] <= 1


def test_sample_jsonl(work, capsys):
    code, _, _ = run(["sample", "dlo", "-n", "4", "--draws", "5", "--seed", "3", "--out", "s.jsonl"], capsys)
    lines = (work / "s.jsonl").read_text().splitlines()
    assert code == 0 and len(lines) == 6
    header = json.loads(lines[0])
    assert header["config"]["seed"] == 3 and header["config"]["stages"] == 20
    rows = [json.loads(x) for x in lines[1:]]
    assert [r["draw"] for r in rows] == list(range(5)) and rows[0]["structure"]["size"] == 4


def test_sample_threads_give_identical_output(work, capsys, monkeypatch):
    argv = ["sample", "henson3", "-n", "6", "--draws", "8", "--out", "s.jsonl"]
    run(argv, capsys)
    one = (work / "s.jsonl").read_bytes()
    monkeypatch.setenv("FORGE_THREADS", "2")
    run(argv, capsys)
    assert (work / "s.jsonl").read_bytes() == one


@pytest.mark.parametrize("argv", [
    ["compile", "henson3.fr"],
    ["build", "dlo", "--stages", "8"],
    ["sample", "rado", "-n", "5", "--draws", "4", "--seed", "9"],
    ["check-dup", "dlo", "--width", "2"],
])
def test_replay_reproduces_bytes(work, capsys, argv):
    assert run(argv + ["--out", "art.json"], capsys)[0] == 0
    code, out, _ = run(["replay", "art.json"], capsys)
    assert code == 0 and json.loads(out)["identical"] is True


def test_replay_detects_tampering(work, capsys):
    run(["build", "dlo", "--stages", "4", "--out", "art.json"], capsys)
    art = work / "art.json"
    art.write_text(art.read_text().replace('"stage":4', '"stage":5'))
    code, out, _ = run(["replay", "art.json"], capsys)
    assert code == 1 and json.loads(out)["identical"] is False


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "forge.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
