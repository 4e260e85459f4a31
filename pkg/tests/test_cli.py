import json

import pytest

from blockbpm.cli import main
from blockbpm.notation import sbpm_default_notation
from blockbpm.persistence import notation_to_xml, to_xml

from corpus import cyclic_wait_model, pingpong_model


@pytest.fixture()
def pingpong_file(tmp_path):
    path = tmp_path / "pingpong.xml"
    path.write_text(to_xml(pingpong_model()), encoding="utf-8")
    return str(path)


@pytest.fixture()
def cyclic_file(tmp_path):
    path = tmp_path / "cyclicwait.xml"
    path.write_text(to_xml(cyclic_wait_model()), encoding="utf-8")
    return str(path)


def test_validate_clean_model(pingpong_file, capsys):
    assert main(["validate", pingpong_file]) == 0
    assert capsys.readouterr().out == ""


def test_validate_lists_violations_one_per_line(tmp_path, capsys):
    text = (
        '<document version="1" kind="model"><process id="x" name="">'
        '<subject id="A" name="" kind="standard"><behavior>'
        '<state id="s" kind="action" label="" start="true" end="false"><outcome label="done"/></state>'
        "</behavior></subject></process></document>"
    )
    path = tmp_path / "wip.xml"
    path.write_text(text, encoding="utf-8")
    assert main(["validate", str(path)]) == 1
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) >= 1
    assert any("MissingEnd" in line for line in out)


def test_validate_garbage_is_malformed(tmp_path, capsys):
    path = tmp_path / "garbage.bin"
    path.write_bytes(b"\x00\x01\x02 not xml")
    assert main(["validate", str(path)]) == 1
    assert "MalformedDocument" in capsys.readouterr().err


def test_run_pingpong_completes(pingpong_file, tmp_path, capsys):
    trace_path = tmp_path / "trace.txt"
    code = main(["run", pingpong_file, "--seed", "1", "--trace", str(trace_path)])
    assert code == 0
    assert "status: Completed" in capsys.readouterr().out
    lines = trace_path.read_text().strip().splitlines()
    assert len(lines) == 6
    assert lines[0].split("\t")[3] == "Sent"


def test_run_cyclic_wait_exit_code(cyclic_file, capsys):
    assert main(["run", cyclic_file, "--quiet"]) == 2
    assert "Deadlocked" in capsys.readouterr().out


def test_run_step_limit_exit_code(tmp_path, capsys):
    from blockbpm.model import Action, Behavior, Normal, State, Subject, Transition, build_model

    looping = build_model([Subject("A", behavior=Behavior(
        states=(
            State("s1", Action(("go",)), is_start=True),
            State("s2", Action(("done",)), is_end=True),
        ),
        transitions=(Transition("s1", "s1", Normal("go")),),
    ))])
    path = tmp_path / "loop.xml"
    path.write_text(to_xml(looping), encoding="utf-8")
    assert main(["run", str(path), "--max-steps", "50", "--quiet"]) == 3


def test_explore_cyclic_wait_prints_deadlock(cyclic_file, capsys):
    assert main(["explore", cyclic_file]) == 1
    out = capsys.readouterr().out
    assert "deadlock 0:" in out
    assert "A#0 at a1" in out
    assert "end-reachable A: no" in out


def test_explore_pingpong_clean(pingpong_file, capsys):
    assert main(["explore", pingpong_file, "--max-states", "1000"]) == 0
    out = capsys.readouterr().out
    assert "complete: yes" in out


def test_export_dot(pingpong_file, capsys):
    assert main(["export", pingpong_file, "--format", "dot"]) == 0
    out = capsys.readouterr().out
    assert out.count("digraph") == 3


def test_export_json(pingpong_file, capsys):
    assert main(["export", pingpong_file, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "model"


def test_analyze_notation(tmp_path, capsys):
    path = tmp_path / "sbpm.xml"
    path.write_text(notation_to_xml(sbpm_default_notation()), encoding="utf-8")
    assert main(["analyze-notation", str(path)]) == 0
    out = capsys.readouterr().out
    assert "deficit" not in out


def test_analyze_notation_with_anomalies(tmp_path, capsys):
    from blockbpm.notation import BlockKind, SemanticConstruct, define_notation
    from blockbpm.persistence import notation_to_xml as n2x

    n = define_notation(
        [BlockKind("a", color=(0, 0, 0)), BlockKind("b", color=(200, 200, 200))],
        [],
        [SemanticConstruct("c1"), SemanticConstruct("c2")],
        [("a", "c1"), ("b", "c1")],
    )
    path = tmp_path / "odd.xml"
    path.write_text(n2x(n), encoding="utf-8")
    assert main(["analyze-notation", str(path)]) == 1
    out = capsys.readouterr().out
    assert "redundancy: c1" in out and "deficit: c2" in out


def test_trace_document_export(pingpong_file, capsys):
    assert main(["trace", pingpong_file]) == 0
    out = capsys.readouterr().out
    assert 'kind="trace"' in out and 'status="Completed"' in out


def test_missing_file_reports_error(capsys):
    assert main(["validate", "/does/not/exist.xml"]) == 1
    assert "error" in capsys.readouterr().err
