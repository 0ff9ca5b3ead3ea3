"""Scenario parsing, execution, rendering, and the command line front end."""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

import qhistories as qh
from qhistories.cli import main
from qhistories.errors import DimensionMismatch, ExecutionError, ParseError, UnknownReference

REPO = Path(__file__).resolve().parent.parent
SCENARIOS = REPO / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

MINIMAL = """\
schema: 1
dimension: 2
kets:
  up: [1, 0]
  down: [0, 1]
pdis:
  Z: {members: [up, down]}
commands:
  - validate-pdi: {pdi: Z}
"""


def run_text(text):
    scenario = qh.parse_scenario(text)
    return qh.run_scenario(scenario)


def test_parse_minimal_document():
    scenario = qh.parse_scenario(MINIMAL)
    assert scenario.dimension == 2
    assert set(scenario.kets) == {"up", "down"}
    assert scenario.commands[0].kind == "validate-pdi"


def test_parse_from_path(tmp_path):
    f = tmp_path / "s.yaml"
    f.write_text(MINIMAL)
    assert qh.parse_scenario(f).dimension == 2
    assert qh.parse_scenario(str(f)).dimension == 2
    with pytest.raises(ParseError):
        qh.parse_scenario(str(tmp_path / "missing.yaml"))


def test_parse_rejects_bad_documents():
    with pytest.raises(ParseError):
        qh.parse_scenario("schema: 2\ndimension: 2\n")
    with pytest.raises(ParseError):
        qh.parse_scenario("dimension: 2\n")
    with pytest.raises(ParseError):
        qh.parse_scenario("schema: 1\ndimension: zero\n")
    with pytest.raises(ParseError):
        qh.parse_scenario("schema: 1\ndimension: 2\nsurprise: 1\n")
    with pytest.raises(ParseError):
        qh.parse_scenario("schema: 1\ndimension: 2\ncommands:\n  - fly: {}\n")
    with pytest.raises(ParseError):
        qh.parse_scenario("[unbalanced")


def test_parse_complex_entries():
    text = """\
schema: 1
dimension: 2
kets:
  plus_i: [[0.7071067811865476, 0], [0, 0.7071067811865476]]
"""
    scenario = qh.parse_scenario(text)
    np.testing.assert_allclose(
        scenario.kets["plus_i"], np.array([1.0, 1.0j]) / np.sqrt(2), atol=1e-12
    )
    with pytest.raises(ParseError):
        qh.parse_scenario("schema: 1\ndimension: 2\nkets:\n  bad: [true, false]\n")


def test_parse_normalizes_kets_with_warning():
    text = "schema: 1\ndimension: 2\nkets:\n  long: [3, 4]\n"
    with pytest.warns(UserWarning, match="normalizing"):
        scenario = qh.parse_scenario(text)
    np.testing.assert_allclose(scenario.kets["long"], [0.6, 0.8], atol=1e-12)
    with pytest.raises(ParseError):
        qh.parse_scenario("schema: 1\ndimension: 2\nkets:\n  nil: [0, 0]\n")


def test_parse_unknown_references():
    with pytest.raises(UnknownReference):
        qh.parse_scenario(
            "schema: 1\ndimension: 2\ncommands:\n  - validate-pdi: {pdi: ghost}\n"
        )
    with pytest.raises(UnknownReference):
        qh.parse_scenario(
            "schema: 1\ndimension: 2\npdis:\n  Z: {members: [ghost, ghost2]}\n"
        )


def test_parse_dimension_checks():
    text = """\
schema: 1
dimension: 3
kets:
  up: [1, 0]
  down: [0, 1]
pdis:
  Z: {members: [up, down]}
"""
    with pytest.raises(DimensionMismatch):
        qh.parse_scenario(text)


def test_parse_model_dimension_product():
    text = """\
schema: 1
dimension: 5
kets:
  s1: [1, 0]
  s2: [0, 1]
  ready: [1, 0, 0]
  f1: [0, 1, 0]
  f2: [0, 0, 1]
models:
  meter:
    system_basis: [s1, s2]
    ready: ready
    pointers: [f1, f2]
"""
    with pytest.raises(DimensionMismatch):
        qh.parse_scenario(text)


def test_run_reports_sections_in_order():
    report = run_text(MINIMAL)
    assert report.schema == 1
    assert report.profile == "default"
    assert len(report.sections) == 1
    section = report.sections[0]
    assert section.kind == "validate-pdi"
    assert section.payload["verdict"] == "VALID"
    assert section.payload["members"] == [("up", 1), ("down", 1)]


def test_run_invalid_pdi_is_a_verdict():
    text = """\
schema: 1
dimension: 2
kets:
  up: [1, 0]
  diag: [0.7071067811865476, 0.7071067811865476]
pdis:
  bad: {members: [up, diag]}
commands:
  - validate-pdi: {pdi: bad}
"""
    report = run_text(text)
    assert report.sections[0].payload["verdict"] == "INVALID"


def test_run_execution_error_names_command():
    text = """\
schema: 1
dimension: 2
kets:
  up: [1, 0]
  diag: [0.7071067811865476, 0.7071067811865476]
pdis:
  bad: {members: [up, diag]}
commands:
  - compatibility: {left: bad, right: bad}
"""
    scenario = qh.parse_scenario(text)
    with pytest.raises(ExecutionError, match="command 1 \\(compatibility\\)"):
        qh.run_scenario(scenario)


def test_run_empty_command_list():
    report = run_text("schema: 1\ndimension: 2\n")
    assert report.sections == ()
    text = qh.render_report(report, "text").decode()
    assert "commands: 0" in text
    machine = json.loads(qh.render_report(report, "machine"))
    assert machine["sections"] == []


def test_render_rejects_unknown_format():
    report = run_text(MINIMAL)
    with pytest.raises(ValueError):
        qh.render_report(report, "pdf")


def test_machine_format_rounds_floats():
    scenario = qh.parse_scenario(SCENARIOS / "three_box.yaml")
    report = qh.run_scenario(scenario)
    doc = json.loads(qh.render_report(report, "machine"))
    table = dict(
        (row[0], row[1]) for row in doc["sections"][3]["payload"]["table"]
    )
    assert table["A,phi"] == 0.1111111111
    assert table["notA,phi"] == 0.0


def test_repeated_runs_are_byte_identical():
    for name in ("spin_half", "three_box", "measurement"):
        scenario = qh.parse_scenario(SCENARIOS / f"{name}.yaml")
        for fmt in ("text", "machine"):
            first = qh.render_report(qh.run_scenario(scenario), fmt)
            second = qh.render_report(qh.run_scenario(scenario), fmt)
            assert first == second


def test_fixtures_match_goldens():
    for name in ("spin_half", "three_box", "measurement"):
        scenario = qh.parse_scenario(SCENARIOS / f"{name}.yaml")
        report = qh.run_scenario(scenario)
        assert qh.render_report(report, "text") == (GOLDEN / f"{name}.txt").read_bytes()
        assert qh.render_report(report, "machine") == (GOLDEN / f"{name}.json").read_bytes()


def test_verdicts_survive_in_reports():
    scenario = qh.parse_scenario(SCENARIOS / "spin_half.yaml")
    report = qh.run_scenario(scenario)
    verdicts = {s.index: s.payload.get("verdict") for s in report.sections}
    assert verdicts[2] == "MEANINGLESS"
    assert verdicts[5] == "INCOMPATIBLE"
    assert report.sections[3].payload == {"compatible": False}
    measurement = qh.run_scenario(qh.parse_scenario(SCENARIOS / "measurement.yaml"))
    assert measurement.sections[2].payload["verdict"] == "UNDEFINED"


def test_strict_profile_runs_fixtures():
    scenario = qh.parse_scenario(SCENARIOS / "three_box.yaml")
    report = qh.run_scenario(
        scenario, tolerances=qh.STRICT_TOLERANCES, profile="strict"
    )
    assert report.profile == "strict"
    assert report.sections[0].payload["verdict"] == "CONSISTENT"


def test_cli_text_output():
    runner = CliRunner()
    result = runner.invoke(main, ["run", str(SCENARIOS / "spin_half.yaml")])
    assert result.exit_code == 0
    assert "qhistories report" in result.output
    assert "verdict: MEANINGLESS" in result.output


def test_cli_machine_to_file(tmp_path):
    runner = CliRunner()
    out = tmp_path / "report.json"
    result = runner.invoke(
        main,
        ["run", str(SCENARIOS / "three_box.yaml"), "--format", "machine", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert out.read_bytes() == (GOLDEN / "three_box.json").read_bytes()


def test_cli_strict_profile():
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["run", str(SCENARIOS / "measurement.yaml"), "--tolerance-profile", "strict"],
    )
    assert result.exit_code == 0
    assert "tolerances: strict" in result.output


def test_cli_parse_errors_exit_2(tmp_path):
    runner = CliRunner()
    missing = runner.invoke(main, ["run", str(tmp_path / "none.yaml")])
    assert missing.exit_code == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: 7\n")
    result = runner.invoke(main, ["run", str(bad)])
    assert result.exit_code == 2
    assert "error:" in result.output
    ref = tmp_path / "ref.yaml"
    ref.write_text(
        "schema: 1\ndimension: 2\ncommands:\n  - validate-pdi: {pdi: ghost}\n"
    )
    assert runner.invoke(main, ["run", str(ref)]).exit_code == 2


def test_cli_execution_errors_exit_3(tmp_path):
    f = tmp_path / "exec.yaml"
    f.write_text(
        """\
schema: 1
dimension: 2
kets:
  up: [1, 0]
operators:
  shear:
    - [1, 1]
    - [0, 1]
families:
  f:
    initial: up
    times: [0, 1]
    dynamics: {propagators: [shear]}
    events:
      - members: [up]
        labels: [stay]
commands:
  - probabilities: {family: f}
"""
    )
    runner = CliRunner()
    result = runner.invoke(main, ["run", str(f)])
    assert result.exit_code == 3
    assert "command 1 (probabilities)" in result.output
