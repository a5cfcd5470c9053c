"""
Command dispatch, reports, exports and the command-line entry point.
"""

import json

import pytest

import cli
from config import VERSION
from modules.experiments import run_experiment
from modules.export import export_dot, write_csv
from modules.quotient import decomposition_partition
from modules.specfile import parse_spec

MALNORMAL = """\
rank = 2
seed = 3
command = quotient
subgroup H1 = a

[quotient]
depth = 2

[refine]
depth = 1
deeper = 2

[parabolic]
R = 1
depth = 4
"""

SQUARES = """\
rank = 2
command = malnormal
subgroup S = aa, bb
"""


def test_malnormal_negative_verdict():
    report = run_experiment(parse_spec(SQUARES))
    assert report.exit_status == 2
    cert = report.results["certificate"]
    assert cert["verdict"] is False
    assert cert["witness"]["g"] == "a"
    assert cert["witness"]["element"] == "aa"
    assert report.results["witness_checks"] is True


def test_quotient_report():
    report = run_experiment(parse_spec(MALNORMAL))
    assert report.exit_status == 0
    assert report.error is None
    assert report.results["class_count"] == 9
    assert report.dot.startswith("digraph")


def test_quotient_refuses_non_malnormal_collection():
    report = run_experiment(parse_spec(SQUARES), "quotient")
    assert report.exit_status == 2
    assert report.error["code"] == "NOT_MALNORMAL"


def test_delta_on_tree_ball():
    report = run_experiment(parse_spec(SQUARES), "delta", {"radius": 3})
    assert report.results["estimate"]["delta"] == "0"
    assert report.results["backend"] == "free"


def test_delta_on_imported_graph(tmp_path):
    graph = tmp_path / "cycle.txt"
    graph.write_text("0\n" + "\n".join(f"{i} {(i + 1) % 8}" for i in range(8)) + "\n")
    report = run_experiment(parse_spec(SQUARES), "delta", {"graph": str(graph)})
    assert report.results["estimate"]["delta"] == "2"
    assert report.results["backend"] == "imported"


def test_refine_report():
    report = run_experiment(parse_spec(MALNORMAL), "refine")
    assert report.results["class_counts"] == [3, 9]
    assert report.results["perfect"] is True
    assert report.results["perfectness_witness"]


def test_parabolic_report_and_bad_R():
    config = parse_spec(MALNORMAL)
    report = run_experiment(config, "parabolic")
    assert report.results["covered"] is True
    bad = run_experiment(config, "parabolic", {"R": 0, "depth": 4})
    assert bad.exit_status == 2
    assert bad.error["code"] == "BAD_R"


def test_missing_parameter():
    report = run_experiment(parse_spec(MALNORMAL), "collapse")
    assert report.exit_status == 1
    assert report.error["code"] == "VALIDATION_ERROR"


def test_reports_are_deterministic():
    config = parse_spec(MALNORMAL)
    first = run_experiment(config).to_json(timing=False)
    second = run_experiment(config).to_json(timing=False)
    assert first == second
    payload = json.loads(first)
    assert payload["version"] == VERSION
    assert payload["seed"] == 3
    assert "timing_seconds" not in payload


def test_fold_dot():
    report = run_experiment(parse_spec(SQUARES), "fold")
    dot = report.dot
    assert dot.count("->") == 4
    assert "doublecircle" in dot
    assert report.results["subgroups"][0]["lambda"] == 1


def test_partition_dot(cyclic_a):
    dot = export_dot(decomposition_partition([cyclic_a], 1))
    assert dot.count("shape=") == 3
    assert dot.count("->") == 3


def test_export_rejects_other_objects():
    with pytest.raises(TypeError):
        export_dot("not a graph")


def test_write_csv(tmp_path):
    path = tmp_path / "sweep.csv"
    assert write_csv(path, ["N", "D_emp"], [(4, 2), (6, 2)]) == 2
    assert path.read_text().splitlines() == ["N,D_emp", "4,2", "6,2"]


# -- Command line ------------------------------------------------------------

def test_cli_version(capsys):
    assert cli.main(["version"]) == 0
    assert VERSION in capsys.readouterr().out


def test_cli_writes_report(tmp_path):
    spec = tmp_path / "axis.spec"
    spec.write_text(MALNORMAL)
    out = tmp_path / "report.json"
    dot = tmp_path / "classes.dot"
    status = cli.main(["quotient", "--spec", str(spec), "--out", str(out), "--dot", str(dot), "--depth", "1"])
    assert status == 0
    payload = json.loads(out.read_text())
    assert payload["results"]["class_count"] == 3
    assert payload["config"]["parameters"]["depth"] == "1"
    assert dot.read_text().startswith("digraph")


def test_cli_exit_statuses(tmp_path, capsys):
    squares = tmp_path / "squares.spec"
    squares.write_text(SQUARES)
    assert cli.main(["malnormal", "--spec", str(squares)]) == 2
    broken = tmp_path / "broken.spec"
    broken.write_text("rank = 1\n")
    assert cli.main(["malnormal", "--spec", str(broken)]) == 1
    assert "Error:" in capsys.readouterr().err
    assert cli.main(["malnormal", "--spec", str(tmp_path / "missing.spec")]) == 1


def test_cli_horizon_exit(tmp_path):
    spec = tmp_path / "conical.spec"
    spec.write_text(MALNORMAL + "\n[conical]\npoint = (ab)\nimax = 8\ndepth = 8\n")
    assert cli.main(["conical", "--spec", str(spec)]) == 3


def test_cli_parse_failure_writes_error_report(tmp_path, capsys):
    spec = tmp_path / "typo.spec"
    spec.write_text("rank = 2\nsubgroup H = a\n[quotient]\ndepth = two\n")
    out = tmp_path / "report.json"
    assert cli.main(["quotient", "--spec", str(spec), "--out", str(out), "--seed", "4"]) == 1
    payload = json.loads(out.read_text())
    assert payload["command"] == "quotient"
    assert payload["seed"] == 4
    assert payload["results"] is None
    assert payload["error"]["code"] == "PARSE_ERROR"
    assert payload["error"]["detail"] == {"line": 4, "field": "depth"}
    assert "Error: line 4" in capsys.readouterr().err


def test_cli_missing_document_writes_error_report(tmp_path, capsys):
    assert cli.main(["malnormal", "--spec", str(tmp_path / "missing.spec")]) == 1
    payload = json.loads(capsys.readouterr().out)
    assert payload["error"]["code"] == "VALIDATION_ERROR"
    assert payload["error"]["detail"] == {"field": "spec"}


def test_ball_cap_is_a_delta_flag(tmp_path):
    spec = tmp_path / "squares.spec"
    spec.write_text(SQUARES)
    out = tmp_path / "delta.json"
    assert cli.main(["delta", "--spec", str(spec), "--radius", "4", "--ball-cap", "10", "--out", str(out)]) == 3
    assert json.loads(out.read_text())["error"]["code"] == "RESOURCE_LIMIT"
    with pytest.raises(SystemExit):
        cli.main(["quotient", "--spec", str(spec), "--ball-cap", "10"])


def test_unreadable_graph_is_a_validation_error(tmp_path):
    report = run_experiment(parse_spec(SQUARES), "delta", {"graph": str(tmp_path / "nowhere.txt")})
    assert report.exit_status == 1
    assert report.error["code"] == "VALIDATION_ERROR"
    assert report.error["detail"]["field"] == "graph"
