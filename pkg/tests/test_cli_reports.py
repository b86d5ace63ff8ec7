import json
import math

import pytest

from spectral_picard.cli import main
from spectral_picard.reports import Check, RunReport, emit_csv_series, format_float, parse_csv_series
from spectral_picard.spectral_core import loads_field
from spectral_picard.problems import fixture_names, load_problem, read_problem_document


def run(argv, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    doc = json.loads(out.read_text()) if out.exists() and out.suffix == ".json" else None
    return code, doc


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps({"schema_version": 1, **doc}))
    return str(p)


# reports

def test_report_round_trip_with_nonfinite():
    rep = RunReport("solve", "abc", [Check("x", False, math.inf, {"v": math.nan})],
                    {"iteration": [0, 1], "residual": [1.0, -math.inf]}, {"k": [1, 2]}, ["w"], 0.5, 1)
    text = rep.dumps()
    assert '"inf"' in text and '"nan"' in text
    back = RunReport.loads(text)
    assert back.checks[0].margin == math.inf and math.isnan(back.checks[0].numbers["v"])
    assert back.series["residual"][1] == -math.inf
    assert back.command == "solve" and back.exit_code == 1


def test_report_schema_required():
    with pytest.raises(ValueError):
        RunReport.from_dict({"command": "x"})


def test_csv_rows_and_round_trip():
    values = [0.1, 1 / 3, 2.5e-300, 7.0]
    rep = RunReport("solve", series={"iteration": [0, 1, 2, 3], "residual": values})
    text = emit_csv_series(rep, "residuals")
    lines = text.split("\n")
    assert lines[0] == "iteration,residual" and len(lines) == 6 and lines[-1] == ""
    its, vals = parse_csv_series(text)
    assert its == [0, 1, 2, 3] and vals == values
    assert emit_csv_series(RunReport("solve"), "update_norms") == "iteration,update_norm\n"
    with pytest.raises(KeyError):
        emit_csv_series(rep, "bogus")


def test_format_float_round_trips():
    for x in (0.1, 1e-17, 123456789.123456789, 2 ** -1074):
        assert float(format_float(x)) == x


# verify-lemmas

def test_verify_selected_suite(tmp_path):
    code, doc = run(["verify-lemmas", "--suite", "sphere_area"], tmp_path)
    assert code == 0
    assert [c["name"] for c in doc["checks"]] == ["sphere_area.recursion"]
    assert doc["schema"] == "run-report/1"


def test_verify_empty_selection(tmp_path):
    cfg = write_config(tmp_path, {"suites": []})
    code, doc = run(["verify-lemmas", "--config", cfg], tmp_path)
    assert code == 0 and doc["checks"] == []


def test_verify_corrupted_convention_fails(tmp_path):
    cfg = write_config(tmp_path, {"suites": ["gaussian_moments"], "double_factorial_minus_one": 2})
    code, doc = run(["verify-lemmas", "--config", cfg], tmp_path)
    assert code == 1
    assert not doc["checks"][0]["passed"]


def test_verify_default_reports_ratio_failure(tmp_path):
    code, doc = run(["verify-lemmas"], tmp_path)
    status = {c["name"]: c["passed"] for c in doc["checks"]}
    assert status.pop("factorial_ratio.exhaustive") is False
    assert all(status.values())
    assert code == 1


# solve

def test_solve_zero_data(tmp_path):
    code, doc = run(["solve", "--problem", "zero-data"], tmp_path)
    assert code == 0
    assert doc["results"]["verdict"] == "converged" and doc["results"]["iterations"] == 0


def test_solve_small_swirl_writes_fields(tmp_path):
    code, doc = run(["solve", "--problem", "small-swirl"], tmp_path)
    assert code == 0
    assert doc["results"]["final_residual"] < 1e-8
    assert doc["results"]["smallness"]["margin"] > 1
    assert all(m > 1 for m in doc["series"]["condition_margin"])
    fields = json.loads((tmp_path / "report.fields.json").read_text())
    u = [loads_field(json.dumps(c)) for c in fields["u"]]
    assert len(u) == 3 and u[0].time_grid is not None


def test_solve_violating_problem_flags_margin(tmp_path):
    code, doc = run(["solve", "--problem", "large-swirl", "--max-iter", "2"], tmp_path)
    assert doc["results"]["smallness"]["margin"] < 1
    assert any("smallness" in w for w in doc["warnings"])
    assert code == 1 and doc["results"]["verdict"] != "converged"


def test_solve_is_reproducible(tmp_path):
    _, a = run(["solve", "--problem", "small-swirl"], tmp_path, "a.json")
    _, b = run(["solve", "--problem", "small-swirl"], tmp_path, "b.json")
    assert a["input_digest"] == b["input_digest"]
    assert a["series"] == b["series"]


def test_solve_overrides(tmp_path):
    code, doc = run(["solve", "--problem", "small-swirl", "--time-grid", "0.5,50", "--mode-box", "3"], tmp_path)
    assert code == 0 and len(doc["series"]["iteration"]) >= 1


def test_solve_csv_and_export(tmp_path):
    code, doc = run(["solve", "--problem", "small-swirl"], tmp_path)
    rows = len(doc["series"]["iteration"])
    out = tmp_path / "res.csv"
    assert main(["export", "--report", str(tmp_path / "report.json"), "--series", "residuals", "--out", str(out)]) == 0
    its, vals = parse_csv_series(out.read_text())
    assert its == list(range(rows)) and vals == doc["series"]["residual"]
    out2 = tmp_path / "direct.csv"
    assert main(["solve", "--problem", "small-swirl", "--format", "csv", "--out", str(out2)]) == 0
    assert out2.read_text() == out.read_text()


# feasibility and constants

def test_feasibility_coupled_zero_data(tmp_path):
    cfg = write_config(tmp_path, {"feasibility": {"mode": "coupled", "n": 9}})
    code, doc = run(["feasibility", "--config", cfg], tmp_path)
    assert code == 0 and doc["results"]["search"]["feasible"]


def test_feasibility_dimension_gate(tmp_path):
    cfg = write_config(tmp_path, {"feasibility": {"mode": "coupled", "n": 7}})
    assert main(["feasibility", "--config", cfg]) == 1


def test_feasibility_huge_data_empty(tmp_path):
    cfg = write_config(tmp_path, {"feasibility": {"mode": "coupled", "n": 9, "B": 1.0, "data": {"C_phi0": 1e6}}})
    code, doc = run(["feasibility", "--config", cfg], tmp_path)
    assert code == 1 and not doc["results"]["search"]["feasible"]


def test_feasibility_torus_interval(tmp_path):
    cfg = write_config(tmp_path, {"feasibility": {"mode": "torus", "problem": "zero-data"}})
    code, doc = run(["feasibility", "--config", cfg], tmp_path)
    lo, hi = doc["results"]["interval"]
    assert code == 0 and lo == 0 and hi == pytest.approx(math.pi / 6)


def test_feasibility_ns_rn(tmp_path):
    cfg = write_config(tmp_path, {"feasibility": {"mode": "ns-rn", "n": 5, "C": 1e-3, "D": 1e-3}})
    code, doc = run(["feasibility", "--config", cfg], tmp_path)
    assert code == 0 and doc["results"]["condition"]["holds"]


def test_constants_spot(tmp_path):
    data = {k: 0.01 for k in ("C_phi0", "C_phi1", "C_eta0", "C_eta1", "C_f0", "C_g0",
                              "D_phi0", "D_phi1", "D_eta0", "D_eta1", "D_f0", "D_g0")}
    cfg = write_config(tmp_path, {"constants": {"n": 9, "B": 1.0, "C": 0.1, "D": 0.1, "data": data}})
    code, doc = run(["constants", "--config", cfg], tmp_path)
    assert code == 0
    assert doc["results"]["constants"]["M0"] == pytest.approx(95.17130868241757, rel=1e-12)
    assert doc["results"]["constants"]["N2"] == pytest.approx(1911.5638137680364, rel=1e-12)


# configuration errors

@pytest.mark.parametrize("doc", [
    {"unknown_key": 1},
    {"schema_version": 7},
    {"max_iter": 0},
    {"time_grid": "1"},
    {"sizes": {"closure_instances": -1}},
    {"feasibility": {"mood": "coupled"}},
])
def test_bad_configs_exit_2(tmp_path, doc):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"schema_version": 1, **doc}))
    assert main(["verify-lemmas", "--config", str(p)]) == 2


def test_bad_arguments_exit_2(tmp_path):
    assert main(["solve"]) == 2
    assert main(["solve", "--problem", "no-such-fixture"]) == 2
    assert main(["solve", "--problem", "small-swirl", "--time-grid", "x,y"]) == 2
    assert main(["export", "--report", str(tmp_path / "missing.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["bogus-command"])
    assert exc.value.code == 2


# problem documents

def test_fixtures_load():
    assert {"small-swirl", "zero-data", "large-swirl"} <= set(fixture_names())
    for name in fixture_names():
        p = load_problem(name)
        assert p.name == name


def test_problem_document_rejects_unknown_keys(tmp_path):
    doc = read_problem_document("small-swirl")
    doc["viscosity"] = 2.0
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_problem(str(path))
