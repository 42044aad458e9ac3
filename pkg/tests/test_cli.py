# tests/test_cli.py
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.cli.main import main
from src.cli.problem import build_operator, diag_payload, parse_problem, serialize_problem
from src.cli.report import OutputFormat, emit_report
from src.core.funbackend import diag_equal
from src.shared.errors import ParseError, SchemaError
from src.shared.models import ProblemFile, Report

rational_strings = st.tuples(st.integers(-9, 9), st.integers(1, 9)).map(lambda pq: f"{pq[0]}/{pq[1]}")


def run_json(capsys, *argv):
    code = main([*argv, "--format", "json"])
    return code, json.loads(capsys.readouterr().out)


def test_polar_of_nilpotent(capsys, problems_dir):
    code, data = run_json(capsys, "polar", str(problems_dir / "nilpotent2.json"))
    assert code == 0
    assert data["status"] == "complete"
    assert data["backend"] == "matrix"
    assert data["verdicts"] == {"polar_decomposition": True}
    entries = data["payload"]["V"]["entries"]
    assert entries[0][1][0][0][0][0] == pytest.approx(1.0, abs=1e-12)
    assert abs(entries[1][0][0][0][0][0]) <= 1e-12
    assert max(data["residuals"].values()) <= 1e-8


def test_btransform_of_diagonal(capsys, problems_dir):
    code, data = run_json(capsys, "btransform", str(problems_dir / "diag34.json"))
    assert code == 0
    entries = data["payload"]["F"]["entries"]
    assert entries[0][0][0][0][0][0] == pytest.approx(3 / np.sqrt(10))
    assert entries[1][1][0][0][0][0] == pytest.approx(4 / np.sqrt(17))
    assert data["verdicts"] == {"contractive": True}
    assert data["residuals"]["round_trip"] <= 1e-8


def test_inverse_transform_of_non_contraction(capsys, problems_dir):
    code, data = run_json(capsys, "inv-btransform", str(problems_dir / "diag34.json"))
    assert code == 2
    assert data["status"] == "failed"
    assert data["errors"][0]["code"] == "defect_singular"


def test_multiplication_by_x_is_a_negative_verdict(capsys, problems_dir):
    code, data = run_json(capsys, "verify-thm31", str(problems_dir / "mult_x.json"))
    assert code == 0
    assert data["status"] == "complete"
    assert not (data["verdicts"]["cond_i"] or data["verdicts"]["cond_ii"] or data["verdicts"]["cond_iii"])
    assert data["verdicts"]["equivalent"]
    assert data["certificate"] == {"entry": 1, "point": "0", "reason": "isolated_root"}


def test_polar_over_function_backend_without_summand(capsys, problems_dir):
    code, data = run_json(capsys, "polar", str(problems_dir / "mult_x.json"))
    assert code == 0
    assert data["verdicts"] == {"polar_decomposition": False}
    assert data["certificate"]["point"] == "0"


def test_pinv_over_function_backend(capsys, problems_dir):
    code, data = run_json(capsys, "pinv", str(problems_dir / "mult_xminus2.json"))
    assert code == 0
    assert data["verdicts"]["generalized_inverse"]
    piece = data["payload"]["s"]["entries"][0]["pieces"][0]
    assert piece == {"lo": "0", "hi": "1", "num": ["1"], "den": ["-2", "1"]}


def test_two_component_projection(capsys, problems_dir):
    code, data = run_json(capsys, "verify-thm31", str(problems_dir / "two_component_projection.json"))
    assert code == 0
    assert data["verdicts"]["cond_i"] and data["verdicts"]["cond_ii"] and data["verdicts"]["cond_iii"]
    assert data["certificate"] is None


def test_unsupported_command_for_backend(capsys, problems_dir):
    code, data = run_json(capsys, "btransform", str(problems_dir / "mult_x.json"))
    assert code == 2
    assert data["errors"][0]["code"] == "unsupported_command_for_backend"


def test_graded_report(capsys, problems_dir):
    code, data = run_json(capsys, "graded-report", str(problems_dir / "graded_inv_n.json"))
    assert code == 0
    assert data["verdicts"] == {"unbounded_inverse": True, "range_not_uniformly_closed": True}
    assert len(data["payload"]["components"]) == 50
    assert data["payload"]["components"][-1]["norm_inverse"] == pytest.approx(50.0)


def test_graded_truncation_flag(capsys, problems_dir):
    code, data = run_json(capsys, "graded-report", str(problems_dir / "graded_inv_n.json"), "--components", "5")
    assert code == 0
    assert len(data["payload"]["components"]) == 5
    assert data["verdicts"] == {"unbounded_inverse": False, "range_not_uniformly_closed": False}


def test_closed_range_of_graded(capsys, problems_dir):
    code, data = run_json(capsys, "closed-range", str(problems_dir / "graded_inv_n.json"))
    assert code == 0
    assert not data["verdicts"]["range_closed"]
    assert not data["verdicts"]["s_bounded"]
    assert data["verdicts"]["consistent"]


def test_classify_identity(capsys, problems_dir):
    code, data = run_json(capsys, "classify", str(problems_dir / "identity.json"))
    assert code == 0
    assert data["verdicts"] == {"normal": True, "selfadjoint": True, "positive": True, "transform_agrees": True}


def test_json_output_is_deterministic(capsys, problems_dir):
    path = str(problems_dir / "nilpotent2.json")
    assert main(["verify-thm31", path, "--format", "json"]) == 0
    first = capsys.readouterr().out
    assert main(["verify-thm31", path, "--format", "json"]) == 0
    second = capsys.readouterr().out
    assert first == second
    report = Report.model_validate_json(first)
    assert emit_report(report, OutputFormat.JSON) == first
    assert report.stats is None
    assert report.verdicts["cond_ii"]


def test_timing_adds_stats(capsys, problems_dir):
    code, data = run_json(capsys, "classify", str(problems_dir / "diag34.json"), "--timing")
    assert code == 0
    assert "processing_time_seconds" in data["stats"]


def test_text_report(capsys, problems_dir):
    assert main(["check-complemented", str(problems_dir / "mult_x.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("check-complemented: complete")
    assert "residuals:" not in out
    assert "certificate: entry 1 vanishes at x = 0 (isolated root)" in out

    assert main(["polar", str(problems_dir / "diag34.json")]) == 0
    out = capsys.readouterr().out
    assert "residuals:" in out
    assert "polar_factorization" in out


def test_bad_arguments(capsys):
    assert main(["nonsense"]) == 2
    assert main(["selftest", "--seed", "-1"]) == 2
    assert main(["selftest", "--tol", "0"]) == 2
    capsys.readouterr()


def test_schema_error_names_location(tmp_path, capsys):
    problem = {
        "backend": "matrix",
        "profile": [1],
        "domain_rank": 1,
        "operator": {"entries": [[[[[[1, 0], [0, 0]]]]]]},
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(problem))
    with pytest.raises(SchemaError) as excinfo:
        parse_problem(path)
    assert excinfo.value.location == "operator.entries[0][0][0]"

    code, data = run_json(capsys, "polar", str(path))
    assert code == 2
    assert data["errors"][0]["code"] == "schema_error"


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "extra.json"
    path.write_text(json.dumps({"backend": "matrix", "profile": [1], "domain_rank": 1,
                                "operator": {"entries": [[[[[[1, 0]]]]]]}, "colour": "red"}))
    with pytest.raises(SchemaError) as excinfo:
        parse_problem(path)
    assert excinfo.value.location == "colour"


def test_parse_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"backend": "matrix",\n  "profile": [1,}\n')
    with pytest.raises(ParseError) as excinfo:
        parse_problem(path)
    assert excinfo.value.location.startswith("line 2")
    with pytest.raises(ParseError):
        parse_problem(tmp_path / "missing.json")


def test_discontinuous_function_is_a_schema_error(tmp_path):
    path = tmp_path / "jump.json"
    path.write_text(json.dumps({
        "backend": "function",
        "domain": [["0", "1"]],
        "domain_rank": 1,
        "operator": {"entries": [{"pieces": [
            {"lo": "0", "hi": "1/2", "num": ["0"]},
            {"lo": "1/2", "hi": "1", "num": ["1"]},
        ]}]},
    }))
    with pytest.raises(SchemaError) as excinfo:
        parse_problem(path)
    assert excinfo.value.location == "operator.entries[0]"


@pytest.mark.parametrize("name", ["nilpotent2.json", "identity.json", "two_component_projection.json",
                                  "graded_inv_n.json"])
def test_serialized_problem_parses_back(name, problems_dir, tmp_path):
    problem = parse_problem(problems_dir / name)
    path = tmp_path / name
    path.write_text(serialize_problem(problem))
    assert parse_problem(path) == problem

@given(coefficients=st.lists(rational_strings, min_size=1, max_size=4))
def test_function_problem_round_trips_with_rational_coefficients(coefficients, tmp_path_factory):
    problem = ProblemFile.model_validate({
        "backend": "function",
        "domain": [["-1/2", "1/3"], ["2/3", "5/4"]],
        "domain_rank": 1,
        "operator": {"entries": [{"poly": coefficients}]},
    })
    t = build_operator(problem)
    rebuilt = problem.model_copy(update={"operator": diag_payload(t)})
    path = tmp_path_factory.mktemp("roundtrip") / "rational.json"
    path.write_text(serialize_problem(rebuilt))
    parsed = parse_problem(path)
    assert parsed.operator == rebuilt.operator
    assert diag_equal(build_operator(parsed), t)


def test_selftest_on_small_corpus(capsys):
    code, data = run_json(capsys, "selftest", "--corpus-size", "5", "--seed", "1")
    assert code == 0
    assert data["payload"]["corpus_size"] == 5
    assert data["payload"]["seed"] == 1
    assert all(data["verdicts"].values())
    assert set(data["verdicts"]) == {
        "polar_equivalence", "bounded_transform", "transform_intertwining", "dual_construction",
        "corollaries", "function_dichotomy", "graded_unbounded",
    }


GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
GOLDEN_RESIDUAL_TOL = 1e-8


def _rounded(value):
    if isinstance(value, float):
        return round(value, 6) + 0.0
    if isinstance(value, dict):
        return {key: _rounded(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_rounded(item) for item in value]
    return value


def _canonical(data):
    """Report with payload floats at 6 decimals and residuals as within-tolerance flags."""
    return {
        **data,
        "residuals": {key: value <= GOLDEN_RESIDUAL_TOL for key, value in data["residuals"].items()},
        "payload": _rounded(data["payload"]),
    }


@pytest.mark.parametrize("problem", sorted(p.name for p in GOLDEN_DIR.glob("*.json")))
def test_problem_matches_golden_report(problem, capsys, problems_dir):
    golden = json.loads((GOLDEN_DIR / problem).read_text(encoding="utf-8"))
    code, data = run_json(capsys, *golden["argv"], str(problems_dir / problem))
    assert code == golden["report"]["exit_code"]
    assert _canonical(data) == golden["report"]


def test_every_shipped_problem_has_a_golden_report(problems_dir):
    assert {p.name for p in problems_dir.glob("*.json")} == {p.name for p in GOLDEN_DIR.glob("*.json")}


def test_selftest_records_numerical_failures_per_case(capsys, monkeypatch):
    def diverging(*args, **kwargs):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setattr("src.cli.selftest.verify_thm31", diverging)
    code, data = run_json(capsys, "selftest", "--corpus-size", "2")
    assert code == 1
    assert data["status"] == "failed"
    assert not data["errors"]
    assert not data["verdicts"]["polar_equivalence"]
    assert data["payload"]["suites"]["polar_equivalence"]["failed"] == 2
    assert data["verdicts"]["bounded_transform"]
