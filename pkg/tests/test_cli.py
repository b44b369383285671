"""Tests for problem files and the command-line entry point."""

import json

import pytest  # ty:ignore[unresolved-import]

from schouten_lab.cli import (
    EXIT_FAILED,
    EXIT_INFRA,
    EXIT_OK,
    build_parser,
    main,
    parse_problem,
    parse_problem_text,
    run_suite,
    summary_lines,
)
from schouten_lab.errors import ParseError, UnknownCoordinate, UnknownKey
from schouten_lab.report import CheckReport

SO3 = """{
  "chart": ["x1", "x2", "x3"],
  "tensors": {"psi": {"degree": 2, "components": {"0,1": "x3", "1,2": "x1", "2,0": "x2"}}},
  "functions": {"norm": "x1^2 + x2^2 + x3^2"},
  "casimirs": {"norm": "psi"},
  "samples": 5
}"""

SPLIT = """{
  "chart": ["q1", "p1", "c1"],
  "tensors": {
    "psi": {"degree": 2, "components": {"0,1": "1"}},
    "v": {"degree": 1, "components": {"2": "1"}},
    "a1": {"degree": 2, "components": {"0,1": "c1*q1^2"}}
  },
  "foliation": {"poisson": "psi", "casimirs": ["c1"], "duals": ["v"], "leaf_indices": [0, 1]},
  "series": ["psi", "a1"],
  "order": 1
}"""


def strip_times(payload: str) -> list[dict[str, object]]:
    reports = json.loads(payload)
    for r in reports:
        r.pop("wall_time")
    return reports


class TestProblemFiles:
    """Parsing and validation of JSON problem files."""

    def test_parse(self) -> None:
        problem = parse_problem_text(SO3)
        assert problem.chart is not None and problem.chart.names == ("x1", "x2", "x3")
        assert problem.tensors["psi"].degree == 2
        assert set(problem.functions) == {"norm"}
        assert problem.foliation is None

    def test_points_are_seeded(self) -> None:
        problem = parse_problem_text(SO3)
        first, second = problem.points(), problem.points()
        assert first is not None and second is not None
        assert first.shape == (5, 3)
        assert (first == second).all()

    def test_foliation(self) -> None:
        problem = parse_problem_text(SPLIT)
        assert problem.foliation is not None
        assert problem.foliation.leaf_indices == (0, 1)
        assert problem.foliation.is_adapted

    def test_expression_position(self) -> None:
        text = '{\n  "chart": ["x", "y"],\n  "functions": {"f": "x^"}\n}'
        with pytest.raises(ParseError) as info:
            parse_problem_text(text)
        assert (info.value.line, info.value.col) == (3, 25)

    def test_unknown_coordinate(self) -> None:
        text = '{"chart": ["x", "y"], "functions": {"f": "x + w"}}'
        with pytest.raises(UnknownCoordinate) as info:
            parse_problem_text(text)
        assert info.value.line == 1
        assert text[info.value.col - 1] == "w"

    def test_unknown_key(self) -> None:
        with pytest.raises(UnknownKey) as info:
            parse_problem_text('{"chart": ["x"], "bogus": 1}')
        assert info.value.col == 19

    def test_malformed_json(self) -> None:
        with pytest.raises(ParseError) as info:
            parse_problem_text('{\n  "chart": [\n}')
        assert info.value.line == 3

    def test_tensors_need_chart(self) -> None:
        with pytest.raises(ParseError, match="chart"):
            parse_problem_text('{"functions": {"f": "1"}}')

    def test_casimir_names_checked(self) -> None:
        with pytest.raises(ParseError, match="unknown function"):
            parse_problem_text('{"chart": ["x"], "casimirs": {"f": "psi"}}')

    def test_not_utf8(self, problem_file) -> None:  # type: ignore[no-untyped-def]
        path = problem_file("")
        path.write_bytes(b'{"chart": ["\xff"]}')
        with pytest.raises(ParseError, match="utf-8"):
            parse_problem(path)

    def test_tolerances_validated(self) -> None:
        with pytest.raises(ParseError):
            parse_problem_text('{"tolerances": {"samples": 0}}')


class TestSuite:
    def test_exit_code_and_order(self) -> None:
        ok = CheckReport(check="b", passed=True)
        bad = CheckReport(check="a", passed=False)
        reports, code = run_suite([lambda: [ok], lambda: [bad]], jobs=2)
        assert [r.check for r in reports] == ["a", "b"]
        assert code == EXIT_FAILED

    def test_summary(self) -> None:
        lines = summary_lines([CheckReport(check="axioms.jacobi", passed=True)])
        assert lines[0].startswith("PASS  axioms.jacobi")

    def test_parser_requires_command(self) -> None:
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestMain:
    """End-to-end runs of the entry point."""

    def test_check_axioms(self, tmp_path) -> None:  # type: ignore[no-untyped-def]
        out = tmp_path / "axioms.json"
        code = main(["check-axioms", "--trials", "4", "--dim", "3", "--out", str(out)])
        assert code == EXIT_OK
        reports = json.loads(out.read_text(encoding="utf-8"))
        assert [r["check"] for r in reports] == sorted(r["check"] for r in reports)
        assert all(r["pass"] for r in reports)

    def test_deterministic(self, capsys) -> None:  # type: ignore[no-untyped-def]
        argv = ["check-axioms", "--trials", "3", "--dim", "4", "--seed", "5", "--checks", "oracle"]
        main(argv)
        first = capsys.readouterr().out
        main(argv)
        second = capsys.readouterr().out
        assert strip_times(first) == strip_times(second)

    def test_poisson_verify(self, problem_file, capsys) -> None:  # type: ignore[no-untyped-def]
        code = main(["poisson-verify", "--problem", str(problem_file(SO3))])
        assert code == EXIT_OK
        checks = {r["check"] for r in json.loads(capsys.readouterr().out)}
        assert checks == {"poisson.jacobi.psi", "poisson.casimir.norm"}

    def test_poisson_verify_failure(self, problem_file) -> None:  # type: ignore[no-untyped-def]
        text = SO3.replace('"x1^2 + x2^2 + x3^2"', '"x1"')
        assert main(["poisson-verify", "--problem", str(problem_file(text))]) == EXIT_FAILED

    def test_homological_solve(self, problem_file, capsys) -> None:  # type: ignore[no-untyped-def]
        code = main(["homological-solve", "--problem", str(problem_file(SPLIT))])
        assert code == EXIT_OK
        (report,) = json.loads(capsys.readouterr().out)
        assert report["check"] == "homological.solve"
        assert len(report["parameters"]["generators"]) == 1

    def test_euler_exact_checks(self, capsys) -> None:  # type: ignore[no-untyped-def]
        code = main(["euler", "--preset", "so(2,2)", "--checks", "jacobi,casimir,generator"])
        assert code == EXIT_OK
        assert len(json.loads(capsys.readouterr().out)) == 3

    def test_dirac_demo(self, capsys) -> None:  # type: ignore[no-untyped-def]
        code = main(["dirac", "--demo", "--checks", "casimir,theta", "--samples", "4"])
        assert code == EXIT_OK
        assert {r["check"] for r in json.loads(capsys.readouterr().out)} == {
            "dirac.casimir",
            "dirac.theta",
        }

    def test_dirac_needs_instance(self) -> None:
        assert main(["dirac"]) == EXIT_INFRA

    def test_unknown_check(self) -> None:
        assert main(["euler", "--checks", "bogus"]) == EXIT_INFRA

    def test_missing_problem_file(self, tmp_path) -> None:  # type: ignore[no-untyped-def]
        assert main(["poisson-verify", "--problem", str(tmp_path / "none.json")]) == EXIT_INFRA

    def test_bad_problem_file(self, problem_file) -> None:  # type: ignore[no-untyped-def]
        path = problem_file('{"chart": ["x"], "functions": {"f": "x^"}}')
        assert main(["poisson-verify", "--problem", str(path)]) == EXIT_INFRA

    def test_unexpected_error(self, monkeypatch, caplog) -> None:  # type: ignore[no-untyped-def]
        def crash(*args: object) -> None:
            raise RuntimeError("worker died")

        monkeypatch.setattr("schouten_lab.cli.run_suite", crash)
        assert main(["check-axioms", "--trials", "1", "--dim", "3"]) == EXIT_INFRA
        assert "unexpected failure running check-axioms" in caplog.text

    @pytest.mark.integration
    def test_triviality_dirac(self, capsys) -> None:  # type: ignore[no-untyped-def]
        code = main(["triviality", "--case", "dirac", "--samples", "3", "--eps-grid", "0.1"])
        assert code == EXIT_OK
        (report,) = json.loads(capsys.readouterr().out)
        assert report["check"] == "dirac.triviality"
