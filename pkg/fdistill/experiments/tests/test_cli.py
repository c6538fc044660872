"""Tests for the fdistill command line."""

import json

import pytest

from fdistill.experiments.cli import (
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_PASS,
    build_parser,
    main,
    overrides_from_args,
)
from fdistill.experiments.config import Scale
from fdistill.experiments.presets import ExperimentOutcome
from fdistill.experiments.result_table import CSV_COLUMNS, ResultRecord, ResultTable
from fdistill.model_files import write_model
from fdistill.models import random_model, uniform_model

SMALL = [
    "--vocab",
    "3",
    "--horizon",
    "3",
    "--teacher-order",
    "2",
    "--student-order",
    "1",
]


@pytest.fixture
def model_files(tmp_path):
    """Write a teacher and a student model file and return their paths."""
    teacher_path = tmp_path / "teacher.json"
    student_path = tmp_path / "student.json"
    write_model(random_model(3, 3, 2, rng=1), teacher_path)
    write_model(random_model(3, 3, 1, rng=2), student_path)
    return teacher_path, student_path


class TestParser:
    """Tests for turning command-line flags into settings."""

    def test_overrides(self) -> None:
        """Check that given flags become settings and omitted flags do not."""
        args = build_parser().parse_args(
            ["mode-study", "--seed", "3", "--kind", "reverse_kl", "--js-mode", "exact"]
        )
        assert overrides_from_args(args) == {
            "preset": "MODE_STUDY",
            "seed": 3,
            "kind": "RKL",
            "js_mode": "EXACT_MARGINAL_RATIO",
        }

    def test_output_path(self) -> None:
        """Check that --out sets the output path."""
        args = build_parser().parse_args(["converge", "--out", "results/run"])
        assert overrides_from_args(args)["output_path"] == "results/run"

    def test_invalid_flag_value(self) -> None:
        """Check that malformed flag values exit with the usage status."""
        with pytest.raises(SystemExit) as excinfo:
            main(["check-theorem", "--seed", "abc"])
        assert excinfo.value.code == EXIT_CONFIG

    def test_missing_verb(self) -> None:
        """Check that a verb is required."""
        with pytest.raises(SystemExit):
            main([])


class TestExperimentVerbs:
    """Tests for running experiment presets from the command line."""

    def test_csv(self, capsys) -> None:
        """Check a passing run printed as csv."""
        status = main(["check-theorem", *SMALL, "--trials", "2", "--csv", "-q"])
        lines = capsys.readouterr().out.splitlines()

        assert status == EXIT_PASS
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert all(line.startswith("THEOREM_CHECK,") for line in lines[1:])

    def test_json(self, capsys) -> None:
        """Check a passing run printed as line-delimited JSON."""
        status = main(["check-theorem", *SMALL, "--trials", "2", "--json", "-q"])
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]

        assert status == EXIT_PASS
        assert len(records) == 2 * 4 + 1
        assert all(rec["passed"] for rec in records)

    def test_text(self, capsys) -> None:
        """Check the default text table."""
        status = main(["grad-check", *SMALL, "--trials", "1", "-q"])
        out = capsys.readouterr().out

        assert status == EXIT_PASS
        assert out.splitlines()[-1] == "8/8 checks passed"

    def test_output_files(self, tmp_path) -> None:
        """Check that --out writes the record stream and csv table."""
        out = tmp_path / "results" / "theorem"
        status = main(["check-theorem", *SMALL, "--trials", "1", "--out", str(out)])

        assert status == EXIT_PASS
        assert (tmp_path / "results" / "theorem.jsonl").is_file()
        assert (tmp_path / "results" / "theorem.csv").is_file()

    def test_loss_curves(self, tmp_path) -> None:
        """Check that convergence runs write their loss curves next to the table."""
        out = tmp_path / "converge"
        status = main(
            ["converge", *SMALL, "--vocab", "2", "--steps", "5", "--out", str(out)]
        )
        curves = (tmp_path / "converge_curves.csv").read_text(encoding="utf-8")

        assert status == EXIT_PASS
        assert curves.splitlines()[0] == "step,kind,trial,loss,teacher_evals"
        assert len(curves.splitlines()) == 1 + 5 * 6

    @pytest.mark.parametrize(
        "verb,files",
        [
            pytest.param("check-theorem", (".jsonl", ".csv"), id="check_theorem"),
            pytest.param(
                "converge", (".jsonl", ".csv", "_curves.csv"), id="converge"
            ),
        ],
    )
    def test_same_seed_same_bytes(self, tmp_path, verb, files) -> None:
        """Check that two runs with the same seed write identical files."""
        outputs = []
        for name in ("first", "second"):
            out = tmp_path / name
            argv = [verb, *SMALL, "--trials", "2", "--steps", "5", "--seed", "11"]
            assert main([*argv, "--out", str(out), "-q"]) == EXIT_PASS
            outputs.append(
                [(tmp_path / f"{name}{suffix}").read_bytes() for suffix in files]
            )

        assert outputs[0] == outputs[1]

    def test_config_file(self, tmp_path, capsys) -> None:
        """Check that a configuration file is read and flags override it."""
        path = tmp_path / "theorem.cfg"
        path.write_text(
            "vocab = 3\nhorizon = 3\nteacher_order = 2\nstudent_order = 1\n"
            "trials = 5\n",
            encoding="utf-8",
        )
        argv = ["check-theorem", "--config", str(path), "--trials", "1", "--json"]
        status = main(argv)
        records = capsys.readouterr().out.splitlines()

        assert status == EXIT_PASS
        assert len(records) == 4 + 1

    def test_failing_check(self, mocker) -> None:
        """Check that a failed check gives exit status 1."""
        rec = ResultRecord("CONVERGENCE", 0, 0, Scale(), "KL")
        rec.add("final_js", 0.5, "<=", 1.0e-2)
        mocker.patch(
            "fdistill.experiments.cli.run_preset",
            return_value=ExperimentOutcome(ResultTable([rec]), []),
        )
        assert main(["converge", "-q"]) == EXIT_FAIL

    @pytest.mark.parametrize(
        "argv",
        [
            pytest.param(["check-theorem", "--kind", "hellinger"], id="kind"),
            pytest.param(["check-theorem", "--js-mode", "geometric"], id="js_mode"),
            pytest.param(["check-theorem", "--trials", "0"], id="trials"),
            pytest.param(["check-theorem", "--teacher-order", "9"], id="order"),
            pytest.param(["efficiency", "--kind", "rkl"], id="online_only"),
            pytest.param(["mode-study", "--student-order", "2"], id="mode_study"),
        ],
    )
    def test_config_errors(self, argv) -> None:
        """Check that invalid settings give exit status 2 before any computation."""
        assert main(argv) == EXIT_CONFIG

    def test_unknown_config_key(self, tmp_path) -> None:
        """Check that unknown keys in a configuration file give exit status 2."""
        path = tmp_path / "bad.cfg"
        path.write_text("colour = blue\n", encoding="utf-8")
        assert main(["check-theorem", "--config", str(path)]) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path) -> None:
        """Check that a missing configuration file gives exit status 2."""
        path = tmp_path / "missing.cfg"
        assert main(["check-theorem", "--config", str(path)]) == EXIT_CONFIG


class TestDivergenceVerb:
    """Tests for comparing saved models from the command line."""

    def test_compare(self, model_files, capsys) -> None:
        """Check the divergences between two saved models."""
        teacher_path, student_path = model_files
        status = main(["divergence", str(teacher_path), str(student_path), "--json"])
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]

        assert status == EXIT_PASS
        assert [rec["kind"] for rec in records] == ["KL", "RKL", "JS", "TVD"]

    def test_output_files(self, model_files, tmp_path) -> None:
        """Check that --out writes the comparison."""
        teacher_path, student_path = model_files
        out = tmp_path / "compare.csv"
        status = main(
            ["divergence", str(teacher_path), str(student_path), "--out", str(out)]
        )

        assert status == EXIT_PASS
        assert out.is_file()
        assert out.with_suffix(".jsonl").is_file()

    def test_missing_file(self, model_files, tmp_path) -> None:
        """Check that an unreadable model file gives exit status 2."""
        teacher_path, _ = model_files
        missing = tmp_path / "missing.json"
        assert main(["divergence", str(teacher_path), str(missing)]) == EXIT_CONFIG

    def test_mismatch(self, model_files, tmp_path) -> None:
        """Check that models of different sizes give exit status 2."""
        teacher_path, _ = model_files
        other = tmp_path / "other.json"
        write_model(uniform_model(2, 3), other)
        assert main(["divergence", str(teacher_path), str(other)]) == EXIT_CONFIG

    def test_enumeration_cap(self, model_files, mocker) -> None:
        """Check that models beyond the enumeration cap give exit status 2."""
        mocker.patch.dict("os.environ", {"FDISTILL_ENUM_CAP": "10"})
        teacher_path, student_path = model_files
        assert main(["divergence", str(teacher_path), str(student_path)]) == (
            EXIT_CONFIG
        )


def test_versions(capsys) -> None:
    """Check that the versions verb prints the installed versions."""
    assert main(["versions"]) == EXIT_PASS
    assert "INSTALLED VERSIONS" in capsys.readouterr().out
