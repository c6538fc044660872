"""Tests for the experiment presets."""

import math

import numpy as np
import pytest

from fdistill.experiments.config import ConfigError, parse_config
from fdistill.experiments.presets import (
    BASELINE_KINDS,
    CURVE_COLUMNS,
    GRAD_CHECK_KINDS,
    TRAINED_KINDS,
    compare_models,
    run_experiment,
    run_preset,
    run_trial,
    trial_seed,
    write_loss_curves,
)
from fdistill.experiments.result_table import SUMMARY_TRIAL
from fdistill.models import forced_model, random_model, uniform_model

SMALL = {"vocab": 3, "horizon": 3, "teacher_order": 2, "student_order": 1}


class TestTrialSeed:
    """Tests for the per-trial seeds."""

    def test_values(self) -> None:
        """Check that trial seeds come from a seed sequence of base seed and trial."""
        expected = int(np.random.SeedSequence([5, 3]).generate_state(1)[0])
        assert trial_seed(5, 3) == expected

    def test_distinct(self) -> None:
        """Check that trials and base seeds give different seeds."""
        seeds = {trial_seed(seed, trial) for seed in range(3) for trial in range(10)}
        assert len(seeds) == 30


class TestTheoremCheck:
    """Tests for the THEOREM_CHECK preset."""

    def test_records(self) -> None:
        """Check the records and verdicts of a small run."""
        spec = parse_config(overrides={**SMALL, "trials": 3, "seed": 7})
        table = run_preset(spec).table

        assert len(table) == 13
        assert table.passed
        assert table.records[-1].trial == SUMMARY_TRIAL
        assert table.records[-1].metrics["strictly_loose_pairs"] >= 1.0
        kinds = [rec.kind for rec in table.records[:4]]
        assert kinds == ["KL", "RKL", "JS", "TVD"]

    def test_trial_metrics(self) -> None:
        """Check the metrics recorded for each divergence."""
        spec = parse_config(overrides={**SMALL, "trials": 1})
        records = {rec.kind: rec for rec in run_trial(spec, 0).records}

        assert {"residual", "duality_gap", "pinsker_margin"} <= set(
            records["KL"].metrics
        )
        assert "engine_gap" in records["RKL"].checks
        assert "stepwise_mixture" in records["JS"].metrics
        tvd = records["TVD"].metrics
        assert tvd["stepwise_exact"] == pytest.approx(
            0.5 * (tvd["teacher_side_bound"] + tvd["student_side_bound"])
        )

    def test_workers(self) -> None:
        """Check that spreading trials over processes gives identical results."""
        overrides = {**SMALL, "trials": 3, "seed": 2}
        serial = run_preset(parse_config(overrides=overrides)).table
        parallel = run_preset(parse_config(overrides={**overrides, "workers": 2}))

        assert [rec.to_dict() for rec in parallel.table.records] == [
            rec.to_dict() for rec in serial.records
        ]

    @pytest.mark.parametrize(
        "overrides",
        [
            pytest.param(
                {"vocab": 3, "horizon": 5, "student_order": 1, "trials": 20},
                id="V3T5_20_pairs",
            ),
            pytest.param(
                {"vocab": 4, "horizon": 4, "trials": 50},
                id="V4T4_50_pairs",
                marks=pytest.mark.slow,
            ),
        ],
    )
    def test_many_pairs(self, overrides) -> None:
        """Check the step-wise identities and TVD bounds on many random pairs."""
        table = run_preset(parse_config(overrides=overrides)).table

        assert table.passed
        assert len(table) == 4 * overrides["trials"] + 1

    def test_run_experiment(self) -> None:
        """Check that run_experiment returns the table's records."""
        spec = parse_config(overrides={**SMALL, "trials": 2})
        records = run_experiment(spec)

        assert [rec.to_dict() for rec in records] == [
            rec.to_dict() for rec in run_preset(spec).table.records
        ]


class TestGradCheck:
    """Tests for the GRAD_CHECK preset."""

    def test_records(self) -> None:
        """Check that analytic gradients agree with finite differences."""
        spec = parse_config(overrides={**SMALL, "preset": "GRAD_CHECK", "trials": 2})
        table = run_preset(spec).table

        assert len(table) == 2 * len(GRAD_CHECK_KINDS)
        assert table.passed
        labels = {rec.kind for rec in table.records}
        assert "JS[EXACT_MARGINAL_RATIO]" in labels
        assert "SEQKD" in labels


class TestEfficiency:
    """Tests for the EFFICIENCY preset."""

    def test_teacher_queries(self) -> None:
        """Check the teacher queries of online and offline sampling."""
        spec = parse_config(
            overrides={
                "preset": "EFFICIENCY",
                "vocab": 2,
                "horizon": 3,
                "teacher_order": 2,
                "student_order": 1,
                "trials": 1,
                "steps": 50,
                "offline_cache_size": 10,
                "kind": "KL",
            }
        )
        (rec,) = run_preset(spec).table.records

        assert rec.metrics["online_teacher_evals"] == 300
        assert rec.metrics["offline_teacher_evals"] == 180
        assert rec.checks["teacher_evals_saved"].passed

    @pytest.mark.parametrize("kind", ["RKL", "ENGINE", "SEQKD"])
    def test_online_only_kinds(self, kind) -> None:
        """Check that objectives without teacher samples are rejected."""
        spec = parse_config(overrides={"preset": "EFFICIENCY", "kind": kind})
        with pytest.raises(ConfigError, match="draws no teacher samples") as excinfo:
            run_preset(spec)
        assert excinfo.value.keys == ["kind"]


class TestModeStudy:
    """Tests for the MODE_STUDY preset."""

    def test_records(self) -> None:
        """Check the records of a short run."""
        spec = parse_config(
            overrides={
                "preset": "MODE_STUDY",
                "vocab": 3,
                "horizon": 3,
                "trials": 2,
                "steps": 5,
                "risk_samples": 50,
            }
        )
        table = run_preset(spec).table

        assert len(table) == 2 * (len(TRAINED_KINDS) + 1) + 1
        for rec in table.records:
            if rec.kind in TRAINED_KINDS:
                assert {"r_llh", "r_cvg", "final_divergence"} <= set(rec.metrics)
        comparison = table.records[len(TRAINED_KINDS)]
        assert comparison.kind == "KL/RKL"
        assert set(comparison.checks) == {"r_cvg_gap", "r_llh_gap"}
        summary = table.records[-1]
        assert set(summary.checks) == {"js_between_trials", "tvd_between_trials"}
        assert summary.checks["js_between_trials"].tolerance == 2.0

    def test_tilted_start(self) -> None:
        """Check that the tilt towards the first mode changes the shared start."""
        overrides = {
            "preset": "MODE_STUDY",
            "vocab": 3,
            "horizon": 3,
            "trials": 1,
            "steps": 0,
            "risk_samples": 200,
        }
        tilted = run_preset(parse_config(overrides=overrides)).table.records
        untilted = run_preset(
            parse_config(overrides={**overrides, "mode_tilt": 0.0})
        ).table.records

        assert tilted[0].metrics["r_cvg"] > untilted[0].metrics["r_cvg"]
        assert tilted[0].metrics["r_llh"] < untilted[0].metrics["r_llh"]

    @pytest.mark.slow
    def test_defaults(self) -> None:
        """Check the mode averaging and collapse ordering at the default settings."""
        table = run_preset(parse_config(overrides={"preset": "MODE_STUDY"})).table
        comparisons = [rec for rec in table.records if rec.kind == "KL/RKL"]
        summary = table.records[-1]

        assert len(comparisons) == 5
        for rec in comparisons:
            assert rec.metrics["r_cvg_gap"] > 0.0
            assert rec.metrics["r_llh_gap"] > 0.0
        assert summary.checks["js_between_trials"].passed
        assert summary.checks["tvd_between_trials"].passed
        assert table.passed

    @pytest.mark.parametrize(
        "overrides,key",
        [
            pytest.param({"student_order": 1}, "student_order", id="student_order"),
            pytest.param({"teacher_order": 1}, "teacher_order", id="teacher_order"),
        ],
    )
    def test_invalid_orders(self, overrides, key) -> None:
        """Check the teacher and student orders the mode study needs."""
        spec = parse_config(overrides={"preset": "MODE_STUDY", **overrides})
        with pytest.raises(ConfigError) as excinfo:
            run_preset(spec)
        assert excinfo.value.keys == [key]


class TestConvergence:
    """Tests for the CONVERGENCE preset."""

    overrides = {
        "preset": "CONVERGENCE",
        "vocab": 2,
        "horizon": 3,
        "teacher_order": 2,
        "student_order": 2,
        "trials": 1,
        "warm_start_steps": 0,
    }

    def test_curves(self, tmp_path) -> None:
        """Check the loss curves and teacher queries of a short run."""
        spec = parse_config(overrides={**self.overrides, "steps": 20})
        outcome = run_preset(spec)
        records = {rec.kind: rec for rec in outcome.table.records}

        kinds = TRAINED_KINDS + BASELINE_KINDS

        assert len(outcome.curves) == 20 * len(kinds)
        assert records["KL"].metrics["teacher_evals"] == 120
        assert records["RKL"].metrics["teacher_evals"] == 60
        assert records["ENGINE"].metrics["teacher_evals"] == 60
        assert all(
            math.isfinite(point.loss) and point.trial == 0 for point in outcome.curves
        )

        path = tmp_path / "curves.csv"
        write_loss_curves(outcome.curves, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(CURVE_COLUMNS)
        assert len(lines) == 1 + 20 * len(kinds)
        assert lines[1].startswith("1,ENGINE,0,")

    def test_baselines(self) -> None:
        """Check that the baselines are recorded without a convergence check."""
        spec = parse_config(overrides={**self.overrides, "steps": 5})
        records = {rec.kind: rec for rec in run_preset(spec).table.records}

        assert set(records) == {*TRAINED_KINDS, *BASELINE_KINDS}
        assert "final_js" in records["KL"].checks
        for kind in BASELINE_KINDS:
            assert "final_js" in records[kind].metrics
            assert not records[kind].checks

    def test_warm_start(self) -> None:
        """Check that a warm start is paid for in teacher queries."""
        spec = parse_config(overrides={**self.overrides, "steps": 20})
        warm = parse_config(
            overrides={**self.overrides, "steps": 20, "warm_start_steps": 25}
        )
        cold_records = {rec.kind: rec for rec in run_preset(spec).table.records}
        warm_records = {rec.kind: rec for rec in run_preset(warm).table.records}

        assert warm_records["RKL"].metrics["teacher_evals"] == (
            cold_records["RKL"].metrics["teacher_evals"] + 100 * 3
        )

    def test_reduced_capacity(self) -> None:
        """Check that convergence is only asserted for full-capacity students."""
        spec = parse_config(
            overrides={**self.overrides, "student_order": 0, "steps": 5}
        )
        for rec in run_preset(spec).table.records:
            assert "final_js" in rec.metrics
            assert not rec.checks

    @pytest.mark.slow
    def test_converges(self) -> None:
        """Check that every divergence moves the student towards the teacher."""
        spec = parse_config(
            overrides={**self.overrides, "steps": 1000, "learning_rate": 0.05}
        )
        for rec in run_preset(spec).table.records:
            if rec.kind in TRAINED_KINDS:
                assert rec.metrics["final_js"] < 0.25 * rec.metrics["initial_js"]

    @pytest.mark.slow
    def test_default_scale(self) -> None:
        """Check that every divergence reaches the teacher at V=4, T=4 in 5000 steps."""
        spec = parse_config(overrides={"preset": "CONVERGENCE"})
        table = run_preset(spec).table
        records = {rec.kind: rec for rec in table.records}

        assert (spec.scale.vocab, spec.scale.horizon, spec.train.steps) == (4, 4, 5000)
        for kind in TRAINED_KINDS:
            assert records[kind].metrics["final_js"] <= 1.0e-2
        assert table.passed


class TestCompareModels:
    """Tests for comparing two saved models."""

    def test_random_models(self) -> None:
        """Check that random models pass every comparison check."""
        teacher = random_model(3, 3, 2, rng=4)
        student = random_model(3, 3, 1, rng=5)
        records = compare_models(teacher, student)

        assert [rec.kind for rec in records] == ["KL", "RKL", "JS", "TVD"]
        assert all(rec.passed for rec in records)
        assert all(rec.preset == "DIVERGENCE" for rec in records)

    def test_forced_teacher(self) -> None:
        """Check infinite divergences against a model with partial support."""
        teacher = forced_model(3, 3, (0, 1, 2))
        student = uniform_model(3, 3)
        records = {rec.kind: rec for rec in compare_models(teacher, student)}

        assert records["KL"].metrics["brute_force"] == pytest.approx(3 * math.log(3))
        assert math.isinf(records["RKL"].metrics["brute_force"])
        assert records["RKL"].metrics["residual"] == 0.0
        assert all(rec.passed for rec in records.values())

    def test_mixture_mode(self) -> None:
        """Check that the mixture JS residual is reported without a check."""
        teacher = random_model(3, 3, 2, rng=4)
        student = random_model(3, 3, 1, rng=5)
        records = {
            rec.kind: rec for rec in compare_models(teacher, student, "mixture")
        }
        assert "residual" in records["JS"].metrics
        assert "residual" not in records["JS"].checks

    def test_mismatch(self) -> None:
        """Check that models of different sizes cannot be compared."""
        with pytest.raises(ValueError):
            compare_models(uniform_model(3, 3), uniform_model(2, 3))
