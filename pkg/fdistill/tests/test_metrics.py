"""Tests for the mode averaging and mode collapse diagnostics."""

import math

import numpy as np
import pytest

from fdistill.metrics import (
    coverage_risk,
    distinct_ngram,
    likelihood_risk,
    risk_report,
    sequence_nll,
    teacher_dist,
)
from fdistill.models import bimodal_teacher, forced_model, random_model, uniform_model
from fdistill.objectives import student_seq_entropy


class TestRisks:
    """Tests for the likelihood and coverage risks."""

    def test_sequence_nll_floor(self) -> None:
        """Check that impossible tokens are scored at the probability floor."""
        model = forced_model(2, 2, (0, 1))

        assert sequence_nll(model, (0, 1)) == 0.0
        assert sequence_nll(model, (1, 1)) == pytest.approx(-math.log(1.0e-12))
        assert sequence_nll(model, (1, 0), prob_floor=1.0e-3) == pytest.approx(
            -2.0 * math.log(1.0e-3)
        )

    def test_uniform_teacher(self) -> None:
        """Check that a uniform model charges T ln V nats for any sequence."""
        teacher = uniform_model(3, 4)
        samples = [(0, 1, 2, 0), (2, 2, 2, 2)]

        assert likelihood_risk(teacher, samples) == pytest.approx(4.0 * math.log(3.0))
        assert coverage_risk(teacher, samples) == pytest.approx(4.0 * math.log(3.0))

    def test_no_samples(self) -> None:
        """Check that risks need at least one sample."""
        with pytest.raises(ValueError, match="at least one sample"):
            likelihood_risk(uniform_model(2, 2), [])

    def test_report_reproducible(self) -> None:
        """Check that a seeded report is reproducible."""
        teacher = random_model(3, 3, 2, rng=0)
        student = random_model(3, 3, 0, rng=1)

        first = risk_report(teacher, student, 200, seed=5)
        second = risk_report(teacher, student, 200, seed=5)

        assert first == second
        assert first.n_samples == 200
        assert first.r_llh_stderr > 0.0

    def test_report_forced(self) -> None:
        """Check the risks of a student that matches a deterministic teacher."""
        teacher = forced_model(2, 3, (1, 0, 1))
        report = risk_report(teacher, teacher, 10, seed=0)

        assert report.r_llh == 0.0
        assert report.r_cvg == 0.0
        assert report.r_llh_stderr == 0.0

    def test_collapsed_student(self) -> None:
        """Check that a student on one mode of a bimodal teacher misses coverage."""
        teacher = bimodal_teacher(3, 3, (0, 0, 0), (1, 1, 1))
        student = forced_model(3, 3, (0, 0, 0))
        report = risk_report(teacher, student, 500, seed=1)

        assert report.r_cvg > 5.0
        assert report.r_llh < 1.0

    @pytest.mark.parametrize(
        "order,seed",
        [
            pytest.param(0, 2, id="order_0"),
            pytest.param(1, 3, id="order_1"),
            pytest.param(2, 4, id="order_2"),
        ],
    )
    def test_own_samples_entropy(self, order, seed) -> None:
        """Check that a model's risk on its own samples estimates its entropy."""
        model = random_model(3, 3, order, rng=seed)
        samples = model.sample_many(3000, np.random.default_rng(seed))
        nlls = np.array([sequence_nll(model, seq) for seq in samples])
        stderr = np.std(nlls, ddof=1) / np.sqrt(len(nlls))

        assert abs(
            likelihood_risk(model, samples) - student_seq_entropy(model)
        ) <= 3.0 * stderr

    def test_invalid_sample_count(self) -> None:
        """Check that a report needs at least one sample."""
        model = uniform_model(2, 2)
        with pytest.raises(ValueError, match="at least one sample but got 0"):
            risk_report(model, model, 0)


class TestDistinctNgram:
    """Tests for the distinct n-gram fraction."""

    @pytest.mark.parametrize(
        "samples,n,expected",
        [
            pytest.param([(0, 1, 2, 3)] * 5, 2, 0.2, id="repeated"),
            pytest.param([(0, 1, 2), (2, 1, 0)], 2, 1.0, id="all_distinct"),
            pytest.param([(0, 0, 0, 0)], 1, 0.25, id="unigram"),
            pytest.param([(0, 1, 0, 1)], 2, 2.0 / 3.0, id="partial"),
        ],
    )
    def test_values(self, samples, n, expected) -> None:
        """Check the fraction for hand-worked sample sets."""
        assert distinct_ngram(samples, n) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "samples,n,match",
        [
            pytest.param([(0, 1)], 0, "at least 1", id="n_zero"),
            pytest.param([], 2, "at least one sample", id="empty"),
            pytest.param([(0,)], 2, "shorter than", id="short"),
        ],
    )
    def test_invalid(self, samples, n, match) -> None:
        """Check that malformed inputs are rejected."""
        with pytest.raises(ValueError, match=match):
            distinct_ngram(samples, n)

    def test_teacher_dist(self) -> None:
        """Check the teacher diagnostic on a deterministic and a uniform teacher."""
        assert teacher_dist(forced_model(4, 4, (0, 1, 2, 3)), seed=0) == 0.2
        assert teacher_dist(uniform_model(4, 4), seed=0) > 0.2

    def test_teacher_dist_samples(self) -> None:
        """Check that the diagnostic needs several samples."""
        with pytest.raises(ValueError, match="at least 2 samples"):
            teacher_dist(uniform_model(2, 2), per_input_samples=1)
