"""Tests for sequence models, sampling and decoding."""

import math

import numpy as np
import pytest
from scipy import stats

from fdistill.models import (
    ENUM_CAP_ENV,
    EnumerationCapError,
    SequenceModel,
    TabularARModel,
    bimodal_teacher,
    enumerate_sequences,
    enumeration_cap,
    forced_model,
    interpolate,
    random_model,
    uniform_model,
)


class TestTabularARModel:
    """Tests for the TabularARModel class."""

    @pytest.mark.parametrize(
        "vocab_size,horizon,order,stationary,n_rows",
        [
            pytest.param(2, 3, 0, False, 3, id="unigram"),
            pytest.param(2, 3, 1, False, 5, id="bigram"),
            pytest.param(2, 4, 1, True, 3, id="stationary_bigram"),
            pytest.param(2, 4, 1, False, 7, id="position_bigram"),
            pytest.param(3, 3, 2, False, 13, id="full_history"),
        ],
    )
    def test_layout(self, vocab_size, horizon, order, stationary, n_rows) -> None:
        """Check the number of logits rows for different context lengths."""
        model = TabularARModel(vocab_size, horizon, order, stationary=stationary)

        assert model.n_rows == n_rows
        assert model.logits.shape == (n_rows, vocab_size)

    @pytest.mark.parametrize(
        "vocab_size,horizon,order,match",
        [
            pytest.param(1, 3, 0, "Vocabulary size must be at least 2", id="vocab"),
            pytest.param(2, 0, 0, "Horizon must be at least 1", id="horizon"),
            pytest.param(2, 3, 3, "Order must satisfy", id="order_too_long"),
            pytest.param(2, 3, -1, "Order must satisfy", id="negative_order"),
        ],
    )
    def test_invalid_sizes(self, vocab_size, horizon, order, match) -> None:
        """Check that invalid sizes are rejected."""
        with pytest.raises(ValueError, match=match):
            TabularARModel(vocab_size, horizon, order)

    def test_invalid_logits(self) -> None:
        """Check that malformed logits tables are rejected."""
        with pytest.raises(ValueError, match="must have shape"):
            TabularARModel(2, 3, 0, logits=np.zeros((2, 2)))
        with pytest.raises(ValueError, match="NaN or \\+inf"):
            TabularARModel(2, 1, 0, logits=[[0.0, np.nan]])

    def test_logits_read_only(self) -> None:
        """Check that the logits of a model cannot be modified in place."""
        model = uniform_model(2, 2)
        with pytest.raises(ValueError, match="read-only"):
            model.logits[0, 0] = 1.0

    def test_repr(self) -> None:
        """Check TabularARModel string representation."""
        assert repr(TabularARModel(3, 4, 1, stationary=True)) == (
            "TabularARModel(vocab_size=3, horizon=4, order=1, stationary=True)"
        )

    def test_equality(self) -> None:
        """Check that models compare equal by layout and logits."""
        model = random_model(3, 3, 1, rng=0)

        assert model == random_model(3, 3, 1, rng=0)
        assert model != random_model(3, 3, 1, rng=1)
        assert model != uniform_model(3, 3, 1)
        assert model != "model"

    def test_cond_dist(self) -> None:
        """Check that a prefix selects the row of its last order tokens."""
        model = random_model(3, 4, 1, rng=2)

        np.testing.assert_array_equal(
            model.cond_dist((0, 2), 3), model.cond_dist((1, 2), 3)
        )
        assert model.cond_dist((2,), 2).sum() == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "prefix,position",
        [
            pytest.param((0,), 3, id="inconsistent"),
            pytest.param((0, 1, 0), None, id="past_horizon"),
        ],
    )
    def test_cond_dist_invalid_position(self, prefix, position) -> None:
        """Check that positions not matching the prefix are rejected."""
        model = uniform_model(2, 3)
        with pytest.raises(ValueError):
            model.cond_dist(prefix, position)

    def test_cond_table(self) -> None:
        """Check that the tabulated conditionals follow lexicographic prefix order."""
        model = random_model(2, 3, 1, rng=5)
        table = model.cond_table(3)

        assert table.shape == (4, 2)
        for row, prefix in zip(table, enumerate_sequences(2, 2), strict=True):
            np.testing.assert_array_equal(row, model.cond_dist(prefix, 3))

    def test_seq_distribution(self) -> None:
        """Check that enumerated sequence probabilities are normalised."""
        model = random_model(3, 3, 2, rng=7)
        dist = model.seq_distribution()

        assert len(dist) == 27
        assert sum(dist.values()) == pytest.approx(1.0)
        for seq, prob in dist.items():
            assert math.log(prob) == pytest.approx(model.seq_logprob(seq))

    def test_seq_logprob_chain_rule(self) -> None:
        """Check the tabulated log-probability against the generic chain rule."""
        model = random_model(3, 4, 2, rng=11)
        for seq in [(0, 1, 2, 0), (2, 2, 2, 2), (1, 0, 0, 2)]:
            assert model.seq_logprob(seq) == pytest.approx(
                SequenceModel.seq_logprob(model, seq)
            )

    def test_check_sequence(self) -> None:
        """Check that sequences of the wrong length or vocabulary are rejected."""
        model = uniform_model(2, 3)
        with pytest.raises(ValueError, match="does not have length 3"):
            model.seq_logprob((0, 1))
        with pytest.raises(ValueError, match="tokens outside"):
            model.seq_logprob((0, 1, 2))

    def test_with_logits(self) -> None:
        """Check that new logits keep the layout and leave the source untouched."""
        model = uniform_model(2, 3, order=1)
        updated = model.with_logits(np.ones(model.logits.shape))

        assert updated.same_layout(model)
        assert np.all(model.logits == 0.0)


class TestSampling:
    """Tests for ancestral sampling."""

    def test_reproducible(self) -> None:
        """Check that equal seeds give equal samples."""
        model = random_model(3, 4, 1, rng=0)
        first = model.sample_many(20, np.random.default_rng(42))
        second = model.sample_many(20, np.random.default_rng(42))

        assert first == second

    def test_forced(self) -> None:
        """Check that a forced model only generates its sequence."""
        model = forced_model(3, 4, (2, 0, 1, 1))
        samples = model.sample_many(50, np.random.default_rng(0))

        assert set(samples) == {(2, 0, 1, 1)}
        assert model.seq_logprob((2, 0, 1, 1)) == 0.0
        assert model.seq_logprob((2, 0, 1, 0)) == -math.inf

    def test_forced_wrong_length(self) -> None:
        """Check that a forced sequence must span the horizon."""
        with pytest.raises(ValueError, match="does not have length 3"):
            forced_model(2, 3, (0, 1))

    def test_goodness_of_fit(self) -> None:
        """Check sample frequencies against the exact sequence distribution."""
        model = random_model(2, 3, 2, rng=4)
        n_samples = 20000
        samples = model.sample_many(n_samples, np.random.default_rng(9))
        seqs = enumerate_sequences(2, 3)
        observed = [samples.count(seq) for seq in seqs]
        expected = model.seq_probs() * n_samples

        result = stats.chisquare(observed, expected)
        assert result.pvalue > 1.0e-4


class TestBeamSearch:
    """Tests for beam search decoding."""

    def test_full_width_is_argmax(self) -> None:
        """Check that a beam covering every sequence finds the mode."""
        model = random_model(3, 3, 2, rng=8)
        dist = model.seq_distribution()

        assert model.beam_search(27) == max(dist, key=dist.__getitem__)

    def test_ties(self) -> None:
        """Check that ties go to the lexicographically smallest sequence."""
        assert uniform_model(3, 3).beam_search(2) == (0, 0, 0)

    def test_greedy(self) -> None:
        """Check that a width of one follows the most likely token."""
        model = bimodal_teacher(3, 3, (0, 0, 0), (2, 2, 2))
        assert model.beam_search(1) in {(0, 0, 0), (2, 2, 2)}

    def test_invalid_width(self) -> None:
        """Check that beam widths below one are rejected."""
        with pytest.raises(ValueError, match="Beam width must be at least 1"):
            uniform_model(2, 2).beam_search(0)


class TestEnumerationCap:
    """Tests for the enumeration cap."""

    def test_default(self, mocker) -> None:
        """Check the default cap when the environment variable is unset."""
        mocker.patch.dict("os.environ", clear=True)
        assert enumeration_cap() == 10**7

    def test_environment_override(self, mocker) -> None:
        """Check that the environment variable lowers the cap."""
        mocker.patch.dict("os.environ", {ENUM_CAP_ENV: "10"})
        assert len(enumerate_sequences(2, 3)) == 8
        with pytest.raises(EnumerationCapError, match="exceeds the enumeration cap"):
            enumerate_sequences(2, 4)
        with pytest.raises(EnumerationCapError):
            uniform_model(2, 4).seq_distribution()

    @pytest.mark.parametrize("raw", ["abc", "0"])
    def test_invalid_environment(self, mocker, raw) -> None:
        """Check that a malformed cap is reported."""
        mocker.patch.dict("os.environ", {ENUM_CAP_ENV: raw})
        with pytest.raises(ValueError, match="must be a positive integer"):
            enumeration_cap()


class TestModelBuilders:
    """Tests for the model construction helpers."""

    def test_random_model_reproducible(self) -> None:
        """Check that random models depend only on their seed."""
        assert random_model(2, 3, 1, rng=3) == random_model(2, 3, 1, rng=3)
        with pytest.raises(ValueError, match="Logit scale must be positive"):
            random_model(2, 3, 1, rng=3, scale=0.0)

    def test_bimodal_teacher(self) -> None:
        """Check that both modes of the bimodal teacher dominate."""
        mode_a, mode_b = (0, 0, 0, 0), (1, 1, 1, 1)
        teacher = bimodal_teacher(4, 4, mode_a, mode_b, sharpness=5.0)
        dist = teacher.seq_distribution()

        assert teacher.order == 3
        assert dist[mode_a] > 0.45
        assert dist[mode_b] > 0.45
        assert dist[mode_a] == pytest.approx(dist[mode_b])

    @pytest.mark.parametrize(
        "mode_a,mode_b,sharpness,match",
        [
            pytest.param((0, 0), (0, 0), 5.0, "must differ", id="identical"),
            pytest.param((0, 0), (1,), 5.0, "must have length", id="length"),
            pytest.param((0, 0), (1, 1), 0.0, "Sharpness must be", id="sharpness"),
        ],
    )
    def test_bimodal_invalid(self, mode_a, mode_b, sharpness, match) -> None:
        """Check that invalid modes are rejected."""
        with pytest.raises(ValueError, match=match):
            bimodal_teacher(2, 2, mode_a, mode_b, sharpness)

    def test_interpolate(self) -> None:
        """Check the end points and midpoint of logits interpolation."""
        start = random_model(2, 3, 1, rng=0)
        end = random_model(2, 3, 1, rng=1)

        assert interpolate(start, end, 0.0) == start
        assert interpolate(start, end, 1.0) == end
        np.testing.assert_allclose(
            interpolate(start, end, 0.5).logits, 0.5 * (start.logits + end.logits)
        )

    def test_interpolate_infinite_logits(self) -> None:
        """Check interpolation towards a model with zero-probability tokens."""
        start = uniform_model(2, 3)
        end = forced_model(2, 3, (0, 1, 1))

        assert interpolate(start, end, 0.0) == start
        assert not np.isnan(interpolate(start, end, 0.0).seq_probs()).any()
        np.testing.assert_allclose(
            interpolate(start, end, 0.5).seq_probs(), end.seq_probs()
        )
        np.testing.assert_allclose(
            interpolate(end, start, 0.0).seq_probs(), end.seq_probs()
        )

    def test_interpolate_layout_mismatch(self) -> None:
        """Check that models with different layouts cannot be interpolated."""
        with pytest.raises(ValueError, match="Cannot interpolate"):
            interpolate(uniform_model(2, 3, 0), uniform_model(2, 3, 1), 0.5)
