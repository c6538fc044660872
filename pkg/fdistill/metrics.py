"""
Diagnostics for mode averaging and mode collapse of a distilled student.

Extended Summary
----------------
The likelihood risk scores student samples under the teacher: a mode-averaging
student produces sequences the teacher finds unlikely. The coverage risk scores
teacher samples under the student: a mode-collapsing student misses part of the
teacher's support. Both are reported in nats per sequence. The distinct n-gram
fraction of several teacher samples measures how multimodal the teacher is.

Routine Listings
----------------
- RiskReport
- sequence_nll()
- likelihood_risk()
- coverage_risk()
- risk_report()
- distinct_ngram()
- teacher_dist()

"""

import math
from typing import NamedTuple

import numpy as np
import numpy.typing as npt

from fdistill.models import SeedLike, Sequence, SequenceModel
from fdistill.objectives import DEFAULT_PROB_FLOOR

#: Default number of teacher samples behind the distinct bi-gram diagnostic.
TEACHER_DIST_SAMPLES = 5


class RiskReport(NamedTuple):
    """
    Likelihood and coverage risk of a student, with Monte Carlo standard errors.

    Attributes
    ----------
    r_llh : float
        mean teacher NLL of student samples [nats per sequence]
    r_cvg : float
        mean student NLL of teacher samples [nats per sequence]
    n_samples : int
        number of samples behind each risk
    r_llh_stderr : float
        standard error of ``r_llh``
    r_cvg_stderr : float
        standard error of ``r_cvg``
    """

    r_llh: float
    r_cvg: float
    n_samples: int
    r_llh_stderr: float = 0.0
    r_cvg_stderr: float = 0.0


def sequence_nll(
    model: SequenceModel, seq: Sequence, prob_floor: float = DEFAULT_PROB_FLOOR
) -> float:
    """
    Calculate the negative log-likelihood of a sequence with floored probabilities.

    Parameters
    ----------
    model : SequenceModel
        model scoring the sequence
    seq : Sequence
        sequence of length T
    prob_floor : float, default=1e-12
        lower clamp on each conditional probability

    Returns
    -------
    float
        ``-sum_t log max(model(y_t | y_<t), prob_floor)``, always finite
    """
    model.check_sequence(seq)
    picked = np.array(
        [model.cond_dist(seq[:t], t + 1)[seq[t]] for t in range(len(seq))]
    )
    return float(-np.sum(np.log(np.maximum(picked, prob_floor))))


def _nlls(
    model: SequenceModel, samples: list[Sequence], prob_floor: float
) -> npt.NDArray[np.float64]:
    if not samples:
        msg = "Risks need at least one sample."
        raise ValueError(msg)
    return np.array([sequence_nll(model, seq, prob_floor) for seq in samples])


def _stderr(values: npt.NDArray[np.float64]) -> float:
    if len(values) < 2:  # noqa: PLR2004
        return 0.0
    return float(np.std(values, ddof=1) / math.sqrt(len(values)))


def likelihood_risk(
    teacher: SequenceModel,
    student_samples: list[Sequence],
    prob_floor: float = DEFAULT_PROB_FLOOR,
) -> float:
    """
    Calculate the likelihood risk: the mean teacher NLL of student samples.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p
    student_samples : list of Sequence
        sequences sampled from the student
    prob_floor : float, default=1e-12
        lower clamp on each conditional probability

    Returns
    -------
    float
        risk in nats per sequence; high values flag atypical student outputs

    Raises
    ------
    ValueError
        If there are no samples.

    Examples
    --------
    >>> from fdistill.models import uniform_model
    >>> round(likelihood_risk(uniform_model(2, 3), [(0, 1, 1), (1, 1, 1)]), 12)
    2.07944154168
    """
    return float(np.mean(_nlls(teacher, student_samples, prob_floor)))


def coverage_risk(
    student: SequenceModel,
    teacher_samples: list[Sequence],
    prob_floor: float = DEFAULT_PROB_FLOOR,
) -> float:
    """
    Calculate the coverage risk: the mean student NLL of teacher samples.

    Parameters
    ----------
    student : SequenceModel
        the student q
    teacher_samples : list of Sequence
        sequences sampled from the teacher
    prob_floor : float, default=1e-12
        lower clamp on each conditional probability

    Returns
    -------
    float
        risk in nats per sequence; high values flag teacher support the student
        misses

    Raises
    ------
    ValueError
        If there are no samples.
    """
    return float(np.mean(_nlls(student, teacher_samples, prob_floor)))


def risk_report(
    teacher: SequenceModel,
    student: SequenceModel,
    n_samples: int,
    seed: SeedLike = None,
    prob_floor: float = DEFAULT_PROB_FLOOR,
) -> RiskReport:
    """
    Sample both models and report both risks with their standard errors.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p
    student : SequenceModel
        the student q
    n_samples : int
        samples drawn from each model
    seed : int, Generator, SeedSequence or None, default=None
        seed of the draws
    prob_floor : float, default=1e-12
        lower clamp on each conditional probability

    Returns
    -------
    RiskReport
        the two risks, sample count and standard errors

    Raises
    ------
    ValueError
        If n_samples is less than 1.
    """
    if n_samples < 1:
        msg = f"Risk estimates need at least one sample but got {n_samples}."
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    llh = _nlls(teacher, student.sample_many(n_samples, rng), prob_floor)
    cvg = _nlls(student, teacher.sample_many(n_samples, rng), prob_floor)
    return RiskReport(
        float(np.mean(llh)),
        float(np.mean(cvg)),
        n_samples,
        _stderr(llh),
        _stderr(cvg),
    )


def distinct_ngram(samples: list[Sequence], n: int) -> float:
    """
    Calculate the fraction of distinct n-grams across a set of samples.

    Parameters
    ----------
    samples : list of Sequence
        the sequences, each at least n tokens long
    n : int
        n-gram length, at least 1

    Returns
    -------
    float
        number of unique n-grams over the total number of n-grams, in (0, 1]

    Raises
    ------
    ValueError
        If there are no samples, n < 1, or a sample is shorter than n.

    Examples
    --------
    >>> distinct_ngram([(0, 1, 2, 3)] * 5, 2)
    0.2
    """
    if n < 1:
        msg = f"n-gram length must be at least 1 but got {n}."
        raise ValueError(msg)
    if not samples:
        msg = "Distinct n-gram fraction needs at least one sample."
        raise ValueError(msg)
    ngrams = []
    for seq in samples:
        if len(seq) < n:
            msg = f"Sample {seq} is shorter than the n-gram length {n}."
            raise ValueError(msg)
        ngrams.extend(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))
    return len(set(ngrams)) / len(ngrams)


def teacher_dist(
    teacher: SequenceModel,
    per_input_samples: int = TEACHER_DIST_SAMPLES,
    seed: SeedLike = None,
) -> float:
    """
    Measure teacher multimodality as the distinct bi-gram fraction of its samples.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p
    per_input_samples : int, default=5
        number of teacher samples, at least 2
    seed : int, Generator, SeedSequence or None, default=None
        seed of the draws

    Returns
    -------
    float
        distinct bi-gram fraction of the samples

    Raises
    ------
    ValueError
        If fewer than 2 samples are requested.
    """
    if per_input_samples < 2:  # noqa: PLR2004
        msg = f"TeacherDist needs at least 2 samples but got {per_input_samples}."
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    return distinct_ngram(teacher.sample_many(per_input_samples, rng), 2)
