"""
Exact sequence-level oracles by enumeration and dynamic prefix sweeps.

Extended Summary
----------------
Brute-force divergences compare the two full distributions over all V**T sequences.
Step-wise values are computed by sweeping positions in order, carrying the
log-probability of every prefix under each model, and weighting the per-step
divergence of each prefix's conditionals by the prefix probability of the sampling
model. No sampling is involved, so every identity between the two can be checked to
round-off.

Routine Listings
----------------
- brute_force_seq_divergence()
- stepwise_exact()
- tvd_one_sided_bounds()
- engine_loss_exact()
- student_seq_entropy()
- cross_entropy_exact()
- excluded_constant()

"""

import numpy as np
import numpy.typing as npt

from fdistill.divergences import (
    DivergenceKind,
    check_kind,
    pointwise_divergence,
    rowwise_divergence,
)
from fdistill.models import TabularARModel, check_enumerable

from .objective import JsConditionalMode, js_mode_from_alias, mixture_weight


def check_compatible(teacher: object, student: object) -> None:
    """
    Check that two models are tabular and share vocabulary and horizon.

    Raises
    ------
    TypeError
        If either model is not a TabularARModel.
    ValueError
        If vocabulary size or horizon differ.
    """
    if not (
        isinstance(teacher, TabularARModel) and isinstance(student, TabularARModel)
    ):
        wrong = student if isinstance(teacher, TabularARModel) else teacher
        msg = f"Exact oracles need TabularARModel inputs but got {type(wrong)}."
        raise TypeError(msg)
    if (teacher.vocab_size, teacher.horizon) != (student.vocab_size, student.horizon):
        msg = (
            f"Models must share vocabulary and horizon, got V={teacher.vocab_size}, "
            f"T={teacher.horizon} and V={student.vocab_size}, T={student.horizon}."
        )
        raise ValueError(msg)
    check_enumerable(teacher.vocab_size, teacher.horizon)


def _expect(log_weights: npt.NDArray[np.float64], values: npt.NDArray[np.float64]):
    """Probability-weighted sum that ignores values at zero-weight prefixes."""
    weights = np.exp(log_weights)
    support = weights > 0.0
    return float(np.sum(weights[support] * values[support]))


def _advance(
    log_prefix: npt.NDArray[np.float64], log_table: npt.NDArray[np.float64]
) -> npt.NDArray[np.float64]:
    """Extend every prefix by one token."""
    return (log_prefix[:, None] + log_table).reshape(-1)


def brute_force_seq_divergence(
    teacher: TabularARModel,
    student: TabularARModel,
    kind: DivergenceKind,
) -> float:
    """
    Calculate a sequence-level divergence by enumerating every sequence.

    Parameters
    ----------
    teacher : TabularARModel
        the teacher p
    student : TabularARModel
        the student q
    kind : DivergenceKind
        which f-divergence to compute

    Returns
    -------
    float
        D_f(p(Y) || q(Y)) over all V**T sequences, possibly +inf for KL/RKL

    Raises
    ------
    EnumerationCapError
        If V**T exceeds the enumeration cap.
    ValueError
        If the models do not share vocabulary and horizon.

    Examples
    --------
    >>> from fdistill.models import forced_model, uniform_model
    >>> uniform, forced = uniform_model(2, 2), forced_model(2, 2, (0, 1))
    >>> brute_force_seq_divergence(uniform, forced, "TVD")
    0.75
    """
    check_kind(kind)
    check_compatible(teacher, student)
    return pointwise_divergence(teacher.seq_probs(), student.seq_probs(), kind)


def stepwise_exact(
    teacher: TabularARModel,
    student: TabularARModel,
    kind: DivergenceKind,
    js_mode: JsConditionalMode = "EXACT_MARGINAL_RATIO",
) -> float:
    """
    Calculate the step-wise decomposition of a divergence with exact expectations.

    Parameters
    ----------
    teacher : TabularARModel
        the teacher p
    student : TabularARModel
        the student q
    kind : DivergenceKind
        which f-divergence to decompose
    js_mode : JsConditionalMode, default="EXACT_MARGINAL_RATIO"
        how the per-step mixture of the Jensen-Shannon decomposition is formed

    Returns
    -------
    float
        the step-wise value; equal to the sequence-level divergence for KL, RKL and
        JS with exact marginal ratios, an upper bound for TVD

    Raises
    ------
    EnumerationCapError
        If V**T exceeds the enumeration cap.
    ValueError
        If the models do not share vocabulary and horizon.

    Notes
    -----
    The step-wise TVD value weights the per-step total variation by one half under
    teacher prefixes and one half under student prefixes, i.e. it is the mean of the
    two values returned by ``tvd_one_sided_bounds``.

    With ``js_mode="MIXTURE_OF_CONDITIONALS"`` the per-step mixture is
    ``(p(.|prefix) + q(.|prefix)) / 2`` instead of the conditional of the sequence
    mixture, and the result generally differs from the sequence-level divergence.
    """
    check_kind(kind)
    check_compatible(teacher, student)
    js_mode = js_mode_from_alias(js_mode)

    log_p = np.zeros(1)
    log_q = np.zeros(1)
    total = 0.0
    for t in range(1, teacher.horizon + 1):
        p_rows = teacher.cond_table(t)
        q_rows = student.cond_table(t)
        if kind == "KL":
            total += _expect(log_p, rowwise_divergence(p_rows, q_rows, "KL"))
        elif kind == "RKL":
            total += _expect(log_q, rowwise_divergence(p_rows, q_rows, "RKL"))
        elif kind == "TVD":
            rows_tvd = rowwise_divergence(p_rows, q_rows, "TVD")
            total += 0.5 * _expect(log_p, rows_tvd) + 0.5 * _expect(log_q, rows_tvd)
        else:
            if js_mode == "EXACT_MARGINAL_RATIO":
                weight = mixture_weight(log_p, log_q)[:, None]
            else:
                weight = np.full((p_rows.shape[0], 1), 0.5)
            m_rows = (1.0 - weight) * p_rows + weight * q_rows
            total += 0.5 * _expect(log_p, rowwise_divergence(p_rows, m_rows, "KL"))
            total += 0.5 * _expect(log_q, rowwise_divergence(q_rows, m_rows, "KL"))
        log_p = _advance(log_p, teacher.cond_log_table(t))
        log_q = _advance(log_q, student.cond_log_table(t))
    return total


def tvd_one_sided_bounds(
    teacher: TabularARModel, student: TabularARModel
) -> tuple[float, float]:
    """
    Calculate the two single-sided step-wise upper bounds on sequence TVD.

    Parameters
    ----------
    teacher : TabularARModel
        the teacher p
    student : TabularARModel
        the student q

    Returns
    -------
    teacher_bound : float
        sum over positions of the expected per-step TVD under teacher prefixes
    student_bound : float
        the same under student prefixes

    Notes
    -----
    Each value bounds the sequence-level TVD on its own; their mean is the
    step-wise TVD objective.
    """
    check_compatible(teacher, student)
    log_p = np.zeros(1)
    log_q = np.zeros(1)
    teacher_bound = 0.0
    student_bound = 0.0
    for t in range(1, teacher.horizon + 1):
        rows_tvd = rowwise_divergence(
            teacher.cond_table(t), student.cond_table(t), "TVD"
        )
        teacher_bound += _expect(log_p, rows_tvd)
        student_bound += _expect(log_q, rows_tvd)
        log_p = _advance(log_p, teacher.cond_log_table(t))
        log_q = _advance(log_q, student.cond_log_table(t))
    return teacher_bound, student_bound


def cross_entropy_exact(sampler: TabularARModel, scorer: TabularARModel) -> float:
    """
    Calculate E_{Y ~ sampler}[-log scorer(Y)] by enumeration.

    Parameters
    ----------
    sampler : TabularARModel
        distribution the expectation is taken under
    scorer : TabularARModel
        model whose negative log-likelihood is averaged

    Returns
    -------
    float
        the cross-entropy in nats, +inf if the scorer misses sampler support
    """
    check_compatible(sampler, scorer)
    log_weights = sampler.prefix_log_probs(sampler.horizon)
    log_scores = scorer.prefix_log_probs(scorer.horizon)
    return _expect(log_weights, -log_scores)


def engine_loss_exact(teacher: TabularARModel, student: TabularARModel) -> float:
    """
    Calculate the ENGINE energy E_{Y ~ q}[-log p(Y)] by enumeration.

    Parameters
    ----------
    teacher : TabularARModel
        the teacher p, which scores the sequences
    student : TabularARModel
        the student q, which samples the sequences

    Returns
    -------
    float
        expected teacher energy of student sequences

    Notes
    -----
    The energy equals the reverse KL divergence plus the student's sequence entropy.
    """
    return cross_entropy_exact(student, teacher)


def student_seq_entropy(student: TabularARModel) -> float:
    """
    Calculate the sequence-level entropy -sum_Y q(Y) log q(Y) by enumeration.

    Parameters
    ----------
    student : TabularARModel
        any tabular model

    Returns
    -------
    float
        entropy in nats, between 0 and T*ln(V)

    Examples
    --------
    >>> from fdistill.models import uniform_model
    >>> round(student_seq_entropy(uniform_model(2, 3)), 12)
    2.07944154168
    """
    return cross_entropy_exact(student, student)


def excluded_constant(teacher: TabularARModel, kind: DivergenceKind) -> float:
    """
    Get the student-independent constant a training loss leaves out.

    Parameters
    ----------
    teacher : TabularARModel
        the teacher p
    kind : DivergenceKind
        which divergence the training loss decomposes

    Returns
    -------
    float
        constant C with ``E[training loss] = stepwise_exact + C``: the teacher
        sequence entropy for KL, half of it for JS and 0 for RKL and TVD

    Examples
    --------
    >>> from fdistill.models import uniform_model
    >>> excluded_constant(uniform_model(2, 1), "TVD")
    0.0
    """
    check_kind(kind)
    if kind == "KL":
        return student_seq_entropy(teacher)
    if kind == "JS":
        return 0.5 * student_seq_entropy(teacher)
    return 0.0
