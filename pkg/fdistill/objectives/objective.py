"""Base class for step-wise distillation objectives.

Extended Summary
----------------
Every distillation objective is written as a sum over positions of per-step terms
evaluated along sampled sequences. Terms along teacher-sampled sequences (or a hard
target) form the *teacher side* of the loss, terms along student-sampled sequences
the *student side*. A training loss is the mean teacher-side term plus the mean
student-side term.

Gradients are taken with respect to the student logits under the stop-gradient
contract: the sampled prefixes (and the prefix probabilities used to weight the
Jensen-Shannon mixture) are constants, and only the student conditionals written
explicitly in each per-step term are differentiated.

"""

from abc import ABC, abstractmethod
from typing import Literal, NamedTuple, Optional, TypeAlias, get_args

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from fdistill.models import Sequence, SequenceModel, TabularARModel

# TypeAlias deprecated. Move to `type` in py3.12+
#: How the m-conditionals of the Jensen-Shannon loss are formed.
JsConditionalMode: TypeAlias = Literal[
    "EXACT_MARGINAL_RATIO", "MIXTURE_OF_CONDITIONALS"
]

#: Which sampled sequences a per-step term is evaluated along.
Side: TypeAlias = Literal["teacher", "student"]

FloatTable: TypeAlias = npt.NDArray[np.float64]

JS_MODES: tuple[JsConditionalMode, ...] = get_args(JsConditionalMode)

_JS_MODE_ALIASES: dict[JsConditionalMode, set[str]] = {
    "EXACT_MARGINAL_RATIO": {"exact_marginal_ratio", "exact", "ratio", "marginal"},
    "MIXTURE_OF_CONDITIONALS": {"mixture_of_conditionals", "mixture", "approx"},
}

#: Default floor applied to probabilities before logarithms in training losses.
DEFAULT_PROB_FLOOR = 1.0e-12


def js_mode_from_alias(name: str) -> JsConditionalMode:
    """
    Convert a Jensen-Shannon conditional mode alias to its canonical name.

    Parameters
    ----------
    name : str
        any accepted spelling, case-insensitive (e.g. ``"exact"``, ``"mixture"``)

    Returns
    -------
    JsConditionalMode
        canonical mode name

    Raises
    ------
    ValueError
        If the alias is not recognised.

    Examples
    --------
    >>> js_mode_from_alias("Mixture")
    'MIXTURE_OF_CONDITIONALS'
    """
    key = name.strip().lower()
    for mode, aliases in _JS_MODE_ALIASES.items():
        if key in aliases:
            return mode
    msg = (
        f"{name} is not a recognised JS conditional mode.\n"
        f"""Please select from '{"', '".join(JS_MODES)}' or 'exact', 'mixture'."""
    )
    raise ValueError(msg)


class ObjectiveValue(NamedTuple):
    """
    The value of an objective and whether student-independent constants are in it.

    Attributes
    ----------
    value : float
        objective value in nats
    includes_constant : bool
        True for exact oracle values, False for training losses that drop the
        teacher-entropy constant
    """

    value: float
    includes_constant: bool


class LossReport(NamedTuple):
    """
    Value and gradient of a training loss on a fixed set of samples.

    Attributes
    ----------
    loss : float
        mean teacher-side term plus mean student-side term
    gradient : NDArray
        derivative of the loss with respect to the student logits, same shape as
        the logits table
    teacher_eval_count : int
        number of teacher conditional-distribution queries the evaluation consumed
    """

    loss: float
    gradient: FloatTable
    teacher_eval_count: int


class StepRows(NamedTuple):
    """
    Per-position quantities gathered along one sequence.

    Attributes
    ----------
    teacher : NDArray or None
        (T, V) teacher conditionals, None for objectives that never query the teacher
    student : NDArray
        (T, V) student conditionals
    tokens : NDArray
        the T tokens of the sequence
    mix_weight : NDArray or None
        (T,) weight of the student in the per-step mixture, only for mixtures
    """

    teacher: Optional[FloatTable]
    student: FloatTable
    tokens: npt.NDArray[np.int_]
    mix_weight: Optional[npt.NDArray[np.float64]]

    def teacher_probs(self) -> FloatTable:
        """Get the teacher conditionals, raising if they were not gathered."""
        if self.teacher is None:
            msg = "These per-step terms need the teacher's conditionals."
            raise ValueError(msg)
        return self.teacher


def softmax_backward(probs: FloatTable, grad_probs: FloatTable) -> FloatTable:
    """
    Pull a gradient with respect to softmax outputs back to the logits.

    Parameters
    ----------
    probs : NDArray
        (n, V) softmax outputs, one row per logits row
    grad_probs : NDArray
        (n, V) derivative of the loss with respect to ``probs``

    Returns
    -------
    NDArray
        (n, V) derivative of the loss with respect to the logits
    """
    inner = np.sum(grad_probs * probs, axis=1, keepdims=True)
    return probs * (grad_probs - inner)


def mixture_weight(
    log_teacher_prefix: npt.NDArray[np.float64],
    log_student_prefix: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """
    Weight of the student in the exact conditional of the sequence mixture.

    Parameters
    ----------
    log_teacher_prefix : NDArray
        log p(prefix) for each prefix
    log_student_prefix : NDArray
        log q(prefix) for each prefix

    Returns
    -------
    NDArray
        ``q(prefix) / (p(prefix) + q(prefix))``, 1/2 where both are zero

    Notes
    -----
    The conditional of m = p/2 + q/2 at a prefix is
    ``(1 - w) p(.|prefix) + w q(.|prefix)`` with this weight w.
    """
    with np.errstate(invalid="ignore"):
        weight = expit(log_student_prefix - log_teacher_prefix)
    return np.where(np.isnan(weight), 0.5, weight)


def prefix_log_probs_along(
    rows: FloatTable, tokens: npt.NDArray[np.int_]
) -> npt.NDArray[np.float64]:
    """Log-probability of each prefix y_<t along a path of conditionals."""
    with np.errstate(divide="ignore"):
        log_steps = np.log(rows[np.arange(len(tokens)), tokens])
    return np.concatenate(([0.0], np.cumsum(log_steps)[:-1]))


class DistillObjective(ABC):
    """
    Abstract Base Class to represent a step-wise distillation objective.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        lower clamp applied to probabilities before logarithms

    Attributes
    ----------
    name : str
        identifier of the objective
    prob_floor : float
        lower clamp applied to probabilities before logarithms
    teacher_sequences : bool
        whether the loss has terms along teacher-sampled (or target) sequences
    student_sequences : bool
        whether the loss has terms along student-sampled sequences
    queries_teacher : bool
        whether per-step terms need the teacher's conditional distributions

    See Also
    --------
    objective_divergence.ObjectiveKL : The forward KL objective.
    objective_divergence.ObjectiveRKL : The reverse KL objective.
    objective_divergence.ObjectiveJS : The Jensen-Shannon objective.
    objective_divergence.ObjectiveTVD : The total variation objective.
    objective_baselines.ObjectiveSeqKD : Hard-target sequence-level KD.
    objective_baselines.ObjectiveEngine : The ENGINE energy objective.
    objective_baselines.ObjectiveMLE : Maximum likelihood on data sequences.
    """

    name: str = "unnamed"
    teacher_sequences: bool = False
    student_sequences: bool = False
    queries_teacher: bool = True

    def __init__(self, prob_floor: float = DEFAULT_PROB_FLOOR) -> None:
        if not 0.0 < prob_floor <= 1.0e-6:  # noqa: PLR2004
            msg = f"Probability floor must lie in (0, 1e-6] but got {prob_floor}."
            raise ValueError(msg)
        self.prob_floor = prob_floor

    def __repr__(self) -> str:
        """Return a representation of a DistillObjective instance."""
        return f"<DistillObjective: '{self.name}'>"

    def _floor(self, probs: FloatTable) -> FloatTable:
        return np.maximum(probs, self.prob_floor)

    def teacher_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """
        Evaluate the per-step terms along a teacher-sampled sequence.

        Parameters
        ----------
        steps : StepRows
            conditionals gathered along the sequence

        Returns
        -------
        values : NDArray
            (T,) per-step loss terms
        grad_probs : NDArray
            (T, V) derivative of each term with respect to the student conditional

        Raises
        ------
        NotImplementedError
            If the objective has no teacher-side terms.
        """
        msg = f"The {self.name} objective has no terms along teacher sequences."
        raise NotImplementedError(msg)

    def student_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """
        Evaluate the per-step terms along a student-sampled sequence.

        Parameters
        ----------
        steps : StepRows
            conditionals gathered along the sequence

        Returns
        -------
        values : NDArray
            (T,) per-step loss terms
        grad_probs : NDArray
            (T, V) derivative of each term with respect to the student conditional

        Raises
        ------
        NotImplementedError
            If the objective has no student-side terms.
        """
        msg = f"The {self.name} objective has no terms along student sequences."
        raise NotImplementedError(msg)

    def mix_weights(
        self,
        teacher_rows: Optional[FloatTable],
        student_rows: FloatTable,
        tokens: npt.NDArray[np.int_],
    ) -> Optional[npt.NDArray[np.float64]]:
        """Weights of the student in per-step mixtures, None if unused."""
        return None

    @abstractmethod
    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """
        Evaluate the expected objective exactly by enumeration.

        Parameters
        ----------
        teacher : TabularARModel
            the teacher p
        student : TabularARModel
            the student q

        Returns
        -------
        ObjectiveValue
            exact value including every student-independent constant
        """

    def _gather(
        self,
        teacher: SequenceModel,
        student: TabularARModel,
        seq: Sequence,
        prefix_student: Optional[TabularARModel],
    ) -> tuple[npt.NDArray[np.int_], StepRows, int]:
        """Collect logits rows and conditionals along one sequence."""
        student.check_sequence(seq)
        tokens = np.asarray(seq, dtype=np.int_)
        rows = np.array([student.row_index(seq[:t]) for t in range(len(seq))])
        student_rows = student.probs[rows]

        teacher_rows = None
        queries = 0
        if self.queries_teacher:
            teacher_rows = np.stack(
                [teacher.cond_dist(seq[:t], t + 1) for t in range(len(seq))]
            )
            queries = len(seq)

        frozen = student if prefix_student is None else prefix_student
        frozen_rows = student_rows
        if frozen is not student:
            if not frozen.same_layout(student):
                msg = "The frozen prefix model must share the student's layout."
                raise ValueError(msg)
            frozen_rows = frozen.probs[rows]
        weights = self.mix_weights(teacher_rows, frozen_rows, tokens)
        return rows, StepRows(teacher_rows, student_rows, tokens, weights), queries

    def sequence_term(
        self,
        side: Side,
        teacher: SequenceModel,
        student: TabularARModel,
        seq: Sequence,
        prefix_student: Optional[TabularARModel] = None,
    ) -> float:
        """
        Evaluate the summed per-step terms of the loss along one sequence.

        Parameters
        ----------
        side : {"teacher", "student"}
            which sampling distribution the sequence stands for
        teacher : SequenceModel
            the teacher p
        student : TabularARModel
            the student q
        seq : Sequence
            the sampled sequence
        prefix_student : TabularARModel or None, default=None
            frozen student used for prefix probabilities, the student itself if None

        Returns
        -------
        float
            sum over positions of the per-step terms
        """
        _, steps, _ = self._gather(teacher, student, seq, prefix_student)
        terms = self.teacher_terms if side == "teacher" else self.student_terms
        values, _ = terms(steps)
        return float(np.sum(values))

    def teacher_side(
        self, teacher: SequenceModel, student: TabularARModel, seq: Sequence
    ) -> float:
        """Summed per-step terms along a teacher-sampled sequence."""
        return self.sequence_term("teacher", teacher, student, seq)

    def student_side(
        self, teacher: SequenceModel, student: TabularARModel, seq: Sequence
    ) -> float:
        """Summed per-step terms along a student-sampled sequence."""
        return self.sequence_term("student", teacher, student, seq)

    def check_samples(
        self, teacher_seqs: list[Sequence], student_seqs: list[Sequence]
    ) -> None:
        """
        Check the sample lists this objective needs are non-empty.

        Raises
        ------
        ValueError
            If a required list is empty.
        """
        if self.teacher_sequences and not teacher_seqs:
            msg = f"The {self.name} loss needs at least one teacher sequence."
            raise ValueError(msg)
        if self.student_sequences and not student_seqs:
            msg = f"The {self.name} loss needs at least one student-sampled sequence."
            raise ValueError(msg)

    def evaluate(  # noqa: PLR0913 - Too many arguments
        self,
        teacher: SequenceModel,
        student: TabularARModel,
        teacher_seqs: list[Sequence],
        student_seqs: list[Sequence],
        with_grad: bool = True,
        prefix_student: Optional[TabularARModel] = None,
    ) -> LossReport:
        """
        Evaluate the training loss and its stop-gradient derivative.

        Parameters
        ----------
        teacher : SequenceModel
            the teacher p, queried through ``cond_dist``
        student : TabularARModel
            the student q being trained
        teacher_seqs : list of Sequence
            teacher samples (or the hard target), ignored if unused
        student_seqs : list of Sequence
            student samples, ignored if unused
        with_grad : bool, default=True
            accumulate the gradient, otherwise the gradient is all zeros
        prefix_student : TabularARModel or None, default=None
            frozen copy of the student for prefix probabilities

        Returns
        -------
        LossReport
            loss, gradient with the student logits' shape, and teacher query count

        Raises
        ------
        ValueError
            If a required sample list is empty.
        """
        self.check_samples(teacher_seqs, student_seqs)
        grad = np.zeros(student.logits.shape)
        loss = 0.0
        queries = 0
        sides: list[tuple[list[Sequence], bool, Side]] = [
            (teacher_seqs, self.teacher_sequences, "teacher"),
            (student_seqs, self.student_sequences, "student"),
        ]
        for seqs, used, side in sides:
            if not used:
                continue
            terms = self.teacher_terms if side == "teacher" else self.student_terms
            scale = 1.0 / len(seqs)
            for seq in seqs:
                rows, steps, n_queries = self._gather(
                    teacher, student, seq, prefix_student
                )
                queries += n_queries
                values, grad_probs = terms(steps)
                loss += scale * float(np.sum(values))
                if with_grad:
                    np.add.at(
                        grad, rows, scale * softmax_backward(steps.student, grad_probs)
                    )
        return LossReport(loss, grad, queries)

