"""Baseline objectives: SeqKD, ENGINE and plain maximum likelihood."""

import numpy as np

from fdistill.models import TabularARModel

from . import sweeps
from .objective import (
    DEFAULT_PROB_FLOOR,
    DistillObjective,
    FloatTable,
    ObjectiveValue,
    StepRows,
)


class _NegativeLogLikelihood(DistillObjective):
    """Student negative log-likelihood of fixed sequences."""

    teacher_sequences = True
    queries_teacher = False

    def teacher_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a teacher sequence."""
        picked = steps.student[np.arange(len(steps.tokens)), steps.tokens]
        picked_floor = np.maximum(picked, self.prob_floor)
        grad = np.zeros(steps.student.shape)
        grad[np.arange(len(steps.tokens)), steps.tokens] = np.where(
            picked > self.prob_floor, -1.0 / picked_floor, 0.0
        )
        return -np.log(picked_floor), grad


class ObjectiveSeqKD(_NegativeLogLikelihood):
    """
    Sequence-level KD on one hard target decoded from the teacher by beam search.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        lower clamp applied to student probabilities before logarithms
    beam_width : int, default=4
        beam width used to decode the target

    Attributes
    ----------
    beam_width : int
        beam width used to decode the target
    """

    name = "SEQKD"

    def __init__(
        self, prob_floor: float = DEFAULT_PROB_FLOOR, beam_width: int = 4
    ) -> None:
        super().__init__(prob_floor)
        if beam_width < 1:
            msg = f"Beam width must be at least 1 but got {beam_width}."
            raise ValueError(msg)
        self.beam_width = beam_width

    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """Negative student log-likelihood of the teacher's beam-search output."""
        sweeps.check_compatible(teacher, student)
        target = teacher.beam_search(self.beam_width)
        return ObjectiveValue(-student.seq_logprob(target), True)


class ObjectiveMLE(_NegativeLogLikelihood):
    """
    Maximum likelihood on data sequences, typically samples from the teacher.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        lower clamp applied to student probabilities before logarithms
    """

    name = "MLE"

    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """Cross-entropy of the student on the teacher's sequence distribution."""
        return ObjectiveValue(sweeps.cross_entropy_exact(teacher, student), True)


class ObjectiveEngine(DistillObjective):
    """
    The ENGINE energy objective along student samples.

    The per-step term is ``-sum_v q(v|y'<t) log p(v|y'<t)``: the reverse KL term
    without the student entropy. Its expectation under the student is exactly the
    sequence-level energy ``E_q[-log p(Y)]``.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        lower clamp applied to teacher probabilities before logarithms
    """

    name = "ENGINE"
    student_sequences = True

    def student_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a student sample."""
        energy = -np.log(self._floor(steps.teacher_probs()))
        return np.sum(steps.student * energy, axis=1), energy

    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """Evaluate the expected objective exactly by enumeration."""
        return ObjectiveValue(sweeps.engine_loss_exact(teacher, student), True)
