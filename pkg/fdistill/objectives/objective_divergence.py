"""Step-wise f-divergence distillation objectives.

Extended Summary
----------------
Training losses for the four divergences, each a sum over positions of a per-step
comparison between the teacher and student conditionals at the sampled prefix.

- KL: soft-label cross-entropy along teacher samples
- RKL: per-step reverse KL along student samples
- JS: per-step KL of each model to a mixture, along samples from each model
- TVD: per-step total variation along samples from both models, weighted 1/4 each

"""

from typing import Optional

import numpy as np
import numpy.typing as npt

from fdistill.models import TabularARModel

from . import sweeps
from .objective import (
    DEFAULT_PROB_FLOOR,
    DistillObjective,
    FloatTable,
    JsConditionalMode,
    ObjectiveValue,
    StepRows,
    js_mode_from_alias,
    mixture_weight,
    prefix_log_probs_along,
)


class ObjectiveKL(DistillObjective):
    """
    Forward KL distillation with soft teacher labels.

    The per-step term along a teacher sample is ``-sum_v p(v|y<t) log q(v|y<t)``;
    the teacher entropy is left out.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        lower clamp applied to student probabilities before logarithms
    """

    name = "KL"
    teacher_sequences = True

    def teacher_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a teacher sequence."""
        p_rows = steps.teacher_probs()
        q_floor = self._floor(steps.student)
        values = -np.sum(p_rows * np.log(q_floor), axis=1)
        grad = -p_rows / q_floor * (steps.student > self.prob_floor)
        return values, grad

    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """Evaluate the expected objective exactly by enumeration."""
        return ObjectiveValue(sweeps.stepwise_exact(teacher, student, "KL"), True)


class ObjectiveRKL(DistillObjective):
    """
    Reverse KL distillation along student samples.

    The per-step term is ``sum_v q(v|y'<t) (log q(v|y'<t) - log p(v|y'<t))``, the
    student entropy term included.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        lower clamp applied to both models' probabilities before logarithms
    """

    name = "RKL"
    student_sequences = True

    def student_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a student sample."""
        log_q = np.log(self._floor(steps.student))
        log_p = np.log(self._floor(steps.teacher_probs()))
        values = np.sum(steps.student * (log_q - log_p), axis=1)
        grad = log_q - log_p + (steps.student > self.prob_floor)
        return values, grad

    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """Evaluate the expected objective exactly by enumeration."""
        return ObjectiveValue(sweeps.stepwise_exact(teacher, student, "RKL"), True)


class ObjectiveJS(DistillObjective):
    """
    Jensen-Shannon distillation against a per-step mixture of the two models.

    Along teacher samples the term is ``-1/2 sum_v p log m`` (the teacher entropy
    half is left out); along student samples it is ``1/2 sum_v q (log q - log m)``.
    Gradients flow through q inside m as well as through the explicit q factors.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        lower clamp applied to probabilities before logarithms
    js_mode : JsConditionalMode or str, default="MIXTURE_OF_CONDITIONALS"
        ``"MIXTURE_OF_CONDITIONALS"`` uses ``m = (p + q) / 2`` at every step;
        ``"EXACT_MARGINAL_RATIO"`` uses the conditional of the sequence mixture,
        whose student weight depends on the prefix probabilities under both models

    Attributes
    ----------
    js_mode : JsConditionalMode
        the canonical conditional mode
    """

    name = "JS"
    teacher_sequences = True
    student_sequences = True

    def __init__(
        self,
        prob_floor: float = DEFAULT_PROB_FLOOR,
        js_mode: str = "MIXTURE_OF_CONDITIONALS",
    ) -> None:
        super().__init__(prob_floor)
        self.js_mode: JsConditionalMode = js_mode_from_alias(js_mode)

    def __repr__(self) -> str:
        """Return a representation of an ObjectiveJS instance."""
        return f"<DistillObjective: 'JS' ({self.js_mode})>"

    def mix_weights(
        self,
        teacher_rows: Optional[FloatTable],
        student_rows: FloatTable,
        tokens: npt.NDArray[np.int_],
    ) -> npt.NDArray[np.float64]:
        """Weight of the student in each per-step mixture along a sequence."""
        if self.js_mode == "MIXTURE_OF_CONDITIONALS":
            return np.full(len(tokens), 0.5)
        if teacher_rows is None:
            msg = "Exact mixture weights need the teacher's conditionals."
            raise ValueError(msg)
        return mixture_weight(
            prefix_log_probs_along(teacher_rows, tokens),
            prefix_log_probs_along(student_rows, tokens),
        )

    def _mixture(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        if steps.mix_weight is None:
            msg = "JS per-step terms need mixture weights."
            raise ValueError(msg)
        weight = steps.mix_weight[:, None]
        m_rows = (1.0 - weight) * steps.teacher_probs() + weight * steps.student
        return m_rows, np.broadcast_to(weight, m_rows.shape)

    def teacher_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a teacher sequence."""
        p_rows = steps.teacher_probs()
        m_rows, weight = self._mixture(steps)
        m_floor = self._floor(m_rows)
        values = -0.5 * np.sum(p_rows * np.log(m_floor), axis=1)
        grad = -0.5 * p_rows * weight / m_floor * (m_rows > self.prob_floor)
        return values, grad

    def student_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a student sample."""
        m_rows, weight = self._mixture(steps)
        q_floor = self._floor(steps.student)
        m_floor = self._floor(m_rows)
        log_ratio = np.log(q_floor) - np.log(m_floor)
        values = 0.5 * np.sum(steps.student * log_ratio, axis=1)
        grad = 0.5 * (
            log_ratio
            + (steps.student > self.prob_floor)
            - steps.student * weight / m_floor * (m_rows > self.prob_floor)
        )
        return values, grad

    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """Evaluate the expected objective exactly by enumeration."""
        value = sweeps.stepwise_exact(teacher, student, "JS", js_mode=self.js_mode)
        return ObjectiveValue(value, True)


class ObjectiveTVD(DistillObjective):
    """
    Total variation distillation along samples from both models.

    Each side contributes ``1/4 sum_v |q - p|`` per step, so the expected loss is the
    mean of the two single-sided step-wise bounds on sequence-level TVD.

    Parameters
    ----------
    prob_floor : float, default=1e-12
        unused by TVD terms, kept for a uniform constructor
    """

    name = "TVD"
    teacher_sequences = True
    student_sequences = True

    def _terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        diff = steps.student - steps.teacher_probs()
        return 0.25 * np.sum(np.abs(diff), axis=1), 0.25 * np.sign(diff)

    def teacher_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a teacher sequence."""
        return self._terms(steps)

    def student_terms(self, steps: StepRows) -> tuple[FloatTable, FloatTable]:
        """Evaluate the per-step terms along a student sample."""
        return self._terms(steps)

    def exact(self, teacher: TabularARModel, student: TabularARModel) -> ObjectiveValue:
        """Evaluate the expected objective exactly by enumeration."""
        return ObjectiveValue(sweeps.stepwise_exact(teacher, student, "TVD"), True)
