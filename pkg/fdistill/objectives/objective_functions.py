"""
Functions for evaluating distillation objectives by name.

Extended Summary
----------------
Thin wrappers around the DistillObjective subclasses so that callers can pass either
an objective identifier or a ready-made objective instance, together with the
Monte Carlo training losses and the hard-target SeqKD loss.

Routine Listings
----------------
- objective()
- mc_loss()
- seqkd_loss()

"""

from typing import Literal, Optional, TypeAlias, Union, get_args

from fdistill.models import Sequence, SequenceModel, TabularARModel

from .objective import DistillObjective, JsConditionalMode, ObjectiveValue
from .objective_baselines import ObjectiveEngine, ObjectiveMLE, ObjectiveSeqKD
from .objective_divergence import ObjectiveJS, ObjectiveKL, ObjectiveRKL, ObjectiveTVD

# TypeAlias deprecated. Move to `type` in py3.12+
#: Every objective a student can be trained with.
ObjectiveKind: TypeAlias = Literal["KL", "RKL", "JS", "TVD", "SEQKD", "ENGINE", "MLE"]

OBJECTIVE_KINDS: tuple[ObjectiveKind, ...] = get_args(ObjectiveKind)

_CLASSES: dict[str, type[DistillObjective]] = {
    "KL": ObjectiveKL,
    "RKL": ObjectiveRKL,
    "JS": ObjectiveJS,
    "TVD": ObjectiveTVD,
    "SEQKD": ObjectiveSeqKD,
    "ENGINE": ObjectiveEngine,
    "MLE": ObjectiveMLE,
}


def objective(  # noqa: D417 - Missing argument in docstring (**kwargs)
    name: Union[str, DistillObjective],
    **kwargs: Union[float, int, str],
) -> DistillObjective:
    r"""
    Create a DistillObjective subclass for a requested objective.

    Parameters
    ----------
    name : Union[str, DistillObjective]
        identifier of the objective (case-insensitive), or an existing objective
        which is returned unchanged
    \\**kwargs : float, int or str
        constructor options such as ``prob_floor``, ``js_mode`` (JS) or
        ``beam_width`` (SEQKD)

    Returns
    -------
    DistillObjective
        the matching subclass instance

    Raises
    ------
    ValueError
        If no objective of that name exists.

    Examples
    --------
    >>> objective("js", js_mode="exact")
    <DistillObjective: 'JS' (EXACT_MARGINAL_RATIO)>
    """
    if isinstance(name, DistillObjective):
        return name
    try:
        cls = _CLASSES[name.upper()]
    except KeyError as exc:
        msg = (
            f"{name} is not a recognised objective.\n"
            f"""Please select from '{"', '".join(_CLASSES.keys())}'."""
        )
        raise ValueError(msg) from exc
    return cls(**kwargs)  # type: ignore[arg-type]


def mc_loss(  # noqa: PLR0913 - Too many arguments
    teacher: SequenceModel,
    student: TabularARModel,
    kind: Union[str, DistillObjective],
    js_mode: JsConditionalMode = "MIXTURE_OF_CONDITIONALS",
    teacher_seqs: Optional[list[Sequence]] = None,
    student_seqs: Optional[list[Sequence]] = None,
) -> ObjectiveValue:
    """
    Evaluate a step-wise training loss on sampled sequences.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p
    student : TabularARModel
        the student q
    kind : str or DistillObjective
        objective identifier or instance
    js_mode : JsConditionalMode, default="MIXTURE_OF_CONDITIONALS"
        conditional mode when ``kind`` names the JS objective
    teacher_seqs : list of Sequence or None, default=None
        teacher samples, needed by KL, JS, TVD (and the targets of SEQKD/MLE)
    student_seqs : list of Sequence or None, default=None
        student samples, needed by RKL, JS, TVD and ENGINE

    Returns
    -------
    ObjectiveValue
        mean teacher-side plus mean student-side loss, without the teacher-entropy
        constant (``includes_constant=False``)

    Raises
    ------
    ValueError
        If a sample list the objective needs is empty.

    Examples
    --------
    >>> from fdistill.models import uniform_model
    >>> model = uniform_model(2, 3)
    >>> mc_loss(model, model, "TVD", teacher_seqs=[(0, 1, 0)], student_seqs=[(1, 1, 1)])
    ObjectiveValue(value=0.0, includes_constant=False)
    """
    if isinstance(kind, str) and kind.upper() == "JS":
        kind = objective(kind, js_mode=js_mode)
    obj = objective(kind)
    report = obj.evaluate(
        teacher,
        student,
        list(teacher_seqs or []),
        list(student_seqs or []),
        with_grad=False,
    )
    return ObjectiveValue(report.loss, False)


def seqkd_loss(student: TabularARModel, hard_target: Sequence) -> ObjectiveValue:
    """
    Evaluate the SeqKD loss, the student's negative log-likelihood of a hard target.

    Parameters
    ----------
    student : TabularARModel
        the student q
    hard_target : Sequence
        sequence decoded from the teacher, usually by beam search

    Returns
    -------
    ObjectiveValue
        ``-log q(hard_target)`` with ``includes_constant=False``

    Examples
    --------
    >>> from fdistill.models import uniform_model
    >>> round(seqkd_loss(uniform_model(2, 3), (0, 1, 1)).value, 12)
    2.07944154168
    """
    report = ObjectiveSeqKD().evaluate(
        student, student, [tuple(hard_target)], [], with_grad=False
    )
    return ObjectiveValue(report.loss, False)
