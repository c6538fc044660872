"""Module providing step-wise distillation objectives and their exact oracles."""

from .objective import (
    DEFAULT_PROB_FLOOR,
    JS_MODES,
    DistillObjective,
    JsConditionalMode,
    LossReport,
    ObjectiveValue,
    js_mode_from_alias,
)
from .objective_baselines import ObjectiveEngine, ObjectiveMLE, ObjectiveSeqKD
from .objective_divergence import ObjectiveJS, ObjectiveKL, ObjectiveRKL, ObjectiveTVD
from .objective_functions import (
    OBJECTIVE_KINDS,
    ObjectiveKind,
    mc_loss,
    objective,
    seqkd_loss,
)
from .sweeps import (
    brute_force_seq_divergence,
    cross_entropy_exact,
    engine_loss_exact,
    excluded_constant,
    stepwise_exact,
    student_seq_entropy,
    tvd_one_sided_bounds,
)

__all__ = [
    "DEFAULT_PROB_FLOOR",
    "JS_MODES",
    "OBJECTIVE_KINDS",
    "DistillObjective",
    "JsConditionalMode",
    "LossReport",
    "ObjectiveEngine",
    "ObjectiveJS",
    "ObjectiveKL",
    "ObjectiveKind",
    "ObjectiveMLE",
    "ObjectiveRKL",
    "ObjectiveSeqKD",
    "ObjectiveTVD",
    "ObjectiveValue",
    "brute_force_seq_divergence",
    "cross_entropy_exact",
    "engine_loss_exact",
    "excluded_constant",
    "js_mode_from_alias",
    "mc_loss",
    "objective",
    "seqkd_loss",
    "stepwise_exact",
    "student_seq_entropy",
    "tvd_one_sided_bounds",
]
