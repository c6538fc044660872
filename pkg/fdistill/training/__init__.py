"""Module providing distillation training, optimizers and offline teacher caching."""

from .distill import (
    OPTIMIZERS,
    TEACHER_SAMPLINGS,
    ConfigError,
    QueryCountingModel,
    TeacherSampleCache,
    TrainConfig,
    TrainResult,
    build_offline_cache,
    loss_and_grad,
    mle_warm_start,
    numerical_gradient,
    objective_for,
    train,
    write_history,
)
from .optimizers import AdamState, adam_init, adam_step, sgd_step

__all__ = [
    "OPTIMIZERS",
    "TEACHER_SAMPLINGS",
    "AdamState",
    "ConfigError",
    "QueryCountingModel",
    "TeacherSampleCache",
    "TrainConfig",
    "TrainResult",
    "adam_init",
    "adam_step",
    "build_offline_cache",
    "loss_and_grad",
    "mle_warm_start",
    "numerical_gradient",
    "objective_for",
    "sgd_step",
    "train",
    "write_history",
]
