"""
Distillation training loop, offline teacher caching and MLE warm start.

Extended Summary
----------------
A training run repeatedly draws sequences, evaluates the step-wise loss and its
stop-gradient derivative, and updates the student logits. Student sequences are
re-sampled every step. Teacher sequences are either re-sampled every step (online)
or cycled from a cache drawn once before training (offline).

Teacher work is measured by counting conditional-distribution queries, which is
what offline sampling saves.

Routine Listings
----------------
- TrainConfig
- TeacherSampleCache
- QueryCountingModel
- TrainResult
- objective_for()
- loss_and_grad()
- numerical_gradient()
- build_offline_cache()
- mle_warm_start()
- train()
- write_history()

"""

import json
import logging
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, NamedTuple, Optional, TypeAlias, Union, get_args

import numpy as np
import numpy.typing as npt

from fdistill.models import Sequence, SequenceModel, TabularARModel
from fdistill.objectives import (
    DEFAULT_PROB_FLOOR,
    OBJECTIVE_KINDS,
    DistillObjective,
    LossReport,
    ObjectiveMLE,
    js_mode_from_alias,
    objective,
)

from .optimizers import ADAM_BETAS, adam_init, adam_step, sgd_step

logger = logging.getLogger(__name__)

# TypeAlias deprecated. Move to `type` in py3.12+
OptimizerName: TypeAlias = Literal["ADAM", "SGD"]
TeacherSampling: TypeAlias = Literal["ONLINE", "OFFLINE"]

OPTIMIZERS: tuple[OptimizerName, ...] = get_args(OptimizerName)
TEACHER_SAMPLINGS: tuple[TeacherSampling, ...] = get_args(TeacherSampling)

#: Objectives whose loss has no terms along teacher samples.
_NO_TEACHER_SAMPLES = ("RKL", "ENGINE", "SEQKD")


class ConfigError(ValueError):
    """
    Raised for invalid or contradictory configuration.

    Parameters
    ----------
    msg : str
        description of the problem
    line : int or None, default=None
        line of the configuration file the problem was found on
    keys : list of str or None, default=None
        offending configuration keys

    Attributes
    ----------
    line : int or None
        line of the configuration file the problem was found on
    keys : list of str
        offending configuration keys
    """

    def __init__(
        self, msg: str, line: Optional[int] = None, keys: Optional[list[str]] = None
    ) -> None:
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line
        self.keys = list(keys or [])


def _choice(value: str, options: tuple[str, ...], field: str) -> str:
    """Upper-case a string option and check it is allowed."""
    canonical = str(value).strip().upper()
    if canonical not in options:
        msg = (
            f"{value} is not a valid {field}.\n"
            f"""Please select from '{"', '".join(options)}'."""
        )
        raise ConfigError(msg, keys=[field])
    return canonical


@dataclass(frozen=True)
class TrainConfig:
    """
    Settings of one distillation training run.

    Attributes
    ----------
    kind : str, default="KL"
        objective, one of KL, RKL, JS, TVD, SEQKD, ENGINE, MLE
    steps : int, default=1000
        number of optimizer steps
    learning_rate : float, default=0.05
        optimizer learning rate
    optimizer : {"ADAM", "SGD"}, default="ADAM"
        optimizer to update the logits with
    adam_betas : tuple of float, default=(0.9, 0.999)
        Adam moment decay rates, each in [0, 1)
    mc_samples_per_step : int, default=1
        sequences drawn from each sampled model per step
    teacher_sampling : {"ONLINE", "OFFLINE"}, default="ONLINE"
        re-sample the teacher every step or cycle through a fixed cache
    offline_cache_size : int, default=100
        number of cached teacher sequences for offline sampling, also the data of
        the MLE warm start
    seed : int, default=0
        seed of all sampling in the run
    prob_floor : float, default=1e-12
        clamp applied to probabilities before logarithms, at most 1e-6
    js_mode : JsConditionalMode, default="MIXTURE_OF_CONDITIONALS"
        per-step mixture used by the JS loss
    beam_width : int, default=4
        beam width used to decode the SEQKD target
    warm_start_steps : int, default=0
        full-batch MLE steps on teacher samples taken before the divergence
        steps, none when 0

    Raises
    ------
    ConfigError
        If any value is out of range or the settings contradict each other.
    """

    kind: str = "KL"
    steps: int = 1000
    learning_rate: float = 0.05
    optimizer: str = "ADAM"
    adam_betas: tuple[float, float] = ADAM_BETAS
    mc_samples_per_step: int = 1
    teacher_sampling: str = "ONLINE"
    offline_cache_size: int = 100
    seed: int = 0
    prob_floor: float = DEFAULT_PROB_FLOOR
    js_mode: str = "MIXTURE_OF_CONDITIONALS"
    beam_width: int = 4
    warm_start_steps: int = 0

    def __post_init__(self) -> None:
        """Normalise option spellings and validate the configuration."""
        object.__setattr__(self, "kind", _choice(self.kind, OBJECTIVE_KINDS, "kind"))
        object.__setattr__(
            self, "optimizer", _choice(self.optimizer, OPTIMIZERS, "optimizer")
        )
        object.__setattr__(
            self,
            "teacher_sampling",
            _choice(self.teacher_sampling, TEACHER_SAMPLINGS, "teacher_sampling"),
        )
        try:
            object.__setattr__(self, "js_mode", js_mode_from_alias(self.js_mode))
        except ValueError as exc:
            raise ConfigError(str(exc), keys=["js_mode"]) from exc
        object.__setattr__(self, "adam_betas", tuple(self.adam_betas))

        checks = [
            (self.steps >= 0, "steps", "must be a non-negative integer"),
            (self.learning_rate > 0.0, "learning_rate", "must be positive"),
            (
                len(self.adam_betas) == 2  # noqa: PLR2004
                and all(0.0 <= beta < 1.0 for beta in self.adam_betas),
                "adam_betas",
                "must be two values in [0, 1)",
            ),
            (self.mc_samples_per_step >= 1, "mc_samples_per_step", "must be >= 1"),
            (self.offline_cache_size >= 1, "offline_cache_size", "must be >= 1"),
            (
                0.0 < self.prob_floor <= 1.0e-6,  # noqa: PLR2004
                "prob_floor",
                "must lie in (0, 1e-6]",
            ),
            (self.beam_width >= 1, "beam_width", "must be >= 1"),
            (self.warm_start_steps >= 0, "warm_start_steps", "must be >= 0"),
        ]
        for valid, field, rule in checks:
            if not valid:
                msg = f"{field} {rule} but is {getattr(self, field)!r}."
                raise ConfigError(msg, keys=[field])

        if self.teacher_sampling == "OFFLINE" and self.kind in _NO_TEACHER_SAMPLES:
            msg = (
                f"The {self.kind} objective draws no teacher samples, "
                "so OFFLINE teacher sampling is contradictory."
            )
            raise ConfigError(msg, keys=["kind", "teacher_sampling"])


class QueryCountingModel(SequenceModel):
    """
    Wrap a sequence model and count its conditional-distribution queries.

    Parameters
    ----------
    model : SequenceModel
        the model to wrap

    Attributes
    ----------
    model : SequenceModel
        the wrapped model
    count : int
        number of ``cond_dist`` calls made through the wrapper
    """

    def __init__(self, model: SequenceModel) -> None:
        self.model = model
        self.vocab_size = model.vocab_size
        self.horizon = model.horizon
        self.count = 0

    def __repr__(self) -> str:
        """Return a representation of a QueryCountingModel instance."""
        return f"QueryCountingModel({self.model!r}, count={self.count})"

    def cond_dist(
        self, prefix: Sequence, position: Optional[int] = None
    ) -> npt.NDArray[np.float64]:
        """Get the wrapped model's next-token distribution, counting the query."""
        self.count += 1
        return self.model.cond_dist(prefix, position)


@dataclass(frozen=True)
class TeacherSampleCache:
    """
    Teacher sequences drawn once before training and kept fixed.

    Attributes
    ----------
    sequences : tuple of Sequence
        the cached teacher samples
    origin_seed : int
        seed the samples were drawn with
    """

    sequences: tuple[Sequence, ...]
    origin_seed: int

    def __len__(self) -> int:
        """Return the number of cached sequences."""
        return len(self.sequences)

    def batch(self, step: int, size: int) -> list[Sequence]:
        """
        Get the cached sequences used at a training step.

        Parameters
        ----------
        step : int
            0-based training step
        size : int
            number of sequences per step

        Returns
        -------
        list of Sequence
            consecutive cached sequences, wrapping round the end of the cache
        """
        start = step * size
        return [self.sequences[(start + i) % len(self)] for i in range(size)]


class TrainResult(NamedTuple):
    """
    Outcome of a training run.

    Attributes
    ----------
    student : TabularARModel
        the trained student
    history : list of float
        loss evaluated at each step, before that step's update
    total_teacher_evals : int
        teacher conditional-distribution queries consumed by the whole run
    teacher_evals_trace : list of int
        cumulative teacher queries after each step, including cache construction
    """

    student: TabularARModel
    history: list[float]
    total_teacher_evals: int
    teacher_evals_trace: list[int]


def objective_for(config: TrainConfig) -> DistillObjective:
    """
    Build the objective a training configuration asks for.

    Parameters
    ----------
    config : TrainConfig
        the run settings

    Returns
    -------
    DistillObjective
        objective with the configured floor, JS mode and beam width
    """
    options: dict[str, Union[float, int, str]] = {"prob_floor": config.prob_floor}
    if config.kind == "JS":
        options["js_mode"] = config.js_mode
    if config.kind == "SEQKD":
        options["beam_width"] = config.beam_width
    return objective(config.kind, **options)


def loss_and_grad(  # noqa: PLR0913 - Too many arguments
    teacher: SequenceModel,
    student: TabularARModel,
    config: TrainConfig,
    teacher_seqs: list[Sequence],
    student_seqs: list[Sequence],
    prefix_student: Optional[TabularARModel] = None,
) -> LossReport:
    """
    Evaluate a training loss and its stop-gradient derivative on fixed samples.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p
    student : TabularARModel
        the student q
    config : TrainConfig
        selects the objective, floor and JS mode
    teacher_seqs : list of Sequence
        teacher samples (the hard target for SEQKD, the data for MLE)
    student_seqs : list of Sequence
        student samples
    prefix_student : TabularARModel or None, default=None
        frozen student whose prefix probabilities weight the exact JS mixture

    Returns
    -------
    LossReport
        loss equal to ``mc_loss`` on the same inputs, the gradient with respect to
        the student logits, and the teacher queries consumed

    Raises
    ------
    ValueError
        If a sample list the objective needs is empty.
    """
    return objective_for(config).evaluate(
        teacher, student, teacher_seqs, student_seqs, prefix_student=prefix_student
    )


def numerical_gradient(  # noqa: PLR0913 - Too many arguments
    teacher: SequenceModel,
    student: TabularARModel,
    config: TrainConfig,
    teacher_seqs: list[Sequence],
    student_seqs: list[Sequence],
    step: float = 1.0e-5,
) -> npt.NDArray[np.float64]:
    """
    Differentiate a training loss by central finite differences.

    Samples and prefix probabilities stay frozen at the unperturbed student, so the
    result approximates the analytic gradient of ``loss_and_grad``.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p
    student : TabularARModel
        the student q at which to differentiate
    config : TrainConfig
        selects the objective
    teacher_seqs : list of Sequence
        frozen teacher samples
    student_seqs : list of Sequence
        frozen student samples
    step : float, default=1e-5
        finite-difference step

    Returns
    -------
    NDArray
        approximate gradient, same shape as the student logits
    """
    obj = objective_for(config)
    base = student.logits
    grad = np.zeros(base.shape)
    for index in np.ndindex(base.shape):
        values = []
        for sign in (1.0, -1.0):
            shifted = base.copy()
            shifted[index] += sign * step
            report = obj.evaluate(
                teacher,
                student.with_logits(shifted),
                teacher_seqs,
                student_seqs,
                with_grad=False,
                prefix_student=student,
            )
            values.append(report.loss)
        grad[index] = (values[0] - values[1]) / (2.0 * step)
    return grad


def build_offline_cache(
    teacher: SequenceModel, n: int, seed: Union[int, np.random.SeedSequence]
) -> TeacherSampleCache:
    """
    Draw teacher sequences once for offline training.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p
    n : int
        number of sequences, at least 1
    seed : int or SeedSequence
        seed of the draws

    Returns
    -------
    TeacherSampleCache
        the cached sequences; drawing them costs exactly n*T teacher queries

    Raises
    ------
    ValueError
        If n is less than 1.
    """
    if n < 1:
        msg = f"An offline cache needs at least one sequence but n = {n}."
        raise ValueError(msg)
    rng = np.random.default_rng(seed)
    origin = seed if isinstance(seed, int) else int(seed.generate_state(1)[0])
    sequences = tuple(teacher.sample_many(n, rng))
    logger.info("Cached %d teacher sequences (seed %d).", n, origin)
    return TeacherSampleCache(sequences, origin)


def _apply_update(
    params: npt.NDArray[np.float64],
    grad: npt.NDArray[np.float64],
    state,
    config: TrainConfig,
):
    """Take one optimizer step as configured."""
    if config.optimizer == "SGD":
        return sgd_step(params, grad, config.learning_rate), state
    return adam_step(params, grad, state, config.learning_rate, config.adam_betas)


def mle_warm_start(
    student: TabularARModel, data_seqs: list[Sequence], config: TrainConfig
) -> TabularARModel:
    """
    Train a student by maximum likelihood on a fixed set of sequences.

    Parameters
    ----------
    student : TabularARModel
        initial student
    data_seqs : list of Sequence
        training sequences, typically teacher samples
    config : TrainConfig
        number of steps, optimizer and floor; ``kind`` is ignored

    Returns
    -------
    TabularARModel
        the parameters with the lowest mean negative log-likelihood seen, so never
        worse than the initial student

    Raises
    ------
    ValueError
        If data_seqs is empty.
    """
    if not data_seqs:
        msg = "MLE warm start needs at least one data sequence."
        raise ValueError(msg)
    obj = ObjectiveMLE(prob_floor=config.prob_floor)
    params = student.logits.copy()
    state = adam_init(params.shape)
    best_params = params
    best_loss = np.inf
    for step in range(config.steps + 1):
        current = student.with_logits(params)
        report = obj.evaluate(current, current, data_seqs, [])
        if report.loss < best_loss:
            best_loss, best_params = report.loss, params
        if step == config.steps:
            break
        params, state = _apply_update(params, report.gradient, state, config)
    logger.info("MLE warm start finished with mean NLL %.6f.", best_loss)
    return student.with_logits(best_params)


def train(
    teacher: SequenceModel, student_init: TabularARModel, config: TrainConfig
) -> TrainResult:
    """
    Distil a teacher into a student.

    With ``warm_start_steps`` set, the student is first fitted by maximum likelihood
    to the offline cache (drawn for the purpose under online sampling) and the
    divergence steps start from the result.

    Parameters
    ----------
    teacher : SequenceModel
        the teacher p, wrapped in a QueryCountingModel if it is not one already
    student_init : TabularARModel
        initial student, left unchanged
    config : TrainConfig
        the run settings

    Returns
    -------
    TrainResult
        trained student, per-step loss history and teacher query counts

    Raises
    ------
    ValueError
        If the models do not share vocabulary and horizon.

    Warns
    -----
    UserWarning
        If an offline cache holds at least as many sequences as the run consumes,
        which leaves no saving over online sampling.
    """
    if (teacher.vocab_size, teacher.horizon) != (
        student_init.vocab_size,
        student_init.horizon,
    ):
        msg = "Teacher and student must share vocabulary size and horizon."
        raise ValueError(msg)

    if isinstance(teacher, QueryCountingModel):
        counter = teacher
    else:
        counter = QueryCountingModel(teacher)
    start_count = counter.count
    run_seed, cache_seed = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(run_seed)
    obj = objective_for(config)
    n_draws = config.mc_samples_per_step
    logger.info(
        "Training %r for %d steps (%s teacher sampling).",
        obj,
        config.steps,
        config.teacher_sampling,
    )

    cache = None
    if config.teacher_sampling == "OFFLINE":
        if config.offline_cache_size >= config.steps * n_draws:
            warnings.warn(
                f"Offline cache of {config.offline_cache_size} sequences is not "
                f"smaller than the {config.steps * n_draws} teacher samples the run "
                "uses, so it saves no teacher queries.",
                UserWarning,
                stacklevel=2,
            )
        cache = build_offline_cache(counter, config.offline_cache_size, cache_seed)

    target: list[Sequence] = []
    if config.kind == "SEQKD":
        target = [counter.beam_search(config.beam_width)]
        logger.debug("SeqKD target %s.", target[0])

    params = student_init.logits.copy()
    if config.warm_start_steps > 0:
        if cache is None:
            warm_data = build_offline_cache(
                counter, config.offline_cache_size, cache_seed
            )
        else:
            warm_data = cache
        warm = mle_warm_start(
            student_init,
            list(warm_data.sequences),
            replace(config, steps=config.warm_start_steps),
        )
        params = warm.logits.copy()
    state = adam_init(params.shape)
    history: list[float] = []
    trace: list[int] = []
    log_interval = max(config.steps // 10, 1)
    for step in range(config.steps):
        student = student_init.with_logits(params)
        teacher_seqs = target
        if obj.teacher_sequences and config.kind != "SEQKD":
            if cache is not None:
                teacher_seqs = cache.batch(step, n_draws)
            else:
                teacher_seqs = counter.sample_many(n_draws, rng)
        student_seqs: list[Sequence] = []
        if obj.student_sequences:
            student_seqs = student.sample_many(n_draws, rng)

        report = obj.evaluate(counter, student, teacher_seqs, student_seqs)
        params, state = _apply_update(params, report.gradient, state, config)
        history.append(report.loss)
        trace.append(counter.count - start_count)
        if (step + 1) % log_interval == 0:
            logger.debug(
                "step %d/%d loss %.6f teacher evals %d",
                step + 1,
                config.steps,
                report.loss,
                trace[-1],
            )

    total = counter.count - start_count
    logger.info("Training finished after %d teacher queries.", total)
    return TrainResult(student_init.with_logits(params), history, total, trace)


def write_history(result: TrainResult, path: Union[str, Path]) -> None:
    """
    Write a training history as line-delimited JSON.

    Parameters
    ----------
    result : TrainResult
        outcome of a training run
    path : str or Path
        file to write, one record ``{step, loss, teacher_evals_cumulative}`` per
        line with 1-based steps
    """
    with Path(path).open("w", encoding="utf-8") as history_file:
        for step, (loss, evals) in enumerate(
            zip(result.history, result.teacher_evals_trace, strict=True), start=1
        ):
            record = {"step": step, "loss": loss, "teacher_evals_cumulative": evals}
            history_file.write(json.dumps(record) + "\n")
