"""
Experiment presets checking the step-wise decomposition and its training behaviour.

Extended Summary
----------------
Each preset runs a number of independent trials and turns them into
``ResultRecord`` objects whose checks carry explicit tolerances:

THEOREM_CHECK
    random teacher/student pairs; step-wise values equal the sequence-level
    divergence for KL, RKL and JS and upper-bound it for TVD
MODE_STUDY
    a sharp bimodal teacher over the sequences 0...0 and 1...1 distilled into a
    stationary order-0 student, one next-token distribution shared by every
    position; KL averages the modes while RKL collapses onto one of them, and JS
    and TVD land between the two on likelihood or coverage risk. Every student
    starts from the same small random table with ``mode_tilt`` added to the
    logit of token 0; with no tilt a near-uniform start leaves TVD at its
    mode-averaging local minimum next to KL
CONVERGENCE
    full-capacity students trained with each divergence approach the teacher;
    SeqKD and ENGINE students are trained alongside for comparison
EFFICIENCY
    offline teacher sampling uses fewer teacher queries than online sampling for
    a comparable final divergence
GRAD_CHECK
    analytic loss gradients agree with central finite differences

Trial ``i`` of a run with base seed ``s`` uses the seed
``SeedSequence([s, i]).generate_state(1)[0]``, so results do not depend on the
number of workers or on the order in which trials finish.

Routine Listings
----------------
- trial_seed()
- run_trial()
- run_preset()
- run_experiment()
- write_loss_curves()
- compare_models()

"""

import logging
import math
import multiprocessing
from dataclasses import replace
from pathlib import Path
from typing import Callable, NamedTuple, Union

import numpy as np

from fdistill.divergences import DIVERGENCE_KINDS, DIVERGENCE_UPPER_BOUNDS
from fdistill.metrics import risk_report, teacher_dist
from fdistill.models import Sequence, TabularARModel, bimodal_teacher, random_model
from fdistill.objectives import (
    brute_force_seq_divergence,
    engine_loss_exact,
    js_mode_from_alias,
    stepwise_exact,
    student_seq_entropy,
    tvd_one_sided_bounds,
)
from fdistill.training import (
    ConfigError,
    TrainConfig,
    loss_and_grad,
    numerical_gradient,
    train,
)

from .config import ExperimentSpec, Scale
from .result_table import SUMMARY_TRIAL, ResultRecord, ResultTable

logger = logging.getLogger(__name__)

EXACT_TOL = 1.0e-9
BOUND_TOL = 1.0e-12
GRADIENT_TOL = 1.0e-4
FD_STEP = 1.0e-5
CONVERGED_JS = 1.0e-2
MODE_INIT_SCALE = 0.1
BETWEEN_FRACTION = 0.8
GRAD_CHECK_SAMPLES = 2

#: Divergences compared by the training presets.
TRAINED_KINDS = ("KL", "RKL", "JS", "TVD")

#: Baselines trained next to the divergences by the CONVERGENCE preset.
BASELINE_KINDS = ("SEQKD", "ENGINE")

#: Objective variants whose gradients are checked, with their JS mode.
GRAD_CHECK_KINDS = (
    ("KL", "MIXTURE_OF_CONDITIONALS"),
    ("RKL", "MIXTURE_OF_CONDITIONALS"),
    ("JS", "MIXTURE_OF_CONDITIONALS"),
    ("JS", "EXACT_MARGINAL_RATIO"),
    ("TVD", "MIXTURE_OF_CONDITIONALS"),
    ("SEQKD", "MIXTURE_OF_CONDITIONALS"),
    ("ENGINE", "MIXTURE_OF_CONDITIONALS"),
    ("MLE", "MIXTURE_OF_CONDITIONALS"),
)

_ONLINE_ONLY = ("RKL", "ENGINE", "SEQKD")

#: Column order of the loss-curve csv file.
CURVE_COLUMNS = ("step", "kind", "trial", "loss", "teacher_evals")


class CurvePoint(NamedTuple):
    """One point of a training loss curve."""

    step: int
    kind: str
    trial: int
    loss: float
    teacher_evals: int


class TrialOutcome(NamedTuple):
    """Records and loss-curve points produced by one trial."""

    records: list[ResultRecord]
    curves: list[CurvePoint]


class ExperimentOutcome(NamedTuple):
    """
    Everything an experiment produced.

    Attributes
    ----------
    table : ResultTable
        per-trial and summary records
    curves : list of CurvePoint
        loss curves, empty unless the preset trains and records them
    """

    table: ResultTable
    curves: list[CurvePoint]


def trial_seed(seed: int, trial: int) -> int:
    """
    Derive the seed of one trial from the experiment seed.

    Parameters
    ----------
    seed : int
        non-negative experiment seed
    trial : int
        0-based trial index

    Returns
    -------
    int
        32-bit trial seed, independent of how trials are scheduled
    """
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def _config_for(train_config: TrainConfig, kind: str, seed: int) -> TrainConfig:
    """Copy a training config for another objective and seed."""
    sampling = train_config.teacher_sampling
    if kind in _ONLINE_ONLY:
        sampling = "ONLINE"
    return replace(train_config, kind=kind, seed=seed, teacher_sampling=sampling)


def _random_pair(
    spec: ExperimentSpec, rng: np.random.Generator
) -> tuple[TabularARModel, TabularARModel]:
    """Draw a random teacher and student at the experiment scale."""
    scale = spec.scale
    teacher = random_model(scale.vocab, scale.horizon, scale.teacher_order, rng)
    student = random_model(scale.vocab, scale.horizon, scale.student_order, rng)
    return teacher, student


def _theorem_trial(spec: ExperimentSpec, trial: int, seed: int) -> TrialOutcome:
    teacher, student = _random_pair(spec, np.random.default_rng(seed))
    brute = {
        kind: brute_force_seq_divergence(teacher, student, kind)
        for kind in DIVERGENCE_KINDS
    }
    reversed_brute = {
        kind: brute_force_seq_divergence(student, teacher, kind)
        for kind in DIVERGENCE_KINDS
    }
    records = []
    for kind in DIVERGENCE_KINDS:
        rec = ResultRecord(spec.preset, trial, seed, spec.scale, kind)
        step = stepwise_exact(teacher, student, kind)
        rec.add("brute_force", brute[kind], ">=", -BOUND_TOL)
        rec.add("stepwise_exact", step)
        if kind == "TVD":
            p_side, q_side = tvd_one_sided_bounds(teacher, student)
            rec.add("teacher_side_bound", p_side)
            rec.add("student_side_bound", q_side)
            rec.add("bound_margin", step - brute[kind], ">=", -BOUND_TOL)
        else:
            rec.add("residual", abs(step - brute[kind]), "<=", EXACT_TOL)

        if kind == "KL":
            gap = abs(brute["KL"] - reversed_brute["RKL"])
            rec.add("duality_gap", gap, "<=", BOUND_TOL)
            pinsker = math.sqrt(brute["KL"] / 2.0) - brute["TVD"]
            rec.add("pinsker_margin", pinsker, ">=", -BOUND_TOL)
        elif kind == "RKL":
            engine = engine_loss_exact(teacher, student) - student_seq_entropy(student)
            rec.add("engine_gap", abs(step - engine), "<=", EXACT_TOL)
        else:
            gap = abs(brute[kind] - reversed_brute[kind])
            rec.add("symmetry_gap", gap, "<=", BOUND_TOL)
            upper = DIVERGENCE_UPPER_BOUNDS[kind] - brute[kind]
            rec.add("upper_bound_margin", upper, ">=", -BOUND_TOL)
        if kind == "JS":
            mixed = stepwise_exact(teacher, student, kind, "MIXTURE_OF_CONDITIONALS")
            rec.add("stepwise_mixture", mixed)
        records.append(rec)
    return TrialOutcome(records, [])


def _theorem_summary(spec: ExperimentSpec, records: list[ResultRecord]):
    strict = sum(
        rec.metrics["bound_margin"] > BOUND_TOL
        for rec in records
        if rec.kind == "TVD"
    )
    summary = ResultRecord(spec.preset, SUMMARY_TRIAL, spec.seed, spec.scale, "TVD")
    summary.add("strictly_loose_pairs", strict, ">=", 1.0)
    return [summary]


def _between(value: float, first: float, second: float) -> bool:
    return min(first, second) <= value <= max(first, second)


def _mode_trial(spec: ExperimentSpec, trial: int, seed: int) -> TrialOutcome:
    scale = spec.scale
    mode_a = (0,) * scale.horizon
    teacher = bimodal_teacher(
        scale.vocab, scale.horizon, mode_a, (1,) * scale.horizon, spec.sharpness
    )
    untilted = random_model(
        scale.vocab,
        scale.horizon,
        scale.student_order,
        seed,
        scale=MODE_INIT_SCALE,
        stationary=True,
    )
    logits = untilted.logits.copy()
    logits[:, mode_a[0]] += spec.mode_tilt
    student_init = untilted.with_logits(logits)
    records = []
    risks = {}
    for kind in TRAINED_KINDS:
        config = _config_for(spec.train, kind, seed)
        result = train(teacher, student_init, config)
        report = risk_report(
            teacher, result.student, spec.risk_samples, seed, config.prob_floor
        )
        risks[kind] = report
        rec = ResultRecord(spec.preset, trial, seed, scale, kind)
        rec.add("r_llh", report.r_llh)
        rec.add("r_llh_stderr", report.r_llh_stderr)
        rec.add("r_cvg", report.r_cvg)
        rec.add("r_cvg_stderr", report.r_cvg_stderr)
        rec.add(
            "final_divergence",
            brute_force_seq_divergence(teacher, result.student, kind),
        )
        records.append(rec)

    kl, rkl = risks["KL"], risks["RKL"]
    rec = ResultRecord(spec.preset, trial, seed, scale, "KL/RKL")
    rec.add("teacher_dist", teacher_dist(teacher, seed=seed))
    rec.add("r_cvg_gap", rkl.r_cvg - kl.r_cvg, ">", 0.0)
    rec.add("r_llh_gap", kl.r_llh - rkl.r_llh, ">", 0.0)
    for kind in ("JS", "TVD"):
        between = _between(risks[kind].r_llh, kl.r_llh, rkl.r_llh) or _between(
            risks[kind].r_cvg, kl.r_cvg, rkl.r_cvg
        )
        rec.add(f"{kind.lower()}_between", float(between))
    records.append(rec)
    return TrialOutcome(records, [])


def _mode_summary(spec: ExperimentSpec, records: list[ResultRecord]):
    comparisons = [rec for rec in records if rec.kind == "KL/RKL"]
    needed = math.ceil(BETWEEN_FRACTION * len(comparisons))
    summary = ResultRecord(spec.preset, SUMMARY_TRIAL, spec.seed, spec.scale, "JS/TVD")
    for kind in ("js", "tvd"):
        count = sum(rec.metrics[f"{kind}_between"] for rec in comparisons)
        summary.add(f"{kind}_between_trials", count, ">=", needed)
    return [summary]


def _convergence_trial(spec: ExperimentSpec, trial: int, seed: int) -> TrialOutcome:
    teacher, student_init = _random_pair(spec, np.random.default_rng(seed))
    full_capacity = spec.scale.student_order >= spec.scale.teacher_order
    initial_js = brute_force_seq_divergence(teacher, student_init, "JS")
    records = []
    curves = []
    for kind in TRAINED_KINDS + BASELINE_KINDS:
        result = train(teacher, student_init, _config_for(spec.train, kind, seed))
        final_js = brute_force_seq_divergence(teacher, result.student, "JS")
        tail = result.history[-max(len(result.history) // 10, 1) :]
        rec = ResultRecord(spec.preset, trial, seed, spec.scale, kind)
        rec.add("initial_js", initial_js)
        if full_capacity and kind in TRAINED_KINDS:
            rec.add("final_js", final_js, "<=", CONVERGED_JS)
        else:
            rec.add("final_js", final_js)
        rec.add("final_loss", float(np.mean(tail)) if tail else math.nan)
        rec.add("teacher_evals", result.total_teacher_evals)
        records.append(rec)
        curves.extend(
            CurvePoint(step, kind, trial, loss, evals)
            for step, (loss, evals) in enumerate(
                zip(result.history, result.teacher_evals_trace, strict=True),
                start=1,
            )
        )
    return TrialOutcome(records, curves)


def _efficiency_trial(spec: ExperimentSpec, trial: int, seed: int) -> TrialOutcome:
    teacher, student_init = _random_pair(spec, np.random.default_rng(seed))
    kind = spec.train.kind
    measure = kind if kind in DIVERGENCE_KINDS else "KL"
    outcomes = {}
    for sampling in ("ONLINE", "OFFLINE"):
        config = replace(spec.train, seed=seed, teacher_sampling=sampling)
        result = train(teacher, student_init, config)
        divergence = brute_force_seq_divergence(teacher, result.student, measure)
        outcomes[sampling] = (result.total_teacher_evals, divergence)

    (online_evals, online_div), (offline_evals, offline_div) = (
        outcomes["ONLINE"],
        outcomes["OFFLINE"],
    )
    largest = max(online_div, offline_div)
    relative = abs(online_div - offline_div) / largest if largest > 0.0 else 0.0
    rec = ResultRecord(spec.preset, trial, seed, spec.scale, kind)
    rec.add("online_teacher_evals", online_evals)
    rec.add("offline_teacher_evals", offline_evals)
    rec.add("teacher_evals_saved", online_evals - offline_evals, ">", 0.0)
    rec.add("online_divergence", online_div)
    rec.add("offline_divergence", offline_div)
    rec.add("relative_difference", relative, "<=", spec.efficiency_tolerance)
    return TrialOutcome([rec], [])


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1.0e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def _grad_check_trial(spec: ExperimentSpec, trial: int, seed: int) -> TrialOutcome:
    rng = np.random.default_rng(seed)
    teacher, student = _random_pair(spec, rng)
    teacher_seqs = teacher.sample_many(GRAD_CHECK_SAMPLES, rng)
    student_seqs = student.sample_many(GRAD_CHECK_SAMPLES, rng)
    target: list[Sequence] = [teacher.beam_search(spec.train.beam_width)]
    records = []
    for kind, js_mode in GRAD_CHECK_KINDS:
        config = TrainConfig(
            kind=kind,
            prob_floor=spec.train.prob_floor,
            js_mode=js_mode,
            beam_width=spec.train.beam_width,
        )
        data = target if kind == "SEQKD" else teacher_seqs
        report = loss_and_grad(teacher, student, config, data, student_seqs)
        numeric = numerical_gradient(
            teacher, student, config, data, student_seqs, step=FD_STEP
        )
        label = f"JS[{js_mode}]" if kind == "JS" else kind
        rec = ResultRecord(spec.preset, trial, seed, spec.scale, label)
        rec.add("loss", report.loss)
        rec.add("gradient_norm", float(np.linalg.norm(report.gradient)))
        rec.add(
            "relative_error",
            _relative_error(report.gradient, numeric),
            "<=",
            GRADIENT_TOL,
        )
        records.append(rec)
    return TrialOutcome(records, [])


_TrialRunner = Callable[[ExperimentSpec, int, int], TrialOutcome]
_Summariser = Callable[[ExperimentSpec, list[ResultRecord]], list[ResultRecord]]

_TRIAL_RUNNERS: dict[str, _TrialRunner] = {
    "THEOREM_CHECK": _theorem_trial,
    "MODE_STUDY": _mode_trial,
    "CONVERGENCE": _convergence_trial,
    "EFFICIENCY": _efficiency_trial,
    "GRAD_CHECK": _grad_check_trial,
}

_SUMMARISERS: dict[str, _Summariser] = {
    "THEOREM_CHECK": _theorem_summary,
    "MODE_STUDY": _mode_summary,
}


def _check_runnable(spec: ExperimentSpec) -> None:
    """Reject settings a preset cannot run with before any computation."""
    if spec.preset == "EFFICIENCY" and spec.train.kind in _ONLINE_ONLY:
        msg = (
            f"The EFFICIENCY preset compares teacher sampling modes, but the "
            f"{spec.train.kind} objective draws no teacher samples."
        )
        raise ConfigError(msg, keys=["kind"])
    if spec.preset == "MODE_STUDY" and (
        spec.scale.teacher_order != spec.scale.horizon - 1
    ):
        msg = (
            "The MODE_STUDY teacher conditions on the full history, so "
            f"teacher_order must be {spec.scale.horizon - 1}."
        )
        raise ConfigError(msg, keys=["teacher_order"])
    if spec.preset == "MODE_STUDY" and spec.scale.student_order != 0:
        msg = (
            "The MODE_STUDY preset needs an order-0 student "
            f"but student_order is {spec.scale.student_order}."
        )
        raise ConfigError(msg, keys=["student_order"])


def run_trial(spec: ExperimentSpec, trial: int) -> TrialOutcome:
    """
    Run a single trial of an experiment.

    Parameters
    ----------
    spec : ExperimentSpec
        the experiment
    trial : int
        0-based trial index

    Returns
    -------
    TrialOutcome
        the trial's records and loss-curve points
    """
    seed = trial_seed(spec.seed, trial)
    logger.debug("%s trial %d with seed %d.", spec.preset, trial, seed)
    return _TRIAL_RUNNERS[spec.preset](spec, trial, seed)


def run_preset(spec: ExperimentSpec) -> ExperimentOutcome:
    """
    Run every trial of an experiment and summarise them.

    Parameters
    ----------
    spec : ExperimentSpec
        the experiment; trials run in a process pool when ``workers > 1``

    Returns
    -------
    ExperimentOutcome
        result table and loss curves, identical for any number of workers

    Raises
    ------
    ConfigError
        If the preset cannot run with the given settings.
    """
    _check_runnable(spec)
    trials = list(range(spec.trials or 0))
    logger.info(
        "Running %s: %d trials, base seed %d, %d worker(s).",
        spec.preset,
        len(trials),
        spec.seed,
        spec.workers,
    )
    if spec.workers > 1 and len(trials) > 1:
        cores = min(spec.workers, len(trials))
        with multiprocessing.Pool(cores) as pool:
            outcomes = pool.starmap(run_trial, [(spec, trial) for trial in trials])
    else:
        outcomes = [run_trial(spec, trial) for trial in trials]

    records = [rec for outcome in outcomes for rec in outcome.records]
    curves = [point for outcome in outcomes for point in outcome.curves]
    summariser = _SUMMARISERS.get(spec.preset)
    if summariser is not None:
        records.extend(summariser(spec, records))
    table = ResultTable(records)
    logger.info("%s finished: %d failed checks.", spec.preset, len(table.failures))
    return ExperimentOutcome(table, curves)


def run_experiment(spec: ExperimentSpec) -> list[ResultRecord]:
    """
    Run an experiment preset and collect its result records.

    Parameters
    ----------
    spec : ExperimentSpec
        the experiment

    Returns
    -------
    list of ResultRecord
        per-trial records sorted by trial index, then summary records

    Raises
    ------
    ConfigError
        If the preset cannot run with the given settings.

    Examples
    --------
    >>> from fdistill.experiments import parse_config
    >>> spec = parse_config(overrides={"trials": 2})
    >>> all(rec.passed for rec in run_experiment(spec))
    True
    """
    return run_preset(spec).table.records


def write_loss_curves(curves: list[CurvePoint], path: Union[str, Path]) -> None:
    """
    Write loss curves as a plottable csv file.

    Parameters
    ----------
    curves : list of CurvePoint
        the curve points
    path : str or Path
        csv filepath with columns ``step,kind,trial,loss,teacher_evals``
    """
    with Path(path).open("w", encoding="utf-8") as curve_file:
        curve_file.write(",".join(CURVE_COLUMNS) + "\n")
        for point in sorted(curves, key=lambda pt: (pt.trial, pt.kind, pt.step)):
            curve_file.write(
                f"{point.step},{point.kind},{point.trial},{point.loss!r},"
                f"{point.teacher_evals}\n"
            )


def compare_models(
    teacher: TabularARModel,
    student: TabularARModel,
    js_mode: str = "EXACT_MARGINAL_RATIO",
) -> list[ResultRecord]:
    """
    Compare the exact sequence-level and step-wise divergences of two models.

    Parameters
    ----------
    teacher : TabularARModel
        the teacher p
    student : TabularARModel
        the student q
    js_mode : str, default="EXACT_MARGINAL_RATIO"
        per-step mixture used for the step-wise JS value

    Returns
    -------
    list of ResultRecord
        one record per divergence kind with the same checks as THEOREM_CHECK

    Raises
    ------
    ValueError
        If the models are incompatible or too large to enumerate.
    """
    js_mode = js_mode_from_alias(js_mode)
    scale = Scale(teacher.vocab_size, teacher.horizon, teacher.order, student.order)
    records = []
    for kind in DIVERGENCE_KINDS:
        brute = brute_force_seq_divergence(teacher, student, kind)
        step = stepwise_exact(teacher, student, kind, js_mode)
        rec = ResultRecord("DIVERGENCE", 0, 0, scale, kind)
        rec.add("brute_force", brute, ">=", -BOUND_TOL)
        rec.add("stepwise_exact", step)
        gap = 0.0 if step == brute else step - brute
        if kind == "TVD":
            rec.add("bound_margin", gap, ">=", -BOUND_TOL)
        elif kind == "JS" and js_mode != "EXACT_MARGINAL_RATIO":
            rec.add("residual", abs(gap))
        else:
            rec.add("residual", abs(gap), "<=", EXACT_TOL)
        records.append(rec)
    return records
