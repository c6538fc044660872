"""Module providing the experiment presets, their configuration and results."""

from .config import (
    CONFIG_KEYS,
    DEFAULT_TRIALS,
    PRESETS,
    ConfigError,
    ExperimentSpec,
    Scale,
    build_spec,
    kind_from_alias,
    parse_config,
    preset_from_alias,
    read_settings,
    spec_to_settings,
    write_config,
)
from .presets import (
    CurvePoint,
    ExperimentOutcome,
    compare_models,
    run_experiment,
    run_preset,
    run_trial,
    trial_seed,
    write_loss_curves,
)
from .result_table import (
    CSV_COLUMNS,
    SUMMARY_TRIAL,
    Check,
    ResultRecord,
    ResultTable,
    check,
    emit_results,
    result_paths,
)

__all__ = [
    "CONFIG_KEYS",
    "CSV_COLUMNS",
    "DEFAULT_TRIALS",
    "PRESETS",
    "SUMMARY_TRIAL",
    "Check",
    "ConfigError",
    "CurvePoint",
    "ExperimentOutcome",
    "ExperimentSpec",
    "ResultRecord",
    "ResultTable",
    "Scale",
    "build_spec",
    "check",
    "compare_models",
    "emit_results",
    "kind_from_alias",
    "parse_config",
    "preset_from_alias",
    "read_settings",
    "result_paths",
    "run_experiment",
    "run_preset",
    "run_trial",
    "spec_to_settings",
    "trial_seed",
    "write_config",
    "write_loss_curves",
]
