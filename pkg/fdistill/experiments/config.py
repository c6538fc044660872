"""
Experiment settings and their flat ``key = value`` configuration files.

Extended Summary
----------------
A configuration file is plain text with one ``key = value`` setting per line.
Blank lines and ``#`` comments are ignored, keys are case-insensitive and
option values accept several spellings (e.g. ``kl``, ``KL`` or ``forward_kl``).

Settings are resolved in order of precedence: command-line flags, then the file,
then the defaults of the chosen preset, then the global defaults.

Routine Listings
----------------
- Scale
- ExperimentSpec
- parse_config()
- read_settings()
- build_spec()
- write_config()
- spec_to_settings()

"""

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Literal, Optional, TypeAlias, Union, cast, get_args

from fdistill.models import EnumerationCapError, check_enumerable
from fdistill.training import ConfigError, TrainConfig

# TypeAlias deprecated. Move to `type` in py3.12+
Preset: TypeAlias = Literal[
    "THEOREM_CHECK", "MODE_STUDY", "CONVERGENCE", "EFFICIENCY", "GRAD_CHECK"
]

PRESETS: tuple[Preset, ...] = get_args(Preset)

PRESET_ALIASES: dict[str, set[str]] = {
    "THEOREM_CHECK": {"theorem_check", "check-theorem", "check_theorem", "theorem"},
    "MODE_STUDY": {"mode_study", "mode-study", "modes"},
    "CONVERGENCE": {"convergence", "converge"},
    "EFFICIENCY": {"efficiency", "offline"},
    "GRAD_CHECK": {"grad_check", "grad-check", "gradients"},
}

KIND_ALIASES: dict[str, set[str]] = {
    "KL": {"kl", "forward_kl", "fkl"},
    "RKL": {"rkl", "reverse_kl"},
    "JS": {"js", "jsd", "jensen_shannon"},
    "TVD": {"tvd", "tv", "total_variation"},
    "SEQKD": {"seqkd", "seq_kd"},
    "ENGINE": {"engine"},
    "MLE": {"mle", "nll"},
}

#: Number of trials each preset runs when none is configured.
DEFAULT_TRIALS: dict[Preset, int] = {
    "THEOREM_CHECK": 50,
    "MODE_STUDY": 5,
    "CONVERGENCE": 1,
    "EFFICIENCY": 3,
    "GRAD_CHECK": 10,
}

#: Training settings a preset uses unless configured otherwise.
PRESET_TRAIN_DEFAULTS: dict[Preset, dict[str, Any]] = {
    "THEOREM_CHECK": {},
    "MODE_STUDY": {"steps": 2000},
    "CONVERGENCE": {"steps": 5000, "warm_start_steps": 25},
    "EFFICIENCY": {"steps": 2000, "offline_cache_size": 1000},
    "GRAD_CHECK": {},
}

#: Scale settings a preset uses unless configured otherwise.
PRESET_SCALE_DEFAULTS: dict[Preset, dict[str, Any]] = {
    "THEOREM_CHECK": {},
    "MODE_STUDY": {"student_order": 0},
    "CONVERGENCE": {},
    "EFFICIENCY": {"student_order": 1},
    "GRAD_CHECK": {"student_order": 1},
}


def _alias_lookup(value: str, aliases: dict[str, set[str]], key: str) -> str:
    """Map any accepted spelling of an option to its canonical name."""
    lowered = value.strip().lower()
    for canonical, spellings in aliases.items():
        if lowered == canonical.lower() or lowered in spellings:
            return canonical
    msg = (
        f"{value} is not a recognised {key}.\n"
        f"""Please select from '{"', '".join(aliases.keys())}'."""
    )
    raise ConfigError(msg, keys=[key])


def preset_from_alias(value: str) -> Preset:
    """
    Convert a preset alias (e.g. ``"mode-study"``) to its canonical name.

    Parameters
    ----------
    value : str
        any accepted spelling

    Returns
    -------
    Preset
        canonical preset name

    Raises
    ------
    ConfigError
        If the preset is not recognised.
    """
    return cast(Preset, _alias_lookup(value, PRESET_ALIASES, "preset"))


def kind_from_alias(value: str) -> str:
    """
    Convert an objective alias (e.g. ``"forward_kl"``) to its canonical name.

    Parameters
    ----------
    value : str
        any accepted spelling

    Returns
    -------
    str
        canonical objective name

    Raises
    ------
    ConfigError
        If the objective is not recognised.
    """
    return _alias_lookup(value, KIND_ALIASES, "kind")


@dataclass(frozen=True)
class Scale:
    """
    Sizes of the models in an experiment.

    Attributes
    ----------
    vocab : int, default=4
        vocabulary size V
    horizon : int, default=4
        sequence length T
    teacher_order : int, default=3
        Markov order of the teacher
    student_order : int, default=3
        Markov order of the student

    Raises
    ------
    ConfigError
        If a size is invalid or V**T exceeds the enumeration cap.
    """

    vocab: int = 4
    horizon: int = 4
    teacher_order: int = 3
    student_order: int = 3

    def __post_init__(self) -> None:
        """Validate the sizes before any computation."""
        if self.vocab < 2:  # noqa: PLR2004
            msg = f"vocab must be at least 2 but is {self.vocab}."
            raise ConfigError(msg, keys=["vocab"])
        if self.horizon < 1:
            msg = f"horizon must be at least 1 but is {self.horizon}."
            raise ConfigError(msg, keys=["horizon"])
        for key in ("teacher_order", "student_order"):
            order = getattr(self, key)
            if not 0 <= order < self.horizon:
                msg = f"{key} must lie in [0, horizon) but is {order}."
                raise ConfigError(msg, keys=[key])
        try:
            check_enumerable(self.vocab, self.horizon)
        except EnumerationCapError as exc:
            raise ConfigError(str(exc), keys=["vocab", "horizon"]) from exc


@dataclass(frozen=True)
class ExperimentSpec:
    """
    Everything needed to run one experiment preset.

    Attributes
    ----------
    preset : Preset, default="THEOREM_CHECK"
        which experiment to run
    scale : Scale
        model sizes
    train : TrainConfig
        training settings, whose ``seed`` is the base seed of every trial
    trials : int or None, default=None
        number of trials, the preset's default when None
    output_path : str or None, default=None
        where results are written, nothing is written when None
    workers : int, default=1
        number of processes trials are spread over
    sharpness : float, default=5.0
        sharpness of the bimodal teacher in the mode study
    mode_tilt : float, default=5.0
        logit added to the first mode's token in the mode-study student's initial
        table, 0 for an untilted random start
    risk_samples : int, default=2000
        samples behind each risk estimate in the mode study
    efficiency_tolerance : float, default=0.25
        allowed relative difference between online and offline final divergences

    Raises
    ------
    ConfigError
        If a setting is out of range.
    """

    preset: str = "THEOREM_CHECK"
    scale: Scale = field(default_factory=Scale)
    train: TrainConfig = field(default_factory=TrainConfig)
    trials: Optional[int] = None
    output_path: Optional[str] = None
    workers: int = 1
    sharpness: float = 5.0
    mode_tilt: float = 5.0
    risk_samples: int = 2000
    efficiency_tolerance: float = 0.25

    def __post_init__(self) -> None:
        """Resolve the preset name and default trial count, then validate."""
        preset = preset_from_alias(self.preset)
        object.__setattr__(self, "preset", preset)
        if self.trials is None:
            object.__setattr__(self, "trials", DEFAULT_TRIALS[preset])
        checks = [
            (self.trials is not None and self.trials >= 1, "trials"),
            (self.seed >= 0, "seed"),
            (self.workers >= 1, "workers"),
            (self.sharpness > 0.0, "sharpness"),
            (self.mode_tilt >= 0.0, "mode_tilt"),
            (self.risk_samples >= 1, "risk_samples"),
            (self.efficiency_tolerance > 0.0, "efficiency_tolerance"),
        ]
        for valid, key in checks:
            if not valid:
                msg = f"{key} is out of range: {getattr(self, key)!r}."
                raise ConfigError(msg, keys=[key])

    @property
    def seed(self) -> int:
        """Base seed of the experiment."""
        return self.train.seed


_SCALE_KEYS = tuple(f.name for f in fields(Scale))
_SPEC_KEYS = (
    "preset",
    "trials",
    "output_path",
    "workers",
    "sharpness",
    "mode_tilt",
    "risk_samples",
    "efficiency_tolerance",
)
_TRAIN_KEYS = (
    "kind",
    "steps",
    "learning_rate",
    "optimizer",
    "adam_beta1",
    "adam_beta2",
    "mc_samples_per_step",
    "teacher_sampling",
    "offline_cache_size",
    "seed",
    "prob_floor",
    "js_mode",
    "beam_width",
    "warm_start_steps",
)

#: Every key a configuration file may set.
CONFIG_KEYS: tuple[str, ...] = _SPEC_KEYS + _SCALE_KEYS + _TRAIN_KEYS

_INT_KEYS = {
    "trials",
    "workers",
    "risk_samples",
    "vocab",
    "horizon",
    "teacher_order",
    "student_order",
    "steps",
    "mc_samples_per_step",
    "offline_cache_size",
    "seed",
    "beam_width",
    "warm_start_steps",
}
_FLOAT_KEYS = {
    "sharpness",
    "mode_tilt",
    "efficiency_tolerance",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "prob_floor",
}


def _convert(key: str, raw: str, line: Optional[int] = None) -> Any:
    """Convert a raw string setting to the type its key needs."""
    value = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as exc:
        kind = "an integer" if key in _INT_KEYS else "a number"
        msg = f"{key} must be {kind} but got {value!r}."
        raise ConfigError(msg, line=line, keys=[key]) from exc
    if key == "kind":
        return kind_from_alias(value)
    if key == "preset":
        return preset_from_alias(value)
    if key == "output_path" and value.lower() in {"", "none"}:
        return None
    return value


def read_settings(path: Union[str, Path]) -> dict[str, Any]:
    """
    Read the settings of a configuration file without applying defaults.

    Parameters
    ----------
    path : str or Path
        configuration file

    Returns
    -------
    dict of str : Any
        typed value of every key the file sets

    Raises
    ------
    ConfigError
        If a line is malformed, a value cannot be converted, a key is repeated, or
        keys are unknown (all unknown keys are listed together).
    """
    settings: dict[str, Any] = {}
    unknown: list[str] = []
    with Path(path).open(encoding="utf-8") as config_file:
        for line_no, raw_line in enumerate(config_file, start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                msg = f"expected 'key = value' but got {raw_line.strip()!r}."
                raise ConfigError(msg, line=line_no)
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lower().replace("-", "_")
            if key not in CONFIG_KEYS:
                unknown.append(key)
                continue
            if key in settings:
                msg = f"{key} is set more than once."
                raise ConfigError(msg, line=line_no, keys=[key])
            settings[key] = _convert(key, value, line_no)
    if unknown:
        msg = (
            f"Unknown configuration keys: {', '.join(unknown)}.\n"
            f"Valid keys are: {', '.join(CONFIG_KEYS)}."
        )
        raise ConfigError(msg, keys=unknown)
    return settings


def build_spec(settings: dict[str, Any]) -> ExperimentSpec:
    """
    Build a validated ExperimentSpec from typed settings.

    Parameters
    ----------
    settings : dict of str : Any
        values keyed as in a configuration file; missing keys take the preset's
        defaults and then the global defaults

    Returns
    -------
    ExperimentSpec
        the experiment

    Raises
    ------
    ConfigError
        If a key is unknown or a value is invalid.
    """
    unknown = [key for key in settings if key not in CONFIG_KEYS]
    if unknown:
        msg = f"Unknown configuration keys: {', '.join(unknown)}."
        raise ConfigError(msg, keys=unknown)

    preset = preset_from_alias(settings.get("preset", "THEOREM_CHECK"))
    scale_values = {**PRESET_SCALE_DEFAULTS[preset]}
    train_values = {**PRESET_TRAIN_DEFAULTS[preset]}
    spec_values: dict[str, Any] = {"preset": preset}
    betas = list(TrainConfig().adam_betas)
    for key, value in settings.items():
        if key in _SCALE_KEYS:
            scale_values[key] = value
        elif key == "adam_beta1":
            betas[0] = value
        elif key == "adam_beta2":
            betas[1] = value
        elif key in _TRAIN_KEYS:
            train_values[key] = value
        elif key != "preset":
            spec_values[key] = value
    train_values["adam_betas"] = tuple(betas)
    if preset == "MODE_STUDY" and "teacher_order" not in scale_values:
        horizon = scale_values.get("horizon", Scale.horizon)
        scale_values["teacher_order"] = horizon - 1

    return ExperimentSpec(
        scale=Scale(**scale_values),
        train=TrainConfig(**train_values),
        **spec_values,
    )


def parse_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[dict[str, Any]] = None,
) -> ExperimentSpec:
    """
    Parse a configuration file into a validated ExperimentSpec.

    Parameters
    ----------
    path : str, Path or None, default=None
        configuration file, only defaults and overrides are used when None
    overrides : dict of str : Any or None, default=None
        settings taking precedence over the file (e.g. command-line flags)

    Returns
    -------
    ExperimentSpec
        the experiment

    Raises
    ------
    ConfigError
        If the file or the overrides contain invalid settings.

    Examples
    --------
    An empty configuration gives the defaults:

    >>> parse_config().trials
    50
    """
    settings: dict[str, Any] = {}
    if path is not None:
        try:
            settings = read_settings(path)
        except OSError as exc:
            msg = f"Cannot read configuration file {path}: {exc.strerror}."
            raise ConfigError(msg) from exc
    settings.update(overrides or {})
    return build_spec(settings)


def spec_to_settings(spec: ExperimentSpec) -> dict[str, Any]:
    """
    Flatten an ExperimentSpec into configuration-file settings.

    Parameters
    ----------
    spec : ExperimentSpec
        the experiment

    Returns
    -------
    dict of str : Any
        one entry per key in ``CONFIG_KEYS``
    """
    settings: dict[str, Any] = {key: getattr(spec, key) for key in _SPEC_KEYS}
    settings.update({key: getattr(spec.scale, key) for key in _SCALE_KEYS})
    for key in _TRAIN_KEYS:
        if key == "adam_beta1":
            settings[key] = spec.train.adam_betas[0]
        elif key == "adam_beta2":
            settings[key] = spec.train.adam_betas[1]
        else:
            settings[key] = getattr(spec.train, key)
    return settings


def write_config(spec: ExperimentSpec, path: Union[str, Path]) -> None:
    """
    Write an ExperimentSpec as a configuration file that parses back to it.

    Parameters
    ----------
    spec : ExperimentSpec
        the experiment
    path : str or Path
        destination file
    """
    lines = [f"# fdistill experiment: {spec.preset}"]
    for key, value in spec_to_settings(spec).items():
        if value is None:
            text = "none"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
