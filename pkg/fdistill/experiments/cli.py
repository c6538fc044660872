"""
Command-line entry point running the experiment presets.

Exit status is 0 when every asserted check passes, 1 when a check fails and 2 for
configuration or input errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Optional

from fdistill.model_files import read_model
from fdistill.models import EnumerationCapError
from fdistill.objectives import js_mode_from_alias
from fdistill.utils import versions

from .config import (
    CONFIG_KEYS,
    DEFAULT_TRIALS,
    ConfigError,
    kind_from_alias,
    parse_config,
)
from .presets import compare_models, run_preset, write_loss_curves
from .result_table import ResultTable, emit_results, result_paths

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

LOG_FORMAT = "%(asctime)s - %(levelname)s - [%(name)s] %(message)s"

#: Preset run by each experiment verb.
VERBS = {
    "check-theorem": "THEOREM_CHECK",
    "mode-study": "MODE_STUDY",
    "converge": "CONVERGENCE",
    "efficiency": "EFFICIENCY",
    "grad-check": "GRAD_CHECK",
}

_HELP = {
    "check-theorem": "step-wise values against exhaustive sequence-level divergences",
    "mode-study": "mode averaging and collapse on a bimodal teacher",
    "converge": "train full-capacity students with each divergence",
    "efficiency": "teacher queries of offline versus online teacher sampling",
    "grad-check": "analytic gradients against central finite differences",
}

_EPILOG = """
Examples:
  # Check the step-wise decomposition on 50 random pairs
  fdistill check-theorem --seed 0

  # Mode study with results written to results/modes.{{jsonl,csv}}
  fdistill mode-study --out results/modes

  # Run settings from a file, overriding the horizon
  fdistill converge --config converge.cfg --horizon 3

  # Divergences between two saved models
  fdistill divergence teacher.json student.json --js-mode exact

Configuration files hold one 'key = value' setting per line. Valid keys:
  {keys}
Default trials: {trials}
"""


def _add_common(parser: argparse.ArgumentParser) -> None:
    """Add the output and verbosity flags every verb accepts."""
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument(
        "--json",
        dest="fmt",
        action="store_const",
        const="json",
        help="print records to stdout as line-delimited JSON",
    )
    fmt.add_argument(
        "--csv",
        dest="fmt",
        action="store_const",
        const="csv",
        help="print records to stdout as a csv table",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log debug messages"
    )
    parser.add_argument(
        "-q", "--quiet", action="store_true", help="log warnings and errors only"
    )
    parser.add_argument("--out", type=str, help="write .jsonl and .csv results here")


def _add_experiment(parser: argparse.ArgumentParser) -> None:
    """Add the flags overriding experiment settings."""
    parser.add_argument("--config", type=Path, help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="non-negative base seed")
    parser.add_argument("--trials", type=int, help="number of trials")
    parser.add_argument("--steps", type=int, help="training steps per run")
    parser.add_argument("--vocab", type=int, help="vocabulary size V")
    parser.add_argument("--horizon", type=int, help="sequence length T")
    parser.add_argument("--teacher-order", type=int, help="Markov order of the teacher")
    parser.add_argument("--student-order", type=int, help="Markov order of the student")
    parser.add_argument(
        "--kind",
        type=str,
        help="objective: kl, rkl, js, tvd, seqkd, engine or mle",
    )
    parser.add_argument(
        "--js-mode", type=str, help="per-step JS mixture: exact or mixture"
    )
    parser.add_argument(
        "--workers", type=int, help="number of processes to spread trials over"
    )


def build_parser() -> argparse.ArgumentParser:
    """
    Build the command-line parser.

    Returns
    -------
    argparse.ArgumentParser
        parser with one sub-command per verb
    """
    parser = argparse.ArgumentParser(
        prog="fdistill",
        description="Step-wise f-divergence distillation experiments.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=_EPILOG.format(
            keys=", ".join(CONFIG_KEYS),
            trials=", ".join(f"{k} {v}" for k, v in DEFAULT_TRIALS.items()),
        ),
    )
    verbs = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in _HELP.items():
        sub = verbs.add_parser(verb, help=help_text, description=help_text)
        _add_experiment(sub)
        _add_common(sub)

    divergence = verbs.add_parser(
        "divergence",
        help="exact divergences between two saved models",
        description="exact divergences between two saved models",
    )
    divergence.add_argument("teacher", type=Path, help="teacher model file")
    divergence.add_argument("student", type=Path, help="student model file")
    divergence.add_argument(
        "--js-mode",
        type=str,
        default="exact",
        help="per-step JS mixture: exact or mixture",
    )
    _add_common(divergence)

    verbs.add_parser("versions", help="print system and dependency versions")
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """
    Collect the configuration settings given as command-line flags.

    Parameters
    ----------
    args : argparse.Namespace
        parsed arguments of an experiment verb

    Returns
    -------
    dict of str : Any
        settings keyed as in a configuration file

    Raises
    ------
    ConfigError
        If an objective or JS mode alias is not recognised.
    """
    settings: dict[str, Any] = {"preset": VERBS[args.verb]}
    flags = {
        "seed": args.seed,
        "trials": args.trials,
        "steps": args.steps,
        "vocab": args.vocab,
        "horizon": args.horizon,
        "teacher_order": args.teacher_order,
        "student_order": args.student_order,
        "workers": args.workers,
        "output_path": args.out,
    }
    settings.update({key: value for key, value in flags.items() if value is not None})
    if args.kind is not None:
        settings["kind"] = kind_from_alias(args.kind)
    if args.js_mode is not None:
        try:
            settings["js_mode"] = js_mode_from_alias(args.js_mode)
        except ValueError as exc:
            raise ConfigError(str(exc), keys=["js_mode"]) from exc
    return settings


def _report(table: ResultTable, fmt: Optional[str]) -> None:
    """Print the results in the requested format."""
    if fmt == "json":
        table.write_jsonl(sys.stdout)
    elif fmt == "csv":
        table.write_csv(sys.stdout)
    else:
        table.print()


def _run_experiment(args: argparse.Namespace) -> int:
    spec = parse_config(args.config, overrides_from_args(args))
    outcome = run_preset(spec)
    if spec.output_path is not None:
        jsonl_path, csv_path = emit_results(outcome.table, spec.output_path)
        logger.info("Wrote %s and %s.", jsonl_path, csv_path)
        if outcome.curves:
            curve_path = csv_path.with_name(f"{csv_path.stem}_curves.csv")
            write_loss_curves(outcome.curves, curve_path)
            logger.info("Wrote loss curves to %s.", curve_path)
    _report(outcome.table, args.fmt)
    return EXIT_PASS if outcome.table.passed else EXIT_FAIL


def _run_divergence(args: argparse.Namespace) -> int:
    try:
        teacher = read_model(args.teacher)
        student = read_model(args.student)
        js_mode = js_mode_from_alias(args.js_mode)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    try:
        table = ResultTable(compare_models(teacher, student, js_mode))
    except EnumerationCapError as exc:
        raise ConfigError(str(exc), keys=["vocab", "horizon"]) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.out is not None:
        emit_results(table, args.out)
        logger.info("Wrote %s.", ", ".join(map(str, result_paths(args.out))))
    _report(table, args.fmt)
    return EXIT_PASS if table.passed else EXIT_FAIL


def main(argv: Optional[list[str]] = None) -> int:
    """
    Run the fdistill command line.

    Parameters
    ----------
    argv : list of str or None, default=None
        arguments without the program name, ``sys.argv[1:]`` when None

    Returns
    -------
    int
        exit status: 0 all checks pass, 1 a check failed, 2 configuration error
    """
    args = build_parser().parse_args(argv)
    if args.verb == "versions":
        versions()
        return EXIT_PASS

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        if args.verb == "divergence":
            return _run_divergence(args)
        return _run_experiment(args)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
