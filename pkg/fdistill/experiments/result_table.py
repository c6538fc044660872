"""
Code providing experiment result records and the ResultTable collecting them.

Results are written twice: as line-delimited JSON records and as a flat CSV table
with one row per metric. The CSV column order is fixed::

    preset,trial,seed,vocab,horizon,teacher_order,student_order,kind,name,value,
    tolerance,passed

``tolerance`` and ``passed`` are empty for metrics that carry no asserted check.
Summary records that aggregate over trials use trial index ``-1``.
"""

import csv
import json
import math
import operator
from dataclasses import asdict, dataclass, field
from itertools import chain
from pathlib import Path
from typing import (
    Any,
    Callable,
    Literal,
    NamedTuple,
    Optional,
    TextIO,
    TypeAlias,
    Union,
    get_args,
)

from .config import Scale

# TypeAlias deprecated. Move to `type` in py3.12+
Relation: TypeAlias = Literal["<=", ">=", "<", ">"]

RELATIONS: tuple[Relation, ...] = get_args(Relation)

_COMPARE: dict[str, Callable[[float, float], bool]] = {
    "<=": operator.le,
    ">=": operator.ge,
    "<": operator.lt,
    ">": operator.gt,
}

#: Column order of the CSV result table.
CSV_COLUMNS = (
    "preset",
    "trial",
    "seed",
    "vocab",
    "horizon",
    "teacher_order",
    "student_order",
    "kind",
    "name",
    "value",
    "tolerance",
    "passed",
)

#: Trial index of records aggregating over all trials.
SUMMARY_TRIAL = -1


class Check(NamedTuple):
    """
    An asserted property of a metric.

    Attributes
    ----------
    passed : bool
        whether ``value <relation> tolerance`` holds
    tolerance : float
        threshold the metric is compared with
    relation : Relation
        comparison the metric must satisfy
    """

    passed: bool
    tolerance: float
    relation: str


def check(value: float, relation: Relation, tolerance: float) -> Check:
    """
    Compare a metric with its tolerance.

    Parameters
    ----------
    value : float
        the metric
    relation : {"<=", ">=", "<", ">"}
        comparison the metric must satisfy
    tolerance : float
        threshold

    Returns
    -------
    Check
        the verdict; NaN values always fail

    Raises
    ------
    ValueError
        If the relation is not recognised.

    Examples
    --------
    >>> check(3.0e-10, "<=", 1.0e-9)
    Check(passed=True, tolerance=1e-09, relation='<=')
    """
    if relation not in RELATIONS:
        msg = (
            f"{relation} is not a recognised relation.\n"
            f"""Please select from '{"', '".join(RELATIONS)}'."""
        )
        raise ValueError(msg)
    passed = not math.isnan(value) and _COMPARE[relation](value, tolerance)
    return Check(bool(passed), float(tolerance), relation)


@dataclass
class ResultRecord:
    """
    Metrics and verdicts of one experiment unit.

    Attributes
    ----------
    preset : str
        preset that produced the record
    trial : int
        trial index, ``SUMMARY_TRIAL`` for records aggregating over trials
    seed : int
        seed of the trial
    scale : Scale
        model sizes
    kind : str
        objective or divergence the record is about
    metrics : dict of str : float
        named metric values
    checks : dict of str : Check
        verdicts keyed by the metric they assert on

    Raises
    ------
    ValueError
        If a check refers to a metric the record does not hold.
    """

    preset: str
    trial: int
    seed: int
    scale: Scale
    kind: str
    metrics: dict[str, float] = field(default_factory=dict)
    checks: dict[str, Check] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Ensure every check names an existing metric."""
        orphans = [name for name in self.checks if name not in self.metrics]
        if orphans:
            msg = f"Checks {orphans} have no matching metric."
            raise ValueError(msg)

    @property
    def passed(self) -> bool:
        """Whether every asserted property of the record holds."""
        return all(verdict.passed for verdict in self.checks.values())

    def add(
        self,
        name: str,
        value: float,
        relation: Optional[Relation] = None,
        tolerance: float = 0.0,
    ) -> None:
        """
        Store a metric and optionally assert a property of it.

        Parameters
        ----------
        name : str
            metric name
        value : float
            metric value
        relation : {"<=", ">=", "<", ">"} or None, default=None
            comparison to assert, nothing is asserted when None
        tolerance : float, default=0.0
            threshold of the assertion
        """
        self.metrics[name] = float(value)
        if relation is not None:
            self.checks[name] = check(float(value), relation, tolerance)

    def to_dict(self) -> dict[str, Any]:
        """
        Convert the record to a json-serialisable dictionary.

        Returns
        -------
        dict of str : Any
            record fields with the scale and checks expanded
        """
        return {
            "preset": self.preset,
            "trial": self.trial,
            "seed": self.seed,
            "scale": asdict(self.scale),
            "kind": self.kind,
            "metrics": dict(self.metrics),
            "checks": {
                name: {
                    "passed": verdict.passed,
                    "tolerance": verdict.tolerance,
                    "relation": verdict.relation,
                }
                for name, verdict in self.checks.items()
            },
            "passed": self.passed,
        }

    def rows(self) -> list[list[Any]]:
        """
        Flatten the record into CSV rows, one per metric.

        Returns
        -------
        list of list
            rows in ``CSV_COLUMNS`` order
        """
        prefix = [
            self.preset,
            self.trial,
            self.seed,
            self.scale.vocab,
            self.scale.horizon,
            self.scale.teacher_order,
            self.scale.student_order,
            self.kind,
        ]
        rows = []
        for name, value in self.metrics.items():
            verdict = self.checks.get(name)
            if verdict is None:
                rows.append([*prefix, name, repr(value), "", ""])
            else:
                rows.append(
                    [
                        *prefix,
                        name,
                        repr(value),
                        repr(verdict.tolerance),
                        str(verdict.passed).lower(),
                    ]
                )
        return rows


class ResultTable:
    """
    Class to collect and write the records of an experiment.

    Parameters
    ----------
    records : list of ResultRecord
        records in any order

    Attributes
    ----------
    records : list of ResultRecord
        per-trial records sorted by trial index, followed by summary records
    """

    def __init__(self, records: list[ResultRecord]) -> None:
        trials = sorted(
            (rec for rec in records if rec.trial != SUMMARY_TRIAL),
            key=lambda rec: rec.trial,
        )
        summaries = [rec for rec in records if rec.trial == SUMMARY_TRIAL]
        self.records = trials + summaries

    def __repr__(self) -> str:
        """Return a representation of a ResultTable instance."""
        presets = sorted({rec.preset for rec in self.records})
        return f"<ResultTable: {len(self.records)} records {presets}>"

    def __len__(self) -> int:
        """Return the number of records."""
        return len(self.records)

    @property
    def passed(self) -> bool:
        """Whether every asserted property of every record holds."""
        return all(rec.passed for rec in self.records)

    @property
    def failures(self) -> list[tuple[ResultRecord, str]]:
        """Records and metric names of every failed check."""
        return [
            (rec, name)
            for rec in self.records
            for name, verdict in rec.checks.items()
            if not verdict.passed
        ]

    def __str__(self) -> str:
        """
        Format the checked metrics as an aligned text table.

        Returns
        -------
        output_str : str
            one line per asserted check, with a closing pass/fail count
        """
        header = "".join(
            name.rjust(width)
            for name, width in zip(
                ("trial", "kind", "check", "value", "rel", "tolerance", "ok"),
                (6, 28, 28, 14, 4, 12, 6),
                strict=True,
            )
        )
        rows = [
            self._format_row(rec, name, verdict)
            for rec in self.records
            for name, verdict in rec.checks.items()
        ]
        n_checks = len(rows)
        n_failed = len(self.failures)
        footer = f"{n_checks - n_failed}/{n_checks} checks passed"
        return "\n".join(chain([header], rows, [footer]))

    @staticmethod
    def _format_row(rec: ResultRecord, name: str, verdict: Check) -> str:
        trial = "all" if rec.trial == SUMMARY_TRIAL else str(rec.trial)
        return "".join(
            [
                trial.rjust(6),
                rec.kind.rjust(28),
                name.rjust(28),
                f"{rec.metrics[name]:14.6g}",
                verdict.relation.rjust(4),
                f"{verdict.tolerance:12.3g}",
                ("pass" if verdict.passed else "FAIL").rjust(6),
            ]
        )

    def print(self) -> None:
        """Print the checked metrics to screen/stdout."""
        print(self)

    def write_csv(self, stream: TextIO) -> None:
        """
        Write the table in csv form to an open text stream.

        Parameters
        ----------
        stream : TextIO
            destination, e.g. ``sys.stdout``
        """
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.records:
            writer.writerows(rec.rows())

    def write_jsonl(self, stream: TextIO) -> None:
        """
        Write the records as line-delimited JSON to an open text stream.

        Parameters
        ----------
        stream : TextIO
            destination, e.g. ``sys.stdout``
        """
        for rec in self.records:
            stream.write(json.dumps(rec.to_dict()) + "\n")

    def to_csv(self, csvfile: Union[str, Path]) -> None:
        """
        Save the table as a csv file with the fixed column order.

        Parameters
        ----------
        csvfile : str or Path
            csv filepath to save to
        """
        with Path(csvfile).open("w", encoding="utf-8", newline="") as table_file:
            self.write_csv(table_file)

    def to_jsonl(self, jsonfile: Union[str, Path]) -> None:
        """
        Save the records as line-delimited JSON.

        Parameters
        ----------
        jsonfile : str or Path
            filepath to save to, one record per line
        """
        with Path(jsonfile).open("w", encoding="utf-8") as record_file:
            self.write_jsonl(record_file)


def result_paths(path: Union[str, Path]) -> tuple[Path, Path]:
    """
    Get the record-stream and table paths belonging to an output path.

    Parameters
    ----------
    path : str or Path
        output path, with or without a ``.jsonl`` or ``.csv`` suffix

    Returns
    -------
    tuple of Path
        the ``.jsonl`` and ``.csv`` paths

    Examples
    --------
    >>> [str(p) for p in result_paths("out/run.csv")]
    ['out/run.jsonl', 'out/run.csv']
    """
    path = Path(path)
    if path.suffix in {".jsonl", ".csv"}:
        path = path.with_suffix("")
    return path.with_suffix(".jsonl"), path.with_suffix(".csv")


def emit_results(
    records: Union[list[ResultRecord], ResultTable], path: Union[str, Path]
) -> tuple[Path, Path]:
    """
    Write experiment records as both line-delimited JSON and a CSV table.

    Parameters
    ----------
    records : list of ResultRecord or ResultTable
        the results
    path : str or Path
        output path, see ``result_paths``

    Returns
    -------
    tuple of Path
        the ``.jsonl`` and ``.csv`` files written
    """
    table = records if isinstance(records, ResultTable) else ResultTable(records)
    jsonl_path, csv_path = result_paths(path)
    jsonl_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_jsonl(jsonl_path)
    table.to_csv(csv_path)
    return jsonl_path, csv_path
