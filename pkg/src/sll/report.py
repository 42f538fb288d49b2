"""Experiment reports and their CSV / JSON serialization.

Every row carries an ``error`` and a ``tolerance``; its pass flag is
``error <= tolerance``, so it can be recomputed from the row alone.
Informational rows use ``error = 0`` and ``tolerance = inf``.
"""
from dataclasses import dataclass, field
import csv
import datetime
import io
import json
import math
import os

import numpy as np

SCHEMA = "sll-report/1"
COLUMNS = ("experiment", "inputs", "computed", "reference", "error", "tolerance", "pass", "wall_time")


def fmt(x):
    """17-significant-digit text for floats (round-trips exactly)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_float(x):
    x = float(x)
    return x if math.isfinite(x) else fmt(x)


@dataclass
class ReportRow:
    experiment: str
    inputs: str
    computed: float
    reference: float
    error: float
    tolerance: float
    wall_time: float = 0.0

    @property
    def passed(self):
        return bool(self.error <= self.tolerance)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, experiment, inputs, computed, reference, error, tolerance, wall_time=0.0):
        err = float(error)
        if math.isnan(err):
            err = math.inf
        row = ReportRow(experiment, inputs, float(computed), float(reference), err, float(tolerance),
                        float(wall_time))
        self.rows.append(row)
        return row

    def check(self, experiment, inputs, computed, reference, tolerance, wall_time=0.0, relative=True):
        """Row comparing ``computed`` with ``reference`` (relative error unless ``relative=False``)."""
        diff = abs(computed - reference)
        err = diff / abs(reference) if relative and reference != 0 else diff
        return self.add(experiment, inputs, computed, reference, err, tolerance, wall_time)

    def info(self, experiment, inputs, computed, reference=math.nan, wall_time=0.0):
        return self.add(experiment, inputs, computed, reference, 0.0, math.inf, wall_time)

    def extend(self, other):
        self.rows.extend(other.rows)

    @property
    def verdict(self):
        return all(r.passed for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r.passed]

    # ------------------------------------------------------------ output

    def to_csv(self, timestamps=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([SCHEMA])
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([r.experiment, r.inputs, fmt(r.computed), fmt(r.reference), fmt(r.error),
                        fmt(r.tolerance), fmt(r.passed), fmt(r.wall_time) if timestamps else ""])
        return buf.getvalue()

    def to_json(self, timestamps=True):
        doc = {"schema": SCHEMA, "verdict": self.verdict, "meta": self.meta, "rows": []}
        if timestamps:
            doc["generated"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        for r in self.rows:
            doc["rows"].append({"experiment": r.experiment, "inputs": r.inputs,
                                "computed": _json_float(r.computed), "reference": _json_float(r.reference),
                                "error": _json_float(r.error), "tolerance": _json_float(r.tolerance),
                                "pass": r.passed, "wall_time": r.wall_time if timestamps else None})
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    def write(self, directory, kind="csv", timestamps=True):
        """Write ``report.csv`` or ``report.json`` into ``directory``; returns the path."""
        os.makedirs(directory, exist_ok=True)
        if kind == "json":
            path = os.path.join(directory, "report.json")
            text = self.to_json(timestamps)
        else:
            path = os.path.join(directory, "report.csv")
            text = self.to_csv(timestamps)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return path


def read_csv(path):
    """Parse a report written by :meth:`ExperimentReport.to_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != [SCHEMA]:
        raise ValueError(f"{path}: missing schema row {SCHEMA!r}")
    if tuple(rows[1]) != COLUMNS:
        raise ValueError(f"{path}: unexpected columns {rows[1]}")
    rep = ExperimentReport()
    for r in rows[2:]:
        wall = float(r[7]) if r[7] else 0.0
        rep.add(r[0], r[1], float(r[2]), float(r[3]), float(r[4]), float(r[5]), wall)
    return rep


def write_spectrum(path, values):
    """One eigenvalue per line."""
    with open(path, "w") as fh:
        for v in values:
            fh.write(fmt(v) + "\n")


def read_spectrum(path):
    with open(path) as fh:
        return [float(line) for line in fh if line.strip()]
