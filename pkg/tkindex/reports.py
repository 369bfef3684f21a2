"""Report documents: `<name>.report.json` and the table `<name>.table.csv`.

The layout is documented in docs/report-schema.md; bump SCHEMA_VERSION with it.
"""
import csv
import json
import logging
import math
import os
from fractions import Fraction
from pathlib import Path

import numpy as np

from tkindex.utils import format_rational


logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_DIGITS = 12


def encode(value):
    """JSON-ready copy: rationals as "p/q", floats rounded to FLOAT_DIGITS significant digits."""
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, np.ndarray):
        return [encode(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": encode(value.real), "im": encode(value.imag)}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return str(value)
        return float("{:.{}g}".format(value, FLOAT_DIGITS))
    if value is None or isinstance(value, str):
        return value
    return str(value)


class Report:
    """Outcome of one pipeline run.

    Attributes:
        subcommand (str)
        scenario (ScenarioConfig)
        results (dict): named values
        residuals (dict): named reals
        passes (dict): criterion -> bool, serialized as "pass"
        runtime_ms (int)
        table (list or None): one row for a single run, one per swept value for a sweep
        slopes (dict or None): fitted log-log slope per residual column of a sweep
    """

    def __init__(self, subcommand, scenario, results, residuals, passes, runtime_ms=0):
        self.subcommand = subcommand
        self.scenario = scenario
        self.results = results
        self.residuals = residuals
        self.passes = passes
        self.runtime_ms = int(runtime_ms)
        self.table = None
        self.slopes = None
        self.sweep = None

    @property
    def passed(self):
        return all(self.passes.values())

    def failures(self):
        return sorted(name for name, ok in self.passes.items() if not ok)

    def as_dict(self):
        document = {
            "schema_version": SCHEMA_VERSION,
            "subcommand": self.subcommand,
            "scenario": self.scenario.as_dict(),
            "results": self.results,
            "residuals": self.residuals,
            "pass": self.passes,
            "passed": self.passed,
            "runtime_ms": self.runtime_ms,
        }
        if self.sweep is not None:
            document["sweep"] = self.sweep
            document["slopes"] = self.slopes
        return encode(document)

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def __repr__(self):
        return "<Report {} {} passed={}>".format(self.subcommand, self.scenario.name, self.passed)


def output_directory(out=None):
    """--out, else $REPORT_DIR, else the working directory."""
    return Path(out or os.environ.get("REPORT_DIR") or ".")


def write_report(report, out=None):
    directory = output_directory(out)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "{}.report.json".format(report.scenario.name)
    path.write_text(report.to_json(), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_table(report, out=None):
    directory = output_directory(out)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "{}.table.csv".format(report.scenario.name)
    rows = [encode(row) for row in report.table or ()]
    fields = list(rows[0]) if rows else []
    for row in rows[1:]:
        fields.extend(key for key in row if key not in fields)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    logger.info("Wrote %s", path)
    return path
