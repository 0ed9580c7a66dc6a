"""Run reports and their byte-stable serialisation.

JSON layout (schema ``ramanmem.run-report/1``), keys in this order:

    schema, subcommand, calibration, efficiency, sweep, fringe,
    time_bandwidth, results, tables, config

``sweep`` is a list of row objects with the six CSV columns plus
``transmission``; ``tables`` maps a table name to ``{"header": [...],
"rows": [[...], ...]}``. Every float is written with 12 significant digits,
non-finite values and missing cells as ``null``.

CSV output is the report's main table (``tables["main"]``; for sweep and
optimize runs the six-column sweep schema). Other tables go to sibling files
named ``<stem>_<table>.csv``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, RamanMemError
from .experiment import FringeFit
from .optimizer import SWEEP_HEADER, SweepTable
from .raman import EfficiencyReport

SCHEMA = "ramanmem.run-report/1"
FORMATS = ("json", "csv")


class EmitError(RamanMemError):
    exit_code = 1


def canonical(x):
    """Round floats to 12 significant digits, recursively; arrays become lists."""
    if isinstance(x, dict):
        return {str(k): canonical(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [canonical(v) for v in x]
    if isinstance(x, np.ndarray):
        return [canonical(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.12g}")
    if x is None or isinstance(x, str):
        return x
    raise InvalidParameterError(f"cannot serialise {type(x).__name__}")


def cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "" if not math.isfinite(x) else f"{float(x):.12g}"
    return str(x)


def table(header, rows) -> dict:
    return {"header": list(header), "rows": [list(r) for r in rows]}


@dataclass(frozen=True, eq=False)
class RunReport:
    subcommand: str
    config: dict
    calibration: Optional[dict] = None
    efficiency: Optional[EfficiencyReport] = None
    sweep: Optional[SweepTable] = None
    fringe: Optional[FringeFit] = None
    time_bandwidth: Optional[dict] = None
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    schema: str = SCHEMA

    def to_dict(self) -> dict:
        return canonical({
            "schema": self.schema,
            "subcommand": self.subcommand,
            "calibration": self.calibration,
            "efficiency": None if self.efficiency is None else self.efficiency.as_dict(),
            "sweep": None if self.sweep is None else self.sweep.to_records(),
            "fringe": None if self.fringe is None else self.fringe.__dict__,
            "time_bandwidth": self.time_bandwidth,
            "results": self.results,
            "tables": self.tables,
            "config": self.config,
        })

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        if d.get("schema") != SCHEMA:
            raise InvalidParameterError(f"unsupported report schema {d.get('schema')!r}")
        eff = d.get("efficiency")
        sw = d.get("sweep")
        fr = d.get("fringe")
        return cls(
            subcommand=d["subcommand"],
            config=d["config"],
            calibration=d.get("calibration"),
            efficiency=None if eff is None else EfficiencyReport(**eff),
            sweep=None if sw is None else SweepTable.from_records(sw),
            fringe=None if fr is None else FringeFit(**fr),
            time_bandwidth=d.get("time_bandwidth"),
            results=d.get("results") or {},
            tables=d.get("tables") or {},
        )

    def __eq__(self, other):
        if not isinstance(other, RunReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def main_table(self) -> dict:
        if self.sweep is not None:
            return table(SWEEP_HEADER, [[getattr(r, k) for k in SWEEP_HEADER] for r in self.sweep.rows])
        if "main" in self.tables:
            return self.tables["main"]
        raise InvalidParameterError(f"a {self.subcommand} report has no tabular output")


def to_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"


def to_csv(tab: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(tab["header"])
    for row in tab["rows"]:
        w.writerow([cell(x) for x in row])
    return buf.getvalue()


def emit(report: RunReport, fmt: str, path) -> list[Path]:
    """Write ``report`` to ``path``; returns every file written."""
    if fmt not in FORMATS:
        raise InvalidParameterError(f"unsupported format {fmt!r}; expected one of {FORMATS}")
    path = Path(path)
    try:
        if fmt == "json":
            path.write_text(to_json(report))
            return [path]
        written = [path]
        path.write_text(to_csv(report.main_table()))
        for name in sorted(report.tables):
            if name == "main":
                continue
            extra = path.with_name(f"{path.stem}_{name}.csv")
            extra.write_text(to_csv(report.tables[name]))
            written.append(extra)
        return written
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from exc


def load(path) -> RunReport:
    return RunReport.from_dict(json.loads(Path(path).read_text()))
