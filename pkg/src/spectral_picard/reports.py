"""Run reports: schema-versioned JSON documents and CSV series export."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

REPORT_SCHEMA = "run-report/1"

#: CSV selectors and the report series they read.
SERIES = {
    "residuals": "residual",
    "update_norms": "update_norm",
    "condition_margins": "condition_margin",
}


@dataclass
class Check:
    name: str
    passed: bool
    margin: float
    numbers: dict = field(default_factory=dict)


@dataclass
class RunReport:
    command: str
    input_digest: str = ""
    checks: list[Check] = field(default_factory=list)
    series: dict[str, list[float]] = field(default_factory=dict)
    results: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    wall_clock_s: float = 0.0
    exit_code: int = 0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["schema"] = REPORT_SCHEMA
        return _encode(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        doc = _decode(dict(doc))
        if doc.pop("schema", None) != REPORT_SCHEMA:
            raise ValueError("unsupported report schema")
        doc["checks"] = [Check(**c) for c in doc.get("checks", [])]
        return cls(**doc)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    @classmethod
    def loads(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _encode(x):
    """Replace non-finite floats by the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    if hasattr(x, "item") and not isinstance(x, (list, dict)):
        x = x.item()  # numpy scalar
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _encode(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_encode(v) for v in x]
    return x


def _decode(x):
    if isinstance(x, str) and x in _NONFINITE:
        return _NONFINITE[x]
    if isinstance(x, dict):
        return {k: _decode(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_decode(v) for v in x]
    return x


def digest(*texts: str) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode())
        h.update(b"\0")
    return h.hexdigest()


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return "%.17g" % x


def emit_csv_series(report: RunReport, selector: str) -> str:
    """CSV with header ``iteration,<series>`` and one row per recorded iteration."""
    if selector not in SERIES:
        raise KeyError(f"unknown series {selector!r}; choose from {sorted(SERIES)}")
    values = report.series.get(SERIES[selector], [])
    iterations = report.series.get("iteration", list(range(len(values))))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", SERIES[selector]])
    for i, v in zip(iterations, values):
        w.writerow([int(i), format_float(float(v))])
    return buf.getvalue()


def parse_csv_series(text: str) -> tuple[list[int], list[float]]:
    rows = list(csv.reader(io.StringIO(text)))
    body = rows[1:]
    return [int(r[0]) for r in body], [float(r[1]) for r in body]
