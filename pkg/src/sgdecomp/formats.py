"""Reading profiles and writing reports, peak tables and component curves."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .fitting import FitReport
from .metrics import MetricsReport
from .model import DEFAULT_UNIT, DecompositionModel, PeakComponent, TimeGrid, eval_peak
from .peaks import HOURS_PER_DAY, DemandProfile

SCHEMA_VERSION = 1
DEFAULT_PRECISION = 6

_UNIT_HEADER = re.compile(r"^\s*flow\s*(?:\[(?P<unit>[^\]]*)\])?\s*$", re.IGNORECASE)


class ProfileParseError(ValueError):
    """Malformed profile CSV; the message names the offending line."""


# ---------------------------------------------------------------- numbers

def round_sig(value, precision: Optional[int] = DEFAULT_PRECISION):
    """Round to ``precision`` significant digits; ``None`` keeps full precision."""
    if value is None or precision is None:
        return value
    value = float(value)
    if not math.isfinite(value) or value == 0:
        return value
    return float(f"{value:.{precision}g}")


def format_number(value, precision: Optional[int] = DEFAULT_PRECISION) -> str:
    if value is None:
        return ""
    value = float(value)
    if precision is None:
        return repr(value)
    return f"{value:.{precision}g}"


# ---------------------------------------------------------------- profiles

def _parse_float(text: str, lineno: int, name: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ProfileParseError(f"line {lineno}: {name} {text.strip()!r} is not a number") from None
    if not math.isfinite(value):
        raise ProfileParseError(f"line {lineno}: {name} {text.strip()!r} is not finite")
    return value


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_profile_csv(
    text: Union[bytes, str],
    unit: Optional[str] = None,
    label: str = "",
) -> DemandProfile:
    """Parse one day of hourly flows.

    Accepted layouts:

    * ``hour,flow`` pairs (header optional), hours 0..23 in any order;
    * a single headerless column of 24 flows in hour order.

    A header cell like ``flow[gal/h]`` sets the unit unless ``unit`` is
    given explicitly. Blank lines and lines starting with ``#`` are skipped.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ProfileParseError(f"input is not valid UTF-8: {exc}") from None

    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells) or cells[0].startswith("#"):
            continue
        rows.append((lineno, cells))
    if not rows:
        raise ProfileParseError(f"expected {HOURS_PER_DAY} hours, found 0")

    header_unit = None
    first_line, first = rows[0]
    if not _looks_numeric(first[0]):
        if len(first) != 2 or first[0].lower() != "hour":
            raise ProfileParseError(
                f"line {first_line}: expected header 'hour,flow', got {','.join(first)!r}"
            )
        match = _UNIT_HEADER.match(first[1])
        if match is None:
            raise ProfileParseError(
                f"line {first_line}: expected second column 'flow' or 'flow[unit]', got {first[1]!r}"
            )
        header_unit = match.group("unit")
        rows = rows[1:]
        two_column = True
    else:
        two_column = len(first) == 2

    width = 2 if two_column else 1
    for lineno, cells in rows:
        if len(cells) != width:
            raise ProfileParseError(f"line {lineno}: expected {width} field(s), found {len(cells)}")
    if len(rows) != HOURS_PER_DAY:
        raise ProfileParseError(f"expected {HOURS_PER_DAY} hours, found {len(rows)}")

    values = np.empty(HOURS_PER_DAY)
    if two_column:
        seen: dict[int, int] = {}
        for lineno, (hour_text, flow_text) in rows:
            hour = _parse_float(hour_text, lineno, "hour")
            if hour != int(hour) or not 0 <= hour < HOURS_PER_DAY:
                raise ProfileParseError(f"line {lineno}: hour {hour_text!r} is not an integer in 0..23")
            hour = int(hour)
            if hour in seen:
                raise ProfileParseError(
                    f"line {lineno}: duplicate hour {hour} (first seen on line {seen[hour]})"
                )
            seen[hour] = lineno
            values[hour] = _parse_float(flow_text, lineno, "flow")
            if values[hour] < 0:
                raise ProfileParseError(f"line {lineno}: flow {flow_text!r} is negative")
    else:
        for i, (lineno, (flow_text,)) in enumerate(rows):
            values[i] = _parse_float(flow_text, lineno, "flow")
            if values[i] < 0:
                raise ProfileParseError(f"line {lineno}: flow {flow_text!r} is negative")

    return DemandProfile(values, unit or header_unit or DEFAULT_UNIT, label)


def format_profile_csv(profile: DemandProfile, precision: Optional[int] = None) -> str:
    out = io.StringIO()
    out.write(f"hour,flow[{profile.unit}]\n")
    for hour, value in enumerate(profile.values):
        out.write(f"{hour},{format_number(value, precision)}\n")
    return out.getvalue()


# ---------------------------------------------------------------- reports

def _model_dict(model: DecompositionModel) -> dict:
    return {
        "n_peaks": model.n_peaks,
        "C_base": model.baseline,
        "peaks": [
            {"A": p.amplitude, "mu": p.location, "sigma": p.width, "alpha": p.skewness}
            for p in model.peaks
        ],
    }


def _model_from_dict(data: dict, unit: str) -> DecompositionModel:
    peaks = [PeakComponent(p["A"], p["mu"], p["sigma"], p["alpha"]) for p in data["peaks"]]
    if len(peaks) != data["n_peaks"]:
        raise ValueError(f"n_peaks is {data['n_peaks']} but {len(peaks)} peaks are listed")
    return DecompositionModel(data["C_base"], tuple(peaks), unit)


def _diagnostics(report: FitReport) -> dict:
    return {
        "loss": report.loss,
        "converged": report.converged,
        "iterations": report.iterations,
        "starts_tried": report.starts_tried,
        "best_start": None if report.best_start is None else list(report.best_start),
        "symmetric": report.symmetric,
    }


@dataclass
class FitSection:
    model: DecompositionModel
    metrics: MetricsReport
    diagnostics: dict

    @classmethod
    def from_report(cls, report: FitReport) -> "FitSection":
        return cls(report.model, report.metrics, _diagnostics(report))

    def to_dict(self) -> dict:
        return {
            "model": _model_dict(self.model),
            "metrics": self.metrics.as_dict(),
            "diagnostics": dict(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, data: dict, unit: str) -> "FitSection":
        return cls(
            _model_from_dict(data["model"], unit),
            MetricsReport(**data["metrics"]),
            dict(data["diagnostics"]),
        )


def comparison_summary(skewed: MetricsReport, symmetric: MetricsReport,
                       skewed_loss: float, symmetric_loss: float) -> dict:
    """Side-by-side metric deltas (symmetric minus skewed) and the RMSE ratio."""
    deltas = {}
    for name, value in skewed.as_dict().items():
        other = getattr(symmetric, name)
        deltas[name] = None if value is None or other is None else other - value
    ratio = None if skewed.rmse == 0 else symmetric.rmse / skewed.rmse
    return {
        "rmse_ratio": ratio,
        "delta": deltas,
        "skewed_loss": skewed_loss,
        "symmetric_loss": symmetric_loss,
        "warm_start_holds": skewed_loss <= symmetric_loss,
    }


@dataclass
class ReportDocument:
    """Serializable fit result, optionally paired with the symmetric ablation."""

    label: str
    unit: str
    fit: FitSection
    symmetric: Optional[FitSection] = None
    comparison: Optional[dict] = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_reports(cls, report: FitReport, symmetric: Optional[FitReport] = None) -> "ReportDocument":
        comparison = None
        if symmetric is not None:
            comparison = comparison_summary(report.metrics, symmetric.metrics, report.loss, symmetric.loss)
            comparison["symmetric_converged"] = symmetric.converged
        return cls(
            label=report.profile.label,
            unit=report.profile.unit,
            fit=FitSection.from_report(report),
            symmetric=None if symmetric is None else FitSection.from_report(symmetric),
            comparison=comparison,
        )

    def to_dict(self) -> dict:
        data = {
            "schema_version": self.schema_version,
            "label": self.label,
            "unit": self.unit,
            "fit": self.fit.to_dict(),
        }
        if self.symmetric is not None:
            data["symmetric"] = self.symmetric.to_dict()
        if self.comparison is not None:
            data["comparison"] = self.comparison
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ReportDocument":
        if "schema_version" not in data:
            raise ValueError("report is missing schema_version")
        if data["schema_version"] != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {data['schema_version']}")
        unit = data["unit"]
        return cls(
            label=data["label"],
            unit=unit,
            fit=FitSection.from_dict(data["fit"], unit),
            symmetric=FitSection.from_dict(data["symmetric"], unit) if "symmetric" in data else None,
            comparison=data.get("comparison"),
            schema_version=data["schema_version"],
        )


def _round_tree(obj, precision):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return round_sig(obj, precision)
    if isinstance(obj, dict):
        return {k: _round_tree(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v, precision) for v in obj]
    if isinstance(obj, np.generic):
        return _round_tree(obj.item(), precision)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_document(doc: ReportDocument, precision: Optional[int] = DEFAULT_PRECISION) -> bytes:
    data = _round_tree(doc.to_dict(), precision)
    return (json.dumps(data, indent=2, sort_keys=True) + "\n").encode("utf-8")


def parse_report(data: Union[bytes, str]) -> ReportDocument:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return ReportDocument.from_dict(json.loads(data))


def peak_table_csv(model: DecompositionModel, precision: Optional[int] = DEFAULT_PRECISION) -> str:
    out = io.StringIO()
    out.write("A,mu,sigma,alpha\n")
    for p in model.peaks:
        out.write(",".join(format_number(v, precision) for v in p.as_tuple()) + "\n")
    return out.getvalue()


def parse_peak_table_csv(text: Union[bytes, str], baseline: float = 0.0,
                         unit: str = DEFAULT_UNIT) -> DecompositionModel:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.DictReader(io.StringIO(text))
    peaks = [
        PeakComponent(float(r["A"]), float(r["mu"]), float(r["sigma"]), float(r["alpha"]))
        for r in reader
    ]
    return DecompositionModel(baseline, tuple(peaks), unit)


def emit_report(
    report: FitReport,
    format: str = "json",
    precision: Optional[int] = DEFAULT_PRECISION,
    symmetric: Optional[FitReport] = None,
) -> bytes:
    """Serialize a fit deterministically.

    ``json`` writes the full document with sorted keys; ``csv`` writes only
    the peak table. Numbers carry ``precision`` significant digits
    (``None`` for full precision).
    """
    if format == "json":
        return dump_document(ReportDocument.from_reports(report, symmetric), precision)
    if format == "csv":
        return peak_table_csv(report.model, precision).encode("utf-8")
    raise ValueError(f"unknown report format {format!r}; expected 'json' or 'csv'")


def emit_candidates(candidates) -> bytes:
    out = io.StringIO()
    out.write("hour,value,kind\n")
    for c in candidates:
        out.write(f"{c.hour_index},{format_number(c.value, None)},{c.kind.value}\n")
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------- curves

def curve_grid(step: float, end: float = HOURS_PER_DAY - 1) -> TimeGrid:
    if not (0 < step <= 1):
        raise ValueError(f"curve step must satisfy 0 < step <= 1, got {step}")
    count = int(math.floor(end / step + 1e-9)) + 1
    return TimeGrid(0.0, float(step), count)


def emit_component_curves(model: DecompositionModel, step: float = 1.0) -> bytes:
    """Per-component curves over the day: ``t, baseline, peak_1..peak_n, total``.

    Values are written at full precision so the ``total`` column equals the
    sum of the component columns.
    """
    grid = curve_grid(step)
    t = grid.points()
    columns = [np.full(t.shape, model.baseline)]
    columns += [np.asarray(eval_peak(p, t), dtype=float) for p in model.peaks]
    total = columns[0].copy()
    for col in columns[1:]:
        total = total + col

    out = io.StringIO()
    names = ["t", "baseline"] + [f"peak_{i + 1}" for i in range(model.n_peaks)] + ["total"]
    out.write(",".join(names) + "\n")
    for i, ti in enumerate(t):
        cells = [format_number(round(ti, 9), None)]
        cells += [repr(float(col[i])) for col in columns]
        cells.append(repr(float(total[i])))
        out.write(",".join(cells) + "\n")
    return out.getvalue().encode("utf-8")


__all__ = [
    "DEFAULT_PRECISION",
    "FitSection",
    "ProfileParseError",
    "ReportDocument",
    "SCHEMA_VERSION",
    "comparison_summary",
    "curve_grid",
    "dump_document",
    "emit_candidates",
    "emit_component_curves",
    "emit_report",
    "format_profile_csv",
    "parse_peak_table_csv",
    "parse_profile_csv",
    "parse_report",
    "peak_table_csv",
    "round_sig",
]
