"""Dataset, model, report and plot I/O."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .core import StepFunction, SurvivalDataset, TimeGrid
from .cox import CoxModel
from .errors import EmptyAfterFiltering, GridMismatch, IoError, MalformedReport, SchemaMismatch
from .rsf import RandomSurvivalForest

FORMAT_VERSION = 1
DEFAULT_TRUTHY = frozenset({"1", "true", "dead", "yes"})
MISSING_TOKENS = frozenset({"", "na", "nan", "null"})
BUILTIN_DATASETS = ("veteran", "lung", "pbc")


# --------------------------------------------------------------------------
# atomic text I/O


def _write_atomic(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def write_json(path, payload: dict) -> None:
    # float repr is the shortest string that round-trips bit-exactly
    _write_atomic(path, json.dumps(payload, indent=1, allow_nan=False) + "\n")


def read_json(path) -> dict:
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedReport(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise MalformedReport(f"{path}: top level must be an object")
    return data


# --------------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    kind: str = "numeric"

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ValueError(f"unknown column kind {self.kind!r}")


@dataclass(frozen=True)
class DatasetSchema:
    feature_columns: tuple
    time_column: str = "time"
    event_column: str = "event"
    event_truthy: frozenset = DEFAULT_TRUTHY
    missing: str = "drop"  # or "impute": numeric mean, categorical mode

    def __post_init__(self):
        cols = tuple(c if isinstance(c, FeatureColumn) else FeatureColumn(**c)
                     for c in self.feature_columns)
        object.__setattr__(self, "feature_columns", cols)
        object.__setattr__(self, "event_truthy",
                           frozenset(str(v).strip().lower() for v in self.event_truthy))
        if not cols:
            raise ValueError("schema needs at least one feature column")
        names = [c.name for c in cols] + [self.time_column, self.event_column]
        if len(set(names)) != len(names):
            raise ValueError("schema column names must be distinct")
        if self.missing not in ("drop", "impute"):
            raise ValueError("missing must be 'drop' or 'impute'")

    @property
    def used_columns(self) -> list:
        return [c.name for c in self.feature_columns] + [self.time_column, self.event_column]

    def to_dict(self) -> dict:
        return {
            "feature_columns": [{"name": c.name, "kind": c.kind} for c in self.feature_columns],
            "time_column": self.time_column,
            "event_column": self.event_column,
            "event_truthy": sorted(self.event_truthy),
            "missing": self.missing,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSchema":
        data = dict(data)
        if "event_truthy" in data:
            data["event_truthy"] = frozenset(data["event_truthy"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise SchemaMismatch(f"bad schema document: {exc}") from exc


@dataclass
class LoadReport:
    rows_read: int = 0
    rows_kept: int = 0
    dropped: dict = field(default_factory=dict)  # reason -> count
    imputed: dict = field(default_factory=dict)  # column -> cells filled
    feature_names: tuple = ()

    @property
    def rows_dropped(self) -> int:
        return sum(self.dropped.values())

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_kept": self.rows_kept,
            "rows_dropped": self.rows_dropped,
            "dropped": dict(self.dropped),
            "imputed": dict(self.imputed),
            "feature_names": list(self.feature_names),
        }


def _parse_float(token: str):
    if token.strip().lower() in MISSING_TOKENS:
        return None
    try:
        value = float(token)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _level(token: str):
    t = token.strip()
    if t.lower() in MISSING_TOKENS:
        return None
    value = _parse_float(t)
    if value is not None and value.is_integer():
        return str(int(value))  # "2.0" and "2" are one level
    return t


def load_csv_report(path, schema: DatasetSchema):
    """Parse ``path`` under ``schema``; returns ``(dataset, LoadReport)``."""
    rows = list(csv.reader(io.StringIO(_read_text(path))))
    if not rows:
        raise SchemaMismatch(f"{path}: empty file, header required")
    header = [h.strip() for h in rows[0]]
    missing_cols = [c for c in schema.used_columns if c not in header]
    if missing_cols:
        raise SchemaMismatch(f"{path}: missing columns {missing_cols}")
    pos = {name: header.index(name) for name in schema.used_columns}
    report = LoadReport()

    parsed = []  # (features as float|str|None, time, event)
    for raw in rows[1:]:
        if not raw or all(not cell.strip() for cell in raw):
            continue
        report.rows_read += 1
        if len(raw) != len(header):
            report.dropped["ragged"] = report.dropped.get("ragged", 0) + 1
            continue
        t = _parse_float(raw[pos[schema.time_column]])
        ev_token = raw[pos[schema.event_column]].strip()
        if t is None or t < 0 or ev_token.lower() in MISSING_TOKENS:
            report.dropped["time_or_event"] = report.dropped.get("time_or_event", 0) + 1
            continue
        cells = [
            _parse_float(raw[pos[c.name]]) if c.kind == "numeric" else _level(raw[pos[c.name]])
            for c in schema.feature_columns
        ]
        if schema.missing == "drop" and any(v is None for v in cells):
            report.dropped["missing_feature"] = report.dropped.get("missing_feature", 0) + 1
            continue
        parsed.append((cells, t, 1 if ev_token.lower() in schema.event_truthy else 0))
    if not parsed:
        raise EmptyAfterFiltering(f"{path}: no usable rows")

    columns, names = [], []
    for j, col in enumerate(schema.feature_columns):
        values = [p[0][j] for p in parsed]
        present = [v for v in values if v is not None]
        if not present:
            raise EmptyAfterFiltering(f"{path}: column {col.name!r} has no values")
        n_missing = len(values) - len(present)
        if col.kind == "numeric":
            fill = math.fsum(present) / len(present)
        else:
            counts = {}
            for v in present:
                counts[v] = counts.get(v, 0) + 1
            fill = max(counts, key=lambda k: counts[k])  # first-seen wins ties
        if n_missing:
            report.imputed[col.name] = n_missing
            values = [fill if v is None else v for v in values]
        if col.kind == "numeric":
            columns.append(np.asarray(values, dtype=float)[:, None])
            names.append(col.name)
        else:
            levels = list(dict.fromkeys(values))
            codes = np.asarray([levels.index(v) for v in values])
            columns.append((codes[:, None] == np.arange(len(levels))[None, :]).astype(float))
            names.extend(f"{col.name}={lvl}" for lvl in levels)

    report.rows_kept = len(parsed)
    report.feature_names = tuple(names)
    dataset = SurvivalDataset(
        np.hstack(columns),
        np.asarray([p[1] for p in parsed]),
        np.asarray([p[2] for p in parsed]),
        tuple(names),
    )
    return dataset, report


def load_csv(path, schema: DatasetSchema) -> SurvivalDataset:
    return load_csv_report(path, schema)[0]


def builtin_schema(name: str) -> DatasetSchema:
    if name not in BUILTIN_DATASETS:
        raise ValueError(f"unknown dataset {name!r}; choose from {BUILTIN_DATASETS}")
    text = resources.files("infsurv").joinpath(f"datasets/{name}.json").read_text("utf-8")
    return DatasetSchema.from_dict(json.loads(text))


def builtin_path(name: str) -> str:
    if name not in BUILTIN_DATASETS:
        raise ValueError(f"unknown dataset {name!r}; choose from {BUILTIN_DATASETS}")
    return str(resources.files("infsurv").joinpath(f"datasets/{name}.csv"))


def load_builtin(name: str):
    """Bundled real dataset by name; returns ``(dataset, LoadReport)``."""
    return load_csv_report(builtin_path(name), builtin_schema(name))


# --------------------------------------------------------------------------
# canonical dataset CSV: features..., time, event


def _num(x: float) -> str:
    return format(float(x), ".17g")


def dataset_to_csv(dataset: SurvivalDataset) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(dataset.feature_names) + ["time", "event"])
    for x, t, e in zip(dataset.features, dataset.times, dataset.events):
        writer.writerow([_num(v) for v in x] + [_num(t), str(int(e))])
    return out.getvalue()


def write_dataset_csv(dataset: SurvivalDataset, path) -> None:
    if {"time", "event"} & set(dataset.feature_names):
        raise SchemaMismatch("feature names 'time' and 'event' are reserved")
    _write_atomic(path, dataset_to_csv(dataset))


def read_dataset_csv(path) -> SurvivalDataset:
    """Read the canonical format; every feature column is numeric."""
    text = _read_text(path)
    header = next(csv.reader(io.StringIO(text)), None)
    if not header or header[-2:] != ["time", "event"] or len(header) < 3:
        raise SchemaMismatch(f"{path}: header must be features..., time, event")
    schema = DatasetSchema(tuple(FeatureColumn(h) for h in header[:-2]), "time", "event",
                           frozenset({"1"}))
    dataset, report = load_csv_report(path, schema)
    if report.rows_dropped:
        raise SchemaMismatch(f"{path}: {report.rows_dropped} malformed rows")
    return dataset


# --------------------------------------------------------------------------
# models


def model_to_dict(model, metadata: dict = None) -> dict:
    if isinstance(model, CoxModel):
        doc = {
            "format_version": FORMAT_VERSION,
            "model_type": "cox",
            "coefficients": model.coefficients.tolist(),
            "grid_knots": model.grid.knots.tolist(),
            "horizon": model.grid.horizon,
            "baseline_values": model.baseline_chf.values.tolist(),
            "feature_names": list(model.feature_names),
        }
    elif isinstance(model, RandomSurvivalForest):
        doc = {"format_version": FORMAT_VERSION, "model_type": "rsf", **model.to_dict()}
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    if metadata:
        doc["metadata"] = metadata
    return doc


def model_from_dict(doc: dict):
    try:
        if doc.get("format_version") != FORMAT_VERSION:
            raise MalformedReport(f"unsupported model format {doc.get('format_version')!r}")
        if doc["model_type"] == "cox":
            grid = TimeGrid(np.asarray(doc["grid_knots"], dtype=float), doc["horizon"])
            return CoxModel(
                np.asarray(doc["coefficients"], dtype=float),
                StepFunction(grid, np.asarray(doc["baseline_values"], dtype=float)),
                tuple(doc.get("feature_names", ())),
            )
        if doc["model_type"] == "rsf":
            return RandomSurvivalForest.from_dict(doc)
        raise MalformedReport(f"unknown model_type {doc['model_type']!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedReport):
            raise
        raise MalformedReport(f"invalid model document: {exc}") from exc


def save_model(model, path, metadata: dict = None) -> None:
    write_json(path, model_to_dict(model, metadata))


def load_model(path):
    """Returns ``(model, metadata)``."""
    doc = read_json(path)
    return model_from_dict(doc), doc.get("metadata", {})


# --------------------------------------------------------------------------
# explanation reports

REPORT_KEYS = (
    "x", "b_expl", "objective", "residual_stats", "method", "config", "grid",
    "blackbox_chf_values", "surrogate_chf_values",
)


def report_from_result(result, extra: dict = None) -> dict:
    grid = result.surrogate_chf.grid
    report = {
        "format_version": FORMAT_VERSION,
        "x": result.x.tolist(),
        "b_expl": result.coefficients.tolist(),
        "objective": float(result.objective_value),
        "residual_stats": result.residual_stats(),
        "method": result.method,
        "config": result.config.to_dict(),
        "grid": {"knots": grid.knots.tolist(), "horizon": grid.horizon},
        "blackbox_chf_values": result.blackbox_chf.values.tolist(),
        "surrogate_chf_values": result.surrogate_chf.values.tolist(),
        "degenerate": bool(result.degenerate),
    }
    if extra:
        report.update(extra)
    return report


def validate_report(report: dict) -> dict:
    missing = [k for k in REPORT_KEYS if k not in report]
    if missing:
        raise MalformedReport(f"report lacks {missing}")
    if report["method"] not in ("inf", "l2"):
        raise MalformedReport(f"unknown method {report['method']!r}")
    size = len(report["grid"].get("knots", ())) if isinstance(report["grid"], dict) else -1
    for key in ("blackbox_chf_values", "surrogate_chf_values"):
        if not isinstance(report[key], list) or len(report[key]) != size:
            raise MalformedReport(f"{key} does not match the grid")
    if len(report["b_expl"]) != len(report["x"]):
        raise MalformedReport("b_expl and x differ in length")
    return report


def write_report(path, report: dict) -> None:
    write_json(path, validate_report(report))


def read_report(path) -> dict:
    return validate_report(read_json(path))


def report_curves(report: dict):
    """Black-box and surrogate CHFs of a report as StepFunctions."""
    grid = TimeGrid(np.asarray(report["grid"]["knots"], dtype=float), report["grid"]["horizon"])
    return (StepFunction(grid, report["blackbox_chf_values"]),
            StepFunction(grid, report["surrogate_chf_values"]))


# --------------------------------------------------------------------------
# SVG step plots

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_W, _H = 640, 400
_ML, _MR, _MT, _MB = 60, 20, 30, 45


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _label(v: float) -> str:
    return format(v, ".4g")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_step_svg(curves, title: str = "", y_label: str = "") -> str:
    """SVG document for right-continuous step curves on one grid."""
    curves = list(curves)
    if not curves:
        raise ValueError("at least one curve is required")
    grid = curves[0][1].grid
    for _, fn in curves[1:]:
        if not fn.grid.same_as(grid):
            raise GridMismatch("curves must share a grid")
    x0 = float(grid.knots[0])
    x1 = float(grid.horizon)
    if x1 <= x0:  # give the last step visible width
        x1 = x0 + max(1.0, 0.05 * abs(x0))
    values = np.concatenate([fn.values for _, fn in curves])
    y0, y1 = float(min(values.min(), 0.0)), float(values.max())
    if y1 <= y0:
        y1 = y0 + 1.0
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(t):
        return _ML + (t - x0) / (x1 - x0) * pw

    def sy(v):
        return _MT + (y1 - v) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<g class="axes" stroke="black" stroke-width="1">'
        f'<line x1="{_ML}" y1="{_MT + ph}" x2="{_ML + pw}" y2="{_MT + ph}"/>'
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + ph}"/></g>',
    ]
    ticks = ['<g class="ticks" font-family="sans-serif" font-size="10">']
    for t in _ticks(x0, x1):
        x = _fmt(sx(t))
        ticks.append(f'<line x1="{x}" y1="{_MT + ph}" x2="{x}" y2="{_MT + ph + 4}" stroke="black"/>'
                     f'<text x="{x}" y="{_MT + ph + 16}" text-anchor="middle">{_label(t)}</text>')
    for v in _ticks(y0, y1):
        y = _fmt(sy(v))
        ticks.append(f'<line x1="{_ML - 4}" y1="{y}" x2="{_ML}" y2="{y}" stroke="black"/>'
                     f'<text x="{_ML - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">'
                     f'{_label(v)}</text>')
    ticks.append("</g>")
    out.extend(ticks)
    out.append(f'<text x="{_ML + pw / 2}" y="{_H - 8}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">time</text>')
    if y_label:
        out.append(f'<text x="14" y="{_MT + ph / 2}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12" transform="rotate(-90 14 {_MT + ph / 2})">{_esc(y_label)}</text>')
    if title:
        out.append(f'<text x="{_W / 2}" y="18" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="13">{_esc(title)}</text>')

    ends = np.append(grid.knots[1:], x1)
    for i, (label, fn) in enumerate(curves):
        v = fn.values
        parts = [f"M{_fmt(sx(grid.knots[0]))} {_fmt(sy(v[0]))}", f"H{_fmt(sx(ends[0]))}"]
        for j in range(1, v.shape[0]):
            if v[j] != v[j - 1]:
                parts.append(f"V{_fmt(sy(v[j]))}")
            parts.append(f"H{_fmt(sx(ends[j]))}")
        # merge consecutive horizontal moves so a constant curve is one segment
        merged = []
        for p in parts:
            if merged and p[0] == "H" and merged[-1][0] == "H":
                merged[-1] = p
            else:
                merged.append(p)
        color = _COLORS[i % len(_COLORS)]
        out.append(f'<path class="curve" d="{" ".join(merged)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
    legend = ['<g class="legend" font-family="sans-serif" font-size="11">']
    for i, (label, _) in enumerate(curves):
        y = _MT + 10 + 16 * i
        color = _COLORS[i % len(_COLORS)]
        legend.append(f'<line x1="{_ML + pw - 150}" y1="{y}" x2="{_ML + pw - 130}" y2="{y}" '
                      f'stroke="{color}" stroke-width="2"/>'
                      f'<text class="legend-entry" x="{_ML + pw - 125}" y="{y + 4}">{_esc(label)}</text>')
    legend.append("</g>")
    out.extend(legend)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_step_svg(curves, path, title: str = "", y_label: str = "") -> None:
    _write_atomic(path, render_step_svg(curves, title, y_label))
