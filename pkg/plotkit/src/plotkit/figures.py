"""Figure specs, CSV grouping, rendering, and manifest generation.

The manifest is a pure projection of the input CSV: values are copied as the
exact strings found in the file, in file order, so regenerating it from an
identical CSV is byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


class MissingColumnError(ValueError):
    def __init__(self, column: str, path: str):
        super().__init__(f"column {column!r} not found in {path}")
        self.column = column


@dataclass
class FigureSpec:
    """Everything needed to turn result CSVs into one figure + manifest."""

    inputs: list
    x: str
    y: list
    out: str
    manifest: str
    group_by: list = field(default_factory=list)
    yerr: dict = field(default_factory=dict)
    x_scale: str = "linear"
    y_scale: str = "linear"
    title: str = ""
    x_label: str = ""
    y_label: str = ""


def load_spec(path: str) -> FigureSpec:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    inputs = raw.get("inputs") or [raw["input"]]
    y = raw["y"] if isinstance(raw["y"], list) else [raw["y"]]
    return FigureSpec(
        inputs=list(inputs), x=raw["x"], y=list(y), out=raw["out"],
        manifest=raw["manifest"], group_by=list(raw.get("group_by", [])),
        yerr=dict(raw.get("yerr", {})), x_scale=raw.get("x_scale", "linear"),
        y_scale=raw.get("y_scale", "linear"), title=raw.get("title", ""),
        x_label=raw.get("x_label", raw["x"]),
        y_label=raw.get("y_label", ", ".join(y)))


def _read_rows(path: str, needed: list) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in needed:
            if col not in header:
                raise MissingColumnError(col, path)
        return list(reader)


@dataclass
class Series:
    key: str
    x_raw: list
    y_raw: list
    err_raw: list  # empty strings when the column has no error mapping
    y_column: str


def build_series(spec: FigureSpec) -> list[Series]:
    """One series per (group x y-column), rows kept in file order."""
    needed = [spec.x] + spec.y + spec.group_by + list(spec.yerr.values())
    rows = []
    for path in spec.inputs:
        rows.extend(_read_rows(path, needed))

    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = tuple(row[c] for c in spec.group_by)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)

    series = []
    for key in order:
        label = " ".join(f"{c}={v}" for c, v in zip(spec.group_by, key))
        for ycol in spec.y:
            errcol = spec.yerr.get(ycol)
            members = groups[key]
            series.append(Series(
                key=(label + " " if label else "") + f"y={ycol}",
                x_raw=[r[spec.x] for r in members],
                y_raw=[r[ycol] for r in members],
                err_raw=[r[errcol] if errcol else "" for r in members],
                y_column=ycol))
    return series


def write_manifest(path: str, spec: FigureSpec, series: list[Series]):
    """Plain-text (x, y[, yerr]) listing; raw CSV strings, file order."""
    lines = [f"x={spec.x} y_scale={spec.y_scale} x_scale={spec.x_scale}"]
    for s in series:
        lines.append(f"series: {s.key} points={len(s.x_raw)}")
        for x, y, e in zip(s.x_raw, s.y_raw, s.err_raw):
            lines.append(f"  {x} {y} {e}".rstrip())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _to_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        return math.nan


def render(spec: FigureSpec) -> list[Series]:
    """Render the figure and sidecar manifest; returns the plotted series."""
    series = build_series(spec)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for s in series:
        xs = [_to_float(v) for v in s.x_raw]
        ys = [_to_float(v) for v in s.y_raw]
        keep = [i for i in range(len(xs))
                if math.isfinite(xs[i]) and math.isfinite(ys[i])]
        xs = [xs[i] for i in keep]
        ys = [ys[i] for i in keep]
        if s.y_column in spec.yerr:
            errs = [_to_float(s.err_raw[i]) for i in keep]
            errs = [e if math.isfinite(e) else 0.0 for e in errs]
            ax.errorbar(xs, ys, yerr=errs, marker="o", linestyle="none",
                        capsize=3, label=s.key)
        else:
            ax.plot(xs, ys, linestyle="-", label=s.key)
    ax.set_xscale(spec.x_scale)
    ax.set_yscale(spec.y_scale)
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)

    write_manifest(spec.manifest, spec, series)
    return series
