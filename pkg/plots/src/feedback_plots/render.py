"""Render paper-style cCDF and trace figures from harness CSV files.

Figures are deterministic: a fixed style, no timestamps in the output
metadata, and a fixed SVG hash salt, so re-rendering the same inputs yields
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

DEFAULT_PALETTE = ("#2a6fb0", "#36913b", "#d62728", "#9467bd", "#8c564b",
                   "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#1b2a41")

AXIS_LABELS = {
    "nSE": ("normalized spectral efficiency, s", "P(nSE > s)"),
    "SumRate": ("Sum-Rate, s, [bps/Hz]", "P(SR > s)"),
}


class RenderError(Exception):
    """Missing files or columns, or an invalid figure spec."""


@dataclass
class FigureSpec:
    input_csv: Path
    output: Path
    metric: str = "SumRate"
    methods: list[str] | None = None          # None -> every column
    styles: dict[str, dict] = field(default_factory=dict)
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    title: str | None = None
    dpi: int = 150

    @classmethod
    def from_file(cls, path: str | Path) -> "FigureSpec":
        path = Path(path)
        if not path.exists():
            raise RenderError(f"figure spec not found: {path}")
        raw = json.loads(path.read_text())
        try:
            spec = cls(input_csv=Path(raw["input"]), output=Path(raw["output"]))
        except KeyError as exc:
            raise RenderError(f"figure spec misses required key {exc}") from exc
        for key in ("metric", "methods", "styles", "title", "dpi"):
            if key in raw:
                setattr(spec, key, raw[key])
        for key in ("xlim", "ylim"):
            if key in raw:
                setattr(spec, key, tuple(raw[key]))
        # relative paths resolve against the spec file location
        if not spec.input_csv.is_absolute():
            spec.input_csv = path.parent / spec.input_csv
        if not spec.output.is_absolute():
            spec.output = path.parent / spec.output
        return spec


def _read_csv_columns(path: Path) -> dict[str, list[str]]:
    if not path.exists():
        raise RenderError(f"input CSV not found: {path}")
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise RenderError(f"{path} is empty")
        columns: dict[str, list[str]] = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                columns[name].append(value)
    return columns


def load_curves(spec: FigureSpec) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-method cCDF step points (sorted values, exceedance probabilities).

    Accepts either the harness wide format (a ``p`` column plus one sorted
    value column per method) or the long format (``method,id,value``), in
    which case the cCDF is computed here.
    """
    columns = _read_csv_columns(spec.input_csv)
    if {"method", "id", "value"} <= set(columns):
        by_method: dict[str, list[float]] = {}
        for m, v in zip(columns["method"], columns["value"]):
            by_method.setdefault(m, []).append(float(v))
        curves = {}
        for m, vals in by_method.items():
            arr = np.sort(np.asarray(vals))
            n = len(arr)
            curves[m] = (arr, (n - 1.0 - np.arange(n)) / n)
    elif "p" in columns:
        p = np.asarray([float(v) for v in columns["p"]])
        curves = {m: (np.asarray([float(v) for v in vals]), p)
                  for m, vals in columns.items() if m != "p"}
    else:
        raise RenderError(
            f"{spec.input_csv} is neither a results nor an eccdf CSV "
            f"(columns: {sorted(columns)})")
    wanted = spec.methods or list(curves)
    missing = [m for m in wanted if m not in curves]
    if missing:
        raise RenderError(
            f"columns {missing} not present in {spec.input_csv} "
            f"(available: {sorted(curves)})")
    return {m: curves[m] for m in wanted}


def _deterministic_save(fig, spec: FigureSpec) -> None:
    matplotlib.rcParams["svg.hashsalt"] = "feedback-plots"
    suffix = spec.output.suffix.lower()
    metadata = {"Date": None} if suffix == ".svg" else {"Software": "feedback-plots"}
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output, dpi=spec.dpi, metadata=metadata)
    plt.close(fig)


def render_ccdf(spec: FigureSpec) -> Path:
    """One step curve per method with legend and grid; returns the image path."""
    curves = load_curves(spec)
    xlabel, ylabel = AXIS_LABELS.get(spec.metric,
                                     (f"{spec.metric}, s", f"P({spec.metric} > s)"))
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i, (method, (values, probs)) in enumerate(curves.items()):
        style = dict(spec.styles.get(method, {}))
        style.setdefault("color", DEFAULT_PALETTE[i % len(DEFAULT_PALETTE)])
        style.setdefault("label", method)
        ax.plot(values, probs, drawstyle="steps-post", linewidth=1.4, **style)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.4)
    ax.legend(loc="best", fontsize=8)
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)
    else:
        ax.set_ylim(0.0, 1.0)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    _deterministic_save(fig, spec)
    return spec.output


def render_trace(spec: FigureSpec) -> Path:
    """Sum-rate versus iteration count for iterative precoder traces."""
    columns = _read_csv_columns(spec.input_csv)
    if "iteration" not in columns:
        raise RenderError(f"{spec.input_csv} has no 'iteration' column")
    iters = np.asarray([float(v) for v in columns["iteration"]])
    wanted = spec.methods or [c for c in columns if c != "iteration"]
    missing = [m for m in wanted if m not in columns]
    if missing:
        raise RenderError(f"columns {missing} not present in {spec.input_csv}")
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i, method in enumerate(wanted):
        style = dict(spec.styles.get(method, {}))
        style.setdefault("color", DEFAULT_PALETTE[i % len(DEFAULT_PALETTE)])
        style.setdefault("label", method)
        ax.plot(iters, [float(v) for v in columns[method]], linewidth=1.4, **style)
    ax.set_xlabel("Iterations or Samples")
    ax.set_ylabel("Sum-Rate [bps/Hz]")
    ax.grid(True, alpha=0.4)
    ax.legend(loc="best", fontsize=8)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    _deterministic_save(fig, spec)
    return spec.output
