"""Render figure specs from tabular text files.

Rendering is read-only over its inputs and plots table values verbatim; the
one aggregation performed here is histogram counting for the ``distribution``
kind, which consumes a raw value column.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .specs import FigureSpec, SpecError

_SERIES_COLORS = ("#c23b22", "#2c5f8a", "#4c9a6b", "#8a5fa8")


def _read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise SpecError(f"input table not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SpecError(f"input table is empty: {path}")
    header = lines[0].split("\t")
    return header, [line.split("\t") for line in lines[1:]]


def _column(path: Path, header: list[str], rows: list[list[str]], name: str) -> list[str]:
    if name not in header:
        raise SpecError(f"column {name!r} not present in {path} (columns: {', '.join(header)})")
    idx = header.index(name)
    return [row[idx] for row in rows]


def _floats(cells: list[str], name: str, path: Path) -> list[float]:
    out = []
    for cell in cells:
        if cell == "":
            continue
        try:
            out.append(float(cell))
        except ValueError:
            raise SpecError(f"column {name!r} in {path} holds non-numeric value {cell!r}") from None
    return out


def _label(series, i: int) -> str:
    return series.label or f"series {i + 1}"


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path."""
    fig, ax = plt.subplots(
        figsize=(spec.width / spec.dpi, spec.height / spec.dpi), dpi=spec.dpi
    )
    try:
        if spec.kind == "timeseries-share":
            for i, series in enumerate(spec.inputs):
                header, rows = _read_table(series.path)
                periods = _column(series.path, header, rows, spec.x)
                shares = _floats(_column(series.path, header, rows, spec.y), spec.y, series.path)
                positions = range(len(periods))
                ax.plot(positions, shares, marker="o", color=_SERIES_COLORS[i % 4], label=_label(series, i))
                step = max(1, len(periods) // 12)
                ax.set_xticks(list(positions)[::step])
                ax.set_xticklabels(periods[::step], rotation=45, ha="right")
        elif spec.kind == "distribution":
            series_values = []
            for series in spec.inputs:
                header, rows = _read_table(series.path)
                series_values.append(_floats(_column(series.path, header, rows, spec.y), spec.y, series.path))
            lo = min(min(v) for v in series_values if v)
            hi = max(max(v) for v in series_values if v)
            if lo == hi:
                hi = lo + 1.0
            edges = [lo + (hi - lo) * k / spec.bins for k in range(spec.bins + 1)]
            for i, (series, values) in enumerate(zip(spec.inputs, series_values)):
                ax.hist(
                    values, bins=edges, density=True, alpha=0.45,
                    color=_SERIES_COLORS[i % 4], label=_label(series, i),
                )
        elif spec.kind in ("binscatter", "binscatter-overlay"):
            for i, series in enumerate(spec.inputs):
                header, rows = _read_table(series.path)
                xs = _floats(_column(series.path, header, rows, spec.x), spec.x, series.path)
                ys = _floats(_column(series.path, header, rows, spec.y), spec.y, series.path)
                ax.plot(xs, ys, "o", color=_SERIES_COLORS[i % 4], label=_label(series, i))
        else:  # pragma: no cover - load_spec rejects unknown kinds
            raise SpecError(f"unknown figure kind {spec.kind!r}")

        if spec.x_label:
            ax.set_xlabel(spec.x_label)
        if spec.y_label:
            ax.set_ylabel(spec.y_label)
        if spec.title:
            ax.set_title(spec.title)
        if len(spec.inputs) > 1 or any(s.label for s in spec.inputs):
            ax.legend(frameon=False)
        fig.tight_layout()
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, dpi=spec.dpi)
    finally:
        plt.close(fig)
    return spec.output
