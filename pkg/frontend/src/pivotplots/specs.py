"""Figure specifications: a small JSON file names the inputs, kind, and output.

Example:

    {
      "kind": "binscatter-overlay",
      "inputs": [
        {"path": "bins_topical.tsv", "label": "topic papers"},
        {"path": "bins_other.tsv", "label": "other papers"}
      ],
      "x": "mean_x",
      "y": "mean_y",
      "x_label": "pivot size",
      "y_label": "hit rate",
      "output": "pivot_penalty.png",
      "width": 900,
      "height": 600
    }

Kinds: ``timeseries-share`` (line over periods), ``distribution`` (overlaid
histograms of a value column), ``binscatter`` (markers at bin means), and
``binscatter-overlay`` (one marker series per input).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("timeseries-share", "distribution", "binscatter", "binscatter-overlay")

# default x/y columns per kind, matching the engine's table headers
DEFAULT_COLUMNS = {
    "timeseries-share": ("period", "share"),
    "distribution": (None, "value"),
    "binscatter": ("mean_x", "mean_y"),
    "binscatter-overlay": ("mean_x", "mean_y"),
}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class SeriesInput:
    path: Path
    label: str


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[SeriesInput, ...]
    output: Path
    x: str | None
    y: str
    x_label: str = ""
    y_label: str = ""
    title: str = ""
    bins: int = 20  # distribution kind only
    width: int = 800
    height: int = 600
    dpi: int = 100


def _series_inputs(raw, base: Path) -> tuple[SeriesInput, ...]:
    if isinstance(raw, str):
        raw = [{"path": raw, "label": ""}]
    if not isinstance(raw, list) or not raw:
        raise SpecError("spec needs a non-empty 'inputs' list (or an 'input' path)")
    out = []
    for i, entry in enumerate(raw):
        if isinstance(entry, str):
            entry = {"path": entry, "label": ""}
        if "path" not in entry:
            raise SpecError(f"inputs[{i}] is missing 'path'")
        out.append(SeriesInput(base / entry["path"], entry.get("label", "")))
    return tuple(out)


def load_spec(path: str | Path) -> FigureSpec:
    """Parse and validate a figure spec; relative paths resolve next to it."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SpecError(f"{path} must hold a JSON object")
    kind = obj.get("kind")
    if kind not in KINDS:
        raise SpecError(f"unknown figure kind {kind!r}; expected one of {', '.join(KINDS)}")
    if "output" not in obj:
        raise SpecError("spec is missing 'output'")
    base = path.parent
    raw_inputs = obj.get("inputs", obj.get("input"))
    inputs = _series_inputs(raw_inputs, base)
    if kind != "binscatter-overlay" and len(inputs) > 1 and kind == "binscatter":
        raise SpecError("kind 'binscatter' takes one input; use 'binscatter-overlay' for several")
    default_x, default_y = DEFAULT_COLUMNS[kind]
    return FigureSpec(
        kind=kind,
        inputs=inputs,
        output=base / obj["output"],
        x=obj.get("x", default_x),
        y=obj.get("y", default_y),
        x_label=obj.get("x_label", ""),
        y_label=obj.get("y_label", ""),
        title=obj.get("title", ""),
        bins=int(obj.get("bins", 20)),
        width=int(obj.get("width", 800)),
        height=int(obj.get("height", 600)),
        dpi=int(obj.get("dpi", 100)),
    )
