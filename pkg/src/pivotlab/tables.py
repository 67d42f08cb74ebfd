"""Tab-separated tables with a header row: the exchange format for engine outputs."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence


def format_cell(value) -> str:
    """Render one cell. Floats use repr so values round-trip exactly."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        value = float(value)
        if value == 0.0:
            value = 0.0  # canonicalize -0.0
        if math.isnan(value):
            return ""
        return repr(value)
    if isinstance(value, int):
        return str(value)
    text = str(value)
    if "\t" in text or "\n" in text:
        raise ValueError(f"cell value contains a tab or newline: {text!r}")
    return text


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(format_cell(v) for v in row) + "\n")


def read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"empty table file: {path}")
    header = lines[0].split("\t")
    rows = [line.split("\t") for line in lines[1:]]
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"row {i + 1} of {path} has {len(row)} cells, expected {len(header)}")
    return header, rows


def column_index(header: Sequence[str], name: str, path="table") -> int:
    try:
        return list(header).index(name)
    except ValueError:
        raise KeyError(f"column {name!r} not present in {path} (columns: {', '.join(header)})") from None
