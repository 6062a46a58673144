"""Plain-text CSV ingestion and emission for point sets.

Format: one point per line, comma-separated decimal coordinates.  An optional
first line starting with ``#`` is a header and is skipped; blank lines are
ignored.  Values are written with ``repr``, the shortest string that parses
back to the same double, so write/read round-trips are exact.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import PointSet


class CsvFormatError(ValueError):
    """Malformed CSV input; ``line`` is 1-based."""

    def __init__(self, message: str, line: Optional[int] = None, path=None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


def _rows(text: str, path=None) -> tuple[list[int], list[list[str]]]:
    linenos, rows = [], []
    width = None
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if seen_data:
                raise CsvFormatError("header line after data", lineno, path)
            continue
        fields = [f.strip() for f in line.split(",")]
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise CsvFormatError(
                f"ragged row: expected {width} fields, found {len(fields)}", lineno, path
            )
        seen_data = True
        linenos.append(lineno)
        rows.append(fields)
    if not rows:
        raise CsvFormatError("no data rows", None, path)
    return linenos, rows


def _parse_float(tok: str, lineno: int, path) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise CsvFormatError(f"not a number: {tok!r}", lineno, path) from None
    if not np.isfinite(v):
        raise CsvFormatError(f"non-finite value: {tok!r}", lineno, path)
    return v


def _parse_int(tok: str, lineno: int, path) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CsvFormatError(f"not an integer: {tok!r}", lineno, path) from None


def parse_matrix(text: str, path=None) -> np.ndarray:
    linenos, rows = _rows(text, path)
    return np.array(
        [[_parse_float(t, ln, path) for t in row] for ln, row in zip(linenos, rows)],
        dtype=np.float64,
    )


def read_points(path) -> PointSet:
    return PointSet(parse_matrix(Path(path).read_text(), path))


def read_labeled(path) -> tuple[PointSet, np.ndarray]:
    """Points with a trailing integer label column."""
    text = Path(path).read_text()
    linenos, rows = _rows(text, path)
    if len(rows[0]) < 2:
        raise CsvFormatError("labeled rows need at least one coordinate and a label", linenos[0], path)
    coords = [[_parse_float(t, ln, path) for t in row[:-1]] for ln, row in zip(linenos, rows)]
    labels = [_parse_int(row[-1], ln, path) for ln, row in zip(linenos, rows)]
    return PointSet(np.array(coords)), np.array(labels, dtype=np.int64)


def read_descriptors(path) -> tuple[PointSet, np.ndarray]:
    """Descriptor rows with a leading integer image-identifier column."""
    text = Path(path).read_text()
    linenos, rows = _rows(text, path)
    if len(rows[0]) < 2:
        raise CsvFormatError("descriptor rows need an image id and a coordinate", linenos[0], path)
    ids = [_parse_int(row[0], ln, path) for ln, row in zip(linenos, rows)]
    coords = [[_parse_float(t, ln, path) for t in row[1:]] for ln, row in zip(linenos, rows)]
    return PointSet(np.array(coords)), np.array(ids, dtype=np.int64)


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_rows(rows: Iterable[Sequence], header: Optional[Sequence[str]] = None) -> str:
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def format_points(points: PointSet, header: Optional[str] = None) -> str:
    lines = [] if header is None else ["# " + header]
    lines.extend(",".join(repr(float(v)) for v in row) for row in points.data)
    return "\n".join(lines) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory + rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_points(path, points: PointSet, header: Optional[str] = None) -> None:
    atomic_write(path, format_points(points, header))
