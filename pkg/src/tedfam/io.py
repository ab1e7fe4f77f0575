"""File formats: MATSERIES text files, small-matrix CSV and run manifests.

A MATSERIES file is a header ``MATSERIES v1 T p1 p2`` followed by T blocks of
p1 lines, each holding p2 numbers separated by single spaces.  Numbers use 17
significant digits, which round-trips every finite double exactly.
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np

from .core import MatrixSeries, TedfamError

__all__ = [
    "ParseError",
    "format_number",
    "dumps_series",
    "loads_series",
    "write_series",
    "read_series",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_blocks_csv",
    "read_blocks_csv",
    "write_manifest",
    "read_manifest",
    "file_digest",
]

MAGIC = "MATSERIES"
VERSION = "v1"
MANIFEST_NAME = "manifest.txt"


class ParseError(TedfamError):
    """Malformed or unreadable input file."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = str(path) if path is not None else "<string>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def format_number(x: float) -> str:
    return format(float(x), ".17g")


def dumps_series(series) -> str:
    data = series.data if isinstance(series, MatrixSeries) else np.asarray(series, dtype=np.float64)
    T, p1, p2 = data.shape
    lines = [f"{MAGIC} {VERSION} {T} {p1} {p2}"]
    for block in data:
        for row in block:
            lines.append(" ".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def loads_series(text: str, path=None) -> MatrixSeries:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty file", path, 1)
    head = lines[0].split(" ")
    if len(head) != 5 or head[0] != MAGIC or head[1] != VERSION:
        raise ParseError(f"expected header '{MAGIC} {VERSION} T p1 p2'", path, 1)
    try:
        T, p1, p2 = (int(h) for h in head[2:])
    except ValueError:
        raise ParseError("header dimensions must be integers", path, 1) from None
    if T < 1 or p1 < 1 or p2 < 1:
        raise ParseError("header dimensions must be positive", path, 1)
    body = lines[1:]
    if len(body) != T * p1:
        bad_line = len(lines) + 1 if len(body) < T * p1 else T * p1 + 2
        raise ParseError(f"expected {T * p1} data lines, found {len(body)}", path, bad_line)
    data = np.empty((T * p1, p2))
    for n, line in enumerate(body):
        fields = line.split(" ")
        if len(fields) != p2:
            raise ParseError(f"expected {p2} values, found {len(fields)}", path, n + 2)
        try:
            data[n] = [float(f) for f in fields]
        except ValueError:
            raise ParseError("invalid number", path, n + 2) from None
        if not np.all(np.isfinite(data[n])):
            raise ParseError("non-finite value", path, n + 2)
    return MatrixSeries(data.reshape(T, p1, p2))


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_text(path) -> str:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read file ({exc.strerror})", path) from exc
    except UnicodeDecodeError as exc:
        raise ParseError("file is not valid UTF-8", path) from exc


def write_series(path, series) -> None:
    _write_text(path, dumps_series(series))


def read_series(path) -> MatrixSeries:
    return loads_series(_read_text(path), path)


def write_matrix_csv(path, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    _write_text(path, "".join(",".join(format_number(v) for v in row) + "\n" for row in M))


def read_matrix_csv(path) -> np.ndarray:
    text = _read_text(path)
    rows = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise ParseError("invalid number", path, n) from None
        if rows and len(rows[-1]) != len(rows[0]):
            raise ParseError("ragged row", path, n)
    if not rows:
        raise ParseError("empty file", path, 1)
    return np.array(rows)


def write_blocks_csv(path, blocks: np.ndarray) -> None:
    """Stack T blocks of r x c vertically into one CSV of T*r rows."""
    blocks = np.asarray(blocks, dtype=np.float64)
    T, r, c = blocks.shape
    write_matrix_csv(path, blocks.reshape(T * r, c))


def read_blocks_csv(path, rows_per_block: int) -> np.ndarray:
    M = read_matrix_csv(path)
    if M.shape[0] % rows_per_block:
        raise ParseError(f"{M.shape[0]} rows is not a multiple of {rows_per_block}", path)
    return M.reshape(-1, rows_per_block, M.shape[1])


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, entries: dict) -> Path:
    """Write ``manifest.txt`` as sorted ``key=value`` lines."""
    path = Path(out_dir) / MANIFEST_NAME
    lines = []
    for key in sorted(entries):
        value = str(entries[key]).replace("\n", " ")
        lines.append(f"{key}={value}")
    _write_text(path, "\n".join(lines) + "\n")
    return path


def read_manifest(path) -> dict[str, str]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    out = {}
    for line in _read_text(path).splitlines():
        if line:
            key, _, value = line.partition("=")
            out[key] = value
    return out


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ParseError(f"cannot create output directory ({exc.strerror})", path) from exc
    return path
