"""CSV parsing and integrity helpers shared by the plotting commands.

Input tables are comma-separated with a header row, as written by the
sampler CLI.  Every reader validates the header before touching row data
and raises :class:`SchemaError` with the offending path and column names,
so the command-line tools can fail cleanly on malformed inputs.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path


class SchemaError(Exception):
    """A CSV input does not match the expected table schema."""


def read_table(path: str | Path, required: tuple[str, ...]) -> dict[str, list[str]]:
    """Parse a headered CSV into column lists, enforcing required columns.

    Returns a mapping from column name to the list of raw string cells in
    file order.  Raises SchemaError when the file is empty, the header is
    missing any required column, or a row has the wrong number of cells.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {','.join(required)}")
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        columns: dict[str, list[str]] = {name: [] for name in header}
        for i, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}: line {i} has {len(row)} cells, expected {len(header)}")
            for name, cell in zip(header, row):
                columns[name].append(cell)
    if not columns[required[0]]:
        raise SchemaError(f"{path}: no data rows")
    return columns


def parse_floats(columns: dict[str, list[str]], name: str, path: str | Path) -> list[float]:
    """Convert one column to floats, reporting the column on failure."""
    try:
        return [float(cell) for cell in columns[name]]
    except ValueError as exc:
        raise SchemaError(f"{path}: column {name!r} is not numeric ({exc})")


def sha256_of(path: str | Path) -> str:
    """Checksum used to verify plot commands leave their inputs untouched."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
