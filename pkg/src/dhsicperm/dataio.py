"""CSV ingestion and export.

Variables are carved out of a numeric table with a column-group string such
as ``"0:5,5:10"``: each ``a:b`` is a half-open, 0-based column range.  A
single integer ``a`` is shorthand for ``a:a+1``.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .kernels import Dataset

__all__ = [
    "CSVFormatError",
    "parse_column_groups",
    "read_numeric_csv",
    "load_dataset_csv",
    "write_dataset_csv",
    "write_matrix_csv",
    "file_digest",
]


class CSVFormatError(ValueError):
    """Malformed CSV input or column-group string."""


def parse_column_groups(spec: str, n_columns: int) -> list[slice]:
    groups = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            raise CSVFormatError(f"empty column group in {spec!r}")
        try:
            if ":" in token:
                a, b = (int(x) for x in token.split(":"))
            else:
                a = int(token)
                b = a + 1
        except ValueError as exc:
            raise CSVFormatError(f"bad column group {token!r}") from exc
        if not 0 <= a < b <= n_columns:
            raise CSVFormatError(f"column group {token!r} outside 0..{n_columns}")
        groups.append(slice(a, b))
    if len(groups) < 2:
        raise CSVFormatError(f"need at least two column groups, got {spec!r}")
    return groups


def _floats(row: list[str]) -> list[float] | None:
    try:
        return [float(x) for x in row]
    except ValueError:
        return None


def read_numeric_csv(path) -> np.ndarray:
    """Read a rectangular table of finite reals; a non-numeric first row is a header."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise CSVFormatError(f"cannot read {path}: {exc}") from exc
    if rows and _floats(rows[0]) is None:
        rows = rows[1:]
    if not rows:
        raise CSVFormatError(f"{path} has no data rows")
    width = len(rows[0])
    out = []
    for i, row in enumerate(rows):
        vals = _floats(row)
        if vals is None or len(vals) != width:
            raise CSVFormatError(f"{path}: row {i + 1} is not {width} numeric fields")
        out.append(vals)
    arr = np.array(out, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise CSVFormatError(f"{path} contains NaN or Inf")
    return arr


def load_dataset_csv(path, groups: str | None = None) -> Dataset:
    """Load a :class:`Dataset`; without ``groups`` every column is its own variable."""
    table = read_numeric_csv(path)
    if groups is None:
        slices = [slice(j, j + 1) for j in range(table.shape[1])]
        if len(slices) < 2:
            raise CSVFormatError("need at least two columns")
    else:
        slices = parse_column_groups(groups, table.shape[1])
    return Dataset(tuple(table[:, s] for s in slices))


def write_dataset_csv(data: Dataset, path) -> str:
    """Write ``data`` as one table (blocks side by side); returns the matching group string."""
    table = np.hstack(data.blocks)
    header, groups, col = [], [], 0
    for j, m in enumerate(data.dims):
        header += [f"x{j + 1}_{k + 1}" for k in range(m)]
        groups.append(f"{col}:{col + m}")
        col += m
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows([[repr(float(v)) for v in row] for row in table])
    return ",".join(groups)


def write_matrix_csv(matrix, path) -> None:
    with Path(path).open("w", newline="") as fh:
        csv.writer(fh).writerows([[repr(float(v)) for v in row] for row in np.asarray(matrix)])


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
