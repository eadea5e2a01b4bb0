"""Matrix and data file formats.

JSON for structured values ({dim, re, im?} with row-major entry arrays,
the imaginary block omitted for real matrices), CSV for tabular data.
Floats are written with shortest round-trip repr, so save-then-load
reproduces values bitwise.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .linalg import HermitianMatrix, RealSymmetricMatrix, WeylChamberVector
from .mechanisms import DataMatrix, clip_rows

SYMMETRY_TOL = 1e-9


class DataFormatError(ValueError):
    """A file failed validation; carries the 1-based location if known."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        super().__init__(message)
        self.row = row
        self.col = col


class EmptyFileError(DataFormatError):
    pass


class RaggedRowError(DataFormatError):
    pass


class NonNumericCellError(DataFormatError):
    pass


class NonFiniteCellError(DataFormatError):
    pass


def matrix_to_dict(m) -> dict:
    """JSON-ready dict for a real symmetric or Hermitian matrix."""
    a = m.entries
    out = {"dim": int(a.shape[0]), "re": [float(v) for v in np.real(a).ravel()]}
    if np.iscomplexobj(a) and np.any(a.imag != 0):
        out["im"] = [float(v) for v in a.imag.ravel()]
    return out


def matrix_from_dict(d: dict):
    """Inverse of matrix_to_dict; returns RealSymmetricMatrix unless an
    imaginary block is present."""
    dim = int(d["dim"])
    re = np.asarray(d["re"], dtype=float).reshape(dim, dim)
    if "im" in d and d["im"] is not None:
        im = np.asarray(d["im"], dtype=float).reshape(dim, dim)
        return HermitianMatrix(re + 1j * im)
    return RealSymmetricMatrix(re)


def save_matrix(path, m) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_to_dict(m), fh)
        fh.write("\n")


def load_matrix(path):
    with open(path) as fh:
        return matrix_from_dict(json.load(fh))


def save_vector(path, v: WeylChamberVector) -> None:
    with open(path, "w") as fh:
        json.dump([float(x) for x in v.coords], fh)
        fh.write("\n")


def load_vector(path) -> WeylChamberVector:
    with open(path) as fh:
        data = json.load(fh)
    return WeylChamberVector(np.asarray(data, dtype=float))


def _parse_rows(path) -> tuple[list[list[float]], int]:
    """Parse a numeric CSV, tolerating one header line; returns rows and
    the count of file lines consumed before data (0 or 1)."""
    with open(path, newline="") as fh:
        raw = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not raw:
        raise EmptyFileError(f"{path}: no data rows")

    def parse_cell(cell: str, row_no: int, col_no: int) -> float:
        try:
            value = float(cell)
        except ValueError:
            raise NonNumericCellError(
                f"{path}: non-numeric cell at row {row_no}, column {col_no}: {cell!r}",
                row=row_no,
                col=col_no,
            ) from None
        if not math.isfinite(value):
            raise NonFiniteCellError(
                f"{path}: non-finite cell at row {row_no}, column {col_no}",
                row=row_no,
                col=col_no,
            )
        return value

    header_offset = 0
    first = raw[0]
    numeric_first = True
    for cell in first:
        try:
            float(cell)
        except ValueError:
            numeric_first = False
            break
    if not numeric_first:
        all_non_numeric = True
        for cell in first:
            try:
                float(cell)
                all_non_numeric = False
                break
            except ValueError:
                continue
        if not all_non_numeric:
            # mixed first row: report the offending cell rather than guess
            for c, cell in enumerate(first, start=1):
                try:
                    float(cell)
                except ValueError:
                    raise NonNumericCellError(
                        f"{path}: non-numeric cell at row 1, column {c}: {cell!r}",
                        row=1,
                        col=c,
                    ) from None
        header_offset = 1
        raw = raw[1:]
        if not raw:
            raise EmptyFileError(f"{path}: header only, no data rows")

    width = len(raw[0])
    rows: list[list[float]] = []
    for r, cells in enumerate(raw, start=1 + header_offset):
        if len(cells) != width:
            raise RaggedRowError(
                f"{path}: row {r} has {len(cells)} columns, expected {width}",
                row=r,
            )
        rows.append([parse_cell(cell, r, c) for c, cell in enumerate(cells, start=1)])
    return rows, header_offset


def load_data_csv(path, row_bound: float = 1.0) -> DataMatrix:
    """Read an m x d numeric CSV (optional header) and clip its rows."""
    rows, _ = _parse_rows(path)
    return clip_rows(np.asarray(rows, dtype=float), bound=row_bound)


def load_symmetric_csv(path) -> RealSymmetricMatrix:
    """Read a d x d numeric CSV and validate symmetry within 1e-9."""
    rows, _ = _parse_rows(path)
    a = np.asarray(rows, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataFormatError(
            f"{path}: expected a square matrix, got shape {a.shape}"
        )
    dev = float(np.abs(a - a.T).max())
    scale = max(1.0, float(np.abs(a).max()))
    if dev > SYMMETRY_TOL * scale:
        raise DataFormatError(
            f"{path}: matrix is not symmetric within {SYMMETRY_TOL:.0e} "
            f"(max deviation {dev:.3e})"
        )
    return RealSymmetricMatrix((a + a.T) / 2.0)


def load_input_matrix(path) -> RealSymmetricMatrix:
    """Load a real symmetric matrix from .json or .csv by extension."""
    text = str(path)
    if text.endswith(".csv"):
        return load_symmetric_csv(path)
    m = load_matrix(path)
    if isinstance(m, HermitianMatrix):
        raise DataFormatError(f"{path}: expected a real matrix, found an im block")
    return m


def format_float(x: float) -> str:
    """Shortest decimal that round-trips; deterministic byte output."""
    return repr(float(x))
