"""Curve CSV files.

One curve per row, one column per grid point. With ``grid_header`` the first
row holds the grid coordinates; a first row made only of non-numeric labels
is skipped. Errors name the file, row and column.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fspace import Grid, Sample


class CurveCsvError(ValueError):
    pass


@dataclass(frozen=True)
class CurveCsv:
    path: str
    values: np.ndarray  # (curves, d)
    coords: np.ndarray | None  # grid coordinates from the header row

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_curves(path: str | Path, grid_header: bool = False) -> CurveCsv:
    path = str(path)
    try:
        with open(path, newline="") as fh:
            rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1)
                    if any(c.strip() for c in r)]
    except OSError as exc:
        raise CurveCsvError(f"{path}: {exc.strerror}") from exc
    if not rows:
        raise CurveCsvError(f"{path}: file has no rows")
    if not grid_header and not any(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]  # column labels
    width = len(rows[0][1]) if rows else 0
    parsed = []
    for lineno, row in rows:
        if len(row) != width:
            raise CurveCsvError(f"{path}: row {lineno} has {len(row)} columns, "
                                f"expected {width}")
        vals = []
        for j, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise CurveCsvError(f"{path}: row {lineno}, column {j}: "
                                    f"cannot parse {cell.strip()!r} as a number") from None
            if not math.isfinite(v):
                raise CurveCsvError(f"{path}: row {lineno}, column {j}: "
                                    f"non-finite value {cell.strip()!r}")
            vals.append(v)
        parsed.append(vals)
    coords = None
    if grid_header:
        coords = np.array(parsed[0])
        parsed = parsed[1:]
        if coords.size > 1 and np.any(np.diff(coords) <= 0):
            raise CurveCsvError(f"{path}: row {rows[0][0]}: grid coordinates "
                                "must be strictly increasing")
    if not parsed:
        raise CurveCsvError(f"{path}: no curves")
    return CurveCsv(path, np.array(parsed), coords)


def grid_for(coords: np.ndarray | None, d: int, weight_mode: str) -> tuple[Grid, bool]:
    """Grid for ``d`` points, and whether the given coordinates are equispaced.

    Without coordinates the grid is equispaced on [0, 1]. Uneven coordinates
    are accepted in euclidean mode, where positions do not enter the norm.
    """
    if coords is None:
        return Grid(0.0, 1.0, d, weight_mode), True
    a, b = float(coords[0]), float(coords[-1])
    even = d < 3 or bool(np.allclose(np.diff(coords), (b - a) / (d - 1), rtol=1e-6, atol=0))
    if not even and weight_mode == "trapezoid":
        raise CurveCsvError("trapezoid weights need equispaced grid coordinates")
    if d == 1:
        return Grid(a, a, 1, weight_mode), True
    return Grid(a, b, d, weight_mode), even


def load_pair(x_path, y_path, grid_header: bool = False,
              weight_mode: str = "euclidean") -> tuple[Sample, Sample, dict]:
    """Read both groups; returns the samples and a description of the inputs."""
    xs = read_curves(x_path, grid_header)
    ys = read_curves(y_path, grid_header)
    if xs.shape[1] != ys.shape[1]:
        raise CurveCsvError(f"column counts differ: {x_path} has {xs.shape[1]}, "
                            f"{y_path} has {ys.shape[1]}")
    for cs in (xs, ys):
        if cs.shape[0] < 2:
            raise CurveCsvError(f"{cs.path}: need at least 2 curves, found {cs.shape[0]}")
    if xs.coords is not None and not np.allclose(xs.coords, ys.coords, rtol=1e-9, atol=0):
        raise CurveCsvError("grid coordinates in the header rows differ")
    grid, even = grid_for(xs.coords, xs.shape[1], weight_mode)
    info = {
        "x": {"path": str(x_path), "curves": xs.shape[0]},
        "y": {"path": str(y_path), "curves": ys.shape[0]},
        "grid": {"a": grid.a, "b": grid.b, "d": grid.d, "weight_mode": grid.weight_mode,
                 "equispaced": even},
    }
    return Sample(grid, xs.values), Sample(grid, ys.values), info


def write_curves(path: str | Path, values: np.ndarray, coords: np.ndarray | None = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if coords is not None:
            w.writerow([repr(float(c)) for c in coords])
        for row in np.atleast_2d(values):
            w.writerow([repr(float(v)) for v in row])
