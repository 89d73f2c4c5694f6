"""Discretized L_p[a, b] geometry.

Curves live on a shared equispaced grid. A grid carries quadrature weights
``w`` so that the norm is ``(sum_i w_i |x_i|^p)^(1/p)`` and a dual vector
``f`` acts on a curve ``h`` by ``sum_i w_i f_i h_i``. In ``euclidean`` mode
every weight is 1, which is how curves observed at finitely many points are
usually compared; ``trapezoid`` mode gives true L_p[a, b] quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

WEIGHT_MODES = ("euclidean", "trapezoid")


class GridMismatchError(ValueError):
    """Raised when two objects are discretized on different grids."""


@dataclass(frozen=True, eq=False)
class Grid:
    a: float
    b: float
    d: int
    weight_mode: str = "euclidean"
    points: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"grid size must be a positive integer, got {self.d}")
        if self.weight_mode not in WEIGHT_MODES:
            raise ValueError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")
        if self.d > 1 and not self.b > self.a:
            raise ValueError("grid needs b > a")
        d = int(self.d)
        pts = np.linspace(self.a, self.b, d) if d > 1 else np.array([float(self.a)])
        if self.weight_mode == "euclidean" or d == 1:
            w = np.ones(d)
        else:
            h = (self.b - self.a) / (d - 1)
            w = np.full(d, h)
            w[0] = w[-1] = h / 2
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.d == other.d and self.weight_mode == other.weight_mode
                and self.a == other.a and self.b == other.b)

    def __hash__(self):
        return hash((self.a, self.b, self.d, self.weight_mode))

    def with_mode(self, weight_mode: str) -> "Grid":
        return Grid(self.a, self.b, self.d, weight_mode)


def unit_grid(d: int, weight_mode: str = "euclidean") -> Grid:
    return Grid(0.0, 1.0, d, weight_mode)


@dataclass(frozen=True)
class LpGeometry:
    """Exponent of the norm. ``q`` is the conjugate exponent p/(p-1)."""

    p: float = 2.0

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p < 2:
            raise ValueError(f"p must be a finite real >= 2, got {self.p}")

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)


def _check_grid(g1: Grid, g2: Grid) -> None:
    if g1 != g2:
        raise GridMismatchError(f"incompatible discretizations: {g1} vs {g2}")


def _finite(values: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Curve:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _finite(self.values, "curve values").reshape(-1).copy()
        if v.shape[0] != self.grid.d:
            raise ValueError(f"curve has {v.shape[0]} values but grid has d={self.grid.d}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __add__(self, other: "Curve") -> "Curve":
        _check_grid(self.grid, other.grid)
        return Curve(self.grid, self.values + other.values)

    def __sub__(self, other: "Curve") -> "Curve":
        _check_grid(self.grid, other.grid)
        return Curve(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "Curve":
        return Curve(self.grid, float(c) * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Sample:
    """A group of curves stored as a ``(size, d)`` array."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _finite(self.values, "sample values")
        if v.ndim == 1:
            v = v.reshape(1, -1)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("a sample needs at least one curve")
        if v.shape[1] != self.grid.d:
            raise ValueError(f"sample has {v.shape[1]} columns but grid has d={self.grid.d}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_curves(cls, curves: Sequence[Curve]) -> "Sample":
        if not curves:
            raise ValueError("a sample needs at least one curve")
        grid = curves[0].grid
        for c in curves[1:]:
            _check_grid(grid, c.grid)
        return cls(grid, np.stack([c.values for c in curves]))

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def curves(self) -> list[Curve]:
        return [Curve(self.grid, row) for row in self.values]

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[Curve]:
        return iter(self.curves)

    def mean(self) -> Curve:
        return Curve(self.grid, self.values.mean(axis=0))

    def transform(self, c: float = 1.0, shift: np.ndarray | None = None,
                  perm: np.ndarray | None = None) -> "Sample":
        """Return ``c * B(x) + shift`` for every curve, B a coordinate permutation."""
        v = self.values if perm is None else self.values[:, perm]
        v = c * v
        if shift is not None:
            v = v + np.asarray(shift, dtype=float)
        return Sample(self.grid, v)


@dataclass(frozen=True, eq=False)
class DualVector:
    """Element of the dual space, stored as coefficients against the grid weights."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        v = _finite(self.coeffs, "dual coefficients").reshape(-1).copy()
        if v.shape[0] != self.grid.d:
            raise ValueError(f"dual vector has {v.shape[0]} coefficients but grid has d={self.grid.d}")
        v.flags.writeable = False
        object.__setattr__(self, "coeffs", v)

    def __add__(self, other: "DualVector") -> "DualVector":
        _check_grid(self.grid, other.grid)
        return DualVector(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "DualVector") -> "DualVector":
        _check_grid(self.grid, other.grid)
        return DualVector(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "DualVector":
        return DualVector(self.grid, float(c) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "DualVector":
        return DualVector(self.grid, -self.coeffs)


# Array kernels. The last axis runs over grid points; leading axes broadcast.

def norms(values: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if p == 2:
        return np.sqrt(np.einsum("...i,...i,i->...", values, values, weights))
    # scale by the max abs entry so that |x|^p does not overflow or underflow
    scale = np.max(np.abs(values), axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    r = np.abs(values / safe) ** p @ weights
    return scale[..., 0] * r ** (1.0 / p)


def signs(values: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    """Spatial signs of each row; rows that are identically zero map to zero."""
    values = np.asarray(values, dtype=float)
    nrm = norms(values, weights, p)[..., None]
    safe = np.where(nrm > 0, nrm, 1.0)
    u = values / safe
    if p != 2:
        u = np.sign(u) * np.abs(u) ** (p - 1.0)
    return np.where(nrm > 0, u, 0.0)


def lp_norm(x: Curve, geom: LpGeometry) -> float:
    return float(norms(x.values, x.grid.weights, geom.p))


def sgn(x: Curve, geom: LpGeometry) -> DualVector:
    """Gateaux derivative of the norm at ``x``; zero at ``x = 0``."""
    return DualVector(x.grid, signs(x.values, x.grid.weights, geom.p))


def pair(f: DualVector, h: Curve) -> float:
    _check_grid(f.grid, h.grid)
    return float(np.sum(f.grid.weights * f.coeffs * h.values))


def dual_norm(f: DualVector, geom: LpGeometry) -> float:
    return float(norms(f.coeffs, f.grid.weights, geom.q))
