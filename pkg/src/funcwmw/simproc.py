"""Karhunen-Loeve generators for Brownian motion and t processes on [0, 1].

A curve is ``sum_k Z_k phi_k(t)`` with ``phi_k(t) = sqrt(2) sin((k - 1/2) pi t)``
and ``Z_k = sigma_k * xi_k``, ``sigma_k = 1 / ((k - 1/2) pi)``. Gaussian
``xi_k`` give standard Brownian motion. For the t(r) process every curve
draws one chi-square variable ``V`` with r degrees of freedom and uses
``xi_k = U_k / sqrt(V / r)``.

Curve ``i`` of a call with seed ``s`` is drawn from stream
``(s, STREAM_CURVE, i)``: first the K normals ``U_k``, then ``V`` (shared
mode) or K chi-square values (independent mode).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._rng import STREAM_CURVE, stream
from .fspace import Grid, Sample

INNOVATIONS = ("gaussian", "t")
SHIFT_KINDS = ("delta1", "delta2", "delta3", "custom")


@dataclass(frozen=True)
class KlSpec:
    K: int = 500
    innovation: str = "gaussian"
    r: int | None = None
    # "shared": one V per curve (a t process); "independent": one V per coefficient
    t_mode: str = "shared"

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.innovation not in INNOVATIONS:
            raise ValueError(f"innovation must be one of {INNOVATIONS}")
        if self.innovation == "t" and (self.r is None or self.r < 1):
            raise ValueError("t innovations need a positive integer r")
        if self.t_mode not in ("shared", "independent"):
            raise ValueError("t_mode must be 'shared' or 'independent'")

    @property
    def label(self) -> str:
        return "sBm" if self.innovation == "gaussian" else f"t({self.r})"

    def sigma(self) -> np.ndarray:
        k = np.arange(1, self.K + 1)
        return 1.0 / ((k - 0.5) * np.pi)

    def basis(self, t: np.ndarray) -> np.ndarray:
        """``(K, d)`` matrix of basis functions evaluated at ``t``."""
        k = np.arange(1, self.K + 1)
        return np.sqrt(2.0) * np.sin(np.outer((k - 0.5) * np.pi, np.asarray(t, dtype=float)))

    def variance_factor(self) -> float:
        """Ratio of the covariance kernel to min(s, t)."""
        if self.innovation == "gaussian":
            return 1.0
        if self.r <= 2:
            return float("inf")
        return self.r / (self.r - 2.0)


def sbm(K: int = 500) -> KlSpec:
    return KlSpec(K=K)


def t_process(r: int, K: int = 500, t_mode: str = "shared") -> KlSpec:
    return KlSpec(K=K, innovation="t", r=r, t_mode=t_mode)


@lru_cache(maxsize=16)
def _scaled_basis(spec: KlSpec, grid: Grid) -> np.ndarray:
    m = spec.sigma()[:, None] * spec.basis(grid.points)
    m.flags.writeable = False
    return m


def _check_unit(grid: Grid) -> None:
    if grid.points[0] < 0 or grid.points[-1] > 1:
        raise ValueError("KL models are defined on [0, 1]; grid lies outside")


def coefficients(spec: KlSpec, n: int, seed: int, start: int = 0) -> np.ndarray:
    """Standardized coefficients ``xi`` of shape ``(n, K)`` for curves start..start+n-1."""
    K = spec.K
    out = np.empty((n, K))
    for i in range(n):
        g = stream(seed, STREAM_CURVE, start + i)
        u = g.standard_normal(K)
        if spec.innovation == "t":
            if spec.t_mode == "shared":
                u = u / np.sqrt(g.chisquare(spec.r) / spec.r)
            else:
                u = u / np.sqrt(g.chisquare(spec.r, size=K) / spec.r)
        out[i] = u
    return out


def gen_values(spec: KlSpec, n: int, grid: Grid, seed: int, start: int = 0) -> np.ndarray:
    _check_unit(grid)
    return coefficients(spec, n, seed, start) @ _scaled_basis(spec, grid)


def gen_sample(spec: KlSpec, n: int, grid: Grid, seed: int) -> Sample:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Sample(grid, gen_values(spec, n, grid, seed))


def covariance_kernel(spec: KlSpec, grid: Grid) -> np.ndarray:
    """Covariance matrix of the truncated series on the grid."""
    _check_unit(grid)
    f = spec.variance_factor()
    if not np.isfinite(f):
        raise ValueError(f"{spec.label} has no finite covariance")
    b = _scaled_basis(spec, grid)
    return f * (b.T @ b)


@dataclass(frozen=True)
class ShiftSpec:
    kind: str = "delta1"
    c: float = 0.0
    custom_values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise ValueError(f"shift kind must be one of {SHIFT_KINDS}")
        if self.kind == "custom" and self.custom_values is None:
            raise ValueError("custom shift needs custom_values")

    def values(self, grid: Grid) -> np.ndarray:
        t = grid.points
        if self.kind == "delta1":
            return np.full(grid.d, float(self.c))
        if self.kind == "delta2":
            return self.c * t
        if self.kind == "delta3":
            return self.c * t * (1 - t)
        v = np.asarray(self.custom_values, dtype=float)
        if v.shape != (grid.d,):
            raise ValueError(f"custom shift has {v.size} values, grid has d={grid.d}")
        return self.c * v

    def scaled(self, factor: float) -> "ShiftSpec":
        return ShiftSpec(self.kind, self.c * factor, self.custom_values)


def apply_shift(sample: Sample, shift: ShiftSpec) -> Sample:
    return Sample(sample.grid, sample.values + shift.values(sample.grid))
