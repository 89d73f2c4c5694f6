"""Local asymptotic power under shrinking location shifts.

Under ``Y ~ X + delta (mn/N)^(-1/2)`` the scaled WMW statistic tends to a
Gaussian element with mean ``J0(delta)`` and covariance Gamma_1, where J0 is
the Hessian of ``x -> E||Y - X + x||`` at zero and Gamma_1 is the covariance
of the population spatial rank ``E[sgn(Z - X) | X]``. The mean-based
statistics have limits driven by the covariance Sigma of X.

Population expectations are Monte Carlo averages over curves drawn from the
Karhunen-Loeve models; all of them are deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._rng import STREAM_CALIB, STREAM_POPULATION, derive_seed
from .fspace import Curve, DualVector, Grid, LpGeometry, norms, signs
from .simproc import KlSpec, ShiftSpec, covariance_kernel, gen_values
from .spectral import SpectralModel, gaussian_norm_draws, mc_quantile, spectral_decompose

TESTS = ("WMW", "CFF", "HKR1", "HKR2")

_X, _Z, _REDRAW = 1, 2, 3
_BLOCK = 4096


@dataclass(frozen=True)
class DistributionSpec:
    kl: KlSpec
    grid: Grid
    mc_outer: int = 10_000
    mc_inner: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.mc_outer < 1 or self.mc_inner < 2:
            raise ValueError("mc_outer must be >= 1 and mc_inner >= 2")


@dataclass(frozen=True)
class AsymptoticPowerCurve:
    test: str
    shift_kind: str
    c_values: tuple[float, ...]
    powers: tuple[float, ...]
    alpha: float
    gamma: float = 0.5


def _draws(dist: DistributionSpec, role: int, n: int, start: int = 0) -> np.ndarray:
    return gen_values(dist.kl, n, dist.grid, derive_seed(dist.seed, STREAM_POPULATION, role), start)


def difference_draws(dist: DistributionSpec, n: int | None = None):
    """Yield blocks of ``D = Z - X`` with norms above 1e-12.

    Degenerate draws are dropped and replaced from a separate stream; a
    distribution that keeps producing them raises ``ValueError``.
    """
    n = dist.mc_outer if n is None else n
    w = dist.grid.weights
    start = 0
    extra = 0
    while start < n:
        rows = min(_BLOCK, n - start)
        D = _draws(dist, _Z, rows, start) - _draws(dist, _X, rows, start)
        bad = norms(D, w, 2.0) < 1e-12
        while bad.any():
            if extra > 10 * n + 100:
                raise ValueError("differences Y - X are degenerate; J0 needs a nonatomic law")
            k = int(bad.sum())
            R = _draws(dist, _REDRAW, 2 * k, extra)
            D[bad] = R[:k] - R[k:]
            extra += 2 * k
            bad = norms(D, w, 2.0) < 1e-12
        yield D
        start += rows


def hessian_rows(D: np.ndarray, delta: np.ndarray, weights: np.ndarray, p: float,
                 verbatim: bool = False) -> np.ndarray:
    """Per-draw derivative of ``t -> sgn(D + t delta)`` at t = 0.

    With ``verbatim`` the second term uses ``|D|^(p-1)`` without a sign
    factor, as in some printed forms of the formula; kept for comparison.
    """
    nrm = norms(D, weights, p)[:, None]
    a = np.abs(D) / nrm
    if p == 2:
        inner = (D * delta) @ weights
        return (delta[None, :] - D * (inner[:, None] / nrm ** 2)) / nrm
    s = a ** (p - 1)
    if not verbatim:
        s = np.sign(D) * s
    inner = (s * delta) @ weights
    return (p - 1) * (a ** (p - 2) * delta[None, :] - s * inner[:, None]) / nrm


def j0_apply(delta: Curve, dist: DistributionSpec, geom: LpGeometry,
             verbatim: bool = False) -> DualVector:
    w = dist.grid.weights
    dv = np.asarray(delta.values, dtype=float)
    acc = np.zeros(dist.grid.d)
    for D in difference_draws(dist):
        acc += hessian_rows(D, dv, w, geom.p, verbatim).sum(axis=0)
    return DualVector(dist.grid, acc / dist.mc_outer)


def j0_finite_difference(delta: Curve, dist: DistributionSpec, geom: LpGeometry,
                         t: float = 1e-3) -> DualVector:
    """Central difference ``(E sgn(D + t delta) - E sgn(D - t delta)) / 2t`` on
    the same draws of D used by ``j0_apply``."""
    w = dist.grid.weights
    dv = np.asarray(delta.values, dtype=float)
    acc = np.zeros(dist.grid.d)
    for D in difference_draws(dist):
        acc += (signs(D + t * dv, w, geom.p) - signs(D - t * dv, w, geom.p)).sum(axis=0)
    return DualVector(dist.grid, acc / (2 * t * dist.mc_outer))


def _rank_p2(Xo: np.ndarray, Zi: np.ndarray, w: np.ndarray) -> np.ndarray:
    # mean over inner draws of (z - x)/||z - x|| via Gram matrices
    zw = Zi * w
    xw = Xo * w
    sq = np.einsum("ij,ij->i", xw, Xo)[:, None] + np.einsum("ij,ij->i", zw, Zi)[None, :] \
        - 2.0 * xw @ Zi.T
    r = 1.0 / np.sqrt(np.maximum(sq, 1e-300))
    return (r @ Zi - Xo * r.sum(axis=1, keepdims=True)) / Zi.shape[0]


def _rank_general(Xo: np.ndarray, Zi: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    out = np.empty_like(Xo)
    for i in range(Xo.shape[0]):
        out[i] = signs(Zi - Xo[i], w, p).mean(axis=0)
    return out


def population_ranks(dist: DistributionSpec, geom: LpGeometry, side: str = "x"):
    """Two independent inner-pool estimates of the spatial rank at each outer draw.

    ``side="y"`` estimates ``E[sgn(Y - Z) | Y]`` from independent streams.
    """
    w = dist.grid.weights
    half = dist.mc_inner // 2
    base = 0 if side == "x" else 10
    pool = _draws(dist, base + 6, 2 * half)
    ZA, ZB = pool[:half], pool[half:]
    fn = (lambda a, b: _rank_p2(a, b, w)) if geom.p == 2 else \
        (lambda a, b: _rank_general(a, b, w, geom.p))
    WA, WB = [], []
    for start in range(0, dist.mc_outer, 512):
        rows = min(512, dist.mc_outer - start)
        Xo = _draws(dist, base + 7, rows, start)
        WA.append(fn(Xo, ZA))
        WB.append(fn(Xo, ZB))
    WA, WB = np.vstack(WA), np.vstack(WB)
    if side == "y":
        WA, WB = -WA, -WB
    return WA, WB


def gamma1_population(dist: DistributionSpec, geom: LpGeometry, side: str = "x") -> np.ndarray:
    """Covariance of the population spatial rank, inner-noise corrected.

    The two halves of the inner pool give independent estimates W_A, W_B of
    the rank at each outer draw; averaging their cross-products removes the
    inner Monte Carlo variance that a plug-in estimate would add.
    """
    WA, WB = population_ranks(dist, geom, side)
    mA, mB = WA.mean(axis=0), WB.mean(axis=0)
    C = (WA - mA).T @ (WB - mB) / WA.shape[0]
    return 0.5 * (C + C.T)


def gamma1_spectrum(dist: DistributionSpec, geom: LpGeometry, trunc_tol: float = 1e-10
                    ) -> SpectralModel:
    return spectral_decompose(gamma1_population(dist, geom), trunc_tol, dist.grid.weights)


def sigma_population(kl: KlSpec, grid: Grid) -> np.ndarray:
    return covariance_kernel(kl, grid)


def _power(spec: SpectralModel, mean: np.ndarray, weights: np.ndarray, q: float,
           alpha: float, n_mc: int, seed: int, squared: bool = False) -> float:
    """P(||G(mean, C)|| > null quantile) with common draws for null and alternative."""
    if spec.retained == 0:
        raise ValueError("zero spectrum")
    if q == 2:
        coords = spec.eigenvectors @ (weights * mean)
        resid = mean - coords @ spec.eigenvectors
        offset = float(np.sum(weights * resid * resid))
        null = gaussian_norm_draws(spec, n_mc, seed)
        alt = gaussian_norm_draws(spec, n_mc, seed, mean_coords=coords, offset=offset)
    else:
        null = gaussian_norm_draws(spec, n_mc, seed, q=q, weights=weights)
        alt = gaussian_norm_draws(spec, n_mc, seed, q=q, weights=weights, mean_coords=mean)
    crit = mc_quantile(null, alpha)
    return float(np.mean(alt > crit))


def wmw_power_from(j0: DualVector, spec: SpectralModel, geom: LpGeometry, alpha: float = 0.05,
                   n_mc: int = 100_000, seed: int = 0) -> float:
    return _power(spec, np.asarray(j0.coeffs), j0.grid.weights, geom.q, alpha, n_mc, seed)


def asymptotic_power_wmw(delta: Curve, dist: DistributionSpec, geom: LpGeometry,
                         alpha: float = 0.05, n_mc: int = 100_000, seed: int = 0) -> float:
    j0 = j0_apply(delta, dist, geom)
    spec = gamma1_spectrum(dist, geom)
    return wmw_power_from(j0, spec, geom, alpha, n_mc, seed)


def asymptotic_power_cff(delta: Curve, Sigma: np.ndarray, alpha: float = 0.05,
                         n_mc: int = 100_000, seed: int = 0) -> float:
    w = delta.grid.weights
    spec = spectral_decompose(Sigma, 1e-10, w)
    return _power(spec, np.asarray(delta.values), w, 2.0, alpha, n_mc, seed)


def asymptotic_power_hkr(delta: Curve, Sigma: np.ndarray, L: int, alpha: float = 0.05,
                         variant: str = "HKR1", n_mc: int = 100_000, seed: int = 0) -> float:
    if variant not in ("HKR1", "HKR2"):
        raise ValueError("variant must be HKR1 or HKR2")
    w = delta.grid.weights
    spec = spectral_decompose(Sigma, 1e-10, w)
    lam = spec.eigenvalues
    if L < 1 or L >= spec.retained:
        raise ValueError(f"need 1 <= L < {spec.retained} (lambda_(L+1) > 0)")
    gaps = lam[:L] - lam[1:L + 1]
    if np.any(gaps <= 1e-8 * lam[0]):
        raise ValueError("leading eigenvalues must be distinct: "
                         "the HKR limit assumes lambda_1 > ... > lambda_L > lambda_(L+1) > 0")
    beta = spec.eigenvectors[:L] @ (w * np.asarray(delta.values))
    if variant == "HKR2":
        nc = float(np.sum(beta ** 2 / lam[:L]))
        crit = stats.chi2.ppf(1 - alpha, L)
        if nc == 0:
            return float(stats.chi2.sf(crit, L))
        return float(stats.ncx2.sf(crit, L, nc))
    sub = SpectralModel(lam[:L], spec.eigenvectors[:L], L, spec.trunc_tol)
    null = gaussian_norm_draws(sub, n_mc, seed)
    alt = gaussian_norm_draws(sub, n_mc, seed, mean_coords=beta)
    return float(np.mean(alt > mc_quantile(null, alpha)))


def asymptotic_power_curves(dist: DistributionSpec, geom: LpGeometry,
                            shift_kinds=("delta1", "delta2", "delta3"),
                            c_values=(0.0, 1.0, 2.0, 3.0), tests=TESTS,
                            alpha: float = 0.05, n_mc: int = 100_000, seed: int = 0,
                            L: int | None = None, cumvar_threshold: float = 0.85,
                            gamma: float = 0.5) -> list[AsymptoticPowerCurve]:
    """Power curves for each (test, shift kind); J0 is computed once per kind
    at c = 1 and scaled, Gamma_1 and Sigma once overall."""
    from .meantests import select_L

    grid = dist.grid
    w = grid.weights
    calib = derive_seed(seed, STREAM_CALIB)
    need_wmw = "WMW" in tests
    need_mean = any(t in tests for t in ("CFF", "HKR1", "HKR2"))
    g1 = gamma1_spectrum(dist, geom) if need_wmw else None
    Sigma = sigma_population(dist.kl, grid) if need_mean else None
    if need_mean and L is None:
        L = select_L(spectral_decompose(Sigma, 1e-10, w).eigenvalues, cumvar_threshold)
    out = []
    for kind in shift_kinds:
        unit = Curve(grid, ShiftSpec(kind, 1.0).values(grid))
        j0 = j0_apply(unit, dist, geom) if need_wmw else None
        for test in tests:
            powers = []
            for c in c_values:
                if test == "WMW":
                    pw = wmw_power_from(c * j0, g1, geom, alpha, n_mc, calib)
                elif test == "CFF":
                    pw = asymptotic_power_cff(c * unit, Sigma, alpha, n_mc, calib)
                else:
                    pw = asymptotic_power_hkr(c * unit, Sigma, L, alpha, test, n_mc, calib)
                powers.append(pw)
            out.append(AsymptoticPowerCurve(test, kind, tuple(float(c) for c in c_values),
                                            tuple(powers), alpha, gamma))
    return out
