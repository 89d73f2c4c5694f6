"""Spatial-rank Wilcoxon-Mann-Whitney test for two samples of curves.

The statistic is the average spatial sign of all pairwise differences
``Y_j - X_i``. Its null law is approximated by the norm of a centered
Gaussian element. Three estimators of that Gaussian's covariance are
available:

``pooled_rank`` (default)
    Covariance of the spatial ranks of all N curves within the pooled
    sample, times (N - 1)/N. Because ``mn T = sum over Y of pooled ranks``,
    this is the exact covariance of ``(mn/N)^(1/2) T`` over relabelings of
    the pooled curves, so it does not react to the observed group split.
``pooled``
    ``(1 - m/N) G1 + (m/N) G2`` with G1, G2 the covariances of the Hoeffding
    projections U_i, V_j about T.
``x_only``
    G1 alone.

The projection estimators are liberal at small m and n because they shrink
exactly when the two groups happen to separate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fspace import DualVector, LpGeometry, Sample, _check_grid, norms, signs
from .spectral import (
    SpectralModel,
    gaussian_norm_draws,
    mc_pvalue,
    mc_quantile,
    spectral_decompose,
    spectral_from_factor,
    weighted_chisq_norm_quantile,
)

GAMMA_MODES = ("pooled_rank", "pooled", "x_only")

__all__ = [
    "SpectralModel",
    "WmwTestResult",
    "gamma1_hat",
    "hoeffding_projections",
    "pair_signs",
    "pooled_ranks",
    "spectral_decompose",
    "t_wmw",
    "weighted_chisq_norm_quantile",
    "wmw_test",
]


def pair_signs(X: Sample, Y: Sample, geom: LpGeometry) -> np.ndarray:
    """``(m, n, d)`` array of sgn(Y_j - X_i)."""
    _check_grid(X.grid, Y.grid)
    diffs = Y.values[None, :, :] - X.values[:, None, :]
    return signs(diffs, X.grid.weights, geom.p)


def t_wmw(X: Sample, Y: Sample, geom: LpGeometry) -> DualVector:
    return DualVector(X.grid, pair_signs(X, Y, geom).mean(axis=(0, 1)))


def hoeffding_projections(X: Sample, Y: Sample, geom: LpGeometry
                          ) -> tuple[list[DualVector], list[DualVector]]:
    """Empirical projections ``U_i = mean_j sgn(Y_j - X_i)`` and
    ``V_j = mean_i sgn(Y_j - X_i)``."""
    S = pair_signs(X, Y, geom)
    g = X.grid
    return ([DualVector(g, u) for u in S.mean(axis=1)],
            [DualVector(g, v) for v in S.mean(axis=0)])


def pooled_ranks(X: Sample, Y: Sample, geom: LpGeometry) -> list[DualVector]:
    """Spatial rank of every curve within the pooled sample,
    ``r_k = (N - 1)^(-1) sum_l sgn(z_k - z_l)``; X curves first."""
    _check_grid(X.grid, Y.grid)
    return [DualVector(X.grid, r) for r in _pooled_rank_array(
        np.vstack([X.values, Y.values]), X.grid.weights, geom.p)]


def _pooled_rank_array(Z: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    N = Z.shape[0]
    out = np.empty_like(Z)
    # row blocks keep the (rows, N, d) sign array small for large N
    step = max(1, 2_000_000 // max(1, N * Z.shape[1]))
    for lo in range(0, N, step):
        blk = Z[lo:lo + step]
        out[lo:lo + step] = signs(blk[:, None, :] - Z[None, :, :], weights, p).sum(axis=1)
    return out / (N - 1)


def gamma1_hat(projections, center: DualVector, grid_weights=None) -> np.ndarray:
    """Plug-in covariance (divisor = number of projections) of the
    projection coefficients about ``center``.

    ``grid_weights`` is accepted for interface symmetry; the returned matrix
    holds coefficient covariances and the weighting enters when it is
    decomposed.
    """
    P = np.stack([f.coeffs for f in projections]) if not isinstance(projections, np.ndarray) \
        else np.asarray(projections, dtype=float)
    if P.shape[0] < 2:
        raise ValueError("need at least 2 projections")
    C = P - np.asarray(getattr(center, "coeffs", center), dtype=float)
    M = C.T @ C / P.shape[0]
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class WmwTestResult:
    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    alpha: float
    m: int
    n: int
    gamma_hat: float
    spectral: SpectralModel
    mc_draws: int
    seed: int
    p: float = 2.0
    gamma_mode: str = "pooled_rank"

    def asdict(self) -> dict:
        return {
            "test": "WMW",
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "m": self.m,
            "n": self.n,
            "gamma_hat": self.gamma_hat,
            "p": self.p,
            "gamma_mode": self.gamma_mode,
            "mc_draws": self.mc_draws,
            "seed": self.seed,
            "spectrum": self.spectral.summary(),
        }


def null_spectrum(X: Sample, Y: Sample, geom: LpGeometry, gamma_mode: str = "pooled_rank",
                  trunc_tol: float = 1e-10) -> tuple[np.ndarray, SpectralModel]:
    """``(T_WMW coefficients, spectrum of the estimated null covariance)``."""
    if gamma_mode not in GAMMA_MODES:
        raise ValueError(f"gamma_mode must be one of {GAMMA_MODES}")
    weights = X.grid.weights
    m, n = X.size, Y.size
    N = m + n
    if gamma_mode == "pooled_rank":
        r = _pooled_rank_array(np.vstack([X.values, Y.values]), weights, geom.p)
        T = r[m:].sum(axis=0) * ((N - 1) / (m * n))
        return T, spectral_from_factor(r * np.sqrt((N - 1) / N ** 2), trunc_tol, weights)
    S = pair_signs(X, Y, geom)
    T = S.mean(axis=(0, 1))
    U = S.mean(axis=1) - T
    if gamma_mode == "x_only":
        return T, spectral_from_factor(U / np.sqrt(m), trunc_tol, weights)
    V = S.mean(axis=0) - T
    g = m / N
    A = np.vstack([U * np.sqrt((1 - g) / m), V * np.sqrt(g / n)])
    return T, spectral_from_factor(A, trunc_tol, weights)


def wmw_test(X: Sample, Y: Sample, geom: LpGeometry | None = None, alpha: float = 0.05,
             n_mc: int = 100_000, seed: int = 0, gamma_mode: str = "pooled_rank",
             trunc_tol: float = 1e-10) -> WmwTestResult:
    geom = geom or LpGeometry()
    _check_grid(X.grid, Y.grid)
    m, n = X.size, Y.size
    if m < 2 or n < 2:
        raise ValueError("each sample needs at least 2 curves")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    w = X.grid.weights
    T, spec = null_spectrum(X, Y, geom, gamma_mode, trunc_tol)
    stat = float(np.sqrt(m * n / (m + n)) * norms(T, w, geom.q))
    if spec.retained == 0:
        crit, pval = 0.0, 1.0
    else:
        draws = gaussian_norm_draws(spec, n_mc, seed, q=geom.q, weights=w)
        crit = mc_quantile(draws, alpha)
        pval = mc_pvalue(draws, stat)
    return WmwTestResult(
        statistic=stat, critical_value=crit, p_value=pval, reject=bool(stat > crit),
        alpha=alpha, m=m, n=n, gamma_hat=m / (m + n), spectral=spec, mc_draws=n_mc,
        seed=int(seed), p=geom.p, gamma_mode=gamma_mode,
    )
