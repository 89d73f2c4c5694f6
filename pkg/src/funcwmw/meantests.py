"""Mean-based competitors: the L2 norm statistic T_CFF and the two projection
statistics T_HKR1, T_HKR2 built on the pooled covariance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .fspace import Sample, _check_grid
from .spectral import SpectralModel, gaussian_norm_draws, mc_pvalue, spectral_from_factor

MEAN_TESTS = ("CFF", "HKR1", "HKR2")


@dataclass(frozen=True, eq=False)
class PooledSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # rows, weighted-orthonormal
    L: int
    cumvar_threshold: float


@dataclass(frozen=True)
class MeanTestResult:
    which: str
    statistic: float
    p_value: float
    reject: bool
    L: int
    alpha: float
    n_mc: int = 0
    seed: int = 0

    def asdict(self) -> dict:
        return {"test": self.which, "statistic": self.statistic, "p_value": self.p_value,
                "reject": self.reject, "L": self.L, "alpha": self.alpha,
                "mc_draws": self.n_mc, "seed": self.seed}


def _mean_diff(X: Sample, Y: Sample) -> np.ndarray:
    _check_grid(X.grid, Y.grid)
    return X.values.mean(axis=0) - Y.values.mean(axis=0)


def t_cff(X: Sample, Y: Sample, geom=None) -> float:
    if geom is not None and geom.p != 2:
        raise ValueError("T_CFF is defined for p = 2")
    v = _mean_diff(X, Y)
    return float(X.size * np.sum(X.grid.weights * v * v))


def _pooled_factor(X: Sample, Y: Sample) -> np.ndarray:
    N = X.size + Y.size
    if N < 3:
        raise ValueError("pooled covariance needs at least 3 curves")
    C = np.vstack([X.values - X.values.mean(axis=0), Y.values - Y.values.mean(axis=0)])
    return C / np.sqrt(N - 2)


def pooled_covariance(X: Sample, Y: Sample) -> np.ndarray:
    _check_grid(X.grid, Y.grid)
    A = _pooled_factor(X, Y)
    return A.T @ A


def pooled_spectrum(X: Sample, Y: Sample, trunc_tol: float = 1e-10) -> SpectralModel:
    _check_grid(X.grid, Y.grid)
    return spectral_from_factor(_pooled_factor(X, Y), trunc_tol, X.grid.weights)


def select_L(eigenvalues, cumvar_threshold: float = 0.85) -> int:
    lam = np.asarray(eigenvalues, dtype=float)
    lam = lam[lam > 0]
    if lam.size == 0:
        raise ValueError("spectrum has no positive eigenvalue")
    if not 0 < cumvar_threshold <= 1:
        raise ValueError("cumvar_threshold must lie in (0, 1]")
    share = np.cumsum(lam) / lam.sum()
    # guard the threshold against round-off in the cumulative sum
    hit = np.nonzero(share >= cumvar_threshold - 1e-12)[0]
    return int(hit[0] + 1) if hit.size else int(lam.size)


def _projections(v: np.ndarray, spec: SpectralModel, weights: np.ndarray, L: int) -> np.ndarray:
    if L < 1:
        raise ValueError("L must be >= 1")
    if L > spec.retained:
        raise ValueError(f"L={L} exceeds the positive rank {spec.retained} of the pooled covariance")
    return spec.eigenvectors[:L] @ (weights * v)


def t_hkr(X: Sample, Y: Sample, L: int, spec: SpectralModel | None = None) -> tuple[float, float]:
    spec = spec or pooled_spectrum(X, Y)
    proj = _projections(_mean_diff(X, Y), spec, X.grid.weights, L)
    sq = proj ** 2
    return float(sq.sum()), float(np.sum(sq / spec.eigenvalues[:L]))


def mean_tests(X: Sample, Y: Sample, which=MEAN_TESTS, alpha: float = 0.05,
               L: int | None = None, cumvar_threshold: float = 0.85,
               n_mc: int = 100_000, seed: int = 0, trunc_tol: float = 1e-10
               ) -> dict[str, MeanTestResult]:
    """Run any of CFF, HKR1, HKR2 sharing one pooled spectrum.

    Null laws: ``(n/N) T_CFF`` against ``sum_k lambda_k z_k^2`` over the whole
    pooled spectrum; ``(mn/N) T_HKR1`` against the same sum over k <= L;
    ``(mn/N) T_HKR2`` against chi-square with L degrees of freedom.
    """
    for w in which:
        if w not in MEAN_TESTS:
            raise ValueError(f"unknown mean test {w!r}")
    m, n = X.size, Y.size
    N = m + n
    spec = pooled_spectrum(X, Y, trunc_tol)
    v = _mean_diff(X, Y)
    wts = X.grid.weights
    out = {}
    if "CFF" in which:
        stat = float(m * np.sum(wts * v * v))
        if spec.retained == 0:
            pval = 1.0
        else:
            draws = gaussian_norm_draws(spec, n_mc, seed) ** 2
            pval = mc_pvalue(draws, n / N * stat)
        out["CFF"] = MeanTestResult("CFF", stat, pval, pval <= alpha, 0, alpha, n_mc, int(seed))
    if "HKR1" in which or "HKR2" in which:
        if spec.retained == 0:
            raise ValueError("pooled covariance is zero; HKR statistics undefined")
        L_used = L if L is not None else select_L(spec.eigenvalues, cumvar_threshold)
        proj = _projections(v, spec, wts, L_used)
        sq = proj ** 2
        h1, h2 = float(sq.sum()), float(np.sum(sq / spec.eigenvalues[:L_used]))
        scale = m * n / N
        if "HKR1" in which:
            sub = SpectralModel(spec.eigenvalues[:L_used], spec.eigenvectors[:L_used],
                                L_used, spec.trunc_tol)
            draws = gaussian_norm_draws(sub, n_mc, seed) ** 2
            pval = mc_pvalue(draws, scale * h1)
            out["HKR1"] = MeanTestResult("HKR1", h1, pval, pval <= alpha, L_used, alpha,
                                         n_mc, int(seed))
        if "HKR2" in which:
            pval = float(stats.chi2.sf(scale * h2, L_used))
            out["HKR2"] = MeanTestResult("HKR2", h2, pval, pval <= alpha, L_used, alpha, 0,
                                         int(seed))
    return out


def mean_test_pvalues(X: Sample, Y: Sample, which: str, alpha: float = 0.05,
                      L: int | None = None, cumvar_threshold: float = 0.85,
                      n_mc: int = 100_000, seed: int = 0) -> MeanTestResult:
    return mean_tests(X, Y, (which,), alpha, L, cumvar_threshold, n_mc, seed)[which]
