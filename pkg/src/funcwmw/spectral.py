"""Spectral models of covariance operators and Gaussian-norm calibration.

A covariance of dual vectors (or of curves) is held as a symmetric matrix
``M`` of coefficient covariances. Against grid weights ``w`` the operator it
represents is ``M W``; its eigenpairs are found from ``W^(1/2) M W^(1/2)``
and the eigenvectors are mapped back so that they are orthonormal in the
weighted inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import normal_chunks
from .fspace import norms


@dataclass(frozen=True, eq=False)
class SpectralModel:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)  # (retained, d), rows weighted-orthonormal
    retained: int
    trunc_tol: float
    discarded: float = 0.0  # sum of |eigenvalues| that were dropped

    @classmethod
    def empty(cls, d: int, trunc_tol: float = 1e-10) -> "SpectralModel":
        return cls(np.zeros(0), np.zeros((0, d)), 0, trunc_tol)

    def summary(self, top: int = 10) -> dict:
        return {
            "retained": self.retained,
            "trunc_tol": self.trunc_tol,
            "eigenvalues": [float(v) for v in self.eigenvalues[:top]],
            "trace": float(self.eigenvalues.sum()),
        }


def _orient(vecs: np.ndarray) -> np.ndarray:
    # make the largest-magnitude coordinate of each row positive
    if vecs.size == 0:
        return vecs
    idx = np.argmax(np.abs(vecs), axis=1)
    s = np.sign(vecs[np.arange(vecs.shape[0]), idx])
    s[s == 0] = 1.0
    return vecs * s[:, None]


def _build(vals: np.ndarray, vecs_w: np.ndarray, weights: np.ndarray,
           trunc_tol: float) -> SpectralModel:
    # vals descending, vecs_w columns orthonormal in the euclidean sense
    top = vals[0] if vals.size else 0.0
    if top <= 0:
        return SpectralModel(np.zeros(0), np.zeros((0, weights.size)), 0, trunc_tol,
                             float(np.abs(vals).sum()))
    keep = vals > trunc_tol * top
    r = int(keep.sum())
    psi = (vecs_w[:, :r] / np.sqrt(weights)[:, None]).T
    return SpectralModel(vals[:r].copy(), _orient(psi), r, trunc_tol,
                         float(np.abs(vals[r:]).sum()))


def spectral_decompose(M: np.ndarray, trunc_tol: float = 1e-10,
                       weights: np.ndarray | None = None) -> SpectralModel:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    d = M.shape[0]
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w)
    S = sw[:, None] * (0.5 * (M + M.T)) * sw[None, :]
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals)[::-1]
    return _build(vals[order], vecs[:, order], w, trunc_tol)


def spectral_from_factor(A: np.ndarray, trunc_tol: float = 1e-10,
                         weights: np.ndarray | None = None) -> SpectralModel:
    """Spectral model of ``M = A^T A`` without forming the d x d matrix."""
    A = np.asarray(A, dtype=float)
    d = A.shape[1]
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=float)
    B = A * np.sqrt(w)[None, :]
    if B.shape[0] == 0:
        return SpectralModel.empty(d, trunc_tol)
    _, s, vt = np.linalg.svd(B, full_matrices=False)
    return _build(s ** 2, vt.T, w, trunc_tol)


def reconstruct(spec: SpectralModel, weights: np.ndarray | None = None) -> np.ndarray:
    """Coefficient covariance ``sum_k lambda_k psi_k psi_k^T``."""
    return (spec.eigenvectors.T * spec.eigenvalues) @ spec.eigenvectors


def gaussian_norm_draws(spec: SpectralModel, n_mc: int, seed: int,
                        q: float = 2.0, weights: np.ndarray | None = None,
                        mean_coords: np.ndarray | None = None,
                        offset: float = 0.0) -> np.ndarray:
    """Monte Carlo draws of the norm of a Gaussian element with the given spectrum.

    For ``q == 2`` the element is represented by its coordinates in the
    eigenbasis, ``a_k + sqrt(lambda_k) z_k``, and the squared norm is their
    sum of squares plus ``offset`` (the squared mean mass outside the
    retained span). For ``q != 2`` the element is synthesized on the grid and
    its weighted q-norm is taken; ``mean_coords`` is then a full grid vector.
    """
    k = spec.retained
    if weights is None:
        weights = np.ones(spec.eigenvectors.shape[1])
    out = np.empty(n_mc)
    if k == 0:
        base = np.sqrt(offset) if q == 2 else 0.0
        if q != 2 and mean_coords is not None:
            base = float(norms(mean_coords, weights, q))
        out.fill(base)
        return out
    sl = np.sqrt(spec.eigenvalues)
    pos = 0
    for z in normal_chunks(seed, n_mc, k):
        rows = z.shape[0]
        if q == 2:
            g = z * sl
            if mean_coords is not None:
                g += mean_coords
            out[pos:pos + rows] = np.sqrt(np.einsum("ij,ij->i", g, g) + offset)
        else:
            g = (z * sl) @ spec.eigenvectors
            if mean_coords is not None:
                g += mean_coords
            out[pos:pos + rows] = norms(g, weights, q)
        pos += rows
    return out


def mc_quantile(draws: np.ndarray, alpha: float) -> float:
    return float(np.quantile(draws, 1.0 - alpha))


def mc_pvalue(draws: np.ndarray, statistic: float) -> float:
    """Add-one Monte Carlo p-value."""
    return (int(np.count_nonzero(draws >= statistic)) + 1) / (draws.size + 1)


def weighted_chisq_norm_quantile(spectral: SpectralModel, alpha: float,
                                 n_mc: int = 100_000, seed: int = 0) -> float:
    """(1 - alpha)-quantile of ``sqrt(sum_k lambda_k z_k^2)``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n_mc < 1000:
        raise ValueError("n_mc must be >= 1000")
    if spectral.retained == 0:
        return 0.0
    return mc_quantile(gaussian_norm_draws(spectral, n_mc, seed), alpha)
