"""Competitor covariance estimators: linear shrinkage and isotonized Stein."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import isotonic_regression
from sklearn.covariance import ledoit_wolf as _sk_ledoit_wolf

from .errors import DegenerateSampleError, NearDegenerateError
from .spectra import SpectralData

__all__ = [
    "BenchmarkEstimate",
    "ledoit_wolf",
    "stein_alpha",
    "stein_raw",
    "stein_pooled",
    "pava_decreasing",
    "stein_isotonized",
    "STEIN_FLOOR",
]

# pooled Stein eigenvalues are floored at this multiple of l_p
STEIN_FLOOR = 1e-8


@dataclass(frozen=True)
class BenchmarkEstimate:
    matrix: NDArray[np.float64]
    method: str
    shrinkage: float | None = None
    floored: int = 0


def ledoit_wolf(x: ArrayLike) -> BenchmarkEstimate:
    """Linear shrinkage of ``S = X^T X / n`` towards ``mu I``, data taken as centred.

    With ``mu = tr(S)/p``, ``d2 = ||S - mu I||^2 / p`` and
    ``b2 = min(d2, n^-2 sum_i ||x_i x_i^T - S||^2 / p)``, the estimate is
    ``(b2/d2) mu I + (1 - b2/d2) S``. ``shrinkage`` reports ``b2/d2``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected an (n, p) data matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise DegenerateSampleError(f"need at least 2 observations, got {x.shape[0]}")
    est, w = _sk_ledoit_wolf(x, assume_centered=True)
    return BenchmarkEstimate(0.5 * (est + est.T), "ledoit-wolf", float(w))


def stein_alpha(l: ArrayLike, n: int) -> NDArray[np.float64]:
    """Stein's denominators ``alpha_k = (n - p + 1 + 2 l_k sum_{b != k} 1/(l_k - l_b)) / n``.

    They always sum to ``p``.
    """
    l = np.asarray(l, dtype=np.float64)
    p = l.shape[0]
    diff = l[:, None] - l[None, :]
    np.fill_diagonal(diff, np.inf)
    if np.any(diff == 0):
        raise NearDegenerateError("tied eigenvalues")
    cross = np.sum(1.0 / diff, axis=1)
    return (n - p + 1 + 2.0 * l * cross) / n


def stein_raw(l: ArrayLike, n: int) -> NDArray[np.float64]:
    """``phi_k = n l_k / (n - p + 1 + 2 l_k sum_{b != k} 1/(l_k - l_b))``."""
    l = np.asarray(l, dtype=np.float64)
    return l / stein_alpha(l, n)


def pava_decreasing(y: ArrayLike, w: ArrayLike | None = None) -> NDArray[np.float64]:
    """Weighted least-squares fit of ``y`` by a nonincreasing sequence (pool adjacent violators)."""
    return np.asarray(isotonic_regression(np.asarray(y, dtype=np.float64), weights=w, increasing=False).x)


def stein_pooled(l: ArrayLike, n: int) -> NDArray[np.float64]:
    """Isotonized Stein eigenvalues.

    Blocks of ``(l, alpha)`` pairs are first merged until every pooled
    ``alpha`` is positive, a nonpositive block joining the block above it
    (the one below for the first block). The ratios ``l / alpha`` are then
    made nonincreasing by pool adjacent violators with weights ``alpha``,
    so a pooled block takes the value ``sum l / sum alpha``.
    """
    l = np.asarray(l, dtype=np.float64)
    alpha = stein_alpha(l, n)
    sums_l = list(l)
    sums_a = list(alpha)
    sizes = [1] * l.shape[0]
    while True:
        bad = next((i for i, a in enumerate(sums_a) if a <= 0), None)
        if bad is None:
            break
        j = bad - 1 if bad > 0 else bad + 1
        lo, hi = min(bad, j), max(bad, j)
        sums_l[lo] += sums_l.pop(hi)
        sums_a[lo] += sums_a.pop(hi)
        sizes[lo] += sizes.pop(hi)
    sums_l_arr = np.array(sums_l)
    sums_a_arr = np.array(sums_a)
    fitted = pava_decreasing(sums_l_arr / sums_a_arr, sums_a_arr)
    return np.repeat(fitted, sizes)


def stein_isotonized(spec: SpectralData) -> BenchmarkEstimate:
    """Stein's eigenvalue correction, pooled to be nonincreasing and floored positive."""
    if spec.eigenvectors is None:
        raise ValueError("the estimate needs the eigenvectors")
    if spec.near_degenerate:
        raise NearDegenerateError("spectrum is near-degenerate")
    l = spec.eigenvalues
    phi = stein_pooled(l, spec.n)
    floor = STEIN_FLOOR * l[-1]
    low = phi < floor
    phi = np.where(low, floor, phi)
    o = spec.eigenvectors
    est = (o * phi) @ o.T
    return BenchmarkEstimate(0.5 * (est + est.T), "stein-isotonized", None, int(np.sum(low)))
