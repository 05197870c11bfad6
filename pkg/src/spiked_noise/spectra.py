"""Decreasing spectral decomposition of a sample covariance matrix."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DegenerateSampleError,
    DegenerateSpectrumError,
    NearDegenerateWarning,
    RankError,
    ShapeError,
)

__all__ = ["SpectralData", "decompose", "trailing_mean", "GAP_TOLERANCE", "SYMMETRY_TOLERANCE"]

# Relative gap (to l_1) below which a spectrum is flagged as near-degenerate.
GAP_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues ``l_1 >= ... >= l_p > 0`` and matching eigenvectors of ``S``.

    ``eigenvectors`` may be ``None`` when only the spectrum is known; the
    risk functionals never look at the basis.
    """

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64] | None
    n: int
    near_degenerate: bool = False
    min_gap: float = np.inf

    @property
    def p(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def aspect_ratio(self) -> float:
        return self.p / self.n

    @classmethod
    def from_eigenvalues(cls, eigenvalues: ArrayLike, n: int) -> "SpectralData":
        """Wrap a bare spectrum; sorted decreasing and checked like ``decompose``."""
        l = np.sort(np.asarray(eigenvalues, dtype=np.float64))[::-1].copy()
        if l.size == 0:
            raise ShapeError("empty spectrum")
        if l[-1] <= 0:
            raise DegenerateSpectrumError(f"smallest eigenvalue {l[-1]:.3g} is not positive")
        gap, flag = _gap_check(l)
        return cls(l, None, int(n), flag, gap)

    def matrix(self) -> NDArray[np.float64]:
        if self.eigenvectors is None:
            raise ValueError("spectrum-only data carries no basis")
        o = self.eigenvectors
        return (o * self.eigenvalues) @ o.T


def _gap_check(l: NDArray[np.float64]) -> tuple[float, bool]:
    if l.size < 2:
        return np.inf, False
    gap = float(np.min(l[:-1] - l[1:]))
    return gap, gap < GAP_TOLERANCE * l[0]


def decompose(s: ArrayLike, n: int) -> SpectralData:
    """Full symmetric eigendecomposition of ``s`` with eigenvalues descending.

    Each eigenvector column is signed so its largest-magnitude entry is
    positive. Nearly tied eigenvalues do not raise; they set
    ``near_degenerate`` and emit :class:`NearDegenerateWarning`.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
        raise ShapeError(f"expected a non-empty square matrix, got shape {s.shape}")
    p = s.shape[0]
    if n < p:
        raise DegenerateSampleError(f"need n >= p, got n={n}, p={p}")
    scale = float(np.max(np.abs(s)))
    if float(np.max(np.abs(s - s.T))) > SYMMETRY_TOLERANCE * max(scale, 1e-300):
        raise ShapeError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (s + s.T))
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    if vals[-1] <= 0:
        raise DegenerateSpectrumError(f"smallest eigenvalue {vals[-1]:.3g} is not positive")
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(p)])
    signs[signs == 0] = 1.0
    vecs *= signs
    gap, flag = _gap_check(vals)
    if flag:
        warnings.warn(
            f"eigenvalue gap {gap:.3g} below {GAP_TOLERANCE:g} * l_1; divided differences are unreliable",
            NearDegenerateWarning,
            stacklevel=2,
        )
    return SpectralData(vals, vecs, int(n), flag, gap)


def trailing_mean(spec: SpectralData, r: int) -> float:
    """Mean of ``l_{r+1}, ..., l_p`` (1-based), i.e. of the eigenvalues past rank ``r``."""
    if not 0 <= r < spec.p:
        raise RankError(f"rank must satisfy 0 <= r < p={spec.p}, got {r}")
    return float(np.mean(spec.eigenvalues[r:]))
