"""Unbiased estimator of Haff risk for orthogonally invariant estimators.

An estimator ``O diag(psi) O^T`` is described by its eigenvalue map
``l -> psi(l)``. The unbiased risk estimate splits as ``F + G``: ``F`` uses
only the values ``psi_k``, while ``G`` collects every term carrying a
derivative of ``psi``.

All pairwise and triple sums are evaluated in ``O(p^2)`` through the
divided-difference matrix ``D_kb = (psi_k - psi_b) / (l_k - l_b)`` and its
row sums ``s_k``, using

    sum_{k != b != e} D_kb D_ke = sum_k (s_k^2 - sum_b D_kb^2)
    sum_{k != b != e} psi_k / (l_k - l_b) * (D_ke - D_be) = sum_{k != b} psi_k (s_k - s_b) / (l_k - l_b)

where triple sums run over pairwise distinct indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NearDegenerateError, RegimeError, ShapeError
from .spectra import SpectralData

__all__ = [
    "EstimatorProfile",
    "UreValue",
    "DEFAULT_STEP",
    "DEFAULT_STEP2",
    "psi_from",
    "profile_finite_difference",
    "evaluate_F",
    "evaluate_G",
    "evaluate_ure",
    "ure_F",
    "ure_G",
    "haff_loss",
    "frobenius_loss",
]

# Relative step for first derivatives, about the cube root of machine epsilon.
DEFAULT_STEP = 4e-6
# Relative step for second derivatives, about the fourth root of machine epsilon.
DEFAULT_STEP2 = 1e-4

Estimator = Callable[[NDArray[np.float64]], tuple[ArrayLike, ArrayLike]]


@dataclass(frozen=True)
class EstimatorProfile:
    """Eigenvalue map of a spiked estimator and its derivatives at one spectrum.

    ``jacobian[k, b]`` is ``d psi_k / d l_b`` and ``second_diag[k]`` is
    ``d^2 psi_k / d l_k^2``.
    """

    psi: NDArray[np.float64]
    jacobian: NDArray[np.float64]
    second_diag: NDArray[np.float64]
    rho_hat: int

    @classmethod
    def constant_derivatives(cls, psi: ArrayLike, rho_hat: int = 0) -> "EstimatorProfile":
        psi = np.asarray(psi, dtype=np.float64)
        p = psi.shape[0]
        return cls(psi, np.zeros((p, p)), np.zeros(p), rho_hat)


@dataclass(frozen=True)
class UreValue:
    f: float
    g: float

    @property
    def total(self) -> float:
        return self.f + self.g


def psi_from(gammas: ArrayLike, sigma2: ArrayLike, p: int) -> NDArray[np.float64]:
    """Eigenvalues ``gamma_k + sigma2`` padded with ``sigma2`` up to length ``p``.

    Broadcasts over a leading batch axis.
    """
    g = np.asarray(gammas, dtype=np.float64)
    s2 = np.asarray(sigma2, dtype=np.float64)
    batch = g.shape[:-1] if g.ndim else ()
    out = np.empty(batch + (p,))
    out[...] = s2[..., None]
    r = g.shape[-1] if g.ndim else 0
    out[..., :r] += g
    return out


def _steps(l: NDArray[np.float64], rel: float) -> NDArray[np.float64]:
    h = rel * np.maximum(l, l[-1])
    gaps = np.full(l.shape[0] + 1, np.inf)
    gaps[1:-1] = l[:-1] - l[1:]
    gaps[-1] = l[-1]
    # a perturbed eigenvalue must stay strictly inside its neighbours
    room = 0.25 * np.minimum(gaps[:-1], gaps[1:])
    h = np.minimum(h, room)
    if np.any(h <= 1e-13 * np.abs(l)):
        raise NearDegenerateError("eigenvalues too close for an order-preserving finite difference")
    return h


def profile_finite_difference(
    estimator: Estimator,
    spec: SpectralData,
    step: float = DEFAULT_STEP,
    step2: float = DEFAULT_STEP2,
    batched: bool = False,
) -> EstimatorProfile:
    """Central-difference profile of ``estimator`` at the spectrum of ``spec``.

    ``estimator`` maps a decreasing spectrum to ``(gammas, sigma2)``. With
    ``batched=True`` it receives an ``(m, p)`` stack of spectra and returns
    ``(m, rank)`` gammas and ``(m,)`` noise values, which lets the whole
    stencil be evaluated in one call.
    """
    l = np.asarray(spec.eigenvalues, dtype=np.float64)
    p = l.shape[0]
    h1 = _steps(l, step)
    h2 = _steps(l, step2)
    eye = np.eye(p)
    points = np.vstack([l[None, :], l + h1[:, None] * eye, l - h1[:, None] * eye,
                        l + h2[:, None] * eye, l - h2[:, None] * eye,
                        l + 0.5 * h2[:, None] * eye, l - 0.5 * h2[:, None] * eye])
    if batched:
        gam, s2 = estimator(points)
        gam = np.asarray(gam, dtype=np.float64).reshape(points.shape[0], -1)
        s2 = np.asarray(s2, dtype=np.float64).reshape(points.shape[0])
        psis = psi_from(gam, s2, p)
        rho_hat = gam.shape[1]
    else:
        rows = []
        rho_hat = None
        for pt in points:
            g, s = estimator(pt)
            g = np.atleast_1d(np.asarray(g, dtype=np.float64))
            if rho_hat is None:
                rho_hat = g.shape[0]
            elif g.shape[0] != rho_hat:
                raise ShapeError("estimator changed its rank inside the finite-difference stencil")
            rows.append(psi_from(g, float(s), p))
        psis = np.vstack(rows)
    psi0 = psis[0]
    plus1, minus1 = psis[1 : p + 1], psis[p + 1 : 2 * p + 1]
    plus2, minus2 = psis[2 * p + 1 : 3 * p + 1], psis[3 * p + 1 : 4 * p + 1]
    plus3, minus3 = psis[4 * p + 1 : 5 * p + 1], psis[5 * p + 1 :]
    # row b of plus1 is psi evaluated at l + h_b e_b, so column b of the Jacobian
    jac = ((plus1 - minus1) / (2.0 * h1[:, None])).T
    idx = np.arange(p)
    coarse = (plus2[idx, idx] - 2.0 * psi0 + minus2[idx, idx]) / h2**2
    fine = (plus3[idx, idx] - 2.0 * psi0 + minus3[idx, idx]) / (0.5 * h2) ** 2
    # Richardson extrapolation cancels the h^2 truncation term
    second = (4.0 * fine - coarse) / 3.0
    return EstimatorProfile(psi0, jac, second, int(rho_hat or 0))


def _check(spec: SpectralData, psi: NDArray[np.float64]) -> None:
    if spec.n < spec.p + 1:
        raise RegimeError(f"risk estimate needs n >= p + 1, got n={spec.n}, p={spec.p}")
    if spec.near_degenerate:
        raise NearDegenerateError("spectrum is near-degenerate")
    if psi.shape != (spec.p,):
        raise ShapeError(f"psi has shape {psi.shape}, expected ({spec.p},)")


def _divided(l: NDArray[np.float64], psi: NDArray[np.float64]):
    diff = l[:, None] - l[None, :]
    np.fill_diagonal(diff, np.inf)
    inv = 1.0 / diff
    d = (psi[:, None] - psi[None, :]) * inv
    return inv, d, d.sum(axis=1)


def ure_F(l: NDArray[np.float64], n: int, psi: NDArray[np.float64]) -> float:
    """Dominant part of the risk estimate; depends on ``psi`` values only."""
    p = l.shape[0]
    inv, d, s = _divided(l, psi)
    r = psi / l
    a = (n - p - 1) / (n * n * p)
    total = (
        a * (n - p - 2) * np.sum(r * r)
        - a * np.sum(r) ** 2
        + 4.0 * a * np.dot(r, s)
        + 2.0 / (n * n * p) * (np.dot(s, s) - np.sum(d * d))
        + 2.0 / (n * n * p) * np.sum(psi[:, None] * (s[:, None] - s[None, :]) * inv)
        - 2.0 * (n - p - 1) / (n * p) * np.sum(r)
        - 2.0 / (n * p) * np.sum(s)
    )
    return float(total + 1.0)


def ure_G(
    l: NDArray[np.float64],
    n: int,
    psi: NDArray[np.float64],
    jacobian: NDArray[np.float64],
    second_diag: NDArray[np.float64],
) -> float:
    """Dominated part of the risk estimate; every term has a derivative factor."""
    p = l.shape[0]
    inv, _, s = _divided(l, psi)
    dk = np.diag(jacobian)
    c = 1.0 / (n * n * p)
    total = (
        8.0 * c * np.dot(dk, dk)
        + 8.0 * c * np.dot(psi, second_diag)
        + 8.0 * (n - p - 1) * c * np.dot(psi / l, dk)
        + 8.0 * c * np.dot(dk, s)
        + 4.0 * c * np.sum(psi[:, None] * (dk[:, None] - dk[None, :]) * inv)
        # jacobian.T[k, b] = d psi_b / d l_k
        + 4.0 * c * np.sum(psi[:, None] * (dk[:, None] - jacobian.T) * inv)
        - 4.0 / (n * p) * np.sum(dk)
    )
    return float(total)


def evaluate_F(spec: SpectralData, profile: EstimatorProfile) -> float:
    psi = np.asarray(profile.psi, dtype=np.float64)
    _check(spec, psi)
    return ure_F(spec.eigenvalues, spec.n, psi)


def evaluate_G(spec: SpectralData, profile: EstimatorProfile) -> float:
    psi = np.asarray(profile.psi, dtype=np.float64)
    _check(spec, psi)
    return ure_G(spec.eigenvalues, spec.n, psi, np.asarray(profile.jacobian), np.asarray(profile.second_diag))


def evaluate_ure(spec: SpectralData, profile: EstimatorProfile) -> UreValue:
    return UreValue(evaluate_F(spec, profile), evaluate_G(spec, profile))


def haff_loss(estimate: ArrayLike, truth: ArrayLike) -> float:
    """Invariant quadratic loss ``tr((estimate truth^-1 - I)^2) / p``.

    Equal to ``||truth^-1/2 estimate truth^-1/2 - I||_F^2 / p``, so it only
    depends on the estimate relative to the truth. Solves against ``truth``.
    """
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 2:
        raise ShapeError(f"shape mismatch {est.shape} vs {tru.shape}")
    p = est.shape[0]
    # truth^-1 estimate is similar to estimate truth^-1, so the traces agree
    m = np.linalg.solve(tru, est) - np.eye(p)
    return float(np.sum(m * m.T) / p)


def frobenius_loss(estimate: ArrayLike, truth: ArrayLike) -> float:
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 2:
        raise ShapeError(f"shape mismatch {est.shape} vs {tru.shape}")
    diff = est - tru
    return float(np.sum(diff * diff) / est.shape[0])
