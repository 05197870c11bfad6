"""Spiked covariance estimator with data-driven rank selection.

For a candidate rank ``r`` the spikes are estimated by

    gamma_k = T / sum_{c > r} l_c / (l_k - l_c),    T = sum_{c > r} l_c,

and the noise level by the minimizer of the dominant risk term given those
spikes. The selected rank is the smallest ``r`` whose trailing eigenvalues
look like a noise bulk and whose estimated Haff risk is no worse than that of
the sample covariance, ``(p + 1) / n``. Rank ``p`` is always admissible and
returns the sample covariance itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import BelowBulkError, DomainError, NearDegenerateError, RankError, SpikedNoiseError
from .noise import noise_terms
from .spectra import SpectralData
from .ure import DEFAULT_STEP, DEFAULT_STEP2, EstimatorProfile, evaluate_ure, profile_finite_difference

__all__ = [
    "SpikedEstimate",
    "CandidateDiagnostic",
    "RankDiagnostics",
    "estimate_gammas",
    "gamma_tilde",
    "gamma_tilde_derivatives",
    "candidate_estimator",
    "threshold_statistic",
    "candidate_profile",
    "select_rank",
    "assemble",
    "donoho_gavish_gamma",
]


@dataclass(frozen=True)
class SpikedEstimate:
    """``O diag(gammas_hat, 0) O^T + sigma2_hat I``."""

    gammas_hat: NDArray[np.float64]
    sigma2_hat: float
    basis: NDArray[np.float64]
    rho_hat: int
    n: int
    p: int
    diagnostics: "RankDiagnostics | None" = field(default=None, compare=False)

    def eigenvalues(self) -> NDArray[np.float64]:
        out = np.full(self.p, self.sigma2_hat)
        out[: self.rho_hat] += self.gammas_hat
        return out

    def matrix(self) -> NDArray[np.float64]:
        o = self.basis
        m = (o * self.eigenvalues()) @ o.T
        return 0.5 * (m + m.T)


@dataclass(frozen=True)
class CandidateDiagnostic:
    r: int
    threshold: float
    threshold_ok: bool
    sigma2: float = math.nan
    ure: float = math.nan
    ure_ok: bool = False
    admissible: bool = False
    note: str = ""


@dataclass(frozen=True)
class RankDiagnostics:
    rho_tilde: int
    candidates: tuple[CandidateDiagnostic, ...]
    bound: float

    def to_dict(self) -> dict:
        return {
            "rho_tilde": self.rho_tilde,
            "bound": self.bound,
            "candidates": [
                # unevaluated fields are NaN, which strict JSON cannot carry
                {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in vars(c).items()}
                for c in self.candidates
            ],
        }


def _check_rank(p: int, r: int) -> None:
    if not 0 <= r < p:
        raise RankError(f"rank must satisfy 0 <= r < p={p}, got {r}")


def gamma_tilde(l: ArrayLike, r: int) -> NDArray[np.float64]:
    """Spike estimates for rank ``r``; ``l`` may carry leading batch axes."""
    l = np.asarray(l, dtype=np.float64)
    _check_rank(l.shape[-1], r)
    lk = l[..., :r, None]
    tail = l[..., None, r:]
    gap = lk - tail
    if np.any(gap <= 0):
        raise NearDegenerateError("a spike eigenvalue does not exceed the trailing eigenvalues")
    denom = np.sum(tail / gap, axis=-1)
    return np.sum(l[..., r:], axis=-1)[..., None] / denom


def estimate_gammas(spec: SpectralData, r: int) -> NDArray[np.float64]:
    return gamma_tilde(spec.eigenvalues, r)


def gamma_tilde_derivatives(l: ArrayLike, r: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Analytic ``d gamma_k / d l_b`` as an ``(r, p)`` array and ``d^2 gamma_k / d l_k^2``.

    With ``T = sum l_c``, ``D = sum l_c/(l_k - l_c)``, ``E = sum l_c/(l_k - l_c)^2``
    and ``H = sum l_c/(l_k - l_c)^3`` over ``c > r``:

        d/dl_k   = T E / D^2
        d/dl_c   = 1/D - T l_k / ((l_k - l_c)^2 D^2)
        d2/dl_k2 = 2 T (E^2 - H D) / D^3

    and the derivative with respect to any other spike eigenvalue is zero.
    """
    l = np.asarray(l, dtype=np.float64)
    p = l.shape[0]
    _check_rank(p, r)
    tail = l[r:]
    t = tail.sum()
    jac = np.zeros((r, p))
    second = np.zeros(r)
    for k in range(r):
        inv = 1.0 / (l[k] - tail)
        d = np.sum(tail * inv)
        e = np.sum(tail * inv**2)
        h = np.sum(tail * inv**3)
        jac[k, k] = t * e / d**2
        jac[k, r:] = 1.0 / d - t * l[k] * inv**2 / d**2
        second[k] = 2.0 * t * (e * e - h * d) / d**3
    return jac, second


def candidate_estimator(n: int, r: int, form: str = "psi"):
    """Batched map ``l -> (gamma_tilde, sigma2_tilde)`` at fixed rank ``r``."""

    def estimator(points: NDArray[np.float64]):
        g = gamma_tilde(points, r)
        a, b = noise_terms(points, g, n, form=form)
        return g, a / b

    return estimator


def threshold_statistic(spec: SpectralData, r: int) -> float:
    """``(1 + sqrt(p/n))^2 * mean(l_{r+1..p}) / l_{r+1}``; bulk-like when at least 1."""
    _check_rank(spec.p, r)
    l = spec.eigenvalues
    edge = (1.0 + math.sqrt(spec.p / spec.n)) ** 2
    return float(edge * np.mean(l[r:]) / l[r])


def candidate_profile(
    spec: SpectralData,
    r: int,
    step: float = DEFAULT_STEP,
    step2: float = DEFAULT_STEP2,
) -> EstimatorProfile:
    """Profile of the rank-``r`` estimator; ``r = p`` is the sample covariance."""
    p = spec.p
    if r == p:
        return EstimatorProfile(spec.eigenvalues.copy(), np.eye(p), np.zeros(p), p)
    est = candidate_estimator(spec.n, r)
    return profile_finite_difference(est, spec, step=step, step2=step2, batched=True)


def _candidate(spec: SpectralData, r: int, bound: float, evaluate: bool) -> CandidateDiagnostic:
    p = spec.p
    if r == p:
        # admissible by convention; the risk of S is still reported
        ure = evaluate_ure(spec, candidate_profile(spec, p)).total if evaluate else math.nan
        return CandidateDiagnostic(p, math.nan, True, 0.0, ure, abs(ure) <= bound, True, "rank p is admissible by convention")
    stat = threshold_statistic(spec, r)
    ok = stat >= 1.0
    if not (ok or evaluate):
        return CandidateDiagnostic(r, stat, False)
    try:
        profile = candidate_profile(spec, r)
    except (SpikedNoiseError, FloatingPointError) as exc:
        return CandidateDiagnostic(r, stat, ok, note=f"{type(exc).__name__}: {exc}")
    sigma2 = float(profile.psi[-1])
    if not (math.isfinite(sigma2) and sigma2 > 0):
        return CandidateDiagnostic(r, stat, ok, sigma2, note="noise estimate is not positive")
    ure = evaluate_ure(spec, profile).total
    ure_ok = bool(abs(ure) <= bound)
    return CandidateDiagnostic(r, stat, ok, sigma2, ure, ure_ok, ok and ure_ok)


def select_rank(spec: SpectralData, full_diagnostics: bool = False) -> tuple[int, RankDiagnostics]:
    """Smallest admissible rank, scanning ``r = 0, 1, ..., p``.

    The risk estimate of a candidate is only computed once its threshold
    statistic passes, unless ``full_diagnostics`` is set.
    """
    p, n = spec.p, spec.n
    bound = (p + 1) / n
    found: list[CandidateDiagnostic] = []
    for r in range(p + 1):
        cand = _candidate(spec, r, bound, full_diagnostics)
        found.append(cand)
        if cand.admissible:
            return r, RankDiagnostics(r, tuple(found), bound)
    raise AssertionError("rank p is always admissible")


def assemble(spec: SpectralData, full_diagnostics: bool = False) -> SpikedEstimate:
    """Spiked estimate at the selected rank; rank ``p`` reproduces ``S``."""
    if spec.eigenvectors is None:
        raise ValueError("assembling an estimate needs the eigenvectors")
    rho, diags = select_rank(spec, full_diagnostics)
    if rho == spec.p:
        gam = spec.eigenvalues.copy()
        sigma2 = 0.0
    else:
        gam = gamma_tilde(spec.eigenvalues, rho)
        a, b = noise_terms(spec.eigenvalues, gam, spec.n)
        sigma2 = float(a / b)
    return SpikedEstimate(gam, sigma2, spec.eigenvectors, rho, spec.n, spec.p, diags)


def donoho_gavish_gamma(l_k: float, c: float) -> float:
    """Spike shrinker for unit noise, valid above the bulk edge ``(1 + sqrt(c))^2``."""
    if not 0 <= c < 1:
        raise DomainError(f"aspect ratio must lie in [0, 1), got {c}")
    edge = (1.0 + math.sqrt(c)) ** 2
    if not l_k > edge:
        raise BelowBulkError(f"eigenvalue {l_k} is not above the bulk edge {edge}")
    x = l_k - 1.0
    return (x + c * l_k / x) * (1.0 - c / x**2) / (1.0 + c / x)
