"""Closed-form large-dimensional limits for the spiked model with ``p / n -> c``.

These are oracles for simulation checks: almost sure limits of sample
eigenvalues and of Stieltjes-type sums, Marchenko-Pastur inverse moments,
the constants of the central limit bounds for the noise estimator, and the
total variation and minimax constants of the spike detection problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, SupercriticalityError

__all__ = [
    "RegimeParams",
    "eigenvalue_limit",
    "mp_inverse_moment",
    "stieltjes_limits",
    "clt_constants",
    "tv_bound",
    "minimax_M",
    "mp_density",
    "mp_support",
]


@dataclass(frozen=True)
class RegimeParams:
    c: float
    sigma2: float = 1.0
    gammas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 < self.c < 1.0:
            raise DomainError(f"aspect ratio must lie in (0, 1), got {self.c}")
        if not self.sigma2 > 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))

    @property
    def threshold(self) -> float:
        """Detection threshold ``sqrt(c) * sigma2``."""
        return math.sqrt(self.c) * self.sigma2

    @property
    def supercritical(self) -> bool:
        return all(g > self.threshold for g in self.gammas)

    @property
    def rho(self) -> int:
        return len(self.gammas)


def eigenvalue_limit(gamma_k: float, params: RegimeParams) -> float:
    """Almost sure limit of the sample eigenvalue attached to spike ``gamma_k``.

    Above the threshold the eigenvalue ``lam = gamma_k + sigma2`` is pushed
    out to ``lam * (1 + c sigma2 / gamma_k)``; below it sticks to the bulk
    edge ``(1 + sqrt(c))^2 sigma2``. The two branches meet at the threshold.
    """
    if not gamma_k > 0:
        raise DomainError(f"spike must be positive, got {gamma_k}")
    c, s2 = params.c, params.sigma2
    if gamma_k > params.threshold:
        return (gamma_k + s2) * (gamma_k + c * s2) / gamma_k
    return (1.0 + math.sqrt(c)) ** 2 * s2


def mp_inverse_moment(m: int, params: RegimeParams) -> float:
    """Limit of ``mean(l_c^-m)`` over the bulk.

    Equals ``N_{m-1}(c) / ((1-c)^(2m-1) sigma2^m)`` with the Narayana
    polynomial ``N_k(c) = sum_{j=1}^{k} C(k, j) C(k, j-1) / k * c^(j-1)``
    and ``N_0 = 1``; for ``m = 1, 2`` this is ``1 / ((1-c)^(2m-1) sigma2^m)``.
    """
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise DomainError(f"moment order must be an integer >= 1, got {m}")
    m = int(m)
    c, s2 = params.c, params.sigma2
    k = m - 1
    narayana = 1.0 if k == 0 else sum(math.comb(k, j) * math.comb(k, j - 1) / k * c ** (j - 1) for j in range(1, k + 1))
    return narayana / ((1.0 - c) ** (2 * m - 1) * s2**m)


def stieltjes_limits(gamma_k: float, params: RegimeParams) -> tuple[float, float, float]:
    """Limits of the bulk averages of ``l_c/(l_k-l_c)``, ``1/(l_k-l_c)`` and ``1/(l_c(l_k-l_c))``."""
    if not gamma_k > params.threshold:
        raise SupercriticalityError(
            f"spike {gamma_k} is not above the threshold {params.threshold}; the sums do not converge to these limits"
        )
    c, s2 = params.c, params.sigma2
    return (
        s2 / gamma_k,
        1.0 / (gamma_k + c * s2),
        gamma_k / ((1.0 - c) * s2 * (gamma_k + c * s2) ** 2),
    )


def clt_constants(params: RegimeParams, gamma_bar: ArrayLike | None = None) -> tuple[float, float, float]:
    """Lower mean, upper mean and variance bounding ``n (sigma2_tilde - sigma2)``.

    ``gamma_bar`` holds the limits of the spike estimates and defaults to the
    true spikes.
    """
    c, s2, rho = params.c, params.sigma2, params.rho
    g = np.asarray(params.gammas, dtype=np.float64)
    gb = g if gamma_bar is None else np.asarray(gamma_bar, dtype=np.float64)
    if gb.shape != g.shape:
        raise DomainError(f"gamma_bar has {gb.shape[0]} entries, expected {g.shape[0]}")
    if not params.supercritical:
        raise SupercriticalityError("every spike must exceed sqrt(c) * sigma2")
    rc = math.sqrt(c)
    lam = g + s2
    mid = g + c * s2
    common = (
        (1.0 - c) ** 2 / c * np.sum(g**2 * gb * s2**2 / (lam**2 * mid**2))
        + np.sum(g * gb * s2 / (lam * mid))
        - 2.0 * np.sum(g * gb * s2 / mid**2)
    )
    base = (2.0 * c * rho - 1.0) * s2 / (1.0 - c) ** 2
    mu_plus = (
        base
        + (2.0 - c) * (1.0 + c) * rho * s2 / (1.0 - rc) ** 2
        - (1.0 - c) ** 2 / c * np.sum(s2**3 * g**2 / (lam**2 * mid**2))
        + common
    )
    mu_minus = (
        base
        - (1.0 - c) ** 2 * rho * s2 / (c * (1.0 - rc) ** 2)
        + (1.0 + c) / c * np.sum(s2**2 * g / (lam * mid))
        + common
        - 3.0 * c * np.sum(gb * s2**2 / mid**2)
    )
    variance = 2.0 * c * (1.0 + c) ** 2 * s2**2 / (1.0 - c) ** 4
    return float(mu_minus), float(mu_plus), float(variance)


def tv_bound(c: float, M: float, r: int) -> float:
    """Limiting total variation bound between null and rank-``r`` alternatives."""
    if not 0.0 < c < 1.0:
        raise DomainError(f"aspect ratio must lie in (0, 1), got {c}")
    if not M > 0:
        raise DomainError(f"M must be positive, got {M}")
    if r < 1:
        raise DomainError(f"rank must be >= 1, got {r}")
    if r > 1:
        return 0.0
    return math.sqrt(-math.expm1(-c * M * M / 2.0))


def minimax_M(c: float, epsilon: float) -> float:
    """Spike size ``M_eps = sqrt(-(2/c) log(1 - (1 - 4 eps)^2))``."""
    if not 0.0 < c < 1.0:
        raise DomainError(f"aspect ratio must lie in (0, 1), got {c}")
    if not 0.0 < epsilon < 0.25:
        raise DomainError(f"epsilon must lie in (0, 1/4), got {epsilon}")
    return math.sqrt(-(2.0 / c) * math.log1p(-((1.0 - 4.0 * epsilon) ** 2)))


def mp_support(c: float, sigma2: float = 1.0) -> tuple[float, float]:
    rc = math.sqrt(c)
    return sigma2 * (1.0 - rc) ** 2, sigma2 * (1.0 + rc) ** 2


def mp_density(t: ArrayLike, c: float, sigma2: float = 1.0) -> NDArray[np.float64]:
    """Marchenko-Pastur density with ratio ``c`` and scale ``sigma2``; zero off the support."""
    if not 0.0 < c < 1.0:
        raise DomainError(f"aspect ratio must lie in (0, 1), got {c}")
    t = np.asarray(t, dtype=np.float64)
    lo, hi = mp_support(c, sigma2)
    inside = (t > lo) & (t < hi)
    out = np.zeros_like(t)
    ti = t[inside]
    out[inside] = np.sqrt((hi - ti) * (ti - lo)) / (2.0 * np.pi * c * sigma2 * ti)
    return out
