"""Closed-form noise estimator minimizing the dominant risk term.

For a fixed spiked part ``gamma_hat`` of rank ``r``, the dominant risk term
``F`` is a quadratic in the noise level ``sigma2``; its stationary point is
``A / B`` with ``A`` and ``B`` explicit sums over the sample spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import IllPosedDenominatorError, NearDegenerateError, RankError, RegimeError, ShapeError
from .spectra import SpectralData
from .ure import psi_from, ure_F

__all__ = [
    "NoiseSolution",
    "noise_terms",
    "minimize_noise",
    "stationarity_residual",
    "quadratic_coefficient",
    "DENOMINATOR_TOLERANCE",
]

DENOMINATOR_TOLERANCE = 1e-14


@dataclass(frozen=True)
class NoiseSolution:
    a: float
    b: float
    sigma2_tilde: float

    @property
    def negative(self) -> bool:
        """True when the minimizer is not a usable noise level."""
        return not self.sigma2_tilde > 0


def _spike_parts(l: NDArray[np.float64], g: NDArray[np.float64]):
    r = g.shape[-1]
    lk = l[..., :r]
    tail = l[..., r:]
    # w[k, c] = 1 / (l_k - l_c) for spikes k and trailing c
    w = 1.0 / (lk[..., :, None] - tail[..., None, :])
    dl = lk[..., :, None] - lk[..., None, :]
    dl = np.where(np.eye(r, dtype=bool), np.inf, dl)
    dg = (g[..., :, None] - g[..., None, :]) / dl
    return lk, tail, w, dl, dg


def _display_numerator(l, g, n):
    p = l.shape[-1]
    a = n - p - 1
    c2 = 1.0 / (n * n * p)
    lk, tail, w, _, dg = _spike_parts(l, g)
    u = w.sum(axis=-1)
    w2 = (w * w).sum(axis=-1)
    gw = g[..., :, None] * w
    sum_inv = (1.0 / l).sum(axis=-1)
    return (
        a / (n * p) * sum_inv
        - a * (n - p - 2) * c2 * (g / (lk * lk)).sum(axis=-1)
        + a * c2 * (g / lk).sum(axis=-1) * sum_inv
        - 2.0 * a * c2 * (gw / tail[..., None, :]).sum(axis=(-2, -1))
        + 3.0 * c2 * (w.sum(axis=-2) * gw.sum(axis=-2) - (g[..., :, None] * w * w).sum(axis=-2)).sum(axis=-1)
        - 3.0 * c2 * (g * (u * u - w2)).sum(axis=-1)
        - 3.0 * c2 * (dg * u[..., :, None]).sum(axis=(-2, -1))
    )


def _psi_numerator(l, g, n):
    # Minus half the linear coefficient of F in sigma2. With D the divided
    # differences of the spiked part and s its row sums,
    #   A = (n-p-1)/(np) sum 1/l - (n-p-1)(n-p-2)/(n^2 p) sum g/l^2
    #       + (n-p-1)/(n^2 p) sum g/l sum 1/l - 2 (n-p-1)/(n^2 p) sum s/l
    #       - 1/(n^2 p) sum_{k != b} (s_k - s_b)/(l_k - l_b)
    p = l.shape[-1]
    a = n - p - 1
    c2 = 1.0 / (n * n * p)
    lk, tail, w, dl, dg = _spike_parts(l, g)
    u = w.sum(axis=-1)
    w2 = (w * w).sum(axis=-1)
    s_spike = dg.sum(axis=-1) + g * u
    s_tail = (g[..., :, None] * w).sum(axis=-2)
    sum_inv = (1.0 / l).sum(axis=-1)
    s_over_l = (s_spike / lk).sum(axis=-1) + (s_tail / tail).sum(axis=-1)
    pairs = (
        ((s_spike[..., :, None] - s_spike[..., None, :]) / dl).sum(axis=(-2, -1))
        + 2.0 * ((s_spike * u).sum(axis=-1) - (s_tail[..., None, :] * w).sum(axis=(-2, -1)))
        # (s_c - s_d)/(l_c - l_d) = sum_k g_k w_kc w_kd on the tail
        + (g * (u * u - w2)).sum(axis=-1)
    )
    return (
        a / (n * p) * sum_inv
        - a * (n - p - 2) * c2 * (g / (lk * lk)).sum(axis=-1)
        + a * c2 * (g / lk).sum(axis=-1) * sum_inv
        - 2.0 * a * c2 * s_over_l
        - c2 * pairs
    )


def noise_terms(
    l: ArrayLike,
    gammas: ArrayLike,
    n: int,
    form: str = "psi",
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Numerator ``A`` and denominator ``B`` of the noise minimizer.

    ``l`` has shape ``(..., p)`` and ``gammas`` shape ``(..., r)`` with
    ``r < p``; leading axes broadcast, so a whole finite-difference stencil
    can be evaluated at once. Cost is ``O(r^2 + r p)`` per spectrum.

    ``form="psi"`` gives the exact stationary point of the dominant risk
    term. ``form="display"`` reproduces the seven-sum numerator as commonly
    printed; it agrees with ``"psi"`` when ``r = 0`` but omits the
    ``sigma2 * psi_k / l_k`` cross terms of the spikes, an ``O(1/n)``
    difference otherwise.
    """
    l = np.asarray(l, dtype=np.float64)
    g = np.asarray(gammas, dtype=np.float64)
    if form == "psi":
        big_a = _psi_numerator(l, g, n)
    elif form == "display":
        big_a = _display_numerator(l, g, n)
    else:
        raise ValueError(f"unknown form {form!r}")
    p = l.shape[-1]
    a = n - p - 1
    c2 = 1.0 / (n * n * p)
    inv_l = 1.0 / l
    sum_inv = inv_l.sum(axis=-1)
    big_b = a * (n - p - 2) * c2 * (inv_l * inv_l).sum(axis=-1) - a * c2 * sum_inv * sum_inv
    return big_a, big_b


def _validate(spec: SpectralData, gamma_hat: NDArray[np.float64], rho_hat: int) -> None:
    if spec.n < spec.p:
        raise RegimeError(f"need n >= p, got n={spec.n}, p={spec.p}")
    if not 0 <= rho_hat < spec.p:
        raise RankError(f"noise minimizer needs 0 <= rank < p={spec.p}, got {rho_hat}")
    if gamma_hat.shape != (rho_hat,):
        raise ShapeError(f"gamma_hat has length {gamma_hat.shape}, expected {rho_hat}")
    if spec.near_degenerate:
        raise NearDegenerateError("spectrum is near-degenerate")


def minimize_noise(
    spec: SpectralData,
    gamma_hat: ArrayLike,
    rho_hat: int | None = None,
    form: str = "psi",
) -> NoiseSolution:
    """Noise level ``A / B`` minimizing the dominant risk term.

    A negative result is returned as is; check :attr:`NoiseSolution.negative`.
    """
    g = np.atleast_1d(np.asarray(gamma_hat, dtype=np.float64))
    if rho_hat is None:
        rho_hat = g.shape[0]
    _validate(spec, g, rho_hat)
    a, b = noise_terms(spec.eigenvalues, g, spec.n, form=form)
    a, b = float(a), float(b)
    scale = float(np.sum(1.0 / spec.eigenvalues**2)) / spec.p
    if not abs(b) > DENOMINATOR_TOLERANCE * scale:
        raise IllPosedDenominatorError(f"denominator B={b:.3g} vanishes (n={spec.n}, p={spec.p})")
    return NoiseSolution(a, b, a / b)


def quadratic_coefficient(spec: SpectralData) -> float:
    """Coefficient of ``sigma2^2`` in the dominant risk term, equal to ``B``."""
    l = spec.eigenvalues
    n, p = spec.n, spec.p
    inv = 1.0 / l
    return (n - p - 1) / (n * n * p) * ((n - p - 2) * np.sum(inv * inv) - np.sum(inv) ** 2)


def stationarity_residual(
    spec: SpectralData,
    gamma_hat: ArrayLike,
    rho_hat: int | None,
    sigma2: float,
    step: float | None = None,
) -> float:
    """``dF / d sigma2`` at ``sigma2`` with the spectrum and spikes held fixed.

    ``F`` is exactly quadratic in ``sigma2``, so the central difference is
    exact up to rounding for any step; the default step is the larger of 1 and
    ``|sigma2|``.
    """
    g = np.atleast_1d(np.asarray(gamma_hat, dtype=np.float64))
    if rho_hat is None:
        rho_hat = g.shape[0]
    _validate(spec, g, rho_hat)
    h = step if step is not None else max(1.0, abs(sigma2))
    l = spec.eigenvalues
    up = ure_F(l, spec.n, psi_from(g, sigma2 + h, spec.p))
    down = ure_F(l, spec.n, psi_from(g, sigma2 - h, spec.p))
    return (up - down) / (2.0 * h)
