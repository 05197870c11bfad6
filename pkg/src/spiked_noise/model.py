"""Covariance truths and Gaussian data generation.

Two families are supported: the spiked model ``diag(gamma, 0) + sigma2 * I``
and the autoregressive model ``Sigma_ij = kappa ** |i - j|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateSampleError, InvalidModelError

__all__ = [
    "SpikedModel",
    "ARModel",
    "SampleSpec",
    "CovarianceModel",
    "make_rng",
    "materialize",
    "sample_data",
    "sample_covariance",
    "true_noise",
    "true_spikes",
    "model_from_dict",
]


@dataclass(frozen=True)
class SpikedModel:
    """Spiked covariance ``diag(gammas, 0) + sigma2 * I_p``."""

    gammas: tuple[float, ...]
    sigma2: float
    p: int
    kind: str = field(default="spiked", init=False, repr=False)

    def __post_init__(self) -> None:
        gammas = tuple(float(g) for g in self.gammas)
        object.__setattr__(self, "gammas", gammas)
        if int(self.p) < 1:
            raise InvalidModelError(f"dimension must be positive, got p={self.p}")
        object.__setattr__(self, "p", int(self.p))
        if not self.sigma2 > 0:
            raise InvalidModelError(f"sigma2 must be positive, got {self.sigma2}")
        if len(gammas) > self.p:
            raise InvalidModelError(f"rank {len(gammas)} exceeds dimension {self.p}")
        if any(g <= 0 for g in gammas):
            raise InvalidModelError("spike strengths must be positive")
        if any(a <= b for a, b in zip(gammas, gammas[1:])):
            raise InvalidModelError("spike strengths must be strictly decreasing")

    @property
    def rho(self) -> int:
        return len(self.gammas)

    def eigenvalues(self) -> NDArray[np.float64]:
        """Population eigenvalues in decreasing order."""
        ev = np.full(self.p, float(self.sigma2))
        ev[: self.rho] += np.asarray(self.gammas)
        return ev

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "spiked", "gammas": list(self.gammas), "sigma2": self.sigma2, "p": self.p}


@dataclass(frozen=True)
class ARModel:
    """First-order autoregressive correlation ``kappa ** |i - j|``."""

    kappa: float
    p: int
    kind: str = field(default="ar", init=False, repr=False)

    def __post_init__(self) -> None:
        if int(self.p) < 1:
            raise InvalidModelError(f"dimension must be positive, got p={self.p}")
        object.__setattr__(self, "p", int(self.p))
        if not 0.0 <= self.kappa < 1.0:
            raise InvalidModelError(f"kappa must lie in [0, 1), got {self.kappa}")
        object.__setattr__(self, "kappa", float(self.kappa))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "ar", "kappa": self.kappa, "p": self.p}


CovarianceModel = Union[SpikedModel, ARModel]


@dataclass(frozen=True)
class SampleSpec:
    n: int
    p: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise InvalidModelError(f"dimension must be positive, got p={self.p}")
        if self.n < self.p:
            raise DegenerateSampleError(f"need n >= p, got n={self.n}, p={self.p}")


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *stream)``.

    Distinct stream keys give statistically independent generators, so
    replicate ``i`` draws the same numbers whichever worker runs it.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def materialize(model: CovarianceModel) -> NDArray[np.float64]:
    """Dense ``p x p`` covariance matrix of ``model``."""
    if isinstance(model, SpikedModel):
        return np.diag(model.eigenvalues())
    if isinstance(model, ARModel):
        idx = np.arange(model.p)
        return model.kappa ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    raise InvalidModelError(f"unknown model type {type(model).__name__}")


def _root(model: CovarianceModel) -> NDArray[np.float64]:
    # Right factor R with R^T R = Sigma, so rows Z @ R are N(0, Sigma).
    if isinstance(model, SpikedModel):
        return np.sqrt(model.eigenvalues())
    return np.linalg.cholesky(materialize(model)).T


def sample_data(model: CovarianceModel, n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    """Draw an ``n x p`` matrix of i.i.d. ``N(0, Sigma)`` rows."""
    if n < 1:
        raise DegenerateSampleError(f"need at least one observation, got n={n}")
    z = rng.standard_normal((n, model.p))
    root = _root(model)
    if root.ndim == 1:
        return z * root
    return z @ root


def sample_covariance(
    model: CovarianceModel,
    spec: SampleSpec,
    rng: np.random.Generator | None = None,
) -> NDArray[np.float64]:
    """``X^T X / n`` for Gaussian data drawn from ``model``.

    Uses ``make_rng(spec.seed)`` unless an explicit generator is passed.
    """
    if spec.p != model.p:
        raise InvalidModelError(f"spec dimension {spec.p} does not match model dimension {model.p}")
    if rng is None:
        rng = make_rng(spec.seed)
    x = sample_data(model, spec.n, rng)
    s = x.T @ x / spec.n
    return 0.5 * (s + s.T)


def true_noise(model: SpikedModel) -> float:
    return model.sigma2


def true_spikes(model: SpikedModel) -> tuple[float, ...]:
    return model.gammas


def model_from_dict(doc: dict[str, Any], p: int | None = None) -> CovarianceModel:
    """Build a model from its config mapping, optionally overriding ``p``."""
    kind = doc.get("kind")
    dim = p if p is not None else doc.get("p")
    if dim is None:
        raise InvalidModelError("model dimension p is missing")
    if kind == "spiked":
        return SpikedModel(tuple(doc.get("gammas", ())), float(doc.get("sigma2", 1.0)), int(dim))
    if kind == "ar":
        if "kappa" not in doc:
            raise InvalidModelError("ar model needs kappa")
        return ARModel(float(doc["kappa"]), int(dim))
    raise InvalidModelError(f"unknown model kind {kind!r}")
