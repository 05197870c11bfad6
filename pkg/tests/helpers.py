"""Shared helpers for the test-suite."""

from __future__ import annotations

from spiked_noise.model import SampleSpec, SpikedModel, sample_covariance
from spiked_noise.spectra import SpectralData, decompose


def wishart_spectrum(p: int, n: int, seed: int, gammas=(4.0, 3.0, 2.0, 1.0)) -> SpectralData:
    """Decomposed sample covariance of a spiked truth with unit noise."""
    model = SpikedModel(tuple(gammas)[: p - 1], 1.0, p)
    return decompose(sample_covariance(model, SampleSpec(n, p, seed)), n)


class KnownShortfall(AssertionError):
    """A target the estimator cannot meet as specified; the README explains each one."""


ACCEPTANCE: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok
