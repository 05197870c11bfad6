from __future__ import annotations

import json
import math

import numpy as np
import pytest

from helpers import wishart_spectrum
from spiked_noise.errors import BelowBulkError, DomainError, NearDegenerateError, RankError
from spiked_noise.model import SampleSpec, SpikedModel, sample_covariance
from spiked_noise.spectra import SpectralData, decompose
from spiked_noise.spiked import (
    assemble,
    candidate_profile,
    donoho_gavish_gamma,
    gamma_tilde,
    gamma_tilde_derivatives,
    select_rank,
    threshold_statistic,
)


def test_gamma_tilde_by_hand():
    # T = 3, D = 2/3 + 1/4
    assert gamma_tilde([5.0, 2.0, 1.0], 1)[0] == pytest.approx(36 / 11)
    assert gamma_tilde([5.0, 2.0, 1.0], 0).shape == (0,)


def test_gamma_tilde_errors():
    with pytest.raises(RankError):
        gamma_tilde([3.0, 2.0], 2)
    with pytest.raises(NearDegenerateError):
        gamma_tilde([2.0, 2.0, 1.0], 1)


def test_gamma_tilde_batches():
    pts = np.array([[6.0, 3.0, 2.0, 1.0], [7.0, 4.0, 1.5, 1.0]])
    out = gamma_tilde(pts, 2)
    for i in range(2):
        np.testing.assert_allclose(out[i], gamma_tilde(pts[i], 2), rtol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_derivatives_match_finite_differences(seed):
    spec = wishart_spectrum(12, 40, seed)
    l = spec.eigenvalues
    r = 3
    jac, sec = gamma_tilde_derivatives(l, r)
    h = 1e-6 * l
    for b in range(12):
        e = np.zeros(12)
        e[b] = h[b]
        fd = (gamma_tilde(l + e, r) - gamma_tilde(l - e, r)) / (2 * h[b])
        np.testing.assert_allclose(jac[:, b], fd, rtol=1e-6, atol=1e-8 * np.abs(jac).max())
    for k in range(r):
        e = np.zeros(12)
        e[k] = 1e-4 * l[k]
        fd2 = (gamma_tilde(l + e, r)[k] - 2 * gamma_tilde(l, r)[k] + gamma_tilde(l - e, r)[k]) / e[k] ** 2
        assert sec[k] == pytest.approx(fd2, rel=1e-4)


def test_threshold_statistic():
    spec = SpectralData.from_eigenvalues([4.0, 1.0, 1.0 - 1e-3], 100)
    edge = (1 + math.sqrt(0.03)) ** 2
    assert threshold_statistic(spec, 0) == pytest.approx(edge * np.mean(spec.eigenvalues) / 4.0)
    assert threshold_statistic(spec, 1) >= 1.0


def test_select_rank_finds_strong_spikes():
    model = SpikedModel((20.0, 10.0), 1.0, 30)
    hits = 0
    for seed in range(5):
        spec = decompose(sample_covariance(model, SampleSpec(300, 30, seed)), 300)
        r, diags = select_rank(spec)
        hits += r == 2
        assert diags.rho_tilde == r
        assert diags.candidates[-1].admissible
        assert diags.bound == pytest.approx(31 / 300)
    assert hits >= 4


def test_select_rank_full_diagnostics_serialize(spiked_spec):
    r, diags = select_rank(spiked_spec, full_diagnostics=True)
    doc = diags.to_dict()
    assert [c["r"] for c in doc["candidates"]] == list(range(r + 1))
    json.dumps(doc, allow_nan=False)


def test_assemble(spiked_spec):
    est = assemble(spiked_spec)
    m = est.matrix()
    np.testing.assert_allclose(m, m.T)
    vals = np.linalg.eigvalsh(m)[::-1]
    np.testing.assert_allclose(vals, np.sort(est.eigenvalues())[::-1], rtol=1e-10)
    if est.rho_hat < est.p:
        assert est.sigma2_hat > 0
        np.testing.assert_allclose(est.eigenvalues()[est.rho_hat :], est.sigma2_hat)
    with pytest.raises(ValueError):
        assemble(SpectralData.from_eigenvalues(spiked_spec.eigenvalues, 40))


def test_candidate_profile_psi_structure(spiked_spec):
    prof = candidate_profile(spiked_spec, 2)
    assert prof.rho_hat == 2
    np.testing.assert_allclose(prof.psi[2:], prof.psi[-1])
    np.testing.assert_allclose(prof.psi[:2] - prof.psi[-1], gamma_tilde(spiked_spec.eigenvalues, 2), rtol=1e-12)


def test_donoho_gavish():
    assert donoho_gavish_gamma(9.6, 0.5) == pytest.approx(8.596434, abs=1e-6)
    assert donoho_gavish_gamma(6.6, 0.5) == pytest.approx(5.591375, abs=1e-6)
    with pytest.raises(BelowBulkError):
        donoho_gavish_gamma(2.9, 0.5)
    with pytest.raises(DomainError):
        donoho_gavish_gamma(5.0, 1.5)
