from __future__ import annotations

import numpy as np
import pytest

from spiked_noise.errors import DegenerateSampleError, InvalidModelError
from spiked_noise.model import (
    ARModel,
    SampleSpec,
    SpikedModel,
    make_rng,
    materialize,
    model_from_dict,
    sample_covariance,
    sample_data,
    true_noise,
    true_spikes,
)


def test_spiked_matrix_is_diagonal():
    m = SpikedModel((4.0, 3.0), 0.5, 5)
    np.testing.assert_array_equal(np.diag(materialize(m)), [4.5, 3.5, 0.5, 0.5, 0.5])
    assert m.rho == 2
    assert true_noise(m) == 0.5
    assert true_spikes(m) == (4.0, 3.0)


def test_ar_matrix():
    sig = materialize(ARModel(0.5, 4))
    assert sig[0, 3] == pytest.approx(0.125)
    np.testing.assert_array_equal(sig, sig.T)
    np.testing.assert_array_equal(np.diag(sig), 1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(gammas=(1.0, 2.0), sigma2=1.0, p=5),
        dict(gammas=(2.0, 2.0), sigma2=1.0, p=5),
        dict(gammas=(-1.0,), sigma2=1.0, p=5),
        dict(gammas=(), sigma2=0.0, p=5),
        dict(gammas=(3.0, 2.0, 1.0), sigma2=1.0, p=2),
        dict(gammas=(), sigma2=1.0, p=0),
    ],
)
def test_spiked_rejects(kwargs):
    with pytest.raises(InvalidModelError):
        SpikedModel(**kwargs)


@pytest.mark.parametrize("kappa", [1.0, -1.0, 1.5])
def test_ar_rejects(kappa):
    with pytest.raises(InvalidModelError):
        ARModel(kappa, 4)


def test_sample_spec_needs_n_ge_p():
    with pytest.raises(DegenerateSampleError):
        SampleSpec(3, 5, 0)


def test_streams_are_reproducible_and_distinct():
    a = make_rng(7, 0, 3).standard_normal(5)
    b = make_rng(7, 0, 3).standard_normal(5)
    c = make_rng(7, 0, 4).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_sample_covariance_matches_data():
    m = ARModel(0.3, 6)
    x = sample_data(m, 50, make_rng(1))
    s = sample_covariance(m, SampleSpec(50, 6, 0), make_rng(1))
    np.testing.assert_allclose(s, x.T @ x / 50, rtol=1e-13)
    np.testing.assert_array_equal(s, s.T)


def test_sample_covariance_converges_to_truth():
    m = SpikedModel((3.0,), 1.0, 3)
    s = sample_covariance(m, SampleSpec(200_000, 3, 11))
    np.testing.assert_allclose(s, materialize(m), atol=0.05)


def test_model_from_dict():
    m = model_from_dict({"kind": "spiked", "gammas": [2, 1], "sigma2": 1}, p=7)
    assert m == SpikedModel((2.0, 1.0), 1.0, 7)
    a = model_from_dict({"kind": "ar", "kappa": 0.9, "p": 4})
    assert a == ARModel(0.9, 4)
    with pytest.raises(InvalidModelError):
        model_from_dict({"kind": "wishart"}, p=3)
    with pytest.raises(InvalidModelError):
        model_from_dict({"kind": "ar"}, p=3)
