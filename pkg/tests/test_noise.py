from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spiked_noise.errors import IllPosedDenominatorError, NearDegenerateError, RankError, ShapeError
from spiked_noise.noise import (
    NoiseSolution,
    minimize_noise,
    noise_terms,
    quadratic_coefficient,
    stationarity_residual,
)
from spiked_noise.spectra import SpectralData
from spiked_noise.spiked import gamma_tilde
from spiked_noise.ure import psi_from, ure_F


def random_spec(rng, p, n):
    return SpectralData.from_eigenvalues(rng.uniform(0.3, 10.0, p), n)


def quadratic_fit_minimizer(spec, g):
    # F is an exact quadratic in sigma2, so three points determine it
    xs = np.array([-1.0, 0.0, 1.0])
    ys = [ure_F(spec.eigenvalues, spec.n, psi_from(g, x, spec.p)) for x in xs]
    c2, c1, _ = np.polyfit(xs, ys, 2)
    return -c1 / (2 * c2), c2


@pytest.mark.parametrize("r", [0, 1, 2, 4])
def test_minimizer_matches_quadratic_fit(rng, r):
    for _ in range(10):
        p = int(rng.integers(r + 1, 12))
        n = int(rng.integers(2 * p + 3, 6 * p + 10))
        spec = random_spec(rng, p, n)
        g = np.sort(rng.uniform(0.5, 5.0, r))[::-1]
        sol = minimize_noise(spec, g)
        want, curv = quadratic_fit_minimizer(spec, g)
        assert sol.sigma2_tilde == pytest.approx(want, rel=1e-8, abs=1e-10)
        assert curv == pytest.approx(sol.b, rel=1e-8)
        assert sol.sigma2_tilde * sol.b == pytest.approx(sol.a, rel=1e-15)


def test_stationarity(rng):
    for _ in range(50):
        p = int(rng.integers(2, 15))
        n = int(rng.integers(2 * p + 2, 8 * p))
        spec = random_spec(rng, p, n)
        r = int(rng.integers(0, p))
        g = np.sort(rng.uniform(0.5, 5.0, r))[::-1]
        sol = minimize_noise(spec, g)
        res = stationarity_residual(spec, g, r, sol.sigma2_tilde)
        assert abs(res) <= 1e-8 * abs(quadratic_coefficient(spec))


def test_equal_eigenvalues_closed_form():
    for p, n, l in [(3, 20, 1.7), (10, 40, 0.25), (50, 400, 3.0)]:
        a, b = noise_terms(np.full(p, l), np.empty(0), n)
        assert a / b == pytest.approx(n * l / (n - 2 * p - 2), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_scale_equivariant(t, seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, 6, 30)
    g = gamma_tilde(spec.eigenvalues, 2)
    base = minimize_noise(spec, g).sigma2_tilde
    scaled = minimize_noise(SpectralData.from_eigenvalues(t * spec.eigenvalues, 30), t * g).sigma2_tilde
    assert scaled == pytest.approx(t * base, rel=1e-9)


def test_display_form_agrees_without_spikes(rng):
    spec = random_spec(rng, 8, 40)
    a1, b1 = noise_terms(spec.eigenvalues, np.empty(0), 40)
    a2, b2 = noise_terms(spec.eigenvalues, np.empty(0), 40, form="display")
    assert a1 == pytest.approx(a2, rel=1e-14)
    assert b1 == b2
    g = gamma_tilde(spec.eigenvalues, 2)
    assert not np.isclose(noise_terms(spec.eigenvalues, g, 40)[0], noise_terms(spec.eigenvalues, g, 40, form="display")[0])
    with pytest.raises(ValueError):
        noise_terms(spec.eigenvalues, g, 40, form="other")


def test_batched_terms(rng):
    pts = np.sort(rng.uniform(0.5, 8.0, (4, 7)), axis=1)[:, ::-1]
    g = gamma_tilde(pts, 2)
    a, b = noise_terms(pts, g, 30)
    assert a.shape == b.shape == (4,)
    for i in range(4):
        ai, bi = noise_terms(pts[i], g[i], 30)
        assert a[i] == pytest.approx(ai, rel=1e-14)
        assert b[i] == pytest.approx(bi, rel=1e-14)


def test_grid_minimum(rng):
    spec = random_spec(rng, 8, 50)
    g = gamma_tilde(spec.eigenvalues, 2)
    s2 = minimize_noise(spec, g).sigma2_tilde
    grid = np.linspace(s2 - 1.0, s2 + 1.0, 2001)
    vals = [ure_F(spec.eigenvalues, 50, psi_from(g, x, 8)) for x in grid]
    assert abs(grid[int(np.argmin(vals))] - s2) <= 0.5 * (grid[1] - grid[0]) + 1e-12


def test_errors():
    spec = SpectralData.from_eigenvalues([4.0, 3.0, 2.0, 1.0], 20)
    with pytest.raises(RankError):
        minimize_noise(spec, np.ones(4))
    with pytest.raises(ShapeError):
        minimize_noise(spec, np.ones(2), rho_hat=1)
    with pytest.raises(NearDegenerateError):
        minimize_noise(SpectralData.from_eigenvalues([4.0, 1.0, 1.0], 20), np.ones(1))
    # n = p + 1 makes the quadratic coefficient vanish
    with pytest.raises(IllPosedDenominatorError):
        minimize_noise(SpectralData.from_eigenvalues([4.0, 3.0, 2.0, 1.0], 5), np.empty(0))


def test_negative_flag():
    assert NoiseSolution(-1.0, 1.0, -1.0).negative
    assert not NoiseSolution(1.0, 1.0, 1.0).negative
