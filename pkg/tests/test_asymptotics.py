from __future__ import annotations

import math

import pytest
from scipy.integrate import quad

from spiked_noise.asymptotics import (
    RegimeParams,
    clt_constants,
    eigenvalue_limit,
    minimax_M,
    mp_density,
    mp_inverse_moment,
    mp_support,
    stieltjes_limits,
    tv_bound,
)
from spiked_noise.errors import DomainError, SupercriticalityError


def mp_integral(f, c, sigma2=1.0):
    lo, hi = mp_support(c, sigma2)
    return quad(lambda t: f(t) * mp_density(t, c, sigma2), lo, hi, limit=200, epsabs=1e-13)[0]


def test_regime_params():
    rp = RegimeParams(0.5, 1.0, (5.0, 0.1))
    assert rp.threshold == pytest.approx(math.sqrt(0.5))
    assert not rp.supercritical
    assert rp.rho == 2
    for c in (0.0, 1.0, -0.3):
        with pytest.raises(DomainError):
            RegimeParams(c)
    with pytest.raises(DomainError):
        RegimeParams(0.5, 0.0)


def test_eigenvalue_limit_values():
    rp = RegimeParams(0.5)
    assert eigenvalue_limit(5.0, rp) == pytest.approx(6.6)
    assert eigenvalue_limit(0.5, rp) == pytest.approx((1 + math.sqrt(0.5)) ** 2)
    assert eigenvalue_limit(5.0, RegimeParams(1e-9)) == pytest.approx(6.0, rel=1e-8)
    with pytest.raises(DomainError):
        eigenvalue_limit(0.0, rp)


@pytest.mark.parametrize("c,sigma2", [(0.5, 1.0), (0.1, 2.0), (0.9, 0.3)])
def test_eigenvalue_limit_continuous_at_threshold(c, sigma2):
    rp = RegimeParams(c, sigma2)
    g = rp.threshold
    edge = (1 + math.sqrt(c)) ** 2 * sigma2
    assert eigenvalue_limit(g * (1 + 1e-13), rp) == pytest.approx(edge, rel=1e-12)
    assert eigenvalue_limit(g, rp) == pytest.approx(edge, rel=1e-12)


def test_mp_density_normalized():
    for c in (0.1, 0.5, 0.8):
        assert mp_integral(lambda t: 1.0, c) == pytest.approx(1.0, abs=1e-9)
    assert mp_density([0.0, 10.0], 0.5).tolist() == [0.0, 0.0]


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("c,sigma2", [(0.5, 1.0), (0.3, 2.0)])
def test_inverse_moments_match_quadrature(m, c, sigma2):
    want = mp_integral(lambda t: t**-m, c, sigma2)
    assert mp_inverse_moment(m, RegimeParams(c, sigma2)) == pytest.approx(want, rel=1e-7)


def test_inverse_moment_examples():
    rp = RegimeParams(0.5)
    assert [mp_inverse_moment(m, rp) for m in (1, 2, 3, 4)] == pytest.approx([2, 8, 48, 352])
    assert mp_inverse_moment(2, RegimeParams(1e-9, 2.0)) == pytest.approx(0.25, rel=1e-6)
    for m in (0, 1.5, True):
        with pytest.raises(DomainError):
            mp_inverse_moment(m, rp)


def test_stieltjes_examples():
    rp = RegimeParams(0.5)
    assert stieltjes_limits(5.0, rp) == pytest.approx((0.2, 1 / 5.5, 10 / 5.5**2))
    assert stieltjes_limits(1e12, rp) == pytest.approx((0, 0, 0), abs=1e-11)
    with pytest.raises(SupercriticalityError):
        stieltjes_limits(0.5, rp)
    near = stieltjes_limits(rp.threshold * (1 + 1e-9), rp)
    assert all(math.isfinite(v) for v in near)


@pytest.mark.parametrize("gamma,c,sigma2", [(5.0, 0.5, 1.0), (2.0, 0.2, 1.5)])
def test_stieltjes_match_quadrature(gamma, c, sigma2):
    rp = RegimeParams(c, sigma2)
    lam = eigenvalue_limit(gamma, rp)
    want = (
        mp_integral(lambda t: t / (lam - t), c, sigma2),
        mp_integral(lambda t: 1 / (lam - t), c, sigma2),
        mp_integral(lambda t: 1 / (t * (lam - t)), c, sigma2),
    )
    assert stieltjes_limits(gamma, rp) == pytest.approx(want, rel=1e-7)


def test_clt_constants():
    lo, hi, var = clt_constants(RegimeParams(0.5, 1.0, (5.0, 4.0, 3.0, 2.0)))
    assert (lo, hi, var) == pytest.approx((-13.3516, 113.7488, 36.0), abs=1e-4)
    assert clt_constants(RegimeParams(0.5)) == pytest.approx((-4.0, -4.0, 36.0))
    assert clt_constants(RegimeParams(0.5, 1.0, (5.0,)))[:2] == pytest.approx((-6.45974, 25.3785), abs=1e-4)
    with pytest.raises(SupercriticalityError):
        clt_constants(RegimeParams(0.5, 1.0, (0.5,)))
    with pytest.raises(DomainError):
        clt_constants(RegimeParams(0.5, 1.0, (5.0,)), gamma_bar=[5.0, 4.0])


def test_clt_band_ordered():
    for c in (0.1, 0.3, 0.5, 0.7, 0.9):
        for s2 in (0.5, 1.0, 2.0):
            for g in ((10.0,), (6.0, 3.0), (4.0, 3.0, 2.0, 1.5)):
                rp = RegimeParams(c, s2, tuple(x * s2 for x in g))
                lo, hi, var = clt_constants(rp)
                assert lo <= hi
                assert var > 0


def test_tv_bound():
    assert tv_bound(0.5, 2.0, 1) == pytest.approx(math.sqrt(1 - math.exp(-1)), abs=1e-12)
    assert tv_bound(0.5, 2.0, 1) == pytest.approx(0.795060, abs=1e-6)
    assert tv_bound(0.5, 2.0, 2) == 0.0
    with pytest.raises(DomainError):
        tv_bound(0.5, 2.0, 0)


def test_minimax_M():
    assert minimax_M(0.5, 0.25 - 1e-9) < 1e-6
    eps = 0.1
    m = minimax_M(0.5, eps)
    assert 1 - math.exp(-0.5 * m * m / 2) == pytest.approx((1 - 4 * eps) ** 2)
    for bad in (0.25, 0.3, 0.0):
        with pytest.raises(DomainError):
            minimax_M(0.5, bad)
