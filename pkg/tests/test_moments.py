import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma as G, zeta

from ambitclt.exceptions import NotSummable
from ambitclt.kernels import AmbitModel, ConstantVolatility, MMAFVolatility, MSTOUKernel
from ambitclt.levy import CharacteristicQuadruplet, MixingLaw
from ambitclt.moments import (
    ambit_cov, ambit_mean, covariance_table, geometric_ma_cov, geometric_ma_long_run_variance,
    geometric_ma_series_cov, lattice_shell_size, long_run_variance, mmaf_cov, mmaf_mean,
    mstou_cov, mstou_cov_tail_bound, mstou_mean, mstou_variance,
)

# Lattice long-run variance of the Gamma(alpha, 1), c = 1, m = 1 MSTOU on Z^2:
# Sigma = Gamma(alpha-2) / (2 Gamma(alpha)) * (1 + 8 (zeta(alpha-3) - zeta(alpha-2))).
LRV_GAMMA8 = 0.0137700
LRV_GAMMA9 = 0.0095710


def _lrv_oracle(alpha):
    return G(alpha - 2) / (2 * G(alpha)) * (1 + 8 * (zeta(alpha - 3) - zeta(alpha - 2)))


def test_mean_examples():
    deg = MSTOUKernel(1.0, 1, MixingLaw.degenerate(1.0))
    gam = MSTOUKernel(1.0, 1, MixingLaw.gamma(5, 1))
    q1 = CharacteristicQuadruplet(1.0, 1.0)
    assert mmaf_mean(deg, q1) == pytest.approx(2.0, rel=1e-10)
    assert mmaf_mean(gam, q1) == pytest.approx(1 / 6, rel=1e-10)
    assert mstou_mean(gam, 1.0) == pytest.approx(1 / 6, rel=1e-12)
    assert mmaf_mean(gam, CharacteristicQuadruplet(0.0, 1.0)) == 0.0


def test_variance_examples():
    q = CharacteristicQuadruplet(0.0, 1.0)
    deg = MSTOUKernel(1.0, 1, MixingLaw.degenerate(1.0))
    gam = MSTOUKernel(1.0, 1, MixingLaw.gamma(5, 1))
    assert mmaf_cov(deg, q, np.zeros(2)) == pytest.approx(0.5, rel=1e-10)
    assert mmaf_cov(gam, q, np.zeros(2)) == pytest.approx(1 / 24, rel=1e-6)
    assert mstou_variance(gam, 1.0) == pytest.approx(1 / 24, rel=1e-12)


@pytest.mark.parametrize("h", range(6))
def test_geometric_ma_cov(h):
    assert geometric_ma_cov(h) == pytest.approx(2.0 ** -h / 12, rel=1e-14)
    partial, rem = geometric_ma_series_cov(h)
    assert abs(partial - 2.0 ** -h / 12) <= rem + 1e-17


def test_long_run_variance_examples():
    assert geometric_ma_long_run_variance() == pytest.approx(0.25, rel=1e-14)

    def iid(lags):
        return np.where(np.all(np.asarray(lags) == 0, axis=-1), 1.7, 0.0)

    lrv = long_run_variance(iid, lambda K: 0.0, dim=2)
    assert lrv.value == pytest.approx(1.7)


@pytest.mark.parametrize("alpha, frozen", [(8, LRV_GAMMA8), (9, LRV_GAMMA9)])
def test_mstou_long_run_variance_oracle(alpha, frozen):
    k = MSTOUKernel(1.0, 1, MixingLaw.gamma(alpha, 1))
    lrv = long_run_variance(lambda l: mstou_cov(k, 1.0, l), mstou_cov_tail_bound(k, 1.0),
                            eps=1e-6, dim=2)
    assert lrv.certified
    assert abs(lrv.value - _lrv_oracle(alpha)) <= 1e-6 + 1e-12
    assert lrv.value == pytest.approx(frozen, abs=2e-6)


def test_long_run_variance_not_summable():
    k = MSTOUKernel(1.0, 1, MixingLaw.gamma(3.5, 1))
    with pytest.raises(NotSummable):
        long_run_variance(lambda l: mstou_cov(k, 1.0, l), mstou_cov_tail_bound(k, 1.0),
                          eps=1e-4, dim=2)


@pytest.mark.parametrize("alpha", [4, 5, 6, 8, 10])
@pytest.mark.parametrize("beta", [0.5, 1, 2])
@pytest.mark.parametrize("c", [0.5, 1, 2])
def test_quadrature_matches_closed_form(alpha, beta, c):
    k = MSTOUKernel(c, 1, MixingLaw.gamma(alpha, beta))
    q = CharacteristicQuadruplet(0.0, 1.0)
    for lag in ([0, 0], [1, 0], [2, 1], [1, 3]):
        lag = np.array(lag, dtype=float)
        closed = float(mstou_cov(k, 1.0, lag[None])[0])
        assert mmaf_cov(k, q, lag) == pytest.approx(closed, rel=1e-6)


def test_cov_monotone_and_cauchy_schwarz(mstou_gamma5):
    lags = np.array([[t, 0] for t in range(40)], dtype=float)
    cov = mstou_cov(mstou_gamma5, 1.0, lags)
    assert np.all(np.diff(cov) <= 0) and cov[-1] < 1e-3 * cov[0]
    rng = np.random.default_rng(0)
    other = rng.integers(-20, 20, size=(200, 2)).astype(float)
    assert np.all(np.abs(mstou_cov(mstou_gamma5, 1.0, other)) <= cov[0] + 1e-15)


def test_ambit_cov_constant_volatility_reduces(mstou_gamma5):
    q = CharacteristicQuadruplet(0.3, 1.0)
    amb = AmbitModel(mstou_gamma5, ConstantVolatility(1.0), q)
    for lag in ([0, 0], [1, 0], [2, 1]):
        lag = np.array(lag, dtype=float)
        assert ambit_cov(amb, lag) == mmaf_cov(mstou_gamma5, q, lag)


def _mmaf_vol():
    j = MSTOUKernel(1.0, 1, MixingLaw.degenerate(2.0))
    return MMAFVolatility(j, CharacteristicQuadruplet(1.0, 0.5))


def test_ambit_cov_centred_drops_second_term():
    l = MSTOUKernel(1.0, 1, MixingLaw.degenerate(2.0))
    vol = _mmaf_vol()
    q = CharacteristicQuadruplet(0.0, 1.0)
    amb = AmbitModel(l, vol, q)
    lag = np.array([1.0, 0.0])
    expected = q.sigma_lambda * vol.second_moment() * mmaf_cov(l, CharacteristicQuadruplet(0.0, 1.0), lag)
    assert ambit_cov(amb, lag) == pytest.approx(expected, rel=1e-10)


def test_ambit_cov_far_lag_vanishes():
    l = MSTOUKernel(1.0, 1, MixingLaw.degenerate(2.0))
    amb = AmbitModel(l, _mmaf_vol(), CharacteristicQuadruplet(1.0, 1.0))
    value, resid = ambit_cov(amb, np.array([30.0, 0.0]), return_bound=True)
    assert abs(value) < 1e-12 and resid < 1e-8
    assert ambit_mean(amb) == pytest.approx(1.0 * _mmaf_vol().mean() * 0.5, rel=1e-10)


def test_covariance_table_symmetric(mstou_gamma5):
    q = CharacteristicQuadruplet(0.0, 1.0)
    tab = covariance_table(mstou_gamma5, q, 3)
    lookup = {tuple(k): v for k, v in zip(tab.lags.tolist(), tab.values)}
    for k, v in lookup.items():
        assert lookup[tuple(-x for x in k)] == v
    assert tab.variance == pytest.approx(1 / 24)
    assert tab.mean == 0.0
    text = tab.to_csv()
    assert text.splitlines()[0] == "lag0,lag1,cov,mean,tail_flag"


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 30), st.integers(1, 3))
def test_shell_sizes(r, dim):
    pts = np.array(np.meshgrid(*[np.arange(-r, r + 1)] * dim)).reshape(dim, -1).T
    assert int(lattice_shell_size(r, dim)) == int(np.sum(np.max(np.abs(pts), axis=1) == r))
