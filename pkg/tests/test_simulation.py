import math

import numpy as np
import pytest
from scipy import stats

from ambitclt.exceptions import DegenerateDomain, PlanBiasTooLarge
from ambitclt.geometry import SamplingWindow
from ambitclt.kernels import (
    AmbitModel, ConstantVolatility, IIDCellVolatility, MMAFVolatility, MSTOUKernel,
)
from ambitclt.levy import CharacteristicQuadruplet, LevyMeasure, MixingLaw, PointMasses
from ambitclt.moments import ambit_cov, ambit_mean, mmaf_mean
from ambitclt.simulation import (
    SimPlan, make_plan, simulate_ambit, simulate_geometric_ma, simulate_mmaf,
    simulate_replications, stream,
)


def _se_mean(x):
    x = np.asarray(x, dtype=float)
    return x.mean(), x.std(ddof=1) / math.sqrt(x.size)


def test_deterministic_mean_field(mstou_gamma5):
    q = CharacteristicQuadruplet(1.0, 0.0)
    plan = make_plan(mstou_gamma5, q, SamplingWindow(6, 2), eps_bias=1e-2)
    s = simulate_mmaf(mstou_gamma5, q, plan)
    np.testing.assert_allclose(s.values, mmaf_mean(mstou_gamma5, q), rtol=1e-12)


def test_no_points_gives_drift_integral():
    k = MSTOUKernel(1.0, 1, MixingLaw.degenerate(1.0))
    q = CharacteristicQuadruplet(0.5, 0.0, LevyMeasure(PointMasses([2.0]), 1e-14))
    plan = make_plan(k, q, SamplingWindow(5, 2), eps_bias=1e-2)
    s = simulate_mmaf(k, q, plan)
    # mu_Lambda int f minus the compensated represented mean on the truncated cone
    T = plan.T
    trunc = 2.0 * (1 - math.exp(-T) * (1 + T))
    expected = q.mu_lambda * 2.0 - 2e-14 * trunc
    np.testing.assert_allclose(s.values, expected, rtol=1e-12)


def test_bit_identical_across_threads(mstou_gamma5, normal_jump_basis):
    plan = make_plan(mstou_gamma5, normal_jump_basis, SamplingWindow(8, 2), eps_bias=1e-2,
                     reps=6, master_seed=11)
    fn = lambda r: simulate_mmaf(mstou_gamma5, normal_jump_basis, plan, r).values  # noqa: E731
    one = simulate_replications(fn, plan, threads=1)
    many = simulate_replications(fn, plan, threads=4)
    for a, b in zip(one, many):
        assert a.tobytes() == b.tobytes()
    assert not np.array_equal(one[0], one[1])


def test_streams_distinct():
    a = stream(0, 0, 0).random(4)
    assert not np.array_equal(a, stream(0, 0, 1).random(4))
    assert not np.array_equal(a, stream(0, 1, 0).random(4))
    assert not np.array_equal(a, stream(1, 0, 0).random(4))
    np.testing.assert_array_equal(a, stream(0, 0, 0).random(4))


def test_unit_volatility_ambit_equals_mmaf(mstou_gamma5):
    for q in (CharacteristicQuadruplet(0.3, 1.0),
              CharacteristicQuadruplet(0.0, 0.5, LevyMeasure(PointMasses([-1.5, 2.0]), 0.7))):
        amb = AmbitModel(mstou_gamma5, ConstantVolatility(1.0), q)
        plan = SimPlan(SamplingWindow(6, 2), 8.0, 0.5, master_seed=4)
        for r in range(2):
            a = simulate_ambit(amb, plan, r).values
            b = simulate_mmaf(mstou_gamma5, q, plan, r).values
            assert a.tobytes() == b.tobytes()


def test_geometric_ma_trivial_paths():
    assert np.all(simulate_geometric_ma(100, noise_p=0.0) == 0.0)
    ones = simulate_geometric_ma(100, noise_p=1.0)
    assert np.all(np.abs(ones - 1.0) <= 2.0 ** -64 + 1e-15)


def test_geometric_ma_lag3_covariance():
    x = simulate_geometric_ma(10 ** 6, seed=5)
    x = x - 0.5
    prod = x[:-3] * x[3:]
    batches = prod[: (prod.size // 100) * 100].reshape(100, -1).mean(axis=1)
    m, se = _se_mean(batches)
    assert abs(m - 1 / 96) <= 3 * se


def test_stationarity_on_subwindows(mstou_gamma5, normal_jump_basis):
    plan = make_plan(mstou_gamma5, normal_jump_basis, SamplingWindow(16, 2), eps_bias=1e-2,
                     reps=40, master_seed=2)
    vals = simulate_replications(
        lambda r: simulate_mmaf(mstou_gamma5, normal_jump_basis, plan, r).values, plan)
    left = [v[:8].mean() for v in vals]
    right = [v[8:].mean() for v in vals]
    d, se = _se_mean(np.array(left) - np.array(right))
    assert abs(d) <= 3 * se
    lv = [np.mean(v[:8] ** 2) for v in vals]
    rv = [np.mean(v[8:] ** 2) for v in vals]
    d, se = _se_mean(np.array(lv) - np.array(rv))
    assert abs(d) <= 3 * se


def test_refinement_consistency():
    k = MSTOUKernel(1.0, 1, MixingLaw.gamma(6, 1))
    q = CharacteristicQuadruplet(0.0, 1.0)
    w = SamplingWindow(6, 2)
    coarse = SimPlan(w, 4.0, 0.5, 3, 60)
    fine = SimPlan(w, 8.0, 0.25, 3, 60)
    b1 = make_plan(k, q, w, eps_bias=1.0, T=4.0, grid_step=0.5).bias.total
    b2 = make_plan(k, q, w, eps_bias=1.0, T=8.0, grid_step=0.25).bias.total
    m1 = [np.mean(simulate_mmaf(k, q, coarse, r).values ** 2) for r in range(60)]
    m2 = [np.mean(simulate_mmaf(k, q, fine, r).values ** 2) for r in range(60)]
    d, se = _se_mean(np.array(m1) - np.array(m2))
    assert abs(d) <= b1 + b2 + 3 * se


def test_iid_cell_volatility_mean():
    l = MSTOUKernel(1.0, 1, MixingLaw.degenerate(1.0))
    vol = IIDCellVolatility(stats.gamma(2.0))
    q = CharacteristicQuadruplet(1.0, 0.0, LevyMeasure(PointMasses([-0.5, 0.5]), 1.0))
    amb = AmbitModel(l, vol, q)
    with pytest.raises(PlanBiasTooLarge):
        make_plan(amb, None, SamplingWindow(8, 2), eps_bias=0.1, grid_step=0.5)
    plan = make_plan(amb, None, SamplingWindow(8, 2), eps_bias=0.1, grid_step=0.1, reps=40,
                     master_seed=8)
    means = [simulate_ambit(amb, plan, r).values.mean() for r in range(plan.reps)]
    m, se = _se_mean(means)
    assert abs(m - ambit_mean(amb)) <= 3 * se + plan.bias.drift_discretization


def test_mmaf_volatility_variance():
    l = MSTOUKernel(1.0, 1, MixingLaw.degenerate(1.0))
    j = MSTOUKernel(1.0, 1, MixingLaw.degenerate(2.0))
    vol = MMAFVolatility(j, CharacteristicQuadruplet(1.0, 0.5))
    q = CharacteristicQuadruplet(0.0, 0.0, LevyMeasure(PointMasses([-1.0, 1.0]), 1.0))
    amb = AmbitModel(l, vol, q)
    plan = make_plan(amb, None, SamplingWindow(8, 2), eps_bias=5e-2, reps=40, master_seed=9)
    sq = [np.mean(simulate_ambit(amb, plan, r).values ** 2) for r in range(plan.reps)]
    m, se = _se_mean(sq)
    target = ambit_cov(amb, np.zeros(2))
    assert abs(m - target) <= 3 * se + 2 * math.sqrt(target) * plan.bias.total


def test_plan_validation(mstou_gamma5, normal_jump_basis):
    with pytest.raises(PlanBiasTooLarge):
        make_plan(mstou_gamma5, normal_jump_basis, SamplingWindow(4, 2), eps_bias=1e-6,
                  T_max=8.0)
    with pytest.raises(DegenerateDomain):
        SimPlan(SamplingWindow(4, 2), 0.0)


def test_sample_csv_round_trip(mstou_gamma5, normal_jump_basis):
    plan = make_plan(mstou_gamma5, normal_jump_basis, SamplingWindow(3, 2), eps_bias=1e-1)
    s = simulate_mmaf(mstou_gamma5, normal_jump_basis, plan)
    lines = s.to_csv().splitlines()
    assert lines[0] == "x0,x1,value" and len(lines) == 10
    assert "\r" not in s.to_csv()
    assert float(lines[1].split(",")[-1]) == s.values[0, 0]
