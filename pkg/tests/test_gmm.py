import warnings

import numpy as np
import pytest
from sklearn.base import clone

from ambitclt.exceptions import IdentifiabilityWarning, ValidationError
from ambitclt.geometry import SamplingWindow
from ambitclt.gmm import (
    MSTOUMomentEstimator, MomentConditions, _parse, empirical_moments, fit, model_moments,
    shell_lags,
)
from ambitclt.kernels import MSTOUKernel
from ambitclt.levy import MixingLaw
from ambitclt.moments import mstou_cov
from ambitclt.simulation import make_plan, simulate_mmaf

TRUTH = (8.0, 1.0, 1.0, 0.0, 1.0)
CONDS = tuple(_parse(c) for c in ("var", "R1", "R2", "R3"))


def _analytic(scale=1.0, perturb=None):
    emp = model_moments(TRUTH, CONDS) * scale
    if perturb is not None:
        emp = emp * (1 + np.asarray(perturb))
    return MomentConditions(CONDS, emp, np.full(len(CONDS), np.nan), float(emp[0]))


def test_shell_lags():
    assert shell_lags(0).tolist() == [[0, 0]]
    assert len(shell_lags(1)) == 4 and len(shell_lags(3)) == 12
    lags = {tuple(k) for k in shell_lags(2)}
    for k in lags:
        assert tuple(-x for x in k) not in lags


def test_model_moments_match_covariances():
    k = MSTOUKernel(1.0, 1, MixingLaw.gamma(8, 1))
    for j, cond in enumerate(CONDS):
        lags = np.zeros((1, 2)) if cond[0] == "var" else shell_lags(cond[1]).astype(float)
        expected = float(np.mean(mstou_cov(k, 1.0, lags)))
        assert model_moments(TRUTH, CONDS)[j] == pytest.approx(expected, rel=1e-12)


def test_zero_noise_fixed_point():
    est = MSTOUMomentEstimator().fit(_analytic())
    assert est.objective_ < 1e-6
    assert est.objective_ <= est.objective_init_
    for name, v in zip(("alpha", "beta"), TRUTH):
        assert est.estimate_[name] == pytest.approx(v, rel=1e-6)


def test_only_variance_warns():
    mc = MomentConditions(CONDS[:1], model_moments(TRUTH, CONDS[:1]), np.full(1, np.nan),
                          float(model_moments(TRUTH, CONDS[:1])[0]))
    with pytest.warns(IdentifiabilityWarning):
        MSTOUMomentEstimator(conditions=("var",)).fit(mc)


@pytest.fixture(scope="module")
def field():
    k = MSTOUKernel(1.0, 1, MixingLaw.gamma(8, 1))
    from ambitclt.levy import CharacteristicQuadruplet, LevyMeasure, make_jump_law
    q = CharacteristicQuadruplet(0.0, 0.0, LevyMeasure(make_jump_law("normal"), 1.0))
    plan = make_plan(k, q, SamplingWindow(24, 2), eps_bias=1e-3, master_seed=3)
    return simulate_mmaf(k, q, plan).values


def test_scale_equivariance(field):
    kw = dict(init={"alpha": 8.0, "mu": 0.0}, random_state=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IdentifiabilityWarning)
        a = MSTOUMomentEstimator(**kw).fit(field, )
        s = 2.5
        b = MSTOUMomentEstimator(**kw).fit(field * s)
    assert b.estimate_["sigma"] == pytest.approx(s * s * a.estimate_["sigma"], rel=1e-4)
    for name in ("alpha", "beta", "c"):
        assert b.estimate_[name] == pytest.approx(a.estimate_[name], rel=1e-4)


def test_objective_not_above_init_and_restart_idempotent():
    mc = _analytic(perturb=[0.02, -0.05, 0.04, -0.03])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IdentifiabilityWarning)
        est = MSTOUMomentEstimator().fit(mc)
        assert est.objective_ <= est.objective_init_
        again = clone(est).set_params(init=dict(est.estimate_)).fit(mc)
    for name in ("alpha", "beta", "sigma"):
        assert again.estimate_[name] == pytest.approx(est.estimate_[name], rel=1e-8, abs=1e-8)


def test_empirical_moments_centering(rng):
    a = rng.standard_normal((20, 20)) + 3.0
    mc = empirical_moments(a, ("mean", "var", "R1"))
    assert mc.empirical[0] == pytest.approx(a.mean())
    assert mc.empirical[1] == pytest.approx(a.var())
    two = empirical_moments([a, a + 0.0], ("var",))
    assert two.std_errors[0] == 0.0


def test_report_and_module_fit():
    rep = fit(_analytic(), init={"alpha": 6.0})
    assert rep["estimate"]["alpha"] == pytest.approx(8.0, rel=1e-6)
    assert rep["clt"]["mean"]["verdict"] == "fail" and rep["clt"]["mean"]["required_alpha"] == "8"
    with pytest.raises(ValidationError):
        MSTOUMomentEstimator(free=("gamma",)).fit(_analytic())
