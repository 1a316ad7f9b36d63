import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambitclt.exceptions import ParameterOutOfRange, ValidationError
from ambitclt.kernels import (
    ExpBoundedKernel, GeometricMAKernel, MSTOUKernel, TabulatedKernel, lp_norm,
)
from ambitclt.levy import MixingLaw


def test_mstou_evaluate_examples():
    k = MSTOUKernel(1.0, 1, MixingLaw.degenerate(1.0))
    assert k.evaluate(1.0, np.array([2.0, 0.0])) == pytest.approx(math.exp(-2), rel=1e-15)
    assert k.evaluate(1.0, np.array([2.0, 1.5])) == pytest.approx(math.exp(-2), rel=1e-15)
    # outside the cone: negative time lag or too far in space
    assert k.evaluate(1.0, np.array([-2.0, 0.0])) == 0.0
    assert k.evaluate(1.0, np.array([2.0, 3.0])) == 0.0


def test_geometric_ma_coefficients():
    g = GeometricMAKernel()
    assert g.evaluate(None, 3) == 0.0625
    assert g.evaluate(None, -1) == 0.0
    np.testing.assert_array_equal(g.coefficients(4), [0.5, 0.25, 0.125, 0.0625])


def test_lp_norm_examples():
    deg = MSTOUKernel(1.0, 1, MixingLaw.degenerate(1.0))
    assert lp_norm(deg, 2) == pytest.approx(math.sqrt(0.5), rel=1e-10)
    assert lp_norm(MSTOUKernel(1.0, 1, MixingLaw.gamma(5, 1)), 1) == pytest.approx(1 / 6, rel=1e-10)
    assert lp_norm(GeometricMAKernel(), 2) == pytest.approx(math.sqrt(1 / 3), rel=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_well_definedness_threshold(m):
    with pytest.raises(ParameterOutOfRange):
        MSTOUKernel(1.0, m, MixingLaw.gamma(m + 1, 1))
    MSTOUKernel(1.0, m, MixingLaw.gamma(m + 1.01, 1))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=8), st.data())
def test_tabulated_exact_at_nodes_and_linear_between(vals, data):
    axis = np.arange(len(vals), dtype=float)
    k = TabulatedKernel([axis], vals)
    np.testing.assert_array_equal(k.evaluate(None, axis[:, None]), vals)
    i = data.draw(st.integers(0, len(vals) - 2))
    w = data.draw(st.floats(0, 1))
    got = k.evaluate(None, np.array([[i + w]]))[0]
    assert got == pytest.approx((1 - w) * vals[i] + w * vals[i + 1], abs=1e-12)
    assert k.evaluate(None, np.array([[len(vals) + 1.0]]))[0] == 0.0


def test_tabulated_bilinear():
    k = TabulatedKernel([np.array([0.0, 1.0]), np.array([0.0, 1.0])], [[0.0, 1.0], [2.0, 3.0]])
    assert k.evaluate(None, np.array([[0.5, 0.5]]))[0] == pytest.approx(1.5)


def test_exp_bounded_envelope_enforced():
    k = ExpBoundedKernel(1.0, 1.0, 1)
    assert k.evaluate(None, np.array([2.0])) <= math.exp(-1.0) + 1e-15
    with pytest.raises(ValidationError):
        ExpBoundedKernel(1.0, 1.0, 1, evaluator=lambda x: np.exp(-0.1 * np.abs(x[..., 0])))
