import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ambitclt.exceptions import ConditionViolated
from ambitclt.geometry import (
    LexHalfspace, LightCone, SamplingWindow, cone_constant_b, complement_cone_domain, in_V,
    in_V_h, lex_less, psi, psi_inverse, truncated_cone_domain,
)


def test_cone_constant_examples():
    assert cone_constant_b(LightCone(1.0, 1)) == pytest.approx(-1 / math.sqrt(2), abs=1e-15)
    assert cone_constant_b(LightCone(1e-9, 1)) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(ConditionViolated):
        cone_constant_b(LexHalfspace(2))


def test_psi_examples():
    assert psi(LightCone(1.0, 1), 4.0) == pytest.approx(2.0, abs=1e-14)
    assert psi(LightCone(math.sqrt(3), 1), 4 * math.sqrt(2)) == pytest.approx(2.0, abs=1e-14)
    assert psi(LightCone(1.0, 1), 4.0, factor=0.5) == pytest.approx(1.0, abs=1e-14)
    A0 = LightCone(1.0, 1)
    assert psi_inverse(A0, psi(A0, 3.7)) == pytest.approx(3.7, rel=1e-14)


def test_truncated_domain_examples():
    A0 = LightCone(1 / math.sqrt(2), 1)
    d0 = truncated_cone_domain(A0, 0.0)
    assert d0.u_min == 0.0 and d0.exact
    d = truncated_cone_domain(A0, 2.0)
    assert d.u_min == 2.0 and d.exact and d.c == pytest.approx(1 / math.sqrt(2))
    A1 = LightCone(math.sqrt(2), 1)
    d1 = truncated_cone_domain(A1, 2.0)
    assert d1.u_min == pytest.approx(math.sqrt(2)) and not d1.exact
    assert complement_cone_domain(A0, 2.0).u_max == 2.0


def _lex_brute(y, z):
    for a, b in zip(y, z):
        if a != b:
            return a < b
    return False


points = st.lists(st.integers(-3, 3), min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(points, points, points)
def test_lex_order_total_and_transitive(y, z, w):
    y, z, w = map(np.array, (y, z, w))
    assert lex_less(y, z) == _lex_brute(y, z)
    if not np.array_equal(y, z):
        assert lex_less(y, z) != lex_less(z, y)
    if lex_less(y, z) and lex_less(z, w):
        assert lex_less(y, w)


@settings(max_examples=200, deadline=None)
@given(points, points, st.integers(0, 4))
def test_V_h_membership_brute_force(t, s, h):
    t, s = np.array(t), np.array(s)
    expected = _lex_brute(s, t) and np.max(np.abs(t - s)) >= h
    assert in_V_h(t, s, h) == expected
    assert in_V(t, s) == _lex_brute(s, t)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 3), st.floats(0, 50), st.floats(0, 50))
def test_psi_monotone_and_domains_nested(c, h1, h2):
    h1, h2 = sorted((h1, h2))
    A0 = LightCone(c, 1)
    assert psi(A0, h1) <= psi(A0, h2)
    d1 = truncated_cone_domain(A0, psi(A0, h1))
    d2 = truncated_cone_domain(A0, psi(A0, h2))
    assert d2.u_min >= d1.u_min


def test_window_sizes():
    for n, m in [(1, 1), (2, 2), (5, 2), (4, 3), (7, 1)]:
        w = SamplingWindow(n, m)
        assert w.size == n ** m == w.points.shape[0]
        assert w.boundary_size == n ** m - max(n - 2, 0) ** m == int(w.boundary_mask().sum())


def test_disjointness_by_rejection_sampling(rng):
    """For i in V_j^h, A_i misses A_j minus V_j^psi(h) (up to a null set)."""
    for c in (0.5, 1.0, 2.0):
        A0 = LightCone(c, 1)
        for _ in range(60):
            j = rng.integers(-5, 5, size=2)
            h = int(rng.integers(1, 6))
            while True:
                i = j + rng.integers(-h - 2, h + 3, size=2)
                if in_V_h(j, i, h):
                    break
            p = psi(A0, h)
            # A_j minus V_j^psi: cone points within sup distance psi of j
            u = rng.uniform(0, p, 20000)
            xi = rng.uniform(-1, 1, 20000) * np.minimum(c * u, p)
            s = np.stack([j[0] - u, j[1] + xi], axis=1)
            assert not np.any(A0.contains0(s - i))
