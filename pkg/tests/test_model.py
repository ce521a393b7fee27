import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multibump.errors import BetaTooLarge, ConfigError, DimensionError, DomainError, NoInteriorMax
from multibump.model import (
    Potential,
    RingConfig,
    TwoRingConfig,
    bump_spacing,
    bump_spacing_asymptotic,
    eval_dV,
    eval_V,
    radius_window,
    ring_points,
    two_ring_points,
)
from multibump.search import golden_max


def test_constant_potential():
    pot = Potential(0.0, 0.0, 3.0)
    assert eval_V(pot, 7.0) == 1.0
    assert eval_dV(pot, 7.0) == 0.0
    assert pot.trivial


def test_potential_values():
    pot = Potential(1.0, 0.0, 3.0)
    assert eval_V(pot, 2.0) == pytest.approx(1.125)
    assert eval_dV(pot, 2.0) == pytest.approx(-0.1875)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 50.0), st.floats(-2.0, 2.0), st.floats(2.5, 6.0))
def test_derivative_matches_central_difference(r, a2, alpha):
    pot = Potential(1.0, a2, alpha)
    h = 1e-4 * r
    # the a1 and a2 terms can cancel, so tolerances scale with their sizes;
    # V itself is near 1, which adds a rounding error of order eps/h
    s1 = alpha / r ** (alpha + 1) + (alpha + 1) * abs(a2) / r ** (alpha + 2)
    s2 = (alpha + 1) * s1 / r + abs(a2) / r ** (alpha + 3)
    fd = (pot.V(r + h) - pot.V(r - h)) / (2 * h)
    assert fd == pytest.approx(pot.dV(r), rel=1e-6, abs=1e-5 * s1 + 1e-15 / h)
    fd2 = (pot.dV(r + h) - pot.dV(r - h)) / (2 * h)
    assert fd2 == pytest.approx(pot.d2V(r), rel=1e-6, abs=1e-5 * s2)


def test_domain_error():
    with pytest.raises(DomainError):
        eval_V(Potential(), 0.0)
    with pytest.raises(DomainError):
        eval_dV(Potential(), -1.0)


def test_exponent_constraint():
    Potential(alpha=3.0).check_exponent(3.0)
    with pytest.raises(ConfigError):
        Potential(alpha=1.5).check_exponent(3.0)
    with pytest.raises(ConfigError):
        Potential(alpha=3.0).check_exponent(2.0)  # needs alpha > 4


def test_ring_points_small_cases():
    np.testing.assert_allclose(ring_points(RingConfig(4, 1.0)), [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)
    pts = ring_points(RingConfig(2, 5.0))
    np.testing.assert_allclose(pts, [[5, 0], [-5, 0]], atol=1e-15)
    assert bump_spacing(RingConfig(2, 5.0)) == pytest.approx(10.0)
    assert bump_spacing(RingConfig(6, 1.0)) == pytest.approx(1.0)
    assert bump_spacing(RingConfig(4, 10.0)) == pytest.approx(14.1421356, abs=1e-7)


def test_spacing_taylor_bound():
    cfg = RingConfig(1000, 1000.0)
    bound = 2 * math.pi * cfg.r * (math.pi / cfg.k) ** 2 / 6 * 1.01
    assert abs(bump_spacing(cfg) - bump_spacing_asymptotic(cfg)) <= bound


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 64), st.floats(0.1, 500.0))
def test_rotation_permutes_ring(k, r):
    pts = ring_points(RingConfig(k, r))
    assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), r, rtol=0, atol=1e-12 * r)
    a = 2 * math.pi / k
    rot = pts @ np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])
    np.testing.assert_allclose(rot, np.roll(pts, -1, axis=0), atol=1e-12 * r)


def test_two_ring_points():
    cfg = TwoRingConfig(RingConfig(8, 3.0, 4), 16, 5.0)
    pts = two_ring_points(cfg)
    assert pts.shape == (24, 4)
    np.testing.assert_allclose(np.linalg.norm(pts[8:, 2:], axis=1), 5.0)
    assert np.all(pts[8:, :2] == 0) and np.all(pts[:8, 2:] == 0)
    with pytest.raises(DimensionError):
        TwoRingConfig(RingConfig(8, 3.0, 2), 16, 5.0, dim=3)
    with pytest.raises(ConfigError):
        TwoRingConfig(RingConfig(8, 3.0, 4), 15, 5.0)


def test_radius_window():
    w = radius_window(10, 3.0, 0.1)
    assert w.lo == pytest.approx(8.69, abs=0.01)
    assert w.hi == pytest.approx(13.30, abs=0.01)
    assert radius_window(2, 3.0, 0.1).lo > 0
    c = 3.0 / (2 * math.pi)
    for k in (4, 16, 64):
        win = radius_window(k, 3.0, 0.1)
        assert win.hi / win.lo == pytest.approx((c + 0.1) / (c - 0.1), rel=1e-14)
    with pytest.raises(BetaTooLarge):
        radius_window(10, 3.0, c)


def test_golden_max_interior_and_endpoint():
    res = golden_max(lambda x: -(x - 1.3) ** 2, 0.0, 4.0)
    assert res.x == pytest.approx(1.3, rel=1e-8)
    with pytest.raises(NoInteriorMax):
        golden_max(lambda x: x, 0.0, 1.0)
