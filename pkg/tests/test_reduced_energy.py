import dataclasses
import math

import numpy as np
import pytest
from scipy.integrate import quad

from multibump.errors import NoInteriorMax
from multibump.model import Potential, radius_window
from multibump.reduced_energy import (
    EnergyConstants,
    balance_slope,
    balancing_check,
    energy_constants,
    find_ring_radius,
    interaction_integral,
    reduced_energy,
    reduced_energy_dr,
)

KS = (8, 12, 16, 24, 32)


@pytest.fixture(scope="module")
def reports(consts, pot, gs2):
    return [find_ring_radius(k, consts, pot, gs2) for k in KS]


def test_constants_one_dimensional(gs1):
    c = energy_constants(gs1)
    assert c.A == pytest.approx(4 / 3, rel=1e-7)
    assert c.A == pytest.approx((0.5 - 1 / (gs1.p + 1)) * gs1.massP1, rel=1e-7)
    assert c.B1 == pytest.approx(2.0, rel=1e-7)
    # translated-product limit: ∫U(y)^3 e^y dy with U = √2 sech
    oracle = quad(lambda y: (math.sqrt(2) / math.cosh(y)) ** 3 * math.exp(y), -40, 40, limit=200)[0]
    assert c.B2_raw == pytest.approx(oracle, rel=2e-3)


def test_constants_defaults(consts, gs2):
    assert consts.A > 0 and consts.B1 > 0 and consts.B2 > 0
    assert consts.B1 == pytest.approx(gs2.mass2 / 2)
    assert consts.B2 == pytest.approx(consts.B2_raw / 2)
    assert consts.plateau_d <= 20


def test_interaction_integral_limits(gs2):
    assert interaction_integral(gs2, 0.0) == pytest.approx(gs2.massP1, rel=1e-6)
    r10 = interaction_integral(gs2, 10.0) / gs2.U(10.0)
    r12 = interaction_integral(gs2, 12.0) / gs2.U(12.0)
    assert r10 == pytest.approx(r12, rel=0.02)


def test_interaction_even_in_d_for_p_one(gs2):
    linear = dataclasses.replace(gs2, p=1.0)
    assert interaction_integral(linear, 3.0) == pytest.approx(interaction_integral(linear, -3.0), rel=1e-10)


def test_reduced_energy_derivative(consts, pot, gs2):
    for r in (10.0, 20.0, 35.0):
        h = 1e-4 * r
        fd = (reduced_energy(12, r + h, consts, pot, gs2) - reduced_energy(12, r - h, consts, pot, gs2)) / (2 * h)
        assert fd == pytest.approx(reduced_energy_dr(12, r, consts, pot, gs2), rel=1e-5)


def test_no_interior_max_without_repulsion(consts, gs2):
    with pytest.raises(NoInteriorMax):
        find_ring_radius(12, consts, Potential(0.0, 0.0, 3.0), gs2)
    flat = dataclasses.replace(consts, B2_raw=0.0, B2=0.0)
    with pytest.raises(NoInteriorMax):
        find_ring_radius(12, flat, Potential(), gs2)


def test_stationarity_and_concavity(reports):
    for rep in reports:
        assert rep.d2F < 0
        assert abs(rep.dF) <= 1e-6 * abs(rep.d2F) * rep.r_k


@pytest.mark.xfail(strict=True, reason="a stronger potential tail moves the maximiser inward; see the ledger")
def test_doubling_a1_increases_radius(consts, gs2, reports):
    pot2 = Potential(2.0, 0.0, 3.0)
    for rep in reports:
        assert find_ring_radius(rep.k, consts, pot2, gs2).r_k > rep.r_k


def test_doubling_a1_moves_radius_inward(consts, gs2, reports):
    # at the maximiser a1 α B1 / r^(α+1) balances an attraction decaying like e^(-d),
    # so a larger a1 is balanced at a smaller r
    pot2 = Potential(2.0, 0.0, 3.0)
    for rep in reports:
        assert find_ring_radius(rep.k, consts, pot2, gs2).r_k < rep.r_k


def test_all_pairs_changes_little(consts, pot, gs2, reports):
    for rep in reports[:2]:
        full = find_ring_radius(rep.k, consts, pot, gs2, all_pairs=True)
        assert full.r_k == pytest.approx(rep.r_k, rel=1e-3)


@pytest.mark.xfail(strict=True, reason="r_k/(k ln k) sits near 0.77 at k=12, above the window; see the ledger")
def test_k12_in_window(reports):
    assert reports[1].in_window


def test_radius_grows_like_k_log_k(reports):
    scaled = [rep.scaled for rep in reports]
    assert all(a > b for a, b in zip(scaled, scaled[1:]))
    assert all(0.5 < s < 1.0 for s in scaled)


def test_balancing_ratio(reports):
    for rep in reports:
        if rep.k >= 16:
            assert 0.8 <= rep.residual_ratio <= 1.25


def test_direct_and_coefficient_forms(reports):
    for rep in reports:
        if rep.r_k >= 20:
            assert rep.extras["coef_rel_diff"] <= 0.03
            assert rep.coefficient_match == "alpha"


def test_direct_integral_linear_in_a1(reports, gs2):
    rep = reports[2]
    a, _, _, _ = balancing_check(rep.k, rep.r_k, gs2, Potential(1.0, 0.0, 3.0))
    b, _, _, _ = balancing_check(rep.k, rep.r_k, gs2, Potential(2.5, 0.0, 3.0))
    assert b == pytest.approx(2.5 * a, rel=1e-12)


def test_balance_slope(reports, gs2):
    assert balance_slope(reports, gs2, 3.0) == pytest.approx(1.0, abs=0.1)


def test_window_membership_is_recorded(reports):
    for rep in reports:
        win = radius_window(rep.k, 3.0)
        assert rep.in_window == win.contains(rep.r_k)


def test_energy_constants_type():
    with pytest.raises(AssertionError):
        EnergyConstants(A=-1.0, B1=1.0, B2=1.0, B2_raw=2.0)
    assert np.isnan(EnergyConstants(1.0, 1.0, 1.0, 2.0).plateau_d)
