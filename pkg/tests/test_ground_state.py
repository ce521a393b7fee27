import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multibump.errors import ConfigError
from multibump.ground_state import (
    closed_form_1d,
    eval_dU,
    eval_U,
    load_ground_state,
    moments,
    save_ground_state,
    solve_ground_state,
)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_one_dimensional_profile_matches_closed_form(p):
    gs = solve_ground_state(1, p)
    assert gs.u0 == pytest.approx(closed_form_1d(p, 0.0), abs=1e-10)
    assert np.max(np.abs(gs.u_table - closed_form_1d(p, gs.grid))) <= 1e-8


def test_closed_form_values():
    assert closed_form_1d(3.0, 0.0) == pytest.approx(math.sqrt(2))
    assert closed_form_1d(2.0, 0.0) == pytest.approx(1.5)


def test_eval_inside_and_at_origin(gs1):
    assert eval_U(gs1, 2.0) == pytest.approx(math.sqrt(2) / math.cosh(2.0), rel=1e-8)
    assert eval_U(gs1, 0.0) == pytest.approx(gs1.u0)
    assert eval_dU(gs1, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_moments_one_dimensional(gs1):
    mass2, massp1, grad2, y1sq = moments(gs1)
    assert mass2 == pytest.approx(4.0, rel=1e-8)
    assert massp1 == pytest.approx(16 / 3, rel=1e-8)
    # y1sq = ∫U U' |y| over R = -mass2/2 after integrating by parts
    assert y1sq == pytest.approx(-mass2 / 2, rel=1e-6)


@pytest.mark.parametrize("dim,p", [(1, 2.0), (1, 3.0), (2, 3.0), (3, 3.0), (4, 2.0)])
def test_invariants(dim, p):
    gs = solve_ground_state(dim, p)
    derrick, poho = gs.identity_residuals()
    assert derrick <= 1e-6 and poho <= 1e-6
    assert gs.u0 > 1
    assert np.all(gs.du_table[1:] < 0)
    plateau = gs.decay_plateau()
    assert np.ptp(plateau) / np.mean(plateau) < 0.01


def test_dim2_central_value_against_fine_shooting(gs2):
    fine = solve_ground_state(2, 3.0, h_ode=1e-4)
    assert gs2.u0 == pytest.approx(fine.u0, abs=5e-5)
    assert round(fine.u0, 4) == 2.2062


def test_fourth_order_in_h_ode():
    u = [solve_ground_state(2, 3.0, h_ode=h).u0 for h in (0.02, 0.01, 0.005)]
    assert 12 <= (u[0] - u[1]) / (u[1] - u[2]) <= 20


def test_tail_continuity_at_r_max(gs2):
    r = gs2.r_max
    inside = gs2.U(r - 1e-9)
    outside = gs2.U(r + 1e-9)
    assert abs(outside - inside) <= 0.005 * inside
    assert gs2.dU(r + 1.0) < 0


def test_energy_via_derrick(gs2):
    assert gs2.energy == pytest.approx((0.5 - 1 / (gs2.p + 1)) * gs2.massP1, rel=1e-6)


@pytest.mark.parametrize("dim,p", [(3, 5.0), (4, 3.0), (2, 1.0)])
def test_rejects_bad_exponent(dim, p):
    with pytest.raises(ConfigError):
        solve_ground_state(dim, p)


def test_rejects_short_domain():
    with pytest.raises(ConfigError):
        solve_ground_state(2, 3.0, r_max=10.0)


def test_cache_round_trip(tmp_path, gs1):
    meta, table = save_ground_state(gs1, tmp_path)
    assert table.read_text().splitlines()[0] == "r,U,dU"
    back = load_ground_state(1, 3.0, gs1.h_ode, gs1.r_max, tmp_path)
    assert back is not None
    assert back.u0 == gs1.u0
    np.testing.assert_array_equal(back.u_table, gs1.u_table)
    assert load_ground_state(1, 3.0, gs1.h_ode / 2, gs1.r_max, tmp_path) is None


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 40.0))
def test_profile_positive_and_decreasing(r):
    gs = _gs2_cached()
    assert gs.U(r) > 0
    assert gs.dU(r) <= 0


_CACHE = {}


def _gs2_cached():
    if "gs" not in _CACHE:
        from multibump.ground_state import ground_state

        _CACHE["gs"] = ground_state(2, 3.0)
    return _CACHE["gs"]
