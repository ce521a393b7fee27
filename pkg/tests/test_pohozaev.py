import numpy as np
import pytest

from multibump.acceptance import negative_control, pohozaev_rows
from multibump.discretization import build_grid
from multibump.errors import BallOutsideGrid
from multibump.model import Potential, RingConfig
from multibump.pohozaev import (
    PohozaevBall,
    boundary_form,
    identity_residual,
    patch_from_function,
    volume_integral,
)

CFG = RingConfig(8, 13.0)
FLAT = Potential(0.0, 0.0, 3.0)


def bump_pair(gs, grid, ball):
    """A single bump U(|y - c|) and its y2-derivative: an exact pair when V ≡ 1."""
    cx, cy = ball.center

    def u(x, y):
        return gs.U(np.hypot(x - cx, y - cy))

    def xi(x, y):
        s = np.hypot(x - cx, y - cy)
        return gs.dU(s) * (y - cy) / np.where(s > 0, s, 1.0)

    return patch_from_function(grid, u, ball), patch_from_function(grid, xi, ball)


def test_zero_field_gives_zero(gs2):
    grid = build_grid(CFG, 0.1)
    ball = PohozaevBall.around_bump(CFG)
    u, _ = bump_pair(gs2, grid, ball)
    zero = patch_from_function(grid, lambda x, y: np.zeros_like(x), ball)
    assert boundary_form(u, zero, ball, 2) == 0.0
    assert volume_integral(u, zero, ball, Potential(), 2) == 0.0


def test_boundary_form_bilinear(gs2):
    grid = build_grid(CFG, 0.1)
    ball = PohozaevBall.around_bump(CFG)
    u, xi = bump_pair(gs2, grid, ball)
    cx = ball.center[0]
    g = patch_from_function(grid, lambda x, y: np.exp(-((x - cx) ** 2 + y**2) / 8), ball)
    mix = patch_from_function(
        grid, lambda x, y: 2 * xi(x, y) - 3 * np.exp(-((x - cx) ** 2 + y**2) / 8), ball)
    lhs = boundary_form(u, mix, ball, 1)
    rhs = 2 * boundary_form(u, xi, ball, 1) - 3 * boundary_form(u, g, ball, 1)
    assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-12)


def test_exact_pair_converges_at_second_order(gs2):
    ball = PohozaevBall.around_bump(CFG)
    lhs = []
    for h in (0.1, 0.05, 0.025):
        grid = build_grid(CFG, h)
        u, xi = bump_pair(gs2, grid, ball)
        a, b, _ = identity_residual(u, xi, ball, FLAT, gs2.p, i=2)
        assert b == 0.0
        lhs.append(abs(a))
    assert lhs[0] <= 1e-3
    assert 3 <= lhs[0] / lhs[1] <= 5
    assert 3 <= lhs[1] / lhs[2] <= 5


def test_ball_must_fit():
    grid = build_grid(CFG, 0.1)
    with pytest.raises(BallOutsideGrid):
        PohozaevBall((13.0, 0.0), 1.5).check(grid)
    with pytest.raises(BallOutsideGrid):
        PohozaevBall((13.0, 0.0), 40.0).check(grid)


@pytest.mark.slow
def test_solution_pair_on_k8(bundle8, fine8, pot, gs2):
    rows = pohozaev_rows([bundle8, fine8], pot, gs2.p)
    coarse = [r["residual"] for r in rows if r["h"] == bundle8.grid.h]
    fine = [r["residual"] for r in rows if r["h"] == fine8.grid.h]
    assert max(coarse) < 0.1
    assert all(f < c for f, c in zip(fine, coarse))
    control = negative_control(bundle8, pot, gs2.p, seed=0)
    assert control >= 10 * coarse[1]
