"""Local Pohozaev identity for a solution / kernel-candidate pair on a ball.

For -Δu + V u = u^p and -Δξ + V ξ = p u^{p-1} ξ, integrating
(equation for u)·∂_iξ + (equation for ξ)·∂_iu over Ω gives

    L(u, ξ, Ω) + ∮ (V - 1) u ξ ν_i - ∮ u^p ξ ν_i = ∫_Ω u ξ ∂_iV,

    L(u, ξ, Ω) = -∮ ∂_νu ∂_iξ - ∮ ∂_νξ ∂_iu + ∮ <∇u, ∇ξ> ν_i + ∮ u ξ ν_i.

Fields live on the polar sector grid; near the ball they are lifted by
reflection, differentiated by centred differences and interpolated with
bicubic splines in (ρ, θ).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import RectBivariateSpline

from .discretization import Field, SectorGrid
from .errors import BallOutsideGrid
from .ground_state import GroundState, moments
from .model import Potential, RingConfig, bump_spacing

EPS = 1e-30


@dataclass(frozen=True)
class PohozaevBall:
    center: tuple[float, float]
    radius: float
    nodes: int = 256

    @classmethod
    def around_bump(cls, cfg: RingConfig, frac: float = 0.5, nodes: int = 256) -> "PohozaevBall":
        """B_{frac·|x2 - x1|}(x1)."""
        return cls((cfg.r, 0.0), frac * bump_spacing(cfg), nodes)

    def check(self, grid: SectorGrid) -> None:
        c = math.hypot(*self.center)
        if self.radius <= 2:
            raise BallOutsideGrid(f"ball radius {self.radius:.3g} must exceed 2")
        if c + self.radius > grid.R_out - 4 * grid.h or c - self.radius < 4 * grid.h:
            raise BallOutsideGrid(f"ball |c|={c:.4g}, R={self.radius:.4g} leaves the grid (R_out={grid.R_out:.4g})")

    def circle(self):
        phi = 2 * np.pi * np.arange(self.nodes) / self.nodes
        nx, ny = np.cos(phi), np.sin(phi)
        return self.center[0] + self.radius * nx, self.center[1] + self.radius * ny, nx, ny


class PatchField:
    """Values, ρ- and θ-derivatives on a polar patch, with spline evaluation of f and ∇f."""

    def __init__(self, rho, theta, values):
        f_r = np.gradient(values, rho, axis=0, edge_order=2)
        f_t = np.gradient(values, theta, axis=1, edge_order=2)
        self._f = RectBivariateSpline(rho, theta, values, kx=3, ky=3)
        self._fr = RectBivariateSpline(rho, theta, f_r, kx=3, ky=3)
        self._ft = RectBivariateSpline(rho, theta, f_t, kx=3, ky=3)

    def __call__(self, x, y):
        return self._f(np.hypot(x, y), np.arctan2(y, x), grid=False)

    def grad(self, x, y):
        r = np.hypot(x, y)
        t = np.arctan2(y, x)
        fr = self._fr(r, t, grid=False)
        ft = self._ft(r, t, grid=False) / r
        c, s = np.cos(t), np.sin(t)
        return fr * c - ft * s, fr * s + ft * c


def _patch_window(grid: SectorGrid, ball: PohozaevBall):
    c = math.hypot(*ball.center)
    lo = max(0.0, c - ball.radius - 1.0)
    hi = min(grid.R_out, c + ball.radius + 1.0)
    rows = np.nonzero((grid.rho >= lo) & (grid.rho <= hi))[0]
    n = np.arange(-2 * grid.Q, 2 * grid.Q + 1)
    return rows, n


def patch_from_field(f: Field | np.ndarray, ball: PohozaevBall, parity: int = 1,
                     grid: SectorGrid | None = None) -> PatchField:
    """Lift an H_s sector field (parity +1) or an odd one (parity -1) to θ ∈ [-2π/k, 2π/k]."""
    if isinstance(f, Field):
        grid, values = f.grid, f.values
    else:
        values = f
    ball.check(grid)
    rows, n = _patch_window(grid, ball)
    disk = grid.lift(values, parity)
    cols = n % disk.shape[1]
    return PatchField(grid.rho[rows], n * grid.dtheta, disk[np.ix_(rows, cols)])


def patch_from_function(grid: SectorGrid, fn, ball: PohozaevBall) -> PatchField:
    """Sample fn(x, y) on the polar nodes around the ball."""
    ball.check(grid)
    rows, n = _patch_window(grid, ball)
    R, T = np.meshgrid(grid.rho[rows], n * grid.dtheta, indexing="ij")
    return PatchField(grid.rho[rows], n * grid.dtheta, fn(R * np.cos(T), R * np.sin(T)))


def _axis(vec, i):
    return vec[i - 1]


def boundary_form(u: PatchField, xi: PatchField, ball: PohozaevBall, i: int = 1) -> float:
    x, y, nx, ny = ball.circle()
    gu = u.grad(x, y)
    gx = xi.grad(x, y)
    nu_i = _axis((nx, ny), i)
    dnu = gu[0] * nx + gu[1] * ny
    dnx = gx[0] * nx + gx[1] * ny
    integrand = (-dnu * _axis(gx, i) - dnx * _axis(gu, i)
                 + (gu[0] * gx[0] + gu[1] * gx[1]) * nu_i + u(x, y) * xi(x, y) * nu_i)
    return float(np.mean(integrand) * 2 * np.pi * ball.radius)


def _dV_axis(pot: Potential, x, y, i):
    r = np.hypot(x, y)
    return pot.dV(r) * _axis((x, y), i) / r


def volume_integral(u: PatchField, xi: PatchField, ball: PohozaevBall, pot: Potential, i: int = 1,
                    ns: int = 64) -> float:
    """∫_Ω u ξ ∂_iV by Gauss-Legendre in the radius and the trapezoid rule in angle."""
    if pot.trivial:
        return 0.0
    xs, ws = leggauss(ns)
    s = 0.5 * ball.radius * (xs + 1)
    ws = 0.5 * ball.radius * ws
    phi = 2 * np.pi * np.arange(ball.nodes) / ball.nodes
    S, P = np.meshgrid(s, phi, indexing="ij")
    x = ball.center[0] + S * np.cos(P)
    y = ball.center[1] + S * np.sin(P)
    f = u(x.ravel(), y.ravel()) * xi(x.ravel(), y.ravel()) * _dV_axis(pot, x.ravel(), y.ravel(), i)
    f = f.reshape(S.shape) * S
    return float(np.sum(ws[:, None] * f) * 2 * np.pi / ball.nodes)


def identity_residual(u: PatchField, xi: PatchField, ball: PohozaevBall, pot: Potential, p: float,
                      i: int = 1):
    """(lhs, rhs, |lhs - rhs| / (|lhs| + |rhs| + ε))."""
    x, y, nx, ny = ball.circle()
    nu_i = _axis((nx, ny), i)
    uu, xx = u(x, y), xi(x, y)
    V = pot.V(np.hypot(x, y))
    extra = np.mean(((V - 1) * uu * xx - np.abs(uu) ** (p - 1) * uu * xx) * nu_i) * 2 * np.pi * ball.radius
    lhs = boundary_form(u, xi, ball, i) + float(extra)
    rhs = volume_integral(u, xi, ball, pot, i)
    return lhs, rhs, abs(lhs - rhs) / (abs(lhs) + abs(rhs) + EPS)


def solution_pair(bundle, frac: float = 0.5, nodes: int = 256):
    """(u_k, ∂_θu_k) as patch fields on B_{frac·d}(x1).

    ∂_θu_k is odd in y2 while u_k is even, so the identity is trivial on
    axis 1 for this pair; evaluate it with i=2.
    """
    from .spectral import theta_derivative

    ball = PohozaevBall.around_bump(bundle.cfg, frac, nodes)
    u = patch_from_field(bundle.u, ball, 1)
    xi = patch_from_field(theta_derivative(bundle.grid, bundle.u.values), ball, -1, grid=bundle.grid)
    return u, xi, ball


def random_pair(grid: SectorGrid, ball: PohozaevBall, seed: int = 0, bumps: int = 6):
    """Smooth seeded random fields near the ball, used as a negative control."""
    rng = np.random.default_rng(seed)

    def make():
        cx = ball.center[0] + rng.uniform(-1, 1, bumps) * ball.radius
        cy = ball.center[1] + rng.uniform(-1, 1, bumps) * ball.radius
        amp = rng.normal(size=bumps)
        width = rng.uniform(1.0, 3.0, bumps)

        def fn(x, y):
            out = np.zeros_like(x)
            for a, b, c, w in zip(cx, cy, amp, width):
                out += c * np.exp(-((x - a) ** 2 + (y - b) ** 2) / w**2)
            return out
        return patch_from_function(grid, fn, ball)

    return make(), make()


def balancing_via_pohozaev(bundle, xi: Field, b_m: float, gs: GroundState, pot: Potential,
                           frac: float = 0.5):
    """Direct ∫_Ω u ξ ∂_1V against its leading-order surrogate -b_m V''(r) ∫U U'(|y|) y1²/|y|.

    ξ is an H_s candidate written as b_m ΣZ_j + ξ*; near x1 the Z_1 part
    carries the surrogate.
    """
    ball = PohozaevBall.around_bump(bundle.cfg, frac)
    u = patch_from_field(bundle.u, ball, 1)
    x = patch_from_field(xi, ball, 1)
    direct = volume_integral(u, x, ball, pot, i=1)
    moment = moments(gs)[3]
    surrogate = -b_m * pot.d2V(bundle.r_star) * moment if not pot.trivial else 0.0
    return direct, float(surrogate)
