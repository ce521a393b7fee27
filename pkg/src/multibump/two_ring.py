"""Second ring of n bumps in the (y3, y4)-plane around a frozen inner ring.

The outer radius t is chosen as the interior maximiser of

    F(t) = I_inner + nA + nB1 (V(t) - 1) - B2_raw n U(2t sin(π/n))
           - B2_raw k n U(sqrt(r_k^2 + t^2)),

where I_inner is the inner ring's reduced energy at its own maximiser r_k
and the last term is the exact inner-outer interaction (every inner bump is
at distance sqrt(r_k^2 + t^2) from every outer bump).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

from .errors import DimensionError, NoInteriorMax
from .ground_state import GroundState
from .model import Potential, RadiusWindow, RingConfig, TwoRingConfig, radius_window
from .reduced_energy import (
    EnergyConstants,
    balancing_check,
    energy_constants,
    find_ring_radius,
    reduced_energy,
)
from .search import golden_max

WIDEN = 1.25


@dataclass
class InnerRing:
    k: int
    r_k: float
    energy: float


def inner_ring(k: int, consts: EnergyConstants, pot: Potential, gs4: GroundState) -> InnerRing:
    rep = find_ring_radius(k, consts, pot, gs4)
    return InnerRing(k, rep.r_k, rep.F_max)


def _check_dim(gs4: GroundState) -> None:
    if gs4.dim < 4:
        raise DimensionError(f"the two-ring construction needs dim >= 4, got {gs4.dim}")


def outer_terms(n: int, t: float, consts: EnergyConstants, pot: Potential, gs4: GroundState) -> float:
    """nA + nB1 (V(t) - 1) - B2_raw n U(2t sin(π/n))."""
    return reduced_energy(n, t, consts, pot, gs4)


def cross_term(k: int, n: int, r_k: float, t: float, consts: EnergyConstants, gs4: GroundState) -> float:
    return -consts.B2_raw * k * n * gs4.U(math.hypot(r_k, t))


def two_ring_energy(cfg: TwoRingConfig, consts: EnergyConstants, pot: Potential, gs4: GroundState,
                    inner: InnerRing | None = None, cross: bool = True) -> float:
    _check_dim(gs4)
    k, n, t = cfg.inner.k, cfg.n, cfg.t
    if inner is None:
        inner = InnerRing(k, cfg.inner.r, reduced_energy(k, cfg.inner.r, consts, pot, gs4))
    F = inner.energy + outer_terms(n, t, consts, pot, gs4)
    if cross:
        F += cross_term(k, n, inner.r_k, t, consts, gs4)
    return F


def two_ring_energy_dt(cfg: TwoRingConfig, consts: EnergyConstants, pot: Potential, gs4: GroundState) -> float:
    k, n, t, r = cfg.inner.k, cfg.n, cfg.t, cfg.inner.r
    chord = 2 * math.sin(math.pi / n)
    rho = math.hypot(r, t)
    return (n * consts.B1 * pot.dV(t) - consts.B2_raw * n * chord * gs4.dU(chord * t)
            - consts.B2_raw * k * n * gs4.dU(rho) * t / rho)


@dataclass
class TwoRingReport:
    k: int
    n: int
    t_n: float
    window: RadiusWindow
    bracket: tuple
    F_at_t: float
    per_bump_energy: float
    cross_ratio: float
    dF: float
    d2F: float
    r_k: float
    balance_ratio: float = math.nan
    extras: dict = field(default_factory=dict)

    @property
    def in_window(self) -> bool:
        return self.window.contains(self.t_n)

    def row(self) -> dict:
        return {"n": self.n, "t_n": self.t_n, "lo": self.window.lo, "hi": self.window.hi,
                "F": self.F_at_t, "cross_ratio": self.cross_ratio}


def find_outer_radius(k: int, n: int, gs4: GroundState, pot: Potential, consts: EnergyConstants | None = None,
                      beta: float | None = None, inner: InnerRing | None = None,
                      rtol: float = 1e-10) -> TwoRingReport:
    """Maximise F(t) over the window [(α/2π - β) n ln n, (α/2π + β) n ln n] widened by 25%."""
    _check_dim(gs4)
    pot.check_exponent(gs4.p)
    if consts is None:
        consts = energy_constants(gs4)
    if inner is None:
        inner = inner_ring(k, consts, pot, gs4)
    window = radius_window(n, pot.alpha, beta)
    lo, hi = window.lo / WIDEN, window.hi * WIDEN
    inner_cfg = RingConfig(k, inner.r_k, gs4.dim)

    def cfg(t):
        return TwoRingConfig(inner_cfg, n, t, gs4.dim)

    chord = 2 * math.sin(math.pi / n)

    def obj(t):
        # t-dependent part only: the constants inner.energy + nA swamp it in rounding
        return (n * consts.B1 * (pot.V(t) - 1.0) - consts.B2_raw * n * gs4.U(chord * t)
                + cross_term(k, n, inner.r_k, t, consts, gs4))

    res = golden_max(obj, lo, hi, rtol=rtol)
    t = res.x
    dF = lambda s: two_ring_energy_dt(cfg(s), consts, pot, gs4)  # noqa: E731
    step = 1e-6 * t
    while step < 0.05 * t and not dF(t - step) > 0 > dF(t + step):
        step *= 4
    if dF(t - step) > 0 > dF(t + step):
        t = brentq(dF, t - step, t + step, xtol=1e-14 * t, rtol=1e-15)
    eps = 1e-4 * t
    d2F = (dF(t + eps) - dF(t - eps)) / (2 * eps)
    if not d2F < 0:
        raise NoInteriorMax(f"stationary point t={t:.6g} is not a maximum")
    F = two_ring_energy(cfg(t), consts, pot, gs4, inner)
    outer_inter = consts.B2_raw * n * gs4.U(2 * t * math.sin(math.pi / n))
    cross = abs(cross_term(k, n, inner.r_k, t, consts, gs4))
    _, _, bal, _ = balancing_check(n, t, gs4, pot, consts)
    return TwoRingReport(k=k, n=n, t_n=float(t), window=window, bracket=(lo, hi), F_at_t=F,
                         per_bump_energy=F / (k + n), cross_ratio=cross / outer_inter, dF=dF(t), d2F=d2F,
                         r_k=inner.r_k, balance_ratio=bal)


def decoupling(k: int, n: int, gs4: GroundState, pot: Potential, consts: EnergyConstants | None = None,
               rel: float = 0.01) -> float:
    """Largest relative change of t_n when the frozen inner radius moves by ±rel."""
    if consts is None:
        consts = energy_constants(gs4)
    inner = inner_ring(k, consts, pot, gs4)
    t0 = find_outer_radius(k, n, gs4, pot, consts, inner=inner).t_n
    worst = 0.0
    for s in (-rel, rel):
        r = inner.r_k * (1 + s)
        shifted = InnerRing(k, r, reduced_energy(k, r, consts, pot, gs4))
        t = find_outer_radius(k, n, gs4, pot, consts, inner=shifted).t_n
        worst = max(worst, abs(t - t0) / t0)
    return worst
