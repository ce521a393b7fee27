"""Potential, ring geometry and the admissible radius window."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BetaTooLarge, ConfigError, DimensionError, DomainError


@dataclass(frozen=True)
class Potential:
    """V(r) = 1 + a1 / r^alpha + a2 / r^(alpha+1)."""

    a1: float = 1.0
    a2: float = 0.0
    alpha: float = 3.0

    def check_exponent(self, p: float) -> None:
        """Validate alpha > max(4/(p-1), 2); a1 > 0 is required unless the potential is trivial."""
        bound = max(4.0 / (p - 1.0), 2.0)
        if not self.alpha > bound:
            raise ConfigError(f"alpha={self.alpha} must exceed max(4/(p-1), 2) = {bound:g} for p={p}")
        if self.a1 < 0:
            raise ConfigError(f"a1={self.a1} must be positive")

    @property
    def trivial(self) -> bool:
        return self.a1 == 0 and self.a2 == 0

    def V(self, r):
        return eval_V(self, r)

    def dV(self, r):
        return eval_dV(self, r)

    def d2V(self, r):
        r = _positive(r)
        a = self.alpha
        out = a * (a + 1) * self.a1 / r ** (a + 2) + (a + 1) * (a + 2) * self.a2 / r ** (a + 3)
        return out if np.ndim(out) else float(out)


def _positive(r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError(f"potential evaluated at r <= 0 (min r = {np.min(r)})")
    return r


def eval_V(pot: Potential, r):
    r = _positive(r)
    out = 1.0 + pot.a1 / r**pot.alpha + pot.a2 / r ** (pot.alpha + 1)
    return out if np.ndim(out) else float(out)


def eval_dV(pot: Potential, r):
    r = _positive(r)
    a = pot.alpha
    out = -a * pot.a1 / r ** (a + 1) - (a + 1) * pot.a2 / r ** (a + 2)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class RingConfig:
    k: int
    r: float
    dim: int = 2

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")
        if not self.r > 0:
            raise ConfigError(f"r must be positive, got {self.r}")
        if self.dim < 2:
            raise DimensionError(f"ring configurations need dim >= 2, got {self.dim}")

    @property
    def spacing(self) -> float:
        return bump_spacing(self)

    def points(self) -> np.ndarray:
        return ring_points(self)

    def with_r(self, r: float) -> "RingConfig":
        return RingConfig(self.k, r, self.dim)


@dataclass(frozen=True)
class TwoRingConfig:
    inner: RingConfig
    n: int
    t: float
    dim: int = 4

    def __post_init__(self):
        if self.dim < 4:
            raise DimensionError(f"two-ring configurations need dim >= 4, got {self.dim}")
        if self.n % 2 or self.n < self.inner.k:
            raise ConfigError(f"n must be even and >= k, got n={self.n}, k={self.inner.k}")
        if not self.t > 0:
            raise ConfigError(f"t must be positive, got {self.t}")


def ring_points(cfg: RingConfig) -> np.ndarray:
    """k x dim array of x_j = (r cos(2(j-1)π/k), r sin(2(j-1)π/k), 0, ...)."""
    ang = 2.0 * np.pi * np.arange(cfg.k) / cfg.k
    pts = np.zeros((cfg.k, cfg.dim))
    pts[:, 0] = cfg.r * np.cos(ang)
    pts[:, 1] = cfg.r * np.sin(ang)
    return pts


def two_ring_points(cfg: TwoRingConfig) -> np.ndarray:
    """Inner ring in the (y1, y2)-plane followed by n outer points in the (y3, y4)-plane."""
    inner = ring_points(RingConfig(cfg.inner.k, cfg.inner.r, cfg.dim))
    ang = 2.0 * np.pi * np.arange(cfg.n) / cfg.n
    outer = np.zeros((cfg.n, cfg.dim))
    outer[:, 2] = cfg.t * np.cos(ang)
    outer[:, 3] = cfg.t * np.sin(ang)
    return np.vstack([inner, outer])


def bump_spacing(cfg: RingConfig) -> float:
    return 2.0 * cfg.r * math.sin(math.pi / cfg.k)


def bump_spacing_asymptotic(cfg: RingConfig) -> float:
    """2πr/k, which differs from the exact spacing by at most 2πr (π/k)^2 / 6."""
    return 2.0 * math.pi * cfg.r / cfg.k


@dataclass(frozen=True)
class RadiusWindow:
    k: int
    alpha: float
    beta: float
    lo: float
    hi: float

    def contains(self, r: float) -> bool:
        return self.lo <= r <= self.hi

    def scaled(self, r: float) -> float:
        """r / (k ln k), the quantity the window constrains to [α/2π - β, α/2π + β]."""
        return r / (self.k * math.log(self.k))


def default_beta(alpha: float) -> float:
    return 0.15 * alpha / (2.0 * math.pi)


def radius_window(k: int, alpha: float, beta: float | None = None) -> RadiusWindow:
    if k < 2:
        raise ConfigError(f"k must be >= 2 for a radius window, got {k}")
    if beta is None:
        beta = default_beta(alpha)
    c = alpha / (2.0 * math.pi)
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    if beta >= c:
        raise BetaTooLarge(f"beta={beta} must be below alpha/(2π) = {c:.6g}")
    kl = k * math.log(k)
    return RadiusWindow(k, alpha, beta, (c - beta) * kl, (c + beta) * kl)
