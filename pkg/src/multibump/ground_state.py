"""Radial ground state of -ΔU + U = U^p in R^N.

The profile is found by shooting on U(0): fixed-step RK4 classifies each
trial value as overshooting (U crosses zero) or undershooting (U turns back
up or blows up) and a bisection narrows the bracket.  The bracketed value is
then polished by matching the trajectory at a radius r_m to the decaying
solution of the linearised tail equation,

    T(r) = r^(1 - N/2) K_{N/2-1}(r),

which also supplies the table for r > r_m where forward shooting is
exponentially unstable.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numba import njit
from scipy.integrate import simpson
from scipy.optimize import brentq
from scipy.special import kve

from .errors import ConfigError, ConvergenceError, NoBracket, StiffFailure

log = logging.getLogger(__name__)

H_ODE = 1e-3
R_MAX = 30.0
TOL_SHOOT = 1e-12
U0_SEARCH = (1.0, 10.0)


def sphere_area(dim: int) -> float:
    """Surface measure ω_{N-1} of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def critical_exponent(dim: int) -> float:
    return math.inf if dim <= 2 else (dim + 2) / (dim - 2)


@njit(cache=True)
def _force(u, du, r, dim, p):
    nl = abs(u) ** (p - 1.0) * u
    return -(dim - 1.0) / r * du + u - nl


@njit(cache=True)
def _series_start(u0, dim, p, h):
    f0 = u0 - u0**p
    df0 = 1.0 - p * u0 ** (p - 1.0)
    a = f0 / (2.0 * dim)
    b = df0 * a / (4.0 * (dim + 2.0))
    return u0 + a * h * h + b * h**4, 2.0 * a * h + 4.0 * b * h**3


@njit(cache=True)
def _rk4_step(u, du, r, h, dim, p):
    k1u = du
    k1v = _force(u, du, r, dim, p)
    k2u = du + 0.5 * h * k1v
    k2v = _force(u + 0.5 * h * k1u, k2u, r + 0.5 * h, dim, p)
    k3u = du + 0.5 * h * k2v
    k3v = _force(u + 0.5 * h * k2u, k3u, r + 0.5 * h, dim, p)
    k4u = du + h * k3v
    k4v = _force(u + h * k3u, k4u, r + h, dim, p)
    return (u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            du + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v))


@njit(cache=True)
def _classify(u0, dim, p, h, n_max, blow):
    """+1 overshoot (U < 0), -1 undershoot (U' >= 0 or U > blow), 0 undecided, 2 non-finite."""
    u, du = _series_start(u0, dim, p, h)
    if du >= 0.0:
        return -1
    r = h
    for _ in range(1, n_max):
        u, du = _rk4_step(u, du, r, h, dim, p)
        r += h
        if not (np.isfinite(u) and np.isfinite(du)):
            return 2
        if u < 0.0:
            return 1
        if du >= 0.0 or u > blow:
            return -1
    return 0


@njit(cache=True)
def _integrate(u0, dim, p, h, n):
    us = np.empty(n + 1)
    dus = np.empty(n + 1)
    us[0] = u0
    dus[0] = 0.0
    u, du = _series_start(u0, dim, p, h)
    us[1] = u
    dus[1] = du
    r = h
    for i in range(2, n + 1):
        u, du = _rk4_step(u, du, r, h, dim, p)
        r += h
        us[i] = u
        dus[i] = du
    return us, dus


def _tail(dim: int, r):
    """Decaying tail solution T(r) and T'(r), both without the e^{-r} factor."""
    nu = dim / 2.0 - 1.0
    r = np.asarray(r, dtype=float)
    t = r ** (1.0 - dim / 2.0) * kve(nu, r)
    dt = -(r ** (1.0 - dim / 2.0)) * kve(nu + 1.0, r)
    return t, dt


@dataclass(frozen=True, eq=False)
class GroundState:
    dim: int
    p: float
    u0: float
    grid: np.ndarray = field(repr=False)
    u_table: np.ndarray = field(repr=False)
    du_table: np.ndarray = field(repr=False)
    decay_const: float
    mass2: float
    massP1: float
    grad2: float
    h_ode: float = H_ODE
    r_max: float = R_MAX

    def _hermite(self, r, y, dy):
        """Cubic Hermite interpolation on the uniform table (index arithmetic, no search)."""
        g = self.grid
        i = np.clip((r / (g[1] - g[0])).astype(np.int64), 0, g.size - 2)
        h = g[i + 1] - g[i]
        t = (r - g[i]) / h
        t2, t3 = t * t, t * t * t
        return ((2 * t3 - 3 * t2 + 1) * y[i] + (t3 - 2 * t2 + t) * h * dy[i]
                + (-2 * t3 + 3 * t2) * y[i + 1] + (t3 - t2) * h * dy[i + 1])

    def _u_spline(self, r):
        return self._hermite(r, self.u_table, self.du_table)

    def _du_spline(self, r):
        return self._hermite(r, self.du_table, self._d2u_table)

    @cached_property
    def _d2u_table(self):
        r, u, du = self.grid, self.u_table, self.du_table
        out = np.empty_like(u)
        out[0] = (u[0] - u[0] ** self.p) / self.dim
        out[1:] = -(self.dim - 1) / r[1:] * du[1:] + u[1:] - np.abs(u[1:]) ** (self.p - 1) * u[1:]
        return out

    def _far(self, r):
        return self.decay_const * r ** (-(self.dim - 1) / 2) * np.exp(-r)

    def U(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.r_max
        out = np.empty_like(r)
        out[inside] = self._u_spline(r[inside])
        far = r[~inside]
        out[~inside] = self._far(far)
        return out if out.ndim else float(out)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self.r_max
        out = np.empty_like(r)
        out[inside] = self._du_spline(r[inside])
        far = r[~inside]
        out[~inside] = -self._far(far) * (1.0 + (self.dim - 1) / (2.0 * far))
        return out if out.ndim else float(out)

    def d2U(self, r):
        """U'' from the radial equation (U' / r taken as U''(0) at the origin)."""
        r = np.asarray(r, dtype=float)
        u, du = self.U(r), self.dU(r)
        safe = np.where(r > 0, r, 1.0)
        lap_term = np.where(r > 0, (self.dim - 1) * du / safe, 0.0)
        out = -lap_term + u - np.abs(u) ** (self.p - 1) * u
        at0 = r == 0
        if np.any(at0):
            out = np.where(at0, (self.u0 - self.u0**self.p) / self.dim, out)
        return out if np.ndim(out) else float(out)

    @property
    def energy(self) -> float:
        """A = I(U) for V ≡ 1."""
        return 0.5 * (self.grad2 + self.mass2) - self.massP1 / (self.p + 1)

    def identity_residuals(self) -> tuple[float, float]:
        """Relative Derrick and Pohozaev residuals (normalised by ∫U^{p+1})."""
        n, p = self.dim, self.p
        derrick = self.grad2 + self.mass2 - self.massP1
        pohozaev = (n - 2) / 2 * self.grad2 + n / 2 * self.mass2 - n / (p + 1) * self.massP1
        return abs(derrick) / self.massP1, abs(pohozaev) / self.massP1

    def decay_plateau(self) -> np.ndarray:
        m = self.grid >= 0.75 * self.r_max
        r = self.grid[m]
        return self.u_table[m] * np.exp(r) * r ** ((self.dim - 1) / 2)


def eval_U(gs: GroundState, r):
    return gs.U(r)


def eval_dU(gs: GroundState, r):
    return gs.dU(r)


def moments(gs: GroundState) -> tuple[float, float, float, float]:
    """(∫U², ∫U^{p+1}, ∫|∇U|², ∫U U'(|y|) y₁²/|y|) over R^N."""
    return gs.mass2, gs.massP1, gs.grad2, _y1sq_moment(gs)


def _y1sq_moment(gs: GroundState) -> float:
    r = gs.grid
    return sphere_area(gs.dim) / gs.dim * simpson(gs.u_table * gs.du_table * r**gs.dim, x=r)


def _radial_integrals(dim, p, r, u, du):
    w = sphere_area(dim) * r ** (dim - 1)
    mass2 = simpson(u * u * w, x=r)
    massp1 = simpson(np.abs(u) ** (p + 1) * w, x=r)
    grad2 = simpson(du * du * w, x=r)
    return float(mass2), float(massp1), float(grad2)


def _validate(dim, p, r_max, tol_shoot, h_ode):
    if int(dim) != dim or dim < 1:
        raise ConfigError(f"dim must be an integer >= 1, got {dim}")
    if not p > 1:
        raise ConfigError(f"p must exceed 1, got {p}")
    if p >= critical_exponent(dim):
        raise ConfigError(f"p={p} is not subcritical for dim={dim} (needs p < {critical_exponent(dim)})")
    if r_max < 20:
        raise ConfigError(f"r_max must be >= 20, got {r_max}")
    if not tol_shoot > 0:
        raise ConfigError(f"tol_shoot must be positive, got {tol_shoot}")
    n = round(r_max / h_ode)
    if not math.isclose(n * h_ode, r_max, rel_tol=1e-12):
        raise ConfigError(f"r_max={r_max} is not a multiple of h_ode={h_ode}")


def match_radius(p: float) -> float:
    """Radius balancing shooting round-off growth (e^r) against the neglected U^p tail term."""
    return float(np.clip(math.log(1e16) / (p + 1.0), 6.0, 14.0))


def solve_ground_state(dim: int, p: float, r_max: float = R_MAX, tol_shoot: float = TOL_SHOOT,
                       h_ode: float = H_ODE) -> GroundState:
    _validate(dim, p, r_max, tol_shoot, h_ode)
    dim = int(dim)
    p = float(p)
    n_max = round(r_max / h_ode)
    lo, hi = U0_SEARCH
    blow = 10.0 * hi

    def classify(u0):
        c = _classify(u0, float(dim), p, h_ode, n_max, blow)
        if c == 2:
            raise StiffFailure(f"non-finite trajectory at U(0)={u0!r} (dim={dim}, p={p}, h_ode={h_ode})")
        return c

    if classify(lo) != -1 or classify(hi) != 1:
        raise NoBracket(f"no sign change of the shooting classification on U(0) in [{lo}, {hi}] "
                        f"for dim={dim}, p={p}")
    while hi - lo >= tol_shoot:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        c = classify(mid)
        if c == 1:
            hi = mid
        elif c == -1:
            lo = mid
        else:
            break
        assert lo < hi

    r_m = match_radius(p)
    n_m = round(r_m / h_ode)
    r_m = n_m * h_ode
    _, dt = _tail(dim, r_m)
    t, _ = _tail(dim, r_m)
    kappa = float(dt / t)

    def mismatch(u0):
        us, dus = _integrate(u0, float(dim), p, h_ode, n_m)
        return dus[-1] - kappa * us[-1]

    g_lo, g_hi = mismatch(lo), mismatch(hi)
    if g_lo * g_hi < 0:
        u0 = brentq(mismatch, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        u0 = 0.5 * (lo + hi)
        log.debug("tail matching not bracketed (dim=%s, p=%s); using bisection midpoint", dim, p)

    us, dus = _integrate(u0, float(dim), p, h_ode, n_m)
    grid = np.arange(n_max + 1) * h_ode
    u_tab = np.empty(n_max + 1)
    du_tab = np.empty(n_max + 1)
    u_tab[: n_m + 1] = us
    du_tab[: n_m + 1] = dus
    rt = grid[n_m + 1:]
    t_tail, dt_tail = _tail(dim, rt)
    scale = us[-1] / (t * math.exp(-r_m))
    u_tab[n_m + 1:] = scale * t_tail * np.exp(-rt)
    du_tab[n_m + 1:] = scale * dt_tail * np.exp(-rt)

    if not np.all(np.isfinite(u_tab)):
        raise StiffFailure("non-finite ground-state table")
    if np.any(du_tab[1:] >= 0) or np.any(u_tab <= 0):
        raise ConvergenceError(f"ground-state profile not positive and decreasing (dim={dim}, p={p})")

    plateau_r = grid[grid >= 0.75 * r_max]
    plateau = u_tab[grid >= 0.75 * r_max] * np.exp(plateau_r) * plateau_r ** ((dim - 1) / 2)
    decay_const = float(np.mean(plateau))
    mass2, massp1, grad2 = _radial_integrals(dim, p, grid, u_tab, du_tab)
    return GroundState(dim=dim, p=p, u0=float(u0), grid=grid, u_table=u_tab, du_table=du_tab,
                       decay_const=decay_const, mass2=mass2, massP1=massp1, grad2=grad2,
                       h_ode=h_ode, r_max=float(r_max))


def closed_form_1d(p: float, r):
    """The one-dimensional soliton ((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1) r / 2)."""
    r = np.asarray(r, dtype=float)
    return ((p + 1) / 2) ** (1 / (p - 1)) / np.cosh((p - 1) * r / 2) ** (2 / (p - 1))


# -- cache -----------------------------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get("MULTIBUMP_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "multibump"


def _stem(dim, p, h_ode, r_max) -> str:
    return f"ground_dim{int(dim)}_p{float(p)!r}_h{float(h_ode)!r}_R{float(r_max)!r}"


def save_ground_state(gs: GroundState, cache_dir: str | os.PathLike) -> tuple[Path, Path]:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    stem = _stem(gs.dim, gs.p, gs.h_ode, gs.r_max)
    meta = {"dim": gs.dim, "p": gs.p, "u0": gs.u0, "decay_const": gs.decay_const,
            "mass2": gs.mass2, "massP1": gs.massP1, "grad2": gs.grad2,
            "h_ode": gs.h_ode, "r_max": gs.r_max}
    table = cache_dir / f"{stem}.csv"
    tmp = table.with_suffix(".csv.tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "U", "dU"])
        for row in zip(gs.grid, gs.u_table, gs.du_table):
            w.writerow([repr(float(v)) for v in row])
    os.replace(tmp, table)
    meta_path = cache_dir / f"{stem}.json"
    tmp = meta_path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(meta, indent=2))
    os.replace(tmp, meta_path)
    return meta_path, table


def load_ground_state(dim, p, h_ode, r_max, cache_dir) -> GroundState | None:
    stem = _stem(dim, p, h_ode, r_max)
    meta_path = Path(cache_dir) / f"{stem}.json"
    table = Path(cache_dir) / f"{stem}.csv"
    if not (meta_path.exists() and table.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    if (meta["dim"], meta["p"], meta["h_ode"], meta["r_max"]) != (int(dim), float(p), float(h_ode), float(r_max)):
        return None
    data = np.loadtxt(table, delimiter=",", skiprows=1)
    return GroundState(dim=meta["dim"], p=meta["p"], u0=meta["u0"], grid=data[:, 0],
                       u_table=data[:, 1], du_table=data[:, 2], decay_const=meta["decay_const"],
                       mass2=meta["mass2"], massP1=meta["massP1"], grad2=meta["grad2"],
                       h_ode=meta["h_ode"], r_max=meta["r_max"])


def ground_state(dim: int, p: float, r_max: float = R_MAX, tol_shoot: float = TOL_SHOOT,
                 h_ode: float = H_ODE, cache_dir=None, use_cache: bool = True) -> GroundState:
    """solve_ground_state behind the on-disk cache (cache_dir defaults to $MULTIBUMP_CACHE)."""
    if not use_cache:
        return solve_ground_state(dim, p, r_max, tol_shoot, h_ode)
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    gs = load_ground_state(dim, p, h_ode, r_max, cache_dir)
    if gs is None:
        gs = solve_ground_state(dim, p, r_max, tol_shoot, h_ode)
        save_ground_state(gs, cache_dir)
    return gs


