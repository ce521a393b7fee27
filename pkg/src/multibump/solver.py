"""Projected linear solves, the correction ω_k and the full ring solution.

Everything is written in the weak (stiffness/mass) form on the H_s sector:
with A the stiffness and m the lumped mass of the NN layout, the discrete
equation -Δ_h u + V u = u^p reads E_h(u) = A u / m + V u - u^p = 0.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.optimize import brentq

from .discretization import (
    ANGULAR_RATIO,
    Field,
    SectorGrid,
    assemble_bumps,
    assemble_W,
    assemble_Ztilde,
    build_grid,
    pin_for,
    potential_on_grid,
    star_params,
    star_weight,
)
from .errors import ConvergenceError, KrylovStall, NoContraction, NoInteriorMax
from .ground_state import GroundState
from .model import Potential, RingConfig
from .search import golden_max

log = logging.getLogger(__name__)

TOL_NEWTON = 1e-9
TOL_PROJ = 1e-8
TOL_LINEAR = 1e-10
TAU = 0.1


def _factor(K):
    """Sparse LU with a symmetric fill-reducing ordering (K is symmetric)."""
    return sla.splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})


def _nl(u, p):
    return np.abs(u) ** (p - 1) * u


class RingProblem:
    """Discrete data of the ring problem at radius r on a fixed sector grid."""

    def __init__(self, grid: SectorGrid, cfg: RingConfig, gs: GroundState, pot: Potential):
        grid.check_ring(cfg.r)
        self.grid, self.cfg, self.gs, self.pot = grid, cfg, gs, pot
        self.p = gs.p
        self.A, self.m, self.free = grid.operators(grid.block("NN"))
        self.V = grid.restrict(potential_on_grid(grid, pot))
        self.W = grid.restrict(assemble_W(grid, cfg, gs).values)
        self.Zt = grid.restrict(assemble_Ztilde(grid, cfg, gs).values)
        self.z = self.m * self.Zt  # constraint row: Σ m Z̃ v = 0
        self._lu = None
        self._K = None
        self._v2 = None

    # -- vectors <-> fields ----------------------------------------------

    def field(self, vec) -> Field:
        return Field(self.grid.extend(vec), self.grid)

    def vec(self, f) -> np.ndarray:
        return self.grid.restrict(f.values if isinstance(f, Field) else f)

    # -- operators ---------------------------------------------------------

    def residual(self, u):
        """E_h(u) on the free nodes."""
        return self.A @ u / self.m + self.V * u - _nl(u, self.p)

    def energy(self, u) -> float:
        """Sector energy ½uᵀAu + ½Σ m V u² - Σ m |u|^{p+1}/(p+1) (the disc energy is 2k times this)."""
        return float(0.5 * u @ (self.A @ u) + 0.5 * np.sum(self.m * self.V * u * u)
                     - np.sum(self.m * np.abs(u) ** (self.p + 1)) / (self.p + 1))

    def stiffness_at(self, base):
        """Weak form of -Δ + V - p base^{p-1}."""
        return (self.A + sp.diags(self.m * (self.V - self.p * np.abs(base) ** (self.p - 1)))).tocsc()

    @property
    def lu(self):
        if self._lu is None:
            self._lu = _factor(self.K)
        return self._lu

    @property
    def K(self):
        if self._K is None:
            self._K = self.stiffness_at(self.W)
        return self._K

    def solve_projected(self, f, max_refine: int = 4):
        """Solve K v = m (f + b Z̃), Σ m Z̃ v = 0 by Schur complement on the bordered system.

        The LU factors of K are reused; a few steps of iterative refinement
        bring the bordered residual below TOL_LINEAR.
        """
        rhs = self.m * f
        if not np.any(rhs):
            return np.zeros_like(f), 0.0
        if self._v2 is None:
            self._v2 = self.lu.solve(self.m * self.Zt)
        v2 = self._v2
        s = self.z @ v2
        scale = np.linalg.norm(rhs)
        v = np.zeros_like(f)
        b = 0.0
        r1, r2 = rhs, 0.0
        for _ in range(max_refine + 1):
            v1 = self.lu.solve(r1)
            db = (r2 - self.z @ v1) / s
            v = v + v1 + db * v2
            b += db
            r1 = rhs + b * self.m * self.Zt - self.K @ v
            r2 = -(self.z @ v)
            rel = math.hypot(np.linalg.norm(r1), r2) / scale
            if rel <= TOL_LINEAR:
                return v, float(b)
        raise KrylovStall(f"bordered solve stalled at relative residual {rel:.3g}")

    def projection(self, u) -> float:
        """Σ m Z̃ (u - W), the discrete Ẽ_k orthogonality of ω = u - W."""
        return float(self.z @ (u - self.W))


def solve_projected_linear(grid, cfg, gs, pot, f: Field, problem: RingProblem | None = None):
    """Solve L v = f + b Z̃ with Σ m Z̃ v = 0; returns (v, b)."""
    prob = problem or RingProblem(grid, cfg, gs, pot)
    v, b = prob.solve_projected(prob.vec(f))
    return prob.field(v), b


@dataclass
class SolutionBundle:
    cfg: RingConfig
    u: Field
    omega: Field
    r_star: float
    b_k: float
    residual_sup: float
    omega_star_norm: float
    proj_residual: float = 0.0
    contraction: list = field(default_factory=list)
    C_est: float = math.nan
    energy: float = math.nan
    newton_steps: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def grid(self) -> SectorGrid:
        return self.u.grid

    def summary(self) -> dict:
        return {"k": self.cfg.k, "r_star": self.r_star, "b_k": self.b_k, "residual_sup": self.residual_sup,
                "omega_star_norm": self.omega_star_norm, "proj_residual": self.proj_residual,
                "C_est": self.C_est, "energy": self.energy,
                "max_contraction": max(self.contraction) if self.contraction else None,
                "grid": self.grid.metadata(), **self.meta}


def decay_scale(cfg: RingConfig, pot: Potential, p: float, tau: float = TAU) -> float:
    """r^{-α} + e^{-min(p/2 - τ, 1) d}, the size of l_k in the star norm."""
    return cfg.r ** (-pot.alpha) + math.exp(-min(p / 2 - tau, 1.0) * cfg.spacing)


def solve_correction(grid, cfg, gs, pot, tau: float = TAU, tol: float = TOL_NEWTON,
                     max_iter: int = 100, rhs: str = "discrete",
                     problem: RingProblem | None = None) -> SolutionBundle:
    """Fixed-point iteration ω ← L^{-1}_proj (l + R(ω)) at the ring radius cfg.r.

    rhs="discrete" uses l = -E_h(W) so that u = W + ω solves the discrete
    equation up to the multiplier; rhs="pointwise" uses the continuum
    l = -(V - 1)W + (W^p - ΣU^p), which ignores the discretisation error of W.
    """
    prob = problem or RingProblem(grid, cfg, gs, pot)
    p = gs.p
    W = prob.W
    if rhs == "discrete":
        l = -prob.residual(W)
    elif rhs == "pointwise":
        bumps = assemble_bumps(grid, cfg, gs)
        sumUp = grid.restrict((bumps**p).sum(axis=-1))
        l = -(prob.V - 1.0) * W + (_nl(W, p) - sumUp)
    else:
        raise ValueError(f"unknown rhs {rhs!r}")
    sp_params = star_params(cfg, tau)
    weight = grid.restrict(star_weight(grid, sp_params))

    def star(v):
        return float(np.max(np.abs(v) / weight))

    omega = np.zeros_like(W)
    b = 0.0
    diffs, ratios = [], []
    stalled = 0
    for it in range(max_iter):
        R = _nl(W + omega, p) - _nl(W, p) - p * np.abs(W) ** (p - 1) * omega
        new, b = prob.solve_projected(l + R)
        diff = star(new - omega)
        omega = new
        if diffs:
            ratio = diff / diffs[-1] if diffs[-1] > 0 else 0.0
            ratios.append(ratio)
            stalled = stalled + 1 if ratio >= 0.9 else 0
            if stalled >= 3:
                raise NoContraction(f"successive-difference ratio >= 0.9 three times (last {ratio:.3g})")
        diffs.append(diff)
        if diff < tol:
            break
    else:
        raise NoContraction(f"no convergence in {max_iter} fixed-point iterations (last diff {diffs[-1]:.3g})")
    u = W + omega
    res = prob.residual(u) - b * prob.Zt
    onorm = star(omega)
    return SolutionBundle(cfg=cfg, u=prob.field(u), omega=prob.field(omega), r_star=cfg.r, b_k=b,
                          residual_sup=float(np.max(np.abs(res))), omega_star_norm=onorm,
                          proj_residual=abs(prob.projection(u)), contraction=ratios,
                          C_est=onorm / decay_scale(cfg, pot, p, tau), energy=prob.energy(u),
                          meta={"iterations": len(diffs), "rhs": rhs})


def newton_polish(prob: RingProblem, u, tol: float = TOL_NEWTON, max_steps: int = 6):
    """Newton on the unprojected discrete equation E_h(u) = 0."""
    steps = 0
    res = prob.residual(u)
    while np.max(np.abs(res)) > tol and steps < max_steps:
        J = prob.stiffness_at(u)
        du = _factor(J).solve(-prob.m * res)
        u = u + du
        res = prob.residual(u)
        steps += 1
    return u, float(np.max(np.abs(res))), steps


def refit_radius(grid, k, gs, pot, u, r0: float, span: float = 0.05) -> float:
    """Ring radius r with Σ m Z̃_r (u - W_r) = 0 near r0."""
    A, m, _ = grid.operators(grid.block("NN"))

    def g(r):
        cfg = RingConfig(k, r)
        W = grid.restrict(assemble_W(grid, cfg, gs).values)
        Zt = grid.restrict(assemble_Ztilde(grid, cfg, gs).values)
        return float(np.dot(m * Zt, u - W))

    lo, hi = r0 * (1 - span), r0 * (1 + span)
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        return r0
    return brentq(g, lo, hi, xtol=1e-13 * r0, rtol=1e-14)


def _finalize(grid, k, gs, pot, bundle: SolutionBundle, tau, tol_newton) -> SolutionBundle:
    """Newton-polish bundle.u, refit the ring radius and rebuild the bundle."""
    prob = RingProblem(grid, bundle.cfg, gs, pot)
    u, res_sup, steps = newton_polish(prob, prob.vec(bundle.u), tol_newton)
    if res_sup > tol_newton:
        raise ConvergenceError(f"Newton polish stalled at residual {res_sup:.3g}")
    r_fit = refit_radius(grid, k, gs, pot, u, bundle.cfg.r)
    cfg = RingConfig(k, r_fit)
    prob2 = RingProblem(grid, cfg, gs, pot)
    omega = u - prob2.W
    weight = grid.restrict(star_weight(grid, star_params(cfg, tau)))
    onorm = float(np.max(np.abs(omega) / weight))
    return SolutionBundle(cfg=cfg, u=prob2.field(u), omega=prob2.field(omega), r_star=r_fit,
                          b_k=bundle.b_k, residual_sup=res_sup, omega_star_norm=onorm,
                          proj_residual=abs(prob2.projection(u)), contraction=bundle.contraction,
                          C_est=onorm / decay_scale(cfg, pot, gs.p, tau), energy=prob2.energy(u),
                          newton_steps=steps, meta=dict(bundle.meta))


def solve_full(k: int, gs: GroundState, pot: Potential, h: float = 0.05, r_guess: float | None = None,
               bracket: tuple[float, float] = (0.85, 1.15), tau: float = TAU,
               tol_newton: float = TOL_NEWTON, tol_proj: float = TOL_PROJ,
               grid: SectorGrid | None = None) -> SolutionBundle:
    """Ring solution maximising the discrete reduced energy r ↦ I_h(W_r + ω(r)).

    The search bracket is bracket·r_guess (r_guess defaults to the reduced-energy
    maximiser).  Golden section narrows the bracket, the multiplier b(r) is
    then driven to zero, and the result is Newton-polished.
    """
    from .reduced_energy import energy_constants, find_ring_radius

    if r_guess is None:
        r_guess = find_ring_radius(k, energy_constants(gs), pot, gs).r_k
    lo, hi = bracket[0] * r_guess, bracket[1] * r_guess
    if grid is None:
        grid = build_grid(RingConfig(k, r_guess), h, r_cover=hi, pin_origin=pin_for(pot))
    evals: dict[float, SolutionBundle] = {}

    def corr(r):
        if r not in evals:
            evals[r] = solve_correction(grid, RingConfig(k, r), gs, pot, tau, tol_newton)
        return evals[r]

    res = golden_max(lambda r: corr(r).energy, lo, hi, rtol=1e-3, scan=5)
    # the energy is critical where the multiplier vanishes: find the sign change nearest the argmax
    rs = sorted(evals)
    bs = [corr(r).b_k for r in rs]
    pairs = [(a, c) for a, c, fa, fc in zip(rs, rs[1:], bs, bs[1:]) if fa * fc <= 0]
    if not pairs:
        raise NoInteriorMax(f"multiplier b(r) keeps one sign on [{lo:.6g}, {hi:.6g}]")
    ia, ib = min(pairs, key=lambda ab: abs(0.5 * (ab[0] + ab[1]) - res.x))
    r_star = brentq(lambda r: corr(r).b_k, ia, ib, xtol=1e-12 * r_guess, rtol=1e-14, maxiter=60)
    best = corr(r_star)
    if abs(best.b_k) > 10 * tol_proj:
        raise ConvergenceError(f"multiplier at the optimum {best.b_k:.3g} exceeds {10 * tol_proj:g}")
    best.meta.update({"outer_evals": len(evals), "bracket": [lo, hi], "r_guess": r_guess,
                      "energy_argmax": res.x})
    return _finalize(grid, k, gs, pot, best, tau, tol_newton)


def solve_at(grid: SectorGrid, k: int, r0: float, gs: GroundState, pot: Potential, tau: float = TAU,
             tol_newton: float = TOL_NEWTON, tol_proj: float = TOL_PROJ, step: float = 0.01) -> SolutionBundle:
    """Ring solution on a given grid: root of the multiplier b(r) near r0, then Newton polish.

    Secant iteration from r0, falling back to bracketing and brentq.
    """
    evals: dict[float, SolutionBundle] = {}

    def b_of(r):
        if r not in evals:
            evals[r] = solve_correction(grid, RingConfig(k, r), gs, pot, tau, tol_newton)
        return evals[r].b_k

    # secant first: b(r) is smooth and each evaluation is a full fixed-point solve
    ra, rb = r0, r0 * (1 + step)
    for _ in range(12):
        fa, fb = b_of(ra), b_of(rb)
        if fb == fa or abs(rb - r0) > 0.2 * r0:
            break
        rc = rb - fb * (rb - ra) / (fb - fa)
        ra, rb = rb, rc
        if abs(b_of(rb)) <= 1e-3 * tol_proj or abs(rb - ra) <= 1e-12 * r0:
            best = evals[rb]
            best.meta.update({"outer_evals": len(evals), "r_guess": r0})
            return _finalize(grid, k, gs, pot, best, tau, tol_newton)
    lo, hi = r0 * (1 - step), r0 * (1 + step)
    for _ in range(8):
        if b_of(lo) * b_of(hi) <= 0:
            break
        lo, hi = r0 - 2 * (r0 - lo), r0 + 2 * (hi - r0)
    else:
        raise NoInteriorMax(f"multiplier b(r) keeps one sign on [{lo:.6g}, {hi:.6g}]")
    r_star = brentq(b_of, lo, hi, xtol=1e-12 * r0, rtol=1e-14, maxiter=60)
    best = evals[r_star]
    if abs(best.b_k) > 10 * tol_proj:
        raise ConvergenceError(f"multiplier at the root {best.b_k:.3g} exceeds {10 * tol_proj:g}")
    best.meta.update({"outer_evals": len(evals), "r_guess": r0})
    return _finalize(grid, k, gs, pot, best, tau, tol_newton)


# -- bundle cache -----------------------------------------------------------

def bundle_key(k, h, gs, pot, tau=TAU, refined=False) -> str:
    tag = "h2" if refined else "h"
    return (f"bundle_k{k}_h{h!r}_ang{ANGULAR_RATIO!r}_dim{gs.dim}_p{gs.p!r}"
            f"_a{pot.alpha!r}_{pot.a1!r}_{pot.a2!r}_tau{tau!r}_{tag}")


def save_bundle(bundle: SolutionBundle, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = bundle.grid
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez_compressed(tmp, u=bundle.u.values, omega=bundle.omega.values,
                        meta=json.dumps({"summary": bundle.summary(), "contraction": bundle.contraction,
                                         "grid": [g.k, g.h, g.M, g.Q, g.r_ref, g.pin_origin],
                                         "meta": bundle.meta, "newton_steps": bundle.newton_steps}))
    os.replace(tmp, path)


def load_bundle(path) -> SolutionBundle | None:
    path = Path(path)
    if not path.exists():
        return None
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    k, h, M, Q, r_ref, pin = meta["grid"]
    grid = SectorGrid(k, h, M, Q, r_ref, pin)
    s = meta["summary"]
    return SolutionBundle(cfg=RingConfig(k, s["r_star"]), u=Field(data["u"], grid),
                          omega=Field(data["omega"], grid), r_star=s["r_star"], b_k=s["b_k"],
                          residual_sup=s["residual_sup"], omega_star_norm=s["omega_star_norm"],
                          proj_residual=s["proj_residual"], contraction=meta["contraction"],
                          C_est=s["C_est"], energy=s["energy"], newton_steps=meta["newton_steps"],
                          meta=meta["meta"])


def cached_solve_full(k, gs, pot, h=0.05, cache_dir=None, tau=TAU, **kw) -> SolutionBundle:
    from .ground_state import default_cache_dir

    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache_dir / (bundle_key(k, h, gs, pot, tau) + ".npz")
    bundle = load_bundle(path)
    if bundle is None:
        t0 = time.perf_counter()
        bundle = solve_full(k, gs, pot, h=h, tau=tau, **kw)
        bundle.meta["solve_seconds"] = time.perf_counter() - t0
        save_bundle(bundle, path)
    return bundle


def cached_refined(bundle: SolutionBundle, gs, pot, cache_dir=None, tau=TAU) -> SolutionBundle:
    """The same ring solved on the grid refined by 2 in both directions."""
    from .ground_state import default_cache_dir

    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    g = bundle.grid
    path = cache_dir / (bundle_key(g.k, g.h, gs, pot, tau, refined=True) + ".npz")
    fine = load_bundle(path)
    if fine is None:
        t0 = time.perf_counter()
        fine = solve_at(g.refined(), g.k, bundle.r_star, gs, pot, tau)
        fine.meta["solve_seconds"] = time.perf_counter() - t0
        save_bundle(fine, path)
    return fine

