"""Polar sector grid, finite-volume operators and field assembly.

Nodes sit at ρ_i = i h (i = 0..M, the row i = M carries the homogeneous
Dirichlet condition) and θ_j = j Δθ.  Each node owns the polar cell
[ρ_i - h/2, ρ_i + h/2] x [θ_j - Δθ/2, θ_j + Δθ/2] (half a cell at a
reflection edge, a disc of radius h/2 at the origin).  The Dirichlet form
∫|∇u|^2 is approximated by a sum over grid edges, giving a symmetric
stiffness matrix A; the lumped mass m is the cell area.  The discrete
operator -Δ_h = m^{-1} A is therefore symmetric in the m-weighted inner
product.

Angular layouts ("topologies") on the same radial grid:

    NN, DD, ND, DN  sector θ ∈ [0, π/k] with Neumann (N) or Dirichlet (D)
                    conditions at θ = 0 and θ = π/k; NN realises H_s
    bloch           wedge θ ∈ [0, 2π/k) closed by u(θ + 2π/k) = e^{iφ} u(θ)
    disk            the whole disc, periodic in θ
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, GridTooCoarse
from .ground_state import GroundState
from .model import Potential, RingConfig, ring_points

H_RHO = 0.05
MARGIN = 12.0
MAX_STEP = 0.1
ANGULAR_RATIO = 0.5
SECTOR_TOPOLOGIES = ("NN", "DD", "ND", "DN")


@dataclass(frozen=True)
class Block:
    """One angular layout on the radial grid; unknowns are the free nodes."""

    name: str
    J: int
    weights: np.ndarray = field(repr=False)
    phase: complex = 1.0
    wrap: bool = False
    drop_first: bool = False
    drop_last: bool = False
    origin: bool = True

    @property
    def complex(self) -> bool:
        return self.wrap and self.phase != 1.0


@dataclass(frozen=True, eq=False)
class SectorGrid:
    k: int
    h: float
    M: int
    Q: int
    r_ref: float
    pin_origin: bool = False
    dim: int = 2

    @property
    def dtheta(self) -> float:
        return math.pi / self.k / self.Q

    @property
    def R_out(self) -> float:
        return self.M * self.h

    @cached_property
    def rho(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.h

    @cached_property
    def theta(self) -> np.ndarray:
        return np.arange(self.Q + 1) * self.dtheta

    @property
    def shape(self) -> tuple[int, int]:
        return (self.M + 1, self.Q + 1)

    @cached_property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        R, T = np.meshgrid(self.rho, self.theta, indexing="ij")
        return R * np.cos(T), R * np.sin(T)

    def check_ring(self, r: float, margin: float = MARGIN) -> None:
        if self.h > MAX_STEP:
            raise GridTooCoarse(f"h_rho={self.h} exceeds {MAX_STEP}")
        if self.dtheta * r > MAX_STEP + 1e-12:
            raise GridTooCoarse(f"h_theta*r={self.dtheta * r:.4g} exceeds {MAX_STEP}")
        if self.R_out < r + margin - 1e-9:
            raise GridTooCoarse(f"R_out={self.R_out:.4g} < r + margin = {r + margin:.4g}")

    def metadata(self) -> dict:
        return {"k": self.k, "h_rho": self.h, "h_theta": self.dtheta, "M": self.M, "Q": self.Q,
                "R_out": self.R_out, "r_ref": self.r_ref, "pin_origin": self.pin_origin}

    def refined(self) -> "SectorGrid":
        """Same domain at half the step in both directions."""
        return SectorGrid(self.k, self.h / 2, 2 * self.M, 2 * self.Q, self.r_ref, self.pin_origin)

    # -- layouts ---------------------------------------------------------

    def block(self, topology: str = "NN", m: int = 0) -> Block:
        """Angular layout.  topology in SECTOR_TOPOLOGIES, 'bloch' (Bloch index m) or 'disk'."""
        if topology in SECTOR_TOPOLOGIES:
            w = np.ones(self.Q + 1)
            w[0] = w[-1] = 0.5
            d0, d1 = topology[0] == "D", topology[1] == "D"
            return Block(topology, self.Q + 1, w, drop_first=d0, drop_last=d1,
                         origin=not (d0 or d1 or self.pin_origin))
        if topology == "bloch":
            phase = np.exp(2j * np.pi * m / self.k)
            if m % self.k == 0:
                phase = 1.0
            elif 2 * (m % self.k) == self.k:
                phase = -1.0
            return Block(f"bloch{m}", 2 * self.Q, np.ones(2 * self.Q), phase=phase, wrap=True,
                         origin=(phase == 1.0) and not self.pin_origin)
        if topology == "disk":
            return Block("disk", 2 * self.k * self.Q, np.ones(2 * self.k * self.Q), wrap=True,
                         origin=not self.pin_origin)
        raise ConfigError(f"unknown topology {topology!r}")

    def free_mask(self, blk: Block) -> np.ndarray:
        """Mask over the node vector [origin, (i=1..M, j=0..J-1)]."""
        mask = np.ones((self.M, blk.J), dtype=bool)
        mask[-1, :] = False
        if blk.drop_first:
            mask[:, 0] = False
        if blk.drop_last:
            mask[:, -1] = False
        return np.concatenate([[blk.origin], mask.ravel()])

    def node_mass(self, blk: Block) -> np.ndarray:
        dt = self.dtheta
        cells = self.rho[1:, None] * self.h * blk.weights[None, :] * dt
        m0 = (self.h / 2) ** 2 / 2 * blk.weights.sum() * dt
        return np.concatenate([[m0], cells.ravel()])

    def node_stiffness(self, blk: Block) -> sp.csr_matrix:
        M, J, h, dt = self.M, blk.J, self.h, self.dtheta
        rho = self.rho
        idx = 1 + np.arange(M * J).reshape(M, J)
        rows, cols, vals = [], [], []

        def edge(a, b, c, ph=1.0):
            rows.extend([a, b, a, b])
            cols.extend([a, b, b, a])
            vals.extend([c, c, -c * np.conj(ph), -c * ph])

        # origin to first ring
        c0 = blk.weights * dt / 2
        edge(np.zeros(J, dtype=int), idx[0], c0)
        # radial edges between rows i and i+1 (i = 1..M-1)
        cr = (rho[1:M, None] + h / 2) * blk.weights[None, :] * dt / h
        edge(idx[:-1].ravel(), idx[1:].ravel(), cr.ravel())
        # angular edges along each row
        ca = np.broadcast_to(h / (rho[1:, None] * dt), (M, J - 1))
        edge(idx[:, :-1].ravel(), idx[:, 1:].ravel(), ca.ravel())
        if blk.wrap:
            cw = h / (rho[1:] * dt)
            edge(idx[:, 0], idx[:, -1], cw, np.full(M, blk.phase) if blk.complex else np.ones(M))
        rows = np.concatenate([np.atleast_1d(x) for x in rows])
        cols = np.concatenate([np.atleast_1d(x) for x in cols])
        vals = np.concatenate([np.atleast_1d(np.asarray(x)) for x in vals])
        dtype = complex if blk.complex else float
        n = 1 + M * J
        return sp.coo_matrix((vals.astype(dtype), (rows, cols)), shape=(n, n)).tocsr()

    def operators(self, blk: Block):
        """(A, m) restricted to the free nodes of the layout."""
        key = (blk.name, blk.J, complex(blk.phase))
        cache = self.__dict__.setdefault("_ops", {})
        if key not in cache:
            free = self.free_mask(blk)
            A = self.node_stiffness(blk)[free][:, free].tocsr()
            cache[key] = (A, self.node_mass(blk)[free], free)
        return cache[key]

    def stiffness(self, topology: str = "NN"):
        return self.operators(self.block(topology))[0]

    def mass(self, topology: str = "NN"):
        return self.operators(self.block(topology))[1]

    # -- field <-> vector -------------------------------------------------

    def to_nodes(self, values: np.ndarray) -> np.ndarray:
        """Sector array (M+1, Q+1) to the node vector [origin, rows 1..M]."""
        return np.concatenate([[values[0, 0]], values[1:].ravel()])

    def from_nodes(self, vec: np.ndarray) -> np.ndarray:
        out = np.empty(self.shape, dtype=vec.dtype)
        out[0, :] = vec[0]
        out[1:] = vec[1:].reshape(self.M, self.Q + 1)
        return out

    def restrict(self, values: np.ndarray, topology: str = "NN") -> np.ndarray:
        _, _, free = self.operators(self.block(topology))
        return self.to_nodes(values)[free]

    def extend(self, vec: np.ndarray, topology: str = "NN") -> np.ndarray:
        _, _, free = self.operators(self.block(topology))
        full = np.zeros(free.size, dtype=vec.dtype)
        full[free] = vec
        return self.from_nodes(full)

    def interior_mask(self) -> np.ndarray:
        """Nodes strictly inside the domain (not on the Dirichlet circle, not a pinned origin)."""
        mask = np.ones(self.shape, dtype=bool)
        mask[-1] = False
        if self.pin_origin:
            mask[0] = False
        return mask

    def lift(self, values: np.ndarray, parity: int = 1) -> np.ndarray:
        """Sector array to the full disc (M+1, 2kQ) by reflections (parity -1 for odd fields)."""
        n = np.arange(2 * self.k * self.Q)
        m = n % (2 * self.Q)
        j = np.where(m <= self.Q, m, 2 * self.Q - m)
        sign = np.where(m <= self.Q, 1.0, float(parity))
        if parity == -1:
            # odd about θ = 0 means odd about every multiple of π/k
            sign = np.where((n // self.Q) % 2 == 0, 1.0, -1.0)
            j = np.where((n // self.Q) % 2 == 0, n % self.Q, self.Q - n % self.Q)
        return values[:, j] * sign[None, :]

    def restrict_disk(self, values: np.ndarray) -> np.ndarray:
        return values[:, : self.Q + 1]

    def integrate(self, values: np.ndarray, topology: str = "NN") -> float:
        """Sector quadrature Σ m f (multiply by 2k for the disc)."""
        return float(np.dot(self.mass(topology), self.restrict(values, topology)))

    def to_csv(self, path, values: np.ndarray) -> None:
        R, T = np.meshgrid(self.rho, self.theta, indexing="ij")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rho", "theta", "value"])
            for a, b, c in zip(R.ravel(), T.ravel(), values.ravel()):
                w.writerow([f"{a:.10g}", f"{b:.10g}", f"{c:.17g}"])


@dataclass(frozen=True, eq=False)
class Field:
    values: np.ndarray
    grid: SectorGrid = field(repr=False)

    def __post_init__(self):
        assert self.values.shape == self.grid.shape
        assert np.all(np.isfinite(self.values))

    def __add__(self, other):
        return Field(self.values + _vals(other), self.grid)

    def __sub__(self, other):
        return Field(self.values - _vals(other), self.grid)

    def __mul__(self, c):
        return Field(self.values * c, self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(-self.values, self.grid)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _vals(x):
    return x.values if isinstance(x, Field) else x


def build_grid(cfg: RingConfig, h_rho: float = H_RHO, h_theta_scale: float | None = None,
               margin: float = MARGIN, r_cover: float | None = None,
               pin_origin: bool = False) -> SectorGrid:
    """Sector grid for the ring cfg.

    h_theta_scale is the arc-length step at the ring radius (default h_rho/2:
    the angular truncation error grows with the radius and biases the
    discrete ring radius far more than the radial one);
    r_cover extends R_out so rings up to that radius fit with the margin.
    """
    if cfg.dim != 2:
        raise ConfigError(f"the PDE grid is two-dimensional; got dim={cfg.dim}")
    hs = h_rho * ANGULAR_RATIO if h_theta_scale is None else h_theta_scale
    reach = max(cfg.r, r_cover or 0.0) + margin
    M = int(math.ceil(reach / h_rho - 1e-9))
    Q = max(2, int(math.ceil((math.pi / cfg.k) * cfg.r / hs - 1e-9)))
    grid = SectorGrid(cfg.k, h_rho, M, Q, cfg.r, pin_origin)
    grid.check_ring(cfg.r, margin)
    return grid


def pin_for(pot: Potential) -> bool:
    """The origin is pinned to zero when V is singular there."""
    return not pot.trivial and pot.alpha > 0


def _bump_geometry(grid: SectorGrid, cfg: RingConfig):
    x, y = grid.xy
    pts = ring_points(RingConfig(cfg.k, cfg.r, 2))
    dx = x[..., None] - pts[:, 0]
    dy = y[..., None] - pts[:, 1]
    return dx, dy, np.hypot(dx, dy), pts


def assemble_W(grid: SectorGrid, cfg: RingConfig, gs: GroundState) -> Field:
    _, _, dist, _ = _bump_geometry(grid, cfg)
    return Field(gs.U(dist).sum(axis=-1), grid)


def assemble_bumps(grid: SectorGrid, cfg: RingConfig, gs: GroundState) -> np.ndarray:
    """Individual translates U_{x_j} as an array (M+1, Q+1, k)."""
    _, _, dist, _ = _bump_geometry(grid, cfg)
    return gs.U(dist)


def assemble_Z(grid: SectorGrid, cfg: RingConfig, gs: GroundState) -> Field:
    """Σ_j ∂_r U(|y - x_j|) = Σ_j -U'(|y - x_j|) <(y - x_j)/|y - x_j|, e_j>."""
    dx, dy, dist, pts = _bump_geometry(grid, cfg)
    ej = pts / cfg.r
    safe = np.where(dist > 0, dist, 1.0)
    cosang = (dx * ej[:, 0] + dy * ej[:, 1]) / safe
    vals = -gs.dU(dist) * np.where(dist > 0, cosang, 0.0)
    return Field(vals.sum(axis=-1), grid)


def assemble_Ztilde(grid: SectorGrid, cfg: RingConfig, gs: GroundState) -> Field:
    """Σ_j U_{x_j}^{p-1} Z_j, the constraint/multiplier direction."""
    dx, dy, dist, pts = _bump_geometry(grid, cfg)
    ej = pts / cfg.r
    safe = np.where(dist > 0, dist, 1.0)
    cosang = np.where(dist > 0, (dx * ej[:, 0] + dy * ej[:, 1]) / safe, 0.0)
    u = gs.U(dist)
    vals = u ** (gs.p - 1) * (-gs.dU(dist) * cosang)
    return Field(vals.sum(axis=-1), grid)


def potential_on_grid(grid: SectorGrid, pot: Potential) -> np.ndarray:
    """V at the nodes; the origin row takes V(h/2), its cell-edge value."""
    rho = grid.rho.copy()
    rho[0] = grid.h / 2
    return np.broadcast_to(pot.V(rho)[:, None], grid.shape).copy()


def assemble_l(grid: SectorGrid, cfg: RingConfig, gs: GroundState, pot: Potential) -> Field:
    """Σ(V - 1)U_{x_i} + (W^p - ΣU_{x_i}^p), evaluated pointwise."""
    bumps = assemble_bumps(grid, cfg, gs)
    W = bumps.sum(axis=-1)
    V = potential_on_grid(grid, pot)
    vals = (V - 1.0) * W + (W**gs.p - (bumps**gs.p).sum(axis=-1))
    return Field(vals, grid)


def neg_laplacian(grid: SectorGrid, values: np.ndarray, topology: str = "NN") -> np.ndarray:
    """Discrete -Δ on the free nodes, returned as a sector array (zero on fixed nodes)."""
    A, m, _ = grid.operators(grid.block(topology))
    return grid.extend(A @ grid.restrict(values, topology) / m, topology)


@dataclass(frozen=True)
class StarNormParams:
    tau: float
    centers: np.ndarray

    def check(self, p: float) -> None:
        if not 0 < self.tau < min(p - 1, 1):
            raise ConfigError(f"tau={self.tau} must lie in (0, min(p-1, 1)) for p={p}")


def star_weight(grid: SectorGrid, params: StarNormParams) -> np.ndarray:
    x, y = grid.xy
    c = np.asarray(params.centers)[:, :2]
    dist = np.hypot(x[..., None] - c[:, 0], y[..., None] - c[:, 1])
    return np.exp(-params.tau * dist).sum(axis=-1)


def star_norm(f: Field, params: StarNormParams, weight: np.ndarray | None = None) -> float:
    if weight is None:
        weight = star_weight(f.grid, params)
    return float(np.max(np.abs(f.values) / weight))


def star_params(cfg: RingConfig, tau: float = 0.1) -> StarNormParams:
    return StarNormParams(tau, ring_points(RingConfig(cfg.k, cfg.r, 2)))
