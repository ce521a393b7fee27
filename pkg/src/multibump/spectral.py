"""Edge spectrum of the linearised operator L_k = -Δ + V - p u_k^{p-1}.

The full-disc operator commutes with rotation by 2π/k, so its spectrum is
the union of Bloch blocks u(θ + 2π/k) = e^{2πim/k} u(θ), m = 0..k-1.  The
m = 0 block splits further under the reflection θ → -θ into the sector
blocks NN (this is H_s) and DD; m = k/2 splits into ND and DN; m and k - m
are complex conjugate and share eigenvalues.  The literal periodic disc
operator is also available for small grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .discretization import (
    SECTOR_TOPOLOGIES,
    Block,
    Field,
    SectorGrid,
    assemble_Z,
    assemble_Ztilde,
    potential_on_grid,
    star_params,
    star_weight,
)
from .errors import ConfigError, ShiftSingular
from .solver import SolutionBundle

JITTER = 1e-6


@dataclass(eq=False)
class LinearOperator:
    """Weak form K = A + diag(m (V - p u^{p-1})) on one layout; strong form is m^{-1} K."""

    K: sp.csr_matrix
    m: np.ndarray
    grid: SectorGrid
    block: Block
    free: np.ndarray = field(repr=False)

    @property
    def name(self) -> str:
        return self.block.name

    def apply(self, v):
        return self.K @ v / self.m

    def inner(self, a, b):
        return np.vdot(a, self.m * b)

    def to_sector(self, vec) -> np.ndarray:
        """Sector array of a vector on a sector layout (zero on fixed nodes)."""
        return self.grid.extend(vec, self.block.name)

    def from_sector(self, values) -> np.ndarray:
        return self.grid.restrict(values, self.block.name)


def _wedge_columns(grid: SectorGrid, J: int) -> np.ndarray:
    n = np.arange(J)
    m = n % (2 * grid.Q)
    return np.where(m <= grid.Q, m, 2 * grid.Q - m)


def _layout_values(grid: SectorGrid, values: np.ndarray, blk: Block) -> np.ndarray:
    """Sector array of an H_s-symmetric field laid out as the node vector of blk."""
    if blk.name in SECTOR_TOPOLOGIES:
        wide = values
    else:
        wide = values[:, _wedge_columns(grid, blk.J)]
    return np.concatenate([[values[0, 0]], wide[1:].ravel()])


def linearized_block(bundle: SolutionBundle, pot, p: float, blk: Block) -> LinearOperator:
    grid = bundle.grid
    A, m, free = grid.operators(blk)
    u = _layout_values(grid, bundle.u.values, blk)[free]
    V = _layout_values(grid, potential_on_grid(grid, pot), blk)[free]
    K = (A + sp.diags(m * (V - p * np.abs(u) ** (p - 1)))).tocsr()
    return LinearOperator(K, m, grid, blk, free)


def assemble_linearized(bundle: SolutionBundle, pot, p: float, space: str = "sector"):
    """L_k around bundle.u.

    space: "sector" (H_s), a sector topology name, "disk" (the literal
    periodic disc), or "full_disk" (the list of Bloch blocks whose spectra
    together make up the disc spectrum).
    """
    grid = bundle.grid
    if space == "sector":
        return linearized_block(bundle, pot, p, grid.block("NN"))
    if space in SECTOR_TOPOLOGIES:
        return linearized_block(bundle, pot, p, grid.block(space))
    if space == "disk":
        return linearized_block(bundle, pot, p, grid.block("disk"))
    if space == "full_disk":
        return [linearized_block(bundle, pot, p, b) for b in full_disk_blocks(grid)]
    raise ConfigError(f"unknown space {space!r}")


def full_disk_blocks(grid: SectorGrid) -> list[Block]:
    """Blocks whose union is the disc spectrum (m and k - m give identical spectra)."""
    k = grid.k
    blocks = [grid.block("NN"), grid.block("DD")]
    blocks += [grid.block("bloch", m) for m in range(1, (k + 1) // 2)]
    if k % 2 == 0:
        blocks += [grid.block("ND"), grid.block("DN")]
    return blocks


def block_multiplicity(blk: Block, k: int) -> int:
    if blk.name.startswith("bloch"):
        m = int(blk.name[5:])
        return 1 if 2 * m == k else 2
    return 1


def edge_spectrum(op: LinearOperator, m: int = 6, tol: float = 1e-13):
    """The m eigenpairs of K x = λ M x nearest zero, ordered by |λ|.

    Shift-invert Lanczos on D^{-1/2} K D^{-1/2}; eigenvectors are returned
    M-orthonormal.  An exactly singular shift is retried once at JITTER.
    """
    if m > 12:
        raise ConfigError(f"at most 12 eigenpairs, asked for {m}")
    n = op.K.shape[0]
    m = min(m, n - 2)
    d = 1.0 / np.sqrt(op.m)
    S = (sp.diags(d) @ op.K @ sp.diags(d)).tocsc()
    vals = vecs = None
    for sigma in (0.0, JITTER):
        try:
            lu = sla.splu((S - sigma * sp.identity(n, dtype=S.dtype, format="csc")).tocsc(),
                          permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
            inv = sla.LinearOperator((n, n), matvec=lu.solve, dtype=S.dtype)
            vals, vecs = sla.eigsh(S, k=m, sigma=sigma, which="LM", tol=tol, OPinv=inv,
                                   v0=np.ones(n, dtype=S.dtype))
            break
        except RuntimeError as exc:
            if "singular" not in str(exc).lower():
                raise
    if vals is None:
        raise ShiftSingular("shifted operator singular at both 0 and the jittered shift")
    order = np.argsort(np.abs(vals))
    vals = vals[order].real
    vecs = vecs[:, order] * d[:, None]
    return [(float(v), vecs[:, i]) for i, v in enumerate(vals)]


def theta_derivative(grid: SectorGrid, values: np.ndarray) -> np.ndarray:
    """Centred ∂_θ of an H_s field; odd, so zero on both sector edges."""
    out = np.zeros_like(values)
    out[:, 1:-1] = (values[:, 2:] - values[:, :-2]) / (2 * grid.dtheta)
    out[0] = 0.0
    return out


def rotation_residual(bundle: SolutionBundle, pot, p: float) -> float:
    """‖L ∂_θu‖_M / ‖∂_θu‖_M on the DD layout."""
    op = assemble_linearized(bundle, pot, p, "DD")
    x = op.from_sector(theta_derivative(bundle.grid, bundle.u.values))
    Lx = op.apply(x)
    return float(math.sqrt(op.inner(Lx, Lx).real / op.inner(x, x).real))


def kernel_overlap(op: LinearOperator, vec, bundle: SolutionBundle) -> float:
    """M-weighted |cos| between a DD eigenvector and ∂_θu."""
    if op.block.name != "DD":
        return 0.0
    x = op.from_sector(theta_derivative(bundle.grid, bundle.u.values))
    return float(abs(op.inner(vec, x)) / math.sqrt(op.inner(vec, vec).real * op.inner(x, x).real))


def star_normalize(bundle: SolutionBundle, values: np.ndarray, tau: float = 0.1) -> np.ndarray:
    w = star_weight(bundle.grid, star_params(bundle.cfg, tau))
    s = np.max(np.abs(values) / w)
    return values / s if s > 0 else values


def kernel_decompose(xi: Field, bundle: SolutionBundle, gs, tau: float = 0.1):
    """ξ = b_m ΣZ_j + ξ*, with b_m fixed by ⟨ξ*, Σ U^{p-1} Z_j⟩ = 0."""
    grid = bundle.grid
    m = grid.mass("NN")
    Z = grid.restrict(assemble_Z(grid, bundle.cfg, gs).values)
    Zt = grid.restrict(assemble_Ztilde(grid, bundle.cfg, gs).values)
    x = grid.restrict(xi.values)
    b_m = float(np.dot(m * x, Zt) / np.dot(m * Z, Zt))
    xs = Field(xi.values - b_m * assemble_Z(grid, bundle.cfg, gs).values, grid)
    return b_m, xs


def z_rayleigh(bundle: SolutionBundle, pot, gs) -> float:
    """⟨L ΣZ, ΣZ⟩_M / ⟨ΣZ, ΣZ⟩_M on the sector."""
    op = assemble_linearized(bundle, pot, gs.p, "sector")
    z = op.from_sector(assemble_Z(bundle.grid, bundle.cfg, gs).values)
    return float((z @ (op.K @ z)) / op.inner(z, z).real)


@dataclass
class SpectrumReport:
    k: int
    eigs_sector: list
    eigs_full: list
    gap_sector: float
    full_min: float
    kernel_overlap: float
    b_m: float
    xi_star_norm: float
    z_rayleigh: float = math.nan
    rotation_residual: float = math.nan
    full_min_block: str = ""
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"k": self.k, "gap_sector": self.gap_sector, "full_min": self.full_min,
                "full_min_block": self.full_min_block, "kernel_overlap": self.kernel_overlap,
                "b_m": self.b_m, "xi_star_norm": self.xi_star_norm, "z_rayleigh": self.z_rayleigh,
                "rotation_residual": self.rotation_residual, **self.extras}

    def rows(self):
        for i, (lam, _) in enumerate(self.eigs_sector):
            yield {"k": self.k, "space": "sector", "idx": i, "lambda": lam}
        for i, (lam, name) in enumerate(self.eigs_full):
            yield {"k": self.k, "space": f"full:{name}", "idx": i, "lambda": lam}


def spectrum(bundle: SolutionBundle, pot, gs, num_eigs: int = 6, tau: float = 0.1,
             blocks: str = "all") -> SpectrumReport:
    """Sector and full-disc edge spectra around the bundle.

    blocks="all" scans every Bloch block; blocks="rotation" only the DD block
    that carries ∂_θu (the full-disc minimum is then bounded above by it).
    """
    p = gs.p
    grid = bundle.grid
    sec = edge_spectrum(assemble_linearized(bundle, pot, p, "sector"), num_eigs)
    eigs_sector = [(lam, Field(grid.extend(v.real), grid)) for lam, v in sec]
    eigs_sector = [(lam, Field(star_normalize(bundle, f.values, tau), grid)) for lam, f in eigs_sector]
    gap = abs(eigs_sector[0][0])

    todo = full_disk_blocks(grid) if blocks == "all" else [grid.block("DD")]
    eigs_full = []
    near = None
    for blk in todo:
        op = linearized_block(bundle, pot, p, blk)
        pairs = edge_spectrum(op, min(num_eigs, 4))
        for lam, vec in pairs:
            for _ in range(block_multiplicity(blk, grid.k)):
                eigs_full.append((lam, blk.name))
        if near is None or abs(pairs[0][0]) < abs(near[0]):
            near = (pairs[0][0], pairs[0][1], op)
    eigs_full.sort(key=lambda t: abs(t[0]))
    overlap = kernel_overlap(near[2], near[1], bundle)

    xi = eigs_sector[0][1]
    b_m, xs = kernel_decompose(xi, bundle, gs, tau)
    w = star_weight(grid, star_params(bundle.cfg, tau))
    return SpectrumReport(k=grid.k, eigs_sector=eigs_sector, eigs_full=eigs_full, gap_sector=gap,
                          full_min=abs(near[0]), kernel_overlap=overlap, b_m=b_m,
                          xi_star_norm=float(np.max(np.abs(xs.values) / w)),
                          z_rayleigh=z_rayleigh(bundle, pot, gs),
                          rotation_residual=rotation_residual(bundle, pot, p),
                          full_min_block=near[2].name,
                          extras={"blocks": blocks, "h": grid.h})
