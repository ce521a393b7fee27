import math

import numpy as np
import pytest

from multibump.discretization import Field, build_grid
from multibump.model import Potential, RingConfig
from multibump.solver import SolutionBundle
from multibump.spectral import (
    assemble_linearized,
    block_multiplicity,
    edge_spectrum,
    full_disk_blocks,
    spectrum,
    theta_derivative,
)


@pytest.fixture(scope="module")
def zero_bundle():
    cfg = RingConfig(6, 4.0)
    grid = build_grid(cfg, 0.1)
    zero = Field(np.zeros(grid.shape), grid)
    return SolutionBundle(cfg, zero, zero, 4.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("space", ["sector", "DD", "ND"])
def test_shifted_laplacian_bounded_below_by_one(zero_bundle, space):
    op = assemble_linearized(zero_bundle, Potential(0.0, 0.0, 3.0), 3.0, space)
    vals = [lam for lam, _ in edge_spectrum(op, 3)]
    assert min(vals) >= 1.0
    # Dirichlet disc of radius R: first eigenvalue 1 + (j01/R)²
    if space == "sector":
        R = zero_bundle.grid.R_out
        assert vals[0] == pytest.approx(1 + (2.404825557695773 / R) ** 2, rel=1e-3)


def test_operator_symmetric(zero_bundle):
    op = assemble_linearized(zero_bundle, Potential(), 3.0, "sector")
    assert abs(op.K - op.K.T).max() <= 1e-12


def test_block_bookkeeping(zero_bundle):
    grid = zero_bundle.grid
    blocks = full_disk_blocks(grid)
    total = sum(block_multiplicity(b, grid.k) for b in blocks if b.name.startswith("bloch"))
    assert total == grid.k - 2  # m = 1..k-1 without m = k/2
    assert {"NN", "DD", "ND", "DN"} <= {b.name for b in blocks}


def test_eigenvectors_mass_orthonormal(zero_bundle):
    op = assemble_linearized(zero_bundle, Potential(0.0, 0.0, 3.0), 3.0, "sector")
    pairs = edge_spectrum(op, 4)
    G = np.array([[op.inner(a, b).real for _, b in pairs] for _, a in pairs])
    np.testing.assert_allclose(G, np.eye(4), atol=1e-8)


def test_theta_derivative_of_cosine(zero_bundle):
    grid = zero_bundle.grid
    vals = np.cos(grid.k * grid.theta)[None, :] * grid.rho[:, None]
    d = theta_derivative(grid, vals)
    exact = -grid.k * np.sin(grid.k * grid.theta)[None, :] * grid.rho[:, None]
    assert np.max(np.abs(d - exact)[1:, 1:-1]) <= 1e-3 * grid.k * grid.R_out
    assert not np.any(d[:, 0]) and not np.any(d[:, -1])


@pytest.mark.slow
def test_k8_spectrum(bundle8, gs2, pot):
    rep = spectrum(bundle8, pot, gs2)
    assert rep.gap_sector >= 10 * rep.full_min
    assert rep.full_min_block == "DD"
    assert rep.kernel_overlap >= 0.99
    # the ring radius is a maximum of the reduced energy: Z is a negative direction
    assert rep.eigs_sector[0][0] <= rep.z_rayleigh < 0
    assert math.isfinite(rep.b_m) and math.isfinite(rep.xi_star_norm)
    rows = list(rep.rows())
    assert rows[0]["space"] == "sector"
