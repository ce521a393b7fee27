"""Ring-shaped multi-bump solutions of -Δu + V(|y|)u = u^p.

Ground states by shooting, the reduced energy of a k-bump ring, a
symmetry-reduced polar PDE solver, spectral non-degeneracy checks, local
Pohozaev identities and a two-ring reduced construction.
"""

from .errors import ConfigError, ConvergenceError, MultibumpError
from .ground_state import GroundState, ground_state, solve_ground_state
from .model import Potential, RingConfig, TwoRingConfig, radius_window
from .reduced_energy import energy_constants, find_ring_radius

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "GroundState",
    "MultibumpError",
    "Potential",
    "RingConfig",
    "TwoRingConfig",
    "energy_constants",
    "find_ring_radius",
    "ground_state",
    "radius_window",
    "solve_ground_state",
]
