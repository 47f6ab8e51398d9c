"""Planar two- and three-body Machian quantum mechanics on reduced-coordinate grids."""

from .checks import (
    commutator_residual,
    ehrenfest_check,
    hermiticity_residual,
    schmidt_rank,
    separability_ranks,
)
from .evolution import evolve, relax_ground_state, spectral_radius
from .grid import Grid, Wavefunction, gaussian_packet, random_packet
from .operators import (
    LinearOperator,
    QuantumSystem,
    apply_canonical_momentum,
    apply_hamiltonian,
    apply_momentum,
    expectation,
    hamiltonian_operator,
    operators_for,
)

__all__ = [
    "Grid", "Wavefunction", "gaussian_packet", "random_packet", "QuantumSystem", "LinearOperator",
    "apply_momentum", "apply_canonical_momentum", "apply_hamiltonian", "expectation", "hamiltonian_operator",
    "operators_for", "evolve", "relax_ground_state", "spectral_radius", "commutator_residual",
    "ehrenfest_check", "hermiticity_residual", "schmidt_rank", "separability_ranks",
]
