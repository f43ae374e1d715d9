"""Exactly solvable reference models used as closed-form oracles."""

from .jaynes_cummings import (
    JCConfig,
    JCRates,
    jc_bloch_functions,
    jc_exact_map,
    jc_joint_hamiltonian,
    jc_rates,
)
from .spin_star import (
    SpinStarConfig,
    SpinStarGenerator,
    spinstar_exact_generator,
    spinstar_exact_map,
    spinstar_exact_trajectory,
    spinstar_joint_hamiltonian,
    spinstar_kappas,
    spinstar_moments,
)

__all__ = [
    "JCConfig",
    "JCRates",
    "SpinStarConfig",
    "SpinStarGenerator",
    "jc_bloch_functions",
    "jc_exact_map",
    "jc_joint_hamiltonian",
    "jc_rates",
    "spinstar_exact_generator",
    "spinstar_exact_map",
    "spinstar_exact_trajectory",
    "spinstar_joint_hamiltonian",
    "spinstar_kappas",
    "spinstar_moments",
]
