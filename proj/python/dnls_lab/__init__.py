"""Lattice NLS toolkit: spectra, nonlinear bound states, resonance rates and dynamics."""

from ._core import (
    NumericalError,
    ValidationError,
    __version__,
    classify_resonance,
    continue_branch,
    decompose,
    default_test_potential,
    discrete_spectrum,
    energy,
    evolve,
    find_test_potential,
    gamma,
    mass,
    propagate_linear,
    rate_equations_rhs,
    run_experiment,
    single_site_potential,
    two_site_potential,
)

__all__ = [
    "NumericalError",
    "ValidationError",
    "__version__",
    "classify_resonance",
    "continue_branch",
    "decompose",
    "default_test_potential",
    "discrete_spectrum",
    "energy",
    "evolve",
    "find_test_potential",
    "gamma",
    "mass",
    "propagate_linear",
    "rate_equations_rhs",
    "run_experiment",
    "single_site_potential",
    "two_site_potential",
]
