"""Spectral Galerkin simulation of the 1D stochastic Cahn-Hilliard equation.

The package integrates ``dX = -A(AX + F(X)) dt + G(X) dW`` on ``(0, L)``
with Dirichlet conditions in the sine eigenbasis, and ships Monte Carlo
estimators for moment bounds, spatial and temporal convergence rates and an
exponential integrability functional.
"""

__version__ = "0.1.0"

from .dynamics import DiffusionSpec, GalerkinOperators, Potential, diffusion_apply, drift_F, drift_full
from .errors import (
    BlowUpError,
    ConfigurationError,
    DegenerateFitError,
    ExclusionBudgetError,
    StochchError,
)
from .integrators import SchemeConfig, SolverState, simulate, step_exp_euler, step_semi_implicit, step_split_yz
from .noise import NoisePlan, WienerIncrements, restrict_modes, sample_increments
from .spectral import SpectralField, SpectralSpace, build_space

__all__ = [
    "BlowUpError", "ConfigurationError", "DegenerateFitError", "DiffusionSpec",
    "ExclusionBudgetError", "GalerkinOperators", "NoisePlan", "Potential", "SchemeConfig",
    "SolverState", "SpectralField", "SpectralSpace", "StochchError", "WienerIncrements",
    "build_space", "diffusion_apply", "drift_F", "drift_full", "restrict_modes",
    "sample_increments", "simulate", "step_exp_euler", "step_semi_implicit", "step_split_yz",
]
