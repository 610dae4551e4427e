"""Driven quantum oscillator coupled to a thermal bath and blackbody radiation.

Reduced dynamics from the exact Gaussian propagating function: Matsubara
tables for the correlated thermal initial state, Volterra solvers for the
fundamental solutions, and the second moments of the reduced state.
"""
from .model import (DriveSpec, GaussianPulse, Harmonic, NumericalError, PhysicalParams,
                    PhysicsError, Tabulated, TimeGrid, check, validate_params)
from .moments import (CovarianceTrajectory, GaussianState, MomentFunctionals, density_matrix,
                      equilibrium_state, mean_trajectory, simulate)
from .noise_kernels import Regularization
from .spectral import build_matsubara, equilibrium_moments

__version__ = "0.1.0"

__all__ = ["DriveSpec", "GaussianPulse", "Harmonic", "NumericalError", "PhysicalParams",
           "PhysicsError", "Tabulated", "TimeGrid", "check", "validate_params",
           "CovarianceTrajectory", "GaussianState", "MomentFunctionals", "density_matrix",
           "equilibrium_state", "mean_trajectory", "simulate", "Regularization",
           "build_matsubara", "equilibrium_moments"]
