"""Molecular-zipper model on rooted Cayley trees: boundary laws, Gibbs measures and phase scans."""

from zipper.model import ModelParams, Configuration
from zipper.boundary_law import ConstantLaw, LevelLaw, ExplicitLaw, solve_constant
from zipper.thermo import critical_temperature, phase_point

__all__ = [
    "ModelParams",
    "Configuration",
    "ConstantLaw",
    "LevelLaw",
    "ExplicitLaw",
    "solve_constant",
    "critical_temperature",
    "phase_point",
]
