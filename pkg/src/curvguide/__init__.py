"""Design and validation of curved matter-wave guides.

Modules: ``scenario`` (parameters, units, files), ``geometry`` (curvature
profiles, paths, diagnostics), ``designer`` (bend design), ``classical``
(point-particle dynamics and sweeps), ``quantum`` (2D Schrödinger solver)
and ``cli``.
"""
__version__ = "0.1.0"

from .classical import ClassicalState, exit_amplitude, integrate, robustness_sweep
from .designer import circular_bend, design_adiabatic_1d_bend, design_sta_bend, solve_delta_y
from .errors import CurvguideError, NumericalError, ValidationError
from .geometry import CurvatureProfile, adiabaticity_report, equivalent_radius, reconstruct_path
from .scenario import PhysicalParams, Scenario, load_scenario, natural_units

__all__ = [
    "ClassicalState", "CurvatureProfile", "CurvguideError", "NumericalError", "PhysicalParams",
    "Scenario", "ValidationError", "adiabaticity_report", "circular_bend", "design_adiabatic_1d_bend",
    "design_sta_bend", "equivalent_radius", "exit_amplitude", "integrate", "load_scenario",
    "natural_units", "reconstruct_path", "robustness_sweep", "solve_delta_y",
]
