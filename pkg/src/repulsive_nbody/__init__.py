"""Simulation and verification harness for the repulsive Coulomb n-body problem."""

from .model import EnergyReport, ParticleState, energy_report
from .integrate import QuadratureState, StepperConfig, Trajectory, integrate_adaptive
from .scenarios import ScenarioSpec, build

__all__ = [
    "EnergyReport",
    "ParticleState",
    "QuadratureState",
    "ScenarioSpec",
    "StepperConfig",
    "Trajectory",
    "build",
    "energy_report",
    "integrate_adaptive",
]
