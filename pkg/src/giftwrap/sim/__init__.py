from .config import SimConfig
from .core import (
    DefectScores,
    FEATURE_DIM,
    GripperCommand,
    PaperChain,
    SimInstabilityError,
    SimState,
    Simulator,
    WrenchReading,
)
from .scenario import Crease, ScenarioLayout, build_layout, parse_scenario
from .render import render_observation

__all__ = [
    "SimConfig", "Simulator", "SimState", "PaperChain", "WrenchReading",
    "GripperCommand", "DefectScores", "SimInstabilityError", "FEATURE_DIM",
    "Crease", "ScenarioLayout", "build_layout", "parse_scenario",
    "render_observation",
]
