"""Two-class kinematic-wave traffic solvers in Eulerian and Lagrangian form."""

from .core import (
    Boundary,
    BeyondJamError,
    CFLViolation,
    ClassId,
    ClusterField,
    InvariantViolation,
    KinwaveError,
    ScenarioConfig,
    Segment,
    TrafficLight,
    VehicleClassParams,
    load_scenario,
    parse_scenario,
    validate_scenario,
)
from .speedlaw import FreeSpaceLaw, GreenshieldsLaw, max_wave_speed

__all__ = [
    "Boundary",
    "BeyondJamError",
    "CFLViolation",
    "ClassId",
    "ClusterField",
    "FreeSpaceLaw",
    "GreenshieldsLaw",
    "InvariantViolation",
    "KinwaveError",
    "ScenarioConfig",
    "Segment",
    "TrafficLight",
    "VehicleClassParams",
    "load_scenario",
    "max_wave_speed",
    "parse_scenario",
    "validate_scenario",
]
