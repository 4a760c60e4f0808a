"""valuevac: a hardware-free value-aware vacuum robot.

A deterministic home simulation, a three-mode behavior controller, a
multi-stage reasoning pipeline over pluggable model backends, a scenario and
consistency-evaluation harness, and an operator gateway.
"""

__version__ = "0.1.0"

from .controller import (
    CadenceConfig,
    Decision,
    DecisionSource,
    DecisionToken,
    Mode,
    ModeController,
    SpeedConfig,
    transition,
)
from .world import Entity, FloorPlan, Pose, World, load_floorplan

__all__ = [
    "CadenceConfig",
    "Decision",
    "DecisionSource",
    "DecisionToken",
    "Entity",
    "FloorPlan",
    "Mode",
    "ModeController",
    "Pose",
    "SpeedConfig",
    "World",
    "load_floorplan",
    "transition",
    "__version__",
]
