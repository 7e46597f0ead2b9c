"""Event-triggered platoon consensus simulator with attack-resilience certificates."""

from .attack import AttackBudget, AttackSchedule
from .graph import Spectrum, Topology, builtin
from .plant import PlantModel, VehicleState
from .scenario import parse_scenario, parse_scenario_text, serialize_scenario
from .sim import Metrics, Scenario, Trace, metrics, prepare, run
from .trigger import DynamicTriggerParams, StaticTriggerParams

__version__ = "0.1.0"

__all__ = [
    "AttackBudget",
    "AttackSchedule",
    "DynamicTriggerParams",
    "Metrics",
    "PlantModel",
    "Scenario",
    "Spectrum",
    "StaticTriggerParams",
    "Topology",
    "Trace",
    "VehicleState",
    "builtin",
    "metrics",
    "parse_scenario",
    "parse_scenario_text",
    "prepare",
    "run",
    "serialize_scenario",
    "__version__",
]
