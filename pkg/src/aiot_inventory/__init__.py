"""Slot-level simulator of ambient-IoT inventory with energy-harvesting devices."""

from .channel import LayoutConfig, MessageErrorConfig
from .device import DeviceState, Mechanism
from .energy import EfficiencyMode, conversion_efficiency, harvest_power
from .engine import InvalidScenario, Scenario, SimResult, default_scenario, reduction, run
from .params import DEVICE1, DEVICE2, PRESETS, Table1

__all__ = [
    "DEVICE1",
    "DEVICE2",
    "PRESETS",
    "DeviceState",
    "EfficiencyMode",
    "InvalidScenario",
    "LayoutConfig",
    "Mechanism",
    "MessageErrorConfig",
    "Scenario",
    "SimResult",
    "Table1",
    "conversion_efficiency",
    "default_scenario",
    "harvest_power",
    "reduction",
    "run",
]

__version__ = "0.1.0"
