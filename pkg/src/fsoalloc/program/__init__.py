"""Constrained stochastic programs for FSO resource allocation."""

from fsoalloc.program.base import (
    NO_SELECTION,
    Action,
    LinkConstants,
    RofsoConstants,
    Scenario,
    ShapeError,
)
from fsoalloc.program.fronthaul import FronthaulScenario, capacity_fronthaul
from fsoalloc.program.relay import JointRelayScenario, RelayScenario, capacity_relay_link
from fsoalloc.program.rofso import RofsoScenario, capacity_rofso

__all__ = [
    "NO_SELECTION",
    "Action",
    "FronthaulScenario",
    "JointRelayScenario",
    "LinkConstants",
    "RelayScenario",
    "RofsoConstants",
    "RofsoScenario",
    "Scenario",
    "ShapeError",
    "capacity_fronthaul",
    "capacity_relay_link",
    "capacity_rofso",
]
