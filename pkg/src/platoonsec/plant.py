"""Second-order discrete-time vehicle dynamics.

Position integrates velocity and velocity integrates the control input,
both over one sampling period; the leader runs the same dynamics with no
input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "VehicleState",
    "PlantModel",
    "step_follower",
    "step_leader",
    "shifted_state",
    "spacing_offsets",
]


class VehicleState(NamedTuple):
    position: float
    velocity: float


@dataclass(frozen=True)
class PlantModel:
    """Sampling time plus the per-follower desired offsets to the leader."""

    sample_time: float
    spacing: tuple[float, ...]

    def __post_init__(self):
        if not (self.sample_time > 0 and math.isfinite(self.sample_time)):
            raise ValueError("sample_time must be positive and finite")
        offs = tuple(float(s) for s in self.spacing)
        if not all(math.isfinite(s) for s in offs):
            raise ValueError("spacing offsets must be finite")
        object.__setattr__(self, "spacing", offs)

    @property
    def n_followers(self) -> int:
        return len(self.spacing)

    @property
    def A(self) -> np.ndarray:
        return np.array([[1.0, self.sample_time], [0.0, 1.0]])

    @property
    def B(self) -> np.ndarray:
        return np.array([[0.0], [self.sample_time]])


def step_follower(m: PlantModel, x: VehicleState, u: float) -> VehicleState:
    """Advance one follower by one sampling period under input u."""
    if not (math.isfinite(x.position) and math.isfinite(x.velocity) and math.isfinite(u)):
        raise ValueError("non-finite state or input")
    return VehicleState(x.position + m.sample_time * x.velocity,
                        x.velocity + m.sample_time * u)


def step_leader(m: PlantModel, x0: VehicleState) -> VehicleState:
    """Advance the uncontrolled leader: constant-velocity motion."""
    return VehicleState(x0.position + m.sample_time * x0.velocity, x0.velocity)


def shifted_state(x: VehicleState, offset: float) -> VehicleState:
    """State with the desired leader-relative offset removed from position.

    In shifted coordinates the formation goal becomes plain agreement with
    the leader state, so broadcast tables and consensus errors work on
    shifted states throughout.
    """
    return VehicleState(x.position - offset, x.velocity)


def spacing_offsets(gap: float, n: int) -> tuple[float, ...]:
    """Offsets for a uniform platoon: vehicle i trails the leader by i*gap."""
    return tuple(-gap * (i + 1) for i in range(n))
