"""Planar differential-drive kinematics for the simulated chair."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .arbitration import MotionCommand, MotionDirection

V_MAX_DEFAULT = 1.0  # m/s, typical indoor powered-wheelchair cruise
OMEGA_MAX_DEFAULT = 1.0  # rad/s


def normalize_heading(theta: float) -> float:
    """Wrap into (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True, slots=True)
class KinematicState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0  # rad, (-pi, pi], counterclockwise positive
    v: float = 0.0  # m/s


def step_kinematics(
    state: KinematicState,
    cmd: MotionCommand,
    dt: float,
    v_max: float = V_MAX_DEFAULT,
    omega_max: float = OMEGA_MAX_DEFAULT,
) -> KinematicState:
    """Advance one step: drive along the heading or spin in place.

    Left turns counterclockwise (+heading), right clockwise. Stop zeroes the
    velocity and leaves the pose untouched.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    direction = cmd.direction
    if direction is MotionDirection.STOP:
        return replace(state, v=0.0)
    if direction in (MotionDirection.FORWARD, MotionDirection.BACKWARD):
        sign = 1.0 if direction is MotionDirection.FORWARD else -1.0
        v = sign * v_max * cmd.speed
        return KinematicState(
            x=state.x + v * math.cos(state.heading) * dt,
            y=state.y + v * math.sin(state.heading) * dt,
            heading=state.heading,
            v=v,
        )
    sign = 1.0 if direction is MotionDirection.LEFT else -1.0
    return KinematicState(
        x=state.x,
        y=state.y,
        heading=normalize_heading(state.heading + sign * omega_max * cmd.speed * dt),
        v=0.0,
    )
