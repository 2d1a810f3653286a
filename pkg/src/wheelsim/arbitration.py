"""Priority-ladder mode arbitration with hazard latching.

The controller runs a fixed 20 ms (50 Hz) tick. Each tick one input snapshot
is arbitrated: hazards stop the chair and latch a safe-halt that only an
explicit operator reset can lower; otherwise the highest eligible rung wins
in the order joystick > voice > gesture > EOG > stop.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Iterator, Optional

TICK_MS = 20
JOY_DEADZONE_COUNTS = 50
JOY_FULL_SCALE = 2047
DEBOUNCE_MS = 250
EOG_THRESHOLD_DEG = 12.0

#: Policy sentinel: automatic priority ladder (all rungs eligible).
AUTO_LADDER = None


class MotionDirection(Enum):
    FORWARD = "Forward"
    BACKWARD = "Backward"
    LEFT = "Left"
    RIGHT = "Right"
    STOP = "Stop"


class ModeId(Enum):
    STOP = "Stop"
    JOYSTICK = "Joystick"
    VOICE = "Voice"
    GESTURE = "Gesture"
    EOG = "EOG"


#: The four rungs a manual mode button can select.
SELECTABLE_MODES = (ModeId.JOYSTICK, ModeId.VOICE, ModeId.GESTURE, ModeId.EOG)


class HazardStillActive(Exception):
    """Safe-halt clear refused: at least one hazard flag is still set."""


@dataclass(frozen=True, slots=True)
class MotionCommand:
    direction: MotionDirection
    speed: float  # fraction of max speed in [0, 1], the PWM duty analogue
    source: ModeId

    def __post_init__(self):
        if not 0.0 <= self.speed <= 1.0:
            raise ValueError(f"speed {self.speed} outside [0, 1]")
        if (self.direction is MotionDirection.STOP) != (self.speed == 0.0):
            raise ValueError("direction Stop iff speed 0")


STOP_COMMAND = MotionCommand(MotionDirection.STOP, 0.0, ModeId.STOP)


@dataclass(frozen=True, slots=True)
class ControlInputs:
    """One per-tick snapshot of every modality signal and hazard flag."""

    joy_speed: int = 0  # signed centered ADC counts, -2048..+2047
    joy_pressed: bool = False  # stick push button: stationary request
    joy_command: Optional[MotionDirection] = None
    voice_ready: bool = False
    voice_command: Optional[MotionDirection] = None
    gesture_ok: bool = False
    gesture_command: Optional[MotionDirection] = None
    eog_angle: float = 0.0  # gaze eccentricity, degrees, >= 0
    eog_command: Optional[MotionDirection] = None
    fall_flag: bool = False
    health_alert: bool = False
    obstacle_flag: bool = False
    timestamp: int = 0  # ms of simulated time

    def __post_init__(self):
        if self.eog_angle < 0:
            raise ValueError("eog_angle must be >= 0")

    @property
    def hazard(self) -> bool:
        return self.fall_flag or self.health_alert or self.obstacle_flag


@dataclass(frozen=True, slots=True)
class ArbitrationState:
    safe_halt: bool = False
    debounce_first_seen_ms: Optional[int] = None
    selected_mode: Optional[ModeId] = AUTO_LADDER  # None = automatic ladder
    last_tick_ms: int = 0


def debounce_ok(state: ArbitrationState, above_threshold: bool, now: int) -> tuple[bool, ArbitrationState]:
    """Joystick debounce: sustained deflection for >= 250 ms before the rung arms.

    Each observed tick counts as one full 20 ms of dwell (the sampler cannot
    see between ticks), so 13 consecutive above-threshold ticks = 260 ms
    passes while 12 = 240 ms does not. Any drop below threshold resets.
    """
    if now < state.last_tick_ms:
        raise ValueError("debounce clock moved backwards")
    if not above_threshold:
        if state.debounce_first_seen_ms is None:
            return False, state
        return False, replace(state, debounce_first_seen_ms=None)
    first_seen = state.debounce_first_seen_ms
    if first_seen is None:
        first_seen = now
        state = replace(state, debounce_first_seen_ms=now)
    dwell = now - first_seen + TICK_MS
    return dwell >= DEBOUNCE_MS, state


def _joystick_command(inputs: ControlInputs) -> MotionCommand:
    speed = min(1.0, abs(inputs.joy_speed) / JOY_FULL_SCALE)
    direction = inputs.joy_command
    if direction is None:
        # 1-D fallback: sign of the deflection picks the axis direction.
        direction = MotionDirection.FORWARD if inputs.joy_speed > 0 else MotionDirection.BACKWARD
    if direction is MotionDirection.STOP:
        return MotionCommand(MotionDirection.STOP, 0.0, ModeId.JOYSTICK)
    return MotionCommand(direction, speed, ModeId.JOYSTICK)


def _modal_command(direction: Optional[MotionDirection], source: ModeId, speed: float) -> MotionCommand:
    if direction is None:
        # A rung won without a usable command: degrade to Stop for this tick.
        return MotionCommand(MotionDirection.STOP, 0.0, source)
    if direction is MotionDirection.STOP:
        return MotionCommand(MotionDirection.STOP, 0.0, source)
    return MotionCommand(direction, speed, source)


def arbitrate(
    inputs: ControlInputs,
    state: ArbitrationState,
    command_speed: float = 1.0,
) -> tuple[ModeId, MotionCommand, ArbitrationState]:
    """One tick of the priority ladder.

    Hazards dominate everything and set the safe-halt latch; a latched state
    keeps producing Stop until cleared via clear_safe_halt. Under a manual
    mode selection only that rung is eligible (its own trigger condition
    still applies). `command_speed` is the duty fraction used by the
    discrete modalities (voice/gesture/EOG), which have no proportional axis.
    """
    if inputs.timestamp < state.last_tick_ms:
        raise ValueError(
            f"timestamp {inputs.timestamp} precedes last tick {state.last_tick_ms}"
        )

    now = inputs.timestamp
    above = abs(inputs.joy_speed) > JOY_DEADZONE_COUNTS
    joy_armed, state = debounce_ok(state, above, now)
    state = replace(state, last_tick_ms=now)

    if inputs.hazard:
        return ModeId.STOP, STOP_COMMAND, replace(state, safe_halt=True)
    if state.safe_halt:
        return ModeId.STOP, STOP_COMMAND, state

    if inputs.joy_pressed:
        # Stationary request from the stick button: immediate Stop, no latch.
        return ModeId.STOP, STOP_COMMAND, state

    policy = state.selected_mode

    def eligible(mode: ModeId) -> bool:
        return policy is AUTO_LADDER or policy is mode

    if eligible(ModeId.JOYSTICK) and joy_armed:
        return ModeId.JOYSTICK, _joystick_command(inputs), state
    if eligible(ModeId.VOICE) and inputs.voice_ready:
        return ModeId.VOICE, _modal_command(inputs.voice_command, ModeId.VOICE, command_speed), state
    if eligible(ModeId.GESTURE) and inputs.gesture_ok:
        return ModeId.GESTURE, _modal_command(inputs.gesture_command, ModeId.GESTURE, command_speed), state
    if eligible(ModeId.EOG) and inputs.eog_angle > EOG_THRESHOLD_DEG:
        return ModeId.EOG, _modal_command(inputs.eog_command, ModeId.EOG, command_speed), state
    return ModeId.STOP, STOP_COMMAND, state


def clear_safe_halt(
    state: ArbitrationState,
    fall: bool = False,
    health: bool = False,
    obstacle: bool = False,
) -> ArbitrationState:
    """Operator reset of the latch; refused while any hazard flag persists."""
    if not state.safe_halt:
        return state
    if fall or health or obstacle:
        active = [n for n, v in (("fall", fall), ("health", health), ("obstacle", obstacle)) if v]
        raise HazardStillActive(f"cannot clear safe halt: {', '.join(active)} still active")
    return replace(state, safe_halt=False)


def select_mode(state: ArbitrationState, button) -> ArbitrationState:
    """Manual mode-switch button press; AUTO_LADDER restores the full ladder.

    Takes effect on the next tick and never touches the safe-halt latch.
    """
    if button is AUTO_LADDER:
        return replace(state, selected_mode=AUTO_LADDER)
    if button not in SELECTABLE_MODES:
        raise ValueError(f"not a selectable mode: {button!r}")
    return replace(state, selected_mode=button)


@dataclass(frozen=True, slots=True)
class TickOutput:
    t_ms: int
    mode: ModeId
    command: MotionCommand


_IDLE = ControlInputs()


def run_loop(
    source: Iterable[Optional[ControlInputs]],
    state: Optional[ArbitrationState] = None,
    tick_ms: int = TICK_MS,
    realtime: bool = False,
    command_speed: float = 1.0,
) -> Iterator[TickOutput]:
    """Replay a snapshot stream through the ladder, one output per tick.

    The source is expected to yield one snapshot per tick; a None entry (or a
    timestamp gap in a replayed trace) counts as a miss. One miss repeats the
    previous snapshot, two consecutive misses degrade to the idle (Stop)
    input. Ends cleanly when the source is exhausted.
    """
    state = state or ArbitrationState()
    prev: Optional[ControlInputs] = None
    misses = 0
    t = None
    wall_next = time.monotonic()
    for item in source:
        if item is None:
            misses += 1
            if prev is None or misses >= 2:
                effective = _IDLE
            else:
                effective = prev
            t = 0 if t is None else t + tick_ms
        else:
            misses = 0
            effective = prev = item
            t = item.timestamp
        effective = replace(effective, timestamp=t)
        mode, command, state = arbitrate(effective, state, command_speed=command_speed)
        if realtime:
            wall_next += tick_ms / 1000.0
            delay = wall_next - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        yield TickOutput(t_ms=t, mode=mode, command=command)


# --- trace replay / timeline serialization (JSON Lines) ---

_DIRECTION_BY_NAME = {d.value.lower(): d for d in MotionDirection}
_MODE_BY_NAME = {m.value.lower(): m for m in ModeId}


def direction_from_name(name: Optional[str]) -> Optional[MotionDirection]:
    if name is None:
        return None
    return _DIRECTION_BY_NAME.get(str(name).strip().lower())


def mode_from_name(name: str) -> ModeId:
    try:
        return _MODE_BY_NAME[str(name).strip().lower()]
    except KeyError:
        raise ValueError(f"unknown mode name: {name!r}") from None


def inputs_from_json(line: str) -> ControlInputs:
    d = json.loads(line)
    return ControlInputs(
        joy_speed=int(d.get("joy_speed", 0)),
        joy_pressed=bool(d.get("joy_pressed", False)),
        joy_command=direction_from_name(d.get("joy_command")),
        voice_ready=bool(d.get("voice_ready", False)),
        voice_command=direction_from_name(d.get("voice_command")),
        gesture_ok=bool(d.get("gesture_ok", False)),
        gesture_command=direction_from_name(d.get("gesture_command")),
        eog_angle=float(d.get("eog_angle", 0.0)),
        eog_command=direction_from_name(d.get("eog_command")),
        fall_flag=bool(d.get("fall_flag", False)),
        health_alert=bool(d.get("health_alert", False)),
        obstacle_flag=bool(d.get("obstacle_flag", False)),
        timestamp=int(d.get("timestamp", 0)),
    )


def inputs_to_json(inputs: ControlInputs) -> str:
    d = {
        "joy_speed": inputs.joy_speed,
        "joy_pressed": inputs.joy_pressed,
        "voice_ready": inputs.voice_ready,
        "gesture_ok": inputs.gesture_ok,
        "eog_angle": inputs.eog_angle,
        "fall_flag": inputs.fall_flag,
        "health_alert": inputs.health_alert,
        "obstacle_flag": inputs.obstacle_flag,
        "timestamp": inputs.timestamp,
    }
    for key, value in (
        ("joy_command", inputs.joy_command),
        ("voice_command", inputs.voice_command),
        ("gesture_command", inputs.gesture_command),
        ("eog_command", inputs.eog_command),
    ):
        if value is not None:
            d[key] = value.value
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def read_input_trace(path) -> Iterator[ControlInputs]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield inputs_from_json(line)


def snapshots_per_tick(
    trace: Iterable[ControlInputs], tick_ms: int = TICK_MS
) -> Iterator[Optional[ControlInputs]]:
    """Align a timestamped trace onto the fixed tick grid.

    Ticks with no snapshot yield None (a miss for run_loop); when several
    snapshots land inside one tick the latest wins.
    """
    pending: Optional[ControlInputs] = None
    it = iter(trace)
    exhausted = False
    t = 0
    while True:
        current = None
        while not exhausted:
            if pending is None:
                try:
                    pending = next(it)
                except StopIteration:
                    exhausted = True
                    break
            if pending.timestamp <= t:
                current = pending
                pending = None
            else:
                break
        if current is not None:
            yield replace(current, timestamp=t)
        elif exhausted and pending is None:
            return
        else:
            yield None
        t += tick_ms


def tick_to_json(out: TickOutput) -> str:
    return json.dumps(
        {
            "t_ms": out.t_ms,
            "mode": out.mode.value,
            "direction": out.command.direction.value,
            "speed": out.command.speed,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
