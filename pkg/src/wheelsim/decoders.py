"""Raw modality signals -> arbitration inputs.

Joystick ADC counts, transcribed speech, accelerometer tilt and EOG
millivolt traces are each reduced to the fields the priority ladder
consumes. All decoders are deterministic over their inputs; the EOG decoder
additionally keeps per-episode memory so a dwell command fires once.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .arbitration import JOY_FULL_SCALE, EOG_THRESHOLD_DEG, MotionDirection

ADC_MAX_VOLTS = 3.3
ADC_MAX_COUNTS = 4095
ADC_CENTER = 2048

GESTURE_TILT_DEG = 20.0

EOG_MV_PER_DEGREE = 0.020
EOG_MIN_HISTORY_MS = 200
EOG_FILTER_WINDOW_MS = 50
EOG_DWELL_MS = 4000
BLINK_MIN_MV = 0.3
BLINK_MIN_WIDTH_MS = 50
BLINK_MAX_WIDTH_MS = 400
BLINK_PAIR_WINDOW_MS = 1000

VOICE_LEXICON = {
    "forward": MotionDirection.FORWARD,
    "backward": MotionDirection.BACKWARD,
    "left": MotionDirection.LEFT,
    "right": MotionDirection.RIGHT,
    "stop": MotionDirection.STOP,
}


class OutOfRange(ValueError):
    pass


class InsufficientHistory(ValueError):
    pass


def adc_map(voltage: float) -> int:
    """0..3.3 V onto 0..4095 counts, rounding half away from zero."""
    if not 0.0 <= voltage <= ADC_MAX_VOLTS:
        raise OutOfRange(f"voltage {voltage} outside [0, {ADC_MAX_VOLTS}]")
    return math.floor(voltage / ADC_MAX_VOLTS * ADC_MAX_COUNTS + 0.5)


@dataclass(frozen=True, slots=True)
class JoystickRaw:
    x_counts: int
    y_counts: int
    pressed: bool = False

    def __post_init__(self):
        for name, v in (("x_counts", self.x_counts), ("y_counts", self.y_counts)):
            if not 0 <= v <= ADC_MAX_COUNTS:
                raise OutOfRange(f"{name}={v} outside 0..{ADC_MAX_COUNTS}")


@dataclass(frozen=True, slots=True)
class JoystickDecode:
    joy_speed: int  # dominant-axis deflection magnitude in centered counts
    direction: MotionDirection
    speed: float


def decode_joystick(raw: JoystickRaw) -> JoystickDecode:
    """Dominant-axis decode: +y forward / -y backward, +x right / -x left.

    Ties favor the y axis. A pressed stick is the stationary request and
    reports zero deflection.
    """
    if raw.pressed:
        return JoystickDecode(0, MotionDirection.STOP, 0.0)
    cx = raw.x_counts - ADC_CENTER
    cy = raw.y_counts - ADC_CENTER
    joy_speed = max(abs(cx), abs(cy))
    if joy_speed == 0:
        return JoystickDecode(0, MotionDirection.STOP, 0.0)
    if abs(cy) >= abs(cx):
        direction = MotionDirection.FORWARD if cy > 0 else MotionDirection.BACKWARD
    else:
        direction = MotionDirection.RIGHT if cx > 0 else MotionDirection.LEFT
    return JoystickDecode(joy_speed, direction, min(1.0, joy_speed / JOY_FULL_SCALE))


def parse_voice(text: str) -> Optional[MotionDirection]:
    """Closed-vocabulary exact match after trim+lowercase; None otherwise."""
    return VOICE_LEXICON.get(text.strip().lower())


@dataclass(frozen=True, slots=True)
class AccelSample:
    ax: float  # g
    ay: float
    az: float
    t: int = 0  # ms

    def magnitude(self) -> float:
        return math.sqrt(self.ax * self.ax + self.ay * self.ay + self.az * self.az)


def decode_gesture(sample: AccelSample) -> Optional[MotionDirection]:
    """Glove tilt to direction; pitch beats roll on simultaneous exceedance.

    Below the 20 degree threshold on both axes the hand is considered flat
    (tremor rejection) and no command is produced.
    """
    pitch = math.degrees(math.atan2(-sample.ax, sample.az))
    roll = math.degrees(math.atan2(sample.ay, sample.az))
    if pitch > GESTURE_TILT_DEG:
        return MotionDirection.FORWARD
    if pitch < -GESTURE_TILT_DEG:
        return MotionDirection.BACKWARD
    if roll > GESTURE_TILT_DEG:
        return MotionDirection.RIGHT
    if roll < -GESTURE_TILT_DEG:
        return MotionDirection.LEFT
    return None


# --- EOG ---

Channel = str  # "horizontal" | "vertical"


@dataclass(slots=True)
class EogTrace:
    """Per-channel millivolt history with strictly increasing times."""

    horizontal: list[tuple[int, float]] = field(default_factory=list)
    vertical: list[tuple[int, float]] = field(default_factory=list)

    def append(self, t: int, potential_mv: float, channel: Channel) -> None:
        samples = self._channel(channel)
        if samples and t <= samples[-1][0]:
            raise ValueError(f"{channel} sample times must increase ({t} after {samples[-1][0]})")
        samples.append((t, potential_mv))

    def _channel(self, channel: Channel) -> list[tuple[int, float]]:
        if channel == "horizontal":
            return self.horizontal
        if channel == "vertical":
            return self.vertical
        raise ValueError(f"unknown EOG channel: {channel!r}")

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[int, Channel, float]]) -> "EogTrace":
        trace = cls()
        for t, channel, mv in rows:
            trace.append(int(t), float(mv), channel)
        return trace

    @classmethod
    def from_csv(cls, path) -> "EogTrace":
        trace = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                trace.append(int(row["t_ms"]), float(row["value"]), row["channel"])
        return trace


@dataclass(frozen=True, slots=True)
class BlinkEvent:
    start_ms: int
    width_ms: int
    peak_mv: float


@dataclass(frozen=True, slots=True)
class EogDecode:
    eog_angle: float  # degrees, >= 0
    eog_command: Optional[MotionDirection]
    blink_events: tuple[BlinkEvent, ...]
    dwell_ms: int = 0


def _moving_average(samples: list[tuple[int, float]], now: int, window_ms: int) -> float:
    lo = now - window_ms
    acc = 0.0
    n = 0
    for t, mv in reversed(samples):
        if t > now:
            continue
        if t < lo:
            break
        acc += mv
        n += 1
    return acc / n if n else 0.0


def _blink_pulses(samples: list[tuple[int, float]], now: int, baseline: float) -> list[BlinkEvent]:
    """Completed above-threshold pulses in the vertical channel up to `now`."""
    pulses = []
    start = None
    peak = 0.0
    last_above = None
    for t, mv in samples:
        if t > now:
            break
        level = mv - baseline
        if level > BLINK_MIN_MV:
            if start is None:
                start = t
                peak = level
            else:
                peak = max(peak, level)
            last_above = t
        elif start is not None:
            width = last_above - start
            if BLINK_MIN_WIDTH_MS <= width <= BLINK_MAX_WIDTH_MS:
                pulses.append(BlinkEvent(start_ms=start, width_ms=width, peak_mv=peak))
            start = None
    return pulses


BLINK_SCAN_MS = 2000  # pair window + max pulse width + margin


class EogDecoder:
    """Gaze-dwell and double-blink decoding over an EOG trace.

    Horizontal deflection maps to a gaze angle at 20 uV/degree; a sustained
    angle above the ladder threshold emits the mapped direction once per
    dwell episode and keeps it active while the dwell persists. Two vertical
    blink pulses inside a 1 s window emit Stop and cancel the episode.

    The dwell run is derived from the trace content (a fresh decoder called
    once on a long trace sees the full dwell); repeated update() calls only
    re-evaluate the new portion. `gaze_map` assigns the positive/negative
    horizontal deflection signs to directions (a per-user electrode
    convention).
    """

    def __init__(
        self,
        gaze_map: Optional[dict[int, MotionDirection]] = None,
        baseline_mv: float = 0.0,
        vertical_baseline_mv: float = 0.0,
    ):
        self.gaze_map = gaze_map or {
            +1: MotionDirection.FORWARD,
            -1: MotionDirection.BACKWARD,
        }
        self.baseline_mv = baseline_mv
        self.vertical_baseline_mv = vertical_baseline_mv
        self.emissions: list[tuple[int, MotionDirection]] = []
        self._last_eval: Optional[int] = None
        self._scan_idx = 0
        self._vert_lo = 0
        self._dwell_start: Optional[int] = None
        self._dwell_sign = 0
        self._emitted = False
        self._active: Optional[MotionDirection] = None
        self._blink_mark = -1  # start of the newest consumed blink pair

    def _angle_at(self, trace: EogTrace, t: int) -> tuple[float, int]:
        filtered = _moving_average(trace.horizontal, t, EOG_FILTER_WINDOW_MS) - self.baseline_mv
        angle = abs(filtered) / EOG_MV_PER_DEGREE
        sign = 0 if filtered == 0 else (1 if filtered > 0 else -1)
        return angle, sign

    def _advance(self, trace: EogTrace, t: int) -> tuple[float, int]:
        angle, sign = self._angle_at(trace, t)
        if angle > EOG_THRESHOLD_DEG and sign != 0:
            if self._dwell_start is None or sign != self._dwell_sign:
                self._dwell_start = t
                self._dwell_sign = sign
                self._emitted = False
                self._active = None
            if not self._emitted and t - self._dwell_start >= EOG_DWELL_MS:
                direction = self.gaze_map.get(self._dwell_sign)
                self._emitted = True
                self._active = direction
                if direction is not None:
                    self.emissions.append((t, direction))
        else:
            self._dwell_start = None
            self._dwell_sign = 0
            self._emitted = False
            self._active = None
        return angle, sign

    def update(self, trace: EogTrace, now: int) -> EogDecode:
        horizontal = trace.horizontal
        if not horizontal or horizontal[0][0] > now - EOG_MIN_HISTORY_MS:
            raise InsufficientHistory(
                f"need >= {EOG_MIN_HISTORY_MS} ms of horizontal history before t={now}"
            )

        # Sweep dwell state over sample times not yet evaluated, then `now`.
        angle = 0.0
        while self._scan_idx < len(horizontal) and horizontal[self._scan_idx][0] <= now:
            t = horizontal[self._scan_idx][0]
            if self._last_eval is None or t > self._last_eval:
                angle, _ = self._advance(trace, t)
                self._last_eval = t
            self._scan_idx += 1
        if self._last_eval is None or now > self._last_eval:
            angle, _ = self._advance(trace, now)
            self._last_eval = now
        else:
            angle, _ = self._angle_at(trace, now)
        dwell = (now - self._dwell_start) if self._dwell_start is not None else 0

        command = self._active if self._emitted else None

        vertical = trace.vertical
        # Advance the scan window without ever cutting inside a pulse.
        while (
            self._vert_lo < len(vertical)
            and vertical[self._vert_lo][0] < now - BLINK_SCAN_MS
            and vertical[self._vert_lo][1] - self.vertical_baseline_mv <= BLINK_MIN_MV
        ):
            self._vert_lo += 1
        hi = self._vert_lo
        while hi < len(vertical) and vertical[hi][0] <= now:
            hi += 1
        pulses = _blink_pulses(vertical[self._vert_lo:hi], now, self.vertical_baseline_mv)
        blink_stop = False
        if len(pulses) >= 2:
            a, b = pulses[-2], pulses[-1]
            if b.start_ms - a.start_ms <= BLINK_PAIR_WINDOW_MS and b.start_ms > self._blink_mark:
                self._blink_mark = b.start_ms
                blink_stop = True

        if blink_stop:
            # Double blink halts the chair and ends any dwell episode.
            self._active = None
            self._emitted = True
            command = MotionDirection.STOP
            self.emissions.append((now, MotionDirection.STOP))

        return EogDecode(
            eog_angle=angle,
            eog_command=command,
            blink_events=tuple(pulses),
            dwell_ms=dwell,
        )


def decode_eog(trace: EogTrace, now: int, decoder: Optional[EogDecoder] = None) -> EogDecode:
    """Single-shot decode at time `now` (fresh episode memory unless given)."""
    return (decoder or EogDecoder()).update(trace, now)


def load_voice_corpus(path) -> list[tuple[str, Optional[MotionDirection]]]:
    """Utterance corpus: one utterance per line, expected label after a tab.

    The label is a direction name or "none" for out-of-lexicon utterances.
    """
    corpus = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                utterance, label = line.rstrip("\n").rsplit("\t", 1)
            except ValueError:
                raise ValueError(f"{path}:{line_no}: expected utterance<TAB>label") from None
            label = label.strip().lower()
            expected = None if label == "none" else VOICE_LEXICON.get(label)
            if label != "none" and expected is None:
                raise ValueError(f"{path}:{line_no}: unknown label {label!r}")
            corpus.append((utterance, expected))
    return corpus
