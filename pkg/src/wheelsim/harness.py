"""Scenario-driven simulation of the whole chair + monitoring stack.

A SimSession advances simulated time in fixed 20 ms ticks: scripted or live
inputs run through the real decoders into the arbitration ladder, the
winning command drives the kinematics, the simulated patient body feeds the
fall/convulsion detectors, and vitals are framed, encrypted and ingested by
an in-process monitor at the telemetry cadence. Equal seeds give
byte-identical run artifacts.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from . import arbitration as arb
from .arbitration import (
    ArbitrationState,
    ControlInputs,
    HazardStillActive,
    ModeId,
    MotionDirection,
    TICK_MS,
    clear_safe_halt,
    select_mode,
)
from .calibration import (
    KIND_RANGES,
    PROFILES,
    UnknownProfile,
    apply_calibration,
    ground_truth_calibration,
    invert_calibration,
    quantize_temperature,
)
from .decoders import (
    AccelSample,
    EogDecoder,
    EogTrace,
    JoystickRaw,
    decode_gesture,
    decode_joystick,
    parse_voice,
)
from .detectors import ConvulsionDetector, DetectorConfig, FallDetector, detect_heart_attack, check_temperature, check_spo2, TempStatus, SpO2Status
from .kinematics import KinematicState, step_kinematics
from .protocol import FeedRecord, FrameEncoder, TransportDown, Uploader
from .service import MonitorCore, Outbox

DEFAULT_KEY_HEX = "000102030405060708090a0b0c0d0e0f"

_MODALITY_MODE = {
    "joystick": ModeId.JOYSTICK,
    "voice": ModeId.VOICE,
    "gesture": ModeId.GESTURE,
    "eog": ModeId.EOG,
}

_OPPOSITE = {
    MotionDirection.FORWARD: MotionDirection.BACKWARD,
    MotionDirection.BACKWARD: MotionDirection.FORWARD,
    MotionDirection.LEFT: MotionDirection.RIGHT,
    MotionDirection.RIGHT: MotionDirection.LEFT,
}


class ScenarioParse(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class SimConfig:
    seed: int = 0
    v_max: float = 1.0
    omega_max: float = 1.0
    command_speed: float = 1.0
    telemetry_cadence_ms: int = 1000
    device_id: int = 7001
    patient_id: str = "p1"
    key_hex: str = DEFAULT_KEY_HEX
    uploader_capacity: int = 256
    hr_profile: str = "resting"
    hr_sigma: float = 1.0
    spo2_profile: str = "resting"
    spo2_sigma: float = 0.4
    temp_profile: str = "resting"
    temp_sigma: float = 0.1
    detector: DetectorConfig = DetectorConfig()

    @property
    def key(self) -> bytes:
        return bytes.fromhex(self.key_hex)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        detector = DetectorConfig.from_dict(d.pop("detector", {}))
        known = {f for f in cls.__dataclass_fields__ if f != "detector"}
        unknown = set(d) - known
        if unknown:
            raise ScenarioParse(f"unknown config keys: {sorted(unknown)}")
        return cls(detector=detector, **d)


@dataclass(frozen=True, slots=True)
class ScenarioEvent:
    t_ms: int
    type: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class Scenario:
    name: str
    duration_ms: int
    events: tuple[ScenarioEvent, ...]
    config: SimConfig

    @classmethod
    def from_dict(cls, d: dict, name: str = "scenario") -> "Scenario":
        try:
            duration = int(d["duration_ms"])
            config_dict = dict(d.get("config", {}))
            if "seed" in d:
                config_dict.setdefault("seed", int(d["seed"]))
            events = tuple(
                sorted(
                    (
                        ScenarioEvent(int(e["t_ms"]), str(e["type"]), dict(e.get("params", {})))
                        for e in d.get("events", [])
                    ),
                    key=lambda e: e.t_ms,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioParse(f"bad scenario: {exc}") from exc
        for e in events:
            if not 0 <= e.t_ms <= duration:
                raise ScenarioParse(f"event at {e.t_ms} ms outside duration {duration}")
        return cls(name=name, duration_ms=duration, events=events, config=SimConfig.from_dict(config_dict))


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return Scenario.from_dict(json.load(fh), name=path.stem)


def bundled_scenario(name: str) -> Scenario:
    ref = resources.files("wheelsim.fixtures") / "scenarios" / f"{name}.json"
    with resources.as_file(ref) as path:
        return load_scenario(path)


# --- simulated patient body ---


class AccelScript:
    """Patient accelerometer stream: rest jitter plus scripted overlays."""

    def __init__(self, seed: int):
        self._rng = random.Random(f"accel:{seed}")
        self._overlays: list[tuple[int, int, Callable[[int], AccelSample]]] = []

    def inject_fall(self, t0: int) -> None:
        def fall(t: int) -> AccelSample:
            dt = t - t0
            if dt < 160:
                return AccelSample(0.0, 0.0, 0.1, t)
            if dt < 180:
                return AccelSample(0.0, 0.0, 1.1, t)
            return AccelSample(0.0, 0.0, 3.0, t)

        self._overlays.append((t0, t0 + 240, fall))

    def inject_convulsion(self, t0: int, duration_ms: int, freq_hz: float = 4.0, amplitude_g: float = 0.4) -> None:
        def shake(t: int) -> AccelSample:
            osc = amplitude_g * math.sin(2.0 * math.pi * freq_hz * (t - t0) / 1000.0)
            return AccelSample(0.0, 0.0, 1.0 + osc, t)

        self._overlays.append((t0, t0 + duration_ms, shake))

    def sample(self, t: int) -> AccelSample:
        jitter = (
            self._rng.gauss(0.0, 0.02),
            self._rng.gauss(0.0, 0.02),
            self._rng.gauss(0.0, 0.02),
        )
        for start, end, fn in self._overlays:
            if start <= t < end:
                return fn(t)
        return AccelSample(jitter[0], jitter[1], 1.0 + jitter[2], t)


class VitalsSource:
    """Profile + noise -> raw counts -> calibrated reading, per cadence step."""

    def __init__(self, kind: str, profile: str, sigma: float, seed: int):
        try:
            self._profile = PROFILES[kind][profile.replace("_", "-")]
        except KeyError:
            raise UnknownProfile(f"{kind}/{profile}") from None
        self.kind = kind
        self.sigma = sigma
        self._coeff = ground_truth_calibration(kind)
        self._rng = random.Random(f"vitals:{kind}:{seed}")
        self._override: Optional[tuple[float, int, int]] = None  # value, start, end
        self.current = self._measure(0)

    def set_profile(self, profile: str) -> None:
        try:
            self._profile = PROFILES[self.kind][profile.replace("_", "-")]
        except KeyError:
            raise UnknownProfile(f"{self.kind}/{profile}") from None

    def set_override(self, value: float, start: int, hold_ms: int) -> None:
        self._override = (value, start, start + hold_ms)

    def _measure(self, t: int) -> float:
        true = self._profile(t / 1000.0)
        noise = self._rng.gauss(0.0, self.sigma) if self.sigma > 0 else 0.0
        if self._override is not None:
            value, start, end = self._override
            if start <= t < end:
                true, noise = value, 0.0
        lo, hi = KIND_RANGES[self.kind]
        measured = max(lo, min(hi, true + noise))
        raw = round(invert_calibration(self._coeff, measured))
        reading = apply_calibration(self._coeff, raw)
        if self.kind == "temp":
            reading = quantize_temperature(reading, bits=12)
        return max(lo, min(hi, reading))

    def step(self, t: int) -> float:
        self.current = self._measure(t)
        return self.current


@dataclass(slots=True)
class TickRecord:
    t_ms: int
    mode: ModeId
    direction: MotionDirection
    speed: float
    pose: KinematicState
    hr: float
    spo2: float
    temp: float
    fall_flag: bool
    health_alert: bool
    obstacle_flag: bool
    latched: bool


class SimSession:
    """Tick-by-tick execution of the full edge stack."""

    def __init__(
        self,
        config: SimConfig,
        monitor: Optional[MonitorCore] = None,
        gaze_map: Optional[dict[int, MotionDirection]] = None,
    ):
        self.config = config
        self.monitor = monitor
        self.t = 0
        self.arb_state = ArbitrationState()
        self.pose = KinematicState()
        self.accel = AccelScript(config.seed)
        self.eog_trace = EogTrace()
        self.eog = EogDecoder(gaze_map=gaze_map)
        self.fall_detector = FallDetector(config.detector)
        self.convulsion_detector = ConvulsionDetector(config.detector)
        self.vitals = {
            "hr": VitalsSource("hr", config.hr_profile, config.hr_sigma, config.seed),
            "spo2": VitalsSource("spo2", config.spo2_profile, config.spo2_sigma, config.seed),
            "temp": VitalsSource("temp", config.temp_profile, config.temp_sigma, config.seed),
        }
        self.transport_down = False
        self.obstacle = False
        self.forced_fall = False
        self.forced_health = False
        self._holds: dict[str, tuple] = {}
        self._gaze: Optional[tuple[float, int]] = None  # mv, until
        self._blinks: list[tuple[int, int]] = []  # pulse (start, end)
        self._fall_since_feed = False
        self._conv_since_feed = False
        self._pending_clear = False
        self.clear_refusals = 0
        if monitor is not None:
            self.uploader = Uploader(
                FrameEncoder(config.key, config.device_id),
                self._send,
                cadence_s=config.telemetry_cadence_ms / 1000.0,
                capacity=config.uploader_capacity,
            )
        else:
            self.uploader = None

    # --- transport ---

    def _send(self, frame: bytes) -> None:
        if self.transport_down or self.monitor is None:
            raise TransportDown("scripted outage")
        self.monitor.ingest(frame)

    # --- intents (scenario events or live console) ---

    def set_joystick(self, x_counts: int, y_counts: int, pressed: bool = False, hold_ms: int = 200) -> None:
        self._holds["joystick"] = (JoystickRaw(int(x_counts), int(y_counts), bool(pressed)), self.t + hold_ms)

    def say(self, text: str, hold_ms: int = 100) -> None:
        self._holds["voice"] = (str(text), self.t + hold_ms)

    def tilt(self, ax: float, ay: float, az: float, hold_ms: int = 200) -> None:
        self._holds["gesture"] = (AccelSample(float(ax), float(ay), float(az), self.t), self.t + hold_ms)

    def gaze(self, amplitude_mv: float, hold_ms: int = 4500) -> None:
        self._gaze = (float(amplitude_mv), self.t + hold_ms)

    def gaze_angle(self, angle_deg: float, hold_ms: int = 4500) -> None:
        self.gaze(angle_deg * 0.020, hold_ms)

    def blink_pair(self, gap_ms: int = 400, width_ms: int = 120, amplitude_mv: float = 0.5) -> None:
        start = self.t + TICK_MS
        self._blinks.append((start, start + width_ms))
        self._blinks.append((start + gap_ms, start + gap_ms + width_ms))

    def select_mode(self, mode: Optional[str]) -> None:
        if mode is None or str(mode).lower() in ("auto", "autoladder"):
            self.arb_state = select_mode(self.arb_state, arb.AUTO_LADDER)
        else:
            self.arb_state = select_mode(self.arb_state, arb.mode_from_name(mode))

    def request_clear_safehalt(self) -> None:
        self._pending_clear = True

    def apply_event(self, event: ScenarioEvent) -> None:
        p = event.params
        kind = event.type
        if kind == "joystick":
            self.set_joystick(p.get("x_counts", 2048), p.get("y_counts", 2048), p.get("pressed", False), p.get("hold_ms", 200))
        elif kind == "voice":
            self.say(p["text"], p.get("hold_ms", 100))
        elif kind == "gesture":
            self.tilt(p.get("ax", 0.0), p.get("ay", 0.0), p.get("az", 1.0), p.get("hold_ms", 200))
        elif kind == "eog_gaze":
            if "angle_deg" in p:
                self.gaze_angle(p["angle_deg"], p.get("hold_ms", 4500))
            else:
                self.gaze(p["amplitude_mv"], p.get("hold_ms", 4500))
        elif kind == "eog_blink":
            self.blink_pair(p.get("gap_ms", 400), p.get("width_ms", 120), p.get("amplitude_mv", 0.5))
        elif kind == "fall":
            self.accel.inject_fall(event.t_ms)
        elif kind == "convulsion":
            self.accel.inject_convulsion(event.t_ms, p.get("duration_ms", 6000), p.get("freq_hz", 4.0), p.get("amplitude_g", 0.4))
        elif kind == "hazard":
            value = bool(p.get("value", True))
            which = p["kind"]
            if which == "obstacle":
                self.obstacle = value
            elif which == "fall":
                self.forced_fall = value
            elif which == "health":
                self.forced_health = value
            else:
                raise ScenarioParse(f"unknown hazard kind {which!r}")
        elif kind == "vitals":
            self.vitals[p["kind"]].set_profile(p["profile"])
        elif kind == "vitals_value":
            self.vitals[p["kind"]].set_override(float(p["value"]), event.t_ms, int(p.get("hold_ms", 10_000)))
        elif kind == "transport":
            self.transport_down = bool(p.get("down", True))
        elif kind == "select_mode":
            self.select_mode(p.get("mode"))
        elif kind == "clear_safehalt":
            self.request_clear_safehalt()
        else:
            raise ScenarioParse(f"unknown event type {event.type!r}")

    # --- per-tick pipeline ---

    def _held(self, name: str):
        held = self._holds.get(name)
        if held is None:
            return None
        value, until = held
        if self.t >= until:
            del self._holds[name]
            return None
        return value

    def _eog_inputs(self, t: int) -> tuple[float, Optional[MotionDirection]]:
        mv = 0.0
        if self._gaze is not None:
            amplitude, until = self._gaze
            if t < until:
                mv = amplitude
            else:
                self._gaze = None
        self.eog_trace.append(t, mv, "horizontal")
        v_mv = 0.0
        for start, end in self._blinks:
            if start <= t < end:
                v_mv = 0.5
                break
        self.eog_trace.append(t, v_mv, "vertical")
        self._blinks = [(s, e) for s, e in self._blinks if e > t]
        if t < 200:
            return 0.0, None
        decode = self.eog.update(self.eog_trace, t)
        return decode.eog_angle, decode.eog_command

    def tick(self) -> TickRecord:
        t = self.t
        cfg = self.config

        accel_sample = self.accel.sample(t)
        hr = self.vitals["hr"].current
        fall_fired = self.fall_detector.update(accel_sample)
        conv_fired = self.convulsion_detector.update(accel_sample, hr)
        self._fall_since_feed = self._fall_since_feed or fall_fired
        self._conv_since_feed = self._conv_since_feed or conv_fired

        joystick_raw = self._held("joystick")
        if joystick_raw is not None:
            joy = decode_joystick(joystick_raw)
            joy_speed, joy_command, joy_pressed = joy.joy_speed, joy.direction, joystick_raw.pressed
            if joy_command is MotionDirection.STOP and not joy_pressed:
                joy_command = None
        else:
            joy_speed, joy_command, joy_pressed = 0, None, False

        voice_text = self._held("voice")
        voice_command = parse_voice(voice_text) if voice_text is not None else None
        voice_ready = voice_command is not None

        gesture_sample = self._held("gesture")
        gesture_command = decode_gesture(gesture_sample) if gesture_sample is not None else None
        gesture_ok = gesture_command is not None

        eog_angle, eog_command = self._eog_inputs(t)

        spo2 = self.vitals["spo2"].current
        temp = self.vitals["temp"].current
        health_alert = (
            self.forced_health
            or detect_heart_attack(hr, cfg.detector)
            or check_temperature(temp, cfg.detector) is not TempStatus.NORMAL
            or check_spo2(spo2, cfg.detector) is SpO2Status.SPO2_LOW
        )

        inputs = ControlInputs(
            joy_speed=joy_speed,
            joy_pressed=joy_pressed,
            joy_command=joy_command,
            voice_ready=voice_ready,
            voice_command=voice_command,
            gesture_ok=gesture_ok,
            gesture_command=gesture_command,
            eog_angle=eog_angle,
            eog_command=eog_command,
            fall_flag=self.forced_fall or fall_fired,
            health_alert=health_alert,
            obstacle_flag=self.obstacle,
            timestamp=t,
        )

        if self._pending_clear:
            self._pending_clear = False
            try:
                self.arb_state = clear_safe_halt(
                    self.arb_state,
                    fall=inputs.fall_flag,
                    health=inputs.health_alert,
                    obstacle=inputs.obstacle_flag,
                )
            except HazardStillActive:
                self.clear_refusals += 1

        mode, command, self.arb_state = arb.arbitrate(
            inputs, self.arb_state, command_speed=cfg.command_speed
        )
        self.pose = step_kinematics(
            self.pose, command, TICK_MS / 1000.0, v_max=cfg.v_max, omega_max=cfg.omega_max
        )

        next_t = t + TICK_MS
        if self.uploader is not None:
            if next_t % cfg.telemetry_cadence_ms == 0:
                for source in self.vitals.values():
                    source.step(next_t)
                record = FeedRecord(
                    t=next_t,
                    hr=self.vitals["hr"].current,
                    spo2=self.vitals["spo2"].current,
                    temp=self.vitals["temp"].current,
                    fall=1 if self._fall_since_feed else 0,
                    convulsion=1 if self._conv_since_feed else 0,
                    mode=mode,
                    pose=(self.pose.x, self.pose.y, self.pose.heading),
                )
                self._fall_since_feed = False
                self._conv_since_feed = False
                self.uploader.offer(record)
            self.uploader.step(next_t)

        out = TickRecord(
            t_ms=t,
            mode=mode,
            direction=command.direction,
            speed=command.speed,
            pose=self.pose,
            hr=hr,
            spo2=spo2,
            temp=temp,
            fall_flag=inputs.fall_flag,
            health_alert=health_alert,
            obstacle_flag=inputs.obstacle_flag,
            latched=self.arb_state.safe_halt,
        )
        self.t = next_t
        return out

    @property
    def latched(self) -> bool:
        return self.arb_state.safe_halt


# --- scenario runner ---


@dataclass(slots=True)
class RunResult:
    out_dir: Path
    ticks: int
    metrics: dict


def run_scenario(
    scenario: Scenario,
    out_dir,
    monitor: Optional[MonitorCore] = None,
    realtime: bool = False,
) -> RunResult:
    """Execute a scenario and write all timelines/metrics under out_dir.

    Artifacts contain only simulated-time content, so equal seeds give
    byte-identical output; --realtime only paces the wall clock.
    """
    import time as _time

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = scenario.config
    if monitor is None:
        monitor = MonitorCore(
            key=config.key,
            data_dir=out / "server_data",
            outbox=Outbox(out / "outbox"),
            detector_config=config.detector,
        )
    session = SimSession(config, monitor=monitor)

    events = list(scenario.events)
    next_event = 0
    n_ticks = scenario.duration_ms // TICK_MS

    control_lines = []
    pose_lines = []
    vitals_lines = []
    last_vitals = None
    wall_next = _time.monotonic()
    for _ in range(n_ticks):
        while next_event < len(events) and events[next_event].t_ms <= session.t:
            session.apply_event(events[next_event])
            next_event += 1
        rec = session.tick()
        if realtime:
            wall_next += TICK_MS / 1000.0
            delay = wall_next - _time.monotonic()
            if delay > 0:
                _time.sleep(delay)
        control_lines.append(
            json.dumps(
                {"t_ms": rec.t_ms, "mode": rec.mode.value, "direction": rec.direction.value, "speed": rec.speed},
                sort_keys=True,
                separators=(",", ":"),
            )
        )
        pose_lines.append(
            json.dumps(
                {
                    "t_ms": rec.t_ms,
                    "x": round(rec.pose.x, 9),
                    "y": round(rec.pose.y, 9),
                    "heading": round(rec.pose.heading, 9),
                    "v": round(rec.pose.v, 9),
                    "latched": rec.latched,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
        vitals = (rec.hr, rec.spo2, rec.temp)
        if vitals != last_vitals:
            vitals_lines.append(
                json.dumps(
                    {"t_ms": rec.t_ms, "hr": rec.hr, "spo2": rec.spo2, "temp": rec.temp},
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
            last_vitals = vitals

    (out / "control_timeline.jsonl").write_text("\n".join(control_lines) + "\n", encoding="utf-8")
    (out / "pose_timeline.jsonl").write_text("\n".join(pose_lines) + "\n", encoding="utf-8")
    (out / "vitals_timeline.jsonl").write_text("\n".join(vitals_lines) + "\n", encoding="utf-8")

    metrics = {
        "scenario": scenario.name,
        "seed": config.seed,
        "ticks": n_ticks,
        "duration_ms": scenario.duration_ms,
        "final_pose": {
            "x": round(session.pose.x, 9),
            "y": round(session.pose.y, 9),
            "heading": round(session.pose.heading, 9),
        },
        "latched": session.latched,
        "uploader": {
            "produced": session.uploader.stats.produced,
            "sent": session.uploader.stats.sent,
            "dropped": session.uploader.stats.dropped,
            "send_failures": session.uploader.stats.send_failures,
        },
        "monitor": monitor.stats(),
        "alerts": monitor.list_alerts(),
    }
    (out / "metrics.json").write_text(
        json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return RunResult(out_dir=out, ticks=n_ticks, metrics=metrics)


# --- command-accuracy trials ---


@dataclass(frozen=True, slots=True)
class TrialSpec:
    modality: str
    command: MotionDirection
    window_ms: int


def _trial_spec(modality: str, command: MotionDirection) -> TrialSpec:
    window = {"joystick": 500, "voice": 500, "gesture": 500, "eog": 5400}[modality]
    return TrialSpec(modality, command, window)


_JOY_DEFLECTION = 1500


def _inject_clean(session: SimSession, spec: TrialSpec) -> None:
    cmd = spec.command
    if spec.modality == "joystick":
        if cmd is MotionDirection.STOP:
            session.set_joystick(2048, 2048, pressed=True, hold_ms=spec.window_ms)
        else:
            dx = {MotionDirection.RIGHT: _JOY_DEFLECTION, MotionDirection.LEFT: -_JOY_DEFLECTION}.get(cmd, 0)
            dy = {MotionDirection.FORWARD: _JOY_DEFLECTION, MotionDirection.BACKWARD: -_JOY_DEFLECTION}.get(cmd, 0)
            session.set_joystick(2048 + dx, 2048 + dy, hold_ms=spec.window_ms)
    elif spec.modality == "voice":
        session.say(cmd.value.lower(), hold_ms=200)
    elif spec.modality == "gesture":
        if cmd is MotionDirection.STOP:
            pass  # flat hand: no tilt at all
        else:
            session.tilt(*_tilt_for(cmd), hold_ms=300)
    elif spec.modality == "eog":
        if cmd is MotionDirection.STOP:
            session.blink_pair()
        else:
            session.gaze(0.30, hold_ms=spec.window_ms)


def _inject_corrupted(session: SimSession, spec: TrialSpec, rng: random.Random) -> None:
    cmd = spec.command
    if cmd is MotionDirection.STOP:
        # Misrecognition: a spurious motion command sneaks in.
        decoy = rng.choice([d for d in _OPPOSITE])
        if spec.modality == "joystick":
            dx = {MotionDirection.RIGHT: _JOY_DEFLECTION, MotionDirection.LEFT: -_JOY_DEFLECTION}.get(decoy, 0)
            dy = {MotionDirection.FORWARD: _JOY_DEFLECTION, MotionDirection.BACKWARD: -_JOY_DEFLECTION}.get(decoy, 0)
            session.set_joystick(2048 + dx, 2048 + dy, hold_ms=spec.window_ms)
        elif spec.modality == "voice":
            session.say(decoy.value.lower(), hold_ms=200)
        elif spec.modality == "gesture":
            session.tilt(*_tilt_for(decoy), hold_ms=300)
        elif spec.modality == "eog":
            session.gaze(0.30, hold_ms=spec.window_ms)  # gaze instead of blink
        return
    # Dropped/garbled signal: below threshold or out of lexicon.
    if spec.modality == "joystick":
        session.set_joystick(2048 + 40, 2048, hold_ms=spec.window_ms)
    elif spec.modality == "voice":
        session.say("mumble", hold_ms=200)
    elif spec.modality == "gesture":
        session.tilt(0.05, 0.05, 1.0, hold_ms=300)
    elif spec.modality == "eog":
        session.gaze(0.16, hold_ms=spec.window_ms)  # 8 degrees: below the rung threshold


def _tilt_for(cmd: MotionDirection) -> tuple[float, float, float]:
    s, c = math.sin(math.radians(25.0)), math.cos(math.radians(25.0))
    return {
        MotionDirection.FORWARD: (-s, 0.0, c),
        MotionDirection.BACKWARD: (s, 0.0, c),
        MotionDirection.RIGHT: (0.0, s, c),
        MotionDirection.LEFT: (0.0, -s, c),
    }[cmd]


def _run_one_trial(spec: TrialSpec, corrupted: bool, rng: random.Random, config: SimConfig) -> bool:
    gaze_map = None
    if spec.modality == "eog" and spec.command is not MotionDirection.STOP:
        gaze_map = {1: spec.command, -1: _OPPOSITE[spec.command]}
    elif spec.modality == "eog":
        decoy = rng.choice([d for d in _OPPOSITE])
        gaze_map = {1: decoy, -1: _OPPOSITE[decoy]}
    session = SimSession(config, monitor=None, gaze_map=gaze_map)
    if corrupted:
        _inject_corrupted(session, spec, rng)
    else:
        _inject_clean(session, spec)
    want_mode = _MODALITY_MODE[spec.modality]
    matched = False
    moved = False
    for _ in range(spec.window_ms // TICK_MS):
        rec = session.tick()
        if rec.direction is not MotionDirection.STOP:
            moved = True
            if rec.mode is want_mode and rec.direction is spec.command:
                matched = True
    if spec.command is MotionDirection.STOP:
        return not moved
    return matched


def run_trials(
    modality: str,
    command: MotionDirection | str,
    n: int = 100,
    recognition_noise: float = 0.0,
    seed: int = 0,
    config: Optional[SimConfig] = None,
    log: Optional["TrialLog"] = None,
):
    """n scripted attempts of one command through one modality.

    `recognition_noise` is the probability the decoder receives a corrupted
    signal; exactly round(noise * n) trials are corrupted, at seeded
    positions, so fixture noise rates reproduce their success counts
    exactly.
    """
    from .analytics import TrialLog

    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(command, str):
        command = MotionDirection(command.capitalize())
    if modality not in _MODALITY_MODE:
        raise ValueError(f"unknown modality {modality!r}")
    if not 0.0 <= recognition_noise <= 1.0:
        raise ValueError("recognition_noise must be a probability")
    config = config or SimConfig()
    spec = _trial_spec(modality, command)
    rng = random.Random(f"trials:{seed}:{modality}:{command.value}")
    k = round(recognition_noise * n)
    corrupted_set = set(rng.sample(range(n), k)) if k else set()
    successes = 0
    for i in range(n):
        trial_config = replace(config, seed=config.seed + i)
        if _run_one_trial(spec, i in corrupted_set, rng, trial_config):
            successes += 1
    log = log if log is not None else TrialLog.empty()
    log.record(modality, command.value, n, successes)
    return log


def load_noise_fixture() -> dict:
    """Bundled per-cell recognition-noise rates plus headline metadata."""
    ref = resources.files("wheelsim.fixtures") / "trial_noise_reference.json"
    with resources.as_file(ref) as path:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)


def run_trial_table(
    noise: Optional[dict] = None, n: int = 100, seed: int = 0, config: Optional[SimConfig] = None
):
    """All modality x command cells; None noise uses the bundled fixture."""
    from .analytics import TrialLog, COMMAND_ORDER, MODALITY_ORDER

    fixture = noise if noise is not None else load_noise_fixture()
    rates = fixture["noise"] if "noise" in fixture else fixture
    log = TrialLog.empty()
    for modality in MODALITY_ORDER:
        for command in COMMAND_ORDER:
            p = float(rates[modality][command])
            run_trials(modality, command, n=n, recognition_noise=p, seed=seed, config=config, log=log)
    return log


def trial_report(log, out_dir) -> dict:
    """Accuracy table files plus a consistency note on headline claims."""
    from .analytics import accuracy_table, emit_report

    out = Path(out_dir)
    emit_report(log, out, formats=("csv", "json"))
    table = accuracy_table(log)
    fixture = load_noise_fixture()
    headline = fixture.get("headline_claim_pct", {})
    flags = {}
    for modality, claimed in headline.items():
        measured = table.modality_mean_pct.get(modality)
        if measured is not None and abs(measured - claimed) > 1e-9:
            flags[modality] = {"claimed_pct": claimed, "per_cell_mean_pct": measured}
    report = {
        "modality_mean_pct": dict(sorted(table.modality_mean_pct.items())),
        "overall_mean_pct": table.overall_mean_pct,
        "headline_consistency": {
            "consistent": not flags,
            "disagreements": flags,
            "note": (
                "headline accuracy claims disagree with the per-cell table means; "
                "this report derives every figure from per-cell counts"
                if flags
                else "headline claims match per-cell means"
            ),
        },
    }
    (out / "trial_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return report
