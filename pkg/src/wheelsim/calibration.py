"""Two-point sensor calibration, quantization models, and vital-sign sources.

Raw device counts relate to engineering units through a per-channel gain and
offset fitted from two anchor readings (ice/boil for temperature, +-1 g jig
for the accelerometer, simulator setpoints for the pulse oximeter). The
synthetic vital sources emit raw counts whose calibrated values follow a
named profile plus seeded Gaussian noise, so every downstream accuracy
figure is reproducible.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Iterable, Optional

TEMP_MIN_C = -55.0
TEMP_MAX_C = 125.0
HR_MIN = 0.0
HR_MAX = 300.0
SPO2_MIN = 0.0
SPO2_MAX = 100.0

ACCEL_MG_PER_LSB = 4.0
ACCEL_COUNT_MIN = -4096  # signed 13-bit
ACCEL_COUNT_MAX = 4095


class DegenerateAnchors(ValueError):
    pass


class OutOfRange(ValueError):
    pass


class UnknownProfile(KeyError):
    pass


@dataclass(frozen=True, slots=True)
class CalibrationCoefficients:
    gain: float  # output units per raw unit
    offset: float
    channel: str = ""
    refs: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (1.0, 1.0))

    def __post_init__(self):
        if not math.isfinite(self.gain) or self.gain == 0.0:
            raise ValueError(f"gain must be finite and nonzero, got {self.gain}")

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "gain": self.gain,
            "offset": self.offset,
            "refs": [list(r) for r in self.refs],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationCoefficients":
        refs = d.get("refs") or [[0.0, 0.0], [1.0, 1.0]]
        return cls(
            gain=float(d["gain"]),
            offset=float(d["offset"]),
            channel=str(d.get("channel", "")),
            refs=(tuple(map(float, refs[0])), tuple(map(float, refs[1]))),
        )


def two_point_fit(
    raw_lo: float, ref_lo: float, raw_hi: float, ref_hi: float, channel: str = ""
) -> CalibrationCoefficients:
    """Gain/offset through two (raw, reference) anchors."""
    if raw_hi == raw_lo:
        raise DegenerateAnchors(f"anchor raws coincide at {raw_lo}")
    gain = (ref_hi - ref_lo) / (raw_hi - raw_lo)
    offset = ref_lo - gain * raw_lo
    return CalibrationCoefficients(
        gain=gain, offset=offset, channel=channel, refs=((raw_lo, ref_lo), (raw_hi, ref_hi))
    )


def apply_calibration(c: CalibrationCoefficients, raw: float) -> float:
    return c.gain * raw + c.offset


def invert_calibration(c: CalibrationCoefficients, value: float) -> float:
    """Engineering units back to the raw scale (sensor model for generators)."""
    return (value - c.offset) / c.gain


def quantize_temperature(true_c: float, bits: int = 12) -> float:
    """DS18B20-style reading: 0.5 C step at 9 bits halving per extra bit.

    Rounds to the nearest step multiple, ties to the even multiple.
    """
    if not 9 <= bits <= 12:
        raise OutOfRange(f"resolution {bits} outside 9..12 bits")
    if not TEMP_MIN_C <= true_c <= TEMP_MAX_C:
        raise OutOfRange(f"temperature {true_c} outside [{TEMP_MIN_C}, {TEMP_MAX_C}]")
    step = 0.5 / (1 << (bits - 9))
    return round(true_c / step) * step


def quantize_accel(true_g: float) -> int:
    """13-bit accelerometer counts at 4 mg/LSB, saturating at the rails."""
    counts = round(true_g * 1000.0 / ACCEL_MG_PER_LSB)
    return max(ACCEL_COUNT_MIN, min(ACCEL_COUNT_MAX, counts))


@dataclass(frozen=True, slots=True)
class RawSample:
    channel: str
    t: int  # ms
    raw: float


VitalKind = str  # "hr" | "spo2" | "temp"

KIND_RANGES = {
    "hr": (HR_MIN, HR_MAX),
    "spo2": (SPO2_MIN, SPO2_MAX),
    "temp": (TEMP_MIN_C, TEMP_MAX_C),
}


@dataclass(frozen=True, slots=True)
class CalibratedVital:
    kind: VitalKind
    value: float
    t: int
    quality: str = "ok"  # "ok" | "suspect"

    def __post_init__(self):
        lo, hi = KIND_RANGES[self.kind]
        if not lo <= self.value <= hi:
            raise ValueError(f"{self.kind} value {self.value} outside [{lo}, {hi}]")


def _sine_profile(center: float, amplitude: float, period_s: float) -> Callable[[float], float]:
    def profile(t_s: float) -> float:
        return center + amplitude * math.sin(2.0 * math.pi * t_s / period_s)

    return profile


# Named true-value profiles per channel. "cohort" sweeps the span observed
# on the reference cohort; "resting" holds a nominal value.
PROFILES: dict[str, dict[str, Callable[[float], float]]] = {
    "hr": {
        "resting": lambda t_s: 72.0,
        "cohort": _sine_profile(80.0, 20.0, 60.0),  # 60..100 bpm
        "critical-high": lambda t_s: 150.0,
        "critical-low": lambda t_s: 35.0,
    },
    "spo2": {
        "resting": lambda t_s: 97.5,
        "cohort": _sine_profile(96.5, 3.5, 90.0),  # 93..100 %
        "critical-low": lambda t_s: 90.0,
    },
    "temp": {
        "resting": lambda t_s: 36.9,
        "cohort": _sine_profile(36.7, 1.4, 120.0),  # 35.3..38.1 C
        "critical-high": lambda t_s: 39.2,
    },
}


def _clamp(value: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, value))


def generate_vital_trace(
    kind: VitalKind,
    profile: str,
    noise_sigma: float = 0.0,
    duration_ms: int = 10_000,
    seed: int = 0,
    coefficients: Optional[CalibrationCoefficients] = None,
    sample_period_ms: int = 1000,
) -> list[RawSample]:
    """Raw counts that calibrate back to profile(t) + N(0, sigma).

    Deterministic for equal seeds. The sensor model is the inverse of
    `coefficients` (the bundled ground-truth calibration by default), with
    raw counts rounded to integers.
    """
    if duration_ms <= 0:
        raise ValueError("duration must be positive")
    try:
        profile_fn = PROFILES[kind][profile.replace("_", "-")]
    except KeyError:
        raise UnknownProfile(f"{kind}/{profile}") from None
    coefficients = coefficients or ground_truth_calibration(kind)
    rng = random.Random(f"vitals:{kind}:{profile}:{seed}")
    lo, hi = KIND_RANGES[kind]
    samples = []
    for t in range(0, duration_ms, sample_period_ms):
        true = profile_fn(t / 1000.0)
        measured = true + (rng.gauss(0.0, noise_sigma) if noise_sigma > 0 else 0.0)
        measured = _clamp(measured, lo, hi)
        raw = round(invert_calibration(coefficients, measured))
        samples.append(RawSample(channel=kind, t=t, raw=raw))
    return samples


def trace_to_csv(samples: Iterable[RawSample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "channel", "raw"])
        for s in samples:
            writer.writerow([s.t, s.channel, s.raw])


def trace_from_csv(path) -> list[RawSample]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            RawSample(channel=row["channel"], t=int(row["t_ms"]), raw=float(row["raw"]))
            for row in csv.DictReader(fh)
        ]


def load_calibration_file(path) -> dict[str, CalibrationCoefficients]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return {c["channel"]: CalibrationCoefficients.from_dict(c) for c in payload["channels"]}


def save_calibration_file(channels: Iterable[CalibrationCoefficients], path) -> None:
    payload = {"channels": [c.to_dict() for c in channels]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


_GROUND_TRUTH: Optional[dict[str, CalibrationCoefficients]] = None


def ground_truth_calibration(kind: Optional[VitalKind] = None):
    """Bundled true sensor transfer coefficients used by the generators."""
    global _GROUND_TRUTH
    if _GROUND_TRUTH is None:
        ref = resources.files("wheelsim.fixtures") / "ground_truth_calibration.json"
        with resources.as_file(ref) as path:
            _GROUND_TRUTH = load_calibration_file(path)
    if kind is None:
        return dict(_GROUND_TRUTH)
    return _GROUND_TRUTH[kind]
