"""Threshold and pattern detectors for the patient monitoring channels.

Heart-attack, temperature and SpO2 checks are stateless threshold
predicates. Fall and convulsion detection run over accelerometer windows
with per-episode re-arm so one physical event produces exactly one alert no
matter how analysis windows overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .decoders import AccelSample


class InsufficientWindow(ValueError):
    pass


class AlertKind(Enum):
    HEART_ATTACK = "HeartAttack"
    FALL = "Fall"
    CONVULSION = "Convulsion"
    TEMP_HIGH = "TempHigh"
    TEMP_LOW = "TempLow"
    SPO2_LOW = "SpO2Low"


class Severity(Enum):
    GREEN = "Green"
    RED = "Red"


class TempStatus(Enum):
    NORMAL = "Normal"
    TEMP_HIGH = "TempHigh"
    TEMP_LOW = "TempLow"


class SpO2Status(Enum):
    NORMAL = "Normal"
    SPO2_LOW = "SpO2Low"


@dataclass(frozen=True, slots=True)
class DetectorConfig:
    hr_high: float = 140.0
    hr_low: float = 40.0
    temp_high: float = 38.0
    temp_low: float = 35.5
    spo2_low: float = 94.0
    # fall: free-fall phase then impact
    fall_freefall_g: float = 0.3
    fall_freefall_ms: int = 120
    fall_impact_g: float = 2.5
    fall_impact_window_ms: int = 500
    # convulsion: band-limited oscillation plus heart-rate corroboration
    conv_p2p_g: float = 0.5
    conv_freq_lo_hz: float = 2.0
    conv_freq_hi_hz: float = 8.0
    conv_sustain_ms: int = 5000
    conv_hr_gate: float = 100.0
    # episode re-arm: magnitude back near 1 g for this long
    rearm_band_g: float = 0.2
    rearm_ms: int = 1000

    def __post_init__(self):
        if self.hr_low >= self.hr_high:
            raise ValueError("hr_low must be < hr_high")
        if self.temp_low >= self.temp_high:
            raise ValueError("temp_low must be < temp_high")

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(slots=True)
class AlertEvent:
    kind: AlertKind
    severity: Severity
    value: float
    t: int  # ms
    patient_id: str = ""
    location: tuple[float, float] = (0.0, 0.0)
    delivered: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "severity": self.severity.value,
            "value": self.value,
            "t": self.t,
            "patient_id": self.patient_id,
            "location": list(self.location),
            "delivered": list(self.delivered),
        }


def detect_heart_attack(hr: float, cfg: DetectorConfig = DetectorConfig()) -> bool:
    """Strict outside-the-band predicate: hr above hr_high or below hr_low."""
    if hr < 0:
        raise ValueError("heart rate must be >= 0")
    return hr > cfg.hr_high or hr < cfg.hr_low


def check_temperature(temp: float, cfg: DetectorConfig = DetectorConfig()) -> TempStatus:
    if not -55.0 <= temp <= 125.0:
        raise ValueError(f"temperature {temp} outside sensor span")
    if temp > cfg.temp_high:
        return TempStatus.TEMP_HIGH
    if temp < cfg.temp_low:
        return TempStatus.TEMP_LOW
    return TempStatus.NORMAL


def check_spo2(spo2: float, cfg: DetectorConfig = DetectorConfig()) -> SpO2Status:
    if not 0.0 <= spo2 <= 100.0:
        raise ValueError(f"SpO2 {spo2} outside [0, 100]")
    return SpO2Status.SPO2_LOW if spo2 < cfg.spo2_low else SpO2Status.NORMAL


@dataclass(frozen=True, slots=True)
class StatusReport:
    severity: Severity
    events: tuple[AlertEvent, ...] = ()


def classify(events: Sequence[AlertEvent]) -> StatusReport:
    """Two-color status: any threshold event is Red, quiet intervals Green."""
    if events:
        return StatusReport(Severity.RED, tuple(events))
    return StatusReport(Severity.GREEN)


# --- fall detection ---


class FallDetector:
    """Two-phase fall signature with one event per episode.

    Phase 1: |a| below the free-fall threshold for a sustained run.
    Phase 2: an impact spike within the arming window after the run ends.
    After firing, the detector re-arms only once |a| has stayed inside
    1 g +- rearm_band_g for rearm_ms.
    """

    def __init__(self, cfg: DetectorConfig = DetectorConfig()):
        self.cfg = cfg
        self._freefall_start: Optional[int] = None
        self._freefall_ok = False
        self._impact_deadline: Optional[int] = None
        self._rearm_start: Optional[int] = None
        self._suppressed = False

    def update(self, sample: AccelSample) -> bool:
        """Feed one sample; True exactly on the tick an episode fires."""
        cfg = self.cfg
        mag = sample.magnitude()
        t = sample.t

        if self._suppressed:
            if abs(mag - 1.0) <= cfg.rearm_band_g:
                if self._rearm_start is None:
                    self._rearm_start = t
                elif t - self._rearm_start >= cfg.rearm_ms:
                    self._suppressed = False
                    self._rearm_start = None
            else:
                self._rearm_start = None
            return False

        if mag < cfg.fall_freefall_g:
            if self._freefall_start is None:
                self._freefall_start = t
            if t - self._freefall_start >= cfg.fall_freefall_ms:
                self._freefall_ok = True
            return False

        # First sample at/above the free-fall threshold closes the run.
        if self._freefall_ok and self._impact_deadline is None:
            self._impact_deadline = t + cfg.fall_impact_window_ms
        self._freefall_start = None
        self._freefall_ok = False

        if self._impact_deadline is not None:
            if t > self._impact_deadline:
                self._impact_deadline = None
            elif mag >= cfg.fall_impact_g:
                self._impact_deadline = None
                self._suppressed = True
                self._rearm_start = None
                return True
        return False


def _check_accel_window(window: Sequence[AccelSample], min_span_ms: int) -> None:
    if len(window) < 2:
        raise InsufficientWindow("window has fewer than 2 samples")
    span = window[-1].t - window[0].t
    if span < min_span_ms:
        raise InsufficientWindow(f"window spans {span} ms, need >= {min_span_ms}")
    mean_dt = span / (len(window) - 1)
    if mean_dt > 21.0:  # >= 50 Hz sampling (20 ms, small slack)
        raise InsufficientWindow(f"sampling period {mean_dt:.1f} ms too coarse for 50 Hz")


def detect_fall(window: Sequence[AccelSample], cfg: DetectorConfig = DetectorConfig()) -> bool:
    """Pure window predicate: does the window contain the fall signature."""
    _check_accel_window(window, 1000)
    det = FallDetector(cfg)
    return any(det.update(s) for s in window)


# --- convulsion detection ---


def _segment_stats(segment: Sequence[AccelSample]) -> tuple[float, float]:
    """(peak-to-peak g, zero-crossing frequency Hz) of the detrended magnitude."""
    mags = [s.magnitude() for s in segment]
    mean = sum(mags) / len(mags)
    p2p = max(mags) - min(mags)
    crossings = 0
    prev_sign = 0
    for m in mags:
        sign = 1 if m > mean else (-1 if m < mean else 0)
        if sign != 0:
            if prev_sign != 0 and sign != prev_sign:
                crossings += 1
            prev_sign = sign
    span_s = (segment[-1].t - segment[0].t) / 1000.0
    freq = crossings / (2.0 * span_s) if span_s > 0 else 0.0
    return p2p, freq


_SEGMENT_MS = 1000


class ConvulsionDetector:
    """Sustained 2-8 Hz oscillation with heart-rate corroboration.

    The magnitude stream is judged in 1 s segments; an episode fires once
    qualifying segments cover conv_sustain_ms and the concurrent heart rate
    exceeds the gate. Same re-arm rule as falls.
    """

    def __init__(self, cfg: DetectorConfig = DetectorConfig()):
        self.cfg = cfg
        self._segment: list[AccelSample] = []
        self._qualifying_ms = 0
        self._quiet_ms = 0
        self._suppressed = False

    def update(self, sample: AccelSample, hr: float) -> bool:
        self._segment.append(sample)
        if self._segment[-1].t - self._segment[0].t < _SEGMENT_MS:
            return False
        segment, self._segment = self._segment, []
        p2p, freq = _segment_stats(segment)
        cfg = self.cfg

        if self._suppressed:
            if p2p <= 2 * cfg.rearm_band_g:
                self._quiet_ms += _SEGMENT_MS
                if self._quiet_ms >= cfg.rearm_ms:
                    self._suppressed = False
                    self._quiet_ms = 0
            else:
                self._quiet_ms = 0
            return False

        qualifies = (
            p2p >= cfg.conv_p2p_g and cfg.conv_freq_lo_hz <= freq <= cfg.conv_freq_hi_hz
        )
        if qualifies:
            self._qualifying_ms += _SEGMENT_MS
            if self._qualifying_ms >= cfg.conv_sustain_ms and hr > cfg.conv_hr_gate:
                self._qualifying_ms = 0
                self._suppressed = True
                self._quiet_ms = 0
                return True
        else:
            self._qualifying_ms = 0
        return False


def detect_convulsion(
    window: Sequence[AccelSample],
    hr: float,
    spo2: float = 100.0,
    cfg: DetectorConfig = DetectorConfig(),
) -> bool:
    """Pure window predicate over >= 6 s of samples.

    `spo2` rides along for parity with the sensor bundle; the corroboration
    gate itself is heart rate.
    """
    _check_accel_window(window, 6000)
    det = ConvulsionDetector(cfg)
    return any(det.update(s, hr) for s in window)
