"""Monitor-service core: authenticated ingest, append-only storage, alerting.

Frames are decoded and replay-checked, accepted records append to a
per-patient JSON-Lines log (replayed on restart), thresholds are re-checked
server-side with the same detector config the edge uses, and every Red
alert episode dispatches exactly one outbox email plus an optional webhook.
An alert episode stays active until acknowledged; repeated crossings of an
already-active kind do not re-alert.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Optional

from .detectors import (
    AlertEvent,
    AlertKind,
    DetectorConfig,
    Severity,
    SpO2Status,
    TempStatus,
    check_spo2,
    check_temperature,
    classify,
    detect_heart_attack,
)
from .protocol import FeedRecord, FrameDecoder, FrameError

SIM_EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc)


class UnknownPatient(KeyError):
    pass


class UnknownAlert(KeyError):
    pass


class AlreadyAcknowledged(ValueError):
    pass


def sim_timestamp(t_ms: int) -> str:
    return (SIM_EPOCH + timedelta(milliseconds=t_ms)).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


@dataclass(slots=True)
class StoredAlert:
    id: int
    event: AlertEvent
    acknowledged: bool = False

    def to_dict(self) -> dict:
        d = self.event.to_dict()
        d["id"] = self.id
        d["acknowledged"] = self.acknowledged
        return d


@dataclass(slots=True)
class PatientChannel:
    """Append-only record log plus the per-kind latest index."""

    records: list[tuple[int, FeedRecord]] = field(default_factory=list)  # (seq, record)
    latest: dict[str, tuple[float, int]] = field(default_factory=dict)  # kind -> (value, t)

    def append(self, seq: int, record: FeedRecord) -> None:
        self.records.append((seq, record))
        for kind in ("hr", "spo2", "temp"):
            self.latest[kind] = (getattr(record, kind), record.t)
        self.latest["fall"] = (float(record.fall), record.t)
        self.latest["convulsion"] = (float(record.convulsion), record.t)


class Outbox:
    """File-per-message email stand-in (RFC-822-style plain text)."""

    def __init__(self, directory, to_addr: str = "caregiver@example.org",
                 timestamp: Callable[[int], str] = sim_timestamp):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.to_addr = to_addr
        self.timestamp = timestamp

    def write(self, alert: StoredAlert) -> Path:
        event = alert.event
        when = self.timestamp(event.t)
        name = f"{event.t:012d}_{event.kind.value}_{alert.id}.eml"
        path = self.directory / name
        body = (
            f"From: monitor@wheelsim.local\n"
            f"To: {self.to_addr}\n"
            f"Subject: [{event.severity.value.upper()}] {event.kind.value} alert"
            f" for patient {event.patient_id}\n"
            f"Date: {when}\n"
            f"\n"
            f"Alert: {event.kind.value}\n"
            f"Severity: {event.severity.value}\n"
            f"Value: {event.value}\n"
            f"Patient: {event.patient_id}\n"
            f"Location: x={event.location[0]:.2f} m, y={event.location[1]:.2f} m\n"
            f"Time of emergency: {when}\n"
        )
        path.write_text(body, encoding="utf-8")
        return path


def http_webhook(url: str, timeout_s: float = 2.0) -> Callable[[dict], None]:
    import httpx

    def post(payload: dict) -> None:
        httpx.post(url, json=payload, timeout=timeout_s).raise_for_status()

    return post


class MonitorCore:
    """The in-process monitoring service behind the HTTP layer."""

    WEBHOOK_RETRIES = 3
    WEBHOOK_BACKOFF_S = 0.1

    def __init__(
        self,
        key: bytes,
        data_dir=None,
        outbox: Optional[Outbox] = None,
        detector_config: DetectorConfig = DetectorConfig(),
        webhook: Optional[Callable[[dict], None]] = None,
        patient_names: Optional[dict[int, str]] = None,
        sleep: Callable[[float], None] = lambda s: None,
    ):
        self.decoder = FrameDecoder(key)
        self.config = detector_config
        self.data_dir = Path(data_dir) if data_dir else None
        self.outbox = outbox
        self.webhook = webhook
        self.sleep = sleep
        self.patient_names = patient_names or {}
        self.patients: dict[str, PatientChannel] = {}
        self.alerts: dict[int, StoredAlert] = {}
        self.active_alerts: dict[tuple[str, str], int] = {}  # (patient, kind) -> alert id
        self.counters = {"accepted": 0, "rejected": 0, "tamper": 0, "replay": 0, "alerts": 0}
        self.reject_reasons: dict[str, int] = {}
        self._next_alert_id = 1
        self._listeners: list[Callable[[dict], None]] = []
        self._lock = threading.RLock()
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._replay_logs()

    # --- persistence ---

    def _patient_log(self, patient: str) -> Path:
        return self.data_dir / f"patient_{patient}.jsonl"

    def _alert_log(self) -> Path:
        return self.data_dir / "alerts.jsonl"

    def _replay_logs(self) -> None:
        for log in sorted(self.data_dir.glob("patient_*.jsonl")):
            patient = log.stem[len("patient_"):]
            channel = self.patients.setdefault(patient, PatientChannel())
            with open(log, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    record = FeedRecord.from_payload(
                        json.dumps(entry["record"], sort_keys=True, separators=(",", ":")).encode()
                    )
                    channel.append(entry["seq"], record)
                    self.decoder.last_seq[entry["device_id"]] = max(
                        self.decoder.last_seq.get(entry["device_id"], -1), entry["seq"]
                    )
        alert_log = self._alert_log()
        if alert_log.exists():
            with open(alert_log, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    if entry["op"] == "alert":
                        alert = StoredAlert(
                            id=entry["id"],
                            event=AlertEvent(
                                kind=AlertKind(entry["kind"]),
                                severity=Severity(entry["severity"]),
                                value=entry["value"],
                                t=entry["t"],
                                patient_id=entry["patient_id"],
                                location=tuple(entry["location"]),
                                delivered=list(entry.get("delivered", [])),
                            ),
                        )
                        self.alerts[alert.id] = alert
                        self.active_alerts[(alert.event.patient_id, alert.event.kind.value)] = alert.id
                        self._next_alert_id = max(self._next_alert_id, alert.id + 1)
                    elif entry["op"] == "ack":
                        alert = self.alerts.get(entry["id"])
                        if alert:
                            alert.acknowledged = True
                            self.active_alerts.pop(
                                (alert.event.patient_id, alert.event.kind.value), None
                            )

    def _append_record_log(self, patient: str, device_id: int, seq: int, record: FeedRecord) -> None:
        if not self.data_dir:
            return
        entry = {"device_id": device_id, "seq": seq, "record": record.to_dict()}
        with open(self._patient_log(patient), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True, separators=(",", ":")) + "\n")

    def _append_alert_log(self, payload: dict) -> None:
        if not self.data_dir:
            return
        with open(self._alert_log(), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")

    # --- streaming ---

    def add_listener(self, callback: Callable[[dict], None]) -> None:
        with self._lock:
            self._listeners.append(callback)

    def remove_listener(self, callback: Callable[[dict], None]) -> None:
        with self._lock:
            if callback in self._listeners:
                self._listeners.remove(callback)

    def _publish(self, event: dict) -> None:
        for callback in list(self._listeners):
            try:
                callback(event)
            except Exception:
                # Slow or broken consumers are dropped, never back-pressure ingest.
                self.remove_listener(callback)

    # --- ingest ---

    def patient_for_device(self, device_id: int) -> str:
        return self.patient_names.get(device_id, str(device_id))

    def ingest(self, frame: bytes) -> tuple[str, int, FeedRecord]:
        """Decode, persist, re-validate and stream one frame."""
        with self._lock:
            try:
                record, device_id, seq = self.decoder.decode(frame)
            except FrameError as exc:
                reason = type(exc).__name__
                self.counters["rejected"] += 1
                self.reject_reasons[reason] = self.reject_reasons.get(reason, 0) + 1
                if reason == "AuthFailure" or reason == "BadMagic":
                    self.counters["tamper"] += 1
                elif reason == "Replay":
                    self.counters["replay"] += 1
                raise
            patient = self.patient_for_device(device_id)
            channel = self.patients.setdefault(patient, PatientChannel())
            channel.append(seq, record)
            self._append_record_log(patient, device_id, seq, record)
            self.counters["accepted"] += 1
            self._publish({"type": "record", "patient": patient, "record": record.to_dict()})
            self._revalidate(patient, record)
            self._publish(
                {"type": "status", "patient": patient, "color": self.status(patient).value}
            )
            return patient, seq, record

    def _revalidate(self, patient: str, record: FeedRecord) -> None:
        """Server-side threshold checks mirroring the edge detectors."""
        cfg = self.config
        crossings: list[tuple[AlertKind, float]] = []
        if detect_heart_attack(record.hr, cfg):
            crossings.append((AlertKind.HEART_ATTACK, record.hr))
        temp_status = check_temperature(record.temp, cfg)
        if temp_status is TempStatus.TEMP_HIGH:
            crossings.append((AlertKind.TEMP_HIGH, record.temp))
        elif temp_status is TempStatus.TEMP_LOW:
            crossings.append((AlertKind.TEMP_LOW, record.temp))
        if check_spo2(record.spo2, cfg) is SpO2Status.SPO2_LOW:
            crossings.append((AlertKind.SPO2_LOW, record.spo2))
        if record.fall == 1:
            crossings.append((AlertKind.FALL, 1.0))
        if record.convulsion == 1:
            crossings.append((AlertKind.CONVULSION, 1.0))
        for kind, value in crossings:
            self._raise_alert(patient, kind, value, record)

    def _raise_alert(self, patient: str, kind: AlertKind, value: float, record: FeedRecord) -> None:
        if (patient, kind.value) in self.active_alerts:
            return  # episode already active and unacknowledged
        event = AlertEvent(
            kind=kind,
            severity=Severity.RED,
            value=value,
            t=record.t,
            patient_id=patient,
            location=(record.pose[0], record.pose[1]),
        )
        alert = StoredAlert(id=self._next_alert_id, event=event)
        self._next_alert_id += 1
        self.alerts[alert.id] = alert
        self.active_alerts[(patient, kind.value)] = alert.id
        self.counters["alerts"] += 1
        self.dispatch_alert(alert)
        self._append_alert_log({"op": "alert", **alert.to_dict()})
        self._publish({"type": "alert", "alert": alert.to_dict()})

    # --- alert dispatch ---

    def dispatch_alert(self, alert: StoredAlert) -> None:
        """Outbox email plus webhook; Green events never dispatch."""
        if alert.event.severity is not Severity.RED:
            return
        if self.outbox is not None:
            self.outbox.write(alert)
            alert.event.delivered.append("outbox")
        if self.webhook is not None:
            delay = self.WEBHOOK_BACKOFF_S
            for attempt in range(self.WEBHOOK_RETRIES):
                try:
                    self.webhook(alert.to_dict())
                    alert.event.delivered.append("webhook")
                    break
                except Exception:
                    if attempt + 1 < self.WEBHOOK_RETRIES:
                        self.sleep(delay)
                        delay *= 2
            else:
                alert.event.delivered.append("webhook_failed")

    # --- queries ---

    def _channel(self, patient: str) -> PatientChannel:
        try:
            return self.patients[patient]
        except KeyError:
            raise UnknownPatient(patient) from None

    def status(self, patient: str) -> Severity:
        events = [
            self.alerts[aid].event
            for (p, _), aid in self.active_alerts.items()
            if p == patient
        ]
        return classify(events).severity

    def query_latest(self, patient: str) -> dict:
        with self._lock:
            channel = self._channel(patient)
            latest = {k: {"value": v, "t": t} for k, (v, t) in sorted(channel.latest.items())}
            out = {"patient": patient, "status": self.status(patient).value, "vitals": latest}
            if channel.records:
                record = channel.records[-1][1]
                out["mode"] = record.mode.value
                out["pose"] = list(record.pose)
                out["t"] = record.t
            return out

    def query_range(self, patient: str, t0: int, t1: int, kind: Optional[str] = None) -> list[dict]:
        if t0 > t1:
            raise ValueError("t0 must be <= t1")
        with self._lock:
            channel = self._channel(patient)
            selected = [r for _, r in channel.records if t0 <= r.t <= t1]
            if kind is None:
                return [r.to_dict() for r in selected]
            return [{"t": r.t, "value": getattr(r, kind)} for r in selected]

    def list_alerts(self, active_only: bool = False) -> list[dict]:
        with self._lock:
            alerts = sorted(self.alerts.values(), key=lambda a: (a.event.t, a.id))
            if active_only:
                alerts = [a for a in alerts if not a.acknowledged]
            return [a.to_dict() for a in alerts]

    def acknowledge(self, alert_id: int) -> dict:
        with self._lock:
            alert = self.alerts.get(alert_id)
            if alert is None:
                raise UnknownAlert(alert_id)
            if alert.acknowledged:
                raise AlreadyAcknowledged(alert_id)
            alert.acknowledged = True
            self.active_alerts.pop((alert.event.patient_id, alert.event.kind.value), None)
            self._append_alert_log({"op": "ack", "id": alert_id})
            status = self.status(alert.event.patient_id)
            self._publish({"type": "ack", "id": alert_id, "patient": alert.event.patient_id})
            self._publish(
                {"type": "status", "patient": alert.event.patient_id, "color": status.value}
            )
            return {"id": alert_id, "acknowledged": True, "status": status.value}

    def stats(self) -> dict:
        with self._lock:
            return {
                **self.counters,
                "reject_reasons": dict(self.reject_reasons),
                "patients": sorted(self.patients),
                "active_alerts": len(self.active_alerts),
            }
