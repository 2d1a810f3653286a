"""Monitor core, HTTP API, stream and live console tests."""

import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from wheelsim.arbitration import ModeId
from wheelsim.detectors import DetectorConfig, Severity, check_spo2, check_temperature, detect_heart_attack
from wheelsim.detectors import SpO2Status, TempStatus
from wheelsim.harness import SimConfig
from wheelsim.protocol import FeedRecord, FrameEncoder
from wheelsim.server import LiveSession, create_app
from wheelsim.service import (
    AlreadyAcknowledged,
    MonitorCore,
    Outbox,
    UnknownAlert,
    UnknownPatient,
)

KEY = bytes.fromhex("000102030405060708090a0b0c0d0e0f")
DEVICE = 7001


def record(t=1000, hr=72.0, spo2=97.5, temp=36.9, fall=0, convulsion=0):
    return FeedRecord(t=t, hr=hr, spo2=spo2, temp=temp, fall=fall, convulsion=convulsion,
                      mode=ModeId.STOP, pose=(1.25, 0.4, 0.0))


def make_core(tmp_path, webhook=None, data=True):
    return MonitorCore(
        key=KEY,
        data_dir=(tmp_path / "data") if data else None,
        outbox=Outbox(tmp_path / "outbox"),
        webhook=webhook,
    )


def ingest_record(core, rec, enc=None):
    enc = enc or FrameEncoder(KEY, DEVICE)
    core.ingest(enc.encode(rec))
    return enc


# --- ingest and queries ---


def test_valid_frame_accepted_and_queryable(tmp_path):
    core = make_core(tmp_path)
    ingest_record(core, record())
    latest = core.query_latest(str(DEVICE))
    assert latest["status"] == "Green"
    assert latest["vitals"]["hr"]["value"] == 72.0
    assert latest["vitals"]["hr"]["t"] == 1000
    assert core.stats()["accepted"] == 1


def test_tampered_frame_rejected_not_persisted(tmp_path):
    core = make_core(tmp_path)
    enc = FrameEncoder(KEY, DEVICE)
    frame = bytearray(enc.encode(record()))
    frame[20] ^= 0x01
    with pytest.raises(Exception):
        core.ingest(bytes(frame))
    stats = core.stats()
    assert stats["rejected"] == 1
    assert stats["tamper"] == 1
    assert stats["accepted"] == 0
    with pytest.raises(UnknownPatient):
        core.query_latest(str(DEVICE))
    assert not list((tmp_path / "data").glob("patient_*.jsonl"))


def test_replayed_frame_rejected(tmp_path):
    core = make_core(tmp_path)
    enc = FrameEncoder(KEY, DEVICE)
    frame = enc.encode(record())
    core.ingest(frame)
    with pytest.raises(Exception):
        core.ingest(frame)
    assert core.stats()["replay"] == 1
    assert len(core.query_range(str(DEVICE), 0, 10**9)) == 1


def test_hr_150_raises_red_alert_with_outbox(tmp_path):
    core = make_core(tmp_path)
    ingest_record(core, record(hr=150.0))
    alerts = core.list_alerts()
    assert [a["kind"] for a in alerts] == ["HeartAttack"]
    assert alerts[0]["severity"] == "Red"
    assert core.status(str(DEVICE)) is Severity.RED
    outbox_files = list((tmp_path / "outbox").glob("*.eml"))
    assert len(outbox_files) == 1
    body = outbox_files[0].read_text()
    assert "HeartAttack" in body
    assert "Time of emergency" in body
    assert "150.0" in body


def test_green_interval_no_outbox(tmp_path):
    core = make_core(tmp_path)
    ingest_record(core, record())
    assert list((tmp_path / "outbox").glob("*")) == []


def test_query_range_closed_interval(tmp_path):
    core = make_core(tmp_path)
    enc = FrameEncoder(KEY, DEVICE)
    for t in (1000, 2000, 3000, 4000):
        ingest_record(core, record(t=t), enc)
    records = core.query_range(str(DEVICE), 2000, 3000)
    assert [r["t"] for r in records] == [2000, 3000]
    assert core.query_range(str(DEVICE), 5000, 6000) == []
    values = core.query_range(str(DEVICE), 0, 10**9, kind="hr")
    assert [v["t"] for v in values] == [1000, 2000, 3000, 4000]


def test_unknown_patient_raises(tmp_path):
    core = make_core(tmp_path)
    with pytest.raises(UnknownPatient):
        core.query_latest("ghost")
    with pytest.raises(UnknownPatient):
        core.query_range("ghost", 0, 1)


# --- alert episodes and acknowledgment ---


def test_exactly_one_outbox_message_per_episode(tmp_path):
    core = make_core(tmp_path)
    enc = FrameEncoder(KEY, DEVICE)
    for t in (1000, 2000, 3000, 4000, 5000):
        ingest_record(core, record(t=t, hr=155.0), enc)
    assert len(core.list_alerts()) == 1
    assert len(list((tmp_path / "outbox").glob("*.eml"))) == 1


def test_ack_returns_green_and_rearms(tmp_path):
    core = make_core(tmp_path)
    enc = FrameEncoder(KEY, DEVICE)
    ingest_record(core, record(t=1000, hr=155.0), enc)
    assert core.status(str(DEVICE)) is Severity.RED
    alert_id = core.list_alerts()[0]["id"]
    out = core.acknowledge(alert_id)
    assert out["status"] == "Green"
    assert core.status(str(DEVICE)) is Severity.GREEN
    # next crossing starts a fresh episode with a fresh outbox message
    ingest_record(core, record(t=6000, hr=160.0), enc)
    assert len(core.list_alerts()) == 2
    assert len(list((tmp_path / "outbox").glob("*.eml"))) == 2


def test_two_active_alerts_one_ack_still_red(tmp_path):
    core = make_core(tmp_path)
    ingest_record(core, record(t=1000, hr=155.0, fall=1))
    alerts = core.list_alerts(active_only=True)
    assert len(alerts) == 2
    core.acknowledge(alerts[0]["id"])
    assert core.status(str(DEVICE)) is Severity.RED
    core.acknowledge(alerts[1]["id"])
    assert core.status(str(DEVICE)) is Severity.GREEN


def test_double_ack_and_unknown_alert(tmp_path):
    core = make_core(tmp_path)
    ingest_record(core, record(t=1000, fall=1))
    alert_id = core.list_alerts()[0]["id"]
    core.acknowledge(alert_id)
    with pytest.raises(AlreadyAcknowledged):
        core.acknowledge(alert_id)
    with pytest.raises(UnknownAlert):
        core.acknowledge(999)


# --- persistence ---


def test_restart_replays_records_and_alerts(tmp_path):
    core = make_core(tmp_path)
    enc = FrameEncoder(KEY, DEVICE)
    for t in (1000, 2000):
        ingest_record(core, record(t=t, hr=150.0), enc)
    before = core.query_range(str(DEVICE), 0, 10**9)

    reborn = make_core(tmp_path)
    assert reborn.query_range(str(DEVICE), 0, 10**9) == before
    assert [a["kind"] for a in reborn.list_alerts()] == ["HeartAttack"]
    assert reborn.status(str(DEVICE)) is Severity.RED
    # replay protection watermark survives restart
    with pytest.raises(Exception):
        reborn.ingest(FrameEncoder(KEY, DEVICE, start_seq=0).encode(record(t=1000)))
    # acknowledged state also survives
    reborn.acknowledge(reborn.list_alerts()[0]["id"])
    third = make_core(tmp_path)
    assert third.status(str(DEVICE)) is Severity.GREEN


# --- webhook ---


def test_webhook_delivery_recorded(tmp_path):
    seen = []
    core = make_core(tmp_path, webhook=seen.append)
    ingest_record(core, record(hr=150.0))
    assert len(seen) == 1
    assert seen[0]["kind"] == "HeartAttack"
    assert "webhook" in core.list_alerts()[0]["delivered"]


def test_webhook_down_marks_failure_but_outbox_written(tmp_path):
    calls = []

    def broken(payload):
        calls.append(payload)
        raise ConnectionError("down")

    core = make_core(tmp_path, webhook=broken)
    ingest_record(core, record(hr=150.0))
    assert len(calls) == 3  # three attempts with backoff
    alert = core.list_alerts()[0]
    assert "webhook_failed" in alert["delivered"]
    assert "outbox" in alert["delivered"]
    assert len(list((tmp_path / "outbox").glob("*.eml"))) == 1


# --- server-side re-validation equals edge checks ---


def test_revalidation_equivalence_oracle(tmp_path):
    import random

    cfg = DetectorConfig()
    rng = random.Random(42)
    core = make_core(tmp_path)
    enc = FrameEncoder(KEY, DEVICE)
    for i in range(200):
        rec = record(
            t=(i + 1) * 1000,
            hr=rng.uniform(20.0, 180.0),
            spo2=rng.uniform(85.0, 100.0),
            temp=rng.uniform(34.0, 40.0),
        )
        before = {a["id"] for a in core.list_alerts()}
        core.ingest(enc.encode(rec))
        new_kinds = {a["kind"] for a in core.list_alerts() if a["id"] not in before}
        edge_kinds = set()
        if detect_heart_attack(rec.hr, cfg):
            edge_kinds.add("HeartAttack")
        if check_temperature(rec.temp, cfg) is TempStatus.TEMP_HIGH:
            edge_kinds.add("TempHigh")
        elif check_temperature(rec.temp, cfg) is TempStatus.TEMP_LOW:
            edge_kinds.add("TempLow")
        if check_spo2(rec.spo2, cfg) is SpO2Status.SPO2_LOW:
            edge_kinds.add("SpO2Low")
        active = {k for (p, k) in core.active_alerts if p == str(DEVICE)}
        # a new server alert appears iff the edge predicate fires and no
        # episode of that kind is already active
        for kind in new_kinds:
            assert kind in edge_kinds
        for kind in edge_kinds:
            assert kind in active
        for alert in list(core.list_alerts(active_only=True)):
            if alert["kind"] not in edge_kinds:
                core.acknowledge(alert["id"])


# --- HTTP API ---


@pytest.fixture()
def client(tmp_path):
    core = make_core(tmp_path)
    app = create_app(core)
    with TestClient(app) as c:
        c.core = core
        yield c


def test_http_ingest_and_latest(client):
    enc = FrameEncoder(KEY, DEVICE)
    response = client.post("/ingest", content=enc.encode(record()))
    assert response.status_code == 202
    assert response.json()["patient"] == str(DEVICE)
    latest = client.get(f"/patients/{DEVICE}/latest")
    assert latest.status_code == 200
    assert latest.json()["vitals"]["temp"]["value"] == 36.9
    missing = client.get("/patients/ghost/latest")
    assert missing.status_code == 404


def test_http_ingest_rejects_garbage(client):
    response = client.post("/ingest", content=b"\xa5\x5ahello")
    assert response.status_code == 400
    assert client.get("/stats").json()["rejected"] == 1


def test_http_range_and_alerts_flow(client):
    enc = FrameEncoder(KEY, DEVICE)
    client.post("/ingest", content=enc.encode(record(t=1000)))
    client.post("/ingest", content=enc.encode(record(t=2000, hr=150.0)))
    rng = client.get(f"/patients/{DEVICE}/range", params={"from": 0, "to": 10**9, "kind": "hr"})
    assert [v["value"] for v in rng.json()] == [72.0, 150.0]
    alerts = client.get("/alerts", params={"active": "true"}).json()
    assert len(alerts) == 1
    ack = client.post(f"/alerts/{alerts[0]['id']}/ack")
    assert ack.status_code == 200
    assert ack.json()["status"] == "Green"
    again = client.post(f"/alerts/{alerts[0]['id']}/ack")
    assert again.status_code == 409
    assert client.post("/alerts/12345/ack").status_code == 404


@pytest.fixture()
def http_server(tmp_path):
    """Real uvicorn server on an ephemeral port (TestClient cannot hold an
    open SSE stream and serve concurrent requests)."""
    import uvicorn

    core = make_core(tmp_path)
    app = create_app(core)
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}", core
    server.should_exit = True
    thread.join(timeout=5.0)


def test_http_stream_delivers_record_and_alert(http_server):
    import httpx

    base, _core = http_server
    enc = FrameEncoder(KEY, DEVICE)
    events = []
    done = threading.Event()

    def consume():
        with httpx.stream("GET", f"{base}/stream", timeout=10.0) as response:
            for line in response.iter_lines():
                if line.startswith("data: "):
                    event = json.loads(line[6:])
                    if "type" not in event:
                        continue  # hello handshake
                    events.append(event)
                    if event["type"] == "alert":
                        done.set()
                        return

    thread = threading.Thread(target=consume, daemon=True)
    thread.start()
    time.sleep(0.3)
    httpx.post(f"{base}/ingest", content=enc.encode(record(t=1000, hr=150.0)), timeout=5.0)
    assert done.wait(timeout=5.0), f"stream events: {events}"
    types = [e["type"] for e in events]
    assert "record" in types
    assert "alert" in types
    alert_event = next(e for e in events if e["type"] == "alert")
    assert alert_event["alert"]["kind"] == "HeartAttack"
    thread.join(timeout=5.0)


# --- live drive console ---


@pytest.fixture()
def live_client(tmp_path):
    core = make_core(tmp_path)
    config = SimConfig(telemetry_cadence_ms=200)
    live = LiveSession(config, core, publish_every=2)
    app = create_app(core, live)
    with TestClient(app) as c:
        c.core = core
        c.live = live
        yield c


def test_drive_console_moves_chair(live_client):
    time.sleep(0.3)
    before = live_client.get("/chair").json()
    response = live_client.post("/drive", json={"joystick": {"x_counts": 2048, "y_counts": 3548}, "hold_ms": 800})
    assert response.status_code == 200
    time.sleep(0.8)
    after = live_client.get("/chair").json()
    assert after["pose"][0] > before["pose"][0] + 0.05
    assert after["mode"] in ("Joystick", "Stop")


def test_mode_selection_endpoint(live_client):
    response = live_client.post("/mode", json={"mode": "Voice"})
    assert response.status_code == 200
    assert response.json()["policy"] == "Voice"
    response = live_client.post("/mode", json={"mode": "auto"})
    assert response.json()["policy"] == "auto"
    assert live_client.post("/mode", json={"mode": "Warp"}).status_code == 422


def test_latched_drive_refused_then_clear(live_client):
    live_client.live.session.obstacle = True
    time.sleep(0.1)
    assert live_client.get("/chair").json()["latched"] is True
    refused = live_client.post("/drive", json={"voice": "forward"})
    assert refused.status_code == 409
    # clear refused while the obstacle persists
    assert live_client.post("/safehalt/clear").status_code == 409
    live_client.live.session.obstacle = False
    time.sleep(0.1)
    cleared = live_client.post("/safehalt/clear")
    assert cleared.status_code == 200
    assert cleared.json()["latched"] is False
    accepted = live_client.post("/drive", json={"voice": "forward"})
    assert accepted.status_code == 200


def test_drive_without_live_session_is_503(client):
    assert client.post("/drive", json={"voice": "stop"}).status_code == 503
    assert client.post("/safehalt/clear").status_code == 503
