"""HTTP front end for the monitor core plus the live drive session.

Endpoints: POST /ingest (raw frame bytes), GET /patients/{id}/latest,
GET /patients/{id}/range?from&to&kind, GET /alerts?active, POST
/alerts/{id}/ack, GET /stream (server-sent events), POST /drive and POST
/mode (console forwarding into the embedded simulation), POST
/safehalt/clear, GET /chair, GET /stats.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles

from .arbitration import HazardStillActive
from .detectors import DetectorConfig
from .harness import SimConfig, SimSession
from .protocol import FrameError
from .service import (
    AlreadyAcknowledged,
    MonitorCore,
    Outbox,
    UnknownAlert,
    UnknownPatient,
    http_webhook,
)

STREAM_QUEUE_LIMIT = 256


def wall_timestamp(_t_ms: int) -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


class DriveRejected(Exception):
    pass


class LiveSession:
    """Real-time (20 ms wall tick) simulation driven from the dashboard."""

    def __init__(self, config: SimConfig, core: MonitorCore, publish_every: int = 5):
        self.core = core
        self.session = SimSession(config, monitor=core)
        self.publish_every = publish_every
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._ticks = 0
        self.last_tick: Optional[dict] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="wheelsim-live", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=2.0)

    def _run(self) -> None:
        deadline = time.monotonic()
        while not self._stop.is_set():
            with self._lock:
                rec = self.session.tick()
                self._ticks += 1
                snapshot = {
                    "type": "chair",
                    "t_ms": rec.t_ms,
                    "mode": rec.mode.value,
                    "direction": rec.direction.value,
                    "speed": rec.speed,
                    "pose": [round(rec.pose.x, 4), round(rec.pose.y, 4), round(rec.pose.heading, 4)],
                    "latched": rec.latched,
                }
                self.last_tick = snapshot
            if self._ticks % self.publish_every == 0:
                self.core._publish(snapshot)
            deadline += 0.02
            delay = deadline - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            else:
                deadline = time.monotonic()

    @property
    def latched(self) -> bool:
        with self._lock:
            return self.session.latched

    def drive(self, intent: dict) -> dict:
        with self._lock:
            if self.session.latched:
                raise DriveRejected("safe halt active: drive input refused")
            hold = int(intent.get("hold_ms", 300))
            if "joystick" in intent:
                j = intent["joystick"]
                self.session.set_joystick(
                    j.get("x_counts", 2048), j.get("y_counts", 2048), j.get("pressed", False), hold
                )
            elif "voice" in intent:
                self.session.say(str(intent["voice"]), hold)
            elif "gesture" in intent:
                g = intent["gesture"]
                self.session.tilt(g.get("ax", 0.0), g.get("ay", 0.0), g.get("az", 1.0), hold)
            elif "eog_angle" in intent:
                self.session.gaze_angle(float(intent["eog_angle"]), hold)
            elif "eog_blink" in intent:
                self.session.blink_pair()
            else:
                raise DriveRejected("no recognizable drive intent in payload")
            return {"accepted": True}

    def set_mode(self, mode: Optional[str]) -> dict:
        with self._lock:
            self.session.select_mode(mode)
            selected = self.session.arb_state.selected_mode
            return {"policy": selected.value if selected else "auto"}

    def clear_safehalt(self) -> dict:
        with self._lock:
            self.session.request_clear_safehalt()
        time.sleep(0.05)  # the loop thread applies the clear on its next tick
        with self._lock:
            if self.session.latched:
                raise HazardStillActive("hazard still active, latch not cleared")
            return {"latched": False}


@dataclass
class ServerConfig:
    key: bytes
    data_dir: Optional[Path] = None
    outbox_dir: Optional[Path] = None
    webhook_url: Optional[str] = None
    detector: DetectorConfig = DetectorConfig()
    live: bool = True
    sim: SimConfig = SimConfig()


def build_core(cfg: ServerConfig, wall_clock: bool = True) -> MonitorCore:
    outbox = None
    if cfg.outbox_dir is not None:
        outbox = Outbox(cfg.outbox_dir, timestamp=wall_timestamp) if wall_clock else Outbox(cfg.outbox_dir)
    webhook = http_webhook(cfg.webhook_url) if cfg.webhook_url else None
    return MonitorCore(
        key=cfg.key,
        data_dir=cfg.data_dir,
        outbox=outbox,
        detector_config=cfg.detector,
        webhook=webhook,
        sleep=time.sleep,
    )


def create_app(
    core: MonitorCore,
    live: Optional[LiveSession] = None,
    static_dir: Optional[Path] = None,
) -> FastAPI:
    subscribers: list[asyncio.Queue] = []
    loop_holder: dict = {}

    def fanout(event: dict) -> None:
        loop = loop_holder.get("loop")
        if loop is None:
            return
        for q in list(subscribers):
            def push(q=q, event=event):
                if q.qsize() >= STREAM_QUEUE_LIMIT:
                    # Slow consumer: drop it rather than stall ingest.
                    try:
                        subscribers.remove(q)
                    except ValueError:
                        pass
                    return
                q.put_nowait(event)
            loop.call_soon_threadsafe(push)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        loop_holder["loop"] = asyncio.get_running_loop()
        core.add_listener(fanout)
        if live is not None:
            live.start()
        try:
            yield
        finally:
            core.remove_listener(fanout)
            if live is not None:
                live.stop()

    app = FastAPI(title="wheelsim monitor", version="0.1.0", lifespan=lifespan)
    app.state.core = core
    app.state.live = live

    @app.post("/ingest")
    async def ingest(request: Request):
        frame = await request.body()
        try:
            patient, seq, record = core.ingest(frame)
        except FrameError as exc:
            raise HTTPException(status_code=400, detail=type(exc).__name__)
        return Response(
            content=json.dumps({"patient": patient, "seq": seq, "t": record.t}),
            status_code=202,
            media_type="application/json",
        )

    @app.get("/patients/{patient_id}/latest")
    async def latest(patient_id: str):
        try:
            return core.query_latest(patient_id)
        except UnknownPatient:
            raise HTTPException(status_code=404, detail="UnknownPatient")

    @app.get("/patients/{patient_id}/range")
    async def query_range(patient_id: str, request: Request):
        params = request.query_params
        try:
            t0 = int(params.get("from", 0))
            t1 = int(params.get("to", 2**62))
        except ValueError:
            raise HTTPException(status_code=422, detail="from/to must be integers (ms)")
        kind = params.get("kind")
        if kind is not None and kind not in ("hr", "spo2", "temp", "fall", "convulsion"):
            raise HTTPException(status_code=422, detail=f"unknown kind {kind!r}")
        if t0 > t1:
            raise HTTPException(status_code=422, detail="from must be <= to")
        try:
            return core.query_range(patient_id, t0, t1, kind)
        except UnknownPatient:
            raise HTTPException(status_code=404, detail="UnknownPatient")

    @app.get("/alerts")
    async def alerts(active: bool = False):
        return core.list_alerts(active_only=active)

    @app.post("/alerts/{alert_id}/ack")
    async def ack(alert_id: int):
        try:
            return core.acknowledge(alert_id)
        except UnknownAlert:
            raise HTTPException(status_code=404, detail="UnknownAlert")
        except AlreadyAcknowledged:
            raise HTTPException(status_code=409, detail="AlreadyAcknowledged")

    @app.get("/stats")
    async def stats():
        return core.stats()

    @app.get("/stream")
    async def stream():
        q: asyncio.Queue = asyncio.Queue()
        subscribers.append(q)

        async def gen():
            try:
                yield "event: hello\ndata: {}\n\n"
                while True:
                    try:
                        event = await asyncio.wait_for(q.get(), timeout=15.0)
                        yield f"data: {json.dumps(event, sort_keys=True)}\n\n"
                    except asyncio.TimeoutError:
                        yield ": keepalive\n\n"
            finally:
                if q in subscribers:
                    subscribers.remove(q)

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/chair")
    async def chair():
        if live is None:
            raise HTTPException(status_code=503, detail="no live session")
        return live.last_tick or {"type": "chair", "latched": live.latched}

    @app.post("/drive")
    async def drive(request: Request):
        if live is None:
            raise HTTPException(status_code=503, detail="no live session")
        try:
            return live.drive(await request.json())
        except DriveRejected as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    @app.post("/mode")
    async def mode(request: Request):
        if live is None:
            raise HTTPException(status_code=503, detail="no live session")
        payload = await request.json()
        try:
            return live.set_mode(payload.get("mode"))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/safehalt/clear")
    async def clear(request: Request):
        if live is None:
            raise HTTPException(status_code=503, detail="no live session")
        try:
            return live.clear_safehalt()
        except HazardStillActive as exc:
            raise HTTPException(status_code=409, detail=str(exc))

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="dashboard")

    return app


def serve(cfg: ServerConfig, host: str = "127.0.0.1", port: int = 8077,
          static_dir: Optional[Path] = None) -> None:
    import uvicorn

    core = build_core(cfg)
    live = LiveSession(cfg.sim, core) if cfg.live else None
    app = create_app(core, live, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
