"""Authenticated-encryption telemetry frames and the edge uploader.

Wire layout (byte-exact):

    offset  size  field
    0       2     magic 0xA5 0x5A
    2       1     version (1)
    3       8     device_id, little-endian
    11      4     seq, little-endian unsigned, strictly increasing
    15      2     payload_len, little-endian
    17      n     ciphertext (AES-128-CCM over the canonical JSON payload)
    17+n    8     authentication tag

The 17-byte header is authenticated as associated data; the CCM nonce is
device_id || seq (12 bytes), so nonce uniqueness follows from sequence
monotonicity. Payloads are canonical JSON: sorted keys, no whitespace.
"""

from __future__ import annotations

import json
import statistics
import struct
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESCCM

from .arbitration import ModeId, mode_from_name

MAGIC = b"\xa5\x5a"
VERSION = 1
HEADER_LEN = 17
TAG_LEN = 8
NONCE_LEN = 12
KEY_LEN = 16
MAX_SEQ = 0xFFFFFFFF


class FrameError(Exception):
    pass


class BadMagic(FrameError):
    pass


class AuthFailure(FrameError):
    pass


class Replay(FrameError):
    pass


class MalformedPayload(FrameError):
    pass


class SeqReuse(FrameError):
    pass


class TransportDown(Exception):
    pass


@dataclass(frozen=True, slots=True)
class FeedRecord:
    """One telemetry cadence worth of vitals, flags, and chair state."""

    t: int  # ms
    hr: float
    spo2: float
    temp: float
    fall: int  # strictly 0/1 per the server feed convention
    convulsion: int
    mode: ModeId
    pose: tuple[float, float, float]  # x m, y m, heading rad

    def __post_init__(self):
        if self.fall not in (0, 1) or self.convulsion not in (0, 1):
            raise ValueError("fall/convulsion must be 0 or 1")

    def to_payload(self) -> bytes:
        d = {
            "t": self.t,
            "hr": self.hr,
            "spo2": self.spo2,
            "temp": self.temp,
            "fall": self.fall,
            "convulsion": self.convulsion,
            "mode": self.mode.value,
            "pose": list(self.pose),
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_payload(cls, payload: bytes) -> "FeedRecord":
        try:
            d = json.loads(payload.decode("utf-8"))
            pose = d["pose"]
            return cls(
                t=int(d["t"]),
                hr=float(d["hr"]),
                spo2=float(d["spo2"]),
                temp=float(d["temp"]),
                fall=int(d["fall"]),
                convulsion=int(d["convulsion"]),
                mode=mode_from_name(d["mode"]),
                pose=(float(pose[0]), float(pose[1]), float(pose[2])),
            )
        except (ValueError, KeyError, IndexError, UnicodeDecodeError) as exc:
            raise MalformedPayload(str(exc)) from exc

    def to_dict(self) -> dict:
        return json.loads(self.to_payload().decode("utf-8"))


def _check_key(key: bytes) -> bytes:
    if len(key) != KEY_LEN:
        raise ValueError(f"key must be {KEY_LEN} bytes, got {len(key)}")
    return key


def load_key(path) -> bytes:
    """Key file: 32 hex characters."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    key = bytes.fromhex(text)
    return _check_key(key)


def _header(device_id: int, seq: int, payload_len: int) -> bytes:
    return MAGIC + struct.pack("<BQIH", VERSION, device_id, seq, payload_len)


def _nonce(device_id: int, seq: int) -> bytes:
    return struct.pack("<QI", device_id, seq)


def encode_frame(record: FeedRecord, key: bytes, device_id: int, seq: int) -> bytes:
    """Encrypt one record into a wire frame (header authenticated as AAD)."""
    _check_key(key)
    if not 0 <= seq <= MAX_SEQ:
        raise ValueError(f"seq {seq} outside 32-bit range")
    payload = record.to_payload()
    header = _header(device_id, seq, len(payload))
    ct_and_tag = AESCCM(key, tag_length=TAG_LEN).encrypt(_nonce(device_id, seq), payload, header)
    return header + ct_and_tag


def decode_frame(data: bytes, key: bytes, last_seq: int = -1) -> tuple[FeedRecord, int, int]:
    """Verify, decrypt and replay-check a frame.

    Returns (record, device_id, seq). Authentication runs before the replay
    check so corrupted sequence bytes surface as AuthFailure, never Replay.
    """
    _check_key(key)
    if len(data) < 2 or data[:2] != MAGIC:
        raise BadMagic("bad frame magic")
    if len(data) < HEADER_LEN + TAG_LEN:
        raise AuthFailure("frame truncated")
    version, device_id, seq, payload_len = struct.unpack("<BQIH", data[2:HEADER_LEN])
    if version != VERSION:
        raise BadMagic(f"unsupported frame version {version}")
    if len(data) != HEADER_LEN + payload_len + TAG_LEN:
        raise AuthFailure("frame length does not match header")
    header = data[:HEADER_LEN]
    ct_and_tag = data[HEADER_LEN:]
    try:
        payload = AESCCM(key, tag_length=TAG_LEN).decrypt(_nonce(device_id, seq), ct_and_tag, header)
    except InvalidTag as exc:
        raise AuthFailure("authentication failed") from exc
    if seq <= last_seq:
        raise Replay(f"seq {seq} <= last accepted {last_seq}")
    return FeedRecord.from_payload(payload), device_id, seq


class FrameEncoder:
    """Per-device encoder that enforces strictly increasing sequence numbers."""

    def __init__(self, key: bytes, device_id: int, start_seq: int = 0):
        self.key = _check_key(key)
        self.device_id = device_id
        self._next_seq = start_seq

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def encode(self, record: FeedRecord, seq: Optional[int] = None) -> bytes:
        if seq is None:
            seq = self._next_seq
        elif seq < self._next_seq:
            raise SeqReuse(f"seq {seq} already used (next is {self._next_seq})")
        frame = encode_frame(record, self.key, self.device_id, seq)
        self._next_seq = seq + 1
        return frame


class FrameDecoder:
    """Per-device decoder holding the replay watermark."""

    def __init__(self, key: bytes):
        self.key = _check_key(key)
        self.last_seq: dict[int, int] = {}

    def decode(self, data: bytes) -> tuple[FeedRecord, int, int]:
        # Device id is read from the (authenticated) header after decrypt.
        if len(data) >= HEADER_LEN:
            _, device_id, _, _ = struct.unpack("<BQIH", data[2:HEADER_LEN])
        else:
            device_id = -1
        record, device_id, seq = decode_frame(data, self.key, self.last_seq.get(device_id, -1))
        self.last_seq[device_id] = seq
        return record, device_id, seq


# --- uploader ---


@dataclass(slots=True)
class UploaderStats:
    produced: int = 0
    sent: int = 0
    dropped: int = 0
    send_failures: int = 0


def http_transport(base_url: str, timeout_s: float = 2.0) -> Callable[[bytes], None]:
    """Frame sender posting to a monitor service /ingest endpoint."""
    import httpx

    def send(frame: bytes) -> None:
        try:
            response = httpx.post(f"{base_url.rstrip('/')}/ingest", content=frame, timeout=timeout_s)
        except httpx.HTTPError as exc:
            raise TransportDown(str(exc)) from exc
        if response.status_code >= 500:
            raise TransportDown(f"server error {response.status_code}")
        # 4xx means the server rejected this frame (tamper/replay); dropping
        # it is correct, re-sending would never succeed.

    return send


class Uploader:
    """Bounded store-and-forward queue between the control loop and transport.

    The producer side never blocks: beyond `capacity` pending records the
    oldest is dropped and counted. The queue drains fully at each cadence
    boundary (live cadence 1 s; the 40 s preset coalesces a batch per
    window). Sending can run inline (step, simulated time) or on its own
    thread (start/stop, wall time) so a slow transport never stalls the
    20 ms control loop.
    """

    LIVE_CADENCE_S = 1.0
    BATCH_CADENCE_S = 40.0

    def __init__(
        self,
        encoder: FrameEncoder,
        transport: Callable[[bytes], None],
        cadence_s: float = LIVE_CADENCE_S,
        capacity: int = 256,
    ):
        self.encoder = encoder
        self.transport = transport
        self.cadence_ms = int(cadence_s * 1000)
        self.capacity = capacity
        self.stats = UploaderStats()
        self._queue: deque[FeedRecord] = deque()
        self._next_send_ms: Optional[int] = None
        self._stop_event: Optional[object] = None
        self._thread: Optional[object] = None

    @property
    def pending(self) -> int:
        return len(self._queue)

    def offer(self, record: FeedRecord) -> None:
        """Enqueue without blocking; drop-oldest on overflow."""
        self.stats.produced += 1
        if len(self._queue) >= self.capacity:
            self._queue.popleft()
            self.stats.dropped += 1
        self._queue.append(record)

    def step(self, now_ms: int) -> int:
        """Drain the queue if a cadence boundary has passed; returns frames sent."""
        if self._next_send_ms is None:
            self._next_send_ms = now_ms + self.cadence_ms
            return 0
        if now_ms < self._next_send_ms:
            return 0
        while self._next_send_ms <= now_ms:
            self._next_send_ms += self.cadence_ms
        return self._drain()

    def _drain(self) -> int:
        sent = 0
        while self._queue:
            frame = self.encoder.encode(self._queue[0])
            try:
                self.transport(frame)
            except TransportDown:
                self.stats.send_failures += 1
                break
            self._queue.popleft()
            self.stats.sent += 1
            sent += 1
        return sent

    def start(self) -> None:
        """Drain on a wall-clock sender thread; offer() stays non-blocking."""
        import threading

        if self._thread is not None:
            return
        stop = threading.Event()

        def run() -> None:
            while not stop.wait(self.cadence_ms / 1000.0):
                self._drain()

        thread = threading.Thread(target=run, name="wheelsim-uploader", daemon=True)
        self._stop_event = stop
        self._thread = thread
        thread.start()

    def stop(self) -> None:
        if self._thread is None:
            return
        self._stop_event.set()  # type: ignore[union-attr]
        self._thread.join(timeout=2.0)  # type: ignore[union-attr]
        self._thread = None
        self._stop_event = None


# --- overhead instrumentation ---


def time_encryption_us(key: bytes, record: FeedRecord, device_id: int = 1, reps: int = 2000) -> float:
    """Mean per-frame encode (encrypt + frame) cost in microseconds."""
    start = time.perf_counter()
    for seq in range(reps):
        encode_frame(record, key, device_id, seq)
    return (time.perf_counter() - start) / reps * 1e6


def loop_period_stats(periods_ms: Iterable[float]) -> dict:
    periods = list(periods_ms)
    return {
        "mean_ms": statistics.fmean(periods) if periods else 0.0,
        "stddev_ms": statistics.pstdev(periods) if len(periods) > 1 else 0.0,
        "n": len(periods),
    }


def measure_overheads(
    key: bytes,
    record: FeedRecord,
    rtt_probe: Optional[Callable[[bytes], None]] = None,
    loop_periods_ms: Optional[Iterable[float]] = None,
    reps: int = 2000,
) -> dict:
    """Per-frame encryption cost, ingest round-trip, and loop period stats.

    The cipher overhead is reported in microseconds and is orders of
    magnitude below a network round-trip; the two must not be conflated
    when budgeting the link.
    """
    out = {"encrypt_us": time_encryption_us(key, record, reps=reps)}
    if rtt_probe is not None:
        frame = FrameEncoder(key, device_id=0xEC0).encode(record)
        start = time.perf_counter()
        rtt_probe(frame)
        out["rtt_ms"] = (time.perf_counter() - start) * 1e3
    if loop_periods_ms is not None:
        out["loop_ms"] = loop_period_stats(loop_periods_ms)
    return out
