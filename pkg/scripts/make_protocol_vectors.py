#!/usr/bin/env python3
"""Regenerate the committed telemetry known-answer vectors.

Frames are assembled here from the documented byte layout using the
standalone RFC 3610 CCM construction in tests/ccm_reference.py, NOT the
production encoder, so the fixture is an independent answer key. Run from
the repository root; rewrites src/wheelsim/fixtures/protocol_vectors.json.
"""

import json
import struct
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from ccm_reference import ccm_encrypt  # noqa: E402

VECTORS = [
    {
        "key": "000102030405060708090a0b0c0d0e0f",
        "device_id": 7001,
        "seq": 1,
        "record": {
            "t": 1000,
            "hr": 72.0,
            "spo2": 97.5,
            "temp": 36.9,
            "fall": 0,
            "convulsion": 0,
            "mode": "Stop",
            "pose": [0.0, 0.0, 0.0],
        },
    },
    {
        "key": "ffeeddccbbaa99887766554433221100",
        "device_id": 0xDEADBEEF,
        "seq": 4294967294,
        "record": {
            "t": 123456,
            "hr": 150.0,
            "spo2": 93.0,
            "temp": 38.4,
            "fall": 1,
            "convulsion": 0,
            "mode": "Joystick",
            "pose": [1.5, -2.25, 0.7853981633974483],
        },
    },
    {
        "key": "0123456789abcdef0123456789abcdef",
        "device_id": 1,
        "seq": 0,
        "record": {
            "t": 0,
            "hr": 40.0,
            "spo2": 100.0,
            "temp": -5.5,
            "fall": 0,
            "convulsion": 1,
            "mode": "EOG",
            "pose": [0.001, 1000.0, -3.0],
        },
    },
]


def build_frame(key_hex: str, device_id: int, seq: int, record: dict) -> tuple[str, str]:
    payload = json.dumps(record, sort_keys=True, separators=(",", ":")).encode("utf-8")
    header = b"\xa5\x5a" + struct.pack("<BQIH", 1, device_id, seq, len(payload))
    nonce = struct.pack("<QI", device_id, seq)
    ciphertext, tag = ccm_encrypt(bytes.fromhex(key_hex), nonce, payload, header, tag_len=8)
    return payload.decode("utf-8"), (header + ciphertext + tag).hex()


def main() -> None:
    out = []
    for v in VECTORS:
        payload, frame_hex = build_frame(v["key"], v["device_id"], v["seq"], v["record"])
        out.append(
            {
                "key": v["key"],
                "device_id": v["device_id"],
                "seq": v["seq"],
                "payload": payload,
                "frame_hex": frame_hex,
            }
        )
    target = ROOT / "src" / "wheelsim" / "fixtures" / "protocol_vectors.json"
    target.write_text(json.dumps({"vectors": out}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(out)} vectors to {target}")


if __name__ == "__main__":
    main()
