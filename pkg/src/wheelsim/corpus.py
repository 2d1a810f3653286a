"""Labeled synthetic accelerometer corpus for detector validation.

Writes a directory of CSV traces (`t_ms,channel,value` with channels
ax/ay/az) plus a manifest JSON listing each file's label (fall, convulsion
or negative), the expected detector events, and the corroborating heart
rate. Every trace is deterministic for a given corpus seed; amplitudes and
frequencies are placed with margin on their side of the detector gates.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .decoders import AccelSample

SAMPLE_PERIOD_MS = 20  # 50 Hz


@dataclass(frozen=True, slots=True)
class CorpusEntry:
    file: str
    label: str  # fall | convulsion | negative
    expected_events: tuple[str, ...]
    hr: float
    spo2: float = 97.0


def _jitter(rng: random.Random, sigma: float = 0.02) -> float:
    return rng.gauss(0.0, sigma)


def _rest(rng: random.Random, t0: int, duration_ms: int, out: list[AccelSample]) -> int:
    for t in range(t0, t0 + duration_ms, SAMPLE_PERIOD_MS):
        out.append(AccelSample(_jitter(rng), _jitter(rng), 1.0 + _jitter(rng), t))
    return t0 + duration_ms


def _fall_trace(rng: random.Random) -> list[AccelSample]:
    out: list[AccelSample] = []
    t = _rest(rng, 0, rng.choice([1500, 2000, 2500]), out)
    freefall_ms = rng.choice([140, 160, 180, 220])
    level = rng.uniform(0.05, 0.18)
    for tt in range(t, t + freefall_ms, SAMPLE_PERIOD_MS):
        out.append(AccelSample(0.0, 0.0, level + _jitter(rng, 0.01), tt))
    t += freefall_ms
    # short transition then the impact spike
    out.append(AccelSample(0.0, 0.0, rng.uniform(0.8, 1.4), t))
    t += SAMPLE_PERIOD_MS
    spike = rng.uniform(2.7, 3.4)
    for tt in range(t, t + 60, SAMPLE_PERIOD_MS):
        out.append(AccelSample(0.0, 0.0, spike, tt))
    t += 60
    _rest(rng, t, 8000 - t if 8000 - t > 2000 else 2500, out)
    return out


def _oscillation(
    rng: random.Random,
    t0: int,
    duration_ms: int,
    amplitude_g: float,
    freq_hz: float,
    out: list[AccelSample],
    jitter_sigma: float = 0.01,
) -> int:
    for t in range(t0, t0 + duration_ms, SAMPLE_PERIOD_MS):
        osc = amplitude_g * math.sin(2.0 * math.pi * freq_hz * (t - t0) / 1000.0)
        out.append(AccelSample(_jitter(rng, jitter_sigma), _jitter(rng, jitter_sigma), 1.0 + osc, t))
    return t0 + duration_ms


def _convulsion_trace(rng: random.Random) -> list[AccelSample]:
    out: list[AccelSample] = []
    t = _rest(rng, 0, 500, out)
    amplitude = rng.uniform(0.32, 0.45)
    freq = rng.choice([3.0, 4.0, 5.0, 6.0, 7.0])
    t = _oscillation(rng, t, rng.choice([6500, 7000]), amplitude, freq, out)
    _rest(rng, t, 1000, out)
    return out


def _negative_builders(rng: random.Random) -> list[tuple[str, Callable[[], list[AccelSample]]]]:
    def rest_only():
        out: list[AccelSample] = []
        _rest(rng, 0, 7000, out)
        return out

    def walking():
        # stride bounce below both the band floor and the p2p gate
        out: list[AccelSample] = []
        _oscillation(rng, 0, 7000, 0.18, 1.5, out, jitter_sigma=0.015)
        return out

    def brisk_walking():
        # p2p above the gate but cadence below the 2 Hz band floor
        out: list[AccelSample] = []
        _oscillation(rng, 0, 7000, 0.28, 1.2, out, jitter_sigma=0.01)
        return out

    def sway():
        # slow wheelchair rocking: 0.5 Hz, 0.8 g peak-to-peak
        out: list[AccelSample] = []
        _oscillation(rng, 0, 7000, 0.4, 0.5, out, jitter_sigma=0.01)
        return out

    def caught_fall():
        # free-fall phase but no impact inside the arming window
        out: list[AccelSample] = []
        t = _rest(rng, 0, 2000, out)
        for tt in range(t, t + 160, SAMPLE_PERIOD_MS):
            out.append(AccelSample(0.0, 0.0, 0.1 + _jitter(rng, 0.01), tt))
        _rest(rng, t + 160, 5000, out)
        return out

    def hard_sit():
        # impact spike with no preceding free fall
        out: list[AccelSample] = []
        t = _rest(rng, 0, 3000, out)
        out.append(AccelSample(0.0, 0.0, 2.8, t))
        out.append(AccelSample(0.0, 0.0, 2.6, t + SAMPLE_PERIOD_MS))
        _rest(rng, t + 2 * SAMPLE_PERIOD_MS, 4000, out)
        return out

    def short_freefall_bump():
        # below the 120 ms free-fall dwell, then a spike: not a fall
        out: list[AccelSample] = []
        t = _rest(rng, 0, 2500, out)
        for tt in range(t, t + 80, SAMPLE_PERIOD_MS):
            out.append(AccelSample(0.0, 0.0, 0.1, tt))
        out.append(AccelSample(0.0, 0.0, 2.9, t + 80))
        _rest(rng, t + 80 + SAMPLE_PERIOD_MS, 4500, out)
        return out

    def tremor():
        # high-frequency shiver above the 8 Hz band ceiling
        out: list[AccelSample] = []
        _oscillation(rng, 0, 7000, 0.3, 12.0, out, jitter_sigma=0.005)
        return out

    def brief_shake():
        # convulsion-grade oscillation that stops before the 5 s sustain
        out: list[AccelSample] = []
        t = _rest(rng, 0, 1000, out)
        t = _oscillation(rng, t, 3000, 0.4, 4.0, out)
        _rest(rng, t, 3500, out)
        return out

    return [
        ("rest", rest_only),
        ("walking", walking),
        ("brisk_walking", brisk_walking),
        ("sway", sway),
        ("caught_fall", caught_fall),
        ("hard_sit", hard_sit),
        ("short_freefall_bump", short_freefall_bump),
        ("tremor", tremor),
        ("brief_shake", brief_shake),
    ]


def write_trace_csv(samples: list[AccelSample], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_ms", "channel", "value"])
        for s in samples:
            writer.writerow([s.t, "ax", f"{s.ax:.5f}"])
            writer.writerow([s.t, "ay", f"{s.ay:.5f}"])
            writer.writerow([s.t, "az", f"{s.az:.5f}"])


def read_trace_csv(path) -> list[AccelSample]:
    by_t: dict[int, dict[str, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            by_t.setdefault(int(row["t_ms"]), {})[row["channel"]] = float(row["value"])
    return [
        AccelSample(axes.get("ax", 0.0), axes.get("ay", 0.0), axes.get("az", 0.0), t)
        for t, axes in sorted(by_t.items())
    ]


def generate_corpus(
    out_dir,
    seed: int = 7,
    n_fall: int = 20,
    n_convulsion: int = 10,
    n_negative_per_kind: int = 4,
) -> list[CorpusEntry]:
    """Materialize the corpus into `out_dir` and return the manifest entries."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries: list[CorpusEntry] = []

    for i in range(n_fall):
        rng = random.Random(f"corpus:{seed}:fall:{i}")
        name = f"fall_{i:02d}.csv"
        write_trace_csv(_fall_trace(rng), out / name)
        entries.append(CorpusEntry(name, "fall", ("Fall",), hr=72.0))

    for i in range(n_convulsion):
        rng = random.Random(f"corpus:{seed}:convulsion:{i}")
        name = f"convulsion_{i:02d}.csv"
        write_trace_csv(_convulsion_trace(rng), out / name)
        entries.append(CorpusEntry(name, "convulsion", ("Convulsion",), hr=float(rng.choice([110, 115, 122, 130]))))

    for i in range(n_negative_per_kind):
        rng = random.Random(f"corpus:{seed}:negative:{i}")
        for kind, builder in _negative_builders(rng):
            name = f"negative_{kind}_{i:02d}.csv"
            write_trace_csv(builder(), out / name)
            entries.append(CorpusEntry(name, "negative", (), hr=72.0))
        # corroboration check: convulsion-grade motion with calm heart rate
        name = f"negative_low_hr_shake_{i:02d}.csv"
        write_trace_csv(_convulsion_trace(rng), out / name)
        entries.append(CorpusEntry(name, "negative", (), hr=85.0))

    manifest = {
        "sample_period_ms": SAMPLE_PERIOD_MS,
        "seed": seed,
        "traces": [
            {
                "file": e.file,
                "label": e.label,
                "expected_events": list(e.expected_events),
                "hr": e.hr,
                "spo2": e.spo2,
            }
            for e in entries
        ],
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return entries


def load_manifest(corpus_dir) -> list[CorpusEntry]:
    with open(Path(corpus_dir) / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    return [
        CorpusEntry(
            file=t["file"],
            label=t["label"],
            expected_events=tuple(t["expected_events"]),
            hr=float(t["hr"]),
            spo2=float(t.get("spo2", 97.0)),
        )
        for t in manifest["traces"]
    ]
