"""Agreement and accuracy statistics for module-vs-reference comparisons.

Bland-Altman bias and 95% limits of agreement (bias +- 1.96 * sample SD of
the pairwise differences, module minus reference), RMSE, and the command
accuracy table, all emitted as deterministic CSV/JSON/plot data.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

LOA_MULTIPLIER = 1.96

COMMAND_ORDER = ("Right", "Left", "Forward", "Backward", "Stop")
MODALITY_ORDER = ("joystick", "voice", "gesture", "eog")


class TooFewPairs(ValueError):
    pass


class EmptyCell(ValueError):
    pass


class IoFailure(OSError):
    pass


@dataclass(frozen=True, slots=True)
class PairedReadings:
    """Equal-length (module, reference) readings of one vital kind."""

    module: tuple[float, ...]
    reference: tuple[float, ...]
    kind: str = ""
    units: str = ""

    def __post_init__(self):
        if len(self.module) != len(self.reference):
            raise ValueError("module and reference sequences differ in length")

    def __len__(self) -> int:
        return len(self.module)

    @classmethod
    def from_values(cls, pairs: Iterable[tuple[float, float]], kind: str = "", units: str = "") -> "PairedReadings":
        module, reference = [], []
        for m, r in pairs:
            module.append(float(m))
            reference.append(float(r))
        return cls(tuple(module), tuple(reference), kind=kind, units=units)

    @classmethod
    def from_csv(cls, path, kind: str = "", units: str = "") -> "PairedReadings":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            return cls.from_values(
                ((row["module"], row["reference"]) for row in reader), kind=kind, units=units
            )


@dataclass(frozen=True, slots=True)
class AgreementReport:
    n: int
    bias: float  # mean(module - reference)
    sd: float  # sample standard deviation of the differences
    loa_low: float
    loa_high: float
    rmse: float
    kind: str = ""
    units: str = ""
    points: tuple[tuple[float, float], ...] = ()  # (pair mean, difference)


def bland_altman(pairs: PairedReadings) -> AgreementReport:
    n = len(pairs)
    if n < 2:
        raise TooFewPairs(f"need at least 2 pairs, got {n}")
    diffs = [m - r for m, r in zip(pairs.module, pairs.reference)]
    bias = sum(diffs) / n
    sd = math.sqrt(sum((d - bias) ** 2 for d in diffs) / (n - 1))
    points = tuple(
        ((m + r) / 2.0, m - r) for m, r in zip(pairs.module, pairs.reference)
    )
    return AgreementReport(
        n=n,
        bias=bias,
        sd=sd,
        loa_low=bias - LOA_MULTIPLIER * sd,
        loa_high=bias + LOA_MULTIPLIER * sd,
        rmse=rmse(pairs),
        kind=pairs.kind,
        units=pairs.units,
        points=points,
    )


def rmse(pairs: PairedReadings) -> float:
    n = len(pairs)
    if n < 1:
        raise TooFewPairs("need at least 1 pair")
    return math.sqrt(sum((m - r) ** 2 for m, r in zip(pairs.module, pairs.reference)) / n)


# --- command accuracy ---


@dataclass(frozen=True, slots=True)
class CellCount:
    trials: int
    successes: int

    def __post_init__(self):
        if self.successes > self.trials or self.trials < 0 or self.successes < 0:
            raise ValueError(f"bad cell counts {self.successes}/{self.trials}")


@dataclass(slots=True)
class TrialLog:
    """Per (modality, command) trial counts."""

    cells: dict[tuple[str, str], CellCount]

    def record(self, modality: str, command: str, trials: int, successes: int) -> None:
        self.cells[(modality, command)] = CellCount(trials, successes)

    @classmethod
    def empty(cls) -> "TrialLog":
        return cls(cells={})

    def to_dict(self) -> dict:
        return {
            "cells": [
                {"modality": m, "command": c, "trials": cc.trials, "successes": cc.successes}
                for (m, c), cc in sorted(self.cells.items())
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialLog":
        log = cls.empty()
        for cell in d["cells"]:
            log.record(cell["modality"], cell["command"], cell["trials"], cell["successes"])
        return log


@dataclass(frozen=True, slots=True)
class AccuracyTable:
    cell_pct: dict[tuple[str, str], float]
    modality_mean_pct: dict[str, float]
    overall_mean_pct: float


def accuracy_table(log: TrialLog) -> AccuracyTable:
    """Per-cell percentages, per-modality means, and the overall mean."""
    cell_pct = {}
    for key, cell in log.cells.items():
        if cell.trials == 0:
            raise EmptyCell(f"cell {key} has zero trials")
        cell_pct[key] = 100.0 * cell.successes / cell.trials
    modalities = sorted({m for m, _ in cell_pct})
    modality_mean = {
        m: sum(v for (mm, _), v in cell_pct.items() if mm == m)
        / sum(1 for (mm, _) in cell_pct if mm == m)
        for m in modalities
    }
    overall = sum(modality_mean.values()) / len(modality_mean) if modality_mean else 0.0
    return AccuracyTable(cell_pct=cell_pct, modality_mean_pct=modality_mean, overall_mean_pct=overall)


# --- report emission ---


def agreement_csv(report: AgreementReport) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bias", "sd", "loa_low", "loa_high", "rmse", "n"])
    writer.writerow(
        [repr(report.bias), repr(report.sd), repr(report.loa_low), repr(report.loa_high), repr(report.rmse), report.n]
    )
    return buf.getvalue().encode("utf-8")


def agreement_json(report: AgreementReport) -> bytes:
    payload = {
        "kind": report.kind,
        "units": report.units,
        "n": report.n,
        "bias": report.bias,
        "sd": report.sd,
        "loa_low": report.loa_low,
        "loa_high": report.loa_high,
        "rmse": report.rmse,
    }
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")


def agreement_plotdata(report: AgreementReport, pairs: PairedReadings) -> bytes:
    """Scatter (module vs reference) plus the Bland-Altman point set."""
    payload = {
        "kind": report.kind,
        "units": report.units,
        "scatter": {
            "reference": list(pairs.reference),
            "module": list(pairs.module),
            "identity_line": True,
        },
        "bland_altman": {
            "mean": [p[0] for p in report.points],
            "difference": [p[1] for p in report.points],
            "bias": report.bias,
            "loa_low": report.loa_low,
            "loa_high": report.loa_high,
        },
    }
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")


def accuracy_csv(log: TrialLog) -> bytes:
    """Command rows by modality columns, matching the trial-table layout."""
    table = accuracy_table(log)
    modalities = [m for m in MODALITY_ORDER if any(mm == m for mm, _ in log.cells)]
    modalities += sorted({m for m, _ in log.cells} - set(modalities))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["command", "trials"]
    for m in modalities:
        header += [f"{m}_success", f"{m}_acc_pct"]
    writer.writerow(header)
    commands = [c for c in COMMAND_ORDER if any(cc == c for _, cc in log.cells)]
    commands += sorted({c for _, c in log.cells} - set(commands))
    for c in commands:
        trials = max(log.cells[(m, c)].trials for m in modalities if (m, c) in log.cells)
        row = [c, trials]
        for m in modalities:
            cell = log.cells.get((m, c))
            if cell is None:
                row += ["", ""]
            else:
                row += [cell.successes, repr(table.cell_pct[(m, c)])]
        writer.writerow(row)
    mean_row = ["mean", ""]
    for m in modalities:
        mean_row += ["", repr(table.modality_mean_pct[m])]
    writer.writerow(mean_row)
    return buf.getvalue().encode("utf-8")


def emit_report(report, out_dir, formats: Sequence[str] = ("csv", "json"), pairs: PairedReadings = None) -> list:
    """Write the report in the requested formats; returns written paths.

    Accepts an AgreementReport (optionally with its pairs, for plotdata) or
    a TrialLog. Equal inputs produce byte-identical files.
    """
    from pathlib import Path

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        if isinstance(report, AgreementReport):
            stem = f"agreement_{report.kind or 'pairs'}"
            for fmt in formats:
                if fmt == "csv":
                    path = out / f"{stem}.csv"
                    path.write_bytes(agreement_csv(report))
                elif fmt == "json":
                    path = out / f"{stem}.json"
                    path.write_bytes(agreement_json(report))
                elif fmt == "plotdata":
                    if pairs is None:
                        raise ValueError("plotdata needs the original pairs")
                    path = out / f"{stem}_plot.json"
                    path.write_bytes(agreement_plotdata(report, pairs))
                else:
                    raise ValueError(f"unknown format {fmt!r}")
                written.append(path)
        elif isinstance(report, TrialLog):
            for fmt in formats:
                if fmt == "csv":
                    path = out / "accuracy_table.csv"
                    path.write_bytes(accuracy_csv(report))
                elif fmt == "json":
                    table = accuracy_table(report)
                    payload = {
                        "cells": [
                            {
                                "modality": m,
                                "command": c,
                                "trials": report.cells[(m, c)].trials,
                                "successes": report.cells[(m, c)].successes,
                                "accuracy_pct": table.cell_pct[(m, c)],
                            }
                            for (m, c) in sorted(report.cells)
                        ],
                        "modality_mean_pct": dict(sorted(table.modality_mean_pct.items())),
                        "overall_mean_pct": table.overall_mean_pct,
                    }
                    path = out / "accuracy_table.json"
                    path.write_bytes((json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8"))
                else:
                    raise ValueError(f"unknown format {fmt!r}")
                written.append(path)
        else:
            raise TypeError(f"cannot emit report of type {type(report)!r}")
        return written
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
