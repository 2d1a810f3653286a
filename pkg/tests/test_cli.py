"""CLI subcommand smoke tests (in-process, no network)."""

import json
from importlib import resources

from wheelsim.cli import main


def test_run_bundled_scenario(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--scenario", "fall_demo", "--out", str(out)]) == 0
    assert (out / "control_timeline.jsonl").exists()
    assert (out / "metrics.json").exists()
    assert "fall_demo" in capsys.readouterr().out


def test_run_scenario_file(tmp_path):
    scenario = {"seed": 1, "duration_ms": 400, "events": []}
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(scenario))
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "out")]) == 0
    lines = (tmp_path / "out" / "control_timeline.jsonl").read_text().splitlines()
    assert len(lines) == 20


def test_trials_single_cell(tmp_path, capsys):
    assert main(["trials", "--modality", "voice", "--command", "Forward", "--n", "5"]) == 0
    assert "5/5 = 100.0%" in capsys.readouterr().out


def test_trials_requires_modality(capsys):
    assert main(["trials", "--n", "5"]) == 2


def test_analyze_pairs(tmp_path, capsys):
    ref = resources.files("wheelsim.fixtures") / "pairs" / "hr.csv"
    out = tmp_path / "report"
    assert main(["analyze", "--pairs", str(ref), "--kind", "hr", "--out", str(out)]) == 0
    assert (out / "agreement_hr.csv").exists()
    assert (out / "agreement_hr_plot.json").exists()
    assert "rmse" in capsys.readouterr().out


def test_replay_trace(tmp_path):
    trace = tmp_path / "inputs.jsonl"
    lines = [
        json.dumps({"timestamp": t, "voice_ready": True, "voice_command": "forward"})
        for t in range(0, 200, 20)
    ]
    trace.write_text("\n".join(lines))
    out = tmp_path / "timeline.jsonl"
    assert main(["replay", "--trace", str(trace), "--out", str(out)]) == 0
    rows = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(rows) == 10
    assert all(r["mode"] == "Voice" for r in rows)
    assert all(r["direction"] == "Forward" for r in rows)


def test_corpus_command(tmp_path, capsys):
    out = tmp_path / "corpus"
    assert main(["corpus", "--out", str(out), "--seed", "3"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["traces"]) >= 60


def test_overheads_no_loop(capsys):
    assert main(["overheads", "--loop-seconds", "0"]) == 0
    out = capsys.readouterr().out
    assert "encrypt_us" in out
    assert "microseconds" in out
