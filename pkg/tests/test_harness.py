"""Kinematics, scenario runner and trial harness tests."""

import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wheelsim.arbitration import ModeId, MotionCommand, MotionDirection
from wheelsim.harness import (
    Scenario,
    ScenarioParse,
    SimConfig,
    SimSession,
    bundled_scenario,
    load_noise_fixture,
    run_scenario,
    run_trials,
    trial_report,
)
from wheelsim.kinematics import KinematicState, normalize_heading, step_kinematics

FWD = MotionCommand(MotionDirection.FORWARD, 1.0, ModeId.JOYSTICK)
LEFT = MotionCommand(MotionDirection.LEFT, 1.0, ModeId.JOYSTICK)
STOP = MotionCommand(MotionDirection.STOP, 0.0, ModeId.STOP)


# --- kinematics ---


def test_stop_keeps_pose():
    state = KinematicState(x=1.0, y=2.0, heading=0.5, v=0.8)
    out = step_kinematics(state, STOP, 1.0)
    assert (out.x, out.y, out.heading) == (1.0, 2.0, 0.5)
    assert out.v == 0.0


def test_forward_one_second():
    out = step_kinematics(KinematicState(), FWD, 1.0)
    assert out.x == pytest.approx(1.0)
    assert out.y == pytest.approx(0.0)


def test_left_turn_half_second():
    out = step_kinematics(KinematicState(), LEFT, 0.5)
    assert out.heading == pytest.approx(0.5)
    assert (out.x, out.y) == (0.0, 0.0)


def test_backward_at_heading():
    cmd = MotionCommand(MotionDirection.BACKWARD, 0.5, ModeId.VOICE)
    state = KinematicState(heading=math.pi / 2)
    out = step_kinematics(state, cmd, 2.0)
    assert out.x == pytest.approx(0.0, abs=1e-12)
    assert out.y == pytest.approx(-1.0)


def test_heading_normalized():
    out = step_kinematics(KinematicState(heading=3.0), LEFT, 1.0)
    assert -math.pi < out.heading <= math.pi


@given(
    heading=st.floats(-3.1, 3.1),
    speed=st.floats(0.01, 1.0),
    dt=st.floats(0.001, 0.2),
    direction=st.sampled_from([MotionDirection.FORWARD, MotionDirection.BACKWARD,
                               MotionDirection.LEFT, MotionDirection.RIGHT]),
)
@settings(max_examples=300)
def test_displacement_bounded_by_vmax_dt(heading, speed, dt, direction):
    cmd = MotionCommand(direction, speed, ModeId.JOYSTICK)
    state = KinematicState(heading=heading)
    out = step_kinematics(state, cmd, dt)
    displacement = math.hypot(out.x - state.x, out.y - state.y)
    assert displacement <= 1.0 * dt + 1e-12


def test_normalize_heading_range():
    for theta in (-10.0, -math.pi, 0.0, math.pi, 10.0, 100.0):
        w = normalize_heading(theta)
        assert -math.pi < w <= math.pi
        assert math.cos(w) == pytest.approx(math.cos(theta), abs=1e-9)
        assert math.sin(w) == pytest.approx(math.sin(theta), abs=1e-9)


# --- scenario parsing ---


def test_scenario_rejects_event_beyond_duration():
    with pytest.raises(ScenarioParse):
        Scenario.from_dict({"duration_ms": 1000, "events": [{"t_ms": 2000, "type": "fall"}]})


def test_scenario_rejects_unknown_config():
    with pytest.raises(ScenarioParse):
        Scenario.from_dict({"duration_ms": 1000, "config": {"warp_drive": True}})


def test_unknown_event_type_surfaces_at_runtime(tmp_path):
    scenario = Scenario.from_dict(
        {"duration_ms": 200, "events": [{"t_ms": 0, "type": "teleport"}]}
    )
    with pytest.raises(ScenarioParse):
        run_scenario(scenario, tmp_path / "out")


# --- bundled scenarios ---


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]


def test_idle_60s_no_alerts(tmp_path):
    result = run_scenario(bundled_scenario("idle_60s"), tmp_path / "run")
    assert result.ticks == 3000  # 60 s at 50 Hz
    assert result.metrics["alerts"] == []
    assert result.metrics["monitor"]["alerts"] == 0
    control = read_jsonl(tmp_path / "run" / "control_timeline.jsonl")
    assert len(control) == 3000
    assert all(line["mode"] == "Stop" for line in control)


def test_fall_demo_one_alert_latched(tmp_path):
    result = run_scenario(bundled_scenario("fall_demo"), tmp_path / "run")
    alerts = result.metrics["alerts"]
    assert [a["kind"] for a in alerts] == ["Fall"]
    assert result.metrics["latched"] is True
    outbox = sorted((tmp_path / "run" / "outbox").glob("*.eml"))
    assert len(outbox) == 1
    assert "Fall" in outbox[0].read_text()
    control = read_jsonl(tmp_path / "run" / "control_timeline.jsonl")
    # chair was driving before the fall, Stop ever after
    fall_t = 5000
    assert any(line["mode"] == "Joystick" for line in control if line["t_ms"] < fall_t)
    for line in control:
        if line["t_ms"] >= fall_t + 300:  # detector fires at impact inside the script
            assert line["mode"] == "Stop"


def test_priority_conflict_joystick_wins(tmp_path):
    result = run_scenario(bundled_scenario("priority_conflict"), tmp_path / "run")
    control = read_jsonl(tmp_path / "run" / "control_timeline.jsonl")
    # once the debounce arms, every tick is joystick even while voice is active
    for line in control:
        if line["t_ms"] >= 260:
            assert line["mode"] == "Joystick", line
    assert result.metrics["alerts"] == []


def test_scenario_determinism_byte_identical(tmp_path):
    scenario = bundled_scenario("fall_demo")
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_scenario(scenario, a)
    run_scenario(scenario, b)
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_hr_spike_scenario_raises_heart_attack(tmp_path):
    result = run_scenario(bundled_scenario("hr_spike"), tmp_path / "run")
    kinds = [a["kind"] for a in result.metrics["alerts"]]
    assert kinds == ["HeartAttack"]
    alert = result.metrics["alerts"][0]
    assert alert["value"] == 150.0
    # hazard latch engaged by the health alert
    assert result.metrics["latched"] is True
    assert "outbox" in alert["delivered"]


def test_transport_outage_counts_drops(tmp_path):
    scenario = Scenario.from_dict(
        {
            "seed": 3,
            "duration_ms": 20_000,
            "events": [
                {"t_ms": 1000, "type": "transport", "params": {"down": True}},
                {"t_ms": 9000, "type": "transport", "params": {"down": False}},
            ],
        },
        name="outage",
    )
    result = run_scenario(scenario, tmp_path / "run")
    stats = result.metrics["uploader"]
    assert stats["send_failures"] > 0
    assert stats["dropped"] == 0  # short outage, well under capacity
    assert stats["sent"] + result.metrics["uploader"]["dropped"] <= stats["produced"]
    assert result.metrics["monitor"]["accepted"] == stats["sent"]


def test_clear_safehalt_event_restores_drive(tmp_path):
    scenario = Scenario.from_dict(
        {
            "seed": 9,
            "duration_ms": 6000,
            "events": [
                {"t_ms": 500, "type": "hazard", "params": {"kind": "obstacle", "value": True}},
                {"t_ms": 1000, "type": "hazard", "params": {"kind": "obstacle", "value": False}},
                {"t_ms": 2000, "type": "clear_safehalt"},
                {"t_ms": 3000, "type": "voice", "params": {"text": "forward", "hold_ms": 400}},
            ],
        },
        name="clear",
    )
    result = run_scenario(scenario, tmp_path / "run")
    control = read_jsonl(tmp_path / "run" / "control_timeline.jsonl")
    latched_ticks = [l for l in control if 500 <= l["t_ms"] < 2000]
    assert all(l["mode"] == "Stop" for l in latched_ticks)
    assert result.metrics["latched"] is False
    assert any(l["mode"] == "Voice" for l in control if l["t_ms"] >= 3000)


def test_clear_refused_while_hazard_persists(tmp_path):
    scenario = Scenario.from_dict(
        {
            "seed": 9,
            "duration_ms": 3000,
            "events": [
                {"t_ms": 500, "type": "hazard", "params": {"kind": "obstacle", "value": True}},
                {"t_ms": 1000, "type": "clear_safehalt"},
            ],
        },
        name="refused",
    )
    result = run_scenario(scenario, tmp_path / "run")
    assert result.metrics["latched"] is True


# --- trials ---


def test_noiseless_trials_all_succeed():
    for modality, command in (
        ("joystick", MotionDirection.FORWARD),
        ("joystick", MotionDirection.STOP),
        ("voice", MotionDirection.LEFT),
        ("gesture", MotionDirection.BACKWARD),
        ("gesture", MotionDirection.STOP),
        ("eog", MotionDirection.RIGHT),
    ):
        log = run_trials(modality, command, n=8, recognition_noise=0.0, seed=3)
        cell = log.cells[(modality, command.value)]
        assert cell.successes == cell.trials == 8, (modality, command)


def test_eog_stop_trials_blink():
    log = run_trials("eog", MotionDirection.STOP, n=5, recognition_noise=0.0, seed=2)
    assert log.cells[("eog", "Stop")].successes == 5


def test_noise_quota_is_exact():
    log = run_trials("voice", MotionDirection.RIGHT, n=20, recognition_noise=0.25, seed=5)
    assert log.cells[("voice", "Right")].successes == 15


def test_seed_change_with_zero_noise_identical():
    a = run_trials("gesture", MotionDirection.LEFT, n=10, recognition_noise=0.0, seed=1)
    b = run_trials("gesture", MotionDirection.LEFT, n=10, recognition_noise=0.0, seed=99)
    assert a.cells == b.cells


def test_trial_accounting_invariant():
    log = run_trials("voice", MotionDirection.BACKWARD, n=12, recognition_noise=0.5, seed=8)
    cell = log.cells[("voice", "Backward")]
    assert 0 <= cell.successes <= cell.trials == 12


def test_trial_report_flags_headline_disagreement(tmp_path):
    from wheelsim.analytics import TrialLog

    fixture = load_noise_fixture()
    log = TrialLog.empty()
    for modality, cells in fixture["expected_successes"].items():
        for command, successes in cells.items():
            log.record(modality, command, 100, successes)
    report = trial_report(log, tmp_path)
    assert not report["headline_consistency"]["consistent"]
    assert "joystick" in report["headline_consistency"]["disagreements"]
    assert (tmp_path / "accuracy_table.csv").exists()
    assert (tmp_path / "trial_report.json").exists()


# --- live-ish session behavior ---


def test_session_manual_mode_selection():
    session = SimSession(SimConfig(), monitor=None)
    session.select_mode("Voice")
    session.set_joystick(2048, 3548, hold_ms=2000)
    modes = {session.tick().mode for _ in range(30)}
    assert modes == {ModeId.STOP}  # joystick ineligible under manual voice
    session.select_mode("auto")
    for _ in range(20):
        out = session.tick()
    assert out.mode is ModeId.JOYSTICK
