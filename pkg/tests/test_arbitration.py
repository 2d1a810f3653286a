"""Priority ladder, debounce, latch and loop tests."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wheelsim.arbitration import (
    AUTO_LADDER,
    ArbitrationState,
    ControlInputs,
    HazardStillActive,
    ModeId,
    MotionDirection,
    STOP_COMMAND,
    TICK_MS,
    arbitrate,
    clear_safe_halt,
    debounce_ok,
    inputs_from_json,
    inputs_to_json,
    run_loop,
    select_mode,
    snapshots_per_tick,
)

JOY_GRID = (-2048, -51, -50, 0, 50, 51, 2047)
EOG_GRID = (0.0, 12.0, 12.1, 45.0)


def reference_ladder(fall, health, obstacle, joy_speed, debounced, voice_ready, gesture_ok, eog_angle, safe_halt):
    """Straight-line transcription of the published 50 Hz priority loop."""
    if fall or health or obstacle:
        return "Stop", True
    if safe_halt:
        return "Stop", True
    if abs(joy_speed) > 50 and debounced:
        return "Joystick", False
    if voice_ready:
        return "Voice", False
    if gesture_ok:
        return "Gesture", False
    if eog_angle > 12.0:
        return "EOG", False
    return "Stop", False


def state_with_debounce(debounced: bool, now: int = 10_000, latched: bool = False) -> ArbitrationState:
    first_seen = now - 400 if debounced else None
    return ArbitrationState(safe_halt=latched, debounce_first_seen_ms=first_seen, last_tick_ms=now - TICK_MS)


def sweep_cases():
    for fall in (False, True):
        for health in (False, True):
            for obstacle in (False, True):
                for joy in JOY_GRID:
                    for debounced in (False, True):
                        for voice in (False, True):
                            for gesture in (False, True):
                                for eog in EOG_GRID:
                                    for latched in (False, True):
                                        yield fall, health, obstacle, joy, debounced, voice, gesture, eog, latched


def test_ladder_matches_reference_transcription():
    now = 10_000
    n = 0
    for fall, health, obstacle, joy, debounced, voice, gesture, eog, latched in sweep_cases():
        inputs = ControlInputs(
            joy_speed=joy,
            voice_ready=voice,
            gesture_ok=gesture,
            eog_angle=eog,
            fall_flag=fall,
            health_alert=health,
            obstacle_flag=obstacle,
            timestamp=now,
        )
        state = state_with_debounce(debounced, now=now, latched=latched)
        mode, command, state_out = arbitrate(inputs, state)
        want_mode, want_latch = reference_ladder(
            fall, health, obstacle, joy, debounced, voice, gesture, eog, latched
        )
        assert mode.value == want_mode, (inputs, state)
        assert state_out.safe_halt == want_latch
        if mode is ModeId.STOP:
            assert command == STOP_COMMAND
        n += 1
    assert n >= 1344


def test_hazard_latches_and_overrides_joystick():
    inputs = ControlInputs(fall_flag=True, joy_speed=500, timestamp=0)
    mode, command, state = arbitrate(inputs, ArbitrationState())
    assert mode is ModeId.STOP
    assert command.direction is MotionDirection.STOP
    assert state.safe_halt


def test_latched_idle_stays_stopped():
    inputs = ControlInputs(timestamp=20)
    mode, _, state = arbitrate(inputs, ArbitrationState(safe_halt=True))
    assert mode is ModeId.STOP
    assert state.safe_halt


def test_joystick_wins_over_voice_with_debounce():
    state = state_with_debounce(True, now=1000)
    inputs = ControlInputs(joy_speed=60, voice_ready=True, voice_command=MotionDirection.LEFT, timestamp=1000)
    mode, command, _ = arbitrate(inputs, state)
    assert mode is ModeId.JOYSTICK
    assert command.source is ModeId.JOYSTICK


def test_all_idle_is_stop():
    mode, command, _ = arbitrate(ControlInputs(timestamp=0), ArbitrationState())
    assert mode is ModeId.STOP
    assert command == STOP_COMMAND


def test_eog_rung_strictness():
    state = ArbitrationState(last_tick_ms=0)
    mode, _, _ = arbitrate(ControlInputs(eog_angle=13.0, timestamp=20), state)
    assert mode is ModeId.EOG
    mode, _, _ = arbitrate(ControlInputs(eog_angle=12.0, timestamp=20), state)
    assert mode is ModeId.STOP


def test_joystick_boundary_strictness():
    for joy, want in ((50, ModeId.STOP), (-50, ModeId.STOP), (51, ModeId.JOYSTICK), (-51, ModeId.JOYSTICK)):
        state = state_with_debounce(True, now=500)
        mode, _, _ = arbitrate(ControlInputs(joy_speed=joy, timestamp=500), state)
        assert mode is want, joy


def test_winning_rung_without_command_degrades_to_stop():
    state = ArbitrationState(last_tick_ms=0)
    mode, command, _ = arbitrate(ControlInputs(voice_ready=True, timestamp=20), state)
    assert mode is ModeId.VOICE
    assert command.direction is MotionDirection.STOP
    assert command.speed == 0.0


def test_joy_pressed_is_immediate_stop_without_latch():
    state = state_with_debounce(True, now=100)
    inputs = ControlInputs(joy_speed=900, joy_pressed=True, voice_ready=True, timestamp=100)
    mode, command, state_out = arbitrate(inputs, state)
    assert mode is ModeId.STOP
    assert command == STOP_COMMAND
    assert not state_out.safe_halt


# --- debounce ---


def run_debounce(ticks_above: int):
    """Feed consecutive 20 ms ticks above threshold; return per-tick results."""
    state = ArbitrationState()
    results = []
    for k in range(ticks_above):
        ok, state = debounce_ok(state, True, k * TICK_MS)
        results.append(ok)
    return results, state


def test_debounce_240ms_not_yet():
    results, _ = run_debounce(12)  # 12 ticks = 240 ms of dwell
    assert not any(results)


def test_debounce_260ms_passes():
    results, _ = run_debounce(13)  # 13 ticks = 260 ms of dwell
    assert results[-1] is True
    assert not any(results[:-1])


def test_debounce_resets_on_drop():
    state = ArbitrationState()
    for k in range(20):
        _, state = debounce_ok(state, True, k * TICK_MS)
    ok, state = debounce_ok(state, False, 20 * TICK_MS)
    assert not ok
    assert state.debounce_first_seen_ms is None
    ok, state = debounce_ok(state, True, 21 * TICK_MS)
    assert not ok  # timer restarted


# --- safe-halt clearing ---


def test_clear_safe_halt_with_hazards_clear():
    state = ArbitrationState(safe_halt=True)
    cleared = clear_safe_halt(state)
    assert not cleared.safe_halt


def test_clear_safe_halt_refused_while_fall_active():
    state = ArbitrationState(safe_halt=True)
    with pytest.raises(HazardStillActive):
        clear_safe_halt(state, fall=True)


def test_clear_safe_halt_noop_when_not_latched():
    state = ArbitrationState()
    assert clear_safe_halt(state) == state


def test_latch_only_lowered_by_clear():
    state = ArbitrationState(safe_halt=True)
    for t in range(0, 2000, TICK_MS):
        mode, _, state = arbitrate(ControlInputs(timestamp=t), state)
        assert state.safe_halt
        assert mode is ModeId.STOP
    state = clear_safe_halt(state)
    assert not state.safe_halt


# --- manual mode selection ---


def test_manual_exclusive_voice_blocks_joystick():
    state = select_mode(state_with_debounce(True, now=100), ModeId.VOICE)
    mode, _, _ = arbitrate(ControlInputs(joy_speed=900, timestamp=100), state)
    assert mode is ModeId.STOP


def test_manual_exclusive_selected_rung_still_needs_trigger():
    state = select_mode(ArbitrationState(last_tick_ms=0), ModeId.VOICE)
    mode, command, _ = arbitrate(
        ControlInputs(voice_ready=True, voice_command=MotionDirection.FORWARD, timestamp=20), state
    )
    assert mode is ModeId.VOICE
    assert command.direction is MotionDirection.FORWARD


def test_auto_ladder_restores_full_behavior():
    state = select_mode(ArbitrationState(), ModeId.GESTURE)
    state = select_mode(state, AUTO_LADDER)
    assert state.selected_mode is None
    state = ArbitrationState(debounce_first_seen_ms=100 - 400, last_tick_ms=100 - TICK_MS)
    mode, _, _ = arbitrate(ControlInputs(joy_speed=900, timestamp=100), state)
    assert mode is ModeId.JOYSTICK


def test_manual_selection_does_not_clear_latch():
    state = ArbitrationState(safe_halt=True)
    state = select_mode(state, ModeId.GESTURE)
    assert state.safe_halt
    mode, _, _ = arbitrate(ControlInputs(gesture_ok=True, timestamp=20), state)
    assert mode is ModeId.STOP


def test_select_mode_rejects_stop_button():
    with pytest.raises(ValueError):
        select_mode(ArbitrationState(), ModeId.STOP)


# --- priority order against the 16-case eligibility truth table ---

RUNG_ORDER = (ModeId.JOYSTICK, ModeId.VOICE, ModeId.GESTURE, ModeId.EOG)


@pytest.mark.parametrize("mask", range(16))
def test_priority_order_truth_table(mask):
    joy, voice, gesture, eog = (bool(mask & (1 << k)) for k in range(4))
    inputs = ControlInputs(
        joy_speed=400 if joy else 0,
        voice_ready=voice,
        gesture_ok=gesture,
        eog_angle=30.0 if eog else 0.0,
        timestamp=10_000,
    )
    state = state_with_debounce(True, now=10_000)
    mode, _, _ = arbitrate(inputs, state)
    eligible = [m for m, active in zip(RUNG_ORDER, (joy, voice, gesture, eog)) if active]
    assert mode ==(eligible[0] if eligible else ModeId.STOP)


# --- properties ---

inputs_strategy = st.builds(
    ControlInputs,
    joy_speed=st.integers(-2048, 2047),
    joy_pressed=st.booleans(),
    voice_ready=st.booleans(),
    voice_command=st.sampled_from([None, MotionDirection.FORWARD, MotionDirection.STOP]),
    gesture_ok=st.booleans(),
    gesture_command=st.sampled_from([None, MotionDirection.LEFT]),
    eog_angle=st.floats(0.0, 90.0, allow_nan=False),
    eog_command=st.sampled_from([None, MotionDirection.RIGHT]),
    fall_flag=st.booleans(),
    health_alert=st.booleans(),
    obstacle_flag=st.booleans(),
    timestamp=st.integers(0, 10**7),
)

state_strategy = st.builds(
    ArbitrationState,
    safe_halt=st.booleans(),
    debounce_first_seen_ms=st.sampled_from([None, 0]),
    selected_mode=st.sampled_from([None, ModeId.JOYSTICK, ModeId.VOICE, ModeId.GESTURE, ModeId.EOG]),
    last_tick_ms=st.just(0),
)


@given(inputs=inputs_strategy, state=state_strategy)
@settings(max_examples=300)
def test_arbitrate_total_and_deterministic(inputs, state):
    first = arbitrate(inputs, state)
    second = arbitrate(inputs, state)
    assert first == second
    mode, command, _ = first
    assert isinstance(mode, ModeId)
    assert 0.0 <= command.speed <= 1.0
    assert (command.direction is MotionDirection.STOP) == (command.speed == 0.0)


@given(inputs=inputs_strategy, state=state_strategy)
@settings(max_examples=300)
def test_hazard_dominance_property(inputs, state):
    if inputs.hazard:
        mode, command, state_out = arbitrate(inputs, state)
        assert mode is ModeId.STOP
        assert command.direction is MotionDirection.STOP
        assert state_out.safe_halt


@given(inputs=inputs_strategy, state=state_strategy)
@settings(max_examples=300)
def test_latch_never_lowered_inside_arbitrate(inputs, state):
    _, _, state_out = arbitrate(inputs, state)
    if state.safe_halt:
        assert state_out.safe_halt


# --- run_loop ---


def idle_source(n, start=0):
    return (ControlInputs(timestamp=start + k * TICK_MS) for k in range(n))


def test_one_second_gives_exactly_50_emissions():
    outputs = list(run_loop(idle_source(50)))
    assert len(outputs) == 50
    assert outputs[0].t_ms == 0
    assert outputs[-1].t_ms == 980


def test_idle_input_all_stop():
    for out in run_loop(idle_source(100)):
        assert out.mode is ModeId.STOP
        assert out.command == STOP_COMMAND


def test_scripted_fall_latches_rest_of_run():
    def source():
        for k in range(50):
            t = k * TICK_MS
            yield ControlInputs(timestamp=t, fall_flag=(t == 400), joy_speed=900)

    outputs = list(run_loop(source()))
    for out in outputs:
        if out.t_ms >= 400:
            assert out.mode is ModeId.STOP, out


def test_missing_snapshot_repeats_then_degrades():
    base = ControlInputs(voice_ready=True, voice_command=MotionDirection.FORWARD, timestamp=0)
    source = [base, None, None, None]
    outputs = list(run_loop(iter(source)))
    assert [o.mode for o in outputs] == [ModeId.VOICE, ModeId.VOICE, ModeId.STOP, ModeId.STOP]


def test_snapshots_per_tick_fills_gaps():
    trace = [ControlInputs(timestamp=0), ControlInputs(timestamp=60)]
    aligned = list(snapshots_per_tick(iter(trace)))
    assert len(aligned) == 4
    assert aligned[0] is not None
    assert aligned[1] is None and aligned[2] is None
    assert aligned[3] is not None


def test_tick_count_scales_with_duration():
    for seconds in (1, 3):
        outputs = list(run_loop(idle_source(50 * seconds)))
        assert len(outputs) == 50 * seconds


def test_inputs_json_round_trip():
    inputs = ControlInputs(
        joy_speed=-300,
        voice_ready=True,
        voice_command=MotionDirection.LEFT,
        eog_angle=14.5,
        timestamp=1240,
    )
    assert inputs_from_json(inputs_to_json(inputs)) == inputs
