import itertools

import pytest

from hazgate.datafiles import data_path
from hazgate.executive import (
    EXPOSURE_CONDITIONS,
    MOTION_CONDITIONS,
    ExecConfig,
    Event,
    SafetyExecutive,
    TimestampRegression,
    gate_exposure,
    gate_motion,
    init_executive,
    stabilization_elapsed,
)
from hazgate.model import load_model, parse_model
from hazgate.scenarios import nominal_timeline

MINIMAL = """\
process minimal
initial start
final end
action work "Do the work" actor=A
edge start -> work
edge work -> end
"""


@pytest.fixture(scope="module")
def mammobot():
    return load_model(data_path("mammobot.proc"))


@pytest.fixture(scope="module")
def config():
    return ExecConfig.load(data_path("exec_config.json"))


def fresh(mammobot, config, enabled=True):
    return init_executive(mammobot, config, enabled=enabled)


def run_prefix(executive, state, events, until_ms):
    for event in events:
        if event.timestamp > until_ms:
            break
        executive.handle_event(state, event)


class TestInit:
    def test_initial_state(self, mammobot, config):
        _, state = fresh(mammobot, config)
        assert state.current_node == "sys_init"
        assert state.exposure_locked is True
        assert state.system_ready is False
        assert len(state.log) == 0
        assert all(not v for v in state.ledger.received.values())

    def test_zero_stabilization_window_accepted(self, mammobot):
        config = ExecConfig(stabilization_window_ms=0)
        executive, state = init_executive(mammobot, config)
        assert executive.config.stabilization_window_ms == 0
        assert state.current_node == "sys_init"

    def test_minimal_model(self, config):
        _, state = init_executive(parse_model(MINIMAL), config)
        assert state.current_node == "work"


class TestNominalSession:
    def test_three_views_acquired(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        for event in nominal_timeline(config):
            executive.handle_event(state, event)
        assert state.session_status == "complete"
        assert state.current_node == mammobot.final
        assert state.views_acquired == {"CC", "MLO-L", "MLO-R"}
        assert state.compliance_mode is True

    def test_no_refusals_on_nominal_path(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        refusals = []
        for event in nominal_timeline(config):
            result = executive.handle_event(state, event)
            refusals += [v for v in result.verdicts if v.kind == "refused"]
        assert refusals == []

    def test_retake_loop(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        for event in nominal_timeline(config, retakes={"CC": 1}):
            executive.handle_event(state, event)
        assert state.session_status == "complete"
        assert state.retake_count == {"CC": 1}

    def test_timestamp_regression_rejected(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        executive.handle_event(state, Event(500, "System", "tick"))
        with pytest.raises(TimestampRegression):
            executive.handle_event(state, Event(100, "System", "tick"))

    def test_meaningless_event_is_ignored_not_crash(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        result = executive.handle_event(state, Event(0, "System", "motionComplete"))
        assert [v.kind for v in result.verdicts] == ["ignored"]


class TestExposureGate:
    def _state_with(self, mammobot, config, failing=()):
        """All eight conjuncts satisfied, then break the requested ones."""
        _, state = init_executive(mammobot, config)
        now = 10_000
        state.clock = now
        state.posture_valid = True
        state.posture_stable_since = now - config.stabilization_window_ms
        state.arm_moving = False
        state.ledger.record("exposure", "Patient", now - 10)
        state.ledger.record("exposure", "Radiographer", now - 10)
        state.fault_active = False
        state.interruption_active = False
        state.revalidation_required = False
        for condition in failing:
            if condition == "postureValid":
                state.posture_valid = False
            elif condition == "stabilizationElapsed":
                state.posture_stable_since = now - config.stabilization_window_ms + 1
            elif condition == "armImmobility":
                state.arm_moving = True
            elif condition == "patientAssentFresh":
                state.ledger.received["exposure"].pop("Patient")
            elif condition == "radiographerConfirmFresh":
                state.ledger.received["exposure"]["Radiographer"] = (
                    now - config.confirmation_staleness_ms - 1
                )
            elif condition == "noFault":
                state.fault_active = True
            elif condition == "noInterruption":
                state.interruption_active = True
            elif condition == "noRevalidationPending":
                state.revalidation_required = True
        return state

    def test_all_satisfied_allows(self, mammobot, config):
        decision = gate_exposure(self._state_with(mammobot, config), config)
        assert decision.allowed and decision.failed == ()

    def test_arm_moving_causes_single_named_failure(self, mammobot, config):
        state = self._state_with(mammobot, config, failing=("armImmobility",))
        decision = gate_exposure(state, config)
        assert not decision.allowed
        assert decision.failed == ("armImmobility",)

    def test_truth_table_exactly_one_allowed(self, mammobot, config):
        """Brute-force 2^8 sweep: the gate must be the pure conjunction."""
        allowed_rows = []
        for bits in itertools.product([False, True], repeat=len(EXPOSURE_CONDITIONS)):
            failing = tuple(
                name for name, ok in zip(EXPOSURE_CONDITIONS, bits) if not ok
            )
            state = self._state_with(mammobot, config, failing=failing)
            decision = gate_exposure(state, config)
            oracle = all(bits)
            assert decision.allowed == oracle, (bits, decision.failed)
            if decision.allowed:
                allowed_rows.append(bits)
            else:
                assert set(decision.failed) == set(failing)
        assert len(allowed_rows) == 1

    def test_gate_is_deterministic(self, mammobot, config):
        state = self._state_with(mammobot, config, failing=("noFault",))
        first = gate_exposure(state, config)
        for _ in range(50):
            assert gate_exposure(state, config) == first


class TestMotionGate:
    def _state_with(self, mammobot, config, failing=()):
        _, state = init_executive(mammobot, config)
        now = 10_000
        state.clock = now
        state.posture_valid = True
        state.ledger.record("motionStart", "Radiographer", now - 10)
        for condition in failing:
            if condition == "postureValid":
                state.posture_valid = False
            elif condition == "noInterruption":
                state.interruption_active = True
            elif condition == "noFault":
                state.fault_active = True
            elif condition == "noRevalidationPending":
                state.revalidation_required = True
            elif condition == "ledgerMotionStart":
                state.ledger.consume("motionStart")
        return state

    def test_truth_table_exactly_one_allowed(self, mammobot, config):
        allowed = 0
        for bits in itertools.product([False, True], repeat=len(MOTION_CONDITIONS)):
            failing = tuple(
                name for name, ok in zip(MOTION_CONDITIONS, bits) if not ok
            )
            state = self._state_with(mammobot, config, failing=failing)
            decision = gate_motion(state, config)
            assert decision.allowed == all(bits)
            allowed += decision.allowed
        assert allowed == 1

    def test_revalidation_refusal_cites_r23(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        run_prefix(executive, state, nominal_timeline(config), 10_000)
        state.revalidation_required = True
        result = executive.handle_event(
            state, Event(state.clock + 1, "Radiographer", "commandConfirm",
                         {"action": "motionStart"})
        )
        refused = [v for v in result.verdicts if v.kind == "refused"]
        assert refused and refused[0].requirement == "R23"


class TestStabilization:
    def test_window_elapsed(self, mammobot, config):
        _, state = init_executive(mammobot, config)
        state.posture_stable_since = 1000
        assert stabilization_elapsed(state, 1000 + 2500, ExecConfig(stabilization_window_ms=2000))

    def test_unset_is_false(self, mammobot, config):
        _, state = init_executive(mammobot, config)
        state.posture_stable_since = None
        assert not stabilization_elapsed(state, 99_999, config)

    def test_closed_boundary(self, mammobot):
        config = ExecConfig(stabilization_window_ms=2000)
        _, state = init_executive(load_model(data_path("mammobot.proc")), config)
        state.posture_stable_since = 5000
        assert not stabilization_elapsed(state, 5000 + 1999, config)
        assert stabilization_elapsed(state, 5000 + 2000, config)  # exactly the window
        assert stabilization_elapsed(state, 5000 + 2001, config)


class TestProtectiveStop:
    def test_stop_mid_motion_halts_immediately(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        events = nominal_timeline(config)
        start = next(e for e in events if e.payload.get("action") == "motionStart")
        run_prefix(executive, state, events, start.timestamp)
        assert state.arm_moving
        t = start.timestamp + 60
        executive.request_protective_stop(state, "Patient", t)
        assert state.interruption_active
        assert not state.arm_moving
        assert state.clock == t  # halt within the same simulated instant

    def test_stop_is_idempotent_with_second_log_entry(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        executive.request_protective_stop(state, "Patient", 100)
        executive.request_protective_stop(state, "Radiographer", 200)
        stops = [e for e in state.log if e.kind == "interruption"]
        assert len(stops) == 2
        assert state.interruption_active

    def test_motion_refused_while_stopped_cites_r14(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        executive.request_protective_stop(state, "Radiographer", 100)
        result = executive.handle_event(
            state, Event(200, "Radiographer", "commandConfirm", {"action": "motionStart"})
        )
        assert any(v.kind == "refused" and v.requirement == "R14" for v in result.verdicts)

    def test_resume_requires_both_sources(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        executive.request_protective_stop(state, "Patient", 100)
        result = executive.resume_after_stop(state, [("Radiographer", 200)])
        assert any(v.kind == "refused" and v.requirement == "R20" for v in result.verdicts)
        assert state.interruption_active

    def test_resume_with_fresh_confirmations_sets_revalidation(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        events = nominal_timeline(config)
        start = next(e for e in events if e.payload.get("action") == "motionStart")
        run_prefix(executive, state, events, start.timestamp)
        executive.request_protective_stop(state, "Patient", start.timestamp + 10)
        result = executive.resume_after_stop(
            state,
            [("Radiographer", start.timestamp + 100), ("Patient", start.timestamp + 150)],
        )
        assert "resume" in result.emitted
        assert not state.interruption_active
        assert state.revalidation_required
        assert state.current_node == "determine_posture"

    def test_stale_confirmations_refused(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        executive.request_protective_stop(state, "Patient", 1000)
        state.ledger.record("resume", "Radiographer", 1000)
        state.ledger.record("resume", "Patient", 1000)
        late = 1000 + config.confirmation_staleness_ms + 1
        result = executive.handle_event(state, Event(late, "Radiographer", "resumeRequest"))
        assert any(v.kind == "refused" for v in result.verdicts)
        assert state.interruption_active


class TestFaultPath:
    def test_fault_mid_motion_halts_and_blocks(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        events = nominal_timeline(config)
        start = next(e for e in events if e.payload.get("action") == "motionStart")
        run_prefix(executive, state, events, start.timestamp)
        result = executive.handle_event(state, Event(start.timestamp + 20, "Sensor", "fault"))
        assert not state.arm_moving
        assert state.fault_active
        assert "halt-motion" in result.emitted
        assert any(e.kind == "fault" for e in state.log)

    def test_fault_clear_still_needs_resume(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        executive.handle_event(state, Event(100, "Sensor", "fault"))
        executive.handle_event(state, Event(200, "System", "faultCleared"))
        assert not state.fault_active
        assert state.awaiting_resume
        result = executive.handle_event(
            state, Event(300, "Radiographer", "commandConfirm", {"action": "motionStart"})
        )
        assert any(v.kind == "refused" and v.requirement == "R14" for v in result.verdicts)


class TestRelease:
    def test_release_during_motion_refused(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        events = nominal_timeline(config)
        start = next(e for e in events if e.payload.get("action") == "motionStart")
        run_prefix(executive, state, events, start.timestamp)
        assert state.arm_moving
        result = executive.handle_event(
            state, Event(start.timestamp + 5, "Radiographer", "commandConfirm",
                         {"action": "release"})
        )
        refused = [v for v in result.verdicts if v.kind == "refused"]
        assert refused and "motionComplete" in refused[0].detail
        assert not state.compliance_mode

    def test_release_after_abandon_takes_safe_path(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        events = nominal_timeline(config)
        start = next(e for e in events if e.payload.get("action") == "motionStart")
        run_prefix(executive, state, events, start.timestamp)
        executive.handle_event(state, Event(start.timestamp + 10, "Patient", "abandonSession"))
        assert state.session_status == "abandoned"
        assert state.compliance_mode
        assert not state.arm_moving
        assert any(e.kind == "release" for e in state.log)

    def test_retake_bound_forces_abandon(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        bound = config.max_retakes_per_view
        events = nominal_timeline(config, retakes={"CC": bound + 1})
        for event in events:
            executive.handle_event(state, event)
        assert state.session_status == "abandoned"
        assert state.compliance_mode
        assert state.retake_count["CC"] == bound + 1


class TestSessionLog:
    def test_every_auditable_event_logged_once(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        events = nominal_timeline(config)
        for event in events:
            executive.handle_event(state, event)
        confirmations = [e for e in events if e.kind in ("commandConfirm", "assent")]
        logged = [e for e in state.log if e.kind == "confirmation"]
        assert len(logged) == len(confirmations)

    def test_timestamps_non_decreasing(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        for event in nominal_timeline(config):
            executive.handle_event(state, event)
        times = [e.t for e in state.log]
        assert times == sorted(times)

    def test_jsonl_export_round_trips(self, mammobot, config):
        import json

        executive, state = fresh(mammobot, config)
        for event in nominal_timeline(config)[:6]:
            executive.handle_event(state, event)
        lines = state.log.to_jsonl().splitlines()
        assert len(lines) == len(state.log)
        parsed = [json.loads(line) for line in lines]
        assert all(list(p) == ["t", "kind", "actor", "details"] for p in parsed)

    def test_stage_transitions_carry_actor(self, mammobot, config):
        executive, state = fresh(mammobot, config)
        for event in nominal_timeline(config):
            executive.handle_event(state, event)
        transitions = [e for e in state.log if e.kind == "stageTransition"]
        assert transitions
        assert all(e.actor in ("A", "M", "SA") for e in transitions)


class TestDisabledExecutive:
    def test_stop_not_enforced(self, mammobot, config):
        executive, state = init_executive(mammobot, config, enabled=False)
        events = nominal_timeline(config)
        start = next(e for e in events if e.payload.get("action") == "motionStart")
        run_prefix(executive, state, events, start.timestamp)
        assert state.arm_moving
        executive.handle_event(state, Event(start.timestamp + 10, "Patient", "voiceStop"))
        assert state.arm_moving  # hazard: stop logged but not honoured
        assert any(e.kind == "interruption" for e in state.log)

    def test_exposure_fires_ungated(self, mammobot, config):
        executive, state = init_executive(mammobot, config, enabled=False)
        result = executive.handle_event(state, Event(5, "Radiographer", "exposureRequest"))
        assert "fire-exposure" in result.emitted

    def test_nominal_still_completes(self, mammobot, config):
        executive, state = init_executive(mammobot, config, enabled=False)
        for event in nominal_timeline(config):
            executive.handle_event(state, event)
        assert state.session_status == "complete"
        assert state.views_acquired == {"CC", "MLO-L", "MLO-R"}
