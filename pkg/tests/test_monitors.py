import pytest

from hazgate.datafiles import data_path
from hazgate.executive import ExecConfig, Event, LogEntry
from hazgate.model import load_model
from hazgate.monitors import (
    MONITORED_REQUIREMENTS,
    NOT_APPLICABLE,
    SATISFIED,
    VIOLATED,
    evaluate_monitors,
)
from hazgate.scenarios import nominal_timeline
from hazgate.simulate import run_events


@pytest.fixture(scope="module")
def mammobot():
    return load_model(data_path("mammobot.proc"))


@pytest.fixture(scope="module")
def config():
    return ExecConfig.load(data_path("exec_config.json"))


def verdict_map(trace, config):
    return {v.requirement: v for v in evaluate_monitors(trace, config)}


def motion_start_time(events):
    return next(e for e in events if e.payload.get("action") == "motionStart").timestamp


class TestOnNominal:
    def test_nothing_violated_protected(self, mammobot, config):
        trace = run_events(mammobot, config, nominal_timeline(config), enabled=True)
        verdicts = verdict_map(trace, config)
        assert all(v.status != VIOLATED for v in verdicts.values())
        for requirement in ("R1", "R8", "R15", "R16", "R20", "R21", "R24", "R26"):
            assert verdicts[requirement].status == SATISFIED

    def test_nothing_violated_even_unprotected(self, mammobot, config):
        # the nominal script respects every window, so the bare process is clean
        trace = run_events(mammobot, config, nominal_timeline(config), enabled=False)
        verdicts = verdict_map(trace, config)
        assert all(v.status != VIOLATED for v in verdicts.values())

    def test_monitored_set(self):
        assert set(MONITORED_REQUIREMENTS) == {
            "R1", "R8", "R14", "R15", "R16", "R20", "R21", "R23", "R24", "R25", "R26",
        }


class TestStopMonitor:
    def test_unhonoured_stop_flagged(self, mammobot, config):
        events = nominal_timeline(config)
        t = motion_start_time(events) + 50
        timeline = sorted(events + [Event(t, "Patient", "voiceStop")],
                          key=lambda e: e.timestamp)
        unprotected = run_events(mammobot, config, timeline, enabled=False)
        assert verdict_map(unprotected, config)["R14"].status == VIOLATED
        protected = run_events(mammobot, config, timeline, enabled=True)
        assert verdict_map(protected, config)["R14"].status == SATISFIED

    def test_not_applicable_without_stops(self, mammobot, config):
        trace = run_events(mammobot, config, nominal_timeline(config), enabled=True)
        assert verdict_map(trace, config)["R14"].status == NOT_APPLICABLE

    def test_violation_carries_witness(self, mammobot, config):
        events = nominal_timeline(config)
        t = motion_start_time(events) + 50
        timeline = sorted(events + [Event(t, "Patient", "voiceStop")],
                          key=lambda e: e.timestamp)
        verdict = verdict_map(run_events(mammobot, config, timeline, enabled=False), config)["R14"]
        assert verdict.witness is not None
        assert "stop" in verdict.explanation


class TestExposureMonitors:
    def test_ungated_exposure_flagged(self, mammobot, config):
        timeline = [
            Event(10, "Radiographer", "exposureRequest"),
            Event(400, "System", "exposureComplete", {"retake": False}),
        ]
        trace = run_events(mammobot, config, timeline, enabled=False)
        verdicts = verdict_map(trace, config)
        assert verdicts["R24"].status == VIOLATED
        assert "postureValid" in verdicts["R24"].explanation
        assert verdicts["R16"].status == VIOLATED
        assert verdicts["R20"].status == VIOLATED

    def test_orphan_completion_counts_as_firing_when_unprotected(self, mammobot, config):
        timeline = [Event(500, "System", "exposureComplete", {"retake": False})]
        trace = run_events(mammobot, config, timeline, enabled=False)
        assert verdict_map(trace, config)["R24"].status == VIOLATED

    def test_orphan_completion_ignored_when_protected(self, mammobot, config):
        timeline = [Event(500, "System", "exposureComplete", {"retake": False})]
        trace = run_events(mammobot, config, timeline, enabled=True)
        assert verdict_map(trace, config)["R24"].status == NOT_APPLICABLE


class TestWindowMonitor:
    def test_plan_inside_window_flagged(self, mammobot, config):
        events = nominal_timeline(config)
        plan = next(e for e in events if e.payload.get("action") == "planReady")
        posture = next(e for e in events if e.kind == "postureUpdate")
        shift = plan.timestamp - posture.timestamp - 500  # land 500 ms after posture
        timeline = [
            Event(e.timestamp - shift if e is plan else e.timestamp, e.source, e.kind, e.payload)
            for e in events
        ]
        timeline.sort(key=lambda e: e.timestamp)
        unprotected = run_events(mammobot, config, timeline, enabled=False)
        assert verdict_map(unprotected, config)["R21"].status == VIOLATED
        protected = run_events(mammobot, config, timeline, enabled=True)
        assert verdict_map(protected, config)["R21"].status != VIOLATED


class TestRevalidationMonitor:
    def test_movement_then_motion_without_revalidation(self, mammobot, config):
        events = nominal_timeline(config)
        t = motion_start_time(events) - 100
        timeline = sorted(events + [Event(t, "Sensor", "movementDetected")],
                          key=lambda e: e.timestamp)
        unprotected = run_events(mammobot, config, timeline, enabled=False)
        assert verdict_map(unprotected, config)["R23"].status == VIOLATED

    def test_protected_run_revalidates(self, mammobot, config):
        events = nominal_timeline(config)
        t = motion_start_time(events) - 100
        timeline = sorted(events + [Event(t, "Sensor", "movementDetected")],
                          key=lambda e: e.timestamp)
        protected = run_events(mammobot, config, timeline, enabled=True)
        verdicts = verdict_map(protected, config)
        assert verdicts["R23"].status == SATISFIED


class TestSafePostureMonitor:
    def test_abandon_without_compliance_flagged(self, mammobot, config):
        events = nominal_timeline(config)
        t = motion_start_time(events) + 10
        timeline = sorted(events + [Event(t, "Patient", "abandonSession")],
                          key=lambda e: e.timestamp)
        unprotected = run_events(mammobot, config, timeline, enabled=False)
        assert verdict_map(unprotected, config)["R25"].status == VIOLATED
        protected = run_events(mammobot, config, timeline, enabled=True)
        assert verdict_map(protected, config)["R25"].status == SATISFIED

    def test_emergency_release_not_flagged_by_r20(self, mammobot, config):
        events = nominal_timeline(config)
        t = motion_start_time(events) + 10
        timeline = sorted(events + [Event(t, "Patient", "abandonSession")],
                          key=lambda e: e.timestamp)
        protected = run_events(mammobot, config, timeline, enabled=True)
        assert verdict_map(protected, config)["R20"].status != VIOLATED


class TestLogMonitors:
    def test_tampered_log_fails_r8(self, mammobot, config):
        trace = run_events(mammobot, config, nominal_timeline(config), enabled=True)
        trace.log = [e for e in trace.log if e.kind != "confirmation"][:]
        assert verdict_map(trace, config)["R8"].status == VIOLATED

    def test_transition_without_actor_fails_r26(self, mammobot, config):
        trace = run_events(mammobot, config, nominal_timeline(config), enabled=True)
        trace.log.append(LogEntry(trace.log[-1].t, "stageTransition", "", "enter nowhere"))
        assert verdict_map(trace, config)["R26"].status == VIOLATED


class TestDeterminism:
    def test_identical_runs_identical_trace_bytes(self, mammobot, config):
        events = nominal_timeline(config)
        a = run_events(mammobot, config, events, enabled=True).to_jsonl()
        b = run_events(mammobot, config, events, enabled=True).to_jsonl()
        assert a == b
