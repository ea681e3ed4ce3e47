"""Bounded exhaustive reachability over the executive's input space.

Explicit-state search: from the initial state, every stimulus in a bounded
alphabet is applied at every reachable abstract state up to a depth limit.
Time is abstracted so the search stays finite and exact: non-tick stimuli
arrive with zero delay, ticks advance the clock by exactly the stabilization
window, and the confirmation staleness window is stretched beyond reach, so
the window-elapsed/freshness booleans in the abstract state key are exact
functions of the event history.

The unsafe predicate is evaluated independently of the executive's gates:
an exposure firing counts as unsafe when any interlock condition, recomputed
from the raw pre-event state, did not hold.  Every newly discovered state is
optionally cross-checked by replaying its witness path through the plain
scenario runner and comparing both the resulting abstract state and the
exposure-interlock monitor verdict against the search's own classification.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .executive import (
    ConfirmationLedger,
    Event,
    ExecConfig,
    ExecState,
    SafetyExecutive,
    SessionLog,
)
from .model import ProcessModel
from .monitors import VIOLATED, monitor_r24
from .simulate import Trace, TraceStep

REACH_STALENESS_MS = 10**9

# Default alphabet: 8 event kinds; commandConfirm expands over its payload
# actions (the kind, not the payload, is the alphabet unit).
DEFAULT_ALPHABET = (
    "commandConfirm", "postureUpdate", "motionComplete", "exposureRequest",
    "exposureComplete", "assent", "voiceStop", "tick",
)

_CONFIRM_EXPANSIONS = (
    {"action": "selfTest", "ready": True},
    {"action": "stageIdentified"},
    {"action": "planReady", "valid": True},
    {"action": "motionStart"},
    {"action": "exposure"},
    {"action": "adjustments", "needed": False},
    {"action": "release"},
    {"action": "resume"},
)

_KIND_SOURCE = {
    "commandConfirm": "Radiographer",
    "postureUpdate": "Sensor",
    "motionComplete": "System",
    "exposureRequest": "Radiographer",
    "exposureComplete": "System",
    "assent": "Patient",
    "voiceStop": "Patient",
    "uiStop": "Radiographer",
    "movementDetected": "Sensor",
    "postureUnstable": "Sensor",
    "fault": "Sensor",
    "faultCleared": "System",
    "resumeRequest": "Radiographer",
    "abandonSession": "Patient",
    "tick": "System",
}

_KIND_PAYLOADS = {
    "commandConfirm": _CONFIRM_EXPANSIONS,
    "postureUpdate": ({"valid": True},),
    "exposureComplete": ({"retake": False},),
}


def stimuli_for(alphabet) -> list[tuple[str, dict]]:
    out = []
    for kind in alphabet:
        for payload in _KIND_PAYLOADS.get(kind, ({},)):
            out.append((kind, payload))
    return out


def _clone_state(state: ExecState) -> ExecState:
    dup = ExecState.__new__(ExecState)
    for slot in ExecState.__slots__:
        setattr(dup, slot, getattr(state, slot))
    dup.views_acquired = set(state.views_acquired)
    dup.retake_count = dict(state.retake_count)
    dup.generic_decisions = dict(state.generic_decisions)
    dup.ledger = state.ledger.copy()
    dup.log = SessionLog()  # branches keep only their own step's entries
    return dup


def abstract_key(state: ExecState, config: ExecConfig) -> tuple:
    now = state.clock
    ledger_bits = tuple(
        (action, source) in {
            (a, s)
            for a, received in state.ledger.received.items()
            for s in received
        }
        for action in sorted(state.ledger.required)
        for source in state.ledger.required[action]
    )
    stab = (
        state.posture_stable_since is not None
        and now - state.posture_stable_since >= config.stabilization_window_ms
    )
    return (
        state.current_node, state.system_ready, state.posture_valid,
        state.trajectory_valid, state.arm_moving, state.exposure_locked,
        state.exposure_in_progress, state.interruption_active,
        state.fault_active, state.awaiting_resume, state.revalidation_required,
        state.compliance_mode, stab,
        state.patient_last_assent is not None, state.patient_not_ok,
        state.self_test_result, state.stage_result, state.posture_result,
        state.plan_result, state.adjustments_result, state.retake_result,
        state.motion_done, state.session_status, state.current_view,
        frozenset(state.views_acquired),
        tuple(sorted(state.retake_count.items())),
        ledger_bits,
    )


def _exposure_conditions_ok(state: ExecState, now: int, config: ExecConfig) -> list[str]:
    """Independent re-derivation of the interlock; returns failed conditions."""
    failed = []
    if not state.posture_valid:
        failed.append("postureValid")
    since = state.posture_stable_since
    if since is None or now - since < config.stabilization_window_ms:
        failed.append("stabilizationElapsed")
    if state.arm_moving:
        failed.append("armImmobility")
    received = state.ledger.received.get("exposure", {})
    if "Patient" not in received or now - received["Patient"] > config.confirmation_staleness_ms:
        failed.append("patientAssentFresh")
    if "Radiographer" not in received or now - received["Radiographer"] > config.confirmation_staleness_ms:
        failed.append("radiographerConfirmFresh")
    if state.fault_active:
        failed.append("noFault")
    if state.interruption_active:
        failed.append("noInterruption")
    if state.revalidation_required:
        failed.append("noRevalidationPending")
    return failed


@dataclass
class ReachabilityResult:
    unsafe_reachable: bool
    counterexample: list[Event] | None
    states_explored: int
    transitions: int
    depth_reached: int
    complete: bool
    executive_enabled: bool
    alphabet: tuple[str, ...]
    unsafe_detail: str = ""
    cross_checked: int = 0
    cross_check_disagreements: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "reach-report/1",
            "unsafe_reachable": self.unsafe_reachable,
            "counterexample": [e.to_json_dict() for e in self.counterexample]
            if self.counterexample
            else None,
            "states_explored": self.states_explored,
            "transitions": self.transitions,
            "depth_reached": self.depth_reached,
            "complete": self.complete,
            "executive_enabled": self.executive_enabled,
            "alphabet": list(self.alphabet),
            "unsafe_detail": self.unsafe_detail,
            "cross_checked": self.cross_checked,
            "cross_check_disagreements": self.cross_check_disagreements,
        }


def _replay(model: ProcessModel, config: ExecConfig, events, enabled: bool):
    executive = SafetyExecutive(model, config, enabled=enabled)
    state = executive.init_state()
    trace = Trace(executive_enabled=enabled)
    for event in events:
        result = executive.handle_event(state, event)
        trace.steps.append(
            TraceStep(event, state.snapshot(), tuple(result.emitted), tuple(result.verdicts))
        )
    trace.log = list(state.log)
    trace.final_snapshot = state.snapshot()
    trace.final_status = state.session_status
    trace.final_node = state.current_node
    return trace, state


def brute_force_reachability(
    model: ProcessModel,
    config: ExecConfig,
    max_depth: int = 12,
    alphabet=DEFAULT_ALPHABET,
    executive_enabled: bool = True,
    state_budget: int = 1_000_000,
    stop_at_first: bool = True,
    cross_check: bool = True,
) -> ReachabilityResult:
    reach_config = replace(config, confirmation_staleness_ms=REACH_STALENESS_MS)
    executive = SafetyExecutive(model, reach_config, enabled=executive_enabled)
    stimuli = stimuli_for(alphabet)

    initial = executive.init_state()
    visited = {abstract_key(initial, reach_config)}
    # frontier entries: (state, witness path, any unsafe grant along the path)
    frontier: list[tuple[ExecState, list[Event], bool]] = [(initial, [], False)]
    witnesses: list[tuple[list[Event], tuple, bool]] = []

    result = ReachabilityResult(
        unsafe_reachable=False, counterexample=None, states_explored=1,
        transitions=0, depth_reached=0, complete=True,
        executive_enabled=executive_enabled, alphabet=tuple(alphabet),
    )

    depth = 0
    while frontier and depth < max_depth:
        depth += 1
        result.depth_reached = depth
        next_frontier: list[tuple[ExecState, list[Event], bool]] = []
        for state, path, path_unsafe in frontier:
            for kind, payload in stimuli:
                clock = state.clock + (
                    reach_config.stabilization_window_ms if kind == "tick" else 0
                )
                event = Event(clock, _KIND_SOURCE[kind], kind, dict(payload))
                branch = _clone_state(state)
                pre_failed = _exposure_conditions_ok(state, clock, reach_config)
                step = executive.handle_event(branch, event)
                result.transitions += 1

                fired = "fire-exposure" in step.emitted or any(
                    e.kind == "exposure" and e.details == "granted" for e in branch.log
                )
                unsafe = fired and bool(pre_failed)
                if unsafe and not result.unsafe_reachable:
                    result.unsafe_reachable = True
                    result.counterexample = path + [event]
                    result.unsafe_detail = (
                        f"exposure fired at t={clock} with failed conditions: "
                        + ",".join(pre_failed)
                    )
                    if stop_at_first:
                        result.complete = False  # search stopped early by design
                        if cross_check:
                            _cross_check(model, reach_config, executive_enabled,
                                         witnesses + [(path + [event], None, True)], result)
                        return result

                key = abstract_key(branch, reach_config)
                if key in visited:
                    continue
                if len(visited) >= state_budget:
                    result.complete = False
                    break
                visited.add(key)
                next_frontier.append((branch, path + [event], path_unsafe or unsafe))
                witnesses.append((path + [event], key, path_unsafe or unsafe))
            else:
                continue
            break
        result.states_explored = len(visited)
        frontier = next_frontier
        if not result.complete:
            break

    if cross_check:
        _cross_check(model, reach_config, executive_enabled, witnesses, result)
    return result


def _cross_check(model, reach_config, enabled, witnesses, result) -> None:
    """Replay each witness path through the scenario runner and compare."""
    for path, key, unsafe in witnesses:
        if not path:
            continue
        trace, final_state = _replay(model, reach_config, path, enabled)
        result.cross_checked += 1
        if key is not None:
            replay_key = abstract_key(final_state, reach_config)
            if replay_key != key:
                result.cross_check_disagreements.append(
                    f"state mismatch after {[e.kind for e in path]}"
                )
        verdict = monitor_r24(trace, reach_config)
        monitor_unsafe = verdict.status == VIOLATED
        if monitor_unsafe != unsafe:
            result.cross_check_disagreements.append(
                f"verdict mismatch after {[e.kind for e in path]}: "
                f"oracle={'unsafe' if unsafe else 'safe'} monitor={verdict.status}"
            )
