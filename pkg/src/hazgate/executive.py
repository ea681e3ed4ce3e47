"""Timed safety executive running a process model as an event-driven machine.

The executive interprets a guarded activity diagram: actions rest until
their completion input arrives, decisions branch on tri-state guard values
(undecided blocks progression), and a protective-stop/fault overlay freezes
the workflow anywhere, independent of graph structure.  All time is
simulated milliseconds carried on events; there is no wall-clock dependence.

Safety-critical grants (motion start, X-ray exposure, patient release,
resume after stop) pass through explicit gates over the current state plus
a multi-source confirmation ledger with a freshness window.  Confirmations
are consumed by the grant they enable, so every exposure or motion needs
fresh confirmations of its own.

With ``enabled=False`` the same event stream is interpreted permissively:
stops and faults are logged but not acted upon, gates always allow, and
windows/ledgers are not enforced.  This is the unprotected baseline that
the trace monitors are evaluated against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .model import KIND_ACTION, KIND_DECISION, KIND_FINAL, KIND_INITIAL, ProcessModel, normalize_label

SOURCES = ("Radiographer", "Patient", "Sensor", "System")

EVENT_KINDS = (
    "commandConfirm", "voiceStop", "uiStop", "postureUpdate", "postureUnstable",
    "movementDetected", "motionComplete", "exposureRequest", "exposureComplete",
    "fault", "faultCleared", "assent", "assentWithdrawn", "resumeRequest",
    "abandonSession", "tick",
)

# log entry kinds produced for the four auditable event families (R8)
LOGGABLE_EVENT_FAMILY = {
    "postureUpdate": "postureChange",
    "postureUnstable": "postureChange",
    "movementDetected": "postureChange",
    "voiceStop": "interruption",
    "uiStop": "interruption",
    "fault": "fault",
    "commandConfirm": "confirmation",
    "assent": "confirmation",
}

EXPOSURE_CONDITIONS = (
    "postureValid",
    "stabilizationElapsed",
    "armImmobility",
    "patientAssentFresh",
    "radiographerConfirmFresh",
    "noFault",
    "noInterruption",
    "noRevalidationPending",
)

MOTION_CONDITIONS = (
    "postureValid",
    "noInterruption",
    "noFault",
    "noRevalidationPending",
    "ledgerMotionStart",
)

# which requirement a refusal cites, by failed condition (priority order)
CONDITION_CITES = (
    ("noInterruption", "R14"),
    ("noFault", "R15"),
    ("noRevalidationPending", "R23"),
    ("stabilizationElapsed", "R21"),
    ("ledgerMotionStart", "R20"),
    ("ledgerRelease", "R20"),
    ("ledgerResume", "R20"),
    ("postureValid", "R15"),
    ("armImmobility", "R16"),
    ("patientAssentFresh", "R24"),
    ("radiographerConfirmFresh", "R24"),
    ("atCaptureStage", "R15"),
    ("atMotionStage", "R15"),
    ("motionComplete", "R16"),
    ("noPendingRetake", "R16"),
)


def cite_for(failed: tuple[str, ...]) -> str | None:
    for condition, requirement in CONDITION_CITES:
        if condition in failed:
            return requirement
    return None


class TimestampRegression(ValueError):
    """Event timestamp earlier than the executive clock."""


@dataclass
class ExecConfig:
    stop_latency_budget_ms: int = 100
    stabilization_window_ms: int = 2000
    confirmation_staleness_ms: int = 10_000
    command_response_budget_ms: int = 1000
    max_retakes_per_view: int = 3
    step_cap: int = 10_000
    required_views: tuple[str, ...] = ("CC", "MLO-L", "MLO-R")
    ledger_requirements: dict = field(default_factory=lambda: {
        "motionStart": ("Radiographer",),
        "exposure": ("Radiographer", "Patient"),
        "resume": ("Radiographer", "Patient"),
        "release": ("Radiographer",),
    })

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExecConfig":
        ledger = {
            action: tuple(sources)
            for action, sources in data.get("ledger", cls().ledger_requirements).items()
        }
        base = cls()
        return cls(
            stop_latency_budget_ms=data.get("stop_latency_budget_ms", base.stop_latency_budget_ms),
            stabilization_window_ms=data.get("stabilization_window_ms", base.stabilization_window_ms),
            confirmation_staleness_ms=data.get("confirmation_staleness_ms", base.confirmation_staleness_ms),
            command_response_budget_ms=data.get("command_response_budget_ms", base.command_response_budget_ms),
            max_retakes_per_view=data.get("max_retakes_per_view", base.max_retakes_per_view),
            step_cap=data.get("step_cap", base.step_cap),
            required_views=tuple(data.get("required_views", base.required_views)),
            ledger_requirements=ledger,
        )

    @classmethod
    def load(cls, path) -> "ExecConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def to_json_dict(self) -> dict:
        return {
            "schema_version": "exec-config/1",
            "stop_latency_budget_ms": self.stop_latency_budget_ms,
            "stabilization_window_ms": self.stabilization_window_ms,
            "confirmation_staleness_ms": self.confirmation_staleness_ms,
            "command_response_budget_ms": self.command_response_budget_ms,
            "max_retakes_per_view": self.max_retakes_per_view,
            "step_cap": self.step_cap,
            "required_views": list(self.required_views),
            "ledger": {k: list(v) for k, v in sorted(self.ledger_requirements.items())},
        }


class Event:
    __slots__ = ("timestamp", "source", "kind", "payload")

    def __init__(self, timestamp: int, source: str, kind: str, payload: dict | None = None):
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if source not in SOURCES:
            raise ValueError(f"unknown event source {source!r}")
        self.timestamp = timestamp
        self.source = source
        self.kind = kind
        self.payload = payload or {}

    def __repr__(self):
        return f"Event({self.timestamp}, {self.source}, {self.kind}, {self.payload})"

    def __eq__(self, other):
        return (
            isinstance(other, Event)
            and (self.timestamp, self.source, self.kind, self.payload)
            == (other.timestamp, other.source, other.kind, other.payload)
        )

    def to_json_dict(self) -> dict:
        return {"t": self.timestamp, "source": self.source, "kind": self.kind,
                "payload": self.payload}

    @classmethod
    def from_json_dict(cls, data: dict) -> "Event":
        return cls(data["t"], data["source"], data["kind"], data.get("payload") or {})


class ConfirmationLedger:
    """Multi-source confirmations per safety-critical action, with freshness."""

    __slots__ = ("required", "staleness_ms", "received")

    def __init__(self, required: dict, staleness_ms: int):
        self.required = {k: tuple(v) for k, v in required.items()}
        self.staleness_ms = staleness_ms
        self.received: dict[str, dict[str, int]] = {k: {} for k in self.required}

    def record(self, action: str, source: str, t: int) -> None:
        if action in self.received:
            self.received[action][source] = t

    def fresh(self, action: str, source: str, now: int) -> bool:
        t = self.received.get(action, {}).get(source)
        return t is not None and now - t <= self.staleness_ms

    def missing(self, action: str, now: int) -> list[str]:
        return [s for s in self.required.get(action, ()) if not self.fresh(action, s, now)]

    def satisfied(self, action: str, now: int) -> bool:
        return not self.missing(action, now)

    def consume(self, action: str) -> None:
        if action in self.received:
            self.received[action] = {}

    def withdraw_source(self, source: str) -> None:
        for confirmations in self.received.values():
            confirmations.pop(source, None)

    def copy(self) -> "ConfirmationLedger":
        dup = ConfirmationLedger(self.required, self.staleness_ms)
        dup.received = {k: dict(v) for k, v in self.received.items()}
        return dup


class LogEntry:
    __slots__ = ("t", "kind", "actor", "details")

    def __init__(self, t: int, kind: str, actor: str, details: str):
        self.t = t
        self.kind = kind
        self.actor = actor
        self.details = details

    def __repr__(self):
        return f"LogEntry({self.t}, {self.kind}, {self.actor}, {self.details!r})"

    def to_json_dict(self) -> dict:
        return {"t": self.t, "kind": self.kind, "actor": self.actor, "details": self.details}


class SessionLog:
    """Append-only, timestamp-ordered session log."""

    __slots__ = ("entries",)

    def __init__(self):
        self.entries: list[LogEntry] = []

    def append(self, t: int, kind: str, actor: str, details: str) -> None:
        if self.entries and t < self.entries[-1].t:
            raise ValueError("log timestamps must be non-decreasing")
        self.entries.append(LogEntry(t, kind, actor, details))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(e.to_json_dict(), separators=(",", ":")) + "\n" for e in self.entries
        )


# node roles recognised by the executive, keyed on normalized display label
_NODE_ROLES = {
    "systeminitialisation": "init",
    "identifyprocessstage": "stage",
    "determinepatientposture": "posture",
    "trajectoryplanning": "plan",
    "performarmpositioning": "motion",
    "performpositioningadjustments": "adjust",
    "capturexray": "capture",
    "releasepatient": "release",
}

_GUARD_ROLES = {
    "systemReady": "selfTest",
    "processStageIdentified": "stage",
    "postureDetected": "posture",
    "trajectoryValid": "plan",
    "faultDetected": "fault",
    "interruptionHRI": "interruption",
    "patientOK": "patientOK",
    "adjustmentsNeeded": "adjustments",
    "retakeNeeded": "retake",
    "processDone": "done",
}

STATUS_RUNNING = "running"
STATUS_COMPLETE = "complete"
STATUS_ABANDONED = "abandoned"


class ExecState:
    __slots__ = (
        "current_node", "clock",
        # condition flags
        "system_ready", "posture_valid", "trajectory_valid", "arm_moving",
        "exposure_locked", "interruption_active", "fault_active",
        "revalidation_required", "compliance_mode",
        # timers / session data
        "posture_stable_since", "patient_last_assent", "patient_not_ok",
        "views_acquired", "retake_count", "current_view",
        # workflow progression inputs (tri-state; None = undecided)
        "self_test_result", "stage_result", "posture_result", "plan_result",
        "adjustments_result", "retake_result", "generic_decisions",
        "motion_done", "generic_advance",
        # overlays
        "exposure_in_progress", "awaiting_resume", "session_status",
        "ledger", "log", "step_count",
    )

    def __init__(self, initial_node: str, ledger: ConfirmationLedger):
        self.current_node = initial_node
        self.clock = 0
        self.system_ready = False
        self.posture_valid = False
        self.trajectory_valid = False
        self.arm_moving = False
        self.exposure_locked = True
        self.interruption_active = False
        self.fault_active = False
        self.revalidation_required = False
        self.compliance_mode = False
        self.posture_stable_since = None
        self.patient_last_assent = None
        self.patient_not_ok = False
        self.views_acquired: set[str] = set()
        self.retake_count: dict[str, int] = {}
        self.current_view = None
        self.self_test_result = None
        self.stage_result = None
        self.posture_result = None
        self.plan_result = None
        self.adjustments_result = None
        self.retake_result = None
        self.generic_decisions: dict[str, bool] = {}
        self.motion_done = False
        self.generic_advance = False
        self.exposure_in_progress = False
        self.awaiting_resume = False
        self.session_status = STATUS_RUNNING
        self.ledger = ledger
        self.log = SessionLog()
        self.step_count = 0

    def assent_fresh(self, now: int, staleness_ms: int) -> bool:
        return (
            self.patient_last_assent is not None
            and now - self.patient_last_assent <= staleness_ms
        )

    def snapshot(self) -> tuple:
        """Cheap immutable view of everything the trace monitors evaluate."""
        return (
            self.clock, self.current_node, self.arm_moving, self.posture_valid,
            self.trajectory_valid, self.posture_stable_since, self.fault_active,
            self.interruption_active, self.revalidation_required,
            self.compliance_mode, self.exposure_in_progress,
            self.patient_last_assent,
            self.ledger.received.get("exposure", {}).get("Radiographer"),
            frozenset(self.views_acquired), self.session_status,
        )


# snapshot tuple indices, for monitors
SNAP_CLOCK = 0
SNAP_NODE = 1
SNAP_ARM_MOVING = 2
SNAP_POSTURE_VALID = 3
SNAP_TRAJECTORY_VALID = 4
SNAP_STABLE_SINCE = 5
SNAP_FAULT = 6
SNAP_INTERRUPTION = 7
SNAP_REVALIDATION = 8
SNAP_COMPLIANCE = 9
SNAP_EXPOSURE_IN_PROGRESS = 10
SNAP_LAST_ASSENT = 11
SNAP_R_CONFIRM_EXPOSURE = 12
SNAP_VIEWS = 13
SNAP_STATUS = 14


@dataclass(frozen=True)
class GateDecision:
    allowed: bool
    failed: tuple[str, ...] = ()


def stabilization_elapsed(state: ExecState, now: int, config: ExecConfig) -> bool:
    """Closed bound: exactly `window` ms of stability counts as elapsed."""
    since = state.posture_stable_since
    return since is not None and now - since >= config.stabilization_window_ms


def gate_exposure(state: ExecState, config: ExecConfig, now: int | None = None) -> GateDecision:
    """Pure conjunction of the eight exposure interlock conditions."""
    t = state.clock if now is None else now
    failed = []
    if not state.posture_valid:
        failed.append("postureValid")
    if not stabilization_elapsed(state, t, config):
        failed.append("stabilizationElapsed")
    if state.arm_moving:
        failed.append("armImmobility")
    if not state.ledger.fresh("exposure", "Patient", t):
        failed.append("patientAssentFresh")
    if not state.ledger.fresh("exposure", "Radiographer", t):
        failed.append("radiographerConfirmFresh")
    if state.fault_active:
        failed.append("noFault")
    if state.interruption_active:
        failed.append("noInterruption")
    if state.revalidation_required:
        failed.append("noRevalidationPending")
    return GateDecision(not failed, tuple(failed))


def gate_motion(state: ExecState, config: ExecConfig, now: int | None = None) -> GateDecision:
    """Pure conjunction of the five motion-enable conditions."""
    t = state.clock if now is None else now
    failed = []
    if not state.posture_valid:
        failed.append("postureValid")
    if state.interruption_active:
        failed.append("noInterruption")
    if state.fault_active:
        failed.append("noFault")
    if state.revalidation_required:
        failed.append("noRevalidationPending")
    if not state.ledger.satisfied("motionStart", t):
        failed.append("ledgerMotionStart")
    return GateDecision(not failed, tuple(failed))


@dataclass(frozen=True)
class StepVerdict:
    kind: str  # granted | refused | ignored | forced-abandon
    subject: str
    requirement: str | None = None
    detail: str = ""


@dataclass
class StepResult:
    state: ExecState
    emitted: list[str]
    verdicts: list[StepVerdict]


class SafetyExecutive:
    """Event interpreter for one session over one process model."""

    def __init__(self, model: ProcessModel, config: ExecConfig, enabled: bool = True):
        self.model = model
        self.config = config
        self.enabled = enabled
        self.transition_hook = None  # callable(node_id, clock); tests/sweeps only
        self._nodes = {n.id: n for n in model.nodes}
        self._roles = {
            n.id: _NODE_ROLES.get(normalize_label(n.label), "generic")
            for n in model.nodes
        }
        self._edges_true: dict[str, str] = {}
        self._edges_false: dict[str, str] = {}
        self._edge_plain: dict[str, str] = {}
        for e in model.edges:
            if e.guard_value is True:
                self._edges_true[e.src] = e.dst
            elif e.guard_value is False:
                self._edges_false[e.src] = e.dst
            else:
                self._edge_plain[e.src] = e.dst
        self._role_nodes = {role: nid for nid, role in self._roles.items() if role != "generic"}

    # -- lifecycle ----------------------------------------------------------

    def init_state(self) -> ExecState:
        ledger = ConfirmationLedger(
            self.config.ledger_requirements, self.config.confirmation_staleness_ms
        )
        state = ExecState(self.model.initial, ledger)
        # construction-time settle onto the first action is not a session step
        self._progress(state, [], [])
        state.log = SessionLog()
        return state

    # -- helpers ------------------------------------------------------------

    def _role(self, node_id: str) -> str:
        return self._roles.get(node_id, "generic")

    def _frozen(self, state: ExecState) -> bool:
        return self.enabled and (
            state.interruption_active or state.fault_active or state.awaiting_resume
        )

    def _halt_motion(self, state: ExecState, emitted: list[str]) -> None:
        if state.arm_moving:
            state.arm_moving = False
            emitted.append("halt-motion")
            state.log.append(state.clock, "motion", "System", "halted")

    def _abort_exposure(self, state: ExecState, emitted: list[str]) -> None:
        if state.exposure_in_progress:
            state.exposure_in_progress = False
            state.exposure_locked = True
            emitted.append("abort-exposure")
            state.log.append(state.clock, "exposure", "System", "aborted")

    def _next_view(self, state: ExecState) -> str:
        for view in self.config.required_views:
            if view not in state.views_acquired:
                return view
        return self.config.required_views[-1]

    def _rewind_for_revalidation(self, state: ExecState) -> None:
        """Route the workflow back to posture determination (revalidation path)."""
        posture_node = self._role_nodes.get("posture")
        if posture_node is None:
            return
        if self._role(state.current_node) in ("init", "stage", "posture"):
            return
        state.current_node = posture_node
        state.posture_result = None
        state.plan_result = None
        state.adjustments_result = None
        state.retake_result = None
        state.motion_done = False
        node = self._nodes[posture_node]
        state.log.append(state.clock, "stageTransition", node.actor_mode or "A",
                         f"enter {posture_node} (revalidation)")

    def _invalidate_for_revalidation(self, state: ExecState) -> None:
        state.revalidation_required = True
        state.posture_valid = False
        state.trajectory_valid = False
        state.posture_stable_since = None

    def _maybe_complete_revalidation(self, state: ExecState) -> None:
        if (
            state.revalidation_required
            and state.posture_valid
            and state.trajectory_valid
            and state.assent_fresh(state.clock, self.config.confirmation_staleness_ms)
        ):
            state.revalidation_required = False
            state.log.append(state.clock, "revalidation", "System",
                             "posture, trajectory and readiness revalidated")

    # -- gates & grants -----------------------------------------------------

    def _try_start_motion(self, state: ExecState, emitted, verdicts) -> None:
        at_motion_node = self._role(state.current_node) in ("motion", "adjust")
        if self.enabled:
            decision = gate_motion(state, self.config)
            failed = list(decision.failed)
            if not at_motion_node:
                failed.append("atMotionStage")
            if failed:
                requirement = cite_for(tuple(failed))
                verdicts.append(StepVerdict("refused", "motionStart", requirement,
                                            "failed: " + ",".join(failed)))
                state.log.append(state.clock, "refusal", "System",
                                 "motionStart: " + ",".join(failed))
                return
        state.arm_moving = True
        state.ledger.consume("motionStart")
        emitted.append("start-motion")
        verdicts.append(StepVerdict("granted", "motionStart"))
        state.log.append(state.clock, "motion", "System", "started")

    def _try_fire_exposure(self, state: ExecState, emitted, verdicts) -> None:
        if state.exposure_in_progress:
            verdicts.append(StepVerdict("ignored", "exposureRequest", detail="already in progress"))
            return
        at_capture = self._role(state.current_node) == "capture"
        if self.enabled:
            decision = gate_exposure(state, self.config)
            failed = list(decision.failed)
            if not at_capture:
                failed.append("atCaptureStage")
            if failed:
                requirement = cite_for(tuple(failed)) or "R24"
                verdicts.append(StepVerdict("refused", "exposureRequest", requirement,
                                            "failed: " + ",".join(failed)))
                state.log.append(state.clock, "refusal", "System",
                                 "exposure: " + ",".join(failed))
                return
        state.exposure_locked = False
        state.exposure_in_progress = True
        state.ledger.consume("exposure")
        emitted.append("fire-exposure")
        verdicts.append(StepVerdict("granted", "exposureRequest"))
        state.log.append(state.clock, "exposure", "System", "granted")

    def _try_release(self, state: ExecState, emitted, verdicts, safe_path: bool = False) -> bool:
        """Compliance-mode transition; gated unless taken as the safe path."""
        if state.compliance_mode:
            verdicts.append(StepVerdict("ignored", "release", detail="already compliant"))
            return True
        if self.enabled and not safe_path:
            failed = []
            if state.arm_moving:
                failed.append("motionComplete")
            if state.retake_result is True:
                failed.append("noPendingRetake")
            if self._role(state.current_node) != "release":
                failed.append("atReleaseStage")
            if not state.ledger.satisfied("release", state.clock):
                failed.append("ledgerRelease")
            if failed:
                requirement = cite_for(tuple(failed)) or "R25"
                verdicts.append(StepVerdict("refused", "release", requirement,
                                            "failed: " + ",".join(failed)))
                state.log.append(state.clock, "refusal", "System",
                                 "release: " + ",".join(failed))
                return False
        state.arm_moving = False
        state.compliance_mode = True
        state.ledger.consume("release")
        emitted.append("enter-compliance")
        verdicts.append(StepVerdict("granted", "release"))
        state.log.append(state.clock, "release", "System",
                         "compliant safe posture" + (" (safe path)" if safe_path else ""))
        return True

    # -- public operations (spec surface) -----------------------------------

    def request_protective_stop(self, state: ExecState, source: str, t: int) -> ExecState:
        kind = "voiceStop" if source == "Patient" else "uiStop"
        self.handle_event(state, Event(t, source, kind))
        return state

    def resume_after_stop(self, state: ExecState, confirmations: list[tuple[str, int]]) -> StepResult:
        for source, t in confirmations:
            self.handle_event(state, Event(t, source, "commandConfirm", {"action": "resume"}))
        t = max((t for _, t in confirmations), default=state.clock)
        return self.handle_event(state, Event(t, "Radiographer", "resumeRequest"))

    def release_patient(self, state: ExecState) -> StepResult:
        emitted: list[str] = []
        verdicts: list[StepVerdict] = []
        safe_path = state.session_status == STATUS_ABANDONED or state.fault_active
        self._try_release(state, emitted, verdicts, safe_path=safe_path)
        self._progress(state, emitted, verdicts)
        return StepResult(state, emitted, verdicts)

    def close_out(self, state: ExecState) -> StepResult:
        """End-of-stream safety close: safe-posture if ending non-nominally."""
        emitted: list[str] = []
        verdicts: list[StepVerdict] = []
        if self.enabled and state.session_status != STATUS_COMPLETE and not state.compliance_mode:
            if state.fault_active or state.interruption_active or state.awaiting_resume \
                    or state.session_status == STATUS_ABANDONED:
                self._halt_motion(state, emitted)
                self._try_release(state, emitted, verdicts, safe_path=True)
        return StepResult(state, emitted, verdicts)

    # -- event dispatch ------------------------------------------------------

    def handle_event(self, state: ExecState, event: Event) -> StepResult:
        if event.timestamp < state.clock:
            raise TimestampRegression(
                f"event at {event.timestamp} behind clock {state.clock}"
            )
        state.clock = event.timestamp
        emitted: list[str] = []
        verdicts: list[StepVerdict] = []
        handler = getattr(self, "_on_" + event.kind)
        handler(state, event, emitted, verdicts)
        self._maybe_complete_revalidation(state)
        self._progress(state, emitted, verdicts)
        return StepResult(state, emitted, verdicts)

    # individual event handlers; each logs per the R8 family mapping

    def _on_tick(self, state, event, emitted, verdicts):
        pass

    def _on_commandConfirm(self, state, event, emitted, verdicts):
        action = event.payload.get("action", "")
        state.log.append(state.clock, "confirmation", event.source, action or "unspecified")
        if action in state.ledger.required and event.source in state.ledger.required[action]:
            state.ledger.record(action, event.source, state.clock)

        if action == "selfTest":
            ready = bool(event.payload.get("ready", True))
            state.self_test_result = ready
            state.system_ready = ready
        elif action == "stageIdentified":
            identified = bool(event.payload.get("identified", True))
            state.stage_result = identified
            if identified:
                view = event.payload.get("view") or self._next_view(state)
                if view in self.config.required_views:
                    state.current_view = view
                else:
                    state.stage_result = False
                    verdicts.append(StepVerdict("ignored", "stageIdentified",
                                                detail=f"unknown view {view!r}"))
        elif action == "planReady":
            valid = bool(event.payload.get("valid", True))
            if not valid:
                state.plan_result = False
                return
            if self.enabled and self._frozen(state):
                verdicts.append(StepVerdict("refused", "planReady", "R14", "stopped"))
                state.log.append(state.clock, "refusal", "System", "planReady: stopped")
                return
            if self.enabled and not stabilization_elapsed(state, state.clock, self.config):
                verdicts.append(StepVerdict("refused", "planReady", "R21",
                                            "stabilization window not elapsed"))
                state.log.append(state.clock, "refusal", "System",
                                 "planReady: stabilizationElapsed")
                return
            state.plan_result = True
            state.trajectory_valid = True
            emitted.append("plan-accepted")
            state.log.append(state.clock, "plan", "System", "accepted")
        elif action == "motionStart":
            if self.enabled and self._frozen(state):
                verdicts.append(StepVerdict("refused", "motionStart", "R14", "stopped"))
                state.log.append(state.clock, "refusal", "System", "motionStart: stopped")
                return
            if state.arm_moving:
                verdicts.append(StepVerdict("ignored", "motionStart", detail="already moving"))
                return
            self._try_start_motion(state, emitted, verdicts)
        elif action == "adjustments":
            state.adjustments_result = bool(event.payload.get("needed", False))
        elif action == "release":
            safe = state.session_status == STATUS_ABANDONED or (
                self.enabled and state.fault_active
            )
            if self.enabled and self._frozen(state) and not safe:
                verdicts.append(StepVerdict("refused", "release", "R14", "stopped"))
                state.log.append(state.clock, "refusal", "System", "release: stopped")
                return
            self._try_release(state, emitted, verdicts, safe_path=safe)
        elif action == "decide":
            name = event.payload.get("guard")
            if name:
                state.generic_decisions[name] = bool(event.payload.get("value", True))
        elif action == "advance":
            state.generic_advance = True
        elif action in ("exposure", "resume"):
            pass  # ledger-only confirmations
        else:
            verdicts.append(StepVerdict("ignored", f"commandConfirm:{action}"))

    def _on_postureUpdate(self, state, event, emitted, verdicts):
        valid = bool(event.payload.get("valid", True))
        state.log.append(state.clock, "postureChange", event.source,
                         "detected valid" if valid else "detected invalid")
        state.posture_result = valid
        state.posture_valid = valid
        state.posture_stable_since = state.clock if valid else None
        if self.enabled and state.arm_moving and not valid:
            self._halt_motion(state, emitted)

    def _on_postureUnstable(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "postureChange", event.source, "unstable")
        state.posture_stable_since = None
        if self.enabled and state.arm_moving:
            self._halt_motion(state, emitted)

    def _on_movementDetected(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "postureChange", event.source, "unexpected movement")
        if not self.enabled:
            return
        self._halt_motion(state, emitted)
        self._invalidate_for_revalidation(state)
        self._rewind_for_revalidation(state)
        emitted.append("revalidation-required")

    def _on_motionComplete(self, state, event, emitted, verdicts):
        if not state.arm_moving:
            verdicts.append(StepVerdict("ignored", "motionComplete", detail="no motion active"))
            return
        state.arm_moving = False
        state.motion_done = True
        state.posture_stable_since = state.clock  # repositioned: window restarts
        state.log.append(state.clock, "motion", "System", "complete")

    def _on_exposureRequest(self, state, event, emitted, verdicts):
        if self.enabled and self._frozen(state):
            verdicts.append(StepVerdict("refused", "exposureRequest", "R14", "stopped"))
            state.log.append(state.clock, "refusal", "System", "exposure: stopped")
            return
        self._try_fire_exposure(state, emitted, verdicts)

    def _on_exposureComplete(self, state, event, emitted, verdicts):
        if not state.exposure_in_progress:
            if self.enabled:
                verdicts.append(StepVerdict("ignored", "exposureComplete",
                                            detail="no exposure in progress"))
                return
            # unprotected: an orphan completion is a spontaneous exposure
            state.log.append(state.clock, "exposure", "System", "granted")
        retake = bool(event.payload.get("retake", False))
        state.exposure_in_progress = False
        state.exposure_locked = True
        state.retake_result = retake
        view = state.current_view or self._next_view(state)
        if retake:
            state.retake_count[view] = state.retake_count.get(view, 0) + 1
        else:
            state.views_acquired.add(view)
        state.log.append(state.clock, "exposure", "System",
                         f"complete view={view} retake={'yes' if retake else 'no'}")

    def _on_fault(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "fault", event.source,
                         event.payload.get("detail", "fault raised"))
        if not self.enabled:
            return
        state.fault_active = True
        state.posture_stable_since = None  # stability unknown after any halt
        self._halt_motion(state, emitted)
        self._abort_exposure(state, emitted)
        emitted.append("fault-latched")

    def _on_faultCleared(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "faultCleared", event.source, "fault cleared")
        if not self.enabled or not state.fault_active:
            return
        state.fault_active = False
        state.awaiting_resume = True
        emitted.append("await-resume")

    def _stop(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "interruption", event.source,
                         f"protective stop via {event.kind}")
        if not self.enabled:
            return
        state.interruption_active = True
        state.posture_stable_since = None  # stability unknown after any halt
        self._halt_motion(state, emitted)
        self._abort_exposure(state, emitted)
        emitted.append("protective-stop")

    _on_voiceStop = _stop
    _on_uiStop = _stop

    def _on_resumeRequest(self, state, event, emitted, verdicts):
        if not self.enabled:
            return
        if not (state.interruption_active or state.awaiting_resume):
            verdicts.append(StepVerdict("ignored", "resumeRequest", detail="not stopped"))
            return
        missing = state.ledger.missing("resume", state.clock)
        if missing:
            verdicts.append(StepVerdict("refused", "resumeRequest", "R20",
                                        "missing fresh confirmations: " + ",".join(missing)))
            state.log.append(state.clock, "refusal", "System",
                             "resume: " + ",".join(missing))
            return
        state.interruption_active = False
        state.awaiting_resume = False
        state.ledger.consume("resume")
        self._invalidate_for_revalidation(state)
        self._rewind_for_revalidation(state)
        state.log.append(state.clock, "resume", "System", "resumed after stop")
        emitted.append("resume")

    def _on_assent(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "confirmation", event.source, "assent")
        state.patient_last_assent = state.clock
        state.patient_not_ok = False
        for action, sources in state.ledger.required.items():
            if "Patient" in sources:
                state.ledger.record(action, "Patient", state.clock)

    def _on_assentWithdrawn(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "withdrawal", event.source, "assent withdrawn")
        state.patient_last_assent = None
        state.patient_not_ok = True
        state.ledger.withdraw_source("Patient")

    def _on_abandonSession(self, state, event, emitted, verdicts):
        state.log.append(state.clock, "abandon", event.source, "session abandoned")
        if not self.enabled:
            return
        state.session_status = STATUS_ABANDONED
        self._halt_motion(state, emitted)
        self._abort_exposure(state, emitted)
        release_node = self._role_nodes.get("release")
        if release_node is not None:
            state.current_node = release_node
        self._try_release(state, emitted, verdicts, safe_path=True)

    # -- graph progression ----------------------------------------------------

    def _action_complete(self, state: ExecState, node_id: str) -> bool:
        role = self._role(node_id)
        if role == "init":
            return state.self_test_result is not None
        if role == "stage":
            return state.stage_result is not None
        if role == "posture":
            return state.posture_result is not None
        if role == "plan":
            return state.plan_result is not None
        if role in ("motion", "adjust"):
            return state.motion_done
        if role == "capture":
            return state.retake_result is not None
        if role == "release":
            return state.compliance_mode
        return state.generic_advance

    def _guard_value(self, state: ExecState, guard: str) -> bool | None:
        role = _GUARD_ROLES.get(guard)
        if role == "selfTest":
            return state.self_test_result
        if role == "stage":
            return state.stage_result
        if role == "posture":
            return state.posture_result
        if role == "plan":
            return state.plan_result
        if role == "fault":
            return state.fault_active
        if role == "interruption":
            return state.interruption_active
        if role == "patientOK":
            if state.patient_not_ok:
                return False
            if state.assent_fresh(state.clock, self.config.confirmation_staleness_ms):
                return True
            return True if not self.enabled else None
        if role == "adjustments":
            if state.adjustments_result is None and not self.enabled:
                return False
            return state.adjustments_result
        if role == "retake":
            return state.retake_result
        if role == "done":
            return set(self.config.required_views) <= state.views_acquired
        return state.generic_decisions.get(guard)

    def _consume_guard(self, state: ExecState, guard: str) -> None:
        role = _GUARD_ROLES.get(guard)
        if role == "selfTest":
            state.self_test_result = None
        elif role == "stage":
            state.stage_result = None
        elif role == "posture":
            state.posture_result = None
        elif role == "plan":
            state.plan_result = None
        elif role == "adjustments":
            state.adjustments_result = None
        elif role == "retake":
            state.retake_result = None
        elif role is None:
            state.generic_decisions.pop(guard, None)

    def _enter(self, state: ExecState, node_id: str, verdicts: list[StepVerdict]) -> None:
        state.current_node = node_id
        node = self._nodes[node_id]
        if self.transition_hook is not None:
            self.transition_hook(node_id, state.clock)
        if node.kind == KIND_ACTION:
            role = self._role(node_id)
            if role in ("motion", "adjust"):
                state.motion_done = False
            state.generic_advance = False
            state.log.append(state.clock, "stageTransition", node.actor_mode or "A",
                             f"enter {node_id}")
        elif node.kind == KIND_FINAL:
            if state.session_status == STATUS_RUNNING:
                state.session_status = STATUS_COMPLETE
            state.log.append(state.clock, "sessionComplete", "System",
                             f"workflow closed ({state.session_status})")

    def _progress(self, state: ExecState, emitted: list[str], verdicts: list[StepVerdict]) -> None:
        if self._frozen(state):
            return
        steps = 0
        while steps < self.config.step_cap:
            steps += 1
            node = self._nodes[state.current_node]
            if node.kind == KIND_INITIAL:
                nxt = self._edge_plain.get(node.id)
                if nxt is None:
                    return
                self._enter(state, nxt, verdicts)
                continue
            if node.kind == KIND_FINAL:
                return
            if node.kind == KIND_ACTION:
                if not self._action_complete(state, node.id):
                    return
                nxt = self._edge_plain.get(node.id)
                if nxt is None:
                    return
                self._enter(state, nxt, verdicts)
                continue
            # decision
            value = self._guard_value(state, node.guard)
            if value is None:
                return
            if (
                _GUARD_ROLES.get(node.guard) == "retake"
                and value
                and state.retake_count.get(state.current_view or "", 0)
                > self.config.max_retakes_per_view
            ):
                self._consume_guard(state, node.guard)
                verdicts.append(StepVerdict(
                    "forced-abandon", "retakeBound", None,
                    f"retake bound exceeded for {state.current_view}",
                ))
                state.log.append(state.clock, "abandon", "System", "retake bound exceeded")
                state.session_status = STATUS_ABANDONED
                release_node = self._role_nodes.get("release")
                if release_node is not None:
                    self._enter(state, release_node, verdicts)
                    self._try_release(state, emitted, verdicts, safe_path=True)
                return
            self._consume_guard(state, node.guard)
            nxt = self._edges_true[node.id] if value else self._edges_false[node.id]
            self._enter(state, nxt, verdicts)


def init_executive(model: ProcessModel, config: ExecConfig, enabled: bool = True) -> tuple[SafetyExecutive, ExecState]:
    """Build an executive for the model and return it with its initial state."""
    executive = SafetyExecutive(model, config, enabled=enabled)
    return executive, executive.init_state()
