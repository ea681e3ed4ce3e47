"""Requirement monitors evaluated over completed traces.

Monitors never read the executive's gate decisions; they recompute each
requirement's defining condition from the raw material of the trace: the
input events, the per-step state snapshots and the session log.  A monitor
bound to a requirement returns Satisfied, Violated (with a witness index
into the trace) or NotApplicable when the trace never exercises it.

The same monitors run against protected (executive-enabled) and unprotected
traces, which is what makes the hazard-injection comparisons meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

from .executive import (
    LOGGABLE_EVENT_FAMILY,
    SNAP_ARM_MOVING,
    SNAP_CLOCK,
    SNAP_COMPLIANCE,
    SNAP_FAULT,
    SNAP_INTERRUPTION,
    SNAP_LAST_ASSENT,
    SNAP_POSTURE_VALID,
    SNAP_REVALIDATION,
    SNAP_STABLE_SINCE,
    SNAP_TRAJECTORY_VALID,
    ExecConfig,
)

SATISFIED = "Satisfied"
VIOLATED = "Violated"
NOT_APPLICABLE = "NotApplicable"

MONITORED_REQUIREMENTS = (
    "R1", "R8", "R14", "R15", "R16", "R20", "R21", "R23", "R24", "R25", "R26",
)


@dataclass(frozen=True)
class MonitorVerdict:
    requirement: str
    status: str
    witness: int | None = None  # trace step index (or log index for log checks)
    explanation: str = ""


def _verdict(requirement, violations, applicable, none_msg="no applicable activity"):
    if violations:
        index, why = violations[0]
        return MonitorVerdict(requirement, VIOLATED, index,
                              f"{why} (+{len(violations) - 1} more)" if len(violations) > 1 else why)
    if not applicable:
        return MonitorVerdict(requirement, NOT_APPLICABLE, None, none_msg)
    return MonitorVerdict(requirement, SATISFIED)


# -- grant extraction from the trace ----------------------------------------
# A "grant" is the executive actually performing a safety-critical action;
# it is identified by the log record the engine writes in both modes.


def _grants(trace):
    """(step_index, t, kind) for motion starts, exposure firings, releases,
    plan acceptances.  Uses each step's emitted markers plus the disabled-mode
    orphan-exposure log path."""
    out = []
    for i, step in enumerate(trace.steps):
        for marker in step.emitted:
            if marker == "start-motion":
                out.append((i, step.snapshot[SNAP_CLOCK], "motion"))
            elif marker == "fire-exposure":
                out.append((i, step.snapshot[SNAP_CLOCK], "exposure"))
            elif marker == "enter-compliance":
                out.append((i, step.snapshot[SNAP_CLOCK], "release"))
            elif marker == "plan-accepted":
                out.append((i, step.snapshot[SNAP_CLOCK], "plan"))
        if step.event is not None and step.event.kind == "exposureComplete":
            # unprotected runs treat an orphan completion as a firing
            if not any(m == "fire-exposure" for m in step.emitted) and _orphan_exposure(trace, i):
                out.append((i, step.snapshot[SNAP_CLOCK], "exposure"))
    return out


def _orphan_exposure(trace, index) -> bool:
    step = trace.steps[index]
    before = trace.steps[index - 1].snapshot if index else None
    in_progress = before[10] if before else False  # SNAP_EXPOSURE_IN_PROGRESS
    return not in_progress and step.snapshot[SNAP_CLOCK] is not None and not trace.executive_enabled


class _ConfirmationReplay:
    """Monitor-side reconstruction of the confirmation ledger from raw events."""

    def __init__(self, config: ExecConfig):
        self.required = config.ledger_requirements
        self.staleness = config.confirmation_staleness_ms
        self.received: dict[str, dict[str, int]] = {k: {} for k in self.required}

    def feed(self, event) -> None:
        if event is None:
            return
        if event.kind == "commandConfirm":
            action = event.payload.get("action")
            if action in self.required and event.source in self.required[action]:
                self.received[action][event.source] = event.timestamp
        elif event.kind == "assent":
            for action, sources in self.required.items():
                if "Patient" in sources:
                    self.received[action]["Patient"] = event.timestamp
        elif event.kind == "assentWithdrawn":
            for confirmations in self.received.values():
                confirmations.pop("Patient", None)

    def fresh(self, action: str, source: str, now: int) -> bool:
        t = self.received.get(action, {}).get(source)
        return t is not None and now - t <= self.staleness

    def missing(self, action: str, now: int) -> list[str]:
        return [s for s in self.required.get(action, ()) if not self.fresh(action, s, now)]

    def consume(self, action: str) -> None:
        if action in self.received:
            self.received[action] = {}


_GRANT_LEDGER_ACTION = {"motion": "motionStart", "exposure": "exposure", "release": "release"}


def monitor_r1(trace, config: ExecConfig) -> MonitorVerdict:
    """Command response within budget once gates pass (grants are immediate)."""
    violations = []
    grants = [g for g in _grants(trace) if g[2] in ("motion", "exposure", "release")]
    for index, t, kind in grants:
        event = trace.steps[index].event
        if event is None:
            continue
        latency = t - event.timestamp
        if latency > config.command_response_budget_ms:
            violations.append((index, f"{kind} responded {latency} ms after command"))
    return _verdict("R1", violations, grants)


def monitor_r8(trace, config: ExecConfig) -> MonitorVerdict:
    """Log completeness: auditable events appear in the log exactly once."""
    from collections import Counter

    expected = Counter()
    for step in trace.steps:
        if step.event is not None and step.event.kind in LOGGABLE_EVENT_FAMILY:
            expected[LOGGABLE_EVENT_FAMILY[step.event.kind]] += 1
    actual = Counter(e.kind for e in trace.log if e.kind in set(LOGGABLE_EVENT_FAMILY.values()))
    violations = []
    if expected != actual:
        delta = {k: (expected.get(k, 0), actual.get(k, 0))
                 for k in set(expected) | set(actual)
                 if expected.get(k, 0) != actual.get(k, 0)}
        violations.append((0, f"event/log multiset mismatch {delta}"))
    times = [e.t for e in trace.log]
    if times != sorted(times):
        violations.append((0, "log timestamps decrease"))
    return _verdict("R8", violations, list(trace.steps))


def monitor_r14(trace, config: ExecConfig) -> MonitorVerdict:
    """Stop requests halt motion within budget; no motion until resume."""
    stop_steps = [
        (i, s.event.timestamp)
        for i, s in enumerate(trace.steps)
        if s.event is not None and s.event.kind in ("voiceStop", "uiStop")
    ]
    resume_times = [e.t for e in trace.log if e.kind == "resume"]
    violations = []
    for index, t in stop_steps:
        budget = t + config.stop_latency_budget_ms
        resume_t = next((rt for rt in resume_times if rt >= t), None)
        halted = None
        for j in range(index, len(trace.steps)):
            snap = trace.steps[j].snapshot
            if snap[SNAP_CLOCK] > budget and halted is None:
                break
            if not snap[SNAP_ARM_MOVING] and snap[SNAP_CLOCK] <= budget:
                halted = j
                break
        if halted is None:
            violations.append((index, f"stop at {t} not honoured within {config.stop_latency_budget_ms} ms"))
            continue
        for j in range(halted, len(trace.steps)):
            snap = trace.steps[j].snapshot
            if resume_t is not None and snap[SNAP_CLOCK] > resume_t:
                break
            if snap[SNAP_ARM_MOVING]:
                violations.append((j, f"motion at {snap[SNAP_CLOCK]} after stop at {t} before resume"))
                break
    return _verdict("R14", violations, stop_steps, "no stop requests in trace")


def monitor_r15(trace, config: ExecConfig) -> MonitorVerdict:
    """Motion only with validated posture and trajectory."""
    violations = []
    grants = [g for g in _grants(trace) if g[2] == "motion"]
    for index, t, _ in grants:
        snap = trace.steps[index].snapshot
        missing = []
        if not snap[SNAP_POSTURE_VALID]:
            missing.append("posture")
        if not snap[SNAP_TRAJECTORY_VALID]:
            missing.append("trajectory")
        if missing:
            violations.append((index, f"motion at {t} without validated {','.join(missing)}"))
    return _verdict("R15", violations, grants, "no motion in trace")


def _exposure_condition_failures(trace, index, t, replay, config):
    snap = trace.steps[index].snapshot
    failed = []
    if not snap[SNAP_POSTURE_VALID]:
        failed.append("postureValid")
    since = snap[SNAP_STABLE_SINCE]
    if since is None or t - since < config.stabilization_window_ms:
        failed.append("stabilizationElapsed")
    if snap[SNAP_ARM_MOVING]:
        failed.append("armImmobility")
    if not replay.fresh("exposure", "Patient", t):
        failed.append("patientAssentFresh")
    if not replay.fresh("exposure", "Radiographer", t):
        failed.append("radiographerConfirmFresh")
    if snap[SNAP_FAULT]:
        failed.append("noFault")
    if snap[SNAP_INTERRUPTION]:
        failed.append("noInterruption")
    if snap[SNAP_REVALIDATION]:
        failed.append("noRevalidationPending")
    return failed


def _exposure_monitor(trace, config, requirement, conditions):
    replay = _ConfirmationReplay(config)
    grants = {i: (t, k) for i, t, k in _grants(trace)}
    exposures = []
    violations = []
    for i, step in enumerate(trace.steps):
        replay.feed(step.event)
        grant = grants.get(i)
        if grant is None:
            continue
        t, kind = grant
        if kind != "exposure":
            if kind in _GRANT_LEDGER_ACTION:
                replay.consume(_GRANT_LEDGER_ACTION[kind])
            continue
        exposures.append(i)
        failed = [
            c for c in _exposure_condition_failures(trace, i, t, replay, config)
            if c in conditions
        ]
        replay.consume("exposure")
        if failed:
            violations.append((i, f"exposure at {t} with failed {','.join(failed)}"))
    return _verdict(requirement, violations, exposures, "no exposures in trace")


def monitor_r24(trace, config: ExecConfig) -> MonitorVerdict:
    """Full eight-condition exposure interlock at every firing."""
    return _exposure_monitor(trace, config, "R24", (
        "postureValid", "stabilizationElapsed", "armImmobility",
        "patientAssentFresh", "radiographerConfirmFresh",
        "noFault", "noInterruption", "noRevalidationPending",
    ))


def monitor_r16(trace, config: ExecConfig) -> MonitorVerdict:
    """Posture stability, arm immobility and patient readiness at exposure."""
    return _exposure_monitor(trace, config, "R16", (
        "postureValid", "stabilizationElapsed", "armImmobility", "patientAssentFresh",
    ))


def _emergency_context(trace, t) -> bool:
    """True when a fault/abandonment/unresumed stop is pending at time t.

    The safe-posture transition that emergencies mandate is system-initiated,
    so the multi-source confirmation rule does not govern it."""
    resumes = [e.t for e in trace.log if e.kind == "resume"]
    for e in trace.log:
        if e.t > t:
            break
        if e.kind == "abandon":
            return True
        if e.kind in ("fault", "interruption") and not any(e.t < rt <= t for rt in resumes):
            if e.kind == "fault":
                cleared = any(
                    x.kind == "faultCleared" and e.t <= x.t <= t for x in trace.log
                )
                resumed = any(e.t < rt <= t for rt in resumes)
                if not (cleared and resumed):
                    return True
            else:
                return True
    return False


def monitor_r20(trace, config: ExecConfig) -> MonitorVerdict:
    """Multi-source confirmation before motion, exposure and release.

    Releases taken in emergency context (pending fault, abandonment or
    unresumed stop) are the safe-posture transition and are checked by the
    safe-posture monitor instead.
    """
    replay = _ConfirmationReplay(config)
    grants = {i: (t, k) for i, t, k in _grants(trace)}
    checked = []
    violations = []
    for i, step in enumerate(trace.steps):
        replay.feed(step.event)
        grant = grants.get(i)
        if grant is None:
            continue
        t, kind = grant
        action = _GRANT_LEDGER_ACTION.get(kind)
        if action is None:
            continue
        if action == "release" and _emergency_context(trace, t):
            continue
        checked.append(i)
        missing = replay.missing(action, t)
        replay.consume(action)
        if missing:
            violations.append((i, f"{action} at {t} without fresh {','.join(missing)}"))
    return _verdict("R20", violations, checked, "no safety-critical grants")


def _is_stability_reference(entry) -> bool:
    return (
        entry.kind in ("postureChange", "interruption", "fault")
        or (entry.kind == "motion" and entry.details == "complete")
    )


def _is_grant_entry(entry) -> str | None:
    if entry.kind == "plan" and entry.details == "accepted":
        return "plan"
    if entry.kind == "exposure" and entry.details == "granted":
        return "exposure"
    if entry.kind == "motion" and entry.details == "started":
        return "motion"
    return None


def monitor_r21(trace, config: ExecConfig) -> MonitorVerdict:
    """Stabilization window before plan acceptance and exposure.

    Walks the append-only log in processing order, so same-millisecond
    references that actually followed a grant do not mask it.
    """
    violations = []
    checked = []
    last_ref = None
    for i, entry in enumerate(trace.log):
        grant = _is_grant_entry(entry)
        if grant in ("plan", "exposure"):
            checked.append(i)
            if last_ref is None:
                violations.append((i, f"{grant} at {entry.t} before any stability reference"))
            elif entry.t - last_ref < config.stabilization_window_ms:
                violations.append(
                    (i, f"{grant} at {entry.t} only {entry.t - last_ref} ms after last posture reference")
                )
        if _is_stability_reference(entry):
            last_ref = entry.t
    return _verdict("R21", violations, checked, "no plan/exposure grants")


def monitor_r23(trace, config: ExecConfig) -> MonitorVerdict:
    """Revalidation between any interruption/fault/movement and the next grant."""
    violations = []
    pending_trigger = None
    saw_trigger = False
    for i, entry in enumerate(trace.log):
        grant = _is_grant_entry(entry)
        if grant in ("motion", "exposure") and pending_trigger is not None:
            violations.append(
                (i, f"{grant} at {entry.t} after trigger at {pending_trigger} without revalidation")
            )
        if entry.kind in ("interruption", "fault") or (
            entry.kind == "postureChange" and "unexpected movement" in entry.details
        ):
            pending_trigger = entry.t
            saw_trigger = True
        elif entry.kind == "revalidation":
            pending_trigger = None
    if not saw_trigger:
        return MonitorVerdict("R23", NOT_APPLICABLE, None, "no interruption/fault/movement")
    return _verdict("R23", violations, [0])


def monitor_r25(trace, config: ExecConfig) -> MonitorVerdict:
    """Safe low-rigidity posture upon fault/interruption/abandonment.

    After such a trigger the system must reach the compliant safe posture
    (a release entry) before any further motion or exposure grant; a resume
    clears a recoverable stop or fault instead.  A session may not end with
    a trigger still pending and no safe posture reached.
    """
    violations = []
    pending = None  # (t, kind) of the unresolved emergency trigger
    applicable = False
    for i, entry in enumerate(trace.log):
        if entry.kind in ("abandon", "fault", "interruption"):
            pending = (entry.t, entry.kind)
            applicable = True
        elif entry.kind == "resume" and pending is not None and pending[1] != "abandon":
            pending = None
        elif entry.kind == "release":
            pending = None
        elif pending is not None and _is_grant_entry(entry) in ("motion", "exposure"):
            violations.append(
                (i, f"{_is_grant_entry(entry)} at {entry.t} after {pending[1]} at "
                    f"{pending[0]} without safe-posture transition")
            )
            pending = None  # report each continued operation once
    if pending is not None:
        final = trace.final_snapshot
        if not final[SNAP_COMPLIANCE] or final[SNAP_ARM_MOVING]:
            violations.append(
                (len(trace.steps) - 1,
                 f"{pending[1]} at {pending[0]} but session ends without safe posture")
            )
    if not applicable:
        return MonitorVerdict("R25", NOT_APPLICABLE, None, "no fault/abandon/stop")
    return _verdict("R25", violations, [0])


def monitor_r26(trace, config: ExecConfig) -> MonitorVerdict:
    """Every stage transition names the responsible actor."""
    transitions = [e for e in trace.log if e.kind == "stageTransition"]
    violations = [
        (i, f"transition {e.details!r} lacks actor")
        for i, e in enumerate(transitions)
        if e.actor not in ("A", "M", "SA")
    ]
    return _verdict("R26", violations, transitions, "no stage transitions")


MONITORS = {
    "R1": monitor_r1,
    "R8": monitor_r8,
    "R14": monitor_r14,
    "R15": monitor_r15,
    "R16": monitor_r16,
    "R20": monitor_r20,
    "R21": monitor_r21,
    "R23": monitor_r23,
    "R24": monitor_r24,
    "R25": monitor_r25,
    "R26": monitor_r26,
}


def evaluate_monitors(trace, config: ExecConfig, requirements=None) -> list[MonitorVerdict]:
    selected = MONITORED_REQUIREMENTS if requirements is None else requirements
    return [MONITORS[r](trace, config) for r in selected if r in MONITORS]
