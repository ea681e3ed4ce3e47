"""Scenario scripts and guideword-mapped injection transforms.

A scenario is a nominal event timeline plus injections.  Each injection
carries a transform whose mapping to the deviation guidewords is fixed:
Omission -> Drop, Commission -> SpuriousInsert, Early -> ShiftEarly,
Late -> ShiftLate, Value -> CorruptValue.  Transforms never invent event
kinds; they remove, duplicate, retime or corrupt what the script already
contains, which keeps injected timelines legal inputs for the executive.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .executive import Event, ExecConfig

TRANSFORM_FOR_GUIDEWORD = {
    "Omission": "Drop",
    "Commission": "SpuriousInsert",
    "Early": "ShiftEarly",
    "Late": "ShiftLate",
    "Value": "CorruptValue",
}

TRANSFORMS = ("Drop", "SpuriousInsert", "ShiftEarly", "ShiftLate", "CorruptValue")
MUTATIONS = ("negate", "zero", "outOfRange", "staleDuplicate")

OUTCOME_SAFE_COMPLETION = "SafeCompletion"
OUTCOME_BLOCKED_SAFELY = "BlockedSafely"
OUTCOME_VIOLATION = "ViolationExpected"


class InjectionError(ValueError):
    pass


@dataclass(frozen=True)
class Selector:
    """Matches events by kind plus either an ordinal (1-based) or time range."""

    kind: str
    ordinal: int | None = None
    t_min: int | None = None
    t_max: int | None = None
    action: str | None = None  # commandConfirm payload action filter

    def matches(self, timeline: list[Event]) -> list[int]:
        hits = []
        nth = 0
        for i, event in enumerate(timeline):
            if event.kind != self.kind:
                continue
            if self.action is not None and event.payload.get("action") != self.action:
                continue
            nth += 1
            if self.ordinal is not None and nth != self.ordinal:
                continue
            if self.t_min is not None and event.timestamp < self.t_min:
                continue
            if self.t_max is not None and event.timestamp > self.t_max:
                continue
            hits.append(i)
        return hits

    def to_json_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.ordinal is not None:
            out["ordinal"] = self.ordinal
        if self.t_min is not None:
            out["t_min"] = self.t_min
        if self.t_max is not None:
            out["t_max"] = self.t_max
        if self.action is not None:
            out["action"] = self.action
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "Selector":
        return cls(
            kind=data["kind"], ordinal=data.get("ordinal"),
            t_min=data.get("t_min"), t_max=data.get("t_max"),
            action=data.get("action"),
        )


@dataclass(frozen=True)
class Injection:
    target: Selector
    transform: str
    source_ref: str  # e.g. "shard:Capture X-ray/Commission" or "uca:UCA28"
    delta_ms: int = 0  # ShiftEarly / ShiftLate
    event: Event | None = None  # SpuriousInsert
    payload_field: str | None = None  # CorruptValue
    mutation: str | None = None  # CorruptValue

    def to_json_dict(self) -> dict:
        out: dict = {
            "target": self.target.to_json_dict(),
            "transform": self.transform,
            "source_ref": self.source_ref,
        }
        if self.transform in ("ShiftEarly", "ShiftLate"):
            out["delta_ms"] = self.delta_ms
        if self.event is not None:
            out["event"] = self.event.to_json_dict()
        if self.payload_field is not None:
            out["payload_field"] = self.payload_field
        if self.mutation is not None:
            out["mutation"] = self.mutation
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "Injection":
        return cls(
            target=Selector.from_json_dict(data["target"]),
            transform=data["transform"],
            source_ref=data["source_ref"],
            delta_ms=data.get("delta_ms", 0),
            event=Event.from_json_dict(data["event"]) if data.get("event") else None,
            payload_field=data.get("payload_field"),
            mutation=data.get("mutation"),
        )


def _stable_sort(timeline: list[Event]) -> list[Event]:
    return sorted(timeline, key=lambda e: e.timestamp)


def apply_injection(timeline: list[Event], inj: Injection) -> list[Event]:
    """Return a new timeline with the injection applied.

    Raises :class:`InjectionError` when the selector matches nothing (except
    SpuriousInsert, which needs no anchor) or a shift would produce negative
    time.
    """
    if inj.transform not in TRANSFORMS:
        raise InjectionError(f"unknown transform {inj.transform!r}")

    if inj.transform == "SpuriousInsert":
        if inj.event is None:
            raise InjectionError("SpuriousInsert needs an event")
        return _stable_sort(list(timeline) + [inj.event])

    matched = inj.target.matches(timeline)
    if not matched:
        raise InjectionError(f"selector matched no events: {inj.target}")
    matched_set = set(matched)

    if inj.transform == "Drop":
        return [e for i, e in enumerate(timeline) if i not in matched_set]

    if inj.transform in ("ShiftEarly", "ShiftLate"):
        delta = inj.delta_ms if inj.transform == "ShiftLate" else -inj.delta_ms
        out = []
        for i, event in enumerate(timeline):
            if i in matched_set:
                t = event.timestamp + delta
                if t < 0:
                    raise InjectionError("shift produces negative timestamp")
                out.append(Event(t, event.source, event.kind, dict(event.payload)))
            else:
                out.append(event)
        return _stable_sort(out)

    # CorruptValue: payload-only mutation
    if inj.payload_field is None or inj.mutation not in MUTATIONS:
        raise InjectionError("CorruptValue needs payload_field and a known mutation")
    out = []
    previous_value = None
    for i, event in enumerate(timeline):
        if event.kind == inj.target.kind and inj.payload_field in event.payload:
            if i not in matched_set:
                previous_value = event.payload[inj.payload_field]
        if i in matched_set:
            payload = dict(event.payload)
            value = payload.get(inj.payload_field)
            if inj.mutation == "negate":
                payload[inj.payload_field] = (not value) if isinstance(value, bool) else -value
            elif inj.mutation == "zero":
                payload[inj.payload_field] = False if isinstance(value, bool) else 0
            elif inj.mutation == "outOfRange":
                payload[inj.payload_field] = "OUT-OF-RANGE" if isinstance(value, str) else 10**9
            elif inj.mutation == "staleDuplicate":
                if previous_value is not None:
                    payload[inj.payload_field] = previous_value
            out.append(Event(event.timestamp, event.source, event.kind, payload))
        else:
            out.append(event)
    return out


@dataclass
class Scenario:
    name: str
    base_timeline: list[Event]
    injections: list[Injection] = field(default_factory=list)
    expected_outcome: str = OUTCOME_SAFE_COMPLETION
    expected_requirement: str | None = None  # ViolationExpected only
    seed: int = 0

    def compiled_timeline(self) -> list[Event]:
        timeline = _stable_sort(list(self.base_timeline))
        for inj in self.injections:
            timeline = apply_injection(timeline, inj)
        return timeline

    def to_json_dict(self) -> dict:
        out = {
            "schema_version": "scenario/1",
            "name": self.name,
            "seed": self.seed,
            "expected_outcome": {"kind": self.expected_outcome},
            "base_timeline": [e.to_json_dict() for e in self.base_timeline],
            "injections": [inj.to_json_dict() for inj in self.injections],
        }
        if self.expected_requirement:
            out["expected_outcome"]["requirement"] = self.expected_requirement
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "Scenario":
        outcome = data.get("expected_outcome", {})
        return cls(
            name=data["name"],
            base_timeline=[Event.from_json_dict(e) for e in data["base_timeline"]],
            injections=[Injection.from_json_dict(i) for i in data.get("injections", [])],
            expected_outcome=outcome.get("kind", OUTCOME_SAFE_COMPLETION),
            expected_requirement=outcome.get("requirement"),
            seed=data.get("seed", 0),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


def nominal_timeline(
    config: ExecConfig,
    views: tuple[str, ...] | None = None,
    rng: random.Random | None = None,
    retakes: dict[str, int] | None = None,
) -> list[Event]:
    """Full happy-path session script: self-test, per-view positioning and
    capture (with optional retakes), then confirmed release.

    With an rng, inter-event gaps jitter but ordering and window margins are
    preserved, so the script stays admissible under the enabled executive.
    """
    views = tuple(views) if views is not None else config.required_views
    retakes = retakes or {}
    window = config.stabilization_window_ms

    def gap(base: int) -> int:
        return base if rng is None else base + rng.randint(0, 400)

    t = 0
    events: list[Event] = [
        Event(t, "System", "commandConfirm", {"action": "selfTest", "ready": True})
    ]

    def capture_block(t: int, view: str, retake: bool) -> int:
        # assent + radiographer confirm + gated exposure
        t += gap(200)
        events.append(Event(t, "Patient", "assent"))
        t += gap(200)
        events.append(Event(t, "Radiographer", "commandConfirm", {"action": "exposure"}))
        t += window + gap(100)  # exceed stabilization after last reposition
        events.append(Event(t, "Radiographer", "exposureRequest"))
        t += gap(400)
        events.append(Event(t, "System", "exposureComplete", {"retake": retake}))
        return t

    for view in views:
        t += gap(500)
        events.append(Event(t, "Radiographer", "commandConfirm",
                            {"action": "stageIdentified", "view": view}))
        t += gap(500)
        events.append(Event(t, "Sensor", "postureUpdate", {"valid": True}))
        t += window + gap(100)
        events.append(Event(t, "Radiographer", "commandConfirm", {"action": "planReady", "valid": True}))
        t += gap(300)
        events.append(Event(t, "Radiographer", "commandConfirm", {"action": "motionStart"}))
        t += gap(1200)
        events.append(Event(t, "System", "motionComplete"))
        t += gap(200)
        events.append(Event(t, "Radiographer", "commandConfirm",
                            {"action": "adjustments", "needed": False}))
        for _ in range(retakes.get(view, 0)):
            t = capture_block(t, view, retake=True)
            # retake loops back through adjustments: perform the motion again
            t += gap(300)
            events.append(Event(t, "Radiographer", "commandConfirm", {"action": "motionStart"}))
            t += gap(800)
            events.append(Event(t, "System", "motionComplete"))
        t = capture_block(t, view, retake=False)

    t += gap(300)
    events.append(Event(t, "Radiographer", "commandConfirm", {"action": "release"}))
    return events
