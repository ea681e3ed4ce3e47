"""SHARD guideword worksheets, reference catalog and coverage accounting.

Five guidewords (Omission, Commission, Early, Late, Value) are applied per
node of a process model.  Actions default to all five; decisions default to
{Omission, Commission, Value} because early/late evaluation of a purely
logical gateway manifests as a missing or wrong decision rather than a
distinct timing hazard.  Per-node overrides (with mandatory justification)
record where judgement departed from the defaults; hazard levels are
analyst-assigned data and are never recomputed here.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .model import KIND_ACTION, KIND_DECISION, Node, ProcessModel, normalize_label

GUIDEWORDS = ("Omission", "Commission", "Early", "Late", "Value")

GUIDEWORD_DEFINITIONS = {
    "Omission": (
        "The robotic service is not performed when required (e.g., the robot "
        "fails to detect a user request or does not deliver assistance)."
    ),
    "Commission": (
        "A robotic service is performed without a valid trigger (e.g., the "
        "robot initiates movement or communication without user command or "
        "environmental justification)."
    ),
    "Early": (
        "The robotic service occurs earlier than intended, such as the robot "
        "responding before a task condition is met or interrupting the user "
        "prematurely. This may be absolute or relative."
    ),
    "Late": (
        "The robotic service occurs later than intended (e.g., delayed "
        "response to a help request or late delivery of support that affects "
        "task performance)."
    ),
    "Value": (
        "The information (data) or physical output delivered has the wrong "
        "value (e.g., misinterpreted sensor data, incorrect movement "
        "parameters or excessive force)."
    ),
}

HAZARD_LEVELS = ("Annoyance", "Low", "Medium", "High")  # ascending severity

DEFAULT_APPLICABILITY = {
    KIND_ACTION: GUIDEWORDS,
    KIND_DECISION: ("Omission", "Commission", "Value"),
}

STATUS_PENDING = "Pending"
STATUS_FILLED = "Filled"
STATUS_JUSTIFIED_NA = "JustifiedNA"

CATALOG_COLUMNS = [
    "node", "guideword", "deviation", "causes", "effects", "detection",
    "recommendation", "hazard_level",
]


class CatalogError(ValueError):
    """Schema violation in a deviation catalog file."""


def severity_rank(level: str) -> int:
    return HAZARD_LEVELS.index(level)


def _ordered_guidewords(words) -> tuple[str, ...]:
    return tuple(w for w in GUIDEWORDS if w in set(words))


@dataclass
class ApplicabilityRule:
    """Default guideword sets per node kind plus per-node label overrides."""

    defaults: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_APPLICABILITY)
    )
    overrides: dict[str, tuple[str, ...]] = field(default_factory=dict)
    justifications: dict[str, str] = field(default_factory=dict)

    def add_override(self, node_label: str, guidewords, justification: str) -> None:
        if not justification.strip():
            raise ValueError(f"override for {node_label!r} needs a justification")
        unknown = set(guidewords) - set(GUIDEWORDS)
        if unknown:
            raise ValueError(f"unknown guidewords in override: {sorted(unknown)}")
        key = normalize_label(node_label)
        self.overrides[key] = _ordered_guidewords(guidewords)
        self.justifications[key] = justification

    @classmethod
    def from_json_dict(cls, data: dict) -> "ApplicabilityRule":
        rule = cls()
        for kind, words in data.get("defaults", {}).items():
            rule.defaults[kind] = _ordered_guidewords(words)
        for label, spec in data.get("overrides", {}).items():
            rule.add_override(label, spec["guidewords"], spec["justification"])
        return rule

    @classmethod
    def load(cls, path) -> "ApplicabilityRule":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def canonical_rules() -> ApplicabilityRule:
    from .datafiles import data_path

    return ApplicabilityRule.load(data_path("shard_rules.json"))


def applicable_guidewords(node: Node, rules: ApplicabilityRule) -> tuple[str, ...]:
    """Override set when present, else the node-kind default (fixed order)."""
    override = rules.overrides.get(normalize_label(node.label))
    if override is not None:
        return override
    return rules.defaults.get(node.kind, ())


@dataclass
class WorksheetSlot:
    node_id: str
    node_label: str
    guideword: str
    status: str = STATUS_PENDING


def generate_worksheet(m: ProcessModel, rules: ApplicabilityRule) -> list[WorksheetSlot]:
    """One slot per applicable (node, guideword) pair, in model node order."""
    slots: list[WorksheetSlot] = []
    for node in m.nodes:
        for word in applicable_guidewords(node, rules):
            slots.append(WorksheetSlot(node.id, node.label, word))
    return slots


@dataclass(frozen=True)
class DeviationRecord:
    node_label: str
    guideword: str
    deviation: str
    causes: str
    effects: str
    detection: str
    recommendation: str
    hazard_level: str

    def key(self) -> tuple[str, str]:
        return (normalize_label(self.node_label), self.guideword)


def _validate_record(raw: dict, where: str) -> DeviationRecord:
    missing = [c for c in CATALOG_COLUMNS if c not in raw or raw[c] is None]
    if missing:
        raise CatalogError(f"{where}: missing columns {missing}")
    if raw["guideword"] not in GUIDEWORDS:
        raise CatalogError(f"{where}: unknown guideword {raw['guideword']!r}")
    if raw["hazard_level"] not in HAZARD_LEVELS:
        raise CatalogError(f"{where}: unknown hazard level {raw['hazard_level']!r}")
    return DeviationRecord(
        node_label=raw["node"],
        guideword=raw["guideword"],
        deviation=raw["deviation"],
        causes=raw["causes"],
        effects=raw["effects"],
        detection=raw["detection"],
        recommendation=raw["recommendation"],
        hazard_level=raw["hazard_level"],
    )


def read_csv_rows(path) -> list[dict]:
    """CSV rows as dicts; leading ``#`` comment lines are skipped."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def load_shard_catalog(path, model: ProcessModel | None = None) -> list[DeviationRecord]:
    """Load and validate a deviation catalog (.csv or .json).

    Duplicate (node, guideword, deviation) triples are rejected.  When a
    model is supplied, every node label must resolve against it.
    """
    path = Path(path)
    if path.suffix == ".json":
        with open(path, encoding="utf-8") as fh:
            raw_rows = json.load(fh)["records"]
    else:
        raw_rows = read_csv_rows(path)

    records: list[DeviationRecord] = []
    seen: set[tuple[str, str, str]] = set()
    for i, raw in enumerate(raw_rows, start=1):
        rec = _validate_record(raw, f"{path.name} row {i}")
        triple = (normalize_label(rec.node_label), rec.guideword, rec.deviation)
        if triple in seen:
            raise CatalogError(f"{path.name} row {i}: duplicate record {triple}")
        seen.add(triple)
        records.append(rec)

    if model is not None:
        labels = {normalize_label(n.label) for n in model.nodes}
        for rec in records:
            if normalize_label(rec.node_label) not in labels:
                raise CatalogError(f"unresolvable node label {rec.node_label!r}")
    return records


@dataclass
class CoverageReport:
    total_slots: int
    filled_slots: int
    pending: list[WorksheetSlot]
    drift: list[DeviationRecord]  # catalog rows without a matching slot

    @property
    def fill_ratio(self) -> float:
        if not self.total_slots:
            return 1.0
        return self.filled_slots / self.total_slots

    @property
    def clean(self) -> bool:
        return not self.drift and not self.pending


def coverage_report(slots: list[WorksheetSlot], catalog: list[DeviationRecord]) -> CoverageReport:
    """Bijection check between worksheet slots and catalog rows.

    Marks each slot Filled when at least one catalog row matches its
    (label, guideword) key; rows matching no slot are reported as drift
    between the catalog and the model/rules.
    """
    slot_index: dict[tuple[str, str], list[WorksheetSlot]] = {}
    for slot in slots:
        slot_index.setdefault((normalize_label(slot.node_label), slot.guideword), []).append(slot)

    drift: list[DeviationRecord] = []
    for rec in catalog:
        matching = slot_index.get(rec.key())
        if matching is None:
            drift.append(rec)
        else:
            for slot in matching:
                if slot.status == STATUS_PENDING:
                    slot.status = STATUS_FILLED
    pending = [s for s in slots if s.status == STATUS_PENDING]
    filled = sum(1 for s in slots if s.status == STATUS_FILLED)
    return CoverageReport(
        total_slots=len(slots), filled_slots=filled, pending=pending, drift=drift
    )


def severity_histogram(catalog: list[DeviationRecord]) -> dict:
    """Totals per hazard level plus a per-node breakdown.

    Levels order ascending (Annoyance < Low < Medium < High) for sorting.
    """
    totals = {level: 0 for level in HAZARD_LEVELS}
    per_node: dict[str, dict[str, int]] = {}
    for rec in catalog:
        totals[rec.hazard_level] += 1
        node_counts = per_node.setdefault(rec.node_label, {level: 0 for level in HAZARD_LEVELS})
        node_counts[rec.hazard_level] += 1
    return {"totals": totals, "per_node": per_node, "order": HAZARD_LEVELS}
