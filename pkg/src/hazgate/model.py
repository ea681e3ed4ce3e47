"""Guarded activity-diagram process models.

A process model is a directed graph of action and decision nodes.  Actions
carry an actor annotation (A: automated, M: manual, SA: semi-automated) and
have exactly one outgoing edge; decisions evaluate a named boolean guard and
have exactly one outgoing edge per polarity.  Models are written in a
line-oriented DSL (``.proc`` files)::

    # hazgate process v1
    process minimal
    guard go "ready to proceed"
    initial start
    final end
    action work "Do the work" actor=A
    edge start -> work
    edge work -> end

Parsing, validation, serialization and the graph queries used by the
analysis and simulation layers all live here.
"""

from __future__ import annotations

import json
import shlex
from collections import deque
from dataclasses import dataclass, field

DSL_VERSION = "hazgate process v1"
SCHEMA_VERSION = "process-model/1"

ACTOR_MODES = ("A", "M", "SA")

KIND_ACTION = "Action"
KIND_DECISION = "Decision"
KIND_INITIAL = "Initial"
KIND_FINAL = "Final"


class ParseError(ValueError):
    """Syntax error in DSL text, with 1-based line/column position."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, col {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class ModelError(ValueError):
    """A parsed model violates structural invariants."""

    def __init__(self, diagnostics: list["Diagnostic"]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Diagnostic:
    """One violated invariant, naming the offending node or edge."""

    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.subject}): {self.message}"


@dataclass(frozen=True)
class GuardDecl:
    name: str
    description: str = ""
    true_polarity: str = ""


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    label: str
    actor_mode: str | None = None  # Actions only
    guard: str | None = None  # Decisions only


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    guard_value: bool | None = None  # present iff src is a Decision


@dataclass
class ProcessModel:
    name: str
    nodes: list[Node] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    guards: list[GuardDecl] = field(default_factory=list)
    initial: str = ""
    final: str = ""

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(f"unknown node id: {node_id}")

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def node_by_label(self, label: str) -> Node:
        key = normalize_label(label)
        for n in self.nodes:
            if normalize_label(n.label) == key:
                return n
        raise KeyError(f"no node labelled {label!r}")

    def out_edges(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.src == node_id]

    def actions(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == KIND_ACTION]

    def decisions(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == KIND_DECISION]

    def guard_names(self) -> list[str]:
        return [g.name for g in self.guards]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "initial": self.initial,
            "final": self.final,
            "guards": [
                {
                    "name": g.name,
                    "description": g.description,
                    "true_polarity": g.true_polarity,
                }
                for g in self.guards
            ],
            "nodes": [
                {
                    "id": n.id,
                    "kind": n.kind,
                    "label": n.label,
                    "actor_mode": n.actor_mode,
                    "guard": n.guard,
                }
                for n in self.nodes
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "guard_value": e.guard_value}
                for e in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ProcessModel":
        return cls(
            name=data["name"],
            nodes=[
                Node(
                    id=n["id"],
                    kind=n["kind"],
                    label=n["label"],
                    actor_mode=n.get("actor_mode"),
                    guard=n.get("guard"),
                )
                for n in data["nodes"]
            ],
            edges=[
                Edge(src=e["from"], dst=e["to"], guard_value=e.get("guard_value"))
                for e in data["edges"]
            ],
            guards=[
                GuardDecl(
                    name=g["name"],
                    description=g.get("description", ""),
                    true_polarity=g.get("true_polarity", ""),
                )
                for g in data["guards"]
            ],
            initial=data["initial"],
            final=data["final"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=False) + "\n"


def normalize_label(label: str) -> str:
    """Case- and punctuation-insensitive key for matching display labels."""
    return "".join(ch for ch in label.lower() if ch.isalnum())


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _split(line: str, lineno: int) -> list[str]:
    try:
        return shlex.split(line, comments=False, posix=True)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from exc


def _kv(token: str, key: str, lineno: int) -> str:
    prefix = key + "="
    if not token.startswith(prefix):
        raise ParseError(f"expected {key}=..., got {token!r}", lineno)
    return token[len(prefix):]


def parse_model(text: str) -> ProcessModel:
    """Parse DSL text into a validated :class:`ProcessModel`.

    Raises :class:`ParseError` for malformed lines and :class:`ModelError`
    when the parsed structure violates a model invariant (duplicate ids,
    undeclared guards, bad fan-out, unreachable nodes, ...).
    """
    model = ProcessModel(name="")
    seen_ids: dict[str, int] = {}
    seen_guards: dict[str, int] = {}
    pending: list[Diagnostic] = []

    def declare_node(node: Node, lineno: int) -> None:
        if node.id in seen_ids:
            raise ParseError(
                f"duplicate id {node.id!r} (first declared on line {seen_ids[node.id]})",
                lineno,
            )
        seen_ids[node.id] = lineno
        model.nodes.append(node)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _split(line, lineno)
        keyword, args = tokens[0], tokens[1:]

        if keyword == "process":
            if len(args) != 1:
                raise ParseError("process takes exactly one name", lineno)
            model.name = args[0]
        elif keyword == "guard":
            if not args:
                raise ParseError("guard needs a name", lineno)
            name = args[0]
            if name in seen_guards:
                raise ParseError(
                    f"duplicate guard {name!r} (first declared on line {seen_guards[name]})",
                    lineno,
                )
            seen_guards[name] = lineno
            description = args[1] if len(args) > 1 else ""
            polarity = ""
            for extra in args[2:]:
                polarity = _kv(extra, "holds", lineno)
            model.guards.append(GuardDecl(name, description, polarity))
        elif keyword == "initial":
            if len(args) != 1:
                raise ParseError("initial takes exactly one id", lineno)
            if model.initial:
                raise ParseError("initial already declared", lineno)
            declare_node(Node(args[0], KIND_INITIAL, args[0]), lineno)
            model.initial = args[0]
        elif keyword == "final":
            if len(args) != 1:
                raise ParseError("final takes exactly one id", lineno)
            if model.final:
                raise ParseError("final already declared", lineno)
            declare_node(Node(args[0], KIND_FINAL, args[0]), lineno)
            model.final = args[0]
        elif keyword == "action":
            if len(args) < 2:
                raise ParseError('action needs: action <id> "<label>" actor=<A|M|SA>', lineno)
            node_id, label = args[0], args[1]
            actor = None
            for extra in args[2:]:
                actor = _kv(extra, "actor", lineno)
            if actor is None:
                raise ParseError(f"action {node_id!r} missing actor=", lineno)
            if actor not in ACTOR_MODES:
                raise ParseError(
                    f"action {node_id!r}: actor must be one of {'/'.join(ACTOR_MODES)}", lineno
                )
            declare_node(Node(node_id, KIND_ACTION, label, actor_mode=actor), lineno)
        elif keyword == "decision":
            if not args:
                raise ParseError("decision needs an id", lineno)
            node_id = args[0]
            label = node_id
            guard = None
            for extra in args[1:]:
                if extra.startswith("guard="):
                    guard = _kv(extra, "guard", lineno)
                else:
                    label = extra
            if guard is None:
                raise ParseError(f"decision {node_id!r} missing guard=", lineno)
            if guard not in seen_guards:
                raise ParseError(
                    f"undeclared guard {guard!r} referenced by decision {node_id!r}", lineno
                )
            declare_node(Node(node_id, KIND_DECISION, label, guard=guard), lineno)
        elif keyword == "edge":
            if len(args) < 3 or args[1] != "->":
                raise ParseError("edge needs: edge <from> -> <to> [when=true|false]", lineno)
            src, dst = args[0], args[2]
            guard_value = None
            for extra in args[3:]:
                value = _kv(extra, "when", lineno)
                if value not in ("true", "false"):
                    raise ParseError("when= must be true or false", lineno)
                guard_value = value == "true"
            model.edges.append(Edge(src, dst, guard_value))
        else:
            raise ParseError(f"unknown keyword {keyword!r}", lineno)

    if not model.name:
        pending.append(Diagnostic("missing-name", "<model>", "no process declaration"))

    diagnostics = pending + validate_model(model)
    if diagnostics:
        raise ModelError(diagnostics)
    return model


def load_model(path) -> ProcessModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _forward_reachable(edges_by_src: dict[str, list[Edge]], start: str) -> set[str]:
    seen = {start}
    todo = deque([start])
    while todo:
        current = todo.popleft()
        for edge in edges_by_src.get(current, ()):
            if edge.dst not in seen:
                seen.add(edge.dst)
                todo.append(edge.dst)
    return seen


def validate_model(m: ProcessModel) -> list[Diagnostic]:
    """Check every structural invariant; empty result means the model is valid."""
    diags: list[Diagnostic] = []
    ids = [n.id for n in m.nodes]
    id_set = set(ids)
    if len(ids) != len(id_set):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        for d in dupes:
            diags.append(Diagnostic("duplicate-id", d, "node id declared more than once"))

    guard_names = [g.name for g in m.guards]
    if len(guard_names) != len(set(guard_names)):
        for g in sorted({n for n in guard_names if guard_names.count(n) > 1}):
            diags.append(Diagnostic("duplicate-guard", g, "guard declared more than once"))

    for n in m.nodes:
        if n.kind == KIND_ACTION:
            if n.actor_mode not in ACTOR_MODES:
                diags.append(Diagnostic("bad-actor", n.id, "action without valid actor mode"))
            if n.guard is not None:
                diags.append(Diagnostic("guard-on-action", n.id, "guard present on an action"))
        elif n.kind == KIND_DECISION:
            if n.guard is None:
                diags.append(Diagnostic("missing-guard", n.id, "decision without a guard"))
            elif n.guard not in guard_names:
                diags.append(
                    Diagnostic("undeclared-guard", n.id, f"undeclared guard {n.guard!r}")
                )
            if n.actor_mode is not None:
                diags.append(Diagnostic("actor-on-decision", n.id, "actorMode on a decision"))
        elif n.kind in (KIND_INITIAL, KIND_FINAL):
            if n.actor_mode is not None or n.guard is not None:
                diags.append(Diagnostic("bad-annotation", n.id, "annotation on initial/final"))
        else:
            diags.append(Diagnostic("bad-kind", n.id, f"unknown node kind {n.kind!r}"))

    if not m.initial or m.initial not in id_set:
        diags.append(Diagnostic("missing-initial", m.initial or "<none>", "no initial node"))
    if not m.final or m.final not in id_set:
        diags.append(Diagnostic("missing-final", m.final or "<none>", "no final node"))

    edges_by_src: dict[str, list[Edge]] = {}
    incoming: dict[str, int] = {i: 0 for i in id_set}
    for e in m.edges:
        label = f"{e.src}->{e.dst}"
        if e.src not in id_set:
            diags.append(Diagnostic("dangling-edge", label, f"unknown source {e.src!r}"))
            continue
        if e.dst not in id_set:
            diags.append(Diagnostic("dangling-edge", label, f"unknown target {e.dst!r}"))
            continue
        edges_by_src.setdefault(e.src, []).append(e)
        incoming[e.dst] += 1

    if m.initial in id_set and incoming.get(m.initial, 0) > 0:
        diags.append(Diagnostic("initial-incoming", m.initial, "initial node has incoming edges"))

    for n in m.nodes:
        out = edges_by_src.get(n.id, [])
        if n.kind == KIND_ACTION:
            if len(out) != 1:
                diags.append(
                    Diagnostic("action-fan-out", n.id, f"action has {len(out)} outgoing edges, needs 1")
                )
            for e in out:
                if e.guard_value is not None:
                    diags.append(
                        Diagnostic("polarity-on-action", f"{e.src}->{e.dst}", "when= on a non-decision edge")
                    )
        elif n.kind == KIND_DECISION:
            polarities = sorted(
                (e.guard_value for e in out), key=lambda v: 2 if v is None else int(v)
            )
            if len(out) != 2 or polarities != [False, True]:
                diags.append(
                    Diagnostic(
                        "decision-fan-out",
                        n.id,
                        "decision needs exactly one true edge and one false edge",
                    )
                )
        elif n.kind == KIND_INITIAL:
            if len(out) != 1:
                diags.append(Diagnostic("initial-fan-out", n.id, "initial needs exactly 1 outgoing edge"))
            for e in out:
                if e.guard_value is not None:
                    diags.append(
                        Diagnostic("polarity-on-action", f"{e.src}->{e.dst}", "when= on a non-decision edge")
                    )
        elif n.kind == KIND_FINAL:
            if out:
                diags.append(Diagnostic("final-fan-out", n.id, "final node has outgoing edges"))

    if m.initial in id_set:
        reachable = _forward_reachable(edges_by_src, m.initial)
        for n in m.nodes:
            if n.id not in reachable:
                diags.append(Diagnostic("unreachable-node", n.id, "not reachable from initial"))

    if m.final in id_set:
        edges_by_dst: dict[str, list[Edge]] = {}
        for e in m.edges:
            if e.src in id_set and e.dst in id_set:
                edges_by_dst.setdefault(e.dst, []).append(Edge(e.dst, e.src, None))
        co_reachable = _forward_reachable(edges_by_dst, m.final)
        for n in m.nodes:
            if n.id not in co_reachable:
                diags.append(Diagnostic("dead-end", n.id, "final not reachable from this node"))

    return diags


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_model(m: ProcessModel) -> str:
    """Emit canonical DSL text; ``parse_model`` of the result equals ``m``."""
    lines = [f"# {DSL_VERSION}", f"process {m.name}"]
    if m.guards:
        lines.append("")
    for g in m.guards:
        entry = f"guard {g.name} {_quote(g.description)}"
        if g.true_polarity:
            entry += f" holds={_quote(g.true_polarity)}"
        lines.append(entry)
    lines.append("")
    for n in m.nodes:
        if n.kind == KIND_INITIAL:
            lines.append(f"initial {n.id}")
        elif n.kind == KIND_FINAL:
            lines.append(f"final {n.id}")
        elif n.kind == KIND_ACTION:
            lines.append(f"action {n.id} {_quote(n.label)} actor={n.actor_mode}")
        elif n.kind == KIND_DECISION:
            lines.append(f"decision {n.id} {_quote(n.label)} guard={n.guard}")
    lines.append("")
    for e in m.edges:
        entry = f"edge {e.src} -> {e.dst}"
        if e.guard_value is not None:
            entry += f" when={'true' if e.guard_value else 'false'}"
        lines.append(entry)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Graph queries
# ---------------------------------------------------------------------------


def node_successors(m: ProcessModel, node_id: str, guard_value: bool | None = None) -> list[str]:
    """Successor node ids; decisions take the edge matching ``guard_value``."""
    node = m.node(node_id)  # raises KeyError for unknown ids
    if node.kind == KIND_DECISION:
        if guard_value is None:
            raise ValueError(f"decision {node_id!r} needs a guard polarity")
        return [e.dst for e in m.out_edges(node_id) if e.guard_value is guard_value]
    if guard_value is not None:
        raise ValueError(f"{node_id!r} is not a decision; no polarity applies")
    return [e.dst for e in m.out_edges(node_id)]


def reachable_nodes(m: ProcessModel) -> set[str]:
    edges_by_src: dict[str, list[Edge]] = {}
    for e in m.edges:
        edges_by_src.setdefault(e.src, []).append(e)
    return _forward_reachable(edges_by_src, m.initial)
