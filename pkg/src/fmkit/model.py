"""Canonical in-memory representation of a flow-machine model.

A model is a tree of spheres holding machines; things move between the five
stages of a machine along flow arcs and jump between flows along trigger
arcs.  Values are treated as immutable once built; construction happens in
the canonicalizer.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence, Union

from .exprs import Expr


class Stage(Enum):
    CREATE = "create"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"
    RECEIVE = "receive"

    def __str__(self) -> str:
        return self.value


STAGES_BY_NAME = {s.value: s for s in Stage}

# Legal single-step flows inside one machine.  Creation has no inbound flow:
# things only originate via triggers or scenario injection.
INTRA_EDGES = frozenset(
    {
        (Stage.CREATE, Stage.PROCESS),
        (Stage.CREATE, Stage.RELEASE),
        (Stage.RECEIVE, Stage.PROCESS),
        (Stage.RECEIVE, Stage.RELEASE),
        (Stage.PROCESS, Stage.RELEASE),
        (Stage.RELEASE, Stage.TRANSFER),
        (Stage.TRANSFER, Stage.RECEIVE),
    }
)

# The only legal flow between two machines.
INTER_EDGE = (Stage.TRANSFER, Stage.TRANSFER)


class ModelError(Exception):
    """Structural failure while building or querying a model."""


class ResolutionError(ModelError):
    """An endpoint path failed to resolve; carries the offending segment."""

    def __init__(self, code: str, segment: str, text: str) -> None:
        super().__init__(f"{code}: '{segment}' in '{text}'")
        self.code = code
        self.segment = segment


class UnknownLabelError(ModelError):
    """A subdiagram request named labels absent from the model."""

    def __init__(self, missing: Sequence[str]) -> None:
        super().__init__("unknown labels: " + ", ".join(sorted(missing)))
        self.missing = tuple(sorted(missing))


@dataclass(frozen=True)
class AttrSpec:
    name: str
    type: str  # one of exprs.SCALAR_TYPES
    default: object = None  # literal value, or None when the attr has no default


@dataclass(frozen=True)
class ThingKind:
    name: str
    attrs: tuple[AttrSpec, ...] = ()

    def attr_types(self) -> dict[str, str]:
        return {a.name: a.type for a in self.attrs}

    def attr(self, name: str) -> Optional[AttrSpec]:
        for a in self.attrs:
            if a.name == name:
                return a
        return None


@dataclass(frozen=True)
class Endpoint:
    """A (machine, stage) location addressed by its sphere path."""

    path: tuple[str, ...]  # sphere names followed by the machine name
    stage: Stage

    def __str__(self) -> str:
        return "/".join(self.path) + "." + self.stage.value

    @property
    def machine_path(self) -> tuple[str, ...]:
        return self.path


@dataclass
class Machine:
    name: str
    kind: str
    declared: tuple[Stage, ...]
    implicit: tuple[Stage, ...] = ()
    assigns: tuple[tuple[str, Expr], ...] = ()

    def stages(self) -> tuple[Stage, ...]:
        return tuple(self.declared) + tuple(s for s in self.implicit if s not in self.declared)

    def has_stage(self, stage: Stage) -> bool:
        return stage in self.declared or stage in self.implicit


@dataclass
class Sphere:
    name: str
    children: list["Sphere"] = field(default_factory=list)
    machines: list[Machine] = field(default_factory=list)

    def child(self, name: str) -> Optional["Sphere"]:
        for c in self.children:
            if c.name == name:
                return c
        return None

    def machine(self, name: str) -> Optional[Machine]:
        for m in self.machines:
            if m.name == name:
                return m
        return None


@dataclass
class FlowArc:
    src: Endpoint
    dst: Endpoint
    label: str
    guard: Optional[Expr] = None
    # Expansion bookkeeping: which authored arc this step belongs to.
    family: str = ""
    index: int = 0
    chain_len: int = 1
    authored_src: Optional[Endpoint] = None
    authored_dst: Optional[Endpoint] = None

    @property
    def is_implicit(self) -> bool:
        return self.index > 0

    @property
    def is_chain_head(self) -> bool:
        return self.index == 0

    @property
    def is_chain_tail(self) -> bool:
        return self.index == self.chain_len - 1


@dataclass
class TriggerArc:
    src: Endpoint
    dst: Endpoint
    label: str
    guard: Optional[Expr] = None
    spawn_attrs: tuple[tuple[str, Expr], ...] = ()
    consuming: bool = False


@dataclass(frozen=True)
class Region:
    """A subdiagram: a set of arcs (by label) plus their endpoint stages."""

    arc_labels: frozenset[str]
    stages: frozenset[Endpoint]
    flow_labels: frozenset[str] = frozenset()  # the subset of arc_labels that are flows

    @property
    def is_empty(self) -> bool:
        return not self.arc_labels


@dataclass(frozen=True)
class EventDef:
    name: str
    region: Region
    qualities: tuple[tuple[str, object], ...] = ()


# Chronology tree for behavior programs.


@dataclass(frozen=True)
class Ref:
    event: str


@dataclass(frozen=True)
class Seq:
    children: tuple["Chrono", ...]


@dataclass(frozen=True)
class Choice:
    children: tuple["Chrono", ...]


@dataclass(frozen=True)
class Par:
    children: tuple["Chrono", ...]


@dataclass(frozen=True)
class Repeat:
    child: "Chrono"
    possible: bool = False


@dataclass(frozen=True)
class Interrupt:
    watcher: "Chrono"
    handler: "Chrono"
    body: "Chrono"


Chrono = Union[Ref, Seq, Choice, Par, Repeat, Interrupt]


@dataclass(frozen=True)
class BehaviorDecl:
    name: str
    program: Chrono


@dataclass
class Model:
    kinds: dict[str, ThingKind]
    roots: list[Sphere]
    flows: list[FlowArc]
    triggers: list[TriggerArc]
    events: list[EventDef]
    behaviors: list[BehaviorDecl]
    canonical: bool = False

    # Lookup maps built once at construction time.
    _flows_by_label: dict[str, FlowArc] = field(default_factory=dict, repr=False)
    _triggers_by_label: dict[str, TriggerArc] = field(default_factory=dict, repr=False)
    _flows_by_src: dict[Endpoint, list[FlowArc]] = field(default_factory=dict, repr=False)
    _triggers_by_src: dict[Endpoint, list[TriggerArc]] = field(default_factory=dict, repr=False)

    def reindex(self) -> None:
        self._flows_by_label = {a.label: a for a in self.flows}
        self._triggers_by_label = {t.label: t for t in self.triggers}
        self._flows_by_src = {}
        for a in self.flows:
            self._flows_by_src.setdefault(a.src, []).append(a)
        for arcs in self._flows_by_src.values():
            arcs.sort(key=lambda a: a.label)
        self._triggers_by_src = {}
        for t in self.triggers:
            self._triggers_by_src.setdefault(t.src, []).append(t)
        for ts in self._triggers_by_src.values():
            ts.sort(key=lambda t: t.label)

    def flow(self, label: str) -> Optional[FlowArc]:
        return self._flows_by_label.get(label)

    def trigger(self, label: str) -> Optional[TriggerArc]:
        return self._triggers_by_label.get(label)

    def flows_from(self, ep: Endpoint) -> list[FlowArc]:
        return self._flows_by_src.get(ep, [])

    def triggers_from(self, ep: Endpoint) -> list[TriggerArc]:
        return self._triggers_by_src.get(ep, [])

    def event(self, name: str) -> Optional[EventDef]:
        for e in self.events:
            if e.name == name:
                return e
        return None

    def behavior(self, name: str) -> Optional[BehaviorDecl]:
        for b in self.behaviors:
            if b.name == name:
                return b
        return None

    def spheres(self) -> Iterator[tuple[tuple[str, ...], Sphere]]:
        """Depth-first walk yielding (path, sphere) pairs."""

        def walk(sphere: Sphere, prefix: tuple[str, ...]) -> Iterator[tuple[tuple[str, ...], Sphere]]:
            path = prefix + (sphere.name,)
            yield path, sphere
            for child in sphere.children:
                yield from walk(child, path)

        for root in self.roots:
            yield from walk(root, ())

    def machines(self) -> Iterator[tuple[tuple[str, ...], Machine]]:
        """Yields (path-including-machine-name, machine) pairs."""
        for path, sphere in self.spheres():
            for m in sphere.machines:
                yield path + (m.name,), m

    def find_machine(self, path: tuple[str, ...]) -> Optional[Machine]:
        if len(path) < 2:
            return None
        sphere: Optional[Sphere] = None
        for root in self.roots:
            if root.name == path[0]:
                sphere = root
                break
        if sphere is None:
            return None
        for seg in path[1:-1]:
            sphere = sphere.child(seg)
            if sphere is None:
                return None
        return sphere.machine(path[-1])

    def gated_endpoints(self) -> frozenset[Endpoint]:
        """Stages whose outbound movement waits on an enable from a trigger."""
        return frozenset(
            t.dst for t in self.triggers if t.dst.stage is not Stage.CREATE
        )


def resolve_endpoint(model: Model, text: str) -> Endpoint:
    """Resolve ``sphere/.../machine.stage`` to the unique endpoint it names.

    Raises ResolutionError with code unknown-sphere, unknown-machine, or
    stage-not-declared, naming the first segment that failed.
    """
    head, dot, stage_text = text.rpartition(".")
    if not dot or not head:
        raise ResolutionError("stage-not-declared", text, text)
    segments = head.split("/")
    if len(segments) < 2:
        raise ResolutionError("unknown-machine", head, text)
    sphere: Optional[Sphere] = None
    for root in model.roots:
        if root.name == segments[0]:
            sphere = root
            break
    if sphere is None:
        raise ResolutionError("unknown-sphere", segments[0], text)
    for seg in segments[1:-1]:
        nxt = sphere.child(seg)
        if nxt is None:
            raise ResolutionError("unknown-sphere", seg, text)
        sphere = nxt
    machine = sphere.machine(segments[-1])
    if machine is None:
        raise ResolutionError("unknown-machine", segments[-1], text)
    stage = STAGES_BY_NAME.get(stage_text)
    if stage is None or not machine.has_stage(stage):
        raise ResolutionError("stage-not-declared", stage_text, text)
    return Endpoint(tuple(segments), stage)


def expand_label(model: Model, label: str) -> list[str]:
    """A user label covers itself plus the derived labels of its chain."""
    out = []
    if label in model._flows_by_label or label in model._triggers_by_label:
        out.append(label)
    prefix = label + "."
    for known in model._flows_by_label:
        if known.startswith(prefix):
            out.append(known)
    return out


def subdiagram(model: Model, labels: Sequence[str]) -> Region:
    """Region with exactly the arcs named by ``labels`` (plus chain-derived
    labels) and those arcs' endpoint stages.  Raises UnknownLabelError listing
    every label that resolves to nothing.
    """
    if not model.canonical:
        raise ModelError("subdiagram requires a canonical model")
    missing = []
    arc_labels: set[str] = set()
    flow_labels: set[str] = set()
    stages: set[Endpoint] = set()
    for label in labels:
        found = expand_label(model, label)
        if not found:
            missing.append(label)
            continue
        for name in found:
            arc_labels.add(name)
            arc = model.flow(name)
            if arc is not None:
                flow_labels.add(name)
                stages.add(arc.src)
                stages.add(arc.dst)
            else:
                trig = model.trigger(name)
                stages.add(trig.src)
                stages.add(trig.dst)
    if missing:
        raise UnknownLabelError(missing)
    return Region(frozenset(arc_labels), frozenset(stages), frozenset(flow_labels))


def shortest_chain(src_stage: Stage, dst_stage: Stage, same_machine: bool) -> Optional[list[tuple[int, Stage]]]:
    """Unique shortest legal stage chain between two endpoints.

    Nodes are (machine-side, stage) with side 0 = source machine and side 1 =
    destination machine; for same-machine arcs only side 0 exists.  Returns
    the node list including both ends, or None when no legal chain exists.
    Raises ModelError if several shortest chains tie (the legality table is
    built so that this cannot happen; a meta-test asserts it).
    """
    start = (0, src_stage)
    goal = (0 if same_machine else 1, dst_stage)

    def successors(node: tuple[int, Stage]) -> list[tuple[int, Stage]]:
        side, stage = node
        out = [(side, b) for (a, b) in INTRA_EDGES if a is stage]
        if not same_machine and side == 0 and stage is Stage.TRANSFER:
            out.append((1, Stage.TRANSFER))
        return out

    # BFS collecting every shortest path; a chain must have at least one arc.
    best: Optional[int] = None
    paths: list[list[tuple[int, Stage]]] = []
    queue: deque[list[tuple[int, Stage]]] = deque([[start]])
    while queue:
        path = queue.popleft()
        if best is not None and len(path) > best + 1:
            break
        node = path[-1]
        if node == goal and len(path) > 1:
            if best is None:
                best = len(path) - 1
            if len(path) - 1 == best:
                paths.append(path)
            continue
        if best is not None and len(path) - 1 >= best:
            continue
        for nxt in successors(node):
            if nxt in path and nxt != goal:
                continue  # no revisits except to close a loop at the goal
            queue.append(path + [nxt])
    if not paths:
        return None
    if len(paths) > 1:
        raise ModelError(
            f"ambiguous expansion {src_stage}->{dst_stage} (same_machine={same_machine})"
        )
    return paths[0]
