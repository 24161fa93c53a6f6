"""Event regions, occurrence detection, and chronology control.

An event names a region of the model; it occurs when one thing traverses
every flow arc of that region.  Chronology programs compose events with
seq / choice / par / repeat-possible / interrupt and compile to a
deterministic automaton.  Conformance feeds detected occurrences through
the automaton: a trace conforms while no occurrence deviates from it
(an unfinished program is not a violation — a wrong step is).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import ast
from .model import (
    Choice,
    Chrono,
    EventDef,
    Interrupt,
    Model,
    Par,
    Ref,
    Repeat,
    Seq,
    subdiagram,
    UnknownLabelError,
)
from .simulate import TraceEvent


class BehaviorError(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


def build_event(model: Model, decl: ast.EventDecl) -> EventDef:
    """Resolve an event declaration's region labels into an EventDef."""
    try:
        region = subdiagram(model, decl.labels)
    except UnknownLabelError as exc:
        raise BehaviorError("unknown-label", str(exc)) from exc
    if region.is_empty:
        raise BehaviorError("empty-region", f"event '{decl.name}' has an empty region")
    return EventDef(decl.name, region)


@dataclass(frozen=True)
class Occurrence:
    event: str
    start: int
    end: int
    thing: int

    def to_json(self) -> dict:
        return {"event": self.event, "start": self.start, "end": self.end, "thing": self.thing}


class OccurrenceScanner:
    """Incremental detector shared by offline checking and the live gate.

    Tracks, per (event, thing), which region flow arcs that thing has
    traversed; emits an occurrence when the set is complete and resets so
    the same event can occur again.
    """

    def __init__(self, events: Sequence[EventDef]) -> None:
        self.events = list(events)
        self._flow_sets = {e.name: set(e.region.flow_labels) for e in self.events}
        self._arc_sets = {e.name: set(e.region.arc_labels) for e in self.events}
        self._stage_sets = {e.name: {str(ep) for ep in e.region.stages} for e in self.events}
        self._progress: dict[tuple[str, int], tuple[int, set[str]]] = {}

    def feed(self, event: TraceEvent) -> list[Occurrence]:
        """Consume one trace record; return occurrences it completed."""
        out: list[Occurrence] = []
        if event.thing is None:
            return out
        for edef in self.events:
            name = edef.name
            touched = False
            traversed: Optional[str] = None
            if event.action == "move" and event.arc in self._flow_sets[name]:
                touched = True
                traversed = event.arc
            elif event.action == "trigger-fired" and event.arc in self._arc_sets[name]:
                touched = True
            elif event.action in ("spawn", "consume") and event.at in self._stage_sets[name]:
                touched = True
            if not touched:
                continue
            key = (name, event.thing)
            start, seen = self._progress.get(key, (event.tick, set()))
            if traversed is not None:
                seen = seen | {traversed}
            self._progress[key] = (start, seen)
            if self._flow_sets[name] and seen >= self._flow_sets[name]:
                out.append(Occurrence(name, start, event.tick, event.thing))
                del self._progress[key]
        return out


def detect_occurrences(trace: Iterable[TraceEvent], events: Sequence[EventDef]) -> list[Occurrence]:
    """All occurrences in the trace, in completion order.

    Completion order is monotone in end tick and, for traces whose
    occurrences do not overlap, identical to start-tick order.  It is also
    exactly the order an enforcement gate sees completions, which keeps
    enforced runs conforming when occurrences of different events overlap.
    """
    scanner = OccurrenceScanner(events)
    found: list[Occurrence] = []
    for record in trace:
        found.extend(scanner.feed(record))
    return found


# Automaton ------------------------------------------------------------------


@dataclass
class _Fragment:
    start: int
    finals: frozenset[int]
    nodes: frozenset[int]


class _NfaBuilder:
    def __init__(self) -> None:
        self.next_node = 0
        # (src, label-or-None, dst, is_watcher)
        self.edges: list[tuple[int, Optional[str], int, bool]] = []

    def node(self) -> int:
        self.next_node += 1
        return self.next_node - 1

    def edge(self, src: int, label: Optional[str], dst: int, watcher: bool = False) -> None:
        self.edges.append((src, label, dst, watcher))

    def build(self, node: Chrono, known: Optional[set[str]]) -> _Fragment:
        if isinstance(node, Ref):
            if known is not None and node.event not in known:
                raise BehaviorError("unresolved-ref", f"unknown event '{node.event}'")
            a, b = self.node(), self.node()
            self.edge(a, node.event, b)
            return _Fragment(a, frozenset({b}), frozenset({a, b}))
        if isinstance(node, Seq):
            frags = [self.build(c, known) for c in node.children]
            for left, right in zip(frags, frags[1:]):
                for f in left.finals:
                    self.edge(f, None, right.start)
            nodes = frozenset().union(*(f.nodes for f in frags))
            return _Fragment(frags[0].start, frags[-1].finals, nodes)
        if isinstance(node, Choice):
            frags = [self.build(c, known) for c in node.children]
            start = self.node()
            for f in frags:
                self.edge(start, None, f.start)
            finals = frozenset().union(*(f.finals for f in frags))
            nodes = frozenset({start}).union(*(f.nodes for f in frags))
            return _Fragment(start, finals, nodes)
        if isinstance(node, Par):
            frags = [self.build(c, known) for c in node.children]
            merged = frags[0]
            for other in frags[1:]:
                merged = self._shuffle(merged, other)
            return merged
        if isinstance(node, Repeat):
            inner = self.build(node.child, known)
            for f in inner.finals:
                self.edge(f, None, inner.start)
            if not node.possible:
                return inner
            start = self.node()
            self.edge(start, None, inner.start)
            return _Fragment(start, inner.finals | {start}, inner.nodes | {start})
        if isinstance(node, Interrupt):
            body = self.build(node.body, known)
            watcher = self.build(node.watcher, known)
            handler = self.build(node.handler, known)
            # Tag the watcher's own transitions so diagrams can dash them.
            self.edges = [
                (s, lbl, d, True if s in watcher.nodes and d in watcher.nodes and lbl is not None else w)
                for (s, lbl, d, w) in self.edges
            ]
            for f in watcher.finals:
                self.edge(f, None, handler.start)
            # The watcher is armed at every point during the body, not after
            # the body has completed.
            for s in body.nodes - body.finals:
                self.edge(s, None, watcher.start)
            nodes = body.nodes | watcher.nodes | handler.nodes
            return _Fragment(body.start, body.finals | handler.finals, nodes)
        raise BehaviorError("unresolved-ref", f"not a chronology node: {node!r}")

    def _shuffle(self, a: _Fragment, b: _Fragment) -> _Fragment:
        """Free interleaving of two fragments (both must complete)."""
        da = self._determinize_fragment(a)
        db = self._determinize_fragment(b)
        mapping: dict[tuple[int, int], int] = {}

        def get(pair: tuple[int, int]) -> int:
            if pair not in mapping:
                mapping[pair] = self.node()
            return mapping[pair]

        start = get((da["start"], db["start"]))
        pairs = [(da["start"], db["start"])]
        seen = {pairs[0]}
        while pairs:
            pa, pb = pairs.pop()
            src = get((pa, pb))
            for (label, watcher), dst in sorted(da["trans"].get(pa, {}).items()):
                nxt = (dst, pb)
                self.edge(src, label, get(nxt), watcher)
                if nxt not in seen:
                    seen.add(nxt)
                    pairs.append(nxt)
            for (label, watcher), dst in sorted(db["trans"].get(pb, {}).items()):
                nxt = (pa, dst)
                self.edge(src, label, get(nxt), watcher)
                if nxt not in seen:
                    seen.add(nxt)
                    pairs.append(nxt)
        finals = frozenset(
            get((x, y)) for (x, y) in seen if x in da["finals"] and y in db["finals"]
        )
        nodes = frozenset(mapping.values())
        return _Fragment(start, finals, nodes)

    def _determinize_fragment(self, frag: _Fragment) -> dict:
        """Subset-construct one fragment in isolation (for shuffle products)."""
        closure = _closures(self.edges, frag.nodes)
        start_set = closure[frag.start]
        states: dict[frozenset[int], int] = {start_set: 0}
        trans: dict[int, dict[tuple[str, bool], int]] = {}
        queue = [start_set]
        counter = 1
        while queue:
            current = queue.pop(0)
            sid = states[current]
            by_label: dict[str, tuple[set[int], bool]] = {}
            for (s, label, d, w) in self.edges:
                if label is None or s not in current or s not in frag.nodes:
                    continue
                targets, watcher = by_label.get(label, (set(), False))
                targets |= closure[d]
                by_label[label] = (targets, watcher or w)
            for label in sorted(by_label):
                targets, watcher = by_label[label]
                key = frozenset(targets)
                if key not in states:
                    states[key] = counter
                    counter += 1
                    queue.append(key)
                trans.setdefault(sid, {})[(label, watcher)] = states[key]
        finals = {sid for subset, sid in states.items() if subset & frag.finals}
        return {"start": states[start_set], "trans": trans, "finals": finals}


def _closures(edges: list, restrict: frozenset[int]) -> dict[int, frozenset[int]]:
    eps: dict[int, set[int]] = {}
    for (s, label, d, _) in edges:
        if label is None and s in restrict and d in restrict:
            eps.setdefault(s, set()).add(d)
    out: dict[int, frozenset[int]] = {}
    for node in restrict:
        seen = {node}
        stack = [node]
        while stack:
            cur = stack.pop()
            for nxt in eps.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        out[node] = frozenset(seen)
    return out


@dataclass(frozen=True)
class BehaviorAutomaton:
    """Deterministic automaton over event names; every live state accepts a
    valid prefix, `accepting` marks complete executions."""

    n_states: int
    start: int
    transitions: dict[tuple[int, str], int]
    accepting: frozenset[int]
    watcher_edges: frozenset[tuple[int, str]]

    def allowed(self, state: int) -> list[str]:
        return sorted(label for (s, label) in self.transitions if s == state)

    def step(self, state: int, label: str) -> Optional[int]:
        return self.transitions.get((state, label))

    def accepts(self, labels: Sequence[str]) -> bool:
        """Language membership for a whole occurrence sequence."""
        state = self.start
        for label in labels:
            nxt = self.step(state, label)
            if nxt is None:
                return False
            state = nxt
        return state in self.accepting

    def matches_prefix(self, labels: Sequence[str]) -> bool:
        state = self.start
        for label in labels:
            nxt = self.step(state, label)
            if nxt is None:
                return False
            state = nxt
        return True


def compile_program(program: Chrono, event_names: Optional[Iterable[str]] = None) -> BehaviorAutomaton:
    """Compile a chronology tree to its deterministic automaton."""
    known = set(event_names) if event_names is not None else None
    builder = _NfaBuilder()
    frag = builder.build(program, known)
    closure = _closures(builder.edges, frozenset(range(builder.next_node)))

    start_set = closure[frag.start]
    states: dict[frozenset[int], int] = {start_set: 0}
    order: list[frozenset[int]] = [start_set]
    transitions: dict[tuple[int, str], int] = {}
    watcher_edges: set[tuple[int, str]] = set()
    index = 0
    while index < len(order):
        subset = order[index]
        sid = states[subset]
        index += 1
        by_label: dict[str, tuple[set[int], bool]] = {}
        for (s, label, d, w) in builder.edges:
            if label is None or s not in subset:
                continue
            targets, watcher = by_label.get(label, (set(), False))
            targets |= closure[d]
            by_label[label] = (targets, watcher or w)
        for label in sorted(by_label):
            targets, watcher = by_label[label]
            key = frozenset(targets)
            if key not in states:
                states[key] = len(order)
                order.append(key)
            transitions[(sid, label)] = states[key]
            if watcher:
                watcher_edges.add((sid, label))
    accepting = frozenset(states[subset] for subset in order if subset & frag.finals)
    return BehaviorAutomaton(len(order), states[start_set], transitions, accepting, frozenset(watcher_edges))


# Conformance ----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    tick: int
    expected: tuple[str, ...]
    observed: str

    def to_json(self) -> dict:
        return {"tick": self.tick, "expected": list(self.expected), "observed": self.observed}


@dataclass(frozen=True)
class Verdict:
    conforms: bool
    first_violation: Optional[Violation]
    occurrences: tuple[Occurrence, ...]
    completed: bool

    def to_json(self) -> dict:
        return {
            "conforms": self.conforms,
            "first_violation": self.first_violation.to_json() if self.first_violation else None,
            "occurrences": [o.to_json() for o in self.occurrences],
        }


def check(trace: Iterable[TraceEvent], events: Sequence[EventDef], program: Chrono | BehaviorAutomaton) -> Verdict:
    """Replay a trace's occurrences through the program's automaton."""
    automaton = program if isinstance(program, BehaviorAutomaton) else compile_program(program, {e.name for e in events})
    occurrences = detect_occurrences(trace, events)
    state = automaton.start
    violation: Optional[Violation] = None
    for occ in occurrences:
        nxt = automaton.step(state, occ.event)
        if nxt is None:
            violation = Violation(occ.start, tuple(automaton.allowed(state)), occ.event)
            break
        state = nxt
    return Verdict(
        conforms=violation is None,
        first_violation=violation,
        occurrences=tuple(occurrences),
        completed=violation is None and state in automaton.accepting,
    )


# Enforcement ----------------------------------------------------------------


class EnforcementGate:
    """Move/firing filter the simulator consults; arcs outside every event
    region always pass, region arcs pass only while their event is allowed
    by the automaton's current state."""

    def __init__(self, events: Sequence[EventDef], automaton: BehaviorAutomaton) -> None:
        self.automaton = automaton
        self.state = automaton.start
        self.dead = False
        self.scanner = OccurrenceScanner(events)
        self._owners: dict[str, set[str]] = {}
        for e in events:
            for label in e.region.arc_labels:
                self._owners.setdefault(label, set()).add(e.name)
        self.occurrences: list[Occurrence] = []

    def permits(self, arc_label: str) -> bool:
        owners = self._owners.get(arc_label)
        if owners is None:
            return True
        if self.dead:
            return False
        allowed = set(self.automaton.allowed(self.state))
        return bool(owners & allowed)

    def observe(self, event: TraceEvent) -> None:
        for occ in sorted(self.scanner.feed(event), key=lambda o: o.event):
            self.occurrences.append(occ)
            nxt = self.automaton.step(self.state, occ.event)
            if nxt is None:
                self.dead = True
            else:
                self.state = nxt


def enforce(model: Model, program: Chrono | BehaviorAutomaton) -> EnforcementGate:
    """Build a fresh gate for one simulation run of this model."""
    automaton = (
        program
        if isinstance(program, BehaviorAutomaton)
        else compile_program(program, {e.name for e in model.events})
    )
    return EnforcementGate(model.events, automaton)
