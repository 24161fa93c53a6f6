"""Deterministic discrete-tick token simulation.

Things dwell one (configurable) tick per stage and then move along flow
arcs; a thing expanded onto a shorthand chain follows its own chain to the
end, which keeps shared transfer stages unambiguous.  Triggers fire when a
thing completes its dwell at the trigger's source: a trigger into a create
stage spawns a new thing, while a trigger into any other stage deposits an
enable there — and a stage targeted by such a trigger releases waiting
things only against enables, which also waive their remaining dwell.

Every choice is resolved by the canonical order (arc label, then thing id),
so runs are bit-identical across repeats and platforms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Protocol

from . import exprs
from .diagnostics import Diagnostic, SourceSpan, error
from .lexer import Token, tokenize
from .model import Endpoint, Model, Stage, TriggerArc, resolve_endpoint, ResolutionError

Value = exprs.Value


class SimError(Exception):
    pass


@dataclass(frozen=True)
class TraceEvent:
    tick: int
    action: str  # spawn | move | consume | trigger-fired | blocked | quiescent
    thing: Optional[int]
    kind: Optional[str]
    at: Optional[str]
    arc: Optional[str]

    def to_json(self) -> dict:
        return {
            "tick": self.tick,
            "action": self.action,
            "thing": self.thing,
            "kind": self.kind,
            "at": self.at,
            "arc": self.arc,
        }


Trace = list  # of TraceEvent


@dataclass(frozen=True)
class Injection:
    tick: int
    kind: str
    target: Endpoint
    attrs: tuple[tuple[str, Value], ...]


@dataclass(frozen=True)
class Scenario:
    injections: tuple[Injection, ...] = ()


class Gate(Protocol):
    """Behavior enforcement hook consulted before region arcs act."""

    def permits(self, arc_label: str) -> bool: ...

    def observe(self, event: TraceEvent) -> None: ...


@dataclass
class SimConfig:
    max_ticks: int = 1000
    stage_dwell: int = 1
    gate: Optional[Gate] = None

    def __post_init__(self) -> None:
        if self.max_ticks < 0:
            raise SimError("max_ticks must be >= 0")
        if self.stage_dwell < 1:
            raise SimError("stage_dwell must be >= 1")


@dataclass
class Thing:
    id: int
    kind: str
    attrs: dict[str, Value]
    loc: Endpoint
    born_tick: int
    arrival_tick: int
    # Chain bookkeeping: the family and index of the last flow arc taken.
    chain_family: Optional[str] = None
    chain_index: int = 0
    chain_len: int = 0

    @property
    def mid_chain(self) -> bool:
        return self.chain_family is not None and self.chain_index + 1 < self.chain_len


@dataclass
class _PendingFiring:
    enqueued: int
    label: str
    trigger: TriggerArc
    source_id: int
    spawn_values: dict[str, Value]


def eval_guard(guard: exprs.Expr, thing: Thing) -> bool:
    """Evaluate an arc guard against a thing.  Raises exprs.EvalError on
    division by zero; callers treat that as guard-false plus a blocked
    trace record."""
    return bool(exprs.evaluate(guard, thing.attrs))


class Simulation:
    """One run's worth of mutable state over an immutable model."""

    def __init__(self, model: Model, scenario: Scenario, config: SimConfig) -> None:
        self.model = model
        self.config = config
        self.tick = 0
        self.things: dict[int, Thing] = {}
        self.next_id = 1
        self.pending_enables: dict[Endpoint, list[int]] = {}
        self.pending_firings: list[_PendingFiring] = []
        self.gated = model.gated_endpoints()
        self.injections = sorted(
            scenario.injections, key=lambda inj: inj.tick
        )  # stable: ties keep declaration order
        self._next_injection = 0
        self.trace: Trace = []
        self._emit_batch(self._apply_injections())

    # Event plumbing -------------------------------------------------------

    def _emit(self, event: TraceEvent) -> None:
        self.trace.append(event)
        if self.config.gate is not None:
            self.config.gate.observe(event)

    def _emit_batch(self, events: Iterable[TraceEvent]) -> None:
        for e in events:
            self._emit(e)

    # Spawning -------------------------------------------------------------

    def _spawn(self, kind_name: str, target: Endpoint, values: dict[str, Value]) -> tuple[Thing, TraceEvent]:
        kind = self.model.kinds[kind_name]
        attrs: dict[str, Value] = {}
        for spec in kind.attrs:
            if spec.name in values:
                v = values[spec.name]
            elif spec.default is not None:
                v = spec.default
            else:
                raise SimError(f"spawn of {kind_name} lacks attribute '{spec.name}'")
            if spec.type == "dec" and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            attrs[spec.name] = v
        thing = Thing(self.next_id, kind_name, attrs, target, self.tick, self.tick)
        self.next_id += 1
        self.things[thing.id] = thing
        return thing, TraceEvent(self.tick, "spawn", thing.id, kind_name, str(target), None)

    def _apply_injections(self) -> list[TraceEvent]:
        events: list[TraceEvent] = []
        while self._next_injection < len(self.injections):
            inj = self.injections[self._next_injection]
            if inj.tick > self.tick:
                break
            self._next_injection += 1
            _, event = self._spawn(inj.kind, inj.target, dict(inj.attrs))
            events.append(event)
        return events

    # Move candidates ------------------------------------------------------

    def _arc_candidates(self, thing: Thing, blocked: Optional[list[TraceEvent]]):
        """Flow arcs this thing could take right now, in canonical order,
        before dwell/enable eligibility is applied."""
        if thing.mid_chain:
            label = f"{thing.chain_family}.{thing.chain_index + 1}"
            arc = self.model.flow(label)
            return [arc] if arc is not None else []
        out = []
        for arc in self.model.flows_from(thing.loc):
            if not arc.is_chain_head:
                continue
            if arc.guard is not None:
                try:
                    if not eval_guard(arc.guard, thing):
                        continue
                except exprs.EvalError:
                    if blocked is not None:
                        blocked.append(
                            TraceEvent(self.tick, "blocked", thing.id, thing.kind, str(thing.loc), arc.label)
                        )
                    continue
            out.append(arc)
        return out

    def enabled_moves(self, blocked: Optional[list[TraceEvent]] = None) -> list[tuple[Thing, object]]:
        """Every (thing, arc) pair eligible to move this tick, sorted by
        (arc label, thing id).  A thing at an enable-gated stage is listed
        only while an enable is available for it."""
        dwell = self.config.stage_dwell
        moves: list[tuple[Thing, object]] = []
        budget = {ep: sum(1 for t in ticks if t < self.tick) for ep, ticks in self.pending_enables.items()}
        claimed: dict[Endpoint, int] = {}
        for thing in sorted(self.things.values(), key=lambda t: t.id):
            if thing.loc in self.gated:
                # An enable both releases the thing and waives its dwell.
                if claimed.get(thing.loc, 0) >= budget.get(thing.loc, 0):
                    continue
            elif self.tick < thing.arrival_tick + dwell:
                continue
            arcs = self._arc_candidates(thing, blocked)
            if not arcs:
                continue
            if thing.loc in self.gated:
                claimed[thing.loc] = claimed.get(thing.loc, 0) + 1
            moves.extend((thing, arc) for arc in arcs)
        moves.sort(key=lambda pair: (pair[1].label, pair[0].id))
        return moves

    # Stepping -------------------------------------------------------------

    def step(self) -> list[TraceEvent]:
        """Advance one tick; returns the trace events it produced."""
        start = len(self.trace)
        self.tick += 1
        gate = self.config.gate

        self._emit_batch(self._apply_injections())

        # Dwell completions: assigns evaluate, then triggers enqueue.
        dwell = self.config.stage_dwell
        completing = [
            t for t in sorted(self.things.values(), key=lambda t: t.id)
            if t.arrival_tick + dwell == self.tick
        ]
        new_firings: list[_PendingFiring] = []
        for thing in completing:
            machine = self.model.find_machine(thing.loc.path)
            if machine is not None and thing.loc.stage is Stage.PROCESS:
                for name, expr in machine.assigns:
                    try:
                        value = exprs.evaluate(expr, thing.attrs)
                    except exprs.EvalError:
                        self._emit(TraceEvent(self.tick, "blocked", thing.id, thing.kind, str(thing.loc), None))
                        continue
                    spec = self.model.kinds[thing.kind].attr(name)
                    if spec is not None and spec.type == "dec" and isinstance(value, int):
                        value = float(value)
                    thing.attrs[name] = value
            for trig in self.model.triggers_from(thing.loc):
                if trig.guard is not None:
                    try:
                        if not eval_guard(trig.guard, thing):
                            continue
                    except exprs.EvalError:
                        self._emit(TraceEvent(self.tick, "blocked", thing.id, thing.kind, str(thing.loc), trig.label))
                        continue
                values: dict[str, Value] = {}
                failed = False
                for name, expr in trig.spawn_attrs:
                    try:
                        values[name] = exprs.evaluate(expr, thing.attrs)
                    except exprs.EvalError:
                        self._emit(TraceEvent(self.tick, "blocked", thing.id, thing.kind, str(thing.loc), trig.label))
                        failed = True
                        break
                if not failed:
                    new_firings.append(_PendingFiring(self.tick, trig.label, trig, thing.id, values))
        new_firings.sort(key=lambda f: (f.label, f.source_id))
        self.pending_firings.extend(new_firings)

        # Firing phase: spawn, enable, consume.  Firings a gate denies stay
        # queued and retry on later ticks.
        consumed: set[int] = set()
        still_pending: list[_PendingFiring] = []
        for firing in self.pending_firings:
            if gate is not None and not gate.permits(firing.label):
                still_pending.append(firing)
                continue
            trig = firing.trigger
            source = self.things.get(firing.source_id)
            source_kind = source.kind if source is not None else None
            self._emit(
                TraceEvent(self.tick, "trigger-fired", firing.source_id, source_kind, str(trig.dst), firing.label)
            )
            if trig.dst.stage is Stage.CREATE:
                target_kind = self.model.find_machine(trig.dst.path).kind
                _, event = self._spawn(target_kind, trig.dst, firing.spawn_values)
                self._emit(event)
            else:
                self.pending_enables.setdefault(trig.dst, []).append(self.tick)
            if trig.consuming and source is not None and source.loc == trig.src:
                consumed.add(source.id)
        self.pending_firings = still_pending
        for thing_id in sorted(consumed):
            thing = self.things.pop(thing_id)
            self._emit(TraceEvent(self.tick, "consume", thing.id, thing.kind, str(thing.loc), None))

        # Moves: first guard-passing arc per thing, canonical order overall.
        blocked: list[TraceEvent] = []
        candidates = self.enabled_moves(blocked)
        self._emit_batch(blocked)
        moved: set[int] = set()
        for thing, arc in candidates:
            if thing.id in moved or thing.id not in self.things:
                continue
            if gate is not None and not gate.permits(arc.label):
                continue
            if thing.loc in self.gated:
                ticks = self.pending_enables.get(thing.loc, [])
                idx = next((i for i, t in enumerate(ticks) if t < self.tick), None)
                if idx is None:
                    continue
                ticks.pop(idx)
                if not ticks:
                    del self.pending_enables[thing.loc]
            moved.add(thing.id)
            thing.loc = arc.dst
            thing.arrival_tick = self.tick
            thing.chain_family = arc.family
            thing.chain_index = arc.index
            thing.chain_len = arc.chain_len
            self._emit(TraceEvent(self.tick, "move", thing.id, thing.kind, str(arc.dst), arc.label))

        return self.trace[start:]

    # Liveness -------------------------------------------------------------

    def live(self) -> bool:
        """False once nothing can ever happen again (quiescence)."""
        if self._next_injection < len(self.injections):
            return True
        gate = self.config.gate
        for firing in self.pending_firings:
            if gate is None or gate.permits(firing.label):
                return True
        dwell = self.config.stage_dwell
        for thing in self.things.values():
            if self.tick < thing.arrival_tick + dwell:
                # Still dwelling: completion may fire triggers or, once
                # assigns run, open a guarded arc.
                if thing.mid_chain or self.model.flows_from(thing.loc) or self.model.triggers_from(thing.loc):
                    return True
                continue
            arcs = self._arc_candidates(thing, None)
            if not arcs:
                continue
            if thing.loc in self.gated:
                if not any(t <= self.tick for t in self.pending_enables.get(thing.loc, [])):
                    continue
            if gate is None or any(gate.permits(a.label) for a in arcs):
                return True
        return False

    def copy(self) -> "Simulation":
        """Cheap fork for what-if exploration; the gate is not forked."""
        clone = object.__new__(Simulation)
        clone.model = self.model
        clone.config = replace(self.config)
        clone.tick = self.tick
        clone.things = {i: replace(t, attrs=dict(t.attrs)) for i, t in self.things.items()}
        clone.next_id = self.next_id
        clone.pending_enables = {ep: list(ts) for ep, ts in self.pending_enables.items()}
        clone.pending_firings = list(self.pending_firings)
        clone.gated = self.gated
        clone.injections = self.injections
        clone._next_injection = self._next_injection
        clone.trace = list(self.trace)
        return clone


def run(model: Model, scenario: Scenario, config: Optional[SimConfig] = None) -> Trace:
    """Step until quiescence or max_ticks; quiescence is recorded as a final
    trace event."""
    config = config or SimConfig()
    sim = Simulation(model, scenario, config)
    while sim.tick < config.max_ticks and sim.live():
        sim.step()
    if not sim.live():
        sim._emit(TraceEvent(sim.tick, "quiescent", None, None, None, None))
    return sim.trace


# Scenario files (.fms) ------------------------------------------------------


def parse_scenario(source: str, file: str = "<scenario>") -> tuple[Scenario, list[Diagnostic]]:
    """Parse ``inject <kind> at <endpoint> tick <n> { attr = literal, ... }``
    lines.  Total: problems come back as diagnostics."""
    tokens, diags = tokenize(source, file)
    injections: list[Injection] = []
    pos = 0

    def cur() -> Token:
        return tokens[pos]

    def fail(message: str) -> None:
        diags.append(error("syntax-error", message, cur().span))

    while cur().type != "EOF":
        if cur().type != "inject":
            fail(f"expected 'inject', found '{cur().text or cur().type}'")
            while cur().type not in ("inject", "EOF"):
                pos += 1
            continue
        pos += 1
        if cur().type != "IDENT":
            fail("expected a thing-kind name")
            continue
        kind = cur().text
        pos += 1
        if cur().type != "at":
            fail("expected 'at'")
            continue
        pos += 1
        segments: list[str] = []
        stage: Optional[Stage] = None
        while cur().type == "IDENT":
            segments.append(cur().text)
            pos += 1
            if cur().type == "/":
                pos += 1
                continue
            break
        if cur().type == ".":
            pos += 1
            from .model import STAGES_BY_NAME

            if cur().text in STAGES_BY_NAME:
                stage = STAGES_BY_NAME[cur().text]
                pos += 1
        if not segments or stage is None:
            fail("expected an endpoint like sphere/machine.create")
            continue
        if cur().type != "tick":
            fail("expected 'tick'")
            continue
        pos += 1
        if cur().type != "INT":
            fail("expected a tick number")
            continue
        tick = int(cur().text)
        pos += 1
        attrs: list[tuple[str, Value]] = []
        if cur().type == "{":
            pos += 1
            while cur().type not in ("}", "EOF"):
                if cur().type == ",":
                    pos += 1
                    continue
                if cur().type != "IDENT":
                    fail("expected an attribute name")
                    break
                name = cur().text
                pos += 1
                if cur().type != "=":
                    fail("expected '='")
                    break
                pos += 1
                tok = cur()
                if tok.type in ("INT", "DEC", "STRING"):
                    attrs.append((name, tok.value))
                    pos += 1
                elif tok.type in ("true", "false"):
                    attrs.append((name, tok.type == "true"))
                    pos += 1
                elif tok.type == "-" and tokens[pos + 1].type in ("INT", "DEC"):
                    pos += 2
                    attrs.append((name, -tokens[pos - 1].value))
                else:
                    fail("expected a literal value")
                    break
            if cur().type == "}":
                pos += 1
        injections.append(Injection(tick, kind, Endpoint(tuple(segments), stage), tuple(attrs)))
    return Scenario(tuple(injections)), diags


def check_scenario(model: Model, scenario: Scenario) -> list[Diagnostic]:
    """Injections must target create stages of existing machines with the
    right kind, and must cover every attribute lacking a default."""
    span = SourceSpan("<scenario>", 1, 1, 1, 1)
    diags: list[Diagnostic] = []
    for inj in scenario.injections:
        if inj.tick < 0:
            diags.append(error("E_SCENARIO", f"injection tick {inj.tick} is negative", span))
        try:
            ep = resolve_endpoint(model, str(inj.target))
        except ResolutionError as exc:
            diags.append(error("E_SCENARIO", f"injection target {inj.target}: {exc}", span))
            continue
        if ep.stage is not Stage.CREATE:
            diags.append(error("E_SCENARIO", f"injection target {ep} is not a create stage", span))
        machine = model.find_machine(ep.path)
        if machine is not None and machine.kind != inj.kind:
            diags.append(
                error("E_SCENARIO", f"injection of '{inj.kind}' into a machine of kind '{machine.kind}'", span)
            )
        kind = model.kinds.get(inj.kind)
        if kind is None:
            diags.append(error("E_SCENARIO", f"unknown thing kind '{inj.kind}'", span))
            continue
        given = {name for name, _ in inj.attrs}
        for attr in kind.attrs:
            if attr.name not in given and attr.default is None:
                diags.append(
                    error("E_SCENARIO", f"injection of '{inj.kind}' lacks required attribute '{attr.name}'", span)
                )
        for name, value in inj.attrs:
            spec = kind.attr(name)
            if spec is None:
                diags.append(error("E_SCENARIO", f"'{inj.kind}' has no attribute '{name}'", span))
            elif not _literal_matches(spec.type, value):
                diags.append(error("E_SCENARIO", f"attribute '{name}' expects {spec.type}", span))
    return diags


def _literal_matches(type_: str, value: Value) -> bool:
    if type_ == "bool":
        return isinstance(value, bool)
    if type_ == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if type_ == "dec":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, str)


def trace_equal(a: Trace, b: Trace) -> bool:
    return [e.to_json() for e in a] == [e.to_json() for e in b]


def trace_to_lines(trace: Trace) -> str:
    return "".join(json.dumps(e.to_json(), sort_keys=True, separators=(",", ":")) + "\n" for e in trace)
