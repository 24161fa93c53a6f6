"""Diagram export (DOT) and trace serialization.

Node names follow ``sphere.machine.stage`` and all node/edge lines are
emitted sorted, so output is byte-stable across runs and platforms.
"""
from __future__ import annotations

import json
from typing import Iterable

from .behavior import BehaviorAutomaton
from .model import Model, Sphere
from .simulate import Trace, TraceEvent


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def model_to_dot(model: Model, show_implicit: bool = True) -> str:
    """One nested cluster per sphere, one node per (machine, stage), solid
    flow edges, dashed trigger edges.  With show_implicit=False the stages
    inserted by canonicalization are elided and each chain collapses back to
    its authored shorthand edge."""
    lines: list[str] = ["digraph model {", "  rankdir=LR;", "  node [shape=box];"]

    def emit_sphere(sphere: Sphere, prefix: tuple[str, ...], depth: int) -> None:
        pad = "  " * (depth + 1)
        path = prefix + (sphere.name,)
        lines.append(f"{pad}subgraph {_q('cluster_' + '.'.join(path))} {{")
        lines.append(f"{pad}  label={_q(sphere.name)};")
        node_lines: list[str] = []
        for machine in sphere.machines:
            stages = machine.stages() if show_implicit else machine.declared
            for stage in stages:
                node_id = ".".join(path) + f".{machine.name}.{stage.value}"
                attrs = [f"label={_q(machine.name + '.' + stage.value)}"]
                if stage in machine.implicit:
                    attrs.append("style=dashed")
                node_lines.append(f"{pad}  {_q(node_id)} [{', '.join(attrs)}];")
        lines.extend(sorted(node_lines))
        for child in sphere.children:
            emit_sphere(child, path, depth + 1)
        lines.append(f"{pad}}}")

    for root in model.roots:
        emit_sphere(root, (), 0)

    def node_of(ep) -> str:
        return ".".join(ep.path) + "." + ep.stage.value

    edge_lines: list[str] = []
    if show_implicit:
        for arc in model.flows:
            attrs = []
            if not arc.label.startswith("@"):
                attrs.append(f"label={_q(arc.label)}")
            if arc.is_implicit:
                attrs.append("color=gray")
            suffix = f" [{', '.join(attrs)}]" if attrs else ""
            edge_lines.append(f"  {_q(node_of(arc.src))} -> {_q(node_of(arc.dst))}{suffix};")
    else:
        for arc in model.flows:
            if not arc.is_chain_head:
                continue
            src = arc.authored_src or arc.src
            dst = arc.authored_dst or arc.dst
            suffix = f" [label={_q(arc.label)}]" if not arc.label.startswith("@") else ""
            edge_lines.append(f"  {_q(node_of(src))} -> {_q(node_of(dst))}{suffix};")
    for trig in model.triggers:
        attrs = ["style=dashed"]
        if not trig.label.startswith("@"):
            attrs.append(f"label={_q(trig.label)}")
        edge_lines.append(f"  {_q(node_of(trig.src))} -> {_q(node_of(trig.dst))} [{', '.join(attrs)}];")
    lines.extend(sorted(edge_lines))
    lines.append("}")
    return "\n".join(lines) + "\n"


def behavior_to_dot(automaton: BehaviorAutomaton) -> str:
    """States as nodes (accepting doubled), occurrence-labeled edges,
    interrupt-watcher edges dashed."""
    lines = ["digraph behavior {", "  rankdir=LR;"]
    node_lines = []
    for state in range(automaton.n_states):
        shape = "doublecircle" if state in automaton.accepting else "circle"
        node_lines.append(f"  {_q(f's{state}')} [shape={shape}];")
    lines.extend(sorted(node_lines))
    edge_lines = []
    for (src, label), dst in automaton.transitions.items():
        attrs = [f"label={_q(label)}"]
        if (src, label) in automaton.watcher_edges:
            attrs.append("style=dashed")
        edge_lines.append(f"  {_q(f's{src}')} -> {_q(f's{dst}')} [{', '.join(attrs)}];")
    lines.extend(sorted(edge_lines))
    lines.append("}")
    return "\n".join(lines) + "\n"


# Trace files ----------------------------------------------------------------

TRACE_FIELDS = ("tick", "action", "thing", "kind", "at", "arc")
_ACTIONS = {"spawn", "move", "consume", "trigger-fired", "blocked", "quiescent"}


class TraceParseError(Exception):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def write_trace(trace: Trace) -> str:
    """One compact JSON object per line; key order is fixed by sorting."""
    return "".join(
        json.dumps(event.to_json(), sort_keys=True, separators=(",", ":")) + "\n" for event in trace
    )


def read_trace(text: str | Iterable[str]) -> Trace:
    """Inverse of write_trace; raises TraceParseError naming the bad line."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    trace: Trace = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(i, f"not valid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise TraceParseError(i, "expected a JSON object")
        for field in TRACE_FIELDS:
            if field not in obj:
                raise TraceParseError(i, f"missing '{field}' field")
        if not isinstance(obj["tick"], int):
            raise TraceParseError(i, "'tick' must be an integer")
        if obj["action"] not in _ACTIONS:
            raise TraceParseError(i, f"unknown action '{obj['action']}'")
        trace.append(
            TraceEvent(obj["tick"], obj["action"], obj["thing"], obj["kind"], obj["at"], obj["arc"])
        )
    return trace


# DOT mini-grammar ------------------------------------------------------------


def dot_check(text: str) -> list[str]:
    """Validate DOT output against a small structural grammar; returns a
    list of problems (empty when the document parses)."""
    problems: list[str] = []
    tokens = _dot_tokenize(text, problems)
    if problems:
        return problems
    pos = 0

    def cur() -> str:
        return tokens[pos][0] if pos < len(tokens) else "EOF"

    def cur_text() -> str:
        return tokens[pos][1] if pos < len(tokens) else ""

    def eat(type_: str) -> bool:
        nonlocal pos
        if cur() == type_:
            pos += 1
            return True
        problems.append(f"expected {type_}, found {cur_text() or cur()}")
        return False

    def parse_attrs() -> None:
        nonlocal pos
        if cur() != "[":
            return
        pos += 1
        while cur() not in ("]", "EOF"):
            if not eat("ID"):
                return
            if cur() == "=":
                pos += 1
                if cur() != "ID":
                    problems.append("expected a value after '='")
                    return
                pos += 1
            if cur() == ",":
                pos += 1
        eat("]")

    def parse_body() -> None:
        nonlocal pos
        while cur() not in ("}", "EOF"):
            if cur() == "ID" and cur_text() == "subgraph":
                pos += 1
                if cur() == "ID":
                    pos += 1
                if eat("{"):
                    parse_body()
                    eat("}")
                continue
            if not eat("ID"):
                return
            if cur() == "=":  # graph-level attribute like rankdir=LR
                pos += 1
                if cur() != "ID":
                    problems.append("expected a value after '='")
                    return
                pos += 1
            else:
                while cur() == "->":
                    pos += 1
                    if not eat("ID"):
                        return
                parse_attrs()
            if not eat(";"):
                return

    if cur() == "ID" and cur_text() == "digraph":
        pos += 1
    else:
        problems.append("document must start with 'digraph'")
        return problems
    if cur() == "ID":
        pos += 1
    if eat("{"):
        parse_body()
        eat("}")
    if not problems and pos != len(tokens):
        problems.append("trailing content after closing brace")
    return problems


def _dot_tokenize(text: str, problems: list[str]) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                problems.append("unterminated quoted string")
                return tokens
            tokens.append(("ID", "".join(buf)))
            i = j + 1
            continue
        if text.startswith("->", i):
            tokens.append(("->", "->"))
            i += 2
            continue
        if ch in "{}[];,=":
            tokens.append((ch, ch))
            i += 1
            continue
        if ch.isalnum() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_."):
                j += 1
            tokens.append(("ID", text[i:j]))
            i = j
            continue
        problems.append(f"unexpected character {ch!r} in DOT output")
        return tokens
    return tokens
