"""Shorthand expansion: rewrite authored arcs into full legal stage chains.

Authored sources elide intermediate stages the way hand-drawn diagrams do; a
single arrow from one machine's process to another's becomes the five-step
release/transfer/transfer/receive/process chain.  Inserted stages are flagged
implicit on their machines, and inserted arcs take derived labels
``<label>.k`` so each chain remains addressable as one family.
"""
from __future__ import annotations

from . import ast
from .diagnostics import Diagnostic, error
from .model import (
    AttrSpec,
    BehaviorDecl,
    Endpoint,
    EventDef,
    FlowArc,
    Machine,
    Model,
    Region,
    Sphere,
    Stage,
    ThingKind,
    TriggerArc,
    shortest_chain,
    subdiagram,
)

STAGE_ORDER = (Stage.CREATE, Stage.PROCESS, Stage.RELEASE, Stage.TRANSFER, Stage.RECEIVE)


class CanonError(Exception):
    """Canonicalization failed; carries a diagnostic for reporting."""

    def __init__(self, diagnostic: Diagnostic) -> None:
        super().__init__(diagnostic.render())
        self.diagnostic = diagnostic


def canonicalize(tree: ast.ModelAst) -> Model:
    """Expand every shorthand arc into its unique minimal legal chain.

    Requires an AST that parsed with zero error diagnostics.  Raises
    CanonError with code no-legal-expansion when an arc cannot be completed
    into a legal chain (anything targeting a create stage, for instance).
    """
    kinds = {
        k.name: ThingKind(k.name, tuple(AttrSpec(a.name, a.type, a.default) for a in k.attrs))
        for k in tree.kinds
    }

    machines_by_path: dict[tuple[str, ...], Machine] = {}

    def build_sphere(decl: ast.SphereDecl, prefix: tuple[str, ...]) -> Sphere:
        path = prefix + (decl.name,)
        sphere = Sphere(decl.name)
        for m in decl.machines:
            declared = tuple(s for s, implicit in m.stages if not implicit)
            implicit = tuple(s for s, is_implicit in m.stages if is_implicit)
            machine = Machine(m.name, m.kind, declared, implicit, tuple((n, e) for n, e, _ in m.assigns))
            sphere.machines.append(machine)
            machines_by_path[path + (m.name,)] = machine
        for child in decl.children:
            sphere.children.append(build_sphere(child, path))
        return sphere

    roots = [build_sphere(s, ()) for s in tree.spheres]

    arcs: list[tuple[ast.ArcDecl, tuple[str, ...], tuple[str, ...]]] = []

    def collect(decl: ast.SphereDecl) -> None:
        for arc in decl.arcs:
            arcs.append((arc, arc.src.segments, arc.dst.segments))
        for child in decl.children:
            collect(child)

    for s in tree.spheres:
        collect(s)

    flows: list[FlowArc] = []
    triggers: list[TriggerArc] = []
    auto_counter = 0
    implicit_added: dict[tuple[str, ...], set[Stage]] = {}

    def note_stage(path: tuple[str, ...], stage: Stage) -> None:
        machine = machines_by_path[path]
        if not machine.has_stage(stage):
            implicit_added.setdefault(path, set()).add(stage)
            machine.implicit = tuple(machine.implicit) + (stage,)

    for arc, src_path, dst_path in arcs:
        label = arc.label
        if label is None:
            auto_counter += 1
            label = f"@{auto_counter:04d}"
        src = Endpoint(src_path, arc.src.stage)
        dst = Endpoint(dst_path, arc.dst.stage)
        if not arc.is_flow:
            triggers.append(
                TriggerArc(src, dst, label, arc.guard,
                           tuple((n, e) for n, e, _ in arc.spawn_attrs), arc.consuming)
            )
            continue
        same = src_path == dst_path
        nodes = shortest_chain(src.stage, dst.stage, same)
        if nodes is None:
            raise CanonError(
                error("no-legal-expansion", f"no legal chain from {arc.src} to {arc.dst}", arc.span)
            )
        chain_len = len(nodes) - 1
        for i in range(chain_len):
            side_a, stage_a = nodes[i]
            side_b, stage_b = nodes[i + 1]
            ep_a = Endpoint(src_path if side_a == 0 else dst_path, stage_a)
            ep_b = Endpoint(src_path if side_b == 0 else dst_path, stage_b)
            note_stage(ep_a.path, stage_a)
            note_stage(ep_b.path, stage_b)
            flows.append(
                FlowArc(
                    ep_a,
                    ep_b,
                    label if i == 0 else f"{label}.{i}",
                    arc.guard if i == 0 else None,
                    family=label,
                    index=i,
                    chain_len=chain_len,
                    authored_src=src,
                    authored_dst=dst,
                )
            )

    # Keep implicit stage order stable for printing and signatures.
    for machine in machines_by_path.values():
        ordered = tuple(s for s in STAGE_ORDER if s in machine.implicit and s not in machine.declared)
        machine.implicit = ordered

    model = Model(
        kinds=kinds,
        roots=roots,
        flows=flows,
        triggers=triggers,
        events=[],
        behaviors=[BehaviorDecl(b.name, b.program) for b in tree.behaviors],
        canonical=True,
    )
    model.reindex()

    for event in tree.events:
        region = _resolve_region(model, event)
        model.events.append(EventDef(event.name, region))

    return model


def _resolve_region(model: Model, event: ast.EventDecl) -> Region:
    try:
        region = subdiagram(model, event.labels)
    except Exception as exc:
        raise CanonError(
            error("unknown-label", f"event '{event.name}': {exc}", event.span)
        ) from exc
    if region.is_empty:
        raise CanonError(
            error("empty-region", f"event '{event.name}' has an empty region", event.span)
        )
    return region


def load_model(source: str, file: str = "<input>") -> tuple[Model | None, list[Diagnostic]]:
    """Parse + canonicalize in one step; returns (model, diagnostics)."""
    from .parser import parse

    tree, diags = parse(source, file)
    if any(d.is_error for d in diags):
        return None, diags
    try:
        return canonicalize(tree), diags
    except CanonError as exc:
        return None, diags + [exc.diagnostic]
