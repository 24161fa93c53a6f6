"""Static semantic checks over a canonical model."""
from __future__ import annotations

from dataclasses import dataclass

from . import exprs
from .diagnostics import Diagnostic, SourceSpan, error, warning
from .model import Endpoint, INTRA_EDGES, Model, Stage

_SPAN = SourceSpan("<model>", 1, 1, 1, 1)


@dataclass(frozen=True)
class ModelStats:
    n_spheres: int
    n_machines: int
    n_flows: int
    n_triggers: int


@dataclass(frozen=True)
class ValidationReport:
    diagnostics: tuple[Diagnostic, ...]
    stats: ModelStats
    ok: bool

    def to_json(self) -> dict:
        return {
            "diagnostics": [d.to_json() for d in self.diagnostics],
            "stats": {
                "n_spheres": self.stats.n_spheres,
                "n_machines": self.stats.n_machines,
                "n_flows": self.stats.n_flows,
                "n_triggers": self.stats.n_triggers,
            },
            "ok": self.ok,
        }


def _machine_kind(model: Model, ep: Endpoint) -> str | None:
    machine = model.find_machine(ep.path)
    return machine.kind if machine else None


def check_legality(model: Model) -> list[Diagnostic]:
    """One error per arc that breaks the stage-transition table, crosses
    kinds on a flow, or carries a guard somewhere guards cannot live."""
    diags: list[Diagnostic] = []
    for arc in model.flows:
        same = arc.src.path == arc.dst.path
        pair = (arc.src.stage, arc.dst.stage)
        legal = pair in INTRA_EDGES if same else pair == (Stage.TRANSFER, Stage.TRANSFER)
        if not legal:
            kind_of = "intra-machine" if same else "inter-machine"
            diags.append(error("E_LEGAL", f"arc '{arc.label}': illegal {kind_of} flow {arc.src} -> {arc.dst}", _SPAN))
        src_kind = _machine_kind(model, arc.src)
        dst_kind = _machine_kind(model, arc.dst)
        if src_kind is not None and dst_kind is not None and src_kind != dst_kind:
            diags.append(
                error("E_KIND", f"arc '{arc.label}': flow changes kind {src_kind} -> {dst_kind}", _SPAN)
            )
        if arc.guard is not None and arc.src.stage is not Stage.PROCESS:
            diags.append(
                error("E_GUARD_PLACEMENT", f"arc '{arc.label}': guards may only leave a process stage", _SPAN)
            )
    for trig in model.triggers:
        if trig.dst.stage in (Stage.RELEASE, Stage.TRANSFER):
            diags.append(
                warning("W_UNUSUAL_TRIGGER", f"trigger '{trig.label}' targets {trig.dst.stage}; expected create or process", _SPAN)
            )
    return diags


def check_structure(model: Model) -> list[Diagnostic]:
    """Name uniqueness, endpoint resolution, label uniqueness, expression
    typing, spawn coverage, and isolation warnings."""
    diags: list[Diagnostic] = []

    seen_roots: set[str] = set()
    for root in model.roots:
        if root.name in seen_roots:
            diags.append(error("E_DUPNAME", f"duplicate top-level sphere '{root.name}'", _SPAN))
        seen_roots.add(root.name)
    for path, sphere in model.spheres():
        seen: set[str] = set()
        for child in sphere.children:
            if child.name in seen:
                diags.append(error("E_DUPNAME", f"duplicate name '{child.name}' in sphere {'/'.join(path)}", _SPAN))
            seen.add(child.name)
        for m in sphere.machines:
            if m.name in seen:
                diags.append(error("E_DUPNAME", f"duplicate name '{m.name}' in sphere {'/'.join(path)}", _SPAN))
            seen.add(m.name)
            if m.kind not in model.kinds:
                diags.append(error("E_UNRESOLVED", f"machine {'/'.join(path + (m.name,))} has unknown kind '{m.kind}'", _SPAN))

    labels: set[str] = set()
    touched: set[tuple[str, ...]] = set()

    def check_ep(ep: Endpoint, label: str) -> bool:
        machine = model.find_machine(ep.path)
        if machine is None:
            diags.append(error("E_UNRESOLVED", f"arc '{label}': no machine at {'/'.join(ep.path)}", _SPAN))
            return False
        if not machine.has_stage(ep.stage):
            diags.append(error("E_UNRESOLVED", f"arc '{label}': {ep} names an undeclared stage", _SPAN))
            return False
        touched.add(ep.path)
        return True

    def typecheck(expr: exprs.Expr, kind_name: str, what: str, want_bool: bool) -> None:
        kind = model.kinds.get(kind_name)
        if kind is None:
            return
        try:
            t = exprs.typecheck(expr, kind.attr_types())
        except exprs.TypeError_ as exc:
            diags.append(error("E_GUARD", f"{what}: {exc}", _SPAN))
            return
        if want_bool and t != "bool":
            diags.append(error("E_GUARD", f"{what}: expected bool, got {t}", _SPAN))

    for arc in model.flows:
        if arc.label in labels:
            diags.append(error("E_DUPLABEL", f"duplicate arc label '{arc.label}'", _SPAN))
        labels.add(arc.label)
        ok_src = check_ep(arc.src, arc.label)
        check_ep(arc.dst, arc.label)
        if arc.guard is not None and ok_src:
            src_kind = _machine_kind(model, arc.src)
            typecheck(arc.guard, src_kind, f"guard on arc '{arc.label}'", want_bool=True)

    for trig in model.triggers:
        if trig.label in labels:
            diags.append(error("E_DUPLABEL", f"duplicate arc label '{trig.label}'", _SPAN))
        labels.add(trig.label)
        ok_src = check_ep(trig.src, trig.label)
        ok_dst = check_ep(trig.dst, trig.label)
        src_kind = _machine_kind(model, trig.src) if ok_src else None
        if trig.guard is not None and src_kind is not None:
            typecheck(trig.guard, src_kind, f"guard on trigger '{trig.label}'", want_bool=True)
        if src_kind is not None:
            for name, expr in trig.spawn_attrs:
                typecheck(expr, src_kind, f"spawn attribute '{name}' on trigger '{trig.label}'", want_bool=False)
        if ok_dst and trig.dst.stage is Stage.CREATE:
            target_kind = model.kinds.get(_machine_kind(model, trig.dst) or "")
            if target_kind is not None:
                spawned = {name for name, _ in trig.spawn_attrs}
                for attr in target_kind.attrs:
                    if attr.name not in spawned and attr.default is None:
                        diags.append(
                            error(
                                "E_SPAWN",
                                f"trigger '{trig.label}' spawns {target_kind.name} without required attribute '{attr.name}'",
                                _SPAN,
                            )
                        )
                unknown = spawned - {a.name for a in target_kind.attrs}
                for name in sorted(unknown):
                    diags.append(
                        error("E_SPAWN", f"trigger '{trig.label}': {target_kind.name} has no attribute '{name}'", _SPAN)
                    )

    for path, machine in model.machines():
        kind = model.kinds.get(machine.kind)
        if kind is not None:
            names = kind.attr_types()
            for name, expr in machine.assigns:
                if name not in names:
                    diags.append(
                        error("E_GUARD", f"assign on {'/'.join(path)}: '{machine.kind}' has no attribute '{name}'", _SPAN)
                    )
                else:
                    typecheck(expr, machine.kind, f"assign '{name}' on {'/'.join(path)}", want_bool=False)
        if path not in touched:
            diags.append(warning("W_ISOLATED", f"machine {'/'.join(path)} has no arcs", _SPAN))

    return diags


def check_reachability(model: Model) -> list[Diagnostic]:
    """Warn for stages no flow can ever reach: neither downstream of a create
    stage nor of an inbound transfer nor of a trigger target."""
    if not model.canonical:
        raise ValueError("check_reachability requires a canonical model")
    seeds: set[Endpoint] = set()
    all_eps: list[Endpoint] = []
    for path, machine in model.machines():
        for stage in machine.stages():
            ep = Endpoint(path, stage)
            all_eps.append(ep)
            if stage is Stage.CREATE:
                seeds.add(ep)
    for arc in model.flows:
        if arc.src.path != arc.dst.path:
            seeds.add(arc.dst)
    for trig in model.triggers:
        seeds.add(trig.dst)

    reached = set(seeds)
    frontier = list(seeds)
    while frontier:
        ep = frontier.pop()
        for arc in model.flows_from(ep):
            if arc.dst not in reached:
                reached.add(arc.dst)
                frontier.append(arc.dst)

    return [
        warning("W_UNREACHABLE", f"{ep} is unreachable from any create, inbound transfer, or trigger target", _SPAN)
        for ep in all_eps
        if ep not in reached
    ]


def validate(model: Model) -> ValidationReport:
    """All checks, plus model statistics and the overall ok flag."""
    diags = check_legality(model) + check_structure(model) + check_reachability(model)
    n_spheres = sum(1 for _ in model.spheres())
    n_machines = sum(1 for _ in model.machines())
    stats = ModelStats(n_spheres, n_machines, len(model.flows), len(model.triggers))
    ok = not any(d.is_error for d in diags)
    return ValidationReport(tuple(diags), stats, ok)
