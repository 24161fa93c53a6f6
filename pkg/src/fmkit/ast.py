"""Syntax tree produced by the parser, before canonicalization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import SourceSpan
from .exprs import Expr
from .model import Chrono, Stage


@dataclass(frozen=True)
class AttrDecl:
    name: str
    type: str
    default: object
    span: SourceSpan


@dataclass(frozen=True)
class KindDecl:
    name: str
    attrs: tuple[AttrDecl, ...]
    span: SourceSpan
    name_span: SourceSpan


@dataclass(frozen=True)
class EndpointRef:
    segments: tuple[str, ...]
    stage: Stage
    span: SourceSpan

    def __str__(self) -> str:
        return "/".join(self.segments) + "." + self.stage.value


@dataclass(frozen=True)
class ArcDecl:
    is_flow: bool
    src: EndpointRef
    dst: EndpointRef
    guard: Optional[Expr]
    spawn_attrs: tuple[tuple[str, Expr, SourceSpan], ...]
    consuming: bool
    label: Optional[str]
    span: SourceSpan


@dataclass(frozen=True)
class MachineDecl:
    name: str
    kind: str
    stages: tuple[tuple[Stage, bool], ...]  # (stage, is_implicit)
    assigns: tuple[tuple[str, Expr, SourceSpan], ...]
    span: SourceSpan
    kind_span: SourceSpan


@dataclass
class SphereDecl:
    name: str
    span: SourceSpan
    children: list["SphereDecl"] = field(default_factory=list)
    machines: list[MachineDecl] = field(default_factory=list)
    arcs: list[ArcDecl] = field(default_factory=list)


@dataclass(frozen=True)
class EventDecl:
    name: str
    labels: tuple[str, ...]
    span: SourceSpan


@dataclass(frozen=True)
class BehaviorDeclAst:
    name: str
    program: Chrono
    span: SourceSpan


@dataclass
class ModelAst:
    file: str
    kinds: list[KindDecl] = field(default_factory=list)
    spheres: list[SphereDecl] = field(default_factory=list)
    events: list[EventDecl] = field(default_factory=list)
    behaviors: list[BehaviorDeclAst] = field(default_factory=list)

    def kind(self, name: str) -> Optional[KindDecl]:
        for k in self.kinds:
            if k.name == name:
                return k
        return None
