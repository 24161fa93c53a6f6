"""Recursive-descent parser for .fm sources.

Parsing is total: every failure becomes a diagnostic and the parser
resynchronizes, so callers always get an AST (possibly partial) plus the
diagnostic list.  A binding pass resolves names so duplicate-name and
unresolved-reference problems surface here with precise spans.
"""
from __future__ import annotations

from typing import Optional

from . import ast, exprs
from .diagnostics import Diagnostic, SourceSpan, error
from .lexer import Token, tokenize
from .model import Chrono, Choice, Interrupt, Par, Ref, Repeat, Seq, Stage, STAGES_BY_NAME

STAGE_KEYWORDS = set(STAGES_BY_NAME)
ITEM_KEYWORDS = {"thing", "sphere", "event", "behavior"}
SPHERE_ITEM_KEYWORDS = {"sphere", "machine", "flow", "trigger"}
CHRONO_HEADS = {"seq", "choice", "par", "repeat", "interrupt"}


class _Parser:
    def __init__(self, tokens: list[Token], file: str) -> None:
        self.tokens = tokens
        self.pos = 0
        self.file = file
        self.diags: list[Diagnostic] = []

    # Token plumbing -------------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.cur
        if tok.type != "EOF":
            self.pos += 1
        return tok

    def at(self, *types: str) -> bool:
        return self.cur.type in types

    def expect(self, type_: str, what: str = "") -> Optional[Token]:
        if self.cur.type == type_:
            return self.advance()
        label = what or f"'{type_}'"
        self.error(f"expected {label}, found '{self.cur.text or self.cur.type}'")
        return None

    def error(self, message: str, span: Optional[SourceSpan] = None) -> None:
        self.diags.append(error("syntax-error", message, span or self.cur.span))

    def synchronize(self, keywords: set[str]) -> None:
        while not self.at("EOF") and self.cur.type not in keywords and not self.at("}"):
            self.advance()

    # Grammar --------------------------------------------------------------

    def parse_model(self) -> ast.ModelAst:
        out = ast.ModelAst(self.file)
        while not self.at("EOF"):
            if self.at("thing"):
                decl = self.parse_kind()
                if decl:
                    out.kinds.append(decl)
            elif self.at("sphere"):
                decl = self.parse_sphere()
                if decl:
                    out.spheres.append(decl)
            elif self.at("event"):
                decl = self.parse_event()
                if decl:
                    out.events.append(decl)
            elif self.at("behavior"):
                decl = self.parse_behavior()
                if decl:
                    out.behaviors.append(decl)
            else:
                self.error(
                    f"expected thing, sphere, event, or behavior, found '{self.cur.text or self.cur.type}'"
                )
                self.advance()
                self.synchronize(ITEM_KEYWORDS)
        return out

    def parse_kind(self) -> Optional[ast.KindDecl]:
        start = self.advance()  # 'thing'
        name_tok = self.expect("IDENT", "a thing-kind name")
        if name_tok is None:
            self.synchronize(ITEM_KEYWORDS)
            return None
        attrs: list[ast.AttrDecl] = []
        if self.at("{"):
            self.advance()
            while not self.at("}", "EOF"):
                if self.at(","):
                    self.advance()
                    continue
                attr_tok = self.expect("IDENT", "an attribute name")
                if attr_tok is None:
                    break
                if self.expect(":") is None:
                    break
                if self.at("int", "dec", "str", "bool"):
                    type_tok = self.advance()
                else:
                    self.error("expected a scalar type (int, dec, str, bool)")
                    break
                default = None
                if self.at("="):
                    self.advance()
                    default = self.parse_literal()
                attrs.append(ast.AttrDecl(attr_tok.text, type_tok.text, default, attr_tok.span))
            self.expect("}")
        return ast.KindDecl(name_tok.text, tuple(attrs), start.span, name_tok.span)

    def parse_literal(self):
        if self.at("INT", "DEC", "STRING"):
            return self.advance().value
        if self.at("true"):
            self.advance()
            return True
        if self.at("false"):
            self.advance()
            return False
        if self.at("-"):
            self.advance()
            tok = self.expect("INT", "a number")
            return -tok.value if tok else 0
        self.error("expected a literal value")
        return 0

    def parse_sphere(self) -> Optional[ast.SphereDecl]:
        start = self.advance()  # 'sphere'
        name_tok = self.expect("IDENT", "a sphere name")
        if name_tok is None or self.expect("{") is None:
            self.synchronize(ITEM_KEYWORDS)
            return None
        sphere = ast.SphereDecl(name_tok.text, start.span)
        while not self.at("}", "EOF"):
            if self.at("sphere"):
                child = self.parse_sphere()
                if child:
                    sphere.children.append(child)
            elif self.at("machine"):
                m = self.parse_machine()
                if m:
                    sphere.machines.append(m)
            elif self.at("flow", "trigger"):
                a = self.parse_arc()
                if a:
                    sphere.arcs.append(a)
            else:
                self.error(
                    f"expected sphere, machine, flow, or trigger, found '{self.cur.text or self.cur.type}'"
                )
                self.advance()
                self.synchronize(SPHERE_ITEM_KEYWORDS)
        self.expect("}")
        return sphere

    def parse_machine(self) -> Optional[ast.MachineDecl]:
        start = self.advance()  # 'machine'
        name_tok = self.expect("IDENT", "a machine name")
        if name_tok is None or self.expect(":") is None:
            self.synchronize(SPHERE_ITEM_KEYWORDS)
            return None
        kind_tok = self.expect("IDENT", "a thing-kind name")
        if kind_tok is None or self.expect("{") is None:
            self.synchronize(SPHERE_ITEM_KEYWORDS)
            return None
        stages: list[tuple[Stage, bool]] = []
        assigns: list[tuple[str, exprs.Expr, SourceSpan]] = []
        while not self.at("}", "EOF"):
            implicit = False
            if self.at("implicit"):
                self.advance()
                implicit = True
            if self.cur.type in STAGE_KEYWORDS:
                stages.append((STAGES_BY_NAME[self.cur.text], implicit))
                self.advance()
            elif self.at("assign") and not implicit:
                self.advance()
                if self.expect("{") is None:
                    break
                while not self.at("}", "EOF"):
                    if self.at(","):
                        self.advance()
                        continue
                    attr_tok = self.expect("IDENT", "an attribute name")
                    if attr_tok is None or self.expect("=") is None:
                        break
                    expr = self.parse_expr()
                    assigns.append((attr_tok.text, expr, attr_tok.span))
                self.expect("}")
            else:
                self.error("expected a stage name or an assign block")
                break
        self.expect("}")
        return ast.MachineDecl(
            name_tok.text, kind_tok.text, tuple(stages), tuple(assigns), start.span, kind_tok.span
        )

    def parse_endpoint(self) -> Optional[ast.EndpointRef]:
        first = self.expect("IDENT", "an endpoint path")
        if first is None:
            return None
        segments = [first.text]
        last_span = first.span
        while self.at("/"):
            self.advance()
            seg = self.expect("IDENT", "a path segment")
            if seg is None:
                return None
            segments.append(seg.text)
            last_span = seg.span
        if self.expect(".", "'.' before the stage") is None:
            return None
        if self.cur.type not in STAGE_KEYWORDS:
            self.error(f"expected a stage name, found '{self.cur.text or self.cur.type}'")
            return None
        stage_tok = self.advance()
        span = SourceSpan(
            first.span.file, first.span.start_line, first.span.start_col,
            stage_tok.span.end_line, stage_tok.span.end_col,
        )
        return ast.EndpointRef(tuple(segments), STAGES_BY_NAME[stage_tok.text], span)

    def parse_arc(self) -> Optional[ast.ArcDecl]:
        start = self.advance()  # 'flow' | 'trigger'
        is_flow = start.type == "flow"
        src = self.parse_endpoint()
        if src is None:
            self.synchronize(SPHERE_ITEM_KEYWORDS)
            return None
        arrow = "->" if is_flow else "=>"
        if self.expect(arrow) is None:
            self.synchronize(SPHERE_ITEM_KEYWORDS)
            return None
        dst = self.parse_endpoint()
        if dst is None:
            self.synchronize(SPHERE_ITEM_KEYWORDS)
            return None
        consuming = False
        spawn: list[tuple[str, exprs.Expr, SourceSpan]] = []
        if not is_flow:
            if self.at("consuming"):
                self.advance()
                consuming = True
            if self.at("spawn"):
                self.advance()
                if self.expect("{") is not None:
                    while not self.at("}", "EOF"):
                        if self.at(","):
                            self.advance()
                            continue
                        attr_tok = self.expect("IDENT", "an attribute name")
                        if attr_tok is None or self.expect("=") is None:
                            break
                        expr = self.parse_expr()
                        spawn.append((attr_tok.text, expr, attr_tok.span))
                    self.expect("}")
        guard = None
        if self.at("when"):
            self.advance()
            guard = self.parse_expr()
        label = None
        if self.at("LABEL"):
            label_tok = self.advance()
            if "." in label_tok.text:
                self.error("arc labels may not contain '.'", label_tok.span)
            else:
                label = label_tok.text
        return ast.ArcDecl(is_flow, src, dst, guard, tuple(spawn), consuming, label, start.span)

    def parse_event(self) -> Optional[ast.EventDecl]:
        start = self.advance()  # 'event'
        name_tok = self.expect("IDENT", "an event name")
        if name_tok is None or self.expect("{") is None:
            self.synchronize(ITEM_KEYWORDS)
            return None
        labels: list[str] = []
        if self.expect("region") is not None and self.expect("{") is not None:
            while self.at("LABEL"):
                labels.append(self.advance().text)
            self.expect("}")
        self.expect("}")
        return ast.EventDecl(name_tok.text, tuple(labels), start.span)

    def parse_behavior(self) -> Optional[ast.BehaviorDeclAst]:
        start = self.advance()  # 'behavior'
        name_tok = self.expect("IDENT", "a behavior name")
        if name_tok is None or self.expect("{") is None:
            self.synchronize(ITEM_KEYWORDS)
            return None
        program = self.parse_chrono()
        self.expect("}")
        if program is None:
            return None
        return ast.BehaviorDeclAst(name_tok.text, program, start.span)

    def parse_chrono(self) -> Optional[Chrono]:
        tok = self.cur
        if tok.type == "IDENT":
            self.advance()
            return Ref(tok.text)
        if tok.type not in CHRONO_HEADS:
            self.error("expected a chronology term (seq, choice, par, repeat, interrupt, or an event name)")
            return None
        head = self.advance()
        if self.expect("(") is None:
            return None
        children: list[Chrono] = []
        while not self.at(")", "EOF"):
            if self.at(","):
                self.advance()
                continue
            child = self.parse_chrono()
            if child is None:
                break
            children.append(child)
        self.expect(")")
        if head.type == "repeat":
            possible = False
            if self.at("possible"):
                self.advance()
                possible = True
            if len(children) != 1:
                self.error("repeat takes exactly one term", head.span)
                return None
            return Repeat(children[0], possible)
        if head.type == "interrupt":
            if len(children) != 3:
                self.error("interrupt takes exactly watcher, handler, body", head.span)
                return None
            return Interrupt(children[0], children[1], children[2])
        if len(children) < 2:
            self.error(f"{head.type} needs at least two terms", head.span)
            return None
        if head.type == "seq":
            return Seq(tuple(children))
        if head.type == "choice":
            return Choice(tuple(children))
        return Par(tuple(children))

    # Expressions ----------------------------------------------------------

    def parse_expr(self) -> exprs.Expr:
        return self.parse_or()

    def parse_or(self) -> exprs.Expr:
        left = self.parse_and()
        while self.at("or"):
            self.advance()
            left = exprs.Binary("or", left, self.parse_and())
        return left

    def parse_and(self) -> exprs.Expr:
        left = self.parse_not()
        while self.at("and"):
            self.advance()
            left = exprs.Binary("and", left, self.parse_not())
        return left

    def parse_not(self) -> exprs.Expr:
        if self.at("not"):
            self.advance()
            return exprs.Unary("not", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> exprs.Expr:
        left = self.parse_arith()
        if self.at("==", "!=", "<", "<=", ">", ">="):
            op = self.advance().type
            return exprs.Binary(op, left, self.parse_arith())
        return left

    def parse_arith(self) -> exprs.Expr:
        left = self.parse_term()
        while self.at("+", "-"):
            op = self.advance().type
            left = exprs.Binary(op, left, self.parse_term())
        return left

    def parse_term(self) -> exprs.Expr:
        left = self.parse_factor()
        while self.at("*", "/"):
            op = self.advance().type
            left = exprs.Binary(op, left, self.parse_factor())
        return left

    def parse_factor(self) -> exprs.Expr:
        if self.at("-"):
            self.advance()
            return exprs.Unary("-", self.parse_factor())
        if self.at("INT", "DEC", "STRING"):
            return exprs.Lit(self.advance().value)
        if self.at("true"):
            self.advance()
            return exprs.Lit(True)
        if self.at("false"):
            self.advance()
            return exprs.Lit(False)
        if self.at("IDENT"):
            return exprs.Attr(self.advance().text)
        if self.at("("):
            self.advance()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        self.error(f"expected an expression, found '{self.cur.text or self.cur.type}'")
        self.advance()
        return exprs.Lit(False)


def parse(source: str, file: str = "<input>") -> tuple[ast.ModelAst, list[Diagnostic]]:
    """Parse a .fm source into an AST plus diagnostics (never raises)."""
    tokens, diags = tokenize(source, file)
    parser = _Parser(tokens, file)
    tree = parser.parse_model()
    all_diags = diags + parser.diags
    all_diags.extend(_bind(tree))
    return tree, all_diags


# Binding ------------------------------------------------------------------


def _bind(tree: ast.ModelAst) -> list[Diagnostic]:
    """Resolve every name in the AST, reporting duplicates and dangling refs."""
    diags: list[Diagnostic] = []

    kinds: dict[str, ast.KindDecl] = {}
    for kind in tree.kinds:
        if kind.name in kinds:
            diags.append(error("duplicate-name", f"thing kind '{kind.name}' is already declared", kind.name_span))
        else:
            kinds[kind.name] = kind
        seen_attrs = set()
        for attr in kind.attrs:
            if attr.name in seen_attrs:
                diags.append(error("duplicate-name", f"attribute '{attr.name}' is already declared", attr.span))
            seen_attrs.add(attr.name)

    # Index machines by full path while checking sibling uniqueness.
    machines: dict[tuple[str, ...], ast.MachineDecl] = {}

    def walk(sphere: ast.SphereDecl, prefix: tuple[str, ...]) -> None:
        path = prefix + (sphere.name,)
        seen: set[str] = set()
        for child in sphere.children:
            if child.name in seen:
                diags.append(error("duplicate-name", f"sphere '{child.name}' is already declared here", child.span))
            seen.add(child.name)
        for m in sphere.machines:
            if m.name in seen:
                diags.append(error("duplicate-name", f"machine '{m.name}' is already declared here", m.span))
            seen.add(m.name)
            machines[path + (m.name,)] = m
            if m.kind not in kinds:
                diags.append(error("unresolved-reference", f"unknown thing kind '{m.kind}'", m.kind_span))
            stage_seen: set[Stage] = set()
            for stage, _ in m.stages:
                if stage in stage_seen:
                    diags.append(error("duplicate-name", f"stage '{stage}' is already declared on '{m.name}'", m.span))
                stage_seen.add(stage)
        for child in sphere.children:
            walk(child, path)

    top_seen: set[str] = set()
    for sphere in tree.spheres:
        if sphere.name in top_seen:
            diags.append(error("duplicate-name", f"sphere '{sphere.name}' is already declared", sphere.span))
        top_seen.add(sphere.name)
        walk(sphere, ())

    def check_endpoint(ref: ast.EndpointRef) -> Optional[ast.MachineDecl]:
        m = machines.get(ref.segments)
        if m is None:
            diags.append(error("unresolved-reference", f"no machine at '{'/'.join(ref.segments)}'", ref.span))
            return None
        if not any(s is ref.stage for s, _ in m.stages):
            diags.append(
                error("unresolved-reference", f"stage '{ref.stage}' is not declared on '{m.name}'", ref.span)
            )
            return None
        return m

    def attr_names(kind_name: str) -> set[str]:
        kind = kinds.get(kind_name)
        return {a.name for a in kind.attrs} if kind else set()

    def check_expr_refs(expr: exprs.Expr, names: set[str], span: SourceSpan, role: str) -> None:
        if isinstance(expr, exprs.Attr):
            if expr.name not in names:
                diags.append(error("unresolved-reference", f"unknown attribute '{expr.name}' in {role}", span))
        elif isinstance(expr, exprs.Unary):
            check_expr_refs(expr.operand, names, span, role)
        elif isinstance(expr, exprs.Binary):
            check_expr_refs(expr.left, names, span, role)
            check_expr_refs(expr.right, names, span, role)

    labels: set[str] = set()
    arcs: list[ast.ArcDecl] = []
    for sphere in tree.spheres:
        stack = [sphere]
        while stack:
            s = stack.pop()
            arcs.extend(s.arcs)
            stack.extend(s.children)
    for arc in arcs:
        src_m = check_endpoint(arc.src)
        dst_m = check_endpoint(arc.dst)
        if arc.label is not None:
            if arc.label in labels:
                diags.append(error("duplicate-name", f"arc label '{arc.label}' is already used", arc.span))
            labels.add(arc.label)
        if src_m is not None:
            src_attrs = attr_names(src_m.kind)
            if arc.guard is not None:
                check_expr_refs(arc.guard, src_attrs, arc.span, "guard")
            for _, expr, span in arc.spawn_attrs:
                check_expr_refs(expr, src_attrs, span, "spawn expression")
        if not arc.is_flow and dst_m is not None:
            target_attrs = attr_names(dst_m.kind)
            for name, _, span in arc.spawn_attrs:
                if name not in target_attrs:
                    diags.append(
                        error("unresolved-reference", f"'{dst_m.kind}' has no attribute '{name}'", span)
                    )

    for path, m in machines.items():
        names = attr_names(m.kind)
        for name, expr, span in m.assigns:
            if name not in names:
                diags.append(error("unresolved-reference", f"'{m.kind}' has no attribute '{name}'", span))
            check_expr_refs(expr, names, span, "assign expression")

    event_names: set[str] = set()
    for event in tree.events:
        if event.name in event_names:
            diags.append(error("duplicate-name", f"event '{event.name}' is already declared", event.span))
        event_names.add(event.name)
        for label in event.labels:
            if label not in labels:
                diags.append(error("unresolved-reference", f"no arc labeled '{label}'", event.span))

    behavior_names: set[str] = set()
    for behavior in tree.behaviors:
        if behavior.name in behavior_names:
            diags.append(error("duplicate-name", f"behavior '{behavior.name}' is already declared", behavior.span))
        behavior_names.add(behavior.name)
        for ref in _chrono_refs(behavior.program):
            if ref not in event_names:
                diags.append(
                    error("unresolved-reference", f"behavior '{behavior.name}' references unknown event '{ref}'", behavior.span)
                )

    return diags


def _chrono_refs(node: Chrono) -> list[str]:
    if isinstance(node, Ref):
        return [node.event]
    if isinstance(node, (Seq, Choice, Par)):
        out: list[str] = []
        for child in node.children:
            out.extend(_chrono_refs(child))
        return out
    if isinstance(node, Repeat):
        return _chrono_refs(node.child)
    if isinstance(node, Interrupt):
        return _chrono_refs(node.watcher) + _chrono_refs(node.handler) + _chrono_refs(node.body)
    return []
