"""Parser, elaborator and printer for the textual pNet language.

A source file declares constants, pLTS blocks and pNet blocks::

    const in, out: Action
    pLTS Buffer
      initial b0
      vars ?m:Data
      vars b_msg:Data
    state b0
      transition in(m) -> b1 {b_msg:=m}
    ...
    pNet Top
      holes P
      subnets P, Buffer
      vars m:Data p_a:Action
    vector SV0 <p_send(m), in(m)> -> synchro(in(m))
    vector SV1 <p_a, _> -> p_a [p_a != p_send(x)]

Parsing is purely syntactic; name resolution and sort inference happen in
:func:`elaborate`, which reports problems as diagnostics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from . import model
from .model import Diagnostic, Node, PLTS, SyncVector, Transition, idle_vector
from .term import (
    And, App, Eq, Exists, FALSE, Forall, Implies, Input, Nat, Neq, Not, Or, Sort,
    Subst, TAU, TAU_NAME, TRUE, Var, all_vars, is_tau, plus, strip_inputs,
)

KEYWORDS = {"import", "root", "const", "pLTS", "pNet", "initial", "vars", "state",
            "transition", "holes", "subnets", "vector"}
BUILTINS = {TAU_NAME, "synchro"}


class ParseError(Exception):
    def __init__(self, message, line=0, col=0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col
        self.message = message


class ElaborationError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# Lexer

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/|\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<number>\d+)
  | (?P<dollar>\$[A-Za-z_][A-Za-z0-9_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>->|:=|!=|&&|\|\||/\\|\\/|=>|[<>,()\[\]{}:=+!.?])
""", re.VERBOSE | re.DOTALL)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# AST


@dataclass
class Loc:
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass
class EIdent:
    name: str
    loc: Loc


@dataclass
class EInput:
    name: str
    loc: Loc


@dataclass
class ENat:
    value: int
    loc: Loc


@dataclass
class EPlus:
    base: object
    offset: int
    loc: Loc


@dataclass
class ECall:
    name: str
    args: list
    loc: Loc
    dollar: bool = False


@dataclass
class GConst:
    value: bool


@dataclass
class GCmp:
    left: object
    right: object
    negated: bool
    loc: Loc


@dataclass
class GBin:
    op: str  # and, or, implies
    left: object
    right: object


@dataclass
class GNot:
    body: object


@dataclass
class GQuant:
    kind: str
    binders: list  # [(name, sort text or None)]
    body: object
    loc: Loc


@dataclass
class VarDecl:
    name: str
    sort: str
    is_input: bool
    loc: Loc


@dataclass
class TransDecl:
    source: str
    action: object
    guard: object
    target: str
    assigns: list  # [(name, expr, loc)]
    loc: Loc


@dataclass
class StateDecl:
    name: str
    loc: Loc


@dataclass
class PLTSDecl:
    name: str
    loc: Loc
    initial: str | None = None
    vars: list = field(default_factory=list)
    states: list = field(default_factory=list)
    transitions: list = field(default_factory=list)


@dataclass
class VectorDecl:
    name: str
    slots: list  # expr or None for "_"
    result: object
    guard: object
    loc: Loc


@dataclass
class PNetDecl:
    name: str
    loc: Loc
    holes: list = field(default_factory=list)
    subnets: list = field(default_factory=list)
    vars: list = field(default_factory=list)
    vectors: list = field(default_factory=list)


@dataclass
class SourceSystem:
    name: str | None = None
    imports: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)  # name -> sort text
    blocks: list = field(default_factory=list)
    root: str | None = None

    @property
    def plts_blocks(self):
        return [b for b in self.blocks if isinstance(b, PLTSDecl)]

    @property
    def pnet_blocks(self):
        return [b for b in self.blocks if isinstance(b, PNetDecl)]


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def loc(self) -> Loc:
        return Loc(self.tok.line, self.tok.col)

    def error(self, msg):
        t = self.tok
        shown = t.text or "end of input"
        raise ParseError(f"{msg} (found {shown!r})", t.line, t.col)

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "ident")

    def accept(self, text) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            self.error(f"expected {text!r}")

    def ident(self, what="identifier") -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error(f"expected {what}")
        self.i += 1
        return t.text

    def at_name(self) -> bool:
        return self.tok.kind == "ident" and self.tok.text not in KEYWORDS

    # -- top level ---------------------------------------------------------

    def system(self) -> SourceSystem:
        src = SourceSystem()
        if self.tok.kind == "eof":
            self.error("empty input")
        if self.at_name() and self.peek().text == ":":
            src.name = self.ident()
            self.expect(":")
        while self.tok.kind != "eof":
            t = self.tok
            if self.accept("import"):
                if self.tok.kind != "string":
                    self.error("expected a quoted file name")
                src.imports.append(self.tok.text[1:-1])
                self.i += 1
            elif self.accept("root"):
                src.root = self.ident("root name")
            elif self.accept("const"):
                self.const_groups(src)
            elif self.accept("pLTS"):
                src.blocks.append(self.plts(Loc(t.line, t.col)))
            elif self.accept("pNet"):
                src.blocks.append(self.pnet(Loc(t.line, t.col)))
            else:
                self.error("expected a declaration")
        return src

    def const_groups(self, src):
        while True:
            names = [self.ident("constant name")]
            while self.accept(","):
                names.append(self.ident("constant name"))
            self.expect(":")
            sort = self.ident("sort")
            for n in names:
                src.constants[n] = sort
            if not (self.at_name() and self.peek().text in (",", ":")):
                return

    def var_groups(self) -> list:
        out = []
        while True:
            group = []
            while True:
                loc = self.loc()
                is_input = self.accept("?")
                group.append((self.ident("variable name"), is_input, loc))
                if not self.accept(","):
                    break
            self.expect(":")
            sort = self.ident("sort")
            out.extend(VarDecl(n, sort, inp, loc) for n, inp, loc in group)
            if not ((self.at_name() and self.peek().text in (",", ":")) or self.at("?")):
                return out

    def plts(self, loc) -> PLTSDecl:
        block = PLTSDecl(self.ident("pLTS name"), loc)
        current = None
        while True:
            if self.accept("initial"):
                block.initial = self.ident("state name")
            elif self.accept("vars"):
                block.vars.extend(self.var_groups())
            elif self.at("state"):
                sloc = self.loc()
                self.i += 1
                current = self.ident("state name")
                block.states.append(StateDecl(current, sloc))
            elif self.at("transition"):
                tloc = self.loc()
                self.i += 1
                if current is None:
                    raise ParseError("transition outside of a state", tloc.line, tloc.col)
                block.transitions.append(self.transition(current, tloc))
            else:
                return block

    def transition(self, source, loc) -> TransDecl:
        action = self.expr()
        guard = None
        if self.accept("["):
            guard = self.guard()
            self.expect("]")
        self.expect("->")
        target = self.ident("target state")
        assigns = []
        if self.accept("{"):
            if not self.at("}"):
                while True:
                    aloc = self.loc()
                    name = self.ident("assigned variable")
                    self.expect(":=")
                    assigns.append((name, self.expr(), aloc))
                    if not self.accept(","):
                        break
            self.expect("}")
        return TransDecl(source, action, guard, target, assigns, loc)

    def pnet(self, loc) -> PNetDecl:
        block = PNetDecl(self.ident("pNet name"), loc)
        while True:
            if self.accept("holes"):
                block.holes.extend(self.idlist())
            elif self.accept("subnets"):
                block.subnets.extend(self.idlist())
            elif self.accept("vars"):
                block.vars.extend(self.var_groups())
            elif self.at("vector"):
                vloc = self.loc()
                self.i += 1
                block.vectors.append(self.vector(vloc))
            else:
                return block

    def idlist(self) -> list:
        out = [self.ident()]
        while self.accept(","):
            out.append(self.ident())
        return out

    def vector(self, loc) -> VectorDecl:
        name = self.ident("vector name")
        self.expect("<")
        slots = []
        while True:
            if self.at("_") and self.peek().text in (",", ">"):
                self.i += 1
                slots.append(None)
            else:
                slots.append(self.expr())
            if not self.accept(","):
                break
        self.expect(">")
        self.expect("->")
        result = self.expr()
        guard = None
        if self.accept("["):
            guard = self.guard()
            self.expect("]")
        return VectorDecl(name, slots, result, guard, loc)

    # -- expressions -------------------------------------------------------

    def expr(self):
        loc = self.loc()
        e = self.primary()
        while self.accept("+"):
            if self.tok.kind != "number":
                self.error("only 'term + constant' arithmetic is supported")
            n = int(self.tok.text)
            self.i += 1
            e = EPlus(e, n, loc)
        return e

    def primary(self):
        t = self.tok
        loc = self.loc()
        if t.kind == "number":
            self.i += 1
            if self.at("+") and self.peek().kind != "number":
                self.i += 1
                inner = self.primary()
                return EPlus(inner, int(t.text), loc)
            return ENat(int(t.text), loc)
        if self.accept("?"):
            return EInput(self.ident("input variable"), loc)
        if t.kind == "dollar":
            self.i += 1
            return ECall(t.text[1:], [], loc, dollar=True)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.i += 1
            if self.accept("("):
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.expr())
                        if not self.accept(","):
                            break
                self.expect(")")
                return ECall(t.text, args, loc)
            return EIdent(t.text, loc)
        self.error("expected an expression")

    # -- guards ------------------------------------------------------------

    def guard(self):
        left = self.disjunction()
        if self.accept("=>"):
            return GBin("implies", left, self.guard())
        return left

    def disjunction(self):
        left = self.conjunction()
        while self.at("||") or self.at("\\/") or self.at("or"):
            self.i += 1
            left = GBin("or", left, self.conjunction())
        return left

    def conjunction(self):
        left = self.unary()
        while self.at("&&") or self.at("/\\") or self.at("and"):
            self.i += 1
            left = GBin("and", left, self.unary())
        return left

    def unary(self):
        loc = self.loc()
        if self.accept("!") or self.accept("not"):
            return GNot(self.unary())
        if self.at("forall") or self.at("exists"):
            kind = self.tok.text
            self.i += 1
            binders = []
            while True:
                name = self.ident("bound variable")
                sort = self.ident("sort") if self.accept(":") else None
                binders.append((name, sort))
                if not self.accept(","):
                    break
            self.expect(".")
            return GQuant(kind, binders, self.guard(), loc)
        if self.at("true") and self.peek().text != "(":
            self.i += 1
            return GConst(True)
        if self.at("false") and self.peek().text != "(":
            self.i += 1
            return GConst(False)
        if self.at("("):
            save = self.i
            try:
                self.i += 1
                g = self.guard()
                self.expect(")")
                if not (self.at("=") or self.at("!=") or self.at("+")):
                    return g
            except ParseError:
                pass
            self.i = save
        left = self.expr()
        if self.accept("="):
            return GCmp(left, self.expr(), False, loc)
        if self.accept("!="):
            return GCmp(left, self.expr(), True, loc)
        self.error("expected '=' or '!=' in guard")


def parse(text: str) -> SourceSystem:
    """Parse DSL text into a :class:`SourceSystem` (syntax only)."""
    return _Parser(text).system()


def parse_guard_text(text: str):
    p = _Parser(text)
    g = p.guard()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return g


# ---------------------------------------------------------------------------
# Elaboration


class _Elab:
    def __init__(self, src: SourceSystem):
        self.src = src
        self.diags: list = []
        self.consts: dict = {}
        for name, sort in src.constants.items():
            try:
                self.consts[name] = Sort.parse(sort)
            except ValueError:
                self.diag("unknown sort", f"{sort} for constant {name}", "")
                self.consts[name] = Sort.DATA
        self.sigs: dict = {}
        self.blocks = {}
        for b in src.blocks:
            if b.name in self.blocks:
                self.diag("duplicate block", f"{b.name} declared twice", str(b.loc))
            self.blocks[b.name] = b
        self.built: dict = {}

    def diag(self, code, msg, loc, severity="error"):
        self.diags.append(Diagnostic(code, msg, str(loc), severity))

    # signatures ------------------------------------------------------------

    def learn_signatures(self):
        """Infer constructor argument sorts from uses with declared arguments."""
        for _ in range(3):
            for b in self.src.blocks:
                scope = {d.name: self._sort(d.sort, d.loc) for d in b.vars}
                exprs = []
                if isinstance(b, PLTSDecl):
                    exprs = [t.action for t in b.transitions]
                    exprs += [e for t in b.transitions for _, e, _ in t.assigns]
                else:
                    exprs = [s for v in b.vectors for s in v.slots if s is not None]
                    exprs += [v.result for v in b.vectors]
                for e in exprs:
                    self._learn(e, scope)

    def _learn(self, e, scope):
        if isinstance(e, ECall):
            sig = self.sigs.get(e.name)
            known = []
            for a in e.args:
                known.append(self._guess(a, scope))
                self._learn(a, scope)
            if sig is None or len(sig) != len(known):
                if sig is None:
                    self.sigs[e.name] = tuple(known)
                return
            self.sigs[e.name] = tuple(k if s is None else s for s, k in zip(sig, known))

    def _guess(self, e, scope):
        if isinstance(e, (ENat, EPlus)):
            return Sort.NAT
        if isinstance(e, (EIdent, EInput)):
            if e.name in scope:
                return scope[e.name]
            if e.name in self.consts:
                return self.consts[e.name]
            return None
        if isinstance(e, ECall):
            if e.name == TAU_NAME or e.name == "synchro":
                return Sort.ACTION
            return self.consts.get(e.name)
        return None

    def _sort(self, text, loc):
        try:
            return Sort.parse(text)
        except ValueError:
            self.diag("unknown sort", text, loc)
            return Sort.DATA

    # expressions ------------------------------------------------------------

    def expr(self, e, scope, expected=None, inputs=frozenset(), implicit=None):
        """Elaborate an expression.  ``scope`` maps names to Vars.

        ``inputs`` lists input variables to be marked; ``implicit`` (a dict)
        collects unknown identifiers as implicitly bound variables.
        """
        if isinstance(e, ENat):
            return Nat(e.value)
        if isinstance(e, EPlus):
            base = self.expr(e.base, scope, Sort.NAT, inputs, implicit)
            if base.sort is not Sort.NAT or isinstance(base, Input):
                self.diag("sort", f"'+' applied to non-Nat term {base}", e.loc)
                return base
            return plus(base, e.offset)
        if isinstance(e, EInput):
            v = scope.get(e.name)
            if v is None:
                self.diag("undeclared identifier", e.name, e.loc)
                v = Var(e.name, expected or Sort.DATA)
            return Input(v)
        if isinstance(e, EIdent):
            if e.name in scope:
                v = scope[e.name]
                return Input(v) if v in inputs else v
            if e.name == TAU_NAME:
                return TAU
            if e.name in self.consts:
                return self._const(e.name, [], e.loc)
            if implicit is not None:
                if e.name not in implicit:
                    implicit[e.name] = Var(e.name, expected or Sort.DATA)
                return implicit[e.name]
            self.diag("undeclared identifier", e.name, e.loc)
            v = Var(e.name, expected or Sort.DATA)
            scope[e.name] = v
            return v
        if isinstance(e, ECall):
            if e.name == TAU_NAME and not e.args:
                return TAU
            if e.name == "synchro" and len(e.args) == 1:
                inner = self.expr(e.args[0], scope, Sort.ACTION, inputs, implicit)
                return TAU if is_tau(inner) else App("synchro", (inner,), Sort.ACTION)
            sig = self.sigs.get(e.name) or ()
            args = []
            for k, a in enumerate(e.args):
                exp = sig[k] if k < len(sig) else None
                args.append(self.expr(a, scope, exp, inputs, implicit))
            return self._const(e.name, args, e.loc)
        raise TypeError(e)

    def _const(self, name, args, loc):
        sort = self.consts.get(name)
        if sort is None:
            self.diag("undeclared identifier", f"constructor {name}", loc)
            sort = Sort.ACTION
        key = ("arity", name)
        if key in self.sigs:
            if self.sigs[key] != len(args):
                self.diag("arity mismatch", f"{name} used with {len(args)} and {self.sigs[key]} arguments", loc)
        else:
            self.sigs[key] = len(args)
        return App(name, tuple(args), sort)

    def guard(self, g, scope, implicit=None):
        if g is None:
            return TRUE
        if isinstance(g, GConst):
            return TRUE if g.value else FALSE
        if isinstance(g, GNot):
            return Not(self.guard(g.body, scope, implicit))
        if isinstance(g, GBin):
            l = self.guard(g.left, scope, implicit)
            r = self.guard(g.right, scope, implicit)
            if g.op == "and":
                return And((l, r))
            if g.op == "or":
                return Or((l, r))
            return Implies(l, r)
        if isinstance(g, GQuant):
            inner = dict(scope)
            bound = []
            for name, sort in g.binders:
                v = Var(name, self._sort(sort, g.loc) if sort else Sort.DATA)
                inner[name] = v
                bound.append(v)
            body = self.guard(g.body, inner, implicit)
            q = Forall if g.kind == "forall" else Exists
            return q(tuple(bound), body)
        if isinstance(g, GCmp):
            l = self.expr(g.left, scope, None, frozenset(), implicit)
            r = self.expr(g.right, scope, l.sort if not _untyped(g.left, scope, self) else None,
                          frozenset(), implicit)
            if _untyped(g.left, scope, self) and l.sort is not r.sort and isinstance(l, Var):
                l = Var(l.name, r.sort)
                if implicit is not None and l.name in implicit:
                    implicit[l.name] = l
            if l.sort is not r.sort:
                self.diag("sort", f"comparing {l}:{l.sort} with {r}:{r.sort}", g.loc)
                return FALSE
            return Neq(l, r) if g.negated else Eq(l, r)
        raise TypeError(g)

    # blocks ------------------------------------------------------------------

    def plts(self, b: PLTSDecl) -> PLTS:
        scope = {}
        inputs = set()
        state_vars = []
        for d in b.vars:
            v = Var(d.name, self._sort(d.sort, d.loc), origin=f"{'input' if d.is_input else 'state'}:{b.name}")
            if d.name in scope:
                self.diag("duplicate variable", d.name, d.loc)
            scope[d.name] = v
            (inputs.add(v) if d.is_input else state_vars.append(v))
        states = [s.name for s in b.states]
        if b.initial is None:
            self.diag("initial state", f"{b.name} has no initial state", b.loc)
        trans = []
        for k, t in enumerate(b.transitions):
            local = dict(scope)
            action = self.expr(t.action, local, Sort.ACTION, frozenset(inputs))
            if action.sort is not Sort.ACTION:
                self.diag("sort", f"transition label {action} is not an action", t.loc)
            guard = self.guard(t.guard, local)
            binds = []
            for name, e, aloc in t.assigns:
                target = scope.get(name)
                if target is None or target in inputs:
                    self.diag("undeclared identifier", f"assignment target {name}", aloc)
                    continue
                rhs = self.expr(e, local, target.sort)
                if rhs.sort is not target.sort:
                    self.diag("sort", f"{name}:{target.sort} := {rhs}:{rhs.sort}", aloc)
                    continue
                binds.append((target, rhs))
            try:
                post = Subst(binds)
            except ValueError as exc:
                self.diag("assignment", str(exc), t.loc)
                post = Subst()
            trans.append(Transition(t.source, action, t.target, guard, post, f"t{k}"))
        return PLTS(b.name, tuple(states), b.initial or (states[0] if states else ""),
                    tuple(state_vars), tuple(trans))

    def pnet(self, b: PNetDecl, stack=()) -> Node:
        if b.name in stack:
            self.diag("cyclic pNet", " -> ".join(stack + (b.name,)), b.loc)
            raise ElaborationError(self.diags)
        if b.name in self.built:
            return self.built[b.name]
        decls = {d.name: self._sort(d.sort, d.loc) for d in b.vars}
        holes = list(b.holes)
        order = []
        seen: dict = {}
        children = []
        for name in b.subnets:
            n = seen.get(name, 0) + 1
            seen[name] = n
            idx = name if n == 1 else f"{name}#{n}"
            order.append(idx)
            if name in holes:
                continue
            block = self.blocks.get(name)
            if block is None:
                self.diag("undeclared identifier", f"sub-net {name}", b.loc)
                continue
            child = self.plts(block) if isinstance(block, PLTSDecl) else self.pnet(block, stack + (b.name,))
            children.append((idx, child))
        for h in holes:
            if h not in b.subnets:
                self.diag("hole", f"hole {h} is not listed in subnets", b.loc)
        vectors = []
        for vec in b.vectors:
            sv = self.vector(b, vec, order, decls)
            if sv is not None:
                vectors.append(sv)
        hole_sorts = []
        for h in holes:
            pats = [a for v in vectors for i, a in v.slots if i == h]
            pats = list(dict.fromkeys(pats + [TAU]))
            hole_sorts.append((h, tuple(pats)))
        for idx in order:
            if not any(v.slots == ((idx, TAU),) and is_tau(v.result) and v.guard == TRUE for v in vectors):
                vectors.append(idle_vector(idx))
        node = Node(b.name, tuple(order), tuple(children), tuple(hole_sorts), tuple(vectors))
        self.built[b.name] = node
        return node

    def vector(self, b, vec: VectorDecl, order, decls):
        loc = vec.loc
        if len(vec.slots) != len(order):
            self.diag("vector length", f"{vec.name} has {len(vec.slots)} slots for {len(order)} sub-nets", loc)
            return None
        scope = {n: Var(n, s, origin=f"vector:{vec.name}") for n, s in decls.items()}
        slots = []
        for idx, e in zip(order, vec.slots):
            if e is None:
                continue
            slots.append((idx, self.expr(e, scope, Sort.ACTION)))
        result = self.expr(vec.result, scope, Sort.ACTION)
        action_vars = all_vars(tuple(a for _, a in slots)) | all_vars(result)
        gscope = {v.name: v for v in action_vars}
        implicit: dict = {}
        guard = self.guard(vec.guard, gscope, implicit)
        if implicit:
            guard = Forall(tuple(implicit.values()), guard)
        for _, a in slots:
            if a.sort is not Sort.ACTION:
                self.diag("sort", f"slot {a} is not an action", loc)
        return SyncVector(vec.name, tuple(slots), result, guard)

    def root(self):
        name = self.src.root
        if name is None:
            nets = self.src.pnet_blocks or self.src.plts_blocks
            if not nets:
                self.diag("root", "no pNet or pLTS declared", "")
                raise ElaborationError(self.diags)
            name = nets[-1].name
        block = self.blocks.get(name)
        if block is None:
            self.diag("root", f"root {name} is not declared", "")
            raise ElaborationError(self.diags)
        return self.plts(block) if isinstance(block, PLTSDecl) else self.pnet(block)


def _untyped(e, scope, el):
    return isinstance(e, EIdent) and e.name not in scope and e.name not in el.consts and e.name != TAU_NAME


def elaborate(src: SourceSystem, strict: bool = True):
    """Build the model of ``src``.  Raises ElaborationError on errors when strict.

    With ``strict=False`` returns ``(pnet_or_None, diagnostics)``.
    """
    el = _Elab(src)
    el.learn_signatures()
    pnet = None
    try:
        pnet = el.root()
    except ElaborationError:
        pass
    diags = list(el.diags)
    if pnet is not None:
        diags.extend(model.validate(pnet))
    errors = [d for d in diags if d.severity == "error"]
    if strict:
        if errors or pnet is None:
            raise ElaborationError(errors or diags)
        return pnet
    return pnet, diags


def resolve_imports(src: SourceSystem, include=(), base_dir=None) -> list:
    """Merge constants from resolvable imports; return warnings for the rest."""
    warnings = []
    dirs = ([base_dir] if base_dir else []) + list(include)
    for name in src.imports:
        found = None
        for d in dirs:
            cand = Path(d) / name
            if cand.is_file():
                found = cand
                break
        if found is None:
            warnings.append(Diagnostic("unresolved import", f"{name} not found on the include path",
                                       "", "warning"))
            continue
        try:
            sub = parse(found.read_text(encoding="utf-8"))
        except ParseError as exc:
            warnings.append(Diagnostic("import", f"{name}: {exc}", "", "warning"))
            continue
        for k, v in sub.constants.items():
            src.constants.setdefault(k, v)
        names = {b.name for b in src.blocks}
        src.blocks[:0] = [b for b in sub.blocks if b.name not in names]
    return warnings


def load(path, include=(), strict=True):
    """Parse and elaborate a ``.pnet`` file."""
    path = Path(path)
    src = parse(path.read_text(encoding="utf-8"))
    warnings = resolve_imports(src, include, path.parent)
    if strict:
        return elaborate(src)
    pnet, diags = elaborate(src, strict=False)
    return pnet, warnings + diags


def load_text(text, include=(), strict=True):
    src = parse(text)
    warnings = resolve_imports(src, include)
    if strict:
        return elaborate(src)
    pnet, diags = elaborate(src, strict=False)
    return pnet, warnings + diags


def parse_predicate(text: str, variables: dict, constants: dict | None = None):
    """Parse a guard-syntax predicate over the given variables (name to Var)."""
    src = SourceSystem(constants={k: v.value if isinstance(v, Sort) else v
                                  for k, v in (constants or {}).items()})
    el = _Elab(src)
    g = parse_guard_text(text)
    pred = el.guard(g, dict(variables))
    if el.diags:
        raise ElaborationError(el.diags)
    return pred


# ---------------------------------------------------------------------------
# Printing


def print_source(p) -> str:
    """Render a model back to DSL text (synthesised idle vectors omitted)."""
    ctors: dict = {}
    blocks: list = []
    done: set = set()
    _collect_consts(p, ctors)
    _emit(p, blocks, done)
    lines = [f"root {p.name}"]
    by_sort: dict = {}
    for name, sort in sorted(ctors.items()):
        by_sort.setdefault(sort, []).append(name)
    for sort, names in by_sort.items():
        lines.append(f"const {', '.join(names)}: {sort.value}")
    lines.append("")
    return "\n".join(lines + blocks)


def _collect_consts(p, out):
    for (name, sort), _ in model.constructors(p).items():
        if name not in BUILTINS:
            out[name] = sort


def _emit(p, blocks, done):
    if p.name in done:
        return
    done.add(p.name)
    if isinstance(p, PLTS):
        lines = [f"pLTS {p.name}", f"  initial {p.initial}"]
        iv = sorted(p.input_vars, key=lambda v: v.name)
        if iv:
            lines.append("  vars " + " ".join(f"?{v.name}:{v.sort.value}" for v in iv))
        if p.vars:
            lines.append("  vars " + " ".join(f"{v.name}:{v.sort.value}" for v in p.vars))
        for s in p.states:
            lines.append(f"state {s}")
            for t in p.transitions_from(s):
                guard = "" if t.guard == TRUE else f" [{t.guard}]"
                post = ""
                if t.assignments:
                    post = " {" + ", ".join(f"{v.name}:={e}" for v, e in t.assignments.items()) + "}"
                lines.append(f"  transition {_act(strip_inputs(t.action))}{guard} -> {t.target}{post}")
        blocks.append("\n".join(lines) + "\n")
        return
    for _, c in p.children:
        _emit(c, blocks, done)
    lines = [f"pNet {p.name}"]
    if p.holes:
        lines.append("  holes " + ", ".join(i for i, _ in p.holes))
    names = []
    children = p.child_map
    for idx in p.order:
        names.append(children[idx].name if idx in children else idx)
    lines.append("  subnets " + ", ".join(names))
    vs: dict = {}
    for v in p.vectors:
        if v.synthetic:
            continue
        for x in sorted(all_vars(tuple(a for _, a in v.slots)) | all_vars(v.result), key=lambda x: x.name):
            vs.setdefault(x.name, x.sort)
    if vs:
        lines.append("  vars " + " ".join(f"{n}:{s.value}" for n, s in vs.items()))
    for v in p.vectors:
        if v.synthetic:
            continue
        slot_map = v.slot_map
        slots = ", ".join(_act(slot_map[i]) if i in slot_map else "_" for i in p.order)
        guard = "" if v.guard == TRUE else f" [{v.guard}]"
        lines.append(f"vector {v.name} <{slots}> -> {_act(v.result)}{guard}")
    blocks.append("\n".join(lines) + "\n")


def _act(a) -> str:
    if isinstance(a, App) and a.sort is Sort.ACTION and not a.args and a.name != TAU_NAME:
        return f"{a.name}()"
    return str(a)
