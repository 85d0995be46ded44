"""Structural pNet model: pLTS leaves, holes, synchronisation vectors."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

from .term import (
    App, Const, Input, Predicate, Sort, Subst, TAU, TRUE, Var, all_vars, free_vars,
    input_vars, is_tau, rename_vars, strip_inputs,
)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    location: str = ""
    severity: str = "error"

    def __str__(self) -> str:
        where = f"{self.location}: " if self.location else ""
        return f"{where}{self.severity}: {self.code}: {self.message}"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Transition:
    source: str
    action: object
    target: str
    guard: Predicate = TRUE
    assignments: Subst = field(default_factory=Subst)
    tid: str = ""

    def __str__(self) -> str:
        guard = "" if self.guard == TRUE else f" [{self.guard}]"
        post = f" {self.assignments}" if self.assignments else ""
        return f"{self.source} -{self.action}{guard}-> {self.target}{post}"


@dataclass(frozen=True)
class PLTS:
    name: str
    states: tuple
    initial: str
    vars: tuple = ()
    transitions: tuple = ()

    def transitions_from(self, state: str):
        return [t for t in self.transitions if t.source == state]

    @property
    def input_vars(self) -> frozenset:
        out: set = set()
        for t in self.transitions:
            out |= input_vars(t.action)
        return frozenset(out)


@dataclass(frozen=True)
class SyncVector:
    name: str
    slots: tuple  # ((index, action term), ...) in sub-net order, wildcards dropped
    result: object
    guard: Predicate = TRUE
    synthetic: bool = False

    @property
    def slot_map(self) -> dict:
        return dict(self.slots)

    @property
    def vars(self) -> frozenset:
        return all_vars(tuple(a for _, a in self.slots)) | all_vars(self.result) | free_vars(self.guard)

    def __str__(self) -> str:
        slots = ", ".join(f"{i}:{a}" for i, a in self.slots)
        guard = "" if self.guard == TRUE else f" [{self.guard}]"
        return f"{self.name} <{slots}> -> {self.result}{guard}"


@dataclass(frozen=True)
class Node:
    name: str
    order: tuple  # sub-net indices in declaration order (children and holes)
    children: tuple  # ((index, PNet), ...)
    holes: tuple  # ((index, (pattern, ...)), ...)
    vectors: tuple

    @property
    def child_map(self) -> dict:
        return dict(self.children)

    @property
    def hole_map(self) -> dict:
        return dict(self.holes)


PNet = Union[PLTS, Node]


def idle_vector(index: str) -> SyncVector:
    return SyncVector(f"tau_{index}", ((index, TAU),), TAU, TRUE, synthetic=True)


# ---------------------------------------------------------------------------
# sorts, holes, leaves


def sort_of(p: PNet) -> list:
    """Signature of a pNet: stripped transition labels, or vector results."""
    acts = ([strip_inputs(t.action) for t in p.transitions] if isinstance(p, PLTS)
            else [v.result for v in p.vectors])
    return list(dict.fromkeys(acts))


def holes_of(p: PNet) -> dict:
    """All holes of the tree, index to sort patterns."""
    if isinstance(p, PLTS):
        return {}
    out = dict(p.holes)
    for _, child in p.children:
        for idx, sort in holes_of(child).items():
            if idx in out:
                raise ModelError(f"duplicate hole index {idx!r}")
            out[idx] = sort
    return out


def leaves_of(p: PNet, index: str | None = None) -> dict:
    """pLTS leaves in declaration order, keyed by their child index."""
    if isinstance(p, PLTS):
        return {index or p.name: p}
    out: dict = {}
    children = p.child_map
    for idx in p.order:
        if idx in children:
            for k, leaf in leaves_of(children[idx], idx).items():
                if k in out:
                    raise ModelError(f"duplicate leaf index {k!r}")
                out[k] = leaf
    return out


def state_vars(p: PNet) -> frozenset:
    out: set = set()
    for leaf in leaves_of(p).values():
        out |= set(leaf.vars)
    return frozenset(out)


def matches_pattern(action, pattern) -> bool:
    """Does ``action`` belong to the sort described by ``pattern``?"""
    if isinstance(pattern, Var):
        return True
    if isinstance(action, Var):
        return action.sort is Sort.ACTION
    if not (isinstance(action, App) and isinstance(pattern, App)):
        return False
    return action.name == pattern.name and len(action.args) == len(pattern.args)


def in_sort(action, sort) -> bool:
    return any(matches_pattern(action, pat) for pat in sort)


def fill_hole(p: Node, j0: str, q: PNet) -> Node:
    """Install ``q`` in hole ``j0`` of ``p`` (partial hole filling)."""
    if isinstance(p, PLTS) or j0 not in p.hole_map:
        raise ModelError(f"{j0!r} is not a top-level hole of {getattr(p, 'name', p)!r}")
    sort = p.hole_map[j0]
    bad = [a for a in sort_of(q) if not is_tau(a) and not in_sort(a, sort)]
    if bad:
        raise ModelError(f"sort mismatch filling {j0!r}: {', '.join(map(str, bad))} not in hole sort")
    clash = state_vars(p) & state_vars(q)
    if clash:
        q = rename_state_vars(q, {v: Var(v.name + "'", v.sort, v.origin) for v in clash})
    holes = tuple((i, s) for i, s in p.holes if i != j0)
    children = p.children + ((j0, q),)
    return replace(p, children=children, holes=holes)


def rename_state_vars(p: PNet, mapping: dict) -> PNet:
    if isinstance(p, PLTS):
        trans = tuple(replace(t, action=rename_vars(t.action, mapping),
                              guard=rename_vars(t.guard, mapping),
                              assignments=Subst((mapping.get(v, v), rename_vars(e, mapping))
                                                for v, e in t.assignments.items()))
                      for t in p.transitions)
        return replace(p, vars=tuple(mapping.get(v, v) for v in p.vars), transitions=trans)
    return replace(p, children=tuple((i, rename_state_vars(c, mapping)) for i, c in p.children))


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class NonObservabilityReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "non-observability: pass"
        return "non-observability: fail\n" + "\n".join(f"  {v}" for v in self.violations)


def check_non_observability(p: PNet) -> NonObservabilityReport:
    """Check that no node can observe or react to a silent move of a sub-net."""
    out: list = []
    _nonobs(p, out)
    return NonObservabilityReport(tuple(out))


def _nonobs(p, out):
    if isinstance(p, PLTS):
        return
    holes = p.hole_map
    for idx in p.order:
        if not any(v.slots == ((idx, TAU),) and is_tau(v.result) and v.guard == TRUE
                   for v in p.vectors):
            out.append(f"{p.name}: no idle vector <{idx}:tau> -> tau")
    for v in p.vectors:
        for idx, act in v.slots:
            if idx in holes and is_tau(act) and (not is_tau(v.result) or len(v.slots) != 1):
                out.append(f"{p.name}.{v.name}: hole {idx} synchronised on tau")
    for _, child in p.children:
        _nonobs(child, out)


def validate(p: PNet) -> list:
    """All structural diagnostics of a pNet (empty when well formed)."""
    diags: list = []
    _validate(p, diags, set(), set())
    try:
        leaves = leaves_of(p)
    except ModelError as exc:
        diags.append(Diagnostic("duplicate index", str(exc), getattr(p, "name", "")))
        leaves = {}
    owner: dict = {}
    for idx, leaf in leaves.items():
        for v in leaf.vars:
            if v.name in owner and owner[v.name] != idx:
                diags.append(Diagnostic("variable disjointness",
                                        f"state variable {v.name} shared by {owner[v.name]} and {idx}",
                                        leaf.name))
            owner.setdefault(v.name, idx)
    return diags


def _validate(p, diags, hole_ids, leaf_ids):
    if isinstance(p, PLTS):
        _validate_plts(p, diags)
        return
    loc = p.name
    child_ids = {i for i, _ in p.children}
    for i, _ in p.holes:
        if i in child_ids:
            diags.append(Diagnostic("index clash", f"{i} is both a child and a hole", loc))
        if i in hole_ids:
            diags.append(Diagnostic("duplicate index", f"hole {i} declared twice in the tree", loc))
        hole_ids.add(i)
    known = set(p.order)
    children = p.child_map
    holes = p.hole_map
    for v in p.vectors:
        vloc = f"{loc}.{v.name}"
        slot_vars: set = set()
        for idx, act in v.slots:
            slot_vars |= all_vars(act)
            if idx not in known:
                diags.append(Diagnostic("unknown sub-net", f"slot index {idx}", vloc))
            elif idx in children and not is_tau(act):
                sort = sort_of(children[idx])
                if not any(_unifiable(act, s) for s in sort):
                    diags.append(Diagnostic("slot sort", f"{act} is not in the sort of {idx}", vloc))
            elif idx in holes and not in_sort(act, holes[idx]) and not is_tau(act):
                diags.append(Diagnostic("slot sort", f"{act} is not in the sort of hole {idx}", vloc))
        extra = all_vars(v.result) - slot_vars
        if extra:
            names = ", ".join(sorted(x.name for x in extra))
            diags.append(Diagnostic("result variables", f"{names} not bound by the vector's slots", vloc))
        if not v.slots:
            diags.append(Diagnostic("vector length", "vector synchronises nothing", vloc))
    for _, child in p.children:
        _validate(child, diags, hole_ids, leaf_ids)


def _unifiable(a, b) -> bool:
    from .logic import unify
    va = all_vars(a)
    ren = {v: Var(v.name + "~", v.sort) for v in all_vars(b) & va}
    b = rename_vars(b, ren)
    return unify([(strip_inputs(a), strip_inputs(b))]) is not None


def _validate_plts(p: PLTS, diags):
    loc = p.name
    states = set(p.states)
    V = set(p.vars)
    if p.initial not in states:
        diags.append(Diagnostic("initial state", f"{p.initial} is not a declared state", loc))
    if len(states) != len(p.states):
        diags.append(Diagnostic("duplicate state", "a state is declared twice", loc))
    for t in p.transitions:
        tloc = f"{loc}.{t.tid or t.source}"
        for s in (t.source, t.target):
            if s not in states:
                diags.append(Diagnostic("unknown state", f"{s} is not a declared state", tloc))
        iv = input_vars(t.action)
        counts: dict = {}
        _count_vars(t.action, counts)
        for v in iv:
            if counts.get(v, 0) > 1:
                diags.append(Diagnostic("input variable reuse",
                                        f"input variable {v} occurs more than once in {t.action}", tloc))
        if iv & V:
            diags.append(Diagnostic("input variable", "input variables must not be state variables", tloc))
        plain = all_vars(t.action) - iv
        if not plain <= V:
            names = ", ".join(sorted(x.name for x in plain - V))
            diags.append(Diagnostic("undeclared variable", f"{names} in label {t.action}", tloc))
        allowed = V | iv
        if not free_vars(t.guard) <= allowed | all_vars(t.action):
            names = ", ".join(sorted(x.name for x in free_vars(t.guard) - allowed))
            diags.append(Diagnostic("undeclared variable", f"{names} in guard", tloc))
        for x, e in t.assignments.items():
            if x not in V:
                diags.append(Diagnostic("assignment target", f"{x} is not a state variable", tloc))
            if not all_vars(e) <= allowed:
                names = ", ".join(sorted(y.name for y in all_vars(e) - allowed))
                diags.append(Diagnostic("undeclared variable", f"{names} in assignment to {x}", tloc))


def _count_vars(t, counts):
    if isinstance(t, Input):
        counts[t.var] = counts.get(t.var, 0) + 1
    elif isinstance(t, Var):
        counts[t] = counts.get(t, 0) + 1
    elif isinstance(t, App):
        for a in t.args:
            _count_vars(a, counts)


# ---------------------------------------------------------------------------
# export


def to_json(p: PNet) -> dict:
    """Stable JSON-ready view of the pNet tree."""
    if isinstance(p, PLTS):
        return {
            "kind": "plts",
            "name": p.name,
            "states": list(p.states),
            "initial": p.initial,
            "vars": [{"name": v.name, "sort": v.sort.value} for v in p.vars],
            "transitions": [
                {"source": t.source, "action": str(t.action), "guard": str(t.guard),
                 "assignments": {v.name: str(e) for v, e in t.assignments.items()},
                 "target": t.target}
                for t in p.transitions
            ],
        }
    return {
        "kind": "node",
        "name": p.name,
        "order": list(p.order),
        "children": {i: to_json(c) for i, c in p.children},
        "holes": {i: [str(s) for s in sort] for i, sort in p.holes},
        "vectors": [
            {"name": v.name, "slots": {i: str(a) for i, a in v.slots}, "result": str(v.result),
             "guard": str(v.guard), "synthetic": v.synthetic}
            for v in p.vectors
        ],
    }


def constructors(p: PNet) -> dict:
    """Constructor name to argument sorts, for every constructor used in ``p``."""
    out: dict = {}

    def visit(t):
        if isinstance(t, App):
            out.setdefault((t.name, t.sort), tuple(a.sort for a in t.args))
            for a in t.args:
                visit(a)

    def walk(q):
        if isinstance(q, PLTS):
            for t in q.transitions:
                visit(strip_inputs(t.action))
                for e in t.assignments.values():
                    visit(e)
        else:
            for v in q.vectors:
                for _, a in v.slots:
                    visit(a)
                visit(v.result)
            for _, c in q.children:
                walk(c)

    walk(p)
    return out


def is_guard_trivial(g) -> bool:
    return isinstance(g, Const) and g.value
