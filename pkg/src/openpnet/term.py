"""Sorted terms, predicates and parallel substitutions.

Terms cover data expressions, Nat expressions restricted to ``var + constant``
chains, and action terms whose parameters may be input-marked (``?x``).
Predicates are first-order formulas over equality of terms.  Everything here
is immutable; the only mutable object is :class:`Freshener`, which hands out
globally unique variable names during a derivation pass.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union


class SortError(TypeError):
    """Raised when a term of one sort is used where another is expected."""


class Sort(enum.Enum):
    DATA = "Data"
    NAT = "Nat"
    BOOL = "Bool"
    ACTION = "Action"

    @classmethod
    def parse(cls, text: str) -> "Sort":
        aliases = {"Data": cls.DATA, "Nat": cls.NAT, "Int": cls.NAT,
                   "Bool": cls.BOOL, "Action": cls.ACTION}
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown sort {text!r}") from None

    def __str__(self) -> str:
        return self.value


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True, slots=True)
class Var:
    name: str
    sort: Sort
    origin: str = field(default="", compare=False)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Nat:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise SortError(f"negative Nat literal {self.value}")

    @property
    def sort(self) -> Sort:
        return Sort.NAT

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True, slots=True)
class Plus:
    """``base + offset`` with a positive constant offset."""

    base: Var
    offset: int

    @property
    def sort(self) -> Sort:
        return Sort.NAT

    def __str__(self) -> str:
        return f"{self.base}+{self.offset}"


@dataclass(frozen=True, slots=True)
class App:
    """Constructor application; nullary constructors are constants."""

    name: str
    args: tuple = ()
    sort: Sort = Sort.ACTION

    def __str__(self) -> str:
        if self.name == SEQ:
            return "[" + ", ".join(map(str, self.args)) + "]"
        if self.name == TAU_NAME and not self.args:
            return "tau"
        if self.sort is Sort.DATA and not self.args:
            return self.name
        return f"{self.name}({', '.join(map(str, self.args))})"


@dataclass(frozen=True, slots=True)
class Input:
    """An input-marked parameter ``?x`` inside a pLTS transition label."""

    var: Var

    @property
    def sort(self) -> Sort:
        return self.var.sort

    def __str__(self) -> str:
        return f"?{self.var}"


Term = Union[Var, Nat, Plus, App, Input]

TAU_NAME = "tau"
TAU = App(TAU_NAME, ())
SEQ = "[]"


def is_tau(t) -> bool:
    return t == TAU


def seq(items: Iterable) -> App:
    """Pack a hole-action sequence as a term so that sequence equality is term equality."""
    return App(SEQ, tuple(items), Sort.ACTION)


def plus(t, k: int):
    """Normalised ``t + k`` for a Nat-sorted term ``t``."""
    if k == 0:
        return t
    if isinstance(t, Nat):
        return Nat(t.value + k)
    if isinstance(t, Plus):
        return Plus(t.base, t.offset + k) if t.offset + k else t.base
    if isinstance(t, Var) and t.sort is Sort.NAT:
        return Plus(t, k) if k > 0 else _negative(t, k)
    raise SortError(f"'+' applied to non-Nat term {t}")


def _negative(t, k):
    raise SortError(f"negative offset {k} on {t}")


def term_sort(t) -> Sort:
    return t.sort


# ---------------------------------------------------------------------------
# Predicates


@dataclass(frozen=True, slots=True)
class Const:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, slots=True)
class Eq:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


@dataclass(frozen=True, slots=True)
class Neq:
    left: Term
    right: Term

    def __str__(self) -> str:
        return f"{self.left} != {self.right}"


@dataclass(frozen=True, slots=True)
class And:
    items: tuple

    def __str__(self) -> str:
        return " && ".join(_wrap(p, And) for p in self.items)


@dataclass(frozen=True, slots=True)
class Or:
    items: tuple

    def __str__(self) -> str:
        return " || ".join(_wrap(p, Or) for p in self.items)


@dataclass(frozen=True, slots=True)
class Not:
    body: "Predicate"

    def __str__(self) -> str:
        return "!" + _wrap(self.body, Not)


@dataclass(frozen=True, slots=True)
class Implies:
    hyp: "Predicate"
    concl: "Predicate"

    def __str__(self) -> str:
        return f"{_wrap(self.hyp, Implies)} => {_wrap(self.concl, Implies)}"


@dataclass(frozen=True, slots=True)
class Forall:
    vars: tuple
    body: "Predicate"

    def __str__(self) -> str:
        return f"forall {_binders(self.vars)}. {_wrap(self.body, Forall)}"


@dataclass(frozen=True, slots=True)
class Exists:
    vars: tuple
    body: "Predicate"

    def __str__(self) -> str:
        return f"exists {_binders(self.vars)}. {_wrap(self.body, Exists)}"


Predicate = Union[Const, Eq, Neq, And, Or, Not, Implies, Forall, Exists]
PREDICATE_TYPES = (Const, Eq, Neq, And, Or, Not, Implies, Forall, Exists)
TERM_TYPES = (Var, Nat, Plus, App, Input)


def _binders(vs) -> str:
    return ", ".join(f"{v.name}:{v.sort}" for v in vs)


def _wrap(p, parent) -> str:
    atomic = isinstance(p, (Const, Eq, Neq, Not))
    if atomic or (type(p) is parent and parent in (And, Or)):
        return str(p)
    return f"({p})"


def eq(a, b) -> Eq:
    """Sort-checked equality atom."""
    if a.sort is not b.sort:
        raise SortError(f"cannot compare {a}:{a.sort} with {b}:{b.sort}")
    return Eq(a, b)


def neq(a, b) -> Neq:
    if a.sort is not b.sort:
        raise SortError(f"cannot compare {a}:{a.sort} with {b}:{b.sort}")
    return Neq(a, b)


def conj(*items) -> "Predicate":
    """Flattening conjunction with unit laws only (no deeper rewriting)."""
    out = []
    for p in items:
        if isinstance(p, And):
            out.extend(p.items)
        elif p == TRUE:
            continue
        elif p == FALSE:
            return FALSE
        else:
            out.append(p)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def disj(*items) -> "Predicate":
    out = []
    for p in items:
        if isinstance(p, Or):
            out.extend(p.items)
        elif p == FALSE:
            continue
        elif p == TRUE:
            return TRUE
        else:
            out.append(p)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def forall(vs, body) -> "Predicate":
    vs = tuple(v for v in vs if v in free_vars(body))
    return Forall(vs, body) if vs else body


def exists(vs, body) -> "Predicate":
    vs = tuple(v for v in vs if v in free_vars(body))
    return Exists(vs, body) if vs else body


# ---------------------------------------------------------------------------
# Substitutions


class Subst(Mapping):
    """A parallel substitution.  Identity bindings ``x <- x`` are dropped."""

    __slots__ = ("_map",)

    def __init__(self, bindings: Iterable | Mapping = ()):
        items = bindings.items() if isinstance(bindings, Mapping) else bindings
        m = {}
        for var, term in items:
            if not isinstance(var, Var):
                raise TypeError(f"substitution domain must be variables, got {var!r}")
            if var.sort is not term.sort:
                raise SortError(f"binding {var}:{var.sort} <- {term}:{term.sort}")
            if var in m:
                raise ValueError(f"duplicate binding for {var}")
            if term != var:
                m[var] = term
        self._map = m

    def __getitem__(self, key):
        return self._map[key]

    def __iter__(self) -> Iterator[Var]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        if isinstance(other, Subst):
            return self._map == other._map
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._map.items()))

    def __repr__(self) -> str:
        return f"Subst({self})"

    def __str__(self) -> str:
        return "(" + ", ".join(f"{v}<-{t}" for v, t in self._map.items()) + ")"

    def union(self, other: "Subst") -> "Subst":
        """Disjoint union of two substitutions with disjoint domains."""
        clash = set(self._map) & set(other._map)
        if clash:
            raise ValueError(f"non-disjoint substitution union on {sorted(v.name for v in clash)}")
        return Subst(list(self._map.items()) + list(other._map.items()))

    def restrict(self, keep) -> "Subst":
        return Subst((v, t) for v, t in self._map.items() if v in keep)

    def without(self, drop) -> "Subst":
        return Subst((v, t) for v, t in self._map.items() if v not in drop)


EMPTY = Subst()


def apply_subst(obj, s: Mapping):
    """Apply ``s`` in parallel to a term, predicate, substitution or container."""
    if not s:
        return obj
    return _apply(obj, s, False)


def rename_vars(obj, mapping: Mapping):
    """Rename variables everywhere, including input markers (alpha-renaming)."""
    if not mapping:
        return obj
    return _apply(obj, mapping, True)


def _apply(obj, s, inputs: bool):
    t = type(obj)
    if t is Var:
        return s.get(obj, obj)
    if t is App:
        if not obj.args:
            return obj
        args = tuple(_apply(a, s, inputs) for a in obj.args)
        return obj if args == obj.args else App(obj.name, args, obj.sort)
    if t is Plus:
        base = s.get(obj.base, obj.base)
        return obj if base is obj.base else plus(base, obj.offset)
    if t is Nat:
        return obj
    if t is Input:
        if inputs and obj.var in s:
            return Input(s[obj.var])
        return obj
    if t is Const:
        return obj
    if t is Eq:
        return Eq(_apply(obj.left, s, inputs), _apply(obj.right, s, inputs))
    if t is Neq:
        return Neq(_apply(obj.left, s, inputs), _apply(obj.right, s, inputs))
    if t is And:
        return And(tuple(_apply(p, s, inputs) for p in obj.items))
    if t is Or:
        return Or(tuple(_apply(p, s, inputs) for p in obj.items))
    if t is Not:
        return Not(_apply(obj.body, s, inputs))
    if t is Implies:
        return Implies(_apply(obj.hyp, s, inputs), _apply(obj.concl, s, inputs))
    if t is Forall or t is Exists:
        return _apply_binder(obj, s, inputs)
    if t is Subst:
        return Subst((v, _apply(e, s, inputs)) for v, e in obj.items())
    if t is tuple or t is list:
        return t(_apply(x, s, inputs) for x in obj)
    if t is dict:
        return {k: _apply(v, s, inputs) for k, v in obj.items()}
    if t is str or t is int or obj is None:
        return obj
    raise TypeError(f"cannot substitute into {obj!r}")


def _apply_binder(q, s, inputs):
    bound = set(q.vars)
    inner = {v: e for v, e in s.items() if v not in bound}
    body_fv = free_vars(q.body)
    inner = {v: e for v, e in inner.items() if v in body_fv}
    if not inner:
        return q
    incoming = set()
    for e in inner.values():
        incoming |= free_vars(e)
    new_vars = []
    renames = {}
    if bound & incoming:
        taken = {v.name for v in incoming | body_fv | bound}
        for v in q.vars:
            if v in incoming:
                name = v.name
                while name in taken:
                    name += "'"
                taken.add(name)
                nv = Var(name, v.sort, v.origin)
                renames[v] = nv
                new_vars.append(nv)
            else:
                new_vars.append(v)
    else:
        new_vars = list(q.vars)
    mapping = dict(inner)
    mapping.update(renames)
    return type(q)(tuple(new_vars), _apply(q.body, mapping, inputs))


def compose_subst(outer: Mapping, inner: Mapping) -> Subst:
    """The substitution P with ``t{P} == t{inner}{outer}`` for every t.

    Read as an effect sequence, ``compose_subst(first, second)`` is the effect
    of performing ``first`` and then ``second``.
    """
    if not inner:
        return outer if isinstance(outer, Subst) else Subst(outer)
    if not outer:
        return inner if isinstance(inner, Subst) else Subst(inner)
    bindings = [(v, _apply(e, outer, False)) for v, e in inner.items()]
    bindings += [(v, e) for v, e in outer.items() if v not in inner]
    return Subst(bindings)


# ---------------------------------------------------------------------------
# Variables


def free_vars(obj) -> frozenset:
    """Free variables; quantifier-bound and input-marked occurrences excluded."""
    out: set = set()
    _collect(obj, out, False)
    return frozenset(out)


def all_vars(obj) -> frozenset:
    """Free variables including input-marked ones (``vars(t)``)."""
    out: set = set()
    _collect(obj, out, True)
    return frozenset(out)


def input_vars(obj) -> frozenset:
    """Input-marked variables of an action term, markers stripped."""
    out: set = set()
    _inputs(obj, out)
    return frozenset(out)


def _inputs(obj, out):
    if isinstance(obj, Input):
        out.add(obj.var)
    elif isinstance(obj, App):
        for a in obj.args:
            _inputs(a, out)


def _collect(obj, out: set, inputs: bool):
    t = type(obj)
    if t is Var:
        out.add(obj)
    elif t is App:
        for a in obj.args:
            _collect(a, out, inputs)
    elif t is Plus:
        out.add(obj.base)
    elif t is Input:
        if inputs:
            out.add(obj.var)
    elif t is Nat or t is Const:
        pass
    elif t is Eq or t is Neq:
        _collect(obj.left, out, inputs)
        _collect(obj.right, out, inputs)
    elif t is And or t is Or:
        for p in obj.items:
            _collect(p, out, inputs)
    elif t is Not:
        _collect(obj.body, out, inputs)
    elif t is Implies:
        _collect(obj.hyp, out, inputs)
        _collect(obj.concl, out, inputs)
    elif t is Forall or t is Exists:
        inner: set = set()
        _collect(obj.body, inner, inputs)
        out |= inner - set(obj.vars)
    elif t is Subst:
        for v, e in obj.items():
            out.add(v)
            _collect(e, out, inputs)
    elif t in (tuple, list, set, frozenset):
        for x in obj:
            _collect(x, out, inputs)
    elif t is dict:
        for x in obj.values():
            _collect(x, out, inputs)
    elif t is str or t is int or obj is None:
        pass
    else:
        raise TypeError(f"cannot collect variables of {obj!r}")


def strip_inputs(t):
    """Replace input markers by the plain variable (``?x`` becomes ``x``)."""
    if isinstance(t, Input):
        return t.var
    if isinstance(t, App) and t.args:
        return App(t.name, tuple(strip_inputs(a) for a in t.args), t.sort)
    return t


def ordered_vars(obj, inputs: bool = True) -> list:
    """Free variables in order of first occurrence (deterministic traversal)."""
    seen: dict = {}
    _ordered(obj, seen, frozenset(), inputs)
    return list(seen)


def _ordered(obj, seen: dict, bound, inputs):
    t = type(obj)
    if t is Var:
        if obj not in bound:
            seen.setdefault(obj, None)
    elif t is App:
        for a in obj.args:
            _ordered(a, seen, bound, inputs)
    elif t is Plus:
        _ordered(obj.base, seen, bound, inputs)
    elif t is Input:
        if inputs:
            _ordered(obj.var, seen, bound, inputs)
    elif t is Eq or t is Neq:
        _ordered(obj.left, seen, bound, inputs)
        _ordered(obj.right, seen, bound, inputs)
    elif t is And or t is Or:
        for p in obj.items:
            _ordered(p, seen, bound, inputs)
    elif t is Not:
        _ordered(obj.body, seen, bound, inputs)
    elif t is Implies:
        _ordered(obj.hyp, seen, bound, inputs)
        _ordered(obj.concl, seen, bound, inputs)
    elif t is Forall or t is Exists:
        _ordered(obj.body, seen, bound | set(obj.vars), inputs)
    elif t is Subst:
        for v, e in obj.items():
            _ordered(v, seen, bound, inputs)
            _ordered(e, seen, bound, inputs)
    elif t in (tuple, list):
        for x in obj:
            _ordered(x, seen, bound, inputs)
    elif t is dict:
        for k in sorted(obj):
            _ordered(obj[k], seen, bound, inputs)


def base_name(name: str) -> str:
    return name.split("@", 1)[0]


class Freshener:
    """Source of globally unique names of the form ``base@tag#k``."""

    def __init__(self):
        self._counts: Counter = Counter()

    def fresh(self, var: Var, tag: str) -> Var:
        base = base_name(var.name)
        key = (base, tag)
        self._counts[key] += 1
        return Var(f"{base}@{tag}#{self._counts[key]}", var.sort, origin=tag)

    def renaming(self, variables: Iterable[Var], tag: str) -> dict:
        return {v: self.fresh(v, tag) for v in variables}


def freshen(obj, variables: Iterable[Var], fresher: Freshener, tag: str):
    """Rename ``variables`` in ``obj`` to fresh names; return (renamed, renaming)."""
    mapping = fresher.renaming(variables, tag)
    return rename_vars(obj, mapping), Subst(mapping)


# ---------------------------------------------------------------------------
# Canonical forms


def canonical(obj, fixed: frozenset = frozenset()) -> str:
    """Print ``obj`` with non-fixed variables renamed by first occurrence.

    Bound variables are renamed De Bruijn style, so alpha-equivalent objects
    give equal strings.
    """
    free = [v for v in ordered_vars(obj) if v not in fixed]
    mapping = {v: Var(f"_{i}", v.sort) for i, v in enumerate(free)}
    renamed = rename_vars(obj, mapping)
    return _canon_print(_debruijn(renamed, 0))


def _debruijn(obj, depth):
    t = type(obj)
    if t is Forall or t is Exists:
        mapping = {}
        new = []
        for v in obj.vars:
            nv = Var(f"~{depth}", v.sort)
            depth += 1
            mapping[v] = nv
            new.append(nv)
        body = _debruijn(rename_vars(obj.body, mapping), depth)
        return t(tuple(new), body)
    if t is And or t is Or:
        return t(tuple(_debruijn(p, depth) for p in obj.items))
    if t is Not:
        return Not(_debruijn(obj.body, depth))
    if t is Implies:
        return Implies(_debruijn(obj.hyp, depth), _debruijn(obj.concl, depth))
    if t is tuple or t is list:
        return t(_debruijn(x, depth) for x in obj)
    if t is dict:
        return {k: _debruijn(v, depth) for k, v in obj.items()}
    return obj


def _canon_print(obj) -> str:
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{k}:{_canon_print(obj[k])}" for k in sorted(obj)) + "}"
    if isinstance(obj, (tuple, list)):
        return "(" + "; ".join(_canon_print(x) for x in obj) + ")"
    if isinstance(obj, Subst):
        return "(" + ", ".join(f"{v}<-{t}" for v, t in sorted(obj.items(), key=lambda kv: kv[0].name)) + ")"
    return str(obj)


def show(obj) -> str:
    """Human-readable rendering used in reports."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{k}->{show(v)}" for k, v in obj.items()) + "}"
    return str(obj)
