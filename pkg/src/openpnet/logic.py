"""Decision procedure for the generated predicate fragment.

The theory: Data and Action are free term algebras with infinitely many
constants, constructors are injective with pairwise distinct ranges, and Nat
terms are ``variable + constant``.  Validity is checked by skolemising
universals, turning hypotheses into a constraint store, and searching for
existential witnesses by unification.  Goals that depend on an undecided
equality among rigid terms are case split.  When a branch fails, a
countermodel is built and confirmed by re-evaluating the formula.
"""

from __future__ import annotations

import itertools
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass

from .term import (
    App, And, Const, Eq, Exists, FALSE, Forall, Implies, Input, Nat, Neq, Not, Or,
    Plus, SEQ, Sort, Subst, TRUE, Var, apply_subst, conj, disj, free_vars, plus,
)

MAX_SPLITS = 10
MAX_DNF = 512
MODEL_TRIES = 400


# ---------------------------------------------------------------------------
# Equalities


def nat_parts(t):
    if type(t) is Nat:
        return None, t.value
    if type(t) is Plus:
        return t.base, t.offset
    return t, 0


def _mk(base, k):
    return plus(base, k) if k else base


def decompose(a, b):
    """Split ``a = b`` into atomic equalities, or None on a clash.

    Each atom ``(l, r)`` has a variable on the left.  Nat atoms keep the
    zero-offset side on the left, e.g. ``(y, x+2)``.
    """
    out = []
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x == y:
            continue
        if x.sort is Sort.NAT:
            bx, i = nat_parts(x)
            by, j = nat_parts(y)
            if bx is None and by is None:
                return None
            if bx is None:
                bx, i, by, j = by, j, bx, i
            if by is None:
                if j < i:
                    return None
                out.append((bx, Nat(j - i)))
                continue
            if bx == by:
                return None
            m = min(i, j)
            i, j = i - m, j - m
            if i:
                out.append((by, _mk(bx, i)))
            else:
                out.append(_orient(bx, _mk(by, j)))
            continue
        tx, ty = type(x), type(y)
        if tx is App and ty is App:
            if x.name != y.name or len(x.args) != len(y.args):
                return None
            stack.extend(reversed(list(zip(x.args, y.args))))
            continue
        if tx is Input or ty is Input:
            x = x.var if tx is Input else x
            y = y.var if ty is Input else y
            stack.append((x, y))
            continue
        if tx is Var:
            v, t = x, y
        else:
            v, t = y, x
        if type(t) is App and v in free_vars(t):
            return None
        out.append(_orient(v, t))
    return out


def _orient(v, t):
    if type(t) is Var and t.name < v.name:
        return t, v
    return v, t


def eq_pred(a, b):
    atoms = decompose(a, b)
    if atoms is None:
        return FALSE
    if not atoms:
        return TRUE
    return conj(*(Eq(l, r) for l, r in atoms))


def unify(pairs, flexible=None):
    """Solve equations binding only ``flexible`` variables (all when None).

    Returns ``(theta, residual)`` where theta is an idempotent dict and the
    residual atoms could not be solved by binding, or None on a clash.
    """
    theta: dict = {}
    residual: list = []
    work = list(pairs)

    def bindable(v):
        return type(v) is Var and (flexible is None or v in flexible)

    while work:
        a, b = work.pop()
        if theta:
            a = apply_subst(a, theta)
            b = apply_subst(b, theta)
        atoms = decompose(a, b)
        if atoms is None:
            return None
        for l, r in atoms:
            if bindable(l) and l not in free_vars(r):
                v, t = l, r
            elif bindable(r):
                v, t = r, l
            else:
                residual.append((l, r))
                continue
            s1 = {v: t}
            theta = {w: apply_subst(e, s1) for w, e in theta.items()}
            theta[v] = t
            keep = []
            for pair in residual:
                if v in free_vars(pair):
                    work.append(pair)
                else:
                    keep.append(pair)
            residual = keep
    if residual and theta:
        residual = [(apply_subst(l, theta), apply_subst(r, theta)) for l, r in residual]
    return theta, residual


# ---------------------------------------------------------------------------
# Simplification


def negate(p):
    t = type(p)
    if t is Const:
        return FALSE if p.value else TRUE
    if t is Eq:
        return Neq(p.left, p.right)
    if t is Neq:
        return Eq(p.left, p.right)
    if t is And:
        return disj(*(negate(q) for q in p.items))
    if t is Or:
        return conj(*(negate(q) for q in p.items))
    if t is Not:
        return p.body
    if t is Implies:
        return conj(p.hyp, negate(p.concl))
    if t is Forall:
        return Exists(p.vars, negate(p.body))
    if t is Exists:
        return Forall(p.vars, negate(p.body))
    raise TypeError(f"not a predicate: {p!r}")


def simplify(p):
    """Equivalence-preserving normalisation (NNF, decomposition, elimination)."""
    t = type(p)
    if t is Const:
        return p
    if t is Eq:
        return eq_pred(p.left, p.right)
    if t is Neq:
        return negate(eq_pred(p.left, p.right))
    if t is Not:
        return simplify(negate(p.body))
    if t is And:
        return _simp_and([simplify(q) for q in p.items])
    if t is Or:
        return _simp_or([simplify(q) for q in p.items])
    if t is Implies:
        h = simplify(p.hyp)
        c = simplify(p.concl)
        if h == TRUE:
            return c
        if h == FALSE or c == TRUE:
            return TRUE
        if c == FALSE:
            return simplify(negate(h))
        return Implies(h, c)
    if t is Forall:
        return _simp_forall(p.vars, simplify(p.body))
    if t is Exists:
        return _simp_exists(p.vars, simplify(p.body))
    raise TypeError(f"not a predicate: {p!r}")


def _flatten(items, kind):
    out = []
    seen = set()
    unit, zero = (TRUE, FALSE) if kind is And else (FALSE, TRUE)
    for q in items:
        parts = q.items if type(q) is kind else (q,)
        for r in parts:
            if r == unit:
                continue
            if r == zero:
                return None
            if r not in seen:
                seen.add(r)
                out.append(r)
    return out


def _complementary(items):
    s = set(items)
    for q in items:
        if type(q) is Eq and Neq(q.left, q.right) in s:
            return True
    return False


def _simp_and(items):
    out = _flatten(items, And)
    if out is None:
        return FALSE
    if _complementary(out):
        return FALSE
    out = _propagate(out, And)
    if out is None:
        return FALSE
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def _simp_or(items):
    out = _flatten(items, Or)
    if out is None:
        return TRUE
    if _complementary(out):
        return TRUE
    out = _propagate(out, Or)
    if out is None:
        return TRUE
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def _definition(q, kind, candidates=None):
    """For an ``x = t`` conjunct (``x != t`` disjunct) return (x, t)."""
    lit = Eq if kind is And else Neq
    if type(q) is not lit:
        return None
    for v, t in ((q.left, q.right), (q.right, q.left)):
        if type(v) is Var and (candidates is None or v in candidates) and v not in free_vars(t):
            return v, t
    return None


def _propagate(items, kind, rounds=64):
    """Use each defining literal to rewrite its siblings."""
    items = list(items)
    for _ in range(rounds):
        changed = False
        for i, q in enumerate(items):
            d = _definition(q, kind)
            if d is None:
                continue
            v, t = d
            others = [j for j, r in enumerate(items) if j != i and v in free_vars(r)]
            if not others:
                continue
            s = {v: t}
            new = list(items)
            for j in others:
                new[j] = simplify(apply_subst(items[j], s))
            out = _flatten(new, kind)
            if out is None:
                return None
            if _complementary(out):
                return None
            items = out
            changed = True
            break
        if not changed:
            return items
    return items


def _is_negpat(body):
    if type(body) is Neq:
        return True
    return type(body) is Or and all(type(q) is Neq for q in body.items)


def _negpat_pairs(body):
    items = body.items if type(body) is Or else (body,)
    return [(q.left, q.right) for q in items]


def _simp_forall(vs, body):
    fv = free_vars(body)
    vs = tuple(v for v in vs if v in fv)
    if not vs:
        return body
    tb = type(body)
    if tb is And:
        return _simp_and([_simp_forall(vs, q) for q in body.items])
    if tb is Const:
        return body
    if tb is Or or tb is Neq:
        items = body.items if tb is Or else (body,)
        for i, q in enumerate(items):
            d = _definition(q, Or, set(vs))
            if d is not None:
                v, t = d
                rest = disj(*(items[:i] + items[i + 1:]))
                inner = simplify(apply_subst(rest, {v: t}))
                return _simp_forall(tuple(x for x in vs if x != v), inner)
        if _is_negpat(body):
            res = unify(_negpat_pairs(body), set(vs))
            if res is None:
                return TRUE
            if not res[1]:
                return FALSE
    if tb is Implies:
        hyps = body.hyp.items if type(body.hyp) is And else (body.hyp,)
        for i, q in enumerate(hyps):
            d = _definition(q, And, set(vs))
            if d is not None:
                v, t = d
                rest = Implies(conj(*(hyps[:i] + hyps[i + 1:])), body.concl)
                inner = simplify(apply_subst(rest, {v: t}))
                return _simp_forall(tuple(x for x in vs if x != v), inner)
    return Forall(vs, body)


def _simp_exists(vs, body):
    fv = free_vars(body)
    vs = tuple(v for v in vs if v in fv)
    if not vs:
        return body
    tb = type(body)
    if tb is Or:
        return _simp_or([_simp_exists(vs, q) for q in body.items])
    if tb is Const:
        return body
    if tb is And or tb is Eq:
        items = body.items if tb is And else (body,)
        for i, q in enumerate(items):
            d = _definition(q, And, set(vs))
            if d is not None:
                v, t = d
                rest = conj(*(items[:i] + items[i + 1:]))
                inner = simplify(apply_subst(rest, {v: t}))
                return _simp_exists(tuple(x for x in vs if x != v), inner)
    items = body.items if tb is And else (body,)
    if all(_avoidable(q, set(vs)) for q in items):
        return TRUE
    return Exists(vs, body)


def _avoidable(q, vs):
    """True when a choice of fresh values for ``vs`` certainly satisfies q."""
    if type(q) is Neq:
        atoms = decompose(q.left, q.right)
        if atoms is None:
            return True
        return any(free_vars(a) & vs for a in atoms)
    if type(q) is Forall and _is_negpat(q.body):
        res = unify(_negpat_pairs(q.body), set(q.vars))
        if res is None:
            return True
        return any(free_vars(a) & vs for a in res[1])
    return False


def tidy(p):
    """Light clean-up for display: unit laws, flattening, sequence unwrapping.

    Unlike :func:`simplify` it keeps equalities such as ``0 = 0`` visible.
    """
    t = type(p)
    if t is Eq or t is Neq:
        l, r = p.left, p.right
        if type(l) is App and type(r) is App and l.name == SEQ and r.name == SEQ:
            if len(l.args) != len(r.args):
                return FALSE if t is Eq else TRUE
            parts = [t(a, b) for a, b in zip(l.args, r.args)]
            return conj(*parts) if t is Eq else disj(*parts)
        return p
    if t is And:
        return conj(*(tidy(q) for q in p.items))
    if t is Or:
        return disj(*(tidy(q) for q in p.items))
    if t is Implies:
        h, c = tidy(p.hyp), tidy(p.concl)
        if h == TRUE:
            return c
        return Implies(h, c)
    if t is Forall or t is Exists:
        body = tidy(p.body)
        fv = free_vars(body)
        vs = tuple(v for v in p.vars if v in fv)
        return t(vs, body) if vs else body
    if t is Not:
        return Not(tidy(p.body))
    return p


# ---------------------------------------------------------------------------
# Prover


@dataclass(frozen=True)
class Verdict:
    kind: str
    witness: Subst | None = None
    reason: str = ""

    @property
    def is_valid(self) -> bool:
        return self.kind == "valid"

    @property
    def is_invalid(self) -> bool:
        return self.kind == "invalid"

    @property
    def is_unknown(self) -> bool:
        return self.kind == "unknown"

    def __str__(self) -> str:
        if self.kind == "invalid":
            return f"Invalid{self.witness}"
        if self.kind == "unknown":
            return f"Unknown({self.reason})"
        return "Valid"


VALID = Verdict("valid")


class _Store:
    __slots__ = ("theta", "diseqs", "negpats", "opaque", "scope")

    def __init__(self, theta=None, diseqs=(), negpats=(), opaque=(), scope=frozenset()):
        self.theta = theta or {}
        self.diseqs = diseqs
        self.negpats = negpats
        self.opaque = opaque
        self.scope = scope

    def resolve(self, obj):
        return apply_subst(obj, self.theta) if self.theta else obj

    def _with(self, **kw):
        d = {k: getattr(self, k) for k in self.__slots__}
        d.update(kw)
        return _Store(**d)


class _Failure:
    __slots__ = ("store", "reason")

    def __init__(self, store, reason):
        self.store = store
        self.reason = reason


class _Prover:
    def __init__(self, max_splits=MAX_SPLITS):
        self.max_splits = max_splits
        self.counter = itertools.count(1)
        self.approximate = False

    def fresh(self, v: Var, tag="k") -> Var:
        return Var(f"{v.name}!{tag}{next(self.counter)}", v.sort)

    # -- store updates -----------------------------------------------------

    def add_eq(self, store, a, b):
        a, b = store.resolve(a), store.resolve(b)
        res = unify([(a, b)])
        if res is None:
            return None
        th, resid = res
        if resid:
            return store._with(opaque=store.opaque + tuple(Eq(l, r) for l, r in resid))
        if not th:
            return store
        theta = {v: apply_subst(e, th) for v, e in store.theta.items()}
        theta.update(th)
        return self._recheck(store._with(theta=theta))

    def add_neq(self, store, a, b):
        p = eq_pred(store.resolve(a), store.resolve(b))
        if p == TRUE:
            return None
        if p == FALSE:
            return store
        return store._with(diseqs=store.diseqs + ((store.resolve(a), store.resolve(b)),))

    def add_negpat(self, store, pairs, zs):
        pairs = [(store.resolve(l), store.resolve(r)) for l, r in pairs]
        res = unify(pairs, set(zs))
        if res is None:
            return store
        if not res[1]:
            return None
        return store._with(negpats=store.negpats + ((tuple(pairs), tuple(zs)),))

    def _recheck(self, store):
        diseqs = []
        for l, r in store.diseqs:
            l, r = store.resolve(l), store.resolve(r)
            p = eq_pred(l, r)
            if p == TRUE:
                return None
            if p != FALSE:
                diseqs.append((l, r))
        negpats = []
        for pairs, zs in store.negpats:
            pairs = tuple((store.resolve(l), store.resolve(r)) for l, r in pairs)
            res = unify(pairs, set(zs))
            if res is None:
                continue
            if not res[1]:
                return None
            negpats.append((pairs, zs))
        opaque = tuple(store.resolve(q) for q in store.opaque)
        return store._with(diseqs=tuple(diseqs), negpats=tuple(negpats), opaque=opaque)

    def assume(self, store, lits):
        stores = [store]
        for lit in lits:
            nxt = []
            for st in stores:
                nxt.extend(self._assume_lit(st, lit))
            stores = nxt
            if not stores:
                break
        return stores

    def _assume_lit(self, store, lit):
        t = type(lit)
        if t is Const:
            return [store] if lit.value else []
        if t is Eq:
            st = self.add_eq(store, lit.left, lit.right)
            return [st] if st is not None else []
        if t is Neq:
            st = self.add_neq(store, lit.left, lit.right)
            return [st] if st is not None else []
        if t is Forall and _is_negpat(lit.body):
            st = self.add_negpat(store, _negpat_pairs(lit.body), lit.vars)
            return [st] if st is not None else []
        if t is Exists:
            ren = {v: self.fresh(v, "e") for v in lit.vars}
            body = simplify(apply_subst(lit.body, ren))
            scope = store.scope | frozenset(ren.values())
            out = []
            for lits in _dnf(body):
                out.extend(self.assume(store._with(scope=scope), lits))
            return out
        self.approximate = True
        return [store._with(opaque=store.opaque + (lit,))]

    # -- goals -------------------------------------------------------------

    def prove(self, store, goal, splits=0):
        while type(goal) is Forall:
            store, goal = self._skolemise(store, goal)
        goal = simplify(store.resolve(goal))
        t = type(goal)
        if goal == TRUE:
            return None
        if t is Implies:
            for lits in _dnf(goal.hyp):
                for st in self.assume(store, lits):
                    f = self.prove(st, goal.concl, splits)
                    if f is not None:
                        return f
            return None
        if t is Forall:
            st, body = self._skolemise(store, goal)
            return self.prove(st, body, splits)
        if t is And:
            for q in goal.items:
                f = self.prove(store, q, splits)
                if f is not None:
                    return f
            return None
        if t is Neq:
            return self._assume_then(store, [Eq(goal.left, goal.right)], [], splits)
        if t is Or:
            foralls = [q for q in goal.items if type(q) is Forall]
            if foralls:
                st = store
                items = []
                for q in goal.items:
                    if type(q) is Forall:
                        st, body = self._skolemise(st, q)
                        items.append(body)
                    else:
                        items.append(q)
                return self.prove(st, disj(*items), splits)
            hyps = [negate(q) for q in goal.items if type(q) is Neq]
            rest = [q for q in goal.items if type(q) is not Neq]
            if hyps:
                return self._assume_then(store, hyps, rest, splits)
            return self._prove_disj(store, list(goal.items), splits)
        return self._prove_disj(store, [goal], splits)

    def _assume_then(self, store, hyps, disjuncts, splits):
        for st in self.assume(store, hyps):
            goal = disj(*(st.resolve(q) for q in disjuncts))
            if disjuncts and simplify(goal) != FALSE:
                f = self.prove(st, goal, splits)
            else:
                f = _Failure(st, "no cover")
            if f is not None:
                return f
        return None

    def _skolemise(self, store, q):
        ren = {}
        used = {v.name for v in store.scope}
        for v in q.vars:
            if v.name in used:
                ren[v] = self.fresh(v, "s")
        body = apply_subst(q.body, ren) if ren else q.body
        new = [ren.get(v, v) for v in q.vars]
        return store._with(scope=store.scope | frozenset(new)), body

    def _prove_disj(self, store, disjuncts, splits):
        candidates = []
        for d in disjuncts:
            ok, cands = self._witness(store, d)
            if ok:
                return None
            candidates.extend(cands)
        if not candidates:
            return _Failure(store, "no cover")
        if splits >= self.max_splits:
            self.approximate = True
            return _Failure(store, "split budget exhausted")
        goal = disj(*disjuncts)
        for st in self._split(store, candidates[0]):
            f = self.prove(st, goal, splits + 1)
            if f is not None:
                return f
        return None

    def _split(self, store, cand):
        kind = cand[0]
        out = []
        if kind == "eq":
            _, l, r = cand
            out = [self.add_eq(store, l, r), self.add_neq(store, l, r)]
        elif kind == "match":
            _, pairs, zs = cand
            ren = {z: self.fresh(z, "m") for z in zs}
            inst = store
            for l, r in pairs:
                if inst is not None:
                    inst = self.add_eq(inst, apply_subst(l, ren), apply_subst(r, ren))
            if inst is not None:
                inst = inst._with(scope=inst.scope | frozenset(ren.values()))
            out = [inst, self.add_negpat(store, pairs, zs)]
        elif kind == "natge":
            _, x, k = cand
            out = [self.add_eq(store, x, Nat(i)) for i in range(k)]
            y = self.fresh(Var("n", Sort.NAT), "g")
            big = self.add_eq(store, x, plus(y, k))
            if big is not None:
                big = big._with(scope=big.scope | {y})
            out.append(big)
        return [st for st in out if st is not None]

    def _witness(self, store, d):
        """Try to prove disjunct ``d`` from the store without case splits."""
        vs, matrix = _pull_exists(d, self)
        flex = set(vs)
        candidates = []
        for lits in _dnf(matrix):
            eqs = [(q.left, q.right) for q in lits if type(q) is Eq]
            others = [q for q in lits if type(q) is not Eq]
            res = unify(eqs, flex)
            if res is None:
                continue
            th, resid = res
            if resid:
                if not any(self._refuted(store, l, r, flex) for l, r in resid):
                    candidates.extend(_classify(l, r, flex) for l, r in resid)
                continue
            unbound = flex - set(th)
            ok = True
            for q in others:
                q = apply_subst(q, th) if th else q
                good, cand = self._check_lit(store, q, unbound)
                if not good:
                    ok = False
                    if cand is not None:
                        candidates.append(cand)
                    break
            if ok:
                return True, []
        return False, candidates

    def _check_lit(self, store, q, unbound):
        t = type(q)
        if t is Const:
            return q.value, None
        if t is Neq:
            atoms = decompose(q.left, q.right)
            if atoms is None:
                return True, None
            if not atoms:
                return False, None
            for a in atoms:
                if free_vars(a) & unbound:
                    return True, None
            for l, r in atoms:
                if self._diseq_entailed(store, l, r):
                    return True, None
            l, r = atoms[0]
            return False, ("eq", l, r)
        if t is Forall and _is_negpat(q.body):
            pairs = _negpat_pairs(q.body)
            res = unify(pairs, set(q.vars))
            if res is None:
                return True, None
            th, resid = res
            if not resid:
                return False, None
            for a in resid:
                if free_vars(a) & unbound:
                    return True, None
            if self._negpat_entailed(store, resid, q.vars):
                return True, None
            zs = tuple(z for z in q.vars if z in free_vars(resid))
            if not zs:
                l, r = resid[0]
                return False, ("eq", l, r)
            return False, ("match", tuple(resid), zs)
        if t is Eq:
            atoms = decompose(q.left, q.right)
            if atoms is None:
                return False, None
            if not atoms:
                return True, None
            l, r = atoms[0]
            return False, _classify(l, r, unbound)
        self.approximate = True
        sub = _Prover(self.max_splits)
        f = sub.prove(store, q)
        return f is None, None

    def _refuted(self, store, l, r, flex):
        """True when the store rules out ``l = r`` for every choice of ``flex``."""
        fl = free_vars((l, r)) & flex
        if not fl:
            return self._diseq_entailed(store, l, r)
        return self._negpat_entailed(store, [(l, r)], tuple(fl))

    def _diseq_entailed(self, store, l, r):
        target = eq_pred(l, r)
        for a, b in store.diseqs:
            if eq_pred(a, b) == target:
                return True
        for pairs, zs in store.negpats:
            if len(pairs) != 1:
                continue
            (pl, pr), = pairs
            for x, y in ((l, r), (r, l)):
                res = unify([(pl, x), (pr, y)], set(zs))
                if res is not None and not res[1]:
                    return True
        return False

    def _negpat_entailed(self, store, resid, zs):
        from .term import canonical
        rigid = frozenset(free_vars(resid)) - set(zs)
        goal_key = canonical(tuple(resid), rigid)
        goal_atoms = {canonical(a, rigid) for a in resid}
        for pairs, zs2 in store.negpats:
            res = unify(pairs, set(zs2))
            if res is None or not res[1]:
                continue
            atoms = res[1]
            key = canonical(tuple(atoms), rigid)
            if key == goal_key:
                return True
            if len(atoms) == 1 and canonical(atoms[0], rigid) in goal_atoms:
                return True
        return False


def _classify(l, r, flex):
    fl = free_vars((l, r)) & flex
    if not fl:
        return ("eq", l, r)
    if l.sort is Sort.NAT and type(r) is Plus and r.base in flex and type(l) is Var and l not in flex:
        return ("natge", l, r.offset)
    if l.sort is Sort.NAT and type(l) is Plus and l.base in flex and type(r) is Var and r not in flex:
        return ("natge", r, l.offset)
    return ("match", ((l, r),), tuple(sorted(fl, key=lambda v: v.name)))


def _pull_exists(p, prover):
    """Move positive existentials of a goal to the front, renaming apart."""
    vs = []

    def walk(q):
        t = type(q)
        if t is Exists:
            ren = {v: prover.fresh(v, "w") for v in q.vars}
            vs.extend(ren.values())
            return walk(apply_subst(q.body, ren))
        if t is And:
            return conj(*(walk(x) for x in q.items))
        if t is Or:
            return disj(*(walk(x) for x in q.items))
        return q

    return vs, walk(p)


def _dnf(p):
    """Disjunctive normal form as a list of literal lists (capped)."""
    t = type(p)
    if p == TRUE:
        return [[]]
    if p == FALSE:
        return []
    if t is Or:
        out = []
        for q in p.items:
            out.extend(_dnf(q))
        return out
    if t is And:
        out = [[]]
        for q in p.items:
            branches = _dnf(q)
            if len(out) * len(branches) > MAX_DNF:
                out = [acc + [q] for acc in out]
                continue
            out = [acc + b for acc in out for b in branches]
        return out
    if t is Implies:
        return _dnf(simplify(Or((negate(p.hyp), p.concl))))
    return [[p]]


# ---------------------------------------------------------------------------
# Verdicts


def check_valid(p, max_splits: int = MAX_SPLITS) -> Verdict:
    """Decide validity of ``p`` (free variables read universally)."""
    root = p
    prover = _Prover(max_splits)
    scope = frozenset(free_vars(p))
    try:
        failure = prover.prove(_Store(scope=scope), p)
    except RecursionError:
        return Verdict("unknown", reason="formula too deep")
    if failure is None:
        return VALID
    witness = _countermodel(root, failure.store)
    if witness is not None:
        return Verdict("invalid", witness)
    return Verdict("unknown", reason=failure.reason)


def is_satisfiable(p) -> bool:
    """False only when ``not p`` is proved valid."""
    p = simplify(p)
    if p == FALSE:
        return False
    if p == TRUE:
        return True
    return not check_valid(negate(p)).is_valid


def entails(hyp, concl) -> Verdict:
    return check_valid(Implies(hyp, concl))


def evaluate(p):
    """Truth value of a closed formula, or None if undecided."""
    prover = _Prover()
    f = prover.prove(_Store(), p)
    if f is None:
        return True
    if prover.approximate or f.store.opaque:
        return None
    if free_vars(p):
        return None
    return False


def instantiate(p, sigma):
    """Replace the universally quantified spine of ``p`` and its free vars by ``sigma``."""
    def strip(q):
        t = type(q)
        if t is Forall:
            inner = strip(q.body)
            rest = tuple(v for v in q.vars if v not in sigma)
            return Forall(rest, inner) if rest else inner
        if t is Implies:
            return Implies(q.hyp, strip(q.concl))
        if t is And:
            return And(tuple(strip(x) for x in q.items))
        if t is Or:
            return Or(tuple(strip(x) for x in q.items))
        return q

    return apply_subst(strip(p), sigma)


def _spine_vars(p, out):
    t = type(p)
    if t is Forall:
        out.extend(p.vars)
        _spine_vars(p.body, out)
    elif t is Implies:
        _spine_vars(p.concl, out)
    elif t is And or t is Or:
        for q in p.items:
            _spine_vars(q, out)
    return out


def _atoms(sort, n, offset=0):
    if sort is Sort.DATA:
        return [App(f"d{i}", (), Sort.DATA) for i in range(offset, offset + n)]
    if sort is Sort.NAT:
        return [Nat(i) for i in range(offset, offset + n)]
    return [App(f"act{i}", (), Sort.ACTION) for i in range(offset, offset + n)]


def _countermodel(root, store):
    targets = list(dict.fromkeys(sorted(free_vars(root), key=lambda v: v.name)
                                 + _spine_vars(root, [])))
    involved = set(targets)
    involved |= free_vars(tuple(store.theta.values()))
    involved |= free_vars(tuple(store.diseqs))
    involved |= free_vars(tuple(pairs for pairs, _ in store.negpats))
    involved |= set(store.theta)
    free = sorted((v for v in involved if v not in store.theta), key=lambda v: v.name)

    pool = _ground_pool(root)

    def candidates():
        counts: dict = {}
        distinct = {}
        for v in free:
            k = counts.get(v.sort, 0)
            counts[v.sort] = k + 1
            distinct[v] = _atoms(v.sort, 1, k)[0]
        yield distinct
        domains = [pool[v.sort] for v in free]
        for combo in itertools.islice(itertools.product(*domains), MODEL_TRIES):
            yield dict(zip(free, combo))
        yield {v: (Nat(1000 * (i + 1)) if v.sort is Sort.NAT else distinct[v])
               for i, v in enumerate(free)}

    for assignment in candidates():
        sigma = dict(assignment)
        for v, e in store.theta.items():
            sigma[v] = apply_subst(e, assignment)
        if not _store_holds(store, sigma):
            continue
        ground = instantiate(root, {v: sigma[v] for v in targets if v in sigma})
        if free_vars(ground):
            continue
        if evaluate(ground) is False:
            return Subst((v, sigma[v]) for v in targets if v in sigma)
    return None


def _ground_pool(root):
    """Small candidate domains per sort, seeded with the formula's constructors."""
    data = _atoms(Sort.DATA, 3)
    pool = {Sort.DATA: list(data), Sort.NAT: _atoms(Sort.NAT, 6), Sort.BOOL: [],
            Sort.ACTION: _atoms(Sort.ACTION, 1)}
    seen = set()

    def visit(t):
        if type(t) is App:
            for a in t.args:
                visit(a)
            if t.name == SEQ or (t.name, len(t.args), t.sort) in seen:
                return
            seen.add((t.name, len(t.args), t.sort))
            doms = [pool[a.sort][:2] for a in t.args]
            for combo in itertools.islice(itertools.product(*doms), 4):
                inst = App(t.name, tuple(combo), t.sort)
                if inst not in pool[t.sort]:
                    pool[t.sort].append(inst)

    def walk(p):
        tp = type(p)
        if tp is Eq or tp is Neq:
            visit(p.left)
            visit(p.right)
        elif tp is And or tp is Or:
            for q in p.items:
                walk(q)
        elif tp is Not:
            walk(p.body)
        elif tp is Implies:
            walk(p.hyp)
            walk(p.concl)
        elif tp is Forall or tp is Exists:
            walk(p.body)

    walk(root)
    return pool


def _store_holds(store, sigma):
    for l, r in store.diseqs:
        if eq_pred(apply_subst(l, sigma), apply_subst(r, sigma)) == TRUE:
            return False
    for pairs, zs in store.negpats:
        inst = [(apply_subst(l, sigma), apply_subst(r, sigma)) for l, r in pairs]
        res = unify(inst, set(zs))
        if res is not None and not res[1]:
            return False
    return True


# ---------------------------------------------------------------------------
# SMT-LIB export


def _sym(name: str) -> str:
    simple = all(c.isalnum() or c in "~!@$%^&*_-+=<>.?/" for c in name) and not name[0].isdigit()
    return name if simple and "|" not in name else f"|{name}|"


class _SmtWriter:
    def __init__(self):
        self.ctors: dict = {}
        self.data_consts: dict = {}

    def collect(self, obj):
        t = type(obj)
        if t is App:
            for a in obj.args:
                self.collect(a)
            if obj.name == SEQ:
                return
            if obj.sort is Sort.ACTION:
                self.ctors.setdefault(obj.name, tuple(a.sort for a in obj.args))
            elif obj.sort is Sort.DATA:
                self.data_consts.setdefault(obj.name, tuple(a.sort for a in obj.args))
        elif t in (Eq, Neq):
            self.collect(obj.left)
            self.collect(obj.right)
        elif t in (And, Or):
            for q in obj.items:
                self.collect(q)
        elif t is Not:
            self.collect(obj.body)
        elif t is Implies:
            self.collect(obj.hyp)
            self.collect(obj.concl)
        elif t in (Forall, Exists):
            self.collect(obj.body)

    def term(self, t):
        tt = type(t)
        if tt is Var:
            return _sym(t.name)
        if tt is Nat:
            return str(t.value)
        if tt is Plus:
            return f"(+ {_sym(t.base.name)} {t.offset})"
        if tt is Input:
            return _sym(t.var.name)
        if tt is App:
            name = ("a_" if t.sort is Sort.ACTION else "d_") + t.name
            if not t.args:
                return _sym(name)
            return f"({_sym(name)} {' '.join(self.term(a) for a in t.args)})"
        raise TypeError(t)

    def pred(self, p):
        t = type(p)
        if t is Const:
            return "true" if p.value else "false"
        if t is Eq or t is Neq:
            l, r = p.left, p.right
            if type(l) is App and type(r) is App and l.name == SEQ and r.name == SEQ:
                if len(l.args) != len(r.args):
                    body = "false"
                else:
                    parts = [f"(= {self.term(a)} {self.term(b)})" for a, b in zip(l.args, r.args)]
                    body = "true" if not parts else (parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})")
            else:
                body = f"(= {self.term(l)} {self.term(r)})"
            return body if t is Eq else f"(not {body})"
        if t is And or t is Or:
            op = "and" if t is And else "or"
            return f"({op} {' '.join(self.pred(q) for q in p.items)})"
        if t is Not:
            return f"(not {self.pred(p.body)})"
        if t is Implies:
            return f"(=> {self.pred(p.hyp)} {self.pred(p.concl)})"
        if t is Forall or t is Exists:
            binders = " ".join(f"({_sym(v.name)} {_smt_sort(v.sort)})" for v in p.vars)
            guards = [f"(>= {_sym(v.name)} 0)" for v in p.vars if v.sort is Sort.NAT]
            body = self.pred(p.body)
            if guards:
                g = guards[0] if len(guards) == 1 else f"(and {' '.join(guards)})"
                body = f"(=> {g} {body})" if t is Forall else f"(and {g} {body})"
            q = "forall" if t is Forall else "exists"
            return f"({q} ({binders}) {body})"
        raise TypeError(p)


def _smt_sort(s: Sort) -> str:
    return {Sort.DATA: "Data", Sort.NAT: "Int", Sort.BOOL: "Bool", Sort.ACTION: "Action"}[s]


def to_smtlib(p) -> str:
    """SMT-LIB 2 script asserting the negation of ``p``; unsat means valid."""
    w = _SmtWriter()
    w.collect(p)
    lines = ["; validity query: unsat means the formula is valid", "(set-logic ALL)",
             "(declare-sort Data 0)"]
    ctors = []
    for name in sorted(w.ctors):
        sorts = w.ctors[name]
        sel = " ".join(f"({_sym(f'a_{name}_{i}')} {_smt_sort(s)})" for i, s in enumerate(sorts))
        ctors.append(f"({_sym('a_' + name)}{(' ' + sel) if sel else ''})")
    ctors.append("(a_other (a_other_0 Int))")
    lines.append(f"(declare-datatypes ((Action 0)) (({' '.join(ctors)})))")
    for name in sorted(w.data_consts):
        sorts = w.data_consts[name]
        args = " ".join(_smt_sort(s) for s in sorts)
        lines.append(f"(declare-fun {_sym('d_' + name)} ({args}) Data)")
    nullary = [n for n in sorted(w.data_consts) if not w.data_consts[n]]
    if len(nullary) > 1:
        lines.append(f"(assert (distinct {' '.join(_sym('d_' + n) for n in nullary)}))")
    for v in sorted(free_vars(p), key=lambda v: v.name):
        lines.append(f"(declare-fun {_sym(v.name)} () {_smt_sort(v.sort)})")
        if v.sort is Sort.NAT:
            lines.append(f"(assert (>= {_sym(v.name)} 0))")
    lines.append(f"(assert (not {w.pred(p)}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def run_external_solver(script: str, command: str | None = None, timeout: float = 30.0) -> str:
    """Run an SMT-LIB solver; ``command`` defaults to ``$OPENPNET_SMT_CMD``.

    The command may contain ``{file}``; otherwise the script is passed on stdin.
    Returns the first output line (``sat``, ``unsat`` or ``unknown``).
    """
    command = command or os.environ.get("OPENPNET_SMT_CMD")
    if not command:
        raise RuntimeError("no external solver configured (set OPENPNET_SMT_CMD)")
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as fh:
        fh.write(script)
        path = fh.name
    try:
        if "{file}" in command:
            argv = shlex.split(command.format(file=path))
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
        else:
            proc = subprocess.run(shlex.split(command), input=script, capture_output=True,
                                  text=True, timeout=timeout)
    finally:
        os.unlink(path)
    out = proc.stdout.strip().splitlines()
    return out[0].strip() if out else "unknown"
