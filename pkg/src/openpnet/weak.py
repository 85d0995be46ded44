"""Weak open automata: silent-step saturation of an open automaton.

Weak open transitions (WOTs) carry, per hole, the sequence of visible actions
the hole performed.  They are generated by three rules:

* WT1: a silent self-loop on every state;
* WT2: every open transition, with silent hole actions removed (``vis``);
* WT3: a silent WOT, any WOT, then another silent WOT, concatenated.

Loops whose effects change variables produce infinitely many WOTs, so the
number of WT3 applications inside one WOT is bounded by ``depth``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import logic
from .semantics import GlobalState, OpenAutomaton, automaton_dot
from .term import (
    FALSE, TAU, TRUE, Freshener, Subst, all_vars, apply_subst, canonical, compose_subst, conj,
    free_vars, freshen, is_tau,
)


class SaturationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class WeakOpenTransition:
    source: GlobalState
    target: GlobalState
    gammas: tuple  # ((hole, (action, ...)), ...) with non-empty sequences only
    action: object
    guard: object = TRUE
    post: Subst = field(default_factory=Subst)
    name: str = ""
    derivation: tuple = ()
    cost: int = 0

    @property
    def gamma_map(self) -> dict:
        return dict(self.gammas)

    @property
    def holes(self) -> frozenset:
        return frozenset(j for j, _ in self.gammas)

    @property
    def silent(self) -> bool:
        return is_tau(self.action)

    def local_vars(self, state_vars) -> frozenset:
        found = all_vars((self.gammas, self.action)) | free_vars(self.guard)
        for e in self.post.values():
            found |= all_vars(e)
        return frozenset(found) - frozenset(state_vars)

    def key(self, state_vars=frozenset()) -> str:
        return canonical((self.source.states, self.target.states, self.gammas, self.action,
                          self.guard, self.post), frozenset(state_vars))

    def describe(self) -> str:
        gammas = "{" + ", ".join(f"{j}->[{', '.join(map(str, seq))}]" for j, seq in self.gammas) + "}"
        return f"{gammas}, [{logic.tidy(self.guard)}], {self.post}"

    def __str__(self) -> str:
        head = f"{self.name}: " if self.name else ""
        return f"{head}{self.source.label} ={self.action}=> {self.target.label}  {self.describe()}"


@dataclass
class WeakOpenAutomaton:
    name: str
    holes: dict
    leaves: tuple
    state_vars: tuple
    initial: GlobalState
    states: tuple
    transitions: tuple
    depth: int

    def transitions_from(self, state) -> list:
        return [w for w in self.transitions if w.source == state]

    def find_state(self, label: str) -> GlobalState:
        for s in self.states:
            if label.strip() in s.aliases():
                return s
        raise KeyError(label)

    def keys_from(self, state) -> set:
        fixed = frozenset(self.state_vars)
        return {w.key(fixed) for w in self.transitions_from(state)}

    def to_json(self) -> dict:
        return {
            "kind": "weak-open-automaton",
            "name": self.name,
            "depth": self.depth,
            "holes": {j: [str(p) for p in s] for j, s in self.holes.items()},
            "leaves": list(self.leaves),
            "vars": [{"name": v.name, "sort": v.sort.value} for v in self.state_vars],
            "initial": self.initial.label,
            "states": [{"label": s.label, "locations": list(s.states)} for s in self.states],
            "transitions": [wot_to_json(w) for w in self.transitions],
        }

    def to_dot(self) -> str:
        def gammas(w):
            return ", ".join(f"{j}:[{', '.join(map(str, seq))}]" for j, seq in w.gammas)
        return automaton_dot(self.name, self.initial, self.states, self.transitions, gammas)

    def table(self) -> str:
        """One line per WOT: name, endpoints, sequences, guard, effect."""
        rows = []
        for w in self.transitions:
            rows.append(f"{w.name:<8} {w.source.label:>4} ={w.action}=> {w.target.label:<4} "
                        f"{w.describe()}  via {format_derivation(w.derivation)}")
        return "\n".join(rows) + ("\n" if rows else "")


def wot_to_json(w) -> dict:
    return {
        "name": w.name,
        "source": w.source.label,
        "target": w.target.label,
        "holes": {j: [str(a) for a in seq] for j, seq in w.gammas},
        "action": str(w.action),
        "guard": str(w.guard),
        "post": {v.name: str(e) for v, e in w.post.items()},
        "derivation": format_derivation(w.derivation),
        "cost": w.cost,
    }


def format_derivation(d) -> str:
    if not d:
        return ""
    if d[0] == "WT3":
        return "WT3(" + ", ".join(format_derivation(x) for x in d[1:]) + ")"
    return f"{d[0]}:{d[1]}"


# ---------------------------------------------------------------------------
# Rules


def vis(betas) -> tuple:
    """Drop silent hole actions, wrap the others in singleton sequences."""
    items = betas.items() if isinstance(betas, dict) else betas
    return tuple((j, (a,)) for j, a in items if not is_tau(a))


def wt1(state: GlobalState) -> WeakOpenTransition:
    return WeakOpenTransition(state, state, (), TAU, TRUE, Subst(), "", ("WT1", state.label), 0)


def wt2_lift(ot) -> WeakOpenTransition:
    return WeakOpenTransition(ot.source, ot.target, vis(ot.betas), ot.action, ot.guard, ot.post,
                              "", ("WT2", ot.name), 0)


def wt3_concat(w1, w2, w3, state_vars=frozenset(), fresher: Freshener | None = None,
               hole_order=None) -> WeakOpenTransition:
    """Silent ``w1``, then ``w2``, then silent ``w3``.

    Effects compose left to right: the guard of ``w2`` is read after the
    effect of ``w1``, the guard of ``w3`` after both.
    """
    if w1.target != w2.source or w2.target != w3.source:
        raise ValueError("WT3 endpoints do not chain")
    if not (w1.silent and w3.silent):
        raise ValueError("WT3 needs silent first and last transitions")
    fresher = fresher or Freshener()
    fixed = frozenset(state_vars)
    parts = []
    for k, w in enumerate((w1, w2, w3)):
        local = sorted(w.local_vars(fixed), key=lambda v: v.name)
        body = (w.gammas, w.action, w.guard, w.post)
        if local:
            body, _ = freshen(body, local, fresher, "w")
        parts.append(body)
    (g1, _, p1, s1), (g2, a2, p2, s2), (g3, _, p3, s3) = parts
    s12 = compose_subst(s1, s2)
    guard = conj(p1, apply_subst(p2, s1), apply_subst(p3, s12))
    guard = logic.simplify(guard)
    gammas = _concat_gammas([g1, apply_subst(g2, s1), apply_subst(g3, s12)], hole_order)
    post = compose_subst(s12, s3)
    return WeakOpenTransition(w1.source, w3.target, gammas, apply_subst(a2, s1), guard, post, "",
                              ("WT3", w1.derivation, w2.derivation, w3.derivation),
                              w1.cost + w2.cost + w3.cost + 1)


def _concat_gammas(seq_maps, hole_order=None):
    merged: dict = {}
    for gm in seq_maps:
        for j, seq in gm:
            merged[j] = merged.get(j, ()) + tuple(seq)
    order = list(hole_order) if hole_order else sorted(merged)
    return tuple((j, merged[j]) for j in order if merged.get(j))


# ---------------------------------------------------------------------------
# Saturation


def saturate(oa: OpenAutomaton, depth: int = 3, budget: int = 200_000) -> WeakOpenAutomaton:
    """WT1 and WT2 images plus every WOT using at most ``depth`` WT3 steps."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    fixed = frozenset(oa.state_vars)
    hole_order = list(oa.holes)
    fresher = Freshener()
    keys: set = set()
    levels: list = []

    def admit(w, bucket):
        if w.guard == FALSE or not logic.is_satisfiable(w.guard):
            return
        k = w.key(fixed)
        if k in keys:
            return
        keys.add(k)
        bucket.append(w)
        if len(keys) > budget:
            raise SaturationBudgetExceeded(f"more than {budget} weak transitions")

    base: list = []
    for s in oa.states:
        admit(wt1(s), base)
    for ot in oa.transitions:
        admit(wt2_lift(ot), base)
    levels.append(base)

    for c in range(1, depth + 1):
        bucket: list = []
        silent_by = [_index_silent(lv) for lv in levels]
        for c2 in range(c):
            for w2 in levels[c2]:
                for c1 in range(c - c2):
                    c3 = c - 1 - c2 - c1
                    for w1 in silent_by[c1][1].get(w2.source, ()):
                        for w3 in silent_by[c3][0].get(w2.target, ()):
                            if _is_wt1(w1) and _is_wt1(w3):
                                continue
                            admit(wt3_concat(w1, w2, w3, fixed, fresher, hole_order), bucket)
        levels.append(bucket)

    wots = [w for lv in levels for w in lv]
    order = {s: i for i, s in enumerate(oa.states)}
    wots.sort(key=lambda w: (order[w.source], w.cost))
    named = tuple(_named(w, f"W{k + 1}") for k, w in enumerate(wots))
    return WeakOpenAutomaton(oa.name, oa.holes, oa.leaves, oa.state_vars, oa.initial, oa.states,
                             named, depth)


def _index_silent(level):
    by_source: dict = {}
    by_target: dict = {}
    for w in level:
        if w.silent:
            by_source.setdefault(w.source, []).append(w)
            by_target.setdefault(w.target, []).append(w)
    return by_source, by_target


def _is_wt1(w) -> bool:
    return w.derivation[:1] == ("WT1",)


def _named(w, name):
    return WeakOpenTransition(w.source, w.target, w.gammas, w.action, w.guard, w.post, name,
                              w.derivation, w.cost)


def replay(oa: OpenAutomaton, derivation) -> WeakOpenTransition:
    """Rebuild a WOT from its derivation trace."""
    rule = derivation[0]
    if rule == "WT1":
        return wt1(oa.find_state(derivation[1]))
    if rule == "WT2":
        for ot in oa.transitions:
            if ot.name == derivation[1]:
                return wt2_lift(ot)
        raise KeyError(derivation[1])
    if rule == "WT3":
        parts = [replay(oa, d) for d in derivation[1:]]
        return wt3_concat(*parts, frozenset(oa.state_vars), Freshener(), list(oa.holes))
    raise ValueError(f"unknown rule {rule!r}")


def exhausted_states(oa: OpenAutomaton, depth: int, woa: WeakOpenAutomaton | None = None,
                     deeper: WeakOpenAutomaton | None = None) -> set:
    """States whose WOT set does not grow when the depth is raised by one."""
    woa = woa or saturate(oa, depth)
    deeper = deeper or saturate(oa, depth + 1)
    return {s for s in oa.states if deeper.keys_from(s) <= woa.keys_from(s)}
