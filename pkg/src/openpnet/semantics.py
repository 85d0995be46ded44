"""Strong semantics: the open automaton of a pNet.

Leaves contribute one open transition per pLTS transition (rule Tr1).  A node
combines, for each synchronisation vector, one open transition of every
involved child with the vector's hole actions (rule Tr2); the combination is
kept when the resulting predicate is satisfiable.  States are tuples of leaf
control locations, variable values stay symbolic in the guards and effects.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

from . import logic, model
from .model import Node, PLTS
from .term import (
    FALSE, TRUE, Freshener, Implies, Subst, SortError, all_vars, apply_subst,
    canonical, conj, free_vars, freshen, input_vars, is_tau, strip_inputs,
)


class StateCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class GlobalState:
    """Control locations of the leaves, in leaf declaration order."""

    states: tuple

    @property
    def label(self) -> str:
        """Short label: the state itself for one leaf, else the trailing digits."""
        if len(self.states) == 1:
            return self.states[0]
        if all(s[-1:].isdigit() for s in self.states):
            return "".join(s[-1] for s in self.states)
        return "_".join(self.states)

    def aliases(self) -> set:
        joined = ",".join(self.states)
        return {self.label, "_".join(self.states), joined, f"<{joined}>", str(self)}

    def __str__(self) -> str:
        return "<" + ",".join(self.states) + ">"


@dataclass(frozen=True)
class OpenTransition:
    source: GlobalState
    target: GlobalState
    betas: tuple  # ((hole, action), ...) in hole order
    action: object
    guard: object = TRUE
    post: Subst = field(default_factory=Subst)
    name: str = ""
    trace: tuple = ()

    @property
    def beta_map(self) -> dict:
        return dict(self.betas)

    @property
    def holes(self) -> frozenset:
        return frozenset(j for j, _ in self.betas)

    def local_vars(self, state_vars) -> frozenset:
        """Variables of the transition that are not automaton variables."""
        found = all_vars((tuple(a for _, a in self.betas), self.action)) | free_vars(self.guard)
        for e in self.post.values():
            found |= all_vars(e)
        return frozenset(found) - frozenset(state_vars)

    def key(self, state_vars=frozenset()) -> str:
        return canonical((self.source.states, self.target.states, self.betas, self.action,
                          self.guard, self.post), frozenset(state_vars))

    def describe(self) -> str:
        betas = "{" + ", ".join(f"{j}->{a}" for j, a in self.betas) + "}"
        return f"{betas}, [{logic.tidy(self.guard)}], {self.post}"

    def __str__(self) -> str:
        head = f"{self.name}: " if self.name else ""
        return f"{head}{self.source.label} -{self.action}-> {self.target.label}  {self.describe()}"


@dataclass
class OpenAutomaton:
    name: str
    holes: dict  # hole -> sort patterns
    leaves: tuple  # leaf indices
    state_vars: tuple
    initial: GlobalState
    states: tuple
    transitions: tuple
    satisfiable: int = 0
    unsatisfiable: int = 0

    def transitions_from(self, state: GlobalState) -> list:
        return [t for t in self.transitions if t.source == state]

    def find_state(self, label: str) -> GlobalState:
        label = label.strip()
        for s in self.states:
            if label in s.aliases():
                return s
        raise KeyError(label)

    def stats(self) -> str:
        return f"{len(self.states)} states, {len(self.transitions)} satisfiable OTs"

    def to_json(self) -> dict:
        return {
            "kind": "open-automaton",
            "name": self.name,
            "holes": {j: [str(p) for p in s] for j, s in self.holes.items()},
            "leaves": list(self.leaves),
            "vars": [{"name": v.name, "sort": v.sort.value} for v in self.state_vars],
            "initial": self.initial.label,
            "states": [{"label": s.label, "locations": list(s.states)} for s in self.states],
            "transitions": [ot_to_json(t) for t in self.transitions],
            "stats": {"satisfiable": self.satisfiable, "unsatisfiable": self.unsatisfiable},
        }

    def to_dot(self) -> str:
        return automaton_dot(self.name, self.initial, self.states, self.transitions)


def ot_to_json(t) -> dict:
    return {
        "name": t.name,
        "source": t.source.label,
        "target": t.target.label,
        "holes": {j: str(a) for j, a in t.betas},
        "action": str(t.action),
        "guard": str(t.guard),
        "post": {v.name: str(e) for v, e in t.post.items()},
    }


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def automaton_dot(name, initial, states, transitions, beta_text=None) -> str:
    lines = [f'digraph "{_dot_escape(name)}" {{', "  rankdir=LR;", '  init [shape=point];']
    for s in states:
        shape = "doublecircle" if s == initial else "circle"
        lines.append(f'  "{s.label}" [shape={shape}];')
    lines.append(f'  init -> "{initial.label}";')
    for t in transitions:
        betas = beta_text(t) if beta_text else ", ".join(f"{j}:{a}" for j, a in t.betas)
        label = f"{betas} | {t.action} | {logic.tidy(t.guard)} | {t.post}"
        lines.append(f'  "{t.source.label}" -> "{t.target.label}" [label="{_dot_escape(label)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Tr1 and Pred_sv


def plts_ot(plts: PLTS, t, fresher: Freshener | None = None, index: str | None = None) -> OpenTransition:
    """Open transition of a single pLTS transition.

    Input variables are renamed apart when a freshener is supplied.
    """
    action, guard, post = t.action, t.guard, t.assignments
    if fresher is not None:
        iv = sorted(input_vars(action), key=lambda v: v.name)
        if iv:
            (action, guard, post), _ = freshen((action, guard, post), iv, fresher, plts.name)
    return OpenTransition(GlobalState((t.source,)), GlobalState((t.target,)), (),
                          strip_inputs(action), guard, post, t.tid, (f"{index or plts.name}.{t.tid}",))


def pred_sv(sv, child_actions: dict, hole_actions: dict, alpha):
    """Predicate relating the actions offered to a vector and its result.

    The vector is assumed to be already freshened.  A constructor clash
    makes the predicate False.
    """
    slots = sv.slot_map
    parts = []
    pairs = [(child_actions[i], slots[i]) for i in child_actions]
    pairs += [(hole_actions[j], slots[j]) for j in hole_actions]
    pairs.append((alpha, sv.result))
    for a, b in pairs:
        try:
            eq = logic.eq_pred(a, b)
        except SortError:
            return FALSE
        if eq == FALSE:
            return FALSE
        parts.append(eq)
    parts.append(sv.guard)
    return conj(*parts)


# ---------------------------------------------------------------------------
# Tr2


@dataclass(frozen=True)
class _Move:
    """An open transition of a sub-net, with targets for its own leaves only."""

    betas: tuple
    action: object
    guard: object
    post: Subst
    moves: tuple  # ((leaf, target), ...)
    trace: tuple


class _Deriver:
    def __init__(self, root, simplify=True):
        self.root = root
        self.simplify = simplify
        self.fresher = Freshener()
        self.fixed = frozenset(model.state_vars(root))
        self.memo: dict = {}
        self.sat = 0
        self.unsat = 0

    def moves(self, p, index, local: dict) -> list:
        leaves = tuple(model.leaves_of(p, index)) if isinstance(p, Node) else (index,)
        key = (index, tuple(local[k] for k in leaves))
        if key not in self.memo:
            if isinstance(p, PLTS):
                self.memo[key] = self._leaf_moves(p, index, local[index])
            else:
                self.memo[key] = self._node_moves(p, index, local)
        return self.memo[key]

    def _leaf_moves(self, p, index, state):
        out = []
        for t in p.transitions_from(state):
            ot = plts_ot(p, t, self.fresher, index)
            out.append(_Move((), ot.action, ot.guard, ot.post, ((index, t.target),), ot.trace))
        return out

    def _node_moves(self, p, index, local):
        out = []
        children = p.child_map
        holes = p.hole_map
        for sv in p.vectors:
            sv_f = self._freshen_vector(sv, index)
            slots = sv_f.slot_map
            child_ids = [i for i in p.order if i in slots and i in children]
            hole_ids = [j for j in p.order if j in slots and j in holes]
            options = [self.moves(children[i], i, local) for i in child_ids]
            for combo in itertools.product(*options):
                m = self.synchronise(sv_f, dict(zip(child_ids, combo)), hole_ids)
                if m is None:
                    self.unsat += 1
                else:
                    self.sat += 1
                    out.append(m)
        return out

    def _freshen_vector(self, sv, index):
        vs = sorted(all_vars((tuple(a for _, a in sv.slots), sv.result)) | free_vars(sv.guard),
                    key=lambda v: v.name)
        if not vs:
            return sv
        (slots, result, guard), _ = freshen((sv.slots, sv.result, sv.guard), vs, self.fresher, sv.name)
        return model.SyncVector(sv.name, slots, result, guard, sv.synthetic)

    def synchronise(self, sv, child_moves: dict, hole_ids) -> _Move | None:
        slots = sv.slot_map
        guards = [m.guard for m in child_moves.values()]
        post = Subst()
        for m in child_moves.values():
            post = post.union(m.post)
        betas = tuple((j, slots[j]) for j in hole_ids)
        pairs = [(m.action, slots[i]) for i, m in child_moves.items()]
        try:
            solved = logic.unify(pairs, None)
        except SortError:
            solved = None
        if solved is None:
            return None
        if self.simplify:
            flexible = (all_vars(tuple(pairs)) | free_vars(tuple(guards))) - self.fixed
            theta, residual = logic.unify(pairs, flexible)
            eqs = [logic.eq_pred(l, r) for l, r in residual]
            guard = conj(*guards, sv.guard, *eqs)
            sub = Subst(theta)
            guard = logic.simplify(apply_subst(guard, sub))
            betas = apply_subst(betas, sub)
            action = apply_subst(sv.result, sub)
            post = Subst((v, apply_subst(e, sub)) for v, e in post.items())
        else:
            guard = conj(*guards, pred_sv(sv, {i: m.action for i, m in child_moves.items()}, {}, sv.result))
            action = sv.result
        if guard == FALSE or not logic.is_satisfiable(guard):
            return None
        moves = tuple(mv for m in child_moves.values() for mv in m.moves)
        trace = tuple(x for m in child_moves.values() for x in m.trace) + (sv.name,)
        return _Move(tuple(betas), action, guard, post, moves, trace)


def synchronise(node: Node, sv, child_ots: dict, source: GlobalState | None = None,
                fresher: Freshener | None = None):
    """Combine child open transitions through one vector (rule Tr2).

    ``child_ots`` maps each non-hole slot of ``sv`` to an OpenTransition of
    that child.  Returns the resulting OpenTransition over the node's leaves,
    or None when the combined predicate is unsatisfiable.
    """
    d = _Deriver(node)
    if fresher is not None:
        d.fresher = fresher
    sv_f = d._freshen_vector(sv, node.name)
    leaves = tuple(model.leaves_of(node))
    moves = {}
    for i, ot in child_ots.items():
        sub_leaves = tuple(model.leaves_of(node.child_map[i], i))
        mv = tuple(zip(sub_leaves, ot.target.states))
        moves[i] = _Move(ot.betas, ot.action, ot.guard, ot.post, mv, ot.trace)
    hole_ids = [j for j in node.order if j in sv_f.slot_map and j in node.hole_map]
    m = d.synchronise(sv_f, moves, hole_ids)
    if m is None:
        return None
    if source is None:
        starts = {}
        for i, ot in child_ots.items():
            sub_leaves = tuple(model.leaves_of(node.child_map[i], i))
            starts.update(zip(sub_leaves, ot.source.states))
        source = GlobalState(tuple(starts.get(k, "?") for k in leaves))
    target = dict(zip(leaves, source.states))
    target.update(m.moves)
    return OpenTransition(source, GlobalState(tuple(target[k] for k in leaves)),
                          m.betas, m.action, m.guard, m.post, "", m.trace)


# ---------------------------------------------------------------------------
# Reachability


def derive_open_automaton(p, simplify: bool = True, state_cap: int = 10_000,
                          prune: bool = True) -> OpenAutomaton:
    """Breadth-first derivation of the reachable part of the open automaton."""
    d = _Deriver(p, simplify)
    leaves_map = model.leaves_of(p)
    leaves = tuple(leaves_map)
    initial = GlobalState(tuple(leaves_map[k].initial for k in leaves))
    root_index = leaves[0] if isinstance(p, PLTS) else p.name
    seen = {initial: None}
    queue = deque([initial])
    transitions = []
    while queue:
        s = queue.popleft()
        local = dict(zip(leaves, s.states))
        found = []
        for m in d.moves(p, root_index, local):
            target = dict(local)
            target.update(m.moves)
            t = GlobalState(tuple(target[k] for k in leaves))
            found.append(OpenTransition(s, t, m.betas, m.action, m.guard, m.post, "", m.trace))
        if prune:
            found = _prune_subsumed(found, d.fixed)
        for ot in _dedup(found, d.fixed):
            transitions.append(ot)
            if ot.target not in seen:
                if len(seen) >= state_cap:
                    raise StateCapExceeded(f"more than {state_cap} reachable states")
                seen[ot.target] = None
                queue.append(ot.target)
    named = tuple(_rename(ot, f"OT{k + 1}") for k, ot in enumerate(transitions))
    holes = model.holes_of(p)
    state_vars = tuple(v for k in leaves for v in leaves_map[k].vars)
    return OpenAutomaton(p.name, holes, leaves, state_vars, initial, tuple(seen), named, d.sat, d.unsat)


def _rename(ot, name):
    return OpenTransition(ot.source, ot.target, ot.betas, ot.action, ot.guard, ot.post, name, ot.trace)


def _dedup(ots, fixed):
    seen = set()
    out = []
    for ot in ots:
        k = ot.key(fixed)
        if k not in seen:
            seen.add(k)
            out.append(ot)
    return out


def _prune_subsumed(ots, fixed):
    """Drop transitions where a hole moves silently and a more general one exists."""
    keep = []
    for ot in ots:
        if any(is_tau(a) for _, a in ot.betas) and any(
                other is not ot and covers(other, ot, fixed) for other in ots):
            continue
        keep.append(ot)
    return keep


def covers(general: OpenTransition, special: OpenTransition, fixed=frozenset()) -> bool:
    """Is ``special`` an instance of ``general`` (same endpoints and effect shape)?"""
    if (general.source, general.target) != (special.source, special.target):
        return False
    if general.holes != special.holes or set(general.post) != set(special.post):
        return False
    flexible = general.local_vars(fixed)
    gb, sb = general.beta_map, special.beta_map
    pairs = [(gb[j], sb[j]) for j in gb] + [(general.action, special.action)]
    pairs += [(general.post[v], special.post[v]) for v in general.post]
    solved = logic.unify(pairs, flexible)
    if solved is None or solved[1]:
        return False
    theta = Subst(solved[0])
    return logic.check_valid(Implies(special.guard, apply_subst(general.guard, theta))).is_valid
