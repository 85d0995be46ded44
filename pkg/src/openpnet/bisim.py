r"""Checking candidate relations for strong and weak FH-bisimulation.

A relation is a list of triples ``(s, t | Pred)``.  For every triple and every
open transition leaving one of the two states, the checker gathers the
transitions of the partner state that could simulate it and builds one
first-order obligation::

    forall fv(OT). Pred /\ Pred_OT  =>
        \/_x exists fv(OT_x). betas agree /\ Pred_OT_x /\ alpha = alpha_x
                             /\ Pred_{s',t_x}{Post_OT + Post_OT_x}

which is discharged by :func:`logic.check_valid`.  In the weak check the
challenges are strong transitions and the covers are weak ones.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import logic
from .dsl import ElaborationError, ParseError, parse_predicate
from .semantics import GlobalState, OpenAutomaton, OpenTransition
from .term import (
    TRUE, Eq, Exists, Forall, Freshener, Implies, Subst, Var, apply_subst, conj, disj,
    free_vars, freshen, is_tau, rename_vars, seq,
)
from .weak import WeakOpenAutomaton, saturate, vis


class RelationError(ValueError):
    pass


class ObligationError(ValueError):
    pass


@dataclass(frozen=True)
class RelationTriple:
    left: GlobalState
    right: GlobalState
    pred: object = TRUE

    def transposed(self) -> "RelationTriple":
        return RelationTriple(self.right, self.left, self.pred)

    def __str__(self) -> str:
        return f"({self.left.label}, {self.right.label} | {logic.tidy(self.pred)})"


# ---------------------------------------------------------------------------
# Variable alignment and relation files


def rename_automaton(oa, mapping: dict):
    """Rename automaton variables throughout states and transitions."""
    if not mapping:
        return oa

    def ren_ot(t):
        post = Subst((mapping.get(v, v), rename_vars(e, mapping)) for v, e in t.post.items())
        if isinstance(t, OpenTransition):
            return replace(t, betas=rename_vars(t.betas, mapping), action=rename_vars(t.action, mapping),
                           guard=rename_vars(t.guard, mapping), post=post)
        return replace(t, gammas=rename_vars(t.gammas, mapping), action=rename_vars(t.action, mapping),
                       guard=rename_vars(t.guard, mapping), post=post)

    return replace(oa, state_vars=tuple(mapping.get(v, v) for v in oa.state_vars),
                   transitions=tuple(ren_ot(t) for t in oa.transitions))


def align(a1, a2):
    """Make the variable sets of two automata disjoint.

    Conflicting names get suffix 1 on the left and 2 on the right.
    """
    names1 = {v.name for v in a1.state_vars}
    clash = {v.name for v in a2.state_vars} & names1
    if not clash:
        return a1, a2
    m1 = {v: Var(f"{v.name}1", v.sort, v.origin) for v in a1.state_vars if v.name in clash}
    m2 = {v: Var(f"{v.name}2", v.sort, v.origin) for v in a2.state_vars if v.name in clash}
    return rename_automaton(a1, m1), rename_automaton(a2, m2)


def _variables(a1, a2) -> dict:
    return {v.name: v for v in tuple(a1.state_vars) + tuple(a2.state_vars)}


def parse_relation(text: str, a1, a2) -> list:
    """Parse ``left | right | predicate`` lines against two aligned automata."""
    triples = []
    seen = set()
    variables = _variables(a1, a2)
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) == 2:
            parts.append("true")
        if len(parts) != 3:
            raise RelationError(f"line {n}: expected 'left | right | predicate'")
        try:
            left = a1.find_state(parts[0])
            right = a2.find_state(parts[1])
        except KeyError as exc:
            raise RelationError(f"line {n}: unknown state {exc.args[0]!r}") from None
        try:
            pred = parse_predicate(parts[2], variables)
        except (ParseError, ElaborationError, ValueError) as exc:
            raise RelationError(f"line {n}: {exc}") from None
        if (left, right) in seen:
            raise RelationError(f"line {n}: second triple for ({parts[0]}, {parts[1]})")
        seen.add((left, right))
        triples.append(RelationTriple(left, right, pred))
    return triples


def check_relation_vars(rel, a1, a2):
    allowed = set(a1.state_vars) | set(a2.state_vars)
    for t in rel:
        extra = free_vars(t.pred) - allowed
        if extra:
            names = ", ".join(sorted(v.name for v in extra))
            raise RelationError(f"triple {t} mentions variables outside both automata: {names}")


def format_relation(rel) -> str:
    return "".join(f"{t.left.label} | {t.right.label} | {t.pred}\n" for t in rel)


def transpose(rel) -> list:
    return [t.transposed() for t in rel]


def identity_relation(oa):
    """Two aligned copies of ``oa`` and the relation equating their variables."""
    a1, a2 = align(oa, oa)
    pairs = list(zip(a1.state_vars, a2.state_vars))
    rel = []
    for s in oa.states:
        pred = conj(*(Eq(x, y) for x, y in pairs))
        rel.append(RelationTriple(s, s, pred))
    return a1, a2, rel


def compose_relations(r12, r23, middle_vars) -> list:
    """Relational composition with the middle automaton's variables hidden."""
    out: dict = {}
    mids = tuple(middle_vars)
    for x in r12:
        for y in r23:
            if x.right != y.left:
                continue
            part = logic.simplify(Exists(mids, conj(x.pred, y.pred)) if mids else conj(x.pred, y.pred))
            key = (x.left, y.right)
            out[key] = disj(out[key], part) if key in out else part
    return [RelationTriple(l, r, logic.simplify(p)) for (l, r), p in out.items()]


# ---------------------------------------------------------------------------
# Obligations


def _local(t, state_vars):
    return sorted(t.local_vars(state_vars), key=lambda v: v.name)


def _fresh_cover(cover, state_vars, fresher):
    local = _local(cover, state_vars)
    if not local:
        return cover, ()
    body = (getattr(cover, "betas", None), getattr(cover, "gammas", None), cover.action,
            cover.guard, cover.post)
    (betas, gammas, action, guard, post), ren = freshen(body, local, fresher, "c")
    fresh = tuple(ren[v] for v in local)
    if isinstance(cover, OpenTransition):
        return replace(cover, betas=betas, action=action, guard=guard, post=post), fresh
    return replace(cover, gammas=gammas, action=action, guard=guard, post=post), fresh


def strong_obligation(triple, ot, covers, rel_map=None, side="left", state_vars=frozenset(),
                      fresher=None):
    """Obligation for ``ot`` (leaving the ``side`` state of ``triple``).

    ``covers`` are (transition, target predicate) pairs, or bare transitions
    when ``rel_map`` maps (left, right) state pairs to predicates.
    """
    return _obligation(triple, ot, covers, rel_map, side, state_vars, fresher, weak=False)


def weak_obligation(triple, ot, covers, rel_map=None, side="left", state_vars=frozenset(),
                    fresher=None):
    """Like :func:`strong_obligation` with weak covers compared through ``vis``."""
    return _obligation(triple, ot, covers, rel_map, side, state_vars, fresher, weak=True)


def _obligation(triple, ot, covers, rel_map, side, state_vars, fresher, weak):
    fresher = fresher or Freshener()
    fixed = frozenset(state_vars) | free_vars(triple.pred)
    challenge_vars = tuple(_local(ot, fixed))
    visible = dict(vis(ot.betas)) if weak else dict(ot.betas)
    disjuncts = []
    for item in covers:
        cover, target_pred = item if isinstance(item, tuple) else (item, None)
        if target_pred is None:
            pair = (ot.target, cover.target) if side == "left" else (cover.target, ot.target)
            target_pred = (rel_map or {}).get(pair)
            if target_pred is None:
                continue
        cover_holes = cover.holes
        if cover_holes != frozenset(visible):
            raise ObligationError(
                f"cover {cover.name} acts on holes {sorted(cover_holes)}, challenge on {sorted(visible)}")
        cover, fresh = _fresh_cover(cover, fixed | frozenset(challenge_vars), fresher)
        if weak:
            gm = cover.gamma_map
            agree = [Eq(seq(visible[j]), seq(gm[j])) for j in sorted(visible)]
        else:
            bm = cover.beta_map
            agree = [Eq(visible[j], bm[j]) for j in sorted(visible)]
        post = ot.post.union(cover.post)
        body = conj(*agree, cover.guard, Eq(ot.action, cover.action), apply_subst(target_pred, post))
        disjuncts.append(Exists(fresh, body) if fresh else body)
    formula = Implies(conj(triple.pred, ot.guard), disj(*disjuncts))
    return Forall(challenge_vars, formula) if challenge_vars else formula


# ---------------------------------------------------------------------------
# Reports


@dataclass
class ObligationRecord:
    direction: str  # "left" when a left-state transition is challenged
    triple: RelationTriple
    challenge: str
    challenge_text: str
    covers: tuple
    formula: object
    verdict: logic.Verdict
    status: str = ""  # valid, invalid, unknown
    note: str = ""

    @property
    def display(self) -> str:
        return str(logic.tidy(self.formula))

    def to_json(self) -> dict:
        out = {
            "direction": self.direction,
            "triple": {"left": self.triple.left.label, "right": self.triple.right.label,
                       "pred": str(self.triple.pred)},
            "challenge": self.challenge,
            "challenge_text": self.challenge_text,
            "covers": list(self.covers),
            "obligation": str(self.formula),
            "verdict": self.status,
        }
        if self.note:
            out["note"] = self.note
        if self.verdict.witness:
            out["witness"] = {v.name: str(e) for v, e in self.verdict.witness.items()}
        if self.verdict.reason:
            out["reason"] = self.verdict.reason
        return out

    def signature(self, transposed=False):
        d = self.direction
        t = self.triple
        if transposed:
            d = "right" if d == "left" else "left"
            t = t.transposed()
        return (d, t.left.label, t.right.label, self.challenge_text, self.status)


@dataclass
class CheckReport:
    mode: str
    verdict: str  # Pass, Fail, Inconclusive
    obligations: list
    initial_ok: bool
    initial_note: str = ""
    depth: int | None = None
    notes: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [o for o in self.obligations if o.status != "valid"]

    def signature(self, transposed=False):
        return (self.verdict, self.initial_ok,
                sorted(o.signature(transposed) for o in self.obligations))

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "verdict": self.verdict,
            "depth": self.depth,
            "initial": {"ok": self.initial_ok, "note": self.initial_note},
            "notes": list(self.notes),
            "obligations": [o.to_json() for o in self.obligations],
        }

    def to_text(self, verbose=False) -> str:
        lines = [f"{self.mode} check: {self.verdict}"]
        if self.depth is not None:
            lines[0] += f" (weak depth {self.depth})"
        lines.append(f"initial states: {'ok' if self.initial_ok else 'FAIL'} {self.initial_note}".rstrip())
        for n in self.notes:
            lines.append(f"note: {n}")
        total = len(self.obligations)
        valid = sum(o.status == "valid" for o in self.obligations)
        lines.append(f"obligations: {valid}/{total} valid")
        for o in self.obligations:
            if o.status == "valid" and not verbose:
                continue
            lines.append(f"- [{o.status}] {o.direction} challenge {o.challenge_text} at {o.triple}")
            lines.append(f"    covers: {', '.join(o.covers) if o.covers else '(none)'}")
            if o.note:
                lines.append(f"    {o.note}")
            if o.verdict.witness:
                w = ", ".join(f"{v.name}={e}" for v, e in o.verdict.witness.items())
                lines.append(f"    witness: {w}")
            if o.verdict.reason and o.status != "valid":
                lines.append(f"    reason: {o.verdict.reason}")
            if verbose:
                lines.append(f"    obligation: {o.display}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Checkers


def _prepare(a1, a2, rel):
    if set(a1.holes) != set(a2.holes):
        raise RelationError(f"automata have different holes: {sorted(a1.holes)} vs {sorted(a2.holes)}")
    names1 = {v.name for v in a1.state_vars}
    if names1 & {v.name for v in a2.state_vars}:
        raise RelationError("automata share variable names; align() them before loading the relation")
    for t in rel:
        if t.left not in a1.states or t.right not in a2.states:
            raise RelationError(f"triple {t} refers to an unknown state")
    check_relation_vars(rel, a1, a2)
    return {(t.left, t.right): t.pred for t in rel}


def _initial(a1, a2, rel_map):
    pred = rel_map.get((a1.initial, a2.initial))
    if pred is None:
        return False, f"({a1.initial.label}, {a2.initial.label}) is not in the relation"
    if not logic.is_satisfiable(pred):
        return False, "initial predicate is unsatisfiable"
    return True, ""


def _discharge(formulas, jobs):
    if jobs and jobs > 1 and len(formulas) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(logic.check_valid, formulas, chunksize=4))
    return [logic.check_valid(f) for f in formulas]


def _status(v):
    return "valid" if v.is_valid else "invalid" if v.is_invalid else "unknown"


def check_strong(a1: OpenAutomaton, a2: OpenAutomaton, rel, jobs: int = 1) -> CheckReport:
    """Strong FH-bisimulation check of ``rel`` between ``a1`` and ``a2``."""
    rel_map = _prepare(a1, a2, rel)
    fixed = frozenset(a1.state_vars) | frozenset(a2.state_vars)
    pending = []
    fresher = Freshener()
    for t in rel:
        for side, mine, other, s, u in (("left", a1, a2, t.left, t.right), ("right", a2, a1, t.right, t.left)):
            for ot in mine.transitions_from(s):
                covers = [c for c in other.transitions_from(u) if c.holes == ot.holes
                          and ((ot.target, c.target) if side == "left" else (c.target, ot.target)) in rel_map]
                f = strong_obligation(t, ot, covers, rel_map, side, fixed, fresher)
                pending.append((side, t, ot, tuple(c.name for c in covers), f))
    verdicts = _discharge([p[4] for p in pending], jobs)
    records = []
    for (side, t, ot, covers, f), v in zip(pending, verdicts):
        note = "empty cover set" if not covers else ""
        records.append(ObligationRecord(side, t, ot.name, _ot_text(ot), covers, f, v, _status(v), note))
    ok, why = _initial(a1, a2, rel_map)
    if any(r.status == "invalid" for r in records) or not ok:
        verdict = "Fail"
    elif any(r.status == "unknown" for r in records):
        verdict = "Inconclusive"
    else:
        verdict = "Pass"
    return CheckReport("strong", verdict, records, ok, why)


def check_weak(a1: OpenAutomaton, a2: OpenAutomaton, rel, depth: int = 3, jobs: int = 1,
               weak1: WeakOpenAutomaton | None = None, weak2: WeakOpenAutomaton | None = None) -> CheckReport:
    """Weak FH-bisimulation check: strong challenges, weak covers."""
    rel_map = _prepare(a1, a2, rel)
    fixed = frozenset(a1.state_vars) | frozenset(a2.state_vars)
    w1 = weak1 or saturate(a1, depth)
    w2 = weak2 or saturate(a2, depth)
    w1_next = saturate(a1, depth + 1)
    w2_next = saturate(a2, depth + 1)
    stable = {("left", s) for s in a1.states if w1_next.keys_from(s) <= w1.keys_from(s)}
    stable |= {("right", s) for s in a2.states if w2_next.keys_from(s) <= w2.keys_from(s)}
    pending = []
    fresher = Freshener()
    for t in rel:
        for side, mine, other_w, s, u in (("left", a1, w2, t.left, t.right), ("right", a2, w1, t.right, t.left)):
            for ot in mine.transitions_from(s):
                active = frozenset(j for j, b in ot.betas if not is_tau(b))
                covers = [c for c in other_w.transitions_from(u) if c.holes == active
                          and ((ot.target, c.target) if side == "left" else (c.target, ot.target)) in rel_map
                          and _compatible(ot, c)]
                f = weak_obligation(t, ot, covers, rel_map, side, fixed, fresher)
                partner = ("right", u) if side == "left" else ("left", u)
                pending.append((side, t, ot, tuple(c.name for c in covers), f, partner in stable))
    verdicts = _discharge([p[4] for p in pending], jobs)
    records = []
    for (side, t, ot, covers, f, exhausted), v in zip(pending, verdicts):
        status = _status(v)
        note = "empty cover set" if not covers else ""
        if status == "invalid" and not exhausted:
            status = "unknown"
            note = (note + "; " if note else "") + \
                f"not covered up to depth {depth}; a deeper saturation may add covers"
        records.append(ObligationRecord(side, t, ot.name, _ot_text(ot), covers, f, v, status, note))
    ok, why = _initial(a1, a2, rel_map)
    notes = []
    if any(r.status == "invalid" for r in records) or not ok:
        verdict = "Fail"
    elif any(r.status == "unknown" for r in records):
        verdict = "Inconclusive"
        notes.append("some challenges were not covered at this depth; raise --weak-depth")
    else:
        verdict = "Pass"
    return CheckReport("weak", verdict, records, ok, why, depth, notes)


def _compatible(ot, cover) -> bool:
    """Cheap pre-filter: a cover whose action or sequence shapes clash is useless."""
    if logic.decompose(ot.action, cover.action) is None:
        return False
    gm = cover.gamma_map
    return all(len(gm.get(j, ())) == 1 for j, b in ot.betas if not is_tau(b))


def _ot_text(ot) -> str:
    return f"{ot.name} {ot.source.label}-{ot.action}->{ot.target.label}"


def load_relation_file(path, a1, a2) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_relation(fh.read(), a1, a2)


def report_json(report) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=False)
