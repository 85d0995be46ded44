"""Open transition composition: filling a hole agrees with composing the two semantics.

For P with hole H and a closed pLTS Q, every OT of P[Q]_H in which Q moves is
an OT of P (with hole action beta_H) combined with an OT of Q under
alpha_Q = beta_H, and every OT where Q stays idle is an OT of P that does not
involve H.  Equivalence of two closed OTs is checked semantically: both
must allow the same global actions and the same effects.
"""

import random

import pytest

import otcompare

from openpnet import logic, model
from openpnet.model import PLTS, Node, SyncVector, Transition
from openpnet.semantics import derive_open_automaton
from openpnet.term import (
    TAU, TRUE, App, Eq, Freshener, Input, Sort, Subst, Var, all_vars, conj, free_vars, freshen,
)

D = Sort.DATA
CASES = 100


def _act(name, *args):
    return App(name, tuple(args))


def random_plts(rng, name, var, tag):
    k = rng.randint(2, 3)
    states = tuple(f"{tag}{i}" for i in range(k))
    x = Var(f"x_{tag}", D)
    trans = []
    for i, s in enumerate(states):
        for _ in range(rng.randint(1, 2)):
            target = rng.choice(states)
            kind = rng.choice(["a", "b", "c", "tau"])
            assign = Subst()
            guard = TRUE
            if kind == "a":
                action = _act("a", Input(x))
                if rng.random() < 0.7:
                    assign = Subst([(var, x)])
            elif kind == "b":
                action = _act("b", var)
            elif kind == "c":
                action = _act("c")
            else:
                action = TAU
                if rng.random() < 0.3:
                    assign = Subst([(var, App("d0", (), D))])
            if rng.random() < 0.2:
                guard = Eq(var, App("d0", (), D))
            trans.append(Transition(s, action, target, guard, assign, f"t{len(trans)}"))
    return PLTS(name, states, states[0], (var,), tuple(trans))


def open_net(leaf):
    y = Var("y", D)
    vectors = (
        SyncVector("V1", (("L", _act("a", y)), ("H", _act("b", y))), _act("sync", y)),
        SyncVector("V2", (("H", _act("a", y)),), _act("ext", y)),
        SyncVector("V3", (("L", _act("b", y)),), _act("emit", y)),
        SyncVector("V4", (("L", _act("c")), ("H", _act("c"))), _act("tick")),
        model.idle_vector("L"),
        model.idle_vector("H"),
    )
    sort = (_act("a", y), _act("b", y), _act("c"), TAU)
    return Node("P", ("L", "H"), (("L", leaf),), (("H", sort),), vectors)


def equivalent(o1, o2, state_vars, fixed):
    return otcompare.equivalent(o1, o2, state_vars, fixed)


class Composite:
    def __init__(self, source, target, action, guard, post):
        self.source, self.target, self.action, self.guard, self.post = source, target, action, guard, post

    def local_vars(self, fixed):
        found = all_vars(self.action) | free_vars(self.guard)
        for e in self.post.values():
            found |= all_vars(e)
        return frozenset(found) - frozenset(fixed)


def expected_ots(oa_p, oa_q, fixed, fresher):
    out = []
    for tp in oa_p.transitions:
        if "H" not in tp.beta_map:
            for sq in oa_q.states:
                out.append(Composite((tp.source.states[0], sq.states[0]),
                                     (tp.target.states[0], sq.states[0]),
                                     tp.action, tp.guard, tp.post))
            continue
        beta = tp.beta_map["H"]
        for tq in oa_q.transitions:
            local = sorted(tq.local_vars(fixed), key=lambda v: v.name)
            (aq, gq, pq), _ = freshen((tq.action, tq.guard, tq.post), local, fresher, "q")
            guard = conj(tp.guard, gq, Eq(aq, beta)) if aq.sort is beta.sort else None
            if guard is None or not logic.is_satisfiable(guard):
                continue
            out.append(Composite((tp.source.states[0], tq.source.states[0]),
                                 (tp.target.states[0], tq.target.states[0]),
                                 tp.action, guard, tp.post.union(pq)))
    return out


def _instance(seed):
    rng = random.Random(seed)
    u, w = Var("u", D), Var("w", D)
    leaf = random_plts(rng, "L", u, "l")
    q = random_plts(rng, "Q", w, "q")
    return open_net(leaf), q


def _reachable_l_states(oa_p):
    return {s.states[0] for s in oa_p.states}


@pytest.mark.parametrize("chunk", range(4))
def test_fill_hole_matches_composed_semantics(chunk):
    per = CASES // 4
    for seed in range(chunk * per, (chunk + 1) * per):
        p, q = _instance(seed)
        filled = model.fill_hole(p, "H", q)
        assert tuple(model.leaves_of(filled)) == ("L", "H")
        oa_f = derive_open_automaton(filled, prune=False)
        oa_p = derive_open_automaton(p, prune=False)
        oa_q = derive_open_automaton(q, prune=False)
        fixed = frozenset(oa_f.state_vars)
        assert not oa_f.holes
        expected = expected_ots(oa_p, oa_q, fixed, Freshener())
        reach = {s.states for s in oa_f.states}
        assert {s[0] for s in reach} <= _reachable_l_states(oa_p)
        for ot in oa_f.transitions:
            cands = [e for e in expected if e.source == ot.source.states and e.target == ot.target.states]
            assert any(equivalent(ot, e, oa_f.state_vars, fixed) for e in cands), (seed, str(ot))
        for e in expected:
            if e.source not in reach:
                continue
            cands = [ot for ot in oa_f.transitions
                     if ot.source.states == e.source and ot.target.states == e.target]
            assert any(equivalent(ot, e, oa_f.state_vars, fixed) for ot in cands), (seed, e.source, str(e.action), str(e.guard))


def test_fill_hole_structure():
    p, q = _instance(3)
    filled = model.fill_hole(p, "H", q)
    assert model.holes_of(filled) == {}
    assert set(model.leaves_of(filled)) == {"L", "H"}
    assert model.sort_of(filled) == model.sort_of(p)
    with pytest.raises(model.ModelError):
        model.fill_hole(p, "Z", q)
