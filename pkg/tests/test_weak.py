import json
from importlib import resources

import jsonschema
import pytest

from openpnet import weak
from openpnet.term import (
    TAU, TRUE, App, Forall, Nat, Neq, Sort, Subst, Var, apply_subst, compose_subst, plus,
)
from openpnet.weak import WeakOpenTransition

D, N, A = Sort.DATA, Sort.NAT, Sort.ACTION


@pytest.fixture(scope="module")
def impl_w2(impl_oa):
    return weak.saturate(impl_oa, 2)


def _v(oa, name):
    return next(v for v in oa.state_vars if v.name == name)


def _has(woa, expected):
    fixed = frozenset(woa.state_vars)
    key = expected.key(fixed)
    return any(w.key(fixed) == key for w in woa.transitions)


def test_vis_drops_silent_hole_actions():
    a = App("p_send", (Var("m", D),))
    assert weak.vis((("P", a), ("Q", TAU))) == (("P", (a,)),)


def test_wt1_on_every_state(impl_oa, impl_w2):
    for s in impl_oa.states:
        assert _has(impl_w2, weak.wt1(s))


def test_hole_loops_everywhere(impl_oa, impl_w2):
    # the idle P and Q loops are available from every state with no effect
    x, y = Var("x", D), Var("y", N)
    pa, qb = Var("p_a", A), Var("q_b", A)
    for s in impl_oa.states:
        wi1 = WeakOpenTransition(s, s, (("P", (pa,)),), pa, Forall((x,), Neq(pa, App("p_send", (x,)))))
        wi2 = WeakOpenTransition(s, s, (("Q", (qb,)),), qb,
                                 Forall((x, y), Neq(qb, App("q_recv", (x, y)))))
        assert _has(impl_w2, wi1) and _has(impl_w2, wi2)


def test_wi3_zero(impl_oa, impl_w2):
    m = Var("m", D)
    post = Subst([(_v(impl_oa, "s_msg"), m), (_v(impl_oa, "s_ec"), Nat(0))])
    for start in ("000", "202"):
        w = WeakOpenTransition(impl_oa.find_state(start), impl_oa.find_state("100"),
                               (("P", (App("p_send", (m,)),)),),
                               App("synchro", (App("in", (m,)),)), TRUE, post)
        assert _has(impl_w2, w), start


def test_wi4_zero(impl_oa, impl_w2):
    post = Subst([(_v(impl_oa, "m_msg"), _v(impl_oa, "s_msg")), (_v(impl_oa, "m_ec"), _v(impl_oa, "s_ec"))])
    w = WeakOpenTransition(impl_oa.find_state("100"), impl_oa.find_state("210"), (), TAU, TRUE, post)
    assert _has(impl_w2, w)


def test_wi6a_zero(impl_oa, impl_w2):
    s_ec = _v(impl_oa, "s_ec")
    post = Subst([(_v(impl_oa, "m_msg"), _v(impl_oa, "s_msg")), (_v(impl_oa, "m_ec"), plus(s_ec, 1)),
                  (s_ec, plus(s_ec, 1))])
    w = WeakOpenTransition(impl_oa.find_state("220"), impl_oa.find_state("210"), (), TAU, TRUE, post)
    assert _has(impl_w2, w)


def test_post_composition_matches_sequential_execution(impl_oa):
    # execute post_4, post_456 (once), post_6 on concrete values and compare
    s_msg, s_ec = _v(impl_oa, "s_msg"), _v(impl_oa, "s_ec")
    m_msg, m_ec = _v(impl_oa, "m_msg"), _v(impl_oa, "m_ec")
    p4 = Subst([(m_msg, s_msg), (m_ec, s_ec)])
    p6 = Subst([(s_ec, plus(s_ec, 1))])
    start = {s_msg: App("d0", (), D), s_ec: Nat(3), m_msg: App("d1", (), D), m_ec: Nat(7)}

    def run(env, post):
        return {v: apply_subst(post.get(v, v), Subst(env)) for v in env}

    seq_env = start
    for post in (p6, p4):
        seq_env = run(seq_env, post)
    assert run(start, compose_subst(p6, p4)) == seq_env


def test_wt3_rejects_bad_chains(impl_oa):
    ots = {t.name: t for t in impl_oa.transitions}
    w_in = weak.wt2_lift(ots["OT1"])
    with pytest.raises(ValueError):
        weak.wt3_concat(w_in, w_in, weak.wt1(impl_oa.find_state("100")))
    with pytest.raises(ValueError):
        weak.wt3_concat(weak.wt1(impl_oa.find_state("000")), w_in, weak.wt1(impl_oa.find_state("210")))


def test_counts_and_monotonicity(spec_oa, impl_oa):
    for oa in (spec_oa, impl_oa):
        prev = None
        for depth in range(4):
            woa = weak.saturate(oa, depth)
            keys = {w.key(frozenset(oa.state_vars)) for w in woa.transitions}
            if prev is not None:
                assert prev <= keys and len(keys) > len(prev)
            prev = keys


def test_depth_zero_is_wt1_plus_lifts(spec_oa):
    woa = weak.saturate(spec_oa, 0)
    assert len(woa.transitions) == len(spec_oa.states) + len(spec_oa.transitions)


def test_spec_counter_loop(spec_oa):
    woa = weak.saturate(spec_oa, 2)
    b_ec = _v(spec_oa, "b_ec")
    b1 = spec_oa.find_state("b1")
    # d nested WT3 steps chain at most 2d+1 strong transitions
    for k in range(1, 6):
        assert _has(woa, WeakOpenTransition(b1, b1, (), TAU, TRUE, Subst([(b_ec, plus(b_ec, k))])))
    assert not _has(woa, WeakOpenTransition(b1, b1, (), TAU, TRUE, Subst([(b_ec, plus(b_ec, 6))])))


def test_replay_rebuilds_transition(impl_oa, impl_w2):
    fixed = frozenset(impl_oa.state_vars)
    for w in impl_w2.transitions[::7]:
        assert weak.replay(impl_oa, w.derivation).key(fixed) == w.key(fixed)


def test_exhausted_states(spec_oa, impl_oa):
    assert spec_oa.find_state("b1") not in weak.exhausted_states(spec_oa, 2)
    done = {s.label for s in weak.exhausted_states(impl_oa, 2)}
    assert "201" in done and "100" not in done


def test_budget(impl_oa):
    with pytest.raises(weak.SaturationBudgetExceeded):
        weak.saturate(impl_oa, 3, budget=40)


def test_json_schema_and_table(impl_w2):
    schema = json.loads(resources.files("openpnet").joinpath("schemas", "weak_automaton.json").read_text())
    jsonschema.validate(impl_w2.to_json(), schema)
    assert impl_w2.table().count("\n") == len(impl_w2.transitions)
    assert impl_w2.to_dot().startswith("digraph")
