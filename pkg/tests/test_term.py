import random

import pytest

from gen import small_term
from openpnet.term import (
    And, App, Eq, Exists, Forall, Freshener, Input, Nat, Plus, Sort, SortError, Subst, TAU, Var,
    apply_subst, base_name, canonical, compose_subst, free_vars, freshen, input_vars, plus,
    rename_vars, seq,
)

D, N = Sort.DATA, Sort.NAT
x, y, z = Var("x", D), Var("y", D), Var("z", D)
n, k = Var("n", N), Var("k", N)


def test_plus_normalises():
    assert plus(Nat(2), 3) == Nat(5)
    assert plus(plus(n, 1), 2) == Plus(n, 3)
    assert plus(n, 0) is n


def test_negative_nat_rejected():
    with pytest.raises(SortError):
        Nat(-1)


def test_subst_drops_identity_and_checks_sorts():
    assert len(Subst([(x, x), (y, z)])) == 1
    with pytest.raises(SortError):
        Subst([(x, Nat(0))])
    with pytest.raises(ValueError):
        Subst([(x, y), (x, z)])


def test_parallel_application():
    s = Subst([(x, y), (y, x)])
    assert apply_subst(App("f", (x, y), D), s) == App("f", (y, x), D)


def test_plus_substitution_folds_offsets():
    assert apply_subst(plus(n, 1), Subst([(n, plus(k, 2))])) == Plus(k, 3)
    assert apply_subst(plus(n, 1), Subst([(n, Nat(4))])) == Nat(5)


def test_union_requires_disjoint_domains():
    a, b = Subst([(x, y)]), Subst([(z, y)])
    assert len(a.union(b)) == 2
    with pytest.raises(ValueError):
        a.union(Subst([(x, z)]))


def test_compose_is_sequential_effect():
    # first s_ec := 0, then s_ec := s_ec + 1
    first = Subst([(n, Nat(0))])
    second = Subst([(n, plus(n, 1))])
    assert compose_subst(first, second) == Subst([(n, Nat(1))])


def test_binder_capture_avoided():
    p = Forall((y,), Eq(x, y))
    out = apply_subst(p, Subst([(x, y)]))
    assert isinstance(out, Forall)
    (bound,) = out.vars
    assert bound != y
    assert out.body == Eq(y, bound)


def test_input_vars_and_renaming():
    act = App("recv", (Input(x),))
    assert input_vars(act) == {x}
    assert apply_subst(act, Subst([(x, y)])) == act
    assert rename_vars(act, {x: y}) == App("recv", (Input(y),))


def test_free_vars_skip_bound():
    assert free_vars(Exists((x,), And((Eq(x, y), Eq(z, z))))) == {y, z}


def test_freshener_names():
    f = Freshener()
    obj, ren = freshen(Eq(x, y), [x], f, "SV1")
    assert ren[x].name == "x@SV1#1"
    assert base_name(ren[x].name) == "x"
    _, ren2 = freshen(Eq(x, y), [x], f, "SV1")
    assert ren2[x].name == "x@SV1#2"


def test_canonical_identifies_alpha_variants():
    a = (App("f", (x,), D), Forall((y,), Eq(x, y)))
    b = (App("f", (z,), D), Forall((x,), Eq(z, x)))
    assert canonical(a) == canonical(b)
    assert canonical(a, frozenset({x})) != canonical(b, frozenset({x}))


def test_tau_and_sequences():
    assert str(TAU) == "tau"
    assert str(seq([App("a"), App("b")])) == "[a(), b()]"
    assert seq([App("a")]) != seq([App("a"), App("a")])


def _random_subst(rng, vs):
    chosen = rng.sample(vs, rng.randint(0, len(vs)))
    return Subst((v, small_term(rng, 2, vs)) for v in chosen)


def test_substitution_law_random():
    # t{P1 (x) P2} == t{P2}{P1}
    rng = random.Random(7)
    vs = [x, y, z]
    for _ in range(300):
        t = small_term(rng, 3, vs)
        p1, p2 = _random_subst(rng, vs), _random_subst(rng, vs)
        assert apply_subst(t, compose_subst(p1, p2)) == apply_subst(apply_subst(t, p2), p1)
