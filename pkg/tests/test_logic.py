import random

import pytest

import oracle
from gen import formula
from openpnet import logic
from openpnet.term import (
    And, App, Eq, Exists, FALSE, Forall, Implies, Nat, Neq, Sort, TRUE, Var, plus, seq,
)

D, N, A = Sort.DATA, Sort.NAT, Sort.ACTION
m1, m2 = Var("m1", D), Var("m2", D)
x, y = Var("x", D), Var("y", D)
n, k = Var("n", N), Var("k", N)
a = Var("a", A)


def p(t):
    return App("p_send", (t,))


def test_decompose_clash_and_injectivity():
    assert logic.decompose(p(x), App("q_recv", (x, n))) is None
    assert logic.decompose(p(x), p(y)) in ([(x, y)], [(y, x)])
    assert logic.decompose(Nat(1), Nat(2)) is None


def test_unify_nat_offsets():
    theta, residual = logic.unify([(plus(n, 2), Nat(5))])
    assert theta[n] == Nat(3) and not residual
    assert logic.unify([(plus(n, 2), Nat(1))]) is None


def test_simplify_constants():
    assert logic.simplify(Eq(Nat(0), Nat(0))) == TRUE
    assert logic.simplify(And((Eq(x, x), Neq(x, x)))) == FALSE
    assert logic.simplify(Eq(p(x), App("q_recv", (x, n)))) == FALSE


def test_tautology_from_worked_obligation():
    # forall m1 exists m2. p_send(m1)=p_send(m2) /\ in(m1)=in(m2) /\ m1=m2 /\ 0=0
    body = And((Eq(p(m1), p(m2)), Eq(App("in", (m1,)), App("in", (m2,))), Eq(m1, m2), Eq(Nat(0), Nat(0))))
    f = Forall((m1,), Exists((m2,), body))
    assert logic.check_valid(f).is_valid


def test_negative_pattern_guard():
    # a != p_send(x) for all x, and a = p_send(y): contradiction
    hyp = And((Forall((x,), Neq(a, p(x))), Eq(a, p(y))))
    assert logic.check_valid(Implies(hyp, FALSE)).is_valid
    assert not logic.is_satisfiable(hyp)


def test_invalid_has_confirmed_witness():
    f = Implies(Eq(n, k), Eq(plus(n, 1), k))
    v = logic.check_valid(f)
    assert v.is_invalid
    env = {var: oracle.env_value(t) for var, t in v.witness.items()}
    assert not oracle.holds(f, env)


def test_infinite_data_needed_for_existential():
    # exists y. y != x is valid over infinite Data
    assert logic.check_valid(Exists((y,), Neq(y, x))).is_valid


def test_sequence_equality():
    assert logic.simplify(Eq(seq([p(x)]), seq([p(x), p(x)]))) == FALSE
    assert logic.check_valid(Implies(Eq(x, y), Eq(seq([p(x)]), seq([p(y)])))).is_valid


def test_entails_and_evaluate():
    assert logic.entails(Eq(x, y), Eq(y, x)).is_valid
    assert logic.evaluate(Eq(Nat(1), Nat(1))) is True
    assert logic.evaluate(Eq(Nat(1), Nat(2))) is False


def test_tidy_keeps_trivial_equalities():
    f = And((Eq(Nat(0), Nat(0)), Eq(seq([p(x)]), seq([p(y)]))))
    assert str(logic.tidy(f)) == "0 = 0 && p_send(x) = p_send(y)"


def test_smtlib_shape():
    f = Forall((m1,), Exists((m2,), Eq(p(m1), p(m2))))
    script = logic.to_smtlib(f)
    assert script.startswith("; validity query")
    assert "(check-sat)" in script
    assert "(assert (not (forall" in script


def test_external_solver_requires_configuration(monkeypatch):
    monkeypatch.delenv("OPENPNET_SMT_CMD", raising=False)
    with pytest.raises(RuntimeError):
        logic.run_external_solver("(check-sat)")


def test_external_solver_stdin_template():
    # any program that prints the verdict works as a stand-in solver
    assert logic.run_external_solver("(check-sat)", "echo unsat") == "unsat"


@pytest.mark.parametrize("seed", range(5))
def test_agrees_with_brute_force(seed):
    rng = random.Random(1000 + seed)
    checked = 0
    for _ in range(100):
        f, free = formula(rng)
        v = logic.check_valid(f)
        truth = oracle.valid(f, free)
        if v.is_valid:
            assert truth, f
        elif v.is_invalid:
            env = {var: oracle.env_value(t) for var, t in v.witness.items()}
            env = {**{var: oracle.domain(var.sort)[0] for var in free}, **env}
            assert not oracle.holds(f, env), (f, v.witness)
        checked += not v.is_unknown
    assert checked >= 95
