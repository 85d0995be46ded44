import pytest

from openpnet import model
from openpnet.model import PLTS, Node, SyncVector, Transition
from openpnet.term import TAU, App, Input, Sort, Subst, Var

D = Sort.DATA
x, y, v = Var("x", D), Var("y", D), Var("v", D)


def leaf(name="L", var=v):
    t0 = Transition("s0", App("a", (Input(x),)), "s1", assignments=Subst([(var, x)]), tid="t0")
    t1 = Transition("s1", App("b", (var,)), "s0", tid="t1")
    return PLTS(name, ("s0", "s1"), "s0", (var,), (t0, t1))


def node(child=None):
    child = child or leaf()
    vectors = (
        SyncVector("V1", (("L", App("a", (y,))), ("H", App("b", (y,)))), App("sync", (y,))),
        model.idle_vector("L"),
        model.idle_vector("H"),
    )
    return Node("N", ("L", "H"), (("L", child),), (("H", (App("b", (y,)), TAU)),), vectors)


def test_holes_and_leaves():
    n = node()
    assert list(model.holes_of(n)) == ["H"]
    assert list(model.leaves_of(n)) == ["L"]
    assert model.state_vars(n) == {v}


def test_sort_of():
    assert model.sort_of(leaf()) == [App("a", (x,)), App("b", (v,))]
    assert model.sort_of(node())[0] == App("sync", (y,))


def test_pattern_matching():
    assert model.matches_pattern(App("b", (x,)), App("b", (y,)))
    assert not model.matches_pattern(App("b", ()), App("b", (y,)))
    assert model.in_sort(TAU, (App("b", (y,)), TAU))


def test_fill_hole_renames_clashing_state_vars():
    q = PLTS("Q", ("s0",), "s0", (v,), (Transition("s0", App("b", (v,)), "s0", tid="t0"),))
    filled = model.fill_hole(node(), "H", q)
    names = sorted(w.name for w in model.state_vars(filled))
    assert names == ["v", "v'"]
    assert model.holes_of(filled) == {}


def test_fill_hole_sort_mismatch():
    bad = PLTS("B", ("s0",), "s0", (), (Transition("s0", App("zzz", ()), "s0"),))
    with pytest.raises(model.ModelError):
        model.fill_hole(node(), "H", bad)


def test_validate_clean_and_disjointness():
    assert [d for d in model.validate(node()) if d.severity == "error"] == []
    n = Node("N2", ("A", "B"), (("A", leaf("A")), ("B", leaf("B"))), (),
             (model.idle_vector("A"), model.idle_vector("B")))
    codes = [d.code for d in model.validate(n)]
    assert "variable disjointness" in codes


def test_non_observability():
    assert model.check_non_observability(node()).ok
    n = node()
    no_idle = Node(n.name, n.order, n.children, n.holes, n.vectors[:2])
    rep = model.check_non_observability(no_idle)
    assert not rep.ok and "no idle vector <H:tau>" in str(rep)
    spy = SyncVector("S", (("H", TAU),), App("seen", ()))
    rep = model.check_non_observability(Node(n.name, n.order, n.children, n.holes, n.vectors + (spy,)))
    assert not rep.ok and "synchronised on tau" in str(rep)


def test_to_json_stable():
    j = model.to_json(node())
    assert j["kind"] == "node" and j["holes"] == {"H": ["b(y)", "tau"]}
    assert j["children"]["L"]["transitions"][0]["assignments"] == {"v": "x"}


def test_corpus_non_observability(spec_pnet, impl_pnet):
    assert model.check_non_observability(spec_pnet).ok
    assert model.check_non_observability(impl_pnet).ok
