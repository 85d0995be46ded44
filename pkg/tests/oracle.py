"""Finite-domain brute-force evaluation of predicates.

Independent of the logic module: it only reads the term dataclasses.
Universal Nat variables range over 0..NAT_MAX and existential ones over a
slightly larger range so that successor witnesses exist.
"""

import itertools

from openpnet.term import (
    And, App, Const, Eq, Exists, Forall, Implies, Input, Nat, Neq, Not, Or, Plus, Sort, Var,
)

DATA = [App(f"d{i}", (), Sort.DATA) for i in range(3)]
NAT_MAX = 5
NAT_EXISTS_MAX = 9
ACTIONS = [App("p", (d,)) for d in DATA] + [App("q", ()), App("act_other", ())]


def domain(sort, existential=False, actions=None):
    if sort is Sort.DATA:
        return DATA
    if sort is Sort.NAT:
        top = NAT_EXISTS_MAX if existential else NAT_MAX
        return list(range(top + 1))
    if sort is Sort.ACTION:
        return actions or ACTIONS
    raise ValueError(sort)


def value(t, env):
    if isinstance(t, Var):
        return env[t]
    if isinstance(t, Nat):
        return t.value
    if isinstance(t, Plus):
        return env[t.base] + t.offset
    if isinstance(t, Input):
        return env[t.var]
    if isinstance(t, App):
        return ("app", t.name, tuple(_norm(value(a, env)) for a in t.args))
    raise TypeError(t)


def _norm(v):
    if isinstance(v, App):
        return ("app", v.name, tuple(_norm(a) for a in v.args))
    return v


def holds(p, env, actions=None):
    if isinstance(p, Const):
        return p.value
    if isinstance(p, Eq):
        return _norm(value(p.left, env)) == _norm(value(p.right, env))
    if isinstance(p, Neq):
        return _norm(value(p.left, env)) != _norm(value(p.right, env))
    if isinstance(p, And):
        return all(holds(q, env, actions) for q in p.items)
    if isinstance(p, Or):
        return any(holds(q, env, actions) for q in p.items)
    if isinstance(p, Not):
        return not holds(p.body, env, actions)
    if isinstance(p, Implies):
        return (not holds(p.hyp, env, actions)) or holds(p.concl, env, actions)
    if isinstance(p, (Forall, Exists)):
        ex = isinstance(p, Exists)
        doms = [domain(v.sort, ex, actions) for v in p.vars]
        test = any if ex else all
        return test(holds(p.body, {**env, **dict(zip(p.vars, combo))}, actions)
                    for combo in itertools.product(*doms))
    raise TypeError(p)


def env_value(t):
    """Turn a ground witness term into an oracle value."""
    if isinstance(t, Nat):
        return t.value
    return t


def valid(p, free, actions=None):
    """Brute-force validity with ``free`` variables read universally."""
    return falsifier(p, free, actions) is None


def falsifier(p, free, actions=None):
    doms = [domain(v.sort, False, actions) for v in free]
    for combo in itertools.product(*doms):
        env = dict(zip(free, combo))
        if not holds(p, env, actions):
            return env
    return None
