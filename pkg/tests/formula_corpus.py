"""Formulas with function terms, grouped by signature, and the round-trip check."""

import itertools
import random

import numpy as np

from forge.fol import (App, EqAtom, Exists, Forall, FunctionalStructure, RelAtom, Var,
                       all_functional_structures, evaluate, translate)
from forge.logic import And, Iff, Implies, Not, Or, Signature

x, y, z = Var("x"), Var("y"), Var("z")


def f(a, b):
    return App("f", (a, b))


def g(a):
    return App("g", (a,))


c = App("c", ())

# (signature, free variables, formulas, exhaustive size cap, sampled extra size)
GROUPS = [
    (Signature((), (("g", 1), ("c", 0))), ("x", "y"), [
        EqAtom(g(x), y),
        EqAtom(g(g(x)), x),
        EqAtom(g(x), g(y)),
        EqAtom(g(c), c),
        Not(EqAtom(g(g(g(x))), g(y))),
        Implies(EqAtom(g(x), g(y)), EqAtom(x, y)),
        Forall("z", Or((EqAtom(g(z), z), Not(EqAtom(g(g(z)), c))))),
        Exists("z", And((EqAtom(g(z), x), Not(EqAtom(z, y))))),
        Forall("z", Exists("x", EqAtom(g(x), z))),
        Iff(EqAtom(g(x), c), EqAtom(g(g(x)), g(c))),
    ], 4, None),
    (Signature((("R", 1),), (("g", 1),)), ("x", "y"), [
        RelAtom("R", (g(x),)),
        RelAtom("R", (g(g(y)),)),
        Implies(RelAtom("R", (x,)), RelAtom("R", (g(x),))),
        Forall("z", Implies(RelAtom("R", (z,)), Not(RelAtom("R", (g(z),))))),
        Exists("z", And((RelAtom("R", (g(z),)), EqAtom(g(z), x)))),
        Or((RelAtom("R", (g(x),)), EqAtom(g(y), x))),
    ], 4, None),
    (Signature((("R", 2),), (("g", 1),)), ("x", "y"), [
        RelAtom("R", (g(x), y)),
        RelAtom("R", (g(x), g(g(x)))),
        Iff(RelAtom("R", (x, g(y))), RelAtom("R", (g(y), x))),
        Forall("z", Implies(RelAtom("R", (z, g(z))), Not(EqAtom(g(z), z)))),
        Exists("z", RelAtom("R", (g(z), g(x)))),
    ], 3, 4),
    (Signature((), (("f", 2),)), ("x", "y"), [
        EqAtom(f(x, y), f(y, x)),
        EqAtom(f(x, x), x),
        EqAtom(f(f(x, y), x), f(x, f(y, x))),
        Or((EqAtom(f(x, y), x), EqAtom(f(x, y), y))),
        Not(EqAtom(f(x, f(x, y)), y)),
        Forall("z", EqAtom(f(z, x), f(x, z))),
        Exists("z", EqAtom(f(z, z), f(x, y))),
        Forall("z", Exists("x", EqAtom(f(x, z), y))),
    ], 3, 4),
]

SAMPLED_TABLES = 300


def _random_structures(sig: Signature, size: int, count: int, seed: int):
    rnd = random.Random(seed)
    for _ in range(count):
        rels = {}
        for name, arity in sig.relations:
            rels[name] = frozenset(t for t in itertools.product(range(size), repeat=arity)
                                   if rnd.random() < 0.5)
        fns = {}
        for name, arity in sig.functions:
            fns[name] = {a: rnd.randrange(size)
                         for a in itertools.product(range(size), repeat=arity)}
        yield FunctionalStructure(sig, size, rels, fns)


def structures(sig: Signature, cap: int, extra, seed: int = 20240521):
    for size in range(1, cap + 1):
        yield from all_functional_structures(sig, size)
    if extra is not None:
        yield from _random_structures(sig, extra, SAMPLED_TABLES, seed)


def _align(vs: tuple, arr, target: tuple):
    """View ``arr`` (axes ``vs``) as an array broadcastable over ``target``."""
    order = sorted(range(len(vs)), key=lambda i: target.index(vs[i]))
    arr = np.transpose(arr, order) if vs else arr
    shape = [1] * len(target)
    for i in order:
        shape[target.index(vs[i])] = arr.shape[order.index(i)]
    return arr.reshape(shape)


def _combine(parts, op, n):
    target = tuple(sorted({v for vs, _ in parts for v in vs}))
    out = np.ones((n,) * len(target), dtype=bool) if op == "and" else np.zeros((n,) * len(target), dtype=bool)
    for vs, arr in parts:
        a = _align(vs, arr, target)
        out = out & a if op == "and" else out | a
    return target, out


def table(phi, s) -> tuple:
    """``(vars, truth table)`` of a relational formula, built bottom-up over free variables."""
    n = s.size
    if isinstance(phi, (RelAtom, EqAtom)):
        terms = phi.terms if isinstance(phi, RelAtom) else (phi.left, phi.right)
        names = [t.name for t in terms]
        vs = tuple(sorted(set(names)))
        arr = np.zeros((n,) * len(vs), dtype=bool)
        for idx in itertools.product(range(n), repeat=len(vs)):
            env = dict(zip(vs, idx))
            vals = tuple(env[a] for a in names)
            arr[idx] = (vals in s.relations[phi.name]) if isinstance(phi, RelAtom) else vals[0] == vals[1]
        return vs, arr
    if isinstance(phi, Not):
        vs, arr = table(phi.arg, s)
        return vs, ~arr
    if isinstance(phi, And):
        return _combine([table(a, s) for a in phi.args], "and", n)
    if isinstance(phi, Or):
        return _combine([table(a, s) for a in phi.args], "or", n)
    if isinstance(phi, Implies):
        vs, arr = table(phi.left, s)
        return _combine([(vs, ~arr), table(phi.right, s)], "or", n)
    if isinstance(phi, Iff):
        (lv, la), (rv, ra) = table(phi.left, s), table(phi.right, s)
        target = tuple(sorted(set(lv) | set(rv)))
        return target, _align(lv, la, target) == _align(rv, ra, target)
    if isinstance(phi, (Forall, Exists)):
        vs, arr = table(phi.body, s)
        if phi.var not in vs:
            return vs, arr
        i = vs.index(phi.var)
        red = arr.all(axis=i) if isinstance(phi, Forall) else arr.any(axis=i)
        return vs[:i] + vs[i + 1:], red
    raise TypeError(phi)


def lookup(tab, env) -> bool:
    vs, arr = tab
    return bool(arr[tuple(env[v] for v in vs)]) if vs else bool(arr)


def round_trip(group) -> tuple:
    """``(checked, mismatches)`` comparing phi in M with phi* in the graph encoding of M."""
    sig, free, formulas, cap, extra = group
    pairs = [(phi, translate(phi)) for phi in formulas]
    checked, bad = 0, []
    for s in structures(sig, cap, extra):
        rs = s.graph_encoding()
        tabs = [table(star, rs) for _, star in pairs]
        for vals in itertools.product(range(s.size), repeat=len(free)):
            env = dict(zip(free, vals))
            for (phi, _), tab in zip(pairs, tabs):
                checked += 1
                if evaluate(phi, s, env) != lookup(tab, env):
                    bad.append((phi, s, env))
    return checked, bad
