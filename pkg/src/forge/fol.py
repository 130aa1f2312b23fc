"""First-order formulas with function terms, and their relational translation.

Only used around relationalization: the DSL may mention function and
constant symbols, which are replaced by graph relations ``f*`` / ``c*``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .logic import And, FiniteStructure, Iff, Implies, Lit, Literal, LogicError, Not, Or, Signature


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple = ()


@dataclass(frozen=True)
class RelAtom:
    name: str
    terms: tuple


@dataclass(frozen=True)
class EqAtom:
    left: object
    right: object


@dataclass(frozen=True)
class Forall:
    var: str
    body: object


@dataclass(frozen=True)
class Exists:
    var: str
    body: object


def star_name(fn: str) -> str:
    return fn + "*"


def term_vars(t) -> list:
    if isinstance(t, Var):
        return [t.name]
    out = []
    for a in t.args:
        out.extend(term_vars(a))
    return out


def has_function_terms(tree) -> bool:
    """True if some atom of a boolean tree applies a function or constant."""
    if isinstance(tree, RelAtom):
        return any(isinstance(t, App) for t in tree.terms)
    if isinstance(tree, EqAtom):
        return isinstance(tree.left, App) or isinstance(tree.right, App)
    if isinstance(tree, Lit):
        return False
    if isinstance(tree, (Not, Forall, Exists)):
        return has_function_terms(tree.arg if isinstance(tree, Not) else tree.body)
    if isinstance(tree, (And, Or)):
        return any(has_function_terms(a) for a in tree.args)
    if isinstance(tree, (Implies, Iff)):
        return has_function_terms(tree.left) or has_function_terms(tree.right)
    raise LogicError(f"not a formula: {tree!r}")


def atoms_to_literals(tree):
    """Replace term atoms whose arguments are all variables by literal leaves."""
    if isinstance(tree, RelAtom):
        if not all(isinstance(t, Var) for t in tree.terms):
            raise LogicError("function term in a relational formula")
        return Lit(Literal.rel(tree.name, tuple(t.name for t in tree.terms)))
    if isinstance(tree, EqAtom):
        if not (isinstance(tree.left, Var) and isinstance(tree.right, Var)):
            raise LogicError("function term in a relational formula")
        return Lit(Literal.eq(tree.left.name, tree.right.name))
    if isinstance(tree, Lit):
        return tree
    if isinstance(tree, Not):
        return Not(atoms_to_literals(tree.arg))
    if isinstance(tree, And):
        return And(tuple(atoms_to_literals(a) for a in tree.args))
    if isinstance(tree, Or):
        return Or(tuple(atoms_to_literals(a) for a in tree.args))
    if isinstance(tree, Implies):
        return Implies(atoms_to_literals(tree.left), atoms_to_literals(tree.right))
    if isinstance(tree, Iff):
        return Iff(atoms_to_literals(tree.left), atoms_to_literals(tree.right))
    raise LogicError(f"cannot convert {tree!r}")


# --------------------------------------------------------------------------
# structures with functions


@dataclass(frozen=True)
class FunctionalStructure:
    """A finite structure interpreting relations, functions and constants.

    ``functions[f]`` maps argument tuples to values; a constant is a
    0-ary function with the single key ``()``.
    """

    signature: Signature
    size: int
    relations: Mapping[str, frozenset] = field(default_factory=dict)
    functions: Mapping[str, Mapping[tuple, int]] = field(default_factory=dict)

    def apply(self, fn: str, args: tuple) -> int:
        return self.functions[fn][args]

    def graph_encoding(self) -> FiniteStructure:
        """The relational structure with each function replaced by its graph."""
        rels = {n: set(ts) for n, ts in self.relations.items()}
        for fn, table in self.functions.items():
            rels[star_name(fn)] = {args + (v,) for args, v in table.items()}
        return FiniteStructure(relational_signature(self.signature), self.size, rels)


def relational_signature(sig: Signature) -> Signature:
    extra = tuple((star_name(f), a + 1) for f, a in sig.functions)
    return Signature(sig.relations + extra, ())


def all_functional_structures(sig: Signature, size: int):
    """Every structure over ``sig`` on ``size`` elements (exhaustive)."""
    rel_choices = []
    for name, arity in sig.relations:
        tuples = list(itertools.product(range(size), repeat=arity))
        rel_choices.append([(name, frozenset(t for t, b in zip(tuples, bits) if b))
                            for bits in itertools.product((0, 1), repeat=len(tuples))])
    fn_choices = []
    for name, arity in sig.functions:
        args = list(itertools.product(range(size), repeat=arity))
        fn_choices.append([(name, dict(zip(args, vals)))
                           for vals in itertools.product(range(size), repeat=len(args))])
    for rels in itertools.product(*rel_choices):
        for fns in itertools.product(*fn_choices):
            yield FunctionalStructure(sig, size, dict(rels), dict(fns))


def eval_term(t, s: FunctionalStructure, env: Mapping[str, int]) -> int:
    if isinstance(t, Var):
        return env[t.name]
    return s.apply(t.fn, tuple(eval_term(a, s, env) for a in t.args))


def evaluate(phi, s, env: Mapping[str, int]) -> bool:
    """Satisfaction for term formulas in a functional or relational structure."""
    if isinstance(phi, RelAtom):
        return tuple(eval_term(t, s, env) for t in phi.terms) in s.relations[phi.name]
    if isinstance(phi, EqAtom):
        return eval_term(phi.left, s, env) == eval_term(phi.right, s, env)
    if isinstance(phi, Lit):
        lit = phi.literal
        vals = tuple(env[a] for a in lit.args)
        v = vals[0] == vals[1] if lit.is_eq else vals in s.relations[lit.name]
        return v == lit.positive
    if isinstance(phi, Not):
        return not evaluate(phi.arg, s, env)
    if isinstance(phi, And):
        return all(evaluate(a, s, env) for a in phi.args)
    if isinstance(phi, Or):
        return any(evaluate(a, s, env) for a in phi.args)
    if isinstance(phi, Implies):
        return (not evaluate(phi.left, s, env)) or evaluate(phi.right, s, env)
    if isinstance(phi, Iff):
        return evaluate(phi.left, s, env) == evaluate(phi.right, s, env)
    if isinstance(phi, Forall):
        return all(evaluate(phi.body, s, {**env, phi.var: a}) for a in range(s.size))
    if isinstance(phi, Exists):
        return any(evaluate(phi.body, s, {**env, phi.var: a}) for a in range(s.size))
    raise LogicError(f"not a formula: {phi!r}")


# --------------------------------------------------------------------------
# the * translation


class _Fresh:
    def __init__(self, prefix: str = "_z"):
        self.prefix = prefix
        self.n = 0

    def __call__(self) -> str:
        self.n += 1
        return f"{self.prefix}{self.n}"


def _exists_all(names: Sequence[str], body):
    for v in reversed(names):
        body = Exists(v, body)
    return body


def term_star(t, y: str, fresh: _Fresh):
    """Formula saying ``y`` is the value of term ``t``."""
    if isinstance(t, Var):
        return RelAtom_eq(t.name, y)
    zs = [fresh() for _ in t.args]
    parts = [RelAtom(star_name(t.fn), tuple(Var(z) for z in zs) + (Var(y),))]
    parts += [term_star(a, z, fresh) for a, z in zip(t.args, zs)]
    return _exists_all(zs, And(tuple(parts)))


def RelAtom_eq(a: str, b: str):
    return EqAtom(Var(a), Var(b))


def translate(phi, fresh: _Fresh | None = None):
    """The relational translation ``phi*``, with the same free variables."""
    fresh = fresh or _Fresh()
    if isinstance(phi, RelAtom):
        if all(isinstance(t, Var) for t in phi.terms):
            return phi
        zs = [fresh() for _ in phi.terms]
        parts = [RelAtom(phi.name, tuple(Var(z) for z in zs))]
        parts += [term_star(t, z, fresh) for t, z in zip(phi.terms, zs)]
        return _exists_all(zs, And(tuple(parts)))
    if isinstance(phi, EqAtom):
        if isinstance(phi.left, Var) and isinstance(phi.right, Var):
            return phi
        z = fresh()
        return Exists(z, And((term_star(phi.left, z, fresh), term_star(phi.right, z, fresh))))
    if isinstance(phi, Lit):
        return phi
    if isinstance(phi, Not):
        return Not(translate(phi.arg, fresh))
    if isinstance(phi, And):
        return And(tuple(translate(a, fresh) for a in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(translate(a, fresh) for a in phi.args))
    if isinstance(phi, Implies):
        return Implies(translate(phi.left, fresh), translate(phi.right, fresh))
    if isinstance(phi, Iff):
        return Iff(translate(phi.left, fresh), translate(phi.right, fresh))
    if isinstance(phi, Forall):
        return Forall(phi.var, translate(phi.body, fresh))
    if isinstance(phi, Exists):
        return Exists(phi.var, translate(phi.body, fresh))
    raise LogicError(f"not a formula: {phi!r}")


def _graph_literal(atom: EqAtom):
    """``f(x..) = v`` with variable arguments is exactly the atom ``f*(x.., v)``."""
    for t, v in ((atom.left, atom.right), (atom.right, atom.left)):
        if isinstance(t, App) and isinstance(v, Var) and all(isinstance(a, Var) for a in t.args):
            return Literal.rel(star_name(t.fn), tuple(a.name for a in t.args) + (v.name,))
    return None


def flatten_terms(tree, fresh: _Fresh):
    """Name every compound subterm of a quantifier-free tree by a fresh variable.

    Returns ``(tree', guards)`` where ``tree'`` is relational and each guard is
    a literal ``f*(args, u)`` defining the fresh variable ``u``. Identical
    subterms share one variable. An equation between a shallow term and a
    variable becomes a graph atom directly, with no fresh variable.
    """
    names: dict = {}
    guards: list = []

    def name_of(t) -> str:
        if isinstance(t, Var):
            return t.name
        if t in names:
            return names[t]
        args = tuple(name_of(a) for a in t.args)
        u = fresh()
        names[t] = u
        guards.append(Literal.rel(star_name(t.fn), args + (u,)))
        return u

    def walk(node):
        if isinstance(node, RelAtom):
            return Lit(Literal.rel(node.name, tuple(name_of(t) for t in node.terms)))
        if isinstance(node, EqAtom):
            direct = _graph_literal(node)
            if direct is not None:
                return Lit(direct)
            return Lit(Literal.eq(name_of(node.left), name_of(node.right)))
        if isinstance(node, Lit):
            return node
        if isinstance(node, Not):
            return Not(walk(node.arg))
        if isinstance(node, And):
            return And(tuple(walk(a) for a in node.args))
        if isinstance(node, Or):
            return Or(tuple(walk(a) for a in node.args))
        if isinstance(node, Implies):
            return Implies(walk(node.left), walk(node.right))
        if isinstance(node, Iff):
            return Iff(walk(node.left), walk(node.right))
        raise LogicError(f"quantifier inside a matrix: {node!r}")

    out = walk(tree)
    return out, guards
