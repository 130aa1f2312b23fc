"""Finite relational structures, quantifier-free types and formulas.

Everything here is an immutable value. Structures carry explicit tuple sets
for each relation symbol; equality is label identity and is never stored.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

Atom = tuple  # (relation name, tuple of variable indices)


class LogicError(ValueError):
    pass


@dataclass(frozen=True)
class Signature:
    relations: tuple[tuple[str, int], ...] = ()
    functions: tuple[tuple[str, int], ...] = ()  # arity 0 means constant

    def __post_init__(self):
        names = [n for n, _ in self.relations] + [n for n, _ in self.functions]
        if len(set(names)) != len(names):
            raise LogicError(f"duplicate symbol names in signature: {names}")
        for name, arity in self.relations:
            if arity < 1:
                raise LogicError(f"relation {name} must have arity >= 1")
        for name, arity in self.functions:
            if arity < 0:
                raise LogicError(f"function {name} has negative arity")

    @property
    def relational(self) -> bool:
        return not self.functions

    def arity(self, name: str) -> int:
        for n, a in self.relations:
            if n == name:
                return a
        raise LogicError(f"undeclared relation symbol {name!r}")

    def function_arity(self, name: str) -> int:
        for n, a in self.functions:
            if n == name:
                return a
        raise LogicError(f"undeclared function symbol {name!r}")

    def has_relation(self, name: str) -> bool:
        return any(n == name for n, _ in self.relations)

    def with_relations(self, extra: Iterable[tuple[str, int]]) -> "Signature":
        return Signature(self.relations + tuple(extra), self.functions)

    def to_json(self) -> dict:
        return {
            "relations": [[n, a] for n, a in self.relations],
            "functions": [[n, a] for n, a in self.functions],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Signature":
        return cls(
            tuple((n, int(a)) for n, a in data.get("relations", [])),
            tuple((n, int(a)) for n, a in data.get("functions", [])),
        )


GRAPH = Signature((("E", 2),))


@dataclass(frozen=True)
class FiniteStructure:
    signature: Signature
    size: int
    relations: Mapping[str, frozenset] = field(default_factory=dict)

    def __post_init__(self):
        rels = {}
        for name, arity in self.signature.relations:
            tuples = frozenset(tuple(t) for t in self.relations.get(name, ()))
            for t in tuples:
                if len(t) != arity:
                    raise LogicError(f"tuple {t} has wrong arity for {name}")
                if any(not (0 <= a < self.size) for a in t):
                    raise LogicError(f"tuple {t} out of range for size {self.size}")
            rels[name] = tuples
        unknown = set(self.relations) - set(rels)
        if unknown:
            raise LogicError(f"relations not in signature: {sorted(unknown)}")
        object.__setattr__(self, "relations", rels)

    def holds(self, name: str, args: Sequence[int]) -> bool:
        return tuple(args) in self.relations[name]

    def permuted(self, perm: Sequence[int]) -> "FiniteStructure":
        """Relabel element ``i`` as ``perm[i]``."""
        return FiniteStructure(
            self.signature,
            self.size,
            {n: {tuple(perm[a] for a in t) for t in ts} for n, ts in self.relations.items()},
        )

    def key(self) -> tuple:
        return (self.size,) + tuple(
            tuple(sorted(self.relations[n])) for n, _ in self.signature.relations
        )

    def to_json(self) -> dict:
        return {
            "signature": self.signature.to_json(),
            "size": self.size,
            "relations": {
                n: [list(t) for t in sorted(self.relations[n])]
                for n, _ in self.signature.relations
            },
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "FiniteStructure":
        sig = Signature.from_json(data["signature"])
        return cls(sig, int(data["size"]), {n: [tuple(t) for t in ts] for n, ts in data["relations"].items()})


def graph(n: int, edges: Iterable[tuple[int, int]]) -> FiniteStructure:
    """Symmetric graph on ``n`` vertices; each edge is stored in both directions."""
    e = set()
    for a, b in edges:
        e.add((a, b))
        e.add((b, a))
    return FiniteStructure(GRAPH, n, {"E": e})


# --------------------------------------------------------------------------
# quantifier-free types


def _tuples(arity: int, width: int) -> Iterator[tuple]:
    return itertools.product(range(width), repeat=arity)


@dataclass(frozen=True)
class QfType:
    """Atomic diagram of a ``width``-tuple of variables.

    ``holds`` and ``fails`` are the decided atoms. When ``closed`` is set every
    atom not in ``holds`` fails, which keeps large complete types sparse.
    ``classes[i]`` is the least variable index equal to variable ``i``.
    """

    signature: Signature
    width: int
    holds: frozenset = frozenset()
    fails: frozenset = frozenset()
    classes: tuple = ()
    closed: bool = False

    def __post_init__(self):
        if not self.classes:
            object.__setattr__(self, "classes", tuple(range(self.width)))
        if len(self.classes) != self.width:
            raise LogicError("equality partition has wrong width")
        object.__setattr__(self, "holds", frozenset(self.holds))
        object.__setattr__(self, "fails", frozenset() if self.closed else frozenset(self.fails))
        if self.holds & self.fails:
            raise LogicError("atom both holds and fails")

    def value(self, name: str, args: Sequence[int]) -> Optional[bool]:
        a = (name, tuple(args))
        if a in self.holds:
            return True
        if self.closed or a in self.fails:
            return False
        return None

    def equal(self, i: int, j: int) -> bool:
        return self.classes[i] == self.classes[j]

    def all_atoms(self) -> Iterator[Atom]:
        for name, arity in self.signature.relations:
            for t in _tuples(arity, self.width):
                yield (name, t)

    def undecided(self) -> list:
        if self.closed:
            return []
        return [a for a in self.all_atoms() if a not in self.holds and a not in self.fails]

    @property
    def complete(self) -> bool:
        if self.undecided():
            return False
        for name, args in self.all_atoms():
            canon = tuple(self.classes[i] for i in args)
            if self.value(name, args) != self.value(name, canon):
                return False
        return True

    @property
    def non_redundant(self) -> bool:
        return self.classes == tuple(range(self.width))

    def decide(self, atoms: Mapping) -> "QfType":
        if self.closed:
            raise LogicError("cannot decide atoms of a closed type")
        holds = set(self.holds)
        fails = set(self.fails)
        for a, v in atoms.items():
            (holds if v else fails).add(a)
        return QfType(self.signature, self.width, frozenset(holds), frozenset(fails), self.classes)

    def close(self) -> "QfType":
        """Closed form of a complete type (undecided atoms must be absent)."""
        if self.closed:
            return self
        if self.undecided():
            raise LogicError("type has undecided atoms")
        return QfType(self.signature, self.width, self.holds, frozenset(), self.classes, closed=True)

    def restrict(self, positions: Sequence[int]) -> "QfType":
        """Pull back along ``i -> positions[i]`` (the restriction to a subtuple)."""
        holds, fails = set(), set()
        for name, arity in self.signature.relations:
            for t in _tuples(arity, len(positions)):
                v = self.value(name, tuple(positions[i] for i in t))
                if v is True:
                    holds.add((name, t))
                elif v is False:
                    fails.add((name, t))
        classes = []
        for i, pi in enumerate(positions):
            classes.append(next(j for j in range(i + 1) if self.equal(positions[j], pi)))
        return QfType(self.signature, len(positions), frozenset(holds), frozenset(fails),
                      tuple(classes), closed=self.closed)

    def _key(self):
        if self.closed or not self.undecided():
            return (self.width, self.classes, self.holds)
        return (self.width, self.classes, self.holds, self.fails)

    def __eq__(self, other):
        if not isinstance(other, QfType):
            return NotImplemented
        return self.signature == other.signature and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def as_formula(self, names: Optional[Sequence[str]] = None) -> "QfFormula":
        """The conjunction of all decided literals, over variables ``x0..``."""
        names = list(names or [f"x{i}" for i in range(self.width)])
        lits = []
        for i in range(self.width):
            for j in range(i + 1, self.width):
                lits.append(Literal.eq(names[i], names[j], self.equal(i, j)))
        for name, args in self.all_atoms():
            v = self.value(name, args)
            if v is not None:
                lits.append(Literal.rel(name, tuple(names[a] for a in args), v))
        return QfFormula(tuple(names), (tuple(lits),))

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "classes": list(self.classes),
            "holds": sorted([n, list(t)] for n, t in self.holds),
            "fails": None if self.closed else sorted([n, list(t)] for n, t in self.fails),
        }


def diagram_of(structure: FiniteStructure, tup: Sequence[int]) -> QfType:
    tup = tuple(tup)
    for a in tup:
        if not (0 <= a < structure.size):
            raise LogicError(f"label {a} out of range for size {structure.size}")
    k = len(tup)
    holds = set()
    for name, arity in structure.signature.relations:
        rel = structure.relations[name]
        for t in _tuples(arity, k):
            if tuple(tup[i] for i in t) in rel:
                holds.add((name, t))
    classes = tuple(tup.index(a) for a in tup)
    return QfType(structure.signature, k, frozenset(holds), frozenset(), classes, closed=True)


def induced_substructure(structure: FiniteStructure, tup: Sequence[int]) -> FiniteStructure:
    tup = tuple(tup)
    if len(set(tup)) != len(tup):
        raise LogicError(f"repeated labels in {tup}")
    for a in tup:
        if not (0 <= a < structure.size):
            raise LogicError(f"label {a} out of range")
    pos = {a: i for i, a in enumerate(tup)}
    rels = {
        name: {tuple(pos[a] for a in t) for t in ts if all(a in pos for a in t)}
        for name, ts in structure.relations.items()
    }
    return FiniteStructure(structure.signature, len(tup), rels)


def structure_from_type(p: QfType) -> FiniteStructure:
    """The finite structure realizing a complete non-redundant type on ``0..width-1``."""
    if not p.non_redundant:
        raise LogicError("type is redundant")
    rels = {name: set() for name, _ in p.signature.relations}
    for name, args in p.holds:
        rels[name].add(args)
    return FiniteStructure(p.signature, p.width, rels)


def type_extends(q: QfType, p: QfType, positions: Sequence[int]) -> bool:
    """Does ``q`` decide every decided atom and equality of ``p`` the same way?

    ``positions[i]`` is the variable of ``q`` that variable ``i`` of ``p`` maps to.
    """
    positions = tuple(positions)
    if len(positions) != p.width or any(not (0 <= j < q.width) for j in positions):
        raise LogicError("bad position map")
    for i in range(p.width):
        for j in range(i + 1, p.width):
            if p.equal(i, j) != q.equal(positions[i], positions[j]):
                return False
    for name, args in p.all_atoms():
        v = p.value(name, args)
        if v is not None and q.value(name, tuple(positions[a] for a in args)) != v:
            return False
    return True


# --------------------------------------------------------------------------
# quantifier-free formulas in DNF


@dataclass(frozen=True, order=True)
class Literal:
    name: str  # relation name, or "=" for equality
    args: tuple
    positive: bool = True

    @classmethod
    def rel(cls, name: str, args: Sequence[str], positive: bool = True) -> "Literal":
        return cls(name, tuple(args), positive)

    @classmethod
    def eq(cls, a: str, b: str, positive: bool = True) -> "Literal":
        return cls("=", (a, b), positive)

    @property
    def is_eq(self) -> bool:
        return self.name == "="

    def negate(self) -> "Literal":
        return Literal(self.name, self.args, not self.positive)

    def rename(self, mapping: Mapping[str, str]) -> "Literal":
        return Literal(self.name, tuple(mapping.get(a, a) for a in self.args), self.positive)

    def __str__(self):
        if self.is_eq:
            return f"{self.args[0]} {'=' if self.positive else '!='} {self.args[1]}"
        s = f"{self.name}({','.join(self.args)})"
        return s if self.positive else "~" + s


# Boolean trees, as produced by the parser before normalization.

@dataclass(frozen=True)
class Lit:
    literal: Literal


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Iff:
    left: object
    right: object


TRUE = And(())
FALSE = Or(())


def _nnf(tree, negated: bool = False):
    if isinstance(tree, Lit):
        return Lit(tree.literal.negate()) if negated else tree
    if isinstance(tree, Not):
        return _nnf(tree.arg, not negated)
    if isinstance(tree, Implies):
        return _nnf(Or((Not(tree.left), tree.right)), negated)
    if isinstance(tree, Iff):
        both = And((Implies(tree.left, tree.right), Implies(tree.right, tree.left)))
        return _nnf(both, negated)
    if isinstance(tree, (And, Or)):
        args = tuple(_nnf(a, negated) for a in tree.args)
        flip = isinstance(tree, And) == negated
        return Or(args) if flip else And(args)
    raise LogicError(f"not a boolean tree: {tree!r}")


def _dnf(tree) -> list:
    if isinstance(tree, Lit):
        return [frozenset([tree.literal])]
    if isinstance(tree, Or):
        out = []
        for a in tree.args:
            out.extend(_dnf(a))
        return out
    # And: distribute
    acc = [frozenset()]
    for a in tree.args:
        acc = [c | d for c in acc for d in _dnf(a)]
    return acc


def tree_eval(tree, truth) -> bool:
    """Evaluate a boolean tree, ``truth`` mapping a Literal to its value."""
    if isinstance(tree, Lit):
        return truth(tree.literal)
    if isinstance(tree, Not):
        return not tree_eval(tree.arg, truth)
    if isinstance(tree, And):
        return all(tree_eval(a, truth) for a in tree.args)
    if isinstance(tree, Or):
        return any(tree_eval(a, truth) for a in tree.args)
    if isinstance(tree, Implies):
        return (not tree_eval(tree.left, truth)) or tree_eval(tree.right, truth)
    if isinstance(tree, Iff):
        return tree_eval(tree.left, truth) == tree_eval(tree.right, truth)
    raise LogicError(f"not a boolean tree: {tree!r}")


@dataclass(frozen=True)
class QfFormula:
    """A disjunction of conjunctions of literals over the named variables.

    ``dnf == ()`` is falsum; ``dnf == ((),)`` is verum.
    """

    vars: tuple
    dnf: tuple

    def __post_init__(self):
        vs = tuple(self.vars)
        if len(set(vs)) != len(vs):
            raise LogicError(f"repeated variable in {vs}")
        object.__setattr__(self, "vars", vs)
        index = {v: i for i, v in enumerate(vs)}
        for conj in self.dnf:
            for lit in conj:
                for a in lit.args:
                    if a not in index:
                        raise LogicError(f"variable {a!r} not among free variables {vs}")
        object.__setattr__(self, "dnf", _canonical(self.dnf, index))

    @classmethod
    def from_tree(cls, vars: Sequence[str], tree) -> "QfFormula":
        return cls(tuple(vars), tuple(tuple(c) for c in _dnf(_nnf(tree))))

    @classmethod
    def conj(cls, vars: Sequence[str], literals: Iterable[Literal]) -> "QfFormula":
        return cls(tuple(vars), (tuple(literals),))

    def negate(self) -> "QfFormula":
        tree = Not(Or(tuple(And(tuple(Lit(l) for l in c)) for c in self.dnf)))
        return QfFormula.from_tree(self.vars, tree)

    def rename(self, mapping: Mapping[str, str], vars: Optional[Sequence[str]] = None) -> "QfFormula":
        new_vars = tuple(vars) if vars is not None else tuple(mapping.get(v, v) for v in self.vars)
        return QfFormula(new_vars, tuple(tuple(l.rename(mapping) for l in c) for c in self.dnf))

    def and_(self, other: "QfFormula", vars: Optional[Sequence[str]] = None) -> "QfFormula":
        vs = tuple(vars) if vars is not None else tuple(dict.fromkeys(self.vars + other.vars))
        return QfFormula(vs, tuple(c + d for c in self.dnf for d in other.dnf))

    def or_(self, other: "QfFormula", vars: Optional[Sequence[str]] = None) -> "QfFormula":
        vs = tuple(vars) if vars is not None else tuple(dict.fromkeys(self.vars + other.vars))
        return QfFormula(vs, self.dnf + other.dnf)

    def relation_names(self) -> set:
        return {l.name for c in self.dnf for l in c if not l.is_eq}

    def to_text(self) -> str:
        if not self.dnf:
            return "false"
        parts = []
        for c in self.dnf:
            parts.append("true" if not c else " & ".join(str(l) for l in c))
        if len(parts) == 1:
            return parts[0]
        return " | ".join(f"({p})" if " & " in p else p for p in parts)

    def __str__(self):
        return self.to_text()

    def to_json(self) -> dict:
        return {
            "vars": list(self.vars),
            "dnf": [[[l.name, list(l.args), l.positive] for l in c] for c in self.dnf],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "QfFormula":
        return cls(
            tuple(data["vars"]),
            tuple(tuple(Literal(n, tuple(a), bool(p)) for n, a, p in c) for c in data["dnf"]),
        )


def _canonical(dnf, index) -> tuple:
    def lkey(l: Literal):
        return (l.name, tuple(index[a] for a in l.args), not l.positive)

    out = []
    seen = set()
    for conj in dnf:
        lits = set(conj)
        if any(l.negate() in lits for l in lits):
            continue
        # x != x is false; symmetric equalities share one spelling
        norm = set()
        dead = False
        for l in lits:
            if l.is_eq:
                a, b = l.args
                if a == b:
                    if not l.positive:
                        dead = True
                        break
                elif index[a] > index[b]:
                    l = Literal("=", (b, a), l.positive)
            norm.add(l)
        if dead or any(l.negate() in norm for l in norm):
            continue
        key = tuple(sorted(norm, key=lkey))
        if key not in seen:
            seen.add(key)
            out.append(key)
    out.sort(key=lambda c: [lkey(l) for l in c])
    return tuple(out)


def eval_literal(lit: Literal, structure: FiniteStructure, assignment: Mapping[str, int]) -> bool:
    try:
        vals = tuple(assignment[a] for a in lit.args)
    except KeyError as exc:
        raise LogicError(f"unbound variable {exc.args[0]!r}") from None
    if lit.is_eq:
        return (vals[0] == vals[1]) == lit.positive
    if lit.name not in structure.relations:
        raise LogicError(f"malformed atom: unknown relation {lit.name!r}")
    if structure.signature.arity(lit.name) != len(vals):
        raise LogicError(f"malformed atom: {lit.name} expects arity {structure.signature.arity(lit.name)}")
    return (vals in structure.relations[lit.name]) == lit.positive


def eval_qf(formula: QfFormula, structure: FiniteStructure, assignment: Mapping[str, int]) -> bool:
    for v in formula.vars:
        if v not in assignment:
            raise LogicError(f"unbound variable {v!r}")
        if not (0 <= assignment[v] < structure.size):
            raise LogicError(f"label {assignment[v]} out of range")
    return any(all(eval_literal(l, structure, assignment) for l in c) for c in formula.dnf)


_DENSE_LIMIT = 1 << 22


def _relation_array(structure: FiniteStructure, name: str) -> np.ndarray:
    arity = structure.signature.arity(name)
    arr = np.zeros((structure.size,) * arity, dtype=bool)
    ts = structure.relations[name]
    if ts:
        arr[tuple(np.array(sorted(ts)).T)] = True
    return arr


def satisfies_universal(structure: FiniteStructure, formula: QfFormula) -> bool:
    """Does the structure satisfy the universal closure of ``formula``?

    Evaluated as a boolean tensor over all assignments when that fits in
    memory, assignment by assignment otherwise.
    """
    n, k = structure.size, len(formula.vars)
    if n ** k > _DENSE_LIMIT:
        for vals in itertools.product(range(n), repeat=k):
            if not eval_qf(formula, structure, dict(zip(formula.vars, vals))):
                return False
        return True
    index = {v: i for i, v in enumerate(formula.vars)}
    grids = [np.arange(n).reshape((1,) * i + (n,) + (1,) * (k - i - 1)) for i in range(k)]
    arrays = {}
    holds = np.zeros((n,) * k, dtype=bool)
    for conj in formula.dnf:
        term = np.ones((n,) * k, dtype=bool)
        for lit in conj:
            idx = tuple(grids[index[a]] for a in lit.args)
            if lit.is_eq:
                val = idx[0] == idx[1]
            else:
                if lit.name not in structure.relations:
                    raise LogicError(f"malformed atom: unknown relation {lit.name!r}")
                if lit.name not in arrays:
                    arrays[lit.name] = _relation_array(structure, lit.name)
                val = arrays[lit.name][idx]
            term &= val if lit.positive else ~val
        holds |= term
    return bool(holds.all())
