"""Theories: relational translation, pithy expansion and the age oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from . import fol
from .logic import (And, FiniteStructure, Implies, Lit, Literal, LogicError, Not, QfFormula,
                    QfType, Signature, diagram_of)
from .search import Checker


class TheoryError(LogicError):
    pass


@dataclass(frozen=True)
class Axiom:
    """``forall xs exists ys: matrix``.

    ``matrix`` is a relational QfFormula over ``xs + ys``. Before
    relationalization an axiom that mentions functions keeps its boolean tree
    in ``tree`` and has ``matrix = None``.
    """

    forall: tuple
    exists: tuple = ()
    matrix: Optional[QfFormula] = None
    tree: object = None
    label: str = ""

    @property
    def universal(self) -> bool:
        return not self.exists

    def to_text(self) -> str:
        head = ""
        if self.forall:
            head += "forall " + " ".join(self.forall) + " "
        if self.exists:
            head += "exists " + " ".join(self.exists) + " "
        body = self.matrix.to_text() if self.matrix is not None else repr(self.tree)
        return f"{head.strip()}: {body}"

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "forall": list(self.forall),
            "exists": list(self.exists),
            "matrix": self.matrix.to_json(),
        }


@dataclass(frozen=True)
class TheorySpec:
    name: str
    signature: Signature
    universal: tuple = ()
    extension: tuple = ()
    forbidden: tuple = ()

    @property
    def relational(self) -> bool:
        return self.signature.relational

    def axioms(self):
        return self.universal + self.extension

    def to_json(self) -> dict:
        if not self.relational:
            raise TheoryError("serialize only relational theories; run relationalize first")
        return {
            "name": self.name,
            "signature": self.signature.to_json(),
            "universal": [a.to_json() for a in self.universal],
            "extension": [a.to_json() for a in self.extension],
        }


def forbid_matrix(pattern: FiniteStructure, prefix: str = "v") -> QfFormula:
    """Universal matrix excluding ``pattern`` as an induced substructure."""
    names = [f"{prefix}{i}" for i in range(pattern.size)]
    diag = diagram_of(pattern, range(pattern.size)).as_formula(names)
    return diag.negate()


# --------------------------------------------------------------------------
# relationalization


def _fresh_var_for(used: set):
    counter = itertools.count(1)

    def fresh():
        while True:
            v = f"u{next(counter)}"
            if v not in used:
                used.add(v)
                return v
    return fresh


def relationalize(spec: TheorySpec) -> TheorySpec:
    """Replace functions and constants by their graph relations.

    Each ``n``-ary function ``f`` becomes an ``(n+1)``-ary relation ``f*`` and
    each constant ``c`` a unary ``c*``, with existence (extension axioms) and
    uniqueness (universal axioms). Compound terms in a matrix are named by
    fresh variables: in a universal axiom the defining graph atoms become
    premises, in an extension axiom extra existential witnesses.
    """
    sig = spec.signature
    if sig.relational:
        return spec
    rsig = fol.relational_signature(sig)
    universal, extension = [], []

    for ax in spec.axioms():
        if ax.matrix is not None and ax.tree is None:
            (universal if ax.universal else extension).append(ax)
            continue
        used = set(ax.forall) | set(ax.exists)
        fresh = _fresh_var_for(used)
        tree, guards = fol.flatten_terms(ax.tree, fresh)
        new_vars = tuple(g.args[-1] for g in guards)
        guard_tree = And(tuple(Lit(g) for g in guards))
        if ax.universal:
            body = Implies(guard_tree, tree) if guards else tree
            m = QfFormula.from_tree(ax.forall + new_vars, body)
            universal.append(Axiom(ax.forall + new_vars, (), m, None, ax.label))
        else:
            body = And((guard_tree, tree)) if guards else tree
            m = QfFormula.from_tree(ax.forall + ax.exists + new_vars, body)
            extension.append(Axiom(ax.forall, ax.exists + new_vars, m, None, ax.label))

    for f, n in sig.functions:
        r = fol.star_name(f)
        xs = tuple(f"x{i}" for i in range(n))
        exist = QfFormula.conj(xs + ("y",), [Literal.rel(r, xs + ("y",))])
        extension.append(Axiom(xs, ("y",), exist, None, f"D:exists:{f}"))
        uniq = QfFormula.from_tree(
            xs + ("y", "y'"),
            Implies(And((Lit(Literal.rel(r, xs + ("y",))), Lit(Literal.rel(r, xs + ("y'",))))),
                    Lit(Literal.eq("y", "y'"))))
        universal.append(Axiom(xs + ("y", "y'"), (), uniq, None, f"D:unique:{f}"))

    return TheorySpec(spec.name, rsig, tuple(universal), tuple(extension), spec.forbidden)


# --------------------------------------------------------------------------
# pithy expansion


@dataclass(frozen=True)
class PithyAxiom:
    """``forall x0..x{k-1} exists y: matrix``; the witness variable is last."""

    premise_width: int
    matrix: QfFormula
    source: str = ""
    dummy: bool = False

    def __post_init__(self):
        if len(self.matrix.vars) != self.premise_width + 1:
            raise TheoryError("pithy matrix must have premise_width + 1 variables")

    @property
    def witness(self) -> str:
        return self.matrix.vars[-1]

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "premise_width": self.premise_width,
            "dummy": self.dummy,
            "matrix": self.matrix.to_json(),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PithyAxiom":
        return cls(int(data["premise_width"]), QfFormula.from_json(data["matrix"]),
                   data.get("source", ""), bool(data.get("dummy", False)))


@dataclass(frozen=True)
class PithyTheory:
    name: str
    signature: Signature
    universal: tuple = ()
    pithy_axioms: tuple = ()

    @property
    def genuine_axioms(self) -> tuple:
        return tuple(a for a in self.pithy_axioms if not a.dummy)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "signature": self.signature.to_json(),
            "universal": [m.to_json() for m in self.universal],
            "pithy_axioms": [a.to_json() for a in self.pithy_axioms],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "PithyTheory":
        return cls(
            data.get("name", ""),
            Signature.from_json(data["signature"]),
            tuple(QfFormula.from_json(m) for m in data["universal"]),
            tuple(PithyAxiom.from_json(a) for a in data["pithy_axioms"]),
        )


def _aux_name(label: str, k: int, taken: set) -> str:
    base = f"E{k}[{label}]"
    name, n = base, 1
    while name in taken:
        n += 1
        name = f"{base}#{n}"
    taken.add(name)
    return name


def pithy_expand(spec: TheorySpec) -> PithyTheory:
    """Compile to universal matrices plus one-point extension axioms.

    A multi-witness axiom ``forall x exists y1..yn psi`` gets auxiliary
    relations ``E^k`` (arity ``|x| + k``, ``1 <= k <= n-1``) linked by

    * ``E^k(x, y<=k) -> E^{k-1}(x, y<k)`` (universal; ``E^0`` is identically true),
    * ``forall x y<k exists yk: E^{k-1}(x, y<k) -> E^k(x, y<=k)`` (pithy),
    * ``psi -> E^{n-1}`` (universal) and ``forall x y<n exists yn: E^{n-1} -> psi``.

    Purely universal axioms stay in ``universal`` and are mirrored as pithy
    axioms with a dummy witness ``w = w``.
    """
    if not spec.relational:
        raise TheoryError("pithy_expand needs a relational theory; run relationalize first")
    taken = {n for n, _ in spec.signature.relations}
    new_rels = []
    universal: list = []
    pithy: list = []

    for i, ax in enumerate(spec.universal):
        label = ax.label or f"u{i}"
        universal.append(ax.matrix)
        w = "w"
        while w in ax.matrix.vars:
            w += "'"
        dummy = ax.matrix.and_(QfFormula.conj((w,), [Literal.eq(w, w)]), ax.matrix.vars + (w,))
        pithy.append(PithyAxiom(len(ax.forall), dummy, label, dummy=True))

    for i, ax in enumerate(spec.extension):
        label = ax.label or f"e{i}"
        xs, ys = ax.forall, ax.exists
        n = len(ys)
        if n == 1:
            pithy.append(PithyAxiom(len(xs), ax.matrix, label))
            continue
        aux = []
        for k in range(1, n):
            name = _aux_name(label, k, taken)
            if len(xs) + k < 1:
                raise TheoryError("auxiliary relation of arity 0")
            aux.append(name)
            new_rels.append((name, len(xs) + k))

        def e_lit(k, positive=True):
            return Literal.rel(aux[k - 1], xs + ys[:k], positive)

        for k in range(1, n):
            vs = xs + ys[:k]
            if k > 1:
                back = QfFormula.from_tree(vs, Implies(Lit(e_lit(k)), Lit(e_lit(k - 1))))
                universal.append(back)
                fwd = QfFormula.from_tree(vs, Implies(Lit(e_lit(k - 1)), Lit(e_lit(k))))
            else:
                fwd = QfFormula.conj(vs, [e_lit(1)])
            pithy.append(PithyAxiom(len(vs) - 1, fwd, f"{label}:link{k}"))
        full = xs + ys
        universal.append(QfFormula.from_tree(full, Implies(_tree(ax.matrix), Lit(e_lit(n - 1)))))
        last = QfFormula.from_tree(full, Implies(Lit(e_lit(n - 1)), _tree(ax.matrix)))
        pithy.append(PithyAxiom(len(full) - 1, last, f"{label}:last"))

    for m in universal[len(spec.universal):]:
        w = "w"
        while w in m.vars:
            w += "'"
        dummy = m.and_(QfFormula.conj((w,), [Literal.eq(w, w)]), m.vars + (w,))
        pithy.append(PithyAxiom(len(m.vars), dummy, "aux-link", dummy=True))

    sig = spec.signature.with_relations(new_rels)
    return PithyTheory(spec.name, sig, tuple(universal), tuple(pithy))


def _tree(m: QfFormula):
    from .logic import Or
    return Or(tuple(And(tuple(Lit(l) for l in c)) for c in m.dnf))


# --------------------------------------------------------------------------
# age oracle


class AgeOracle:
    """Membership of quantifier-free types in the age, by universal-matrix scan.

    Assumes the universal part axiomatizes the age, which holds for every
    catalog theory (forbidden-substructure classes).
    """

    def __init__(self, theory: PithyTheory):
        self.theory = theory
        self.checker = Checker(theory.universal)

    @property
    def signature(self) -> Signature:
        return self.theory.signature

    def accepts_structure(self, s: FiniteStructure) -> bool:
        def val(name, ids):
            return ids in s.relations[name]
        return self.checker.full_violation(range(s.size), val) is None

    def violation(self, p: QfType):
        reps = sorted(set(p.classes))

        def val(name, ids):
            return p.value(name, ids)
        return self.checker.full_violation(reps, val)


def consistent_with(p: QfType, oracle: AgeOracle) -> bool:
    """Is ``p`` consistent with the theory, so far as its decided atoms go?

    A redundant type is judged through its equality classes; atoms that
    disagree with the partition make it inconsistent outright.
    """
    for name, args in p.all_atoms():
        v = p.value(name, args)
        w = p.value(name, tuple(p.classes[a] for a in args))
        if v is not None and w is not None and v != w:
            return False
    if not p.non_redundant:
        reps = sorted(set(p.classes))
        merged_h, merged_f = set(), set()
        for name, args in p.all_atoms():
            v = p.value(name, args)
            key = (name, tuple(p.classes[a] for a in args))
            if v is True:
                merged_h.add(key)
            elif v is False:
                merged_f.add(key)

        def val(name, ids):
            a = (name, ids)
            if a in merged_h:
                return True
            if p.closed or a in merged_f:
                return False
            return None
        return oracle.checker.full_violation(reps, val) is None
    return oracle.violation(p) is None
