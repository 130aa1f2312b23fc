"""Finite-structure diagnostics: automorphisms, closures, amalgamation, duplication."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .logic import (FiniteStructure, LogicError, QfType, Signature, diagram_of,
                    induced_substructure)
from .search import Checker, enumerate_completions
from .theory import AgeOracle, PithyTheory


class ClosureError(LogicError):
    pass


DEFAULT_BOUND = 10


# --------------------------------------------------------------------------
# automorphisms


def _tuples_with(s: FiniteStructure):
    """``inc[v]`` lists ``(rel, position, tuple)`` for every true tuple through ``v``."""
    inc = [[] for _ in range(s.size)]
    for name, _ in s.signature.relations:
        for t in s.relations[name]:
            for i, a in enumerate(t):
                inc[a].append((name, i, t))
    return inc


def refine_colors(s: FiniteStructure, individualize: Sequence[int] = ()) -> list:
    """Equitable-ish coloring by iterated relation profiles.

    Colors are small integers assigned in sorted order of the profiles, so the
    coloring does not depend on the labels. Vertices in ``individualize`` get
    singleton colors, in the given order.
    """
    inc = _tuples_with(s)
    pin = {v: i for i, v in enumerate(individualize)}
    colors = [(0, pin.get(v, -1)) for v in range(s.size)]
    ncls = -1
    while True:
        prof = []
        for v in range(s.size):
            ms = sorted((name, i, tuple(colors[a] for a in t)) for name, i, t in inc[v])
            prof.append((colors[v], tuple(ms)))
        order = {p: k for k, p in enumerate(sorted(set(prof)))}
        colors = [order[p] for p in prof]
        if len(order) == ncls:
            return colors
        ncls = len(order)


@dataclass(frozen=True)
class AutomorphismSet:
    """Every automorphism of a structure of size ``n``, listed in lexicographic order.

    ``perms[k][i]`` is the image of ``i``. The listing is the full group, or the
    pointwise stabilizer of ``fixed`` when that is non-empty.
    """

    n: int
    perms: tuple
    fixed: tuple = ()

    def __len__(self):
        return len(self.perms)

    def __contains__(self, perm):
        return tuple(perm) in set(self.perms)

    def stabilizer(self, a: Sequence[int]) -> "AutomorphismSet":
        a = tuple(a)
        return AutomorphismSet(self.n, tuple(p for p in self.perms if all(p[x] == x for x in a)),
                               tuple(sorted(set(self.fixed) | set(a))))

    def orbit(self, b: int) -> frozenset:
        return frozenset(p[b] for p in self.perms)

    def to_json(self) -> dict:
        return {"n": self.n, "fixed": list(self.fixed), "order": len(self.perms),
                "perms": [list(p) for p in self.perms]}


def automorphisms(s: FiniteStructure, fixed: Sequence[int] = (),
                  bound: int = DEFAULT_BOUND) -> AutomorphismSet:
    """All automorphisms fixing ``fixed`` pointwise, by refinement then backtracking."""
    if s.size > bound:
        raise ClosureError(f"structure has {s.size} elements, over the bound {bound}; "
                           "full enumeration is limited to small structures "
                           "(generator-only mode is not provided)")
    fixed = tuple(fixed)
    for a in fixed:
        if not 0 <= a < s.size:
            raise ClosureError(f"label {a} out of range")
    colors = refine_colors(s, fixed)
    n = s.size
    rels = [(name, arity, s.relations[name]) for name, arity in s.signature.relations]
    img = [-1] * n
    used = [False] * n
    found = []

    def consistent(v: int) -> bool:
        done = [u for u in range(v + 1)]
        for name, arity, rel in rels:
            for t in itertools.product(done, repeat=arity):
                if v not in t:
                    continue
                if (t in rel) != (tuple(img[a] for a in t) in rel):
                    return False
        return True

    def rec(v: int):
        if v == n:
            found.append(tuple(img))
            return
        for w in range(n):
            if used[w] or colors[w] != colors[v]:
                continue
            img[v] = w
            used[w] = True
            if consistent(v):
                rec(v + 1)
            used[w] = False
        img[v] = -1

    rec(0)
    return AutomorphismSet(n, tuple(sorted(found)), tuple(sorted(set(fixed))))


def dcl(s: FiniteStructure, a: Sequence[int], bound: int = DEFAULT_BOUND) -> frozenset:
    """Labels fixed by every automorphism fixing ``a`` pointwise."""
    G = automorphisms(s, a, bound)
    return frozenset(b for b in range(s.size) if all(p[b] == b for p in G.perms))


def orbit_sizes(s: FiniteStructure, a: Sequence[int], bound: int = DEFAULT_BOUND) -> dict:
    """Orbit size of every label under the pointwise stabilizer of ``a``."""
    G = automorphisms(s, a, bound)
    return {b: len(G.orbit(b)) for b in range(s.size)}


def acl(s: FiniteStructure, a: Sequence[int], t: Optional[int] = None,
        bound: int = DEFAULT_BOUND) -> frozenset:
    """Labels whose stabilizer orbit has size at most ``t`` (default: all orbits, i.e. ``n``).

    Every orbit of a finite structure is finite, so the literal notion is the
    whole domain; ``t = 1`` gives back :func:`dcl`.
    """
    t = s.size if t is None else t
    if t < 1:
        raise ClosureError("threshold must be at least 1")
    return frozenset(b for b, k in orbit_sizes(s, a, bound).items() if k <= t)


# --------------------------------------------------------------------------
# canonical forms


def canonical_form(s: FiniteStructure, pinned: Sequence[int] = ()) -> tuple:
    """An isomorphism invariant key; ``pinned`` labels keep their order and come first.

    The key is the least relabeled relation listing over all orderings that
    respect the refinement colors, so isomorphic inputs share it.
    """
    pinned = tuple(pinned)
    colors = refine_colors(s, pinned)
    groups = {}
    for v in range(s.size):
        groups.setdefault(colors[v], []).append(v)
    blocks = [groups[c] for c in sorted(groups)]
    best = None
    for choice in itertools.product(*(itertools.permutations(b) for b in blocks)):
        order = [v for blk in choice for v in blk]
        pos = {v: i for i, v in enumerate(order)}
        key = tuple(tuple(sorted(tuple(pos[a] for a in t) for t in s.relations[name]))
                    for name, _ in s.signature.relations)
        if best is None or key < best:
            best = key
    return (s.size, len(pinned), best)


# --------------------------------------------------------------------------
# strong amalgamation


def _check_embedding(A: FiniteStructure, B: FiniteStructure, f: Sequence[int]) -> tuple:
    f = tuple(f)
    if len(f) != A.size or len(set(f)) != len(f) or any(not 0 <= b < B.size for b in f):
        raise ClosureError(f"{f} is not an injective map into {B.size} elements")
    if diagram_of(B, f) != diagram_of(A, range(A.size)):
        raise ClosureError(f"{f} does not preserve the relations")
    return f


@dataclass(frozen=True)
class Amalgam:
    """A structure ``D`` with embeddings ``eB`` of B and ``eC`` of C."""

    D: FiniteStructure
    eB: tuple
    eC: tuple
    free: bool

    def to_json(self) -> dict:
        return {"D": self.D.to_json(), "eB": list(self.eB), "eC": list(self.eC),
                "free": self.free}


def _diag_structure(sig: Signature, width: int, diag: dict) -> FiniteStructure:
    rels = {name: set() for name, _ in sig.relations}
    for (name, t), v in diag.items():
        if v:
            rels[name].add(t)
    return FiniteStructure(sig, width, rels)


def strong_amalgam(A: FiniteStructure, B: FiniteStructure, C: FiniteStructure,
                   f: Sequence[int], g: Sequence[int], oracle: AgeOracle) -> Optional[Amalgam]:
    """A strong amalgam of B and C over A, or None when there is none.

    ``f: A -> B`` and ``g: A -> C``. D has ``|B| + |C| - |A|`` elements: B first,
    then the elements of C outside ``g(A)``. Cross atoms are searched false
    first, so the free amalgam is returned whenever it is in the age.
    """
    f = _check_embedding(A, B, f)
    g = _check_embedding(A, C, g)
    inv_g = {c: a for a, c in enumerate(g)}
    eC, nxt = [], B.size
    for c in range(C.size):
        if c in inv_g:
            eC.append(f[inv_g[c]])
        else:
            eC.append(nxt)
            nxt += 1
    width = nxt
    sig = oracle.signature
    fixed = {}
    for name, arity in sig.relations:
        src = B.relations.get(name, frozenset())
        for t in itertools.product(range(B.size), repeat=arity):
            fixed[(name, t)] = t in src
        src = C.relations.get(name, frozenset())
        for t in itertools.product(range(C.size), repeat=arity):
            fixed[(name, tuple(eC[a] for a in t))] = t in src
    first = next(enumerate_completions(oracle.checker, sig, width, fixed), None)
    if first is None:
        return None
    D = _diag_structure(sig, width, first)
    free = all(not v for a, v in first.items() if a not in fixed)
    return Amalgam(D, tuple(range(B.size)), tuple(eC), free)


def verify_amalgam(A, B, C, f, g, am: Amalgam, oracle: AgeOracle) -> bool:
    """Independent check: both maps embed, agree on A, are disjoint off A, and D is in the age."""
    try:
        _check_embedding(B, am.D, am.eB)
        _check_embedding(C, am.D, am.eC)
    except ClosureError:
        return False
    if any(am.eB[f[a]] != am.eC[g[a]] for a in range(A.size)):
        return False
    offB = {am.eB[b] for b in range(B.size) if b not in set(f)}
    offC = {am.eC[c] for c in range(C.size) if c not in set(g)}
    if offB & offC or len(offB) + len(offC) + A.size != am.D.size:
        return False
    return oracle.accepts_structure(am.D)


@dataclass
class AmalgamReport:
    size_bound: int
    tested: int = 0
    failures: list = field(default_factory=list)
    free: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "size_bound": self.size_bound,
            "tested": self.tested,
            "free_amalgams": self.free,
            "verdict": "PASS" if self.passed else "FAIL",
            "failures": [
                {"A": A.to_json(), "B": B.to_json(), "C": C.to_json(),
                 "f": list(f), "g": list(g), "search": "exhausted"}
                for A, B, C, f, g in self.failures
            ],
        }


def age_members(oracle: AgeOracle, size: int) -> list:
    """One representative per isomorphism class of age members of the given size."""
    out, seen = [], set()
    for diag in enumerate_completions(oracle.checker, oracle.signature, size):
        s = _diag_structure(oracle.signature, size, diag)
        k = canonical_form(s)
        if k not in seen:
            seen.add(k)
            out.append(s)
    return out


def _extensions(oracle: AgeOracle, A: FiniteStructure, bound: int) -> list:
    """Age members B on ``0..|B|-1`` whose first ``|A|`` elements induce A, up to isomorphism over A.

    Only proper extensions are listed.
    """
    sig = oracle.signature
    out = []
    for size in range(A.size + 1, bound + 1):
        fixed = {}
        for name, arity in sig.relations:
            for t in itertools.product(range(A.size), repeat=arity):
                fixed[(name, t)] = t in A.relations[name]
        seen = set()
        for diag in enumerate_completions(oracle.checker, sig, size, fixed):
            B = _diag_structure(sig, size, diag)
            k = canonical_form(B, tuple(range(A.size)))
            if k not in seen:
                seen.add(k)
                out.append(B)
    return out


def check_strong_amalgamation(oracle: AgeOracle, size_bound: int = 4,
                              stop_at_first: bool = False) -> AmalgamReport:
    """Test every triple ``A <= B, C`` from the age with ``|B|, |C| <= size_bound``.

    A runs over isomorphism types, B and C over proper extensions of A up to
    isomorphism fixing A; the pairs (B, C) are unordered.
    """
    report = AmalgamReport(size_bound)
    for a in range(0, size_bound):
        for A in age_members(oracle, a):
            ident = tuple(range(a))
            exts = _extensions(oracle, A, size_bound)
            for i, B in enumerate(exts):
                for C in exts[i:]:
                    report.tested += 1
                    am = strong_amalgam(A, B, C, ident, ident, oracle)
                    if am is None:
                        report.failures.append((A, B, C, ident, ident))
                        if stop_at_first:
                            return report
                    elif am.free:
                        report.free += 1
    return report


# --------------------------------------------------------------------------
# duplication


def _type_of(sig: Signature, width: int, diag: dict) -> QfType:
    return QfType(sig, width, frozenset(a for a, v in diag.items() if v), frozenset(),
                  closed=True)


@dataclass
class DuplicationReport:
    width_bound: int
    checked: int = 0
    witnesses: list = field(default_factory=list)
    counterexample: Optional[QfType] = None

    @property
    def passed(self) -> bool:
        return self.counterexample is None

    def to_json(self) -> dict:
        def tj(p):
            return p.to_json()
        return {
            "width_bound": self.width_bound,
            "checked": self.checked,
            "verdict": "PASS" if self.passed else "FAIL",
            "counterexample": None if self.passed else tj(self.counterexample),
            "witnesses": [{"p": tj(p), "q": tj(q)} for p, q in self.witnesses],
        }


def check_duplication(theory: PithyTheory, width_bound: int = 4,
                      keep_witnesses: bool = True) -> DuplicationReport:
    """Does every non-redundant type ``p(x, z)`` of width ``<= width_bound`` duplicate?

    A duplicate is a consistent ``q(x, z, y)`` (y last) restricting to ``p`` on
    ``(x, z)`` and on ``(y, z)``; only the atoms containing both x and y are searched.
    """
    checker = Checker(theory.universal)
    sig = theory.signature
    report = DuplicationReport(width_bound)
    for w in range(1, width_bound + 1):
        y = w
        ren = [y] + list(range(1, w))  # x -> y, z fixed
        for diag in enumerate_completions(checker, sig, w):
            report.checked += 1
            fixed = dict(diag)
            for (name, t), v in diag.items():
                fixed[(name, tuple(ren[a] for a in t))] = v
            q = next(enumerate_completions(checker, sig, w + 1, fixed), None)
            p = _type_of(sig, w, diag)
            if q is None:
                report.counterexample = p
                return report
            qt = _type_of(sig, w + 1, q)
            if keep_witnesses:
                report.witnesses.append((p, qt))
    return report


# --------------------------------------------------------------------------
# blowup


def blowup(base: FiniteStructure, n: int, eq_name: str = "Eqv") -> FiniteStructure:
    """``base x n`` with ``eq_name`` relating equal first coordinates.

    Element ``(b, i)`` gets label ``b * n + i`` and every base relation holds
    of a tuple exactly when it holds of the first coordinates.
    """
    if n < 1:
        raise ClosureError("blowup needs n >= 1")
    if base.signature.has_relation(eq_name):
        raise ClosureError(f"base already has a relation named {eq_name}")
    sig = base.signature.with_relations([(eq_name, 2)])
    rels = {eq_name: {(x, y) for x in range(base.size * n) for y in range(base.size * n)
                      if x // n == y // n}}
    for name, _ in base.signature.relations:
        rels[name] = {
            tuple(b * n + i for b, i in zip(t, idx))
            for t in base.relations[name]
            for idx in itertools.product(range(n), repeat=len(t))
        }
    return FiniteStructure(sig, base.size * n, rels)


__all__ = [
    "ClosureError", "AutomorphismSet", "automorphisms", "dcl", "acl", "orbit_sizes",
    "canonical_form", "refine_colors", "Amalgam", "strong_amalgam", "verify_amalgam",
    "AmalgamReport", "age_members", "check_strong_amalgamation", "DuplicationReport",
    "check_duplication", "blowup", "induced_substructure",
]
