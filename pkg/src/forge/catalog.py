"""Built-in theories, written in the DSL.

Relational entries list their universal axioms by hand. Their one-point
extension axioms are generated from the age: for every complete
non-redundant type ``p`` of width ``k <= kmax`` (one per orbit under
renaming variables) and every consistent one-point extension ``q`` of ``p``
there is an axiom ``forall x exists w: ~p(x) | q(x, w)``.
"""

from __future__ import annotations

import itertools
import re
from functools import lru_cache

from .dsl import parse_theory
from .logic import LogicError, Signature
from .search import Checker, enumerate_completions
from .theory import TheorySpec


class CatalogError(LogicError):
    pass


NAMES = (
    "rado", "henson3", "henson_k(n)", "dlo", "universal_poset", "universal_tournament",
    "equiv_inf_classes", "equiv_classes_of(n)", "blowup(base,n)", "q_min_semigroup",
)

_GRAPH = """\
rel E/2
forall x y: E(x,y) -> E(y,x)
forall x: ~E(x,x)
"""

_ORDER = """\
rel L/2
forall x: ~L(x,x)
forall x y z: L(x,y) & L(y,z) -> L(x,z)
"""

_EQUIV = """\
rel Eqv/2
forall x: Eqv(x,x)
forall x y: Eqv(x,y) -> Eqv(y,x)
forall x y z: Eqv(x,y) & Eqv(y,z) -> Eqv(x,z)
"""

_Q_MIN = """\
theory q_min_semigroup
fun min/2
# min is a selector, commutative, and its order x <= y iff min(x,y) = x is
# transitive; with the graph axioms this is a commutative idempotent semigroup
forall x y: min(x,y) = x | min(x,y) = y
forall x y: min(x,y) = x -> min(y,x) = x
forall x y z: min(x,y) = x & min(y,z) = y -> min(x,z) = x
# no endpoints and density for that order
forall x exists y: min(x,y) = y & y != x
forall x exists y: min(x,y) = x & y != x
forall x y exists z: x != y & min(x,y) = x -> min(x,z) = x & min(z,y) = z & z != x & z != y
"""


def _clique_pattern(n: int, rel: str = "E") -> str:
    atoms = [f"{rel}({i},{j})" for i in range(n) for j in range(n) if i != j]
    return f"forbid {n}: " + " ".join(atoms)


def _base_universals(name: str) -> str:
    if name == "rado":
        return _GRAPH
    m = re.fullmatch(r"henson_k\((\d+)\)", name)
    if name == "henson3" or m:
        n = 3 if name == "henson3" else int(m.group(1))
        if n < 2:
            raise CatalogError("henson_k needs n >= 2")
        return _GRAPH + _clique_pattern(n) + "\n"
    if name == "dlo":
        return _ORDER + "forall x y: x = y | L(x,y) | L(y,x)\n"
    if name == "universal_poset":
        return _ORDER
    if name == "universal_tournament":
        return "rel T/2\nforall x: ~T(x,x)\nforall x y: x = y | T(x,y) | T(y,x)\n" \
               "forall x y: ~T(x,y) | ~T(y,x)\n"
    if name == "set":
        return ""
    raise CatalogError(f"unknown catalog entry {name!r}; known: {', '.join(NAMES)}")


def _lift(universals: str, spec: TheorySpec) -> str:
    """Universal axioms of the blowup: base axioms up to Eqv, Eqv a congruence."""
    lines = [f"rel {r}/{a}" for r, a in spec.signature.relations] + [_EQUIV.rstrip("\n")]
    for ax in spec.universal:
        text = ax.to_text()
        # base equality becomes the equivalence
        text = re.sub(r"(\w+) = (\w+)", r"Eqv(\1,\2)", text)
        text = re.sub(r"(\w+) != (\w+)", r"~Eqv(\1,\2)", text)
        lines.append(text)
    for rel, arity in spec.signature.relations:
        xs = [f"x{i}" for i in range(arity)]
        for i in range(arity):
            ys = list(xs)
            ys[i] = "y"
            lines.append(f"forall {' '.join(xs)} y: Eqv({xs[i]},y) -> "
                         f"({rel}({','.join(xs)}) <-> {rel}({','.join(ys)}))")
    return "\n".join(lines) + "\n"


def _size_bound(n: int) -> str:
    xs = [f"x{i}" for i in range(n + 1)]
    pairs = list(itertools.combinations(xs, 2))
    prem = " & ".join(f"Eqv({a},{b})" for a, b in pairs)
    concl = " | ".join(f"{a} = {b}" for a, b in pairs)
    return f"forall {' '.join(xs)}: {prem} -> ({concl})\n"


def _canonical_orbit(diag: dict, width: int) -> tuple:
    best = None
    for perm in itertools.permutations(range(width)):
        key = tuple(sorted((n, tuple(perm[a] for a in t)) for (n, t), v in diag.items() if v))
        if best is None or key < best:
            best = key
    return best


def _lits(diag: dict, names: list) -> list:
    out = []
    for (rel, t), v in sorted(diag.items()):
        atom = f"{rel}({','.join(names[a] for a in t)})"
        out.append(atom if v else "~" + atom)
    return out


def extension_axioms(signature: Signature, universal_text: str, kmax: int) -> str:
    """One-point extension axioms of the age, for premise widths ``1..kmax``."""
    spec = parse_theory(universal_text)
    checker = Checker([a.matrix for a in spec.universal])
    lines = []
    for k in range(1, kmax + 1):
        xs = [f"x{i}" for i in range(k)]
        names = xs + ["w"]
        seen = set()
        for p in enumerate_completions(checker, signature, k):
            orbit = _canonical_orbit(p, k)
            if orbit in seen:
                continue
            seen.add(orbit)
            prem = [f"{a} != {b}" for a, b in itertools.combinations(xs, 2)] + _lits(p, xs)
            prem_text = " & ".join(prem) if prem else "true"
            for q in enumerate_completions(checker, signature, k + 1, p):
                cross = {a: v for a, v in q.items() if k in a[1]}
                body = [f"w != {x}" for x in xs] + _lits(cross, names)
                lines.append(f"forall {' '.join(xs)} exists w: ({prem_text}) -> ({' & '.join(body)})")
    return "\n".join(lines) + ("\n" if lines else "")


def _decls(universal_text: str) -> Signature:
    return parse_theory(universal_text).signature


@lru_cache(maxsize=None)
def catalog_source(name: str) -> str:
    """DSL source for a catalog entry."""
    name = name.replace(" ", "")
    if name == "q_min_semigroup":
        return _Q_MIN
    kmax = 2
    m = re.fullmatch(r"blowup\((\w+(?:\(\d+\))?),(\d+|inf)\)", name)
    e = re.fullmatch(r"equiv_classes_of\((\d+)\)", name)
    if name == "equiv_inf_classes":
        m = re.fullmatch(r"blowup\((\w+),(\w+)\)", "blowup(set,inf)")
    elif e:
        m = re.fullmatch(r"blowup\((\w+),(\d+)\)", f"blowup(set,{e.group(1)})")
    if m:
        base, n = m.group(1), m.group(2)
        base_text = _base_universals(base)
        base_spec = parse_theory(base_text)
        text = _lift(base_text, base_spec)
        if n != "inf":
            size = int(n)
            if size < 1:
                raise CatalogError("blowup needs n >= 1")
            text += _size_bound(size)
            kmax = min(max(2, size - 1), 3)
    else:
        text = _base_universals(name)
    sig = _decls(text)
    return f"theory {name}\n" + text + extension_axioms(sig, text, kmax)


def catalog(name: str) -> TheorySpec:
    """The TheorySpec of a catalog entry (function symbols still present for q_min)."""
    return parse_theory(catalog_source(name))


def catalog_entries() -> list:
    """Concrete names used by the test suites."""
    return ["rado", "henson3", "dlo", "universal_poset", "universal_tournament",
            "equiv_inf_classes", "equiv_classes_of(2)", "equiv_classes_of(3)",
            "blowup(dlo,2)", "q_min_semigroup"]


def load(name: str):
    """The compiled PithyTheory of a catalog entry."""
    from .theory import pithy_expand, relationalize
    spec = catalog(name)
    if not spec.relational:
        spec = relationalize(spec)
    return pithy_expand(spec)
