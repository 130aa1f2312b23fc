"""The interval construction: rationals ``r``, irrational boundaries ``v``, and a type ``p``.

Position ``j`` of the trace is the interval ``(v[j], v[j+1]]``, which holds
exactly one rational ``r[j]``. Each position carries a permanent element id;
the type ``p`` is stored as the set of true atoms over ids (every other atom
fails), so inserting a position never rewrites existing atoms.
"""

from __future__ import annotations

import bisect
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .logic import LogicError, QfType, Signature
from .qsqrt2 import Boundary, between
from .search import Checker, complete_new_element, cross_atoms
from .theory import PithyAxiom, PithyTheory

ROOT2_HALF = Fraction(1, 2)
ROOT2_QUARTER = Fraction(1, 4)
DEFAULT_K_CAP = 3


class ConstructionError(LogicError):
    pass


class TheoryInconsistent(ConstructionError):
    pass


class DuplicationFailure(ConstructionError):
    """No duplicating extension exists for the type at ``position``."""

    def __init__(self, p: QfType, position: int, stage: int):
        super().__init__(
            "duplication failure: nontrivial definable closure; the theory has no "
            f"duplication of quantifier-free types (position {position}, stage {stage})")
        self.p = p
        self.position = position
        self.stage = stage

    def to_json(self) -> dict:
        return {"error": "duplication-failure", "message": str(self), "position": self.position,
                "stage": self.stage, "type": self.p.to_json()}


class Unwitnessable(ConstructionError):
    pass


class InsufficientDepth(ConstructionError):
    pass


# --------------------------------------------------------------------------
# rational enumeration


def _fusc(n: int) -> int:
    a, b = 1, 0
    while n:
        if n & 1:
            b += a
        else:
            a += b
        n >>= 1
    return b


def calkin_wilf(m: int) -> Fraction:
    """The ``m``-th positive rational (``m >= 1``) in Calkin-Wilf order."""
    return Fraction(_fusc(m), _fusc(m + 1))


def rational_at(n: int) -> Fraction:
    """Enumeration of all rationals: 0, then each Calkin-Wilf term and its negation."""
    if n == 0:
        return Fraction(0)
    m = (n + 1) // 2
    q = calkin_wilf(m)
    return q if n % 2 else -q


# --------------------------------------------------------------------------
# the trace


@dataclass(frozen=True)
class IntervalLocation:
    point: Fraction
    index: Optional[int]  # None means OUTSIDE

    @property
    def outside(self) -> bool:
        return self.index is None


class ConstructionTrace:
    """State of the construction after ``stage`` stages."""

    def __init__(self, theory: PithyTheory, checker: Optional[Checker] = None):
        self.theory = theory
        self.checker = checker or Checker(theory.universal)
        self.stage = 0
        self.r: list = []
        self.v: list = []
        self.order: list = []
        self.holds: set = set()
        self.by_elem: dict = {}
        self.index: dict = {}
        self.next_id = 0
        self.enum_cursor = 0
        self.axiom_cursor = 0
        self.witness_log: list = []

    # -- basic state ---------------------------------------------------------

    @property
    def signature(self) -> Signature:
        return self.theory.signature

    @property
    def size(self) -> int:
        return len(self.order)

    def copy(self) -> "ConstructionTrace":
        t = ConstructionTrace(self.theory, self.checker)
        t.stage = self.stage
        t.r = list(self.r)
        t.v = list(self.v)
        t.order = list(self.order)
        t.holds = set(self.holds)
        t.by_elem = {e: set(s) for e, s in self.by_elem.items()}
        t.index = {k: set(s) for k, s in self.index.items()}
        t.next_id = self.next_id
        t.enum_cursor = self.enum_cursor
        t.axiom_cursor = self.axiom_cursor
        t.witness_log = list(self.witness_log)
        return t

    def rank(self) -> dict:
        return {e: j for j, e in enumerate(self.order)}

    def val(self, name: str, ids: tuple) -> bool:
        return (name, ids) in self.holds

    def _cands(self, name: str, i: int, rest: tuple):
        return self.index.get((name, i, rest), ())

    def _add_atom(self, atom: tuple) -> None:
        if atom in self.holds:
            return
        self.holds.add(atom)
        name, ids = atom
        for e in set(ids):
            self.by_elem.setdefault(e, set()).add(atom)
        for i, e in enumerate(ids):
            self.index.setdefault((name, i, ids[:i] + ids[i + 1:]), set()).add(e)

    @property
    def p(self) -> QfType:
        """The type of the positions, variable ``j`` standing for position ``j``."""
        rank = self.rank()
        holds = frozenset((n, tuple(rank[a] for a in ids)) for n, ids in self.holds)
        return QfType(self.signature, self.size, holds, frozenset(), (), closed=True)

    def sub_type(self, ids: Sequence[int]) -> QfType:
        """The type of the given element ids, in the given order (repeats allowed)."""
        ids = list(ids)
        pos = {}
        for i, e in enumerate(ids):
            pos.setdefault(e, []).append(i)
        holds = set()
        n = len(ids)
        if sum(n ** a for _, a in self.signature.relations) <= sum(
                len(self.by_elem.get(e, ())) for e in pos):
            for name, arity in self.signature.relations:
                for t in itertools.product(range(n), repeat=arity):
                    if (name, tuple(ids[i] for i in t)) in self.holds:
                        holds.add((name, t))
        else:
            for e in pos:
                for name, args in self.by_elem.get(e, ()):
                    if all(a in pos for a in args):
                        holds.update((name, t) for t in itertools.product(*(pos[a] for a in args)))
        classes = tuple(ids.index(e) for e in ids)
        return QfType(self.signature, len(ids), frozenset(holds), frozenset(), classes, closed=True)

    # -- intervals -----------------------------------------------------------

    def locate(self, point) -> IntervalLocation:
        q = Fraction(point)
        v = self.v
        if not v:
            return IntervalLocation(q, None)
        # float bisection, then exact correction; the interval ends at the first boundary >= q
        j = bisect.bisect_left([b.approx for b in v] if len(v) < 64 else self._approx(), float(q))
        while j > 0 and not (v[j - 1] < q):
            j -= 1
        while j < len(v) and v[j] < q:
            j += 1
        if j == 0 or j == len(v):
            return IntervalLocation(q, None)
        return IntervalLocation(q, j - 1)

    def _approx(self) -> list:
        key = (len(self.v), id(self.v[0]), id(self.v[-1]), self.stage)
        if getattr(self, "_approx_key", None) != key:
            self._approx_cache = [b.approx for b in self.v]
            self._approx_key = key
        return self._approx_cache

    def type_of_tuple(self, points: Sequence) -> QfType:
        idx = []
        for pt in points:
            loc = self.locate(pt)
            if loc.outside:
                raise InsufficientDepth(f"insufficient stage depth: point {pt} is outside the trace")
            idx.append(loc.index)
        seen = {}
        for pt, j in zip(points, idx):
            q = Fraction(pt)
            if j in seen and seen[j] != q:
                raise InsufficientDepth(
                    f"insufficient stage depth: points {seen[j]} and {q} share interval {j}")
            seen[j] = q
        return self.sub_type([self.order[j] for j in idx])

    # -- adding elements -----------------------------------------------------

    def _insert(self, pos: int, new: int, forced_true: Iterable, free: Sequence, seeds=(),
                budget: int = 200_000) -> bool:
        domain = self.order[:pos] + [new] + self.order[pos:]
        forced = frozenset(forced_true)
        cross = complete_new_element(self.checker, self.val, new, domain, free, forced, seeds,
                                     budget=budget, base_cands=self._cands)
        if cross is None:
            return False
        self.order.insert(pos, new)
        self.by_elem.setdefault(new, set())
        for atom in forced:
            self._add_atom(atom)
        for atom, value in cross.items():
            if value:
                self._add_atom(atom)
        return True

    def _fresh_id(self) -> int:
        e = self.next_id
        self.next_id += 1
        return e

    def _free_atoms(self, new: int, pos: int, partner: Optional[int] = None) -> list:
        domain = self.order[:pos] + [new] + self.order[pos:]
        rank = {e: j for j, e in enumerate(domain)}
        return cross_atoms(self.signature, new, domain, rank, partner)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        rank = self.rank()
        return {
            "stage": self.stage,
            "r": [str(x) for x in self.r],
            "v": [b.to_json() for b in self.v],
            "ids": list(self.order),
            "p": sorted([n, [rank[a] for a in ids]] for n, ids in self.holds),
            "next_id": self.next_id,
            "enum_cursor": self.enum_cursor,
            "axiom_cursor": self.axiom_cursor,
            "witness_log": self.witness_log,
            "theory": self.theory.to_json(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, data: dict, theory: Optional[PithyTheory] = None) -> "ConstructionTrace":
        theory = theory or PithyTheory.from_json(data["theory"])
        t = cls(theory)
        t.stage = int(data["stage"])
        t.r = [Fraction(x) for x in data["r"]]
        t.v = [Boundary.from_json(b) for b in data["v"]]
        t.order = [int(e) for e in data["ids"]]
        for e in t.order:
            t.by_elem.setdefault(e, set())
        for name, pos in data["p"]:
            t._add_atom((name, tuple(t.order[j] for j in pos)))
        t.next_id = int(data["next_id"])
        t.enum_cursor = int(data["enum_cursor"])
        t.axiom_cursor = int(data["axiom_cursor"])
        t.witness_log = list(data["witness_log"])
        return t


# --------------------------------------------------------------------------
# stages


def _floor(b: Boundary) -> int:
    f = math.floor(float(b))
    while b < f:
        f -= 1
    while not (b < f + 1):
        f += 1
    return f


def init(theory: PithyTheory) -> ConstructionTrace:
    t = ConstructionTrace(theory)
    new = t._fresh_id()
    if not t._insert(0, new, (), t._free_atoms(new, 0)):
        raise TheoryInconsistent("theory inconsistent: no consistent width-1 type")
    t.r = [Fraction(0)]
    t.v = [Boundary(0, -1), Boundary(0, 1)]
    return t


def refine(trace: ConstructionTrace, q, *, in_place: bool = False) -> ConstructionTrace:
    """Make ``q`` a position of the trace (one refinement stage)."""
    t = trace if in_place else trace.copy()
    q = Fraction(q)
    t.stage += 1
    j = bisect.bisect_left(t.r, q)
    if j < len(t.r) and t.r[j] == q:
        return t
    loc = t.locate(q)
    new = t._fresh_id()
    if loc.outside:
        if q > t.v[-1]:
            pos = t.size
            ok = t._insert(pos, new, (), t._free_atoms(new, pos))
            if ok:
                t.r.append(q)
                t.v.append(Boundary(q, ROOT2_HALF))
        else:
            ok = t._insert(0, new, (), t._free_atoms(new, 0))
            if ok:
                t.r.insert(0, q)
                t.v.insert(0, Boundary(q - 2, ROOT2_HALF))
        if not ok:
            raise TheoryInconsistent("theory inconsistent: no consistent extension at the edge")
        return t

    j = loc.index
    x = t.order[j]
    pos = j if q < t.r[j] else j + 1
    forced = {(name, tuple(new if a == x else a for a in ids)) for name, ids in t.by_elem[x]}
    free = t._free_atoms(new, pos, partner=x)
    if not t._insert(pos, new, forced, free, seeds=(x,)):
        raise DuplicationFailure(trace.sub_type([x] + [e for e in t.order if e != x]), j, t.stage)
    lo, hi = sorted((q, t.r[j]))
    t.r.insert(pos, q)
    t.v.insert(j + 1, between(lo, hi))
    return t


def _disjunct_plan(disjunct, sigma_base: dict, w: str, val) -> Optional[tuple]:
    """Atoms a fresh witness must make true/false for one disjunct, or None."""
    pos, neg = [], []
    for lit in disjunct:
        if w not in lit.args:
            if lit.is_eq:
                ok = (sigma_base[lit.args[0]] == sigma_base[lit.args[1]]) == lit.positive
            else:
                ok = val(lit.name, tuple(sigma_base[a] for a in lit.args)) == lit.positive
            if not ok:
                return None
            continue
        if lit.is_eq:
            a, b = lit.args
            if a == b:
                if not lit.positive:
                    return None
                continue
            if lit.positive:
                return None  # a fresh witness cannot equal an existing element
            continue
        (pos if lit.positive else neg).append(lit)
    return pos, neg


def _has_internal_witness(t: ConstructionTrace, axiom: PithyAxiom, zs: tuple) -> bool:
    names = axiom.matrix.vars
    w = axiom.witness
    base = dict(zip(names[:-1], zs))
    for disjunct in axiom.matrix.dnf:
        plan = _disjunct_plan(disjunct, {**base, w: None}, w, t.val)
        if plan is None:
            # might still hold with w equal to some z
            cands = {base[l.args[1] if l.args[0] == w else l.args[0]]
                     for l in disjunct if l.is_eq and l.positive and w in l.args
                     and l.args != (w, w)}
            if not cands:
                continue
        else:
            cands = None
            for lit in plan[0]:
                if lit.args.count(w) == 1:
                    i = lit.args.index(w)
                    rest = tuple(base[a] for k, a in enumerate(lit.args) if k != i)
                    cands = t.index.get((lit.name, i, rest), set())
                    break
        pool = t.order if cands is None else sorted(cands)
        for e in pool:
            env = {**base, w: e}
            if all(_lit_true(l, env, t.val) for l in disjunct):
                return True
    return False


def _lit_true(lit, env, val) -> bool:
    if lit.is_eq:
        return (env[lit.args[0]] == env[lit.args[1]]) == lit.positive
    return val(lit.name, tuple(env[a] for a in lit.args)) == lit.positive


def enlarge(trace: ConstructionTrace, axiom: PithyAxiom, *, in_place: bool = False,
            k_cap: int = DEFAULT_K_CAP, axiom_label: Optional[str] = None) -> ConstructionTrace:
    """Give every tuple of current positions a witness for ``axiom`` (one enlargement stage)."""
    t = trace if in_place else trace.copy()
    t.stage += 1
    k = axiom.premise_width
    if k > k_cap:
        raise ConstructionError(f"axiom premise width {k} exceeds the cap {k_cap}")
    names = axiom.matrix.vars
    w = axiom.witness
    old = list(t.order)
    added = []
    for zs in itertools.product(old, repeat=k):
        if _has_internal_witness(t, axiom, zs):
            continue
        base = dict(zip(names[:-1], zs))
        new = t._fresh_id()
        done = False
        for disjunct in axiom.matrix.dnf:
            plan = _disjunct_plan(disjunct, {**base, w: None}, w, t.val)
            if plan is None:
                continue
            env = {**base, w: new}
            forced = {(l.name, tuple(env[a] for a in l.args)) for l in plan[0]}
            fixed_false = {(l.name, tuple(env[a] for a in l.args)) for l in plan[1]}
            if forced & fixed_false:
                continue
            pos = t.size
            free = [a for a in t._free_atoms(new, pos) if a not in forced and a not in fixed_false]
            if t._insert(pos, new, forced, free, seeds=tuple(dict.fromkeys(zs))):
                done = True
                break
        if not done:
            raise Unwitnessable(
                f"axiom unwitnessable against current type: {axiom.source} at ids {zs}")
        added.append(new)
        t.witness_log.append({"stage": t.stage, "axiom": axiom_label or axiom.source,
                              "tuple": list(zs), "witness": new})
    if added:
        start = _floor(t.v[-1]) + 1
        for i in range(len(added)):
            q = Fraction(start + i)
            t.r.append(q)
            t.v.append(Boundary(q, ROOT2_QUARTER))
    return t


def step(trace: ConstructionTrace, *, in_place: bool = False,
         enlarge_below: Optional[int] = None) -> ConstructionTrace:
    """Advance one stage: odd stages refine, even stages enlarge.

    With ``enlarge_below`` set, an enlargement stage on a trace of at least
    that many positions only advances the schedule (logged as skipped).
    """
    t = trace if in_place else trace.copy()
    if (t.stage + 1) % 2 == 1:
        t.enum_cursor += 1
        return refine(t, rational_at(t.enum_cursor - 1), in_place=True)
    genuine = [(i, a) for i, a in enumerate(t.theory.pithy_axioms) if not a.dummy]
    if not genuine:
        t.stage += 1
        return t
    i, axiom = genuine[t.axiom_cursor % len(genuine)]
    t.axiom_cursor += 1
    if enlarge_below is not None and t.size >= enlarge_below:
        t.stage += 1
        t.witness_log.append({"stage": t.stage, "axiom": f"{i}:{axiom.source}", "skipped": True})
        return t
    return enlarge(t, axiom, in_place=True, axiom_label=f"{i}:{axiom.source}")


def run(theory: PithyTheory, stages: int, start: Optional[ConstructionTrace] = None,
        max_positions: Optional[int] = None,
        enlarge_below: Optional[int] = None) -> ConstructionTrace:
    """``stages`` further stages from ``start`` (default: the initial trace).

    ``enlarge_below`` bounds enlargement (see :func:`step`), so long runs
    that only probe refinement stay small.
    """
    if stages < 0:
        raise ValueError("stages must be >= 0")
    t = start.copy() if start is not None else init(theory)
    target = t.stage + stages
    while t.stage < target:
        step(t, in_place=True, enlarge_below=enlarge_below)
        if max_positions is not None and t.size > max_positions:
            raise ConstructionError(f"trace exceeded {max_positions} positions at stage {t.stage}")
    return t


def check_trace(t: ConstructionTrace) -> None:
    """Assert the separation invariant and consistency of ``p`` (raises ConstructionError)."""
    if len(t.v) != len(t.r) + 1 or len(t.order) != len(t.r):
        raise ConstructionError("shape mismatch")
    for j, q in enumerate(t.r):
        if not (t.v[j] < q and q <= t.v[j + 1]):
            raise ConstructionError(f"r[{j}] = {q} not separated by v")
    if t.checker.full_violation(t.order, t.val, t._cands) is not None:
        raise ConstructionError("p violates a universal axiom")


def to_svg(t: ConstructionTrace, width: int = 900, max_positions: int = 80) -> str:
    """A static picture: intervals on a line, binary atoms as arcs above them."""
    n = min(t.size, max_positions)
    if n == 0:
        return "<svg xmlns='http://www.w3.org/2000/svg'/>"
    lo, hi = float(t.v[0]), float(t.v[n])
    span = hi - lo or 1.0
    sx = lambda x: 20 + (width - 40) * (float(x) - lo) / span  # noqa: E731
    y0 = 220
    parts = [f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='260' "
             "font-family='monospace' font-size='9'>",
             f"<line x1='20' y1='{y0}' x2='{width - 20}' y2='{y0}' stroke='black'/>"]
    for j in range(n + 1):
        x = sx(t.v[j])
        parts.append(f"<line x1='{x:.2f}' y1='{y0 - 6}' x2='{x:.2f}' y2='{y0 + 6}' stroke='gray'/>")
    for j in range(n):
        x = sx(t.r[j])
        parts.append(f"<circle cx='{x:.2f}' cy='{y0}' r='2'/>")
        parts.append(f"<text x='{x:.2f}' y='{y0 + 18}' text-anchor='middle'>{t.r[j]}</text>")
    rank = t.rank()
    for name, ids in sorted(t.holds):
        if len(ids) != 2 or ids[0] == ids[1]:
            continue
        a, b = rank[ids[0]], rank[ids[1]]
        if a >= n or b >= n or a > b:
            continue
        xa, xb = sx(t.r[a]), sx(t.r[b])
        h = min(200, abs(xb - xa) / 2)
        parts.append(f"<path d='M {xa:.2f} {y0} Q {(xa + xb) / 2:.2f} {y0 - h:.2f} {xb:.2f} {y0}' "
                     "fill='none' stroke='steelblue' stroke-width='0.6'/>")
    parts.append(f"<text x='20' y='14'>stage {t.stage}, {t.size} positions</text>")
    parts.append("</svg>")
    return "\n".join(parts)
