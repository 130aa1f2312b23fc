"""Incremental consistency checking and canonical type completion.

Universal matrices are compiled to index form once. A partially decided
diagram over integer element ids is then checked one atom at a time: when an
atom is decided, only instantiations that mention it can change status, so
only those are re-examined.

An instantiation violates a matrix when every disjunct contains a literal that
is definitely false. Undecided atoms never count as false, so the check
answers "consistent so far" and is monotone in the decided atoms.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .logic import QfFormula, Signature

Val = Callable[[str, tuple], Optional[bool]]
Cands = Callable[[str, int, tuple], Optional[Iterable[int]]]


class SearchBudgetExceeded(RuntimeError):
    pass


class CompiledMatrix:
    """A DNF matrix with literals rewritten to variable indices."""

    __slots__ = ("formula", "nvars", "disjuncts", "occurrences", "required", "_plans")

    def __init__(self, formula: QfFormula):
        self.formula = formula
        index = {v: i for i, v in enumerate(formula.vars)}
        self.nvars = len(formula.vars)
        self.disjuncts = [
            tuple((l.name, tuple(index[a] for a in l.args), l.positive) for l in conj)
            for conj in formula.dnf
        ]
        occ: dict = {}
        for conj in self.disjuncts:
            for name, args, positive in conj:
                if name != "=":
                    occ.setdefault(name, set()).add(args)
                    occ.setdefault((name, positive), set()).add(args)
        self.occurrences = {n: sorted(s) for n, s in occ.items()}
        # one-literal disjuncts narrow the search: ~R(..) must be true, x != y needs x = y
        self.required = [conj[0] for conj in self.disjuncts
                         if len(conj) == 1 and not conj[0][2]]
        self._plans: dict = {}

    def violated(self, sigma: Sequence[int], val: Val) -> bool:
        for conj in self.disjuncts:
            dead = False
            for name, args, positive in conj:
                if name == "=":
                    if (sigma[args[0]] == sigma[args[1]]) != positive:
                        dead = True
                        break
                else:
                    v = val(name, tuple(sigma[a] for a in args))
                    if v is not None and v != positive:
                        dead = True
                        break
            if not dead:
                return False
        return True

    def holds(self, sigma: Sequence[int], val: Val) -> bool:
        """Definitely true under a decided diagram (undecided counts as false)."""
        for conj in self.disjuncts:
            ok = True
            for name, args, positive in conj:
                if name == "=":
                    if (sigma[args[0]] == sigma[args[1]]) != positive:
                        ok = False
                        break
                elif val(name, tuple(sigma[a] for a in args)) is not positive:
                    ok = False
                    break
            if ok:
                return True
        return False

    def _filter(self, v: int, have: set):
        """A candidate source for variable ``v`` once ``have`` is bound, or None."""
        for name, args, _ in self.required:
            if args.count(v) != 1 or not set(args) - {v} <= have:
                continue
            if name == "=":
                return ("eq", args[1] if args[0] == v else args[0])
            return ("rel", name, args.index(v), args)
        return None

    def _plan(self, bound: tuple):
        """Binding order for the unbound variables, their candidate filters, and
        the disjuncts each step completes."""
        plan = self._plans.get(bound)
        if plan is not None:
            return plan
        have = set(bound)
        dvars = [set(a for _, args, _ in conj for a in args) for conj in self.disjuncts]
        free = [i for i in range(self.nvars) if i not in have]
        order, done, filters = [], [], []
        pending = set(range(len(self.disjuncts)))
        first = [d for d in pending if dvars[d] <= have]
        pending -= set(first)
        while free:
            # prefer a variable with a candidate filter, then one completing many disjuncts
            best = max(free, key=lambda v: (self._filter(v, have) is not None,
                                            sum(1 for d in pending if dvars[d] <= have | {v}),
                                            sum(1 for d in pending if v in dvars[d]), -v))
            filters.append(self._filter(best, have))
            free.remove(best)
            have.add(best)
            order.append(best)
            now = [d for d in pending if dvars[d] <= have]
            pending -= set(now)
            done.append(now)
        plan = (first, order, done, filters)
        self._plans[bound] = plan
        return plan

    def _dead(self, d: int, sigma, val) -> bool:
        for name, args, positive in self.disjuncts[d]:
            if name == "=":
                if (sigma[args[0]] == sigma[args[1]]) != positive:
                    return True
            else:
                v = val(name, tuple(sigma[a] for a in args))
                if v is not None and v != positive:
                    return True
        return False

    def search(self, sigma: list, domain: Sequence[int], val: Val,
               anchor: Optional[int] = None, cands: Optional[Cands] = None) -> Optional[tuple]:
        """A violated completion of the partial assignment ``sigma``, if any.

        Variables are bound one at a time; a branch is cut as soon as some
        disjunct with all its variables bound is not dead. ``cands(name, i,
        rest)`` may list the elements ``e`` (all in ``domain``) making the atom
        with ``e`` at place ``i`` definitely true, or return None.
        """
        bound = tuple(i for i, s in enumerate(sigma) if s is not None)
        first, order, done, filters = self._plan(bound)
        for d in first:
            if not self._dead(d, sigma, val):
                return None
        need = anchor is not None and anchor not in sigma
        n = len(order)
        if n == 0:
            return None if need else tuple(sigma)

        def pool(level):
            f = filters[level]
            if f is None:
                return domain
            if f[0] == "eq":
                return (sigma[f[1]],)
            if cands is None:
                return domain
            _, name, i, args = f
            rest = tuple(sigma[a] for k, a in enumerate(args) if k != i)
            got = cands(name, i, rest)
            return domain if got is None else got

        def rec(level, used):
            var = order[level]
            last = level == n - 1
            for a in pool(level):
                u = used or a == anchor
                if last and need and not u:
                    continue
                sigma[var] = a
                if all(self._dead(d, sigma, val) for d in done[level]):
                    if last:
                        return tuple(sigma)
                    r = rec(level + 1, u)
                    if r is not None:
                        return r
            sigma[var] = None
            return None

        out = rec(0, False)
        for v in order:
            sigma[v] = None
        return out


def _unify(pattern: tuple, ids: tuple, nvars: int):
    sigma = [None] * nvars
    for p, a in zip(pattern, ids):
        if sigma[p] is None:
            sigma[p] = a
        elif sigma[p] != a:
            return None
    return sigma


class Checker:
    """Violation queries for a list of universal matrices."""

    def __init__(self, matrices: Iterable[QfFormula]):
        self.matrices = [CompiledMatrix(m) for m in matrices]
        self.by_relation: dict = {}
        for cm in self.matrices:
            for name in cm.occurrences:
                if isinstance(name, tuple):
                    continue
                self.by_relation.setdefault(name, []).append(cm)

    def violation_with_atom(self, name: str, ids: tuple, domain: Sequence[int], val: Val,
                            anchor: Optional[int] = None,
                            cands: Optional[Cands] = None,
                            value: Optional[bool] = None) -> Optional[tuple]:
        """An instantiation mentioning atom ``name(ids)`` that is violated, if any.

        With ``anchor`` set, only instantiations whose image contains the anchor
        are examined. With ``value`` (the atom's new truth value) only literals
        that the value makes false are followed.
        """
        key = name if value is None else (name, not value)
        for cm in self.by_relation.get(name, ()):
            for pattern in cm.occurrences.get(key, ()):
                sigma = _unify(pattern, ids, cm.nvars)
                if sigma is None:
                    continue
                hit = cm.search(sigma, domain, val, anchor if anchor not in ids else None, cands)
                if hit is not None:
                    return (cm.formula, hit)
        return None

    def full_violation(self, domain: Sequence[int], val: Val,
                       cands: Optional[Cands] = None) -> Optional[tuple]:
        for cm in self.matrices:
            hit = cm.search([None] * cm.nvars, list(domain), val, None, cands)
            if hit is not None:
                return (cm.formula, hit)
        return None


def cross_atoms(signature: Signature, new: int, domain: Sequence[int],
                rank: Mapping[int, int], partner: Optional[int] = None) -> list:
    """Atoms over ``domain`` mentioning ``new`` (and ``partner`` if given), canonically ordered.

    Order is by relation name, then by the tuple of positions (``rank``).
    """
    others = [a for a in domain if a != new and a != partner]
    kinds = ("n", "o") if partner is None else ("n", "p", "o")
    out = []
    for name, arity in sorted(signature.relations):
        tuples = []
        # each position holds new, partner or some other element
        for shape in itertools.product(kinds, repeat=arity):
            if "n" not in shape or (partner is not None and "p" not in shape):
                continue
            pools = [[new] if k == "n" else [partner] if k == "p" else others for k in shape]
            tuples.extend(itertools.product(*pools))
        tuples.sort(key=lambda t: tuple(rank[a] for a in t))
        out.extend((name, t) for t in tuples)
    return out


def complete_new_element(
    checker: Checker,
    base_val: Callable[[str, tuple], bool],
    new: int,
    domain: Sequence[int],
    free_atoms: Sequence[tuple],
    forced_true: frozenset = frozenset(),
    seeds: Sequence[int] = (),
    budget: int = 200_000,
    base_cands: Optional[Cands] = None,
) -> Optional[dict]:
    """Decide the atoms mentioning ``new``: lexicographically least, false first.

    ``base_val`` answers atoms not mentioning ``new`` (a complete diagram).
    Atoms mentioning ``new`` are fixed true if in ``forced_true``, searched if
    in ``free_atoms`` and false otherwise. Instantiations made only of fixed
    atoms are checked first, seeded with ``new`` and each element of
    ``seeds``. Returns the decided free atoms (atom -> bool), or None when no
    consistent completion exists. ``base_cands`` is an index of the true
    atoms not mentioning ``new`` (see :meth:`CompiledMatrix.search`).
    """
    cross: dict = {}
    free_set = set(free_atoms)
    domain = list(domain)

    def val(name, ids):
        if new in ids:
            atom = (name, ids)
            v = cross.get(atom)
            if v is not None:
                return v
            if atom in free_set:
                return None
            return atom in forced_true
        return base_val(name, ids)

    # true atoms through new, keyed like the base index
    new_idx: dict = {}

    def mark(atom, on):
        name, ids = atom
        for k, e in enumerate(ids):
            key = (name, k, ids[:k] + ids[k + 1:])
            if on:
                new_idx.setdefault(key, set()).add(e)
            else:
                new_idx[key].discard(e)

    for atom in forced_true:
        mark(atom, True)

    cands = None
    if base_cands is not None:
        def cands(name, k, rest):
            if new in rest:
                return new_idx.get((name, k, rest), ())
            got = base_cands(name, k, rest)
            if val(name, rest[:k] + (new,) + rest[k:]):
                return list(got) + [new]
            return got

    anchors = [new] + [s for s in seeds if s != new]
    for cm in checker.matrices:
        for i in range(cm.nvars):
            sigma = [None] * cm.nvars
            sigma[i] = new
            if len(anchors) == 1:
                if cm.search(sigma, domain, val, None, cands) is not None:
                    return None
                continue
            for other in anchors[1:]:
                for j in range(cm.nvars):
                    if j == i:
                        continue
                    sigma[j] = other
                    if cm.search(sigma, domain, val, None, cands) is not None:
                        return None
                    sigma[j] = None

    todo = list(free_atoms)
    n = len(todo)
    choice = [None] * n
    i = 0
    steps = 0
    while 0 <= i < n:
        steps += 1
        if steps > budget:
            raise SearchBudgetExceeded(f"completion search exceeded {budget} steps")
        atom = todo[i]
        c = choice[i]
        nxt = False if c is None else (True if c is False else None)
        if cross.get(atom):
            mark(atom, False)
        if nxt is None:
            choice[i] = None
            cross.pop(atom, None)
            i -= 1
            continue
        choice[i] = nxt
        cross[atom] = nxt
        if nxt:
            mark(atom, True)
        if checker.violation_with_atom(atom[0], atom[1], domain, val, None, cands, nxt):
            continue
        i += 1
    if i < 0:
        return None
    return cross


def enumerate_completions(checker: Checker, signature: Signature, width: int,
                          fixed: Optional[Mapping[tuple, bool]] = None):
    """Every consistent complete diagram on ``0..width-1`` extending ``fixed``.

    Elements are pairwise distinct. Diagrams come out in lexicographic order,
    false before true, over atoms ordered by (relation name, tuple).
    """
    fixed = dict(fixed or {})
    domain = list(range(width))
    atoms = [(name, t) for name, arity in sorted(signature.relations)
             for t in itertools.product(domain, repeat=arity)]
    cur: dict = {}

    def val(name, ids):
        return cur.get((name, ids))

    for atom, v in fixed.items():
        cur[atom] = v
    for atom in fixed:
        if checker.violation_with_atom(atom[0], atom[1], domain, val):
            return
    if checker.full_violation(domain, val):
        return
    todo = [a for a in atoms if a not in fixed]

    def rec(i):
        if i == len(todo):
            yield dict(cur)
            return
        atom = todo[i]
        for v in (False, True):
            cur[atom] = v
            if checker.violation_with_atom(atom[0], atom[1], domain, val, value=v) is None:
                yield from rec(i + 1)
        del cur[atom]

    yield from rec(0)
