"""Finite samples of the invariant measure: random points, then the induced structure.

Points that share an interval, or fall outside the trace, are separated by
refining a private copy of the trace at those points themselves, in
increasing order. The copy keeps only the positions the points hit (and the
two end positions), so the extension depends on the point set alone and its
cost does not grow with the base trace.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .construction import ConstructionTrace, InsufficientDepth, refine, run
from .logic import FiniteStructure, structure_from_type
from .measures import MeasureSpec, sample_points
from .theory import PithyTheory

_TRACE_CACHE: dict = {}

# base stage depth per catalog entry: deep enough that most small samples
# separate without refinement, shallow enough to build in about a second
_STAGES = {"dlo": 20, "universal_tournament": 16, "equiv_inf_classes": 16}
DEFAULT_STAGES = 12


def default_stages(name: str) -> int:
    return _STAGES.get(name, DEFAULT_STAGES)


def base_trace(theory: PithyTheory, base_stages: int) -> ConstructionTrace:
    """``run(theory, base_stages)``, memoized per process."""
    key = (json.dumps(theory.to_json(), sort_keys=True), base_stages)
    t = _TRACE_CACHE.get(key)
    if t is None:
        t = run(theory, base_stages)
        _TRACE_CACHE[key] = t
    return t


def _restricted(trace: ConstructionTrace, positions: Sequence[int]) -> ConstructionTrace:
    """The sub-trace on the given positions, each interval widened leftward over gaps."""
    t = ConstructionTrace(trace.theory, trace.checker)
    t.stage = trace.stage
    t.next_id = trace.next_id
    t.enum_cursor = trace.enum_cursor
    t.axiom_cursor = trace.axiom_cursor
    t.order = [trace.order[j] for j in positions]
    keep = set(t.order)
    t.r = [trace.r[j] for j in positions]
    t.v = [trace.v[positions[0]]] + [trace.v[j + 1] for j in positions]
    for e in t.order:
        t.by_elem.setdefault(e, set())
        for atom in trace.by_elem.get(e, ()):
            if all(a in keep for a in atom[1]):
                t._add_atom(atom)
    return t


def separate(trace: ConstructionTrace, points: Sequence[Fraction],
             auto_extend: bool = True) -> tuple:
    """``(trace', ids)``: a trace in which the points are separated, and their element ids."""
    locs = [trace.locate(q) for q in points]
    count: dict = {}
    for loc in locs:
        if not loc.outside:
            count[loc.index] = count.get(loc.index, 0) + 1
    pending = sorted(q for q, loc in zip(points, locs)
                     if loc.outside or (count[loc.index] > 1 and trace.r[loc.index] != q))
    if not pending:
        return trace, [trace.order[loc.index] for loc in locs]
    if not auto_extend:
        raise InsufficientDepth(
            f"insufficient stage depth: {len(pending)} point(s) collide or lie outside, "
            f"first {pending[0]}")
    hit = {loc.index for loc in locs if not loc.outside} | {0, trace.size - 1}
    t = _restricted(trace, sorted(hit))
    for q in pending:
        refine(t, q, in_place=True)
    ids = [t.order[t.locate(q).index] for q in points]
    return t, ids


def induce(trace: ConstructionTrace, points: Sequence, auto_extend: bool = True) -> FiniteStructure:
    """The structure on labels ``0..n-1`` whose label ``i`` is the point ``points[i]``."""
    points = [Fraction(q) for q in points]
    if len(set(points)) != len(points):
        raise ValueError("points must be pairwise distinct")
    t, ids = separate(trace, points, auto_extend)
    return structure_from_type(t.sub_type(ids))


def sample_structure(theory: PithyTheory, n: int, m: MeasureSpec, seed: int, base_stages: int,
                     trace: Optional[ConstructionTrace] = None, draw: int = 0) -> FiniteStructure:
    """One draw from the size-``n`` marginal."""
    t = trace if trace is not None else base_trace(theory, base_stages)
    pts = sample_points(m, n, seed, "draw", draw)
    return induce(t, pts, auto_extend=True)


def sample_many(trace: ConstructionTrace, n: int, m: MeasureSpec, seed: int,
                draws: int, start: int = 0) -> Iterator[FiniteStructure]:
    for d in range(start, start + draws):
        yield induce(trace, sample_points(m, n, seed, "draw", d), auto_extend=True)
