import hashlib
import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from forge.catalog import load
from forge.construction import (ConstructionTrace, DuplicationFailure, InsufficientDepth, TheoryInconsistent,
                                calkin_wilf, check_trace, enlarge, init, rational_at, refine, run, step,
                                to_svg)
from forge.dsl import parse_theory
from forge.theory import pithy_expand

HENSON = load("henson3")
DLO = load("dlo")
RADO = load("rado")

SERIAL = pithy_expand(parse_theory(
    "rel L/2\nforall x: ~L(x,x)\nforall x y z: L(x,y) & L(y,z) -> L(x,z)\nforall x exists y: L(x,y)\n"))
NEIGHBOUR = pithy_expand(parse_theory(
    "rel E/2\nforall x y: E(x,y) -> E(y,x)\nforall x: ~E(x,x)\nforall x exists y: E(x,y)\n"))


def _triangles(t: ConstructionTrace) -> list:
    return [c for c in itertools.combinations(t.order, 3)
            if all(t.val("E", (a, b)) for a, b in itertools.permutations(c, 2))]


# --------------------------------------------------------------------------
# rationals


def test_rational_enumeration_is_injective_and_covers_small_rationals():
    seen = [rational_at(i) for i in range(2000)]
    assert len(set(seen)) == len(seen)
    assert seen[0] == 0
    for q in (Fraction(1), Fraction(-1), Fraction(1, 2), Fraction(-3, 2), Fraction(2, 3)):
        assert q in seen
    assert [calkin_wilf(m) for m in range(1, 6)] == [1, Fraction(1, 2), 2, Fraction(1, 3), Fraction(3, 2)]


# --------------------------------------------------------------------------
# init / refine / enlarge


@pytest.mark.parametrize("theory, rel", [(HENSON, "E"), (DLO, "L")])
def test_init_is_irreflexive_point(theory, rel):
    t = init(theory)
    assert t.r == [0] and t.size == 1
    e = t.order[0]
    assert not t.val(rel, (e, e))


def test_init_inconsistent_theory():
    bad = pithy_expand(parse_theory("rel P/1\nforall x: P(x) & ~P(x)\n"))
    with pytest.raises(TheoryInconsistent):
        init(bad)


def test_refine_outside_extends_right():
    t = refine(init(DLO), 2)
    assert t.r == [0, 2] and t.size == 2
    check_trace(t)


def test_refine_outside_extends_left():
    t = refine(init(DLO), -3)
    assert t.r == [-3, 0]
    check_trace(t)


def test_refine_existing_rational_is_noop():
    t0 = init(DLO)
    t = refine(t0, 0)
    assert t.r == t0.r and t.stage == 1


def test_refine_henson_interior_duplicates_with_non_edge():
    t = refine(init(HENSON), 1)  # 1 lies in (-sqrt2, sqrt2], the interval of 0
    assert t.r == [0, 1]
    a, b = t.order
    assert not t.val("E", (a, b))
    check_trace(t)


def test_refine_duplicate_extends_both_restrictions():
    t = run(HENSON, 8)
    j = 2
    q = t.r[j] - Fraction(1, 10 ** 6)
    assert t.locate(q).index == j
    x = t.order[j]
    u = refine(t, q)
    new = (set(u.order) - set(t.order)).pop()
    others = [e for e in t.order if e != x]
    assert u.sub_type([x] + others) == u.sub_type([new] + others)


def test_equiv_classes_of_two_fails_duplication():
    with pytest.raises(DuplicationFailure) as info:
        run(load("equiv_classes_of(2)"), 10)
    err = info.value
    assert err.stage == 5
    doc = err.to_json()
    assert doc["error"] == "duplication-failure" and doc["type"]


def test_enlarge_serial_order_adds_right_witness():
    (ax,) = SERIAL.genuine_axioms
    t = enlarge(init(SERIAL), ax)
    assert t.size == 2 and t.r[0] == 0 and t.r[1] > t.v[1]
    a, b = t.order
    assert t.val("L", (a, b)) and not t.val("L", (b, a))
    check_trace(t)


def test_enlarge_neighbour_adds_adjacent_witness():
    (ax,) = NEIGHBOUR.genuine_axioms
    t = enlarge(init(NEIGHBOUR), ax)
    a, b = t.order
    assert t.val("E", (a, b)) and t.val("E", (b, a))
    assert t.witness_log[-1]["witness"] == b


def test_enlarge_with_dummy_axiom_changes_nothing():
    dummy = next(a for a in HENSON.pithy_axioms if a.dummy)
    t0 = run(HENSON, 4)
    t = enlarge(t0, dummy)
    assert t.r == t0.r and t.holds == t0.holds


def test_enlarge_skips_internally_witnessed_tuples():
    (ax,) = SERIAL.genuine_axioms
    t = enlarge(init(SERIAL), ax)
    t2 = enlarge(t, ax)
    # only the new top element lacks a larger element
    assert t2.size == 3


def test_run_zero_stages_is_init():
    assert run(DLO, 0).dumps() == init(DLO).dumps()


def test_henson_trace_is_triangle_free():
    t = run(HENSON, 20)
    check_trace(t)
    assert not _triangles(t)


def test_step_alternates_refinement_and_enlargement():
    t = init(RADO)
    t1 = step(t)
    assert t1.enum_cursor == 1 and t1.axiom_cursor == 0
    t2 = step(t1)
    assert t2.axiom_cursor == 1 and t2.stage == 2


def test_enlarge_below_logs_skipped_stages():
    t = run(RADO, 12, enlarge_below=5)
    skipped = [w for w in t.witness_log if w.get("skipped")]
    assert skipped and t.size < 12 + 5


# --------------------------------------------------------------------------
# location and types


def test_locate_examples():
    t = init(DLO)
    assert t.locate(0).index == 0
    assert t.locate(10).outside
    u = run(DLO, 10)
    for j, q in enumerate(u.r):
        assert u.locate(q).index == j


def test_type_of_tuple_and_permutation():
    t = run(DLO, 10)
    p = t.type_of_tuple([t.r[0]])
    assert p.width == 1
    p01 = t.type_of_tuple([t.r[0], t.r[1]])
    p10 = t.type_of_tuple([t.r[1], t.r[0]])
    assert p01.value("L", (0, 1)) == p10.value("L", (1, 0))
    assert p01.value("L", (1, 0)) == p10.value("L", (0, 1))


def test_type_of_tuple_rejects_shared_interval():
    t = init(DLO)
    with pytest.raises(InsufficientDepth):
        t.type_of_tuple([0, Fraction(1, 2)])


def test_type_of_tuple_rejects_outside():
    with pytest.raises(InsufficientDepth):
        init(DLO).type_of_tuple([100])


# --------------------------------------------------------------------------
# invariants and reproducibility


@settings(max_examples=25, deadline=None)
@given(st.lists(st.fractions(min_value=-20, max_value=20, max_denominator=50), min_size=1, max_size=12))
def test_refinement_keeps_invariants(points):
    t = run(DLO, 6)
    for q in points:
        t = refine(t, q)
        check_trace(t)
    for q in points:
        j = t.locate(q).index
        assert j is not None and t.r[j] == q
    # p stays a strict linear order
    for a, b in itertools.permutations(t.order, 2):
        assert t.val("L", (a, b)) != t.val("L", (b, a))


def test_trace_json_round_trip():
    t = run(RADO, 8)
    u = ConstructionTrace.from_json(t.to_json())
    assert u.dumps() == t.dumps()
    check_trace(u)


@pytest.mark.parametrize("name, stages, size, digest", [
    ("rado", 12, 121, "b4ab72dd"),
    ("henson3", 12, 121, "96ce7f48"),
    ("universal_poset", 12, 27, "bd9d9fba"),
])
def test_trace_regression(name, stages, size, digest):
    t = run(load(name), stages)
    assert t.size == size
    assert hashlib.md5(t.dumps().encode()).hexdigest()[:8] == digest


def test_svg_rendering():
    svg = to_svg(run(RADO, 6))
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
