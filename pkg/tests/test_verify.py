import itertools
import xml.etree.ElementTree as ET
from collections import Counter

import pytest

from forge.catalog import load
from forge.graphon import erdos_renyi
from forge.logic import FiniteStructure, graph
from forge.measures import MeasureSpec
from forge.sampler import base_trace, default_stages, sample_many
from forge.verify import (ALPHA, VerificationReport, axiom_satisfaction, exchangeability_test,
                          forbidden_check, function_violations, goodness_of_fit, has_witness,
                          monotone_within_ci, run_suite, satisfaction_curves, structure_key,
                          symmetrization_chi2, to_junit, wilson)

DLO = load("dlo")
RADO = load("rado")
HENSON = load("henson3")
QMIN = load("q_min_semigroup")
CAUCHY = MeasureSpec()


def order_key(perm):
    """structure_key of the linear order whose i-th smallest label is perm[i]."""
    return ((tuple(sorted((perm[i], perm[j]) for i in range(3) for j in range(i + 1, 3)))),)


def density_axiom(theory):
    return next(a for a in theory.genuine_axioms
                if a.premise_width == 2 and "L(x1,w) & L(w,x0)" in a.matrix.to_text())


# --------------------------------------------------------------------------
# statistics


def test_uniform_counts_pass_symmetrization():
    counts = Counter({order_key(p): 1000 for p in itertools.permutations(range(3))})
    st = symmetrization_chi2(counts, 3)
    assert st["chi2"] == 0 and st["p_value"] == 1.0 and st["df"] == 5


def test_skewed_counts_fail_symmetrization():
    counts = Counter({order_key(p): 1000 for p in itertools.permutations(range(3))})
    counts[order_key((0, 1, 2))] = 1400
    assert symmetrization_chi2(counts, 3)["p_value"] < ALPHA


def test_goodness_of_fit_against_exact_law():
    probs = {order_key(p): 1 / 6 for p in itertools.permutations(range(3))}
    fair = Counter({k: 500 for k in probs})
    assert goodness_of_fit(fair, probs)["p_value"] == 1.0
    fair[((),)] = 1
    assert goodness_of_fit(fair, probs)["p_value"] == 0.0


def test_wilson_interval():
    lo, hi = wilson(50, 100)
    assert lo < 0.5 < hi and hi - lo < 0.2
    assert wilson(0, 0) == (0.0, 1.0)
    assert wilson(100, 100)[1] == 1.0


def test_monotone_within_ci():
    up = [{"ci": [0.1, 0.3]}, {"ci": [0.2, 0.4]}, {"ci": [0.5, 0.7]}]
    assert monotone_within_ci(up)
    assert monotone_within_ci([{"ci": [0.5, 0.7]}, {"ci": [0.45, 0.6]}])
    assert not monotone_within_ci([{"ci": [0.5, 0.7]}, {"ci": [0.1, 0.3]}])


# --------------------------------------------------------------------------
# exchangeability


def test_dlo_exchangeability_and_exact_oracle():
    rep = exchangeability_test(DLO, 3, 3000, 1)
    assert rep.verdict == "PASS"
    counts = Counter()
    for cell, c in rep.details["counts"]:
        counts[tuple(tuple(map(tuple, r)) for r in cell)] = c
    probs = {order_key(p): 1 / 6 for p in itertools.permutations(range(3))}
    assert goodness_of_fit(counts, probs)["p_value"] > ALPHA


def test_henson_exchangeability():
    assert exchangeability_test(HENSON, 3, 3000, 2).verdict == "PASS"


def test_non_duplicating_theory_is_skipped():
    rep = exchangeability_test(load("equiv_classes_of(2)"), 3, 100, 1)
    assert rep.verdict == "SKIPPED" and rep.details["counterexample"]


def test_broken_sampler_is_caught():
    def isolate_zero(i):
        s = erdos_renyi(3, 0.5, 4, i)
        return graph(3, [(a, b) for a, b in s.relations["E"] if a < b and 0 not in (a, b)])
    rep = exchangeability_test(RADO, 3, 3000, 4, generator=isolate_zero)
    assert rep.verdict == "FAIL"


def test_exchangeability_size_limit():
    with pytest.raises(ValueError):
        exchangeability_test(DLO, 5, 10, 1)


# --------------------------------------------------------------------------
# extension axioms


def test_dummy_axiom_rate_is_one():
    dummy = next(a for a in HENSON.pithy_axioms if a.dummy)
    rep = axiom_satisfaction(HENSON, dummy, [3, 6], 50, 1)
    assert all(pt["rate"] == 1.0 for pt in rep.statistic["curve"])


def test_dlo_density_at_fifty():
    rep = axiom_satisfaction(DLO, density_axiom(DLO), [50], 200, 3)
    (pt,) = rep.statistic["curve"]
    assert pt["rate"] >= 0.95 and rep.verdict == "PASS"


def test_rado_common_neighbour_curve_is_monotone():
    ax = next(a for a in RADO.genuine_axioms if a.premise_width == 2
              and "w & E(x0,w) & E(x1,w)" in a.matrix.to_text() and "| E(x0,x1)" in a.matrix.to_text())
    rep = axiom_satisfaction(RADO, ax, [5, 10, 20, 50], 150, 5)
    assert rep.statistic["monotone_within_ci"]


def test_shared_curves_match_single_curves():
    axes = DLO.genuine_axioms[:2]
    shared = satisfaction_curves(DLO, axes, [4, 8], 60, 9)
    single = [axiom_satisfaction(DLO, a, [4, 8], 60, 9) for a in axes]
    assert [r.statistic for r in shared] == [r.statistic for r in single]


def test_has_witness_internal_and_external():
    s = graph(3, [(0, 2), (1, 2)])
    common = next(a for a in RADO.genuine_axioms if a.premise_width == 2
                  and "w & E(x0,w) & E(x1,w)" in a.matrix.to_text() and "| E(x0,x1)" in a.matrix.to_text())
    assert has_witness(s, common, (0, 1))
    assert not has_witness(graph(3, [(0, 2)]), common, (0, 1))


# --------------------------------------------------------------------------
# universal part


def test_henson_samples_have_no_violations():
    t = base_trace(HENSON, default_stages("henson3"))
    rep = forbidden_check(sample_many(t, 15, CAUCHY, 1, 40), HENSON)
    assert rep.verdict == "PASS" and rep.statistic["violations"] == 0


def test_injected_triangle_is_reported():
    rep = forbidden_check([graph(3, [(0, 1), (1, 2), (0, 2)])], HENSON)
    assert rep.verdict == "FAIL" and rep.statistic["violations"] == 1


def test_q_min_samples_are_semilattices():
    t = base_trace(QMIN, default_stages("q_min_semigroup"))
    rep = forbidden_check(sample_many(t, 8, CAUCHY, 2, 20), QMIN,
                          ("commutative", "associative", "idempotent"))
    assert rep.verdict == "PASS"


def test_function_violations_detects_bad_tables():
    sig = QMIN.signature
    partial = FiniteStructure(sig, 2, {"min*": {(0, 0, 0), (0, 1, 0), (1, 0, 0)}})
    assert ("total", (1, 1)) in function_violations(partial, "min*")
    maxlike = FiniteStructure(sig, 2, {"min*": {(0, 0, 1), (0, 1, 0), (1, 0, 1), (1, 1, 1)}})
    kinds = {k for k, _ in function_violations(maxlike, "min*", ("commutative", "idempotent"))}
    assert kinds == {"commutative", "idempotent"}


# --------------------------------------------------------------------------
# reports


def test_junit_output():
    reps = [VerificationReport("a", "t1", 1, {}, 0.1, "PASS", [1]),
            VerificationReport("b", "t2", 1, {}, 0.1, "FAIL", [1]),
            VerificationReport("c", "t3", 0, {}, 0.1, "SKIPPED", [1], {"reason": "r"})]
    root = ET.fromstring(to_junit(reps))
    assert root.get("tests") == "3" and root.get("failures") == "1" and root.get("skipped") == "1"


def test_structure_key_is_label_sensitive():
    assert structure_key(graph(3, [(0, 1)])) != structure_key(graph(3, [(1, 2)]))


def test_quick_suite():
    reps = run_suite("quick", 7)
    assert all(r.verdict == "PASS" for r in reps)
    tested = {r.theory for r in reps if r.test == "forbidden_check"}
    assert "q_min_semigroup" in tested and "equiv_classes_of(2)" not in tested
