"""Acceptance battery: one PASS/FAIL line per criterion, printed even without ``-s``.

Slow (well over ten minutes on one CPU); run with ``pytest tests/test_acceptance.py``.
"""

import itertools
import json
from collections import Counter

import pytest

from forge.catalog import catalog_entries, load
from forge.cli import main
from forge.closure import check_duplication, check_strong_amalgamation, strong_amalgam, verify_amalgam
from forge.construction import DuplicationFailure, run
from forge.graphon import distribution_compare, export_step_graphon, interior_sampler, interior_w_random
from forge.measures import MeasureSpec
from forge.sampler import base_trace, default_stages, sample_many
from forge.theory import AgeOracle
from forge.verify import (ALPHA, exchangeability_test, forbidden_check, goodness_of_fit,
                          satisfaction_curves)

from closure_oracle import compare_all
from formula_corpus import GROUPS, round_trip
from worked_triples import TRIPLES, oracle

pytestmark = pytest.mark.acceptance

CAUCHY = MeasureSpec()
SEED = 20240521
EXCHANGEABLE = ("dlo", "rado", "henson3", "universal_poset", "universal_tournament", "equiv_inf_classes")
STRONG = ("henson3", "dlo", "universal_poset", "universal_tournament", "equiv_inf_classes")
NOT_DUPLICATING = ("equiv_classes_of(2)", "equiv_classes_of(3)", "blowup(dlo,2)")
SAP_ENTRIES = STRONG + ("rado",)


@pytest.fixture
def say(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}", flush=True)
        return ok
    return emit


def _order_key(perm):
    return ((tuple(sorted((perm[i], perm[j]) for i in range(3) for j in range(i + 1, 3)))),)


def _counts(rep) -> Counter:
    return Counter({tuple(tuple(map(tuple, r)) for r in cell): c for cell, c in rep.details["counts"]})


# --------------------------------------------------------------------------


def test_criterion_1_exchangeability(say):
    reps = {name: exchangeability_test(load(name), 3, 60000, SEED, tests=len(EXCHANGEABLE))
            for name in EXCHANGEABLE}
    probs = {_order_key(p): 1 / 6 for p in itertools.permutations(range(3))}
    gof = goodness_of_fit(_counts(reps["dlo"]), probs)
    ok = all(r.verdict == "PASS" for r in reps.values()) and gof["p_value"] > ALPHA
    detail = ", ".join(f"{n} p={r.statistic['p_value']:.3g}" for n, r in reps.items())
    assert say(1, ok, f"{detail}; dlo vs exact 1/6 p={gof['p_value']:.3g} "
                      f"(threshold {ALPHA / len(EXCHANGEABLE):.2g})")


def test_criterion_2_universal_constraints(say):
    reps, skipped = [], []
    for name in catalog_entries():
        th = load(name)
        if not check_duplication(th, 3, keep_witnesses=False).passed:
            skipped.append(name)
            continue
        laws = ("commutative", "associative", "idempotent") if name == "q_min_semigroup" else ()
        t = base_trace(th, default_stages(name))
        reps.append(forbidden_check(sample_many(t, 30, CAUCHY, SEED, 1000), th, laws, [SEED]))
    total = sum(r.statistic["violations"] for r in reps)
    ok = total == 0 and all(r.draws == 1000 for r in reps) and sorted(skipped) == sorted(NOT_DUPLICATING)
    assert say(2, ok, f"{len(reps)} theories x 1000 draws at n=30, {total} violations; "
                      f"no invariant measure (skipped): {', '.join(skipped)}")


def _dlo_density(t):
    return next(a for a in t.genuine_axioms
                if a.premise_width == 2 and "L(x1,w) & L(w,x0)" in a.matrix.to_text())


def _curve_summary(name, reps):
    def label(r):
        return r.test[r.test.index("[") + 1:-1]
    low = [label(r) for r in reps if r.verdict != "PASS"]
    rates = " ".join(f"{label(r)}={r.statistic['max_rate']:.2f}" for r in reps)
    return f"{name} {'PASS' if not low else 'FAIL'} max rates {rates}" + (
        f" (below target or non-monotone: {', '.join(low)})" if low else "")


def test_criterion_3_extension_axioms(say):
    dlo = load("dlo")
    axes = [a for a in dlo.genuine_axioms if a.premise_width <= 2]
    dlo_reps = satisfaction_curves(dlo, axes, [5, 10, 20, 50, 200, 1000], 200, SEED, stop_at_target=True)

    # exact density rate from uniform order patterns: the pair (0, 1) fails only when
    # 0 < 1 are adjacent, probability 1/n
    (dens,) = satisfaction_curves(dlo, [_dlo_density(dlo)], [5, 10, 20], 3000, SEED + 1)
    pts = dens.statistic["curve"]
    err_exact = max(abs(p["rate"] - (1 - 1 / p["n"])) for p in pts)
    err_stated = max(abs(p["rate"] - (1 - 2.0 ** (-(p["n"] - 2) + 1))) for p in pts)

    rado = load("rado")
    axes = [a for a in rado.genuine_axioms if a.premise_width <= 2]
    draws = {5: 200, 10: 200, 20: 200, 50: 100, 100: 60, 300: 30, 1000: 12, 2000: 6}
    rado_reps = satisfaction_curves(rado, axes, list(draws), draws, SEED, stop_at_target=True)

    ok = (all(r.verdict == "PASS" for r in dlo_reps + rado_reps)
          and err_exact <= 0.02 and err_stated <= 0.02)
    assert say(3, ok, "; ".join([
        _curve_summary("dlo", dlo_reps),
        f"dlo density vs 1-1/n max error {err_exact:.3f} "
        f"{'PASS' if err_exact <= 0.02 else 'FAIL'}",
        f"dlo density vs 1-2^(-(n-2)+1) max error {err_stated:.3f} "
        f"{'PASS' if err_stated <= 0.02 else 'FAIL'}",
        _curve_summary("rado", rado_reps)]))


def test_criterion_4_dichotomy(say):
    dup = {n: check_duplication(load(n), 3, keep_witnesses=False) for n in STRONG + NOT_DUPLICATING}
    verdicts = all(dup[n].passed for n in STRONG) and all(
        not dup[n].passed and dup[n].counterexample is not None for n in NOT_DUPLICATING)
    raised = []
    for n in STRONG + NOT_DUPLICATING:
        try:
            run(load(n), 200, enlarge_below=40)
        except DuplicationFailure:
            raised.append(n)
    ok = verdicts and sorted(raised) == sorted(NOT_DUPLICATING)
    assert say(4, ok, f"duplication PASS for {', '.join(n for n in STRONG if dup[n].passed)}; "
                      f"engine raised for {', '.join(raised)}")


def test_criterion_5_closure_oracle(say):
    graphs, checked, bad = compare_all(6, 3)
    assert say(5, not bad, f"{graphs} graphs on 1..6 vertices, {checked} tuples, {len(bad)} mismatches")


def test_criterion_6_strong_amalgamation(say):
    got = {}
    for name, (source, A, B, C, f, g, expected) in TRIPLES.items():
        o = oracle(source)
        am = strong_amalgam(A, B, C, f, g, o)
        got[name] = (am is not None and verify_amalgam(A, B, C, f, g, am, o)) == expected
    reports = {n: check_strong_amalgamation(AgeOracle(load(n)), 4) for n in SAP_ENTRIES}
    ok = all(got.values()) and all(r.passed for r in reports.values())
    assert say(6, ok, f"worked triples {sum(got.values())}/{len(got)}; bound 4: " + ", ".join(
        f"{n} {'PASS' if r.passed else 'FAIL'} ({r.tested})" for n, r in reports.items()))


def test_criterion_7_graphon(say):
    rado = load("rado")
    t = base_trace(rado, default_stages("rado"))
    W = export_step_graphon(t, CAUCHY)
    rep = distribution_compare(interior_sampler(t, 3, CAUCHY, SEED), interior_w_random(W, 3, SEED), 3, 100000)
    frees = {n: export_step_graphon(run(load(n), 12), CAUCHY).random_free for n in ("rado", "henson3")}
    ok = rep.tv < 0.02 and W.random_free and all(frees.values())
    assert say(7, ok, f"TV={rep.tv:.4f} at 1e5 interior draws; random_free for "
                      + ", ".join(n for n, v in frees.items() if v))


def test_criterion_8_relationalization(say):
    checked, bad = 0, 0
    for group in GROUPS:
        c, b = round_trip(group)
        checked, bad = checked + c, bad + len(b)
    assert say(8, bad == 0 and checked > 0, f"{checked} (formula, structure, assignment) checks, {bad} mismatches")


PIPELINE = [
    ["compile", "henson3"],
    ["build", "rado", "--stages", "10"],
    ["trace-dump", "trace.json"],
    ["graphon", "export", "trace.json"],
    ["graphon", "sample", "w.json", "-n", "6", "--draws", "5", "--seed", "4"],
    ["sample", "henson3", "-n", "8", "--draws", "6", "--seed", "3"],
    ["compare", "trace.json", "w.json", "--draws", "2000", "--seed", "2"],
    ["check-dup", "universal_poset"],
    ["check-sap", "dlo", "--bound", "3"],
    ["dcl", "c4.json", "--tuple", "0"],
    ["acl", "c4.json", "--tuple", "0", "--threshold", "2"],
    ["verify", "--suite", "quick", "--seed", "5"],
]

C4 = {"signature": {"relations": [["E", 2]], "functions": []}, "size": 4,
      "relations": {"E": [[0, 1], [1, 0], [1, 2], [2, 1], [2, 3], [3, 2], [3, 0], [0, 3]]}}


def test_criterion_9_determinism(say, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("FORGE_THREADS", raising=False)
    (tmp_path / "c4.json").write_text(json.dumps(C4))
    assert main(["build", "rado", "--stages", "10", "--out", "trace.json"]) == 0
    assert main(["graphon", "export", "trace.json", "--out", "w.json"]) == 0
    capsys.readouterr()
    results = {}
    for i, argv in enumerate(PIPELINE):
        out = f"artifact{i}.json"
        code = main(argv + ["--out", out])
        first = (tmp_path / out).read_bytes()
        main(["replay", out])
        doc = json.loads(capsys.readouterr().out)
        results[" ".join(argv[:2] if argv[0] == "graphon" else argv[:1])] = (
            code in (0, 1) and doc["identical"] and (tmp_path / out).read_bytes() == first)
    bad = [k for k, v in results.items() if not v]
    assert say(9, not bad, f"{len(results) - len(bad)}/{len(results)} artifacts replay byte-identically"
                           + (f"; differing: {', '.join(bad)}" if bad else ""))
