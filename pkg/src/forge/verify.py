"""Statistical and exact test batteries with reproducible reports."""

from __future__ import annotations

import itertools
import math
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .closure import check_duplication
from .construction import ConstructionTrace
from .logic import FiniteStructure, eval_qf, satisfies_universal
from .measures import MeasureSpec
from .sampler import base_trace, default_stages, sample_many
from .theory import PithyAxiom, PithyTheory

ALPHA = 1e-3
MIN_EXPECTED = 5.0


@dataclass
class VerificationReport:
    theory: str
    test: str
    draws: int
    statistic: dict
    threshold: float
    verdict: str
    seeds: list
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_json(self) -> dict:
        return {
            "theory": self.theory,
            "test": self.test,
            "draws": self.draws,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "seeds": list(self.seeds),
            "details": self.details,
        }


def structure_key(s: FiniteStructure) -> tuple:
    return tuple(tuple(sorted(s.relations[name])) for name, _ in s.signature.relations)


def _permute_key(key: tuple, perm: Sequence[int]) -> tuple:
    return tuple(tuple(sorted(tuple(perm[a] for a in t) for t in rel)) for rel in key)


# --------------------------------------------------------------------------
# exchangeability


def symmetrization_chi2(counts: Counter, n: int) -> dict:
    """Pearson statistic of the counts against their average over label permutations.

    Cells sharing an orbit have the same expected count, the orbit mean.
    Orbits whose expected count per cell is below ``MIN_EXPECTED`` are merged
    into one cell and contribute nothing.
    """
    perms = list(itertools.permutations(range(n)))
    seen, chi2, df, merged = set(), 0.0, 0, 0
    for key in counts:
        if key in seen:
            continue
        orbit = {_permute_key(key, p) for p in perms}
        seen |= orbit
        total = sum(counts.get(k, 0) for k in orbit)
        expected = total / len(orbit)
        if len(orbit) == 1:
            continue
        if expected < MIN_EXPECTED:
            merged += 1
            continue
        chi2 += sum((counts.get(k, 0) - expected) ** 2 / expected for k in orbit)
        df += len(orbit) - 1
    p = float(stats.chi2.sf(chi2, df)) if df else 1.0
    return {"chi2": chi2, "df": df, "p_value": p, "merged_orbits": merged, "cells": len(seen)}


def goodness_of_fit(counts: Counter, probs: dict) -> dict:
    """Pearson test of counts against exact cell probabilities (cells below 5 expected merged)."""
    total = sum(counts.values())
    extra = set(counts) - set(probs)
    if extra:
        return {"chi2": math.inf, "df": 0, "p_value": 0.0, "unexpected_cells": len(extra)}
    chi2, df, small_o, small_e = 0.0, -1, 0, 0.0
    for k, pr in probs.items():
        e = total * pr
        if e < MIN_EXPECTED:
            small_o += counts.get(k, 0)
            small_e += e
            continue
        chi2 += (counts.get(k, 0) - e) ** 2 / e
        df += 1
    if small_e > 0:
        chi2 += (small_o - small_e) ** 2 / small_e
        df += 1
    p = float(stats.chi2.sf(chi2, df)) if df > 0 else 1.0
    return {"chi2": chi2, "df": df, "p_value": p}


def _draws_from(gen: Callable[[int], FiniteStructure], draws: int, start: int = 0) -> Counter:
    return Counter(structure_key(gen(i)) for i in range(start, start + draws))


def exchangeability_test(theory: PithyTheory, n: int, draws: int, seed: int, *,
                         base_stages: Optional[int] = None, measure: MeasureSpec = MeasureSpec(),
                         alpha: float = ALPHA, tests: int = 1,
                         generator: Optional[Callable[[int], FiniteStructure]] = None,
                         trace: Optional[ConstructionTrace] = None) -> VerificationReport:
    """Chi-square of the labeled size-``n`` marginal against its symmetrization.

    ``tests`` is the Bonferroni family size; the p-value must exceed
    ``alpha / tests``. ``generator`` replaces the sampler (controls).
    """
    if not 1 <= n <= 4:
        raise ValueError("exchangeability_test needs 1 <= n <= 4")
    threshold = alpha / tests
    stages = base_stages if base_stages is not None else default_stages(theory.name)
    if generator is None:
        dup = check_duplication(theory, 3, keep_witnesses=False)
        if not dup.passed:
            return VerificationReport(
                theory.name, f"exchangeability_n{n}", 0, {}, threshold, "SKIPPED", [seed],
                {"reason": "theory lacks duplication of quantifier-free types, so no "
                           "invariant measure concentrates on its limit",
                 "counterexample": dup.counterexample.to_json()})
        t = trace or base_trace(theory, stages)
        counts = Counter(structure_key(s) for s in sample_many(t, n, measure, seed, draws))
    else:
        counts = _draws_from(generator, draws)
    st = symmetrization_chi2(counts, n)
    verdict = "PASS" if st["p_value"] > threshold else "FAIL"
    return VerificationReport(
        theory.name, f"exchangeability_n{n}", draws, st, threshold, verdict, [seed],
        {"base_stages": stages, "measure": measure.to_json(),
         "counts": sorted([[list(map(list, r)) for r in k], c] for k, c in counts.items())})


# --------------------------------------------------------------------------
# extension axioms


def wilson(k: int, n: int, z: float = 1.959963984540054) -> tuple:
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return (max(0.0, mid - half), min(1.0, mid + half))


def has_witness(s: FiniteStructure, axiom: PithyAxiom, tup: Sequence[int]) -> bool:
    """Does some label (inside the tuple or not) witness the axiom for ``tup``?"""
    xs = axiom.matrix.vars[:-1]
    env = dict(zip(xs, tup))
    w = axiom.witness
    for b in range(s.size):
        env[w] = b
        if eval_qf(axiom.matrix, s, env):
            return True
    return False


def monotone_within_ci(curve: list) -> bool:
    """No point lies significantly below an earlier one (95% intervals disjoint)."""
    best_lo = -1.0
    for pt in curve:
        if pt["ci"][1] < best_lo:
            return False
        best_lo = max(best_lo, pt["ci"][0])
    return True


def axiom_satisfaction(theory: PithyTheory, axiom: PithyAxiom, n_list: Sequence[int],
                       draws, seed: int, *, target: float = 0.95,
                       base_stages: Optional[int] = None, measure: MeasureSpec = MeasureSpec(),
                       stop_at_target: bool = False,
                       trace: Optional[ConstructionTrace] = None) -> VerificationReport:
    """Rate at which labels ``0..k-1`` have a witness, per ``n``.

    ``draws`` is a count or a map from ``n`` to a count. With
    ``stop_at_target`` the curve ends at the first ``n`` whose rate reaches
    the target. PASS needs the target reached and a curve monotone within CI.
    """
    return satisfaction_curves(theory, [axiom], n_list, draws, seed, target=target,
                               base_stages=base_stages, measure=measure,
                               stop_at_target=stop_at_target, trace=trace)[0]


def satisfaction_curves(theory: PithyTheory, axioms: Sequence[PithyAxiom], n_list: Sequence[int],
                        draws, seed: int, *, target: float = 0.95,
                        base_stages: Optional[int] = None, measure: MeasureSpec = MeasureSpec(),
                        stop_at_target: bool = False,
                        trace: Optional[ConstructionTrace] = None) -> list:
    """:func:`axiom_satisfaction` for several axioms, scored on one shared set of samples.

    With ``stop_at_target`` each curve ends on its own; sampling stops once
    every curve has ended.
    """
    stages = base_stages if base_stages is not None else default_stages(theory.name)
    t = trace or base_trace(theory, stages)
    curves = [[] for _ in axioms]
    open_ = set(range(len(axioms)))
    for n in n_list:
        live = [i for i in sorted(open_) if n >= max(axioms[i].premise_width, 1)]
        if not live:
            continue
        d = draws[n] if isinstance(draws, dict) else draws
        hits = dict.fromkeys(live, 0)
        for s in sample_many(t, n, measure, seed, d):
            for i in live:
                hits[i] += has_witness(s, axioms[i], tuple(range(axioms[i].premise_width)))
        for i in live:
            curves[i].append({"n": n, "draws": d, "rate": hits[i] / d,
                              "ci": list(wilson(hits[i], d))})
            if stop_at_target and hits[i] / d >= target:
                open_.discard(i)
        if not open_:
            break
    reports = []
    for axiom, curve in zip(axioms, curves):
        reached = any(pt["rate"] >= target for pt in curve)
        mono = monotone_within_ci(curve)
        reports.append(VerificationReport(
            theory.name, f"axiom_satisfaction[{axiom.source or axiom.matrix.to_text()}]",
            sum(pt["draws"] for pt in curve),
            {"curve": curve, "max_rate": max((pt["rate"] for pt in curve), default=0.0),
             "monotone_within_ci": mono},
            target, "PASS" if reached and mono else "FAIL", [seed],
            {"axiom": axiom.matrix.to_text(), "base_stages": stages}))
    return reports


# --------------------------------------------------------------------------
# universal part


def function_violations(s: FiniteStructure, name: str, laws: Iterable[str] = ()) -> list:
    """Literal checks on a graph relation ``f*(x.., y)``: total, functional, and ``laws``.

    ``laws`` may hold ``commutative``, ``associative`` and ``idempotent`` (binary only).
    """
    arity = s.signature.arity(name) - 1
    table: dict = {}
    bad = []
    for t in s.relations[name]:
        table.setdefault(t[:-1], []).append(t[-1])
    for args in itertools.product(range(s.size), repeat=arity):
        vals = table.get(args, [])
        if len(vals) != 1:
            bad.append(("total" if not vals else "functional", args))
    if bad:
        return bad
    laws = set(laws)
    if laws and arity != 2:
        raise ValueError("algebraic laws are checked for binary functions only")
    if not laws:
        return bad
    f = np.zeros((s.size, s.size), dtype=np.int64)
    for (a, b), v in table.items():
        f[a, b] = v[0]
    dom = np.arange(s.size)

    def where(kind, mask):
        return [(kind, tuple(int(i) for i in t)) for t in np.argwhere(mask)]
    if "idempotent" in laws:
        bad += where("idempotent", f[dom, dom] != dom)
    if "commutative" in laws:
        bad += where("commutative", f != f.T)
    if "associative" in laws:
        # f(f(x, y), z) against f(x, f(y, z)) over axes (x, y, z)
        bad += where("associative", f[f[:, :, None], dom] != f[dom[:, None, None], f])
    return bad


def forbidden_check(samples: Iterable[FiniteStructure], theory: PithyTheory,
                    laws: Iterable[str] = (), seeds: Sequence[int] = ()) -> VerificationReport:
    """Count universal-axiom violations over the samples; PASS iff there are none.

    Relations named like a function graph (``f*``) are also checked to be
    total and functional, plus any requested ``laws``.
    """
    laws = tuple(laws)
    star = [n for n, _ in theory.signature.relations if n.endswith("*")]
    violations, count, examples = 0, 0, []
    for idx, s in enumerate(samples):
        count += 1
        for i, m in enumerate(theory.universal):
            if not satisfies_universal(s, m):
                violations += 1
                if len(examples) < 5:
                    examples.append({"sample": idx, "axiom": i, "matrix": m.to_text()})
        for name in star:
            bad = function_violations(s, name, laws)
            violations += len(bad)
            for kind, args in bad[:max(0, 5 - len(examples))]:
                examples.append({"sample": idx, "function": name, "law": kind, "args": list(args)})
    return VerificationReport(
        theory.name, "forbidden_check", count, {"violations": violations}, 0,
        "PASS" if violations == 0 else "FAIL", list(seeds), {"examples": examples, "laws": list(laws)})


# --------------------------------------------------------------------------
# reports


def to_junit(reports: Sequence[VerificationReport], suite: str = "forge-verify") -> str:
    root = ET.Element("testsuite", name=suite, tests=str(len(reports)),
                      failures=str(sum(r.verdict == "FAIL" for r in reports)),
                      skipped=str(sum(r.verdict == "SKIPPED" for r in reports)))
    for r in reports:
        case = ET.SubElement(root, "testcase", classname=r.theory, name=r.test)
        if r.verdict == "FAIL":
            ET.SubElement(case, "failure", message=f"statistic {r.statistic} vs {r.threshold}")
        elif r.verdict == "SKIPPED":
            ET.SubElement(case, "skipped", message=str(r.details.get("reason", "")))
    return ET.tostring(root, encoding="unicode")


SUITES = {
    # name: (exchangeability draws, forbidden draws, forbidden n)
    "quick": (3000, 50, 12),
    "full": (60000, 1000, 30),
}

EXCHANGEABILITY_THEORIES = ("dlo", "rado", "henson3", "universal_poset",
                            "universal_tournament", "equiv_inf_classes")


def run_suite(suite: str, seed: int, measure: MeasureSpec = MeasureSpec()) -> list:
    """Exchangeability and universal-constraint batteries over the catalog."""
    from .catalog import catalog_entries, load
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; use one of {sorted(SUITES)}")
    ex_draws, fb_draws, fb_n = SUITES[suite]
    reports = []
    for name in EXCHANGEABILITY_THEORIES:
        reports.append(exchangeability_test(load(name), 3, ex_draws, seed, measure=measure,
                                            tests=len(EXCHANGEABILITY_THEORIES)))
    for name in catalog_entries():
        th = load(name)
        if not check_duplication(th, 3, keep_witnesses=False).passed:
            continue
        laws = ("commutative", "associative", "idempotent") if name == "q_min_semigroup" else ()
        t = base_trace(th, default_stages(name))
        reports.append(forbidden_check(sample_many(t, fb_n, measure, seed, fb_draws), th,
                                       laws, [seed]))
    return reports


__all__ = [
    "VerificationReport", "symmetrization_chi2", "goodness_of_fit", "exchangeability_test",
    "wilson", "has_witness", "monotone_within_ci", "axiom_satisfaction", "satisfaction_curves",
    "function_violations", "forbidden_check", "to_junit", "run_suite"
]
