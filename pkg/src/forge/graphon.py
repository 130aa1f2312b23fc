"""Step graphons from graph traces, W-random graphs and distribution comparison."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath
import numpy as np

from .construction import ConstructionTrace
from .logic import FiniteStructure, LogicError, graph
from .measures import MeasureSpec
from .rng import generator


class GraphonError(LogicError):
    pass


@dataclass
class StepGraphon:
    """Parts with masses and a symmetric matrix of edge probabilities.

    ``outside`` lists the parts standing for mass the trace leaves undecided.
    """

    masses: list
    values: list
    outside: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.masses)
        if any(m < 0 for m in self.masses) or abs(sum(self.masses) - 1.0) > 1e-12:
            raise GraphonError("part masses must be non-negative and sum to 1")
        if len(self.values) != k or any(len(row) != k for row in self.values):
            raise GraphonError("values must be a square matrix over the parts")
        for i in range(k):
            for j in range(k):
                if not 0 <= self.values[i][j] <= 1:
                    raise GraphonError("values must lie in [0, 1]")
                if self.values[i][j] != self.values[j][i]:
                    raise GraphonError("values must be symmetric")

    @property
    def random_free(self) -> bool:
        return all(v in (0, 1) for row in self.values for v in row)

    @property
    def unresolved_mass(self) -> float:
        return float(sum(self.masses[i] for i in self.outside))

    @classmethod
    def constant(cls, p: float) -> "StepGraphon":
        return cls([1.0], [[p]])

    def to_json(self) -> dict:
        return {
            "masses": list(self.masses),
            "values": [list(r) for r in self.values],
            "random_free": self.random_free,
            "unresolved_mass": self.unresolved_mass,
            "outside": list(self.outside),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data) -> "StepGraphon":
        return cls([float(x) for x in data["masses"]],
                   [[float(x) if x not in (0, 1) else int(x) for x in r] for r in data["values"]],
                   tuple(data.get("outside", ())), dict(data.get("meta", {})))


def export_step_graphon(trace: ConstructionTrace, m: MeasureSpec) -> StepGraphon:
    """The 0/1 step graphon read off a graph trace, with two outside tail parts.

    Parts are, in order: the left tail, the trace intervals by position, the
    right tail. Pairs touching a tail get value 0.
    """
    sig = trace.signature
    if len(sig.relations) != 1 or sig.relations[0][1] != 2 or sig.functions:
        raise GraphonError("graphon export needs a signature with a single binary relation")
    name = sig.relations[0][0]
    if not trace.v:
        raise GraphonError("empty trace")
    with mpmath.workprec(m.bits + 40):
        cuts = [mpmath.mpf(0)] + [m.cdf(b) for b in trace.v] + [mpmath.mpf(1)]
        masses = [float(cuts[i + 1] - cuts[i]) for i in range(len(cuts) - 1)]
    k = len(masses)
    values = [[0] * k for _ in range(k)]
    for a, ea in enumerate(trace.order):
        for b, eb in enumerate(trace.order):
            x = trace.val(name, (ea, eb))
            if x != trace.val(name, (eb, ea)):
                raise GraphonError(f"relation {name} is not symmetric on the trace")
            values[a + 1][b + 1] = int(x)
    return StepGraphon(masses, values, (0, k - 1),
                       {"stage": trace.stage, "measure": m.to_json(), "relation": name})


def w_random(W: StepGraphon, n: int, seed: int, draw: int = 0) -> FiniteStructure:
    """A W-random graph on ``n`` labels."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = generator(seed, "w_random", draw)
    return _edges(W, n, rng, _parts(W, n, rng))


def _parts(W: StepGraphon, n: int, rng) -> np.ndarray:
    p = np.asarray(W.masses, dtype=float)
    return rng.choice(len(p), size=n, p=p / p.sum())


def _edges(W: StepGraphon, n: int, rng, parts) -> FiniteStructure:
    coins = rng.random(n * (n - 1) // 2)
    return graph(n, [(a, b) for c, (a, b) in zip(coins, itertools.combinations(range(n), 2))
                     if c < W.values[parts[a]][parts[b]]])


def erdos_renyi(n: int, p: float, seed: int, draw: int = 0) -> FiniteStructure:
    rng = generator(seed, "er", draw)
    coins = rng.random(n * (n - 1) // 2)
    return graph(n, [e for c, e in zip(coins, itertools.combinations(range(n), 2)) if c < p])


def graph_key(s: FiniteStructure) -> tuple:
    """Edge set of a labeled graph as sorted pairs ``i < j``."""
    name = s.signature.relations[0][0]
    return tuple(sorted((a, b) for a, b in s.relations[name] if a < b))


@dataclass
class CompareReport:
    n: int
    draws: int
    tv: float
    counts_a: dict
    counts_b: dict
    rejected_a: int = 0
    rejected_b: int = 0

    def to_json(self) -> dict:
        cells = sorted(set(self.counts_a) | set(self.counts_b))
        return {
            "n": self.n,
            "draws": self.draws,
            "tv": self.tv,
            "rejected_a": self.rejected_a,
            "rejected_b": self.rejected_b,
            "cells": [{"edges": [list(e) for e in c], "a": self.counts_a.get(c, 0),
                       "b": self.counts_b.get(c, 0)} for c in cells],
        }


def _collect(gen: Callable[[int], Optional[FiniteStructure]], draws: int, max_tries: int):
    counts, i, rejected = Counter(), 0, 0
    while i - rejected < draws:
        if i >= max_tries:
            raise GraphonError(f"only {i - rejected} of {draws} draws accepted "
                               f"after {max_tries} tries")
        s = gen(i)
        i += 1
        if s is None:
            rejected += 1
            continue
        counts[graph_key(s)] += 1
    return counts, rejected


def distribution_compare(gen_a: Callable[[int], Optional[FiniteStructure]],
                         gen_b: Callable[[int], Optional[FiniteStructure]],
                         n: int, draws: int) -> CompareReport:
    """Total variation between the empirical labeled-graph laws of two generators.

    A generator maps a draw index to a graph on ``n`` labels, or to None when
    that draw is rejected (conditioning); rejected draws are replaced.
    """
    if not 1 <= n <= 5:
        raise ValueError("distribution_compare enumerates graphs on at most 5 labels")
    ca, ra = _collect(gen_a, draws, 20 * draws)
    cb, rb = _collect(gen_b, draws, 20 * draws)
    cells = set(ca) | set(cb)
    tv = 0.5 * sum(abs(ca.get(c, 0) - cb.get(c, 0)) for c in cells) / draws
    return CompareReport(n, draws, tv, dict(ca), dict(cb), ra, rb)


def interior_sampler(trace: ConstructionTrace, n: int, m: MeasureSpec, seed: int):
    """Draw generator for the trace's sampler, conditioned on every point being interior."""
    from .measures import sample_points
    from .sampler import induce

    def gen(i: int):
        pts = sample_points(m, n, seed, "draw", i)
        if any(trace.locate(q).outside for q in pts):
            return None
        return induce(trace, pts)
    return gen


def interior_w_random(W: StepGraphon, n: int, seed: int):
    """Draw generator for ``w_random`` conditioned on no label landing in an outside part."""
    outside = set(W.outside)

    def gen(i: int):
        rng = generator(seed, "w_random", i)
        parts = _parts(W, n, rng)
        if any(int(a) in outside for a in parts):
            return None
        return _edges(W, n, rng, parts)
    return gen
