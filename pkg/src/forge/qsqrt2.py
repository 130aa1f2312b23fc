"""Exact numbers a + b*sqrt(2) with rational a, b and b != 0."""

from __future__ import annotations

from fractions import Fraction
from functools import total_ordering

import mpmath


def _sign_a_plus_b_root2(a: Fraction, b: Fraction) -> int:
    """Sign of a + b*sqrt(2), exactly."""
    if b == 0:
        return (a > 0) - (a < 0)
    if a == 0:
        return 1 if b > 0 else -1
    if (a > 0) == (b > 0):
        return 1 if a > 0 else -1
    # opposite signs: compare a^2 with 2 b^2
    d = a * a - 2 * b * b
    if a > 0:
        return 1 if d > 0 else -1
    return -1 if d > 0 else 1


@total_ordering
class Boundary:
    """An irrational interval endpoint in Q[sqrt 2]."""

    __slots__ = ("a", "b", "approx")

    def __init__(self, a, b):
        a, b = Fraction(a), Fraction(b)
        if b == 0:
            raise ValueError("Boundary must be irrational (b != 0)")
        self.a = a
        self.b = b
        self.approx = float(a) + float(b) * 1.4142135623730951

    def cmp(self, other) -> int:
        # floats decide unless the values are within rounding distance
        d = self.approx - (other.approx if isinstance(other, Boundary) else float(other))
        if abs(d) > 1e-9 * (1.0 + abs(self.approx)):
            return 1 if d > 0 else -1
        if isinstance(other, Boundary):
            return _sign_a_plus_b_root2(self.a - other.a, self.b - other.b)
        return _sign_a_plus_b_root2(self.a - Fraction(other), self.b)

    def __eq__(self, other):
        if isinstance(other, (Boundary, int, Fraction)):
            return self.cmp(other) == 0
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, (Boundary, int, Fraction)):
            return self.cmp(other) < 0
        return NotImplemented

    def __hash__(self):
        return hash((self.a, self.b))

    def __repr__(self):
        return f"Boundary({self.a}, {self.b})"

    def mpf(self, prec: int = 128):
        with mpmath.workprec(prec):
            return mpmath.mpf(self.a.numerator) / self.a.denominator + (
                mpmath.mpf(self.b.numerator) / self.b.denominator) * mpmath.sqrt(2)

    def __float__(self):
        return self.approx

    def to_json(self):
        return [str(self.a), str(self.b)]

    @classmethod
    def from_json(cls, data):
        return cls(Fraction(data[0]), Fraction(data[1]))


def between(lo: Fraction, hi: Fraction) -> Boundary:
    """An irrational strictly between two rationals ``lo < hi``.

    The midpoint nudged by ``sqrt(2) * 2^-k`` for the least ``k >= 1`` that
    keeps it below ``hi``.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    if not lo < hi:
        raise ValueError("need lo < hi")
    mid = (lo + hi) / 2
    k = 1
    while True:
        bnd = Boundary(mid, Fraction(1, 2 ** k))
        if bnd < hi:
            return bnd
        k += 1
