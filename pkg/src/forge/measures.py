"""Continuous full-support measures on the line, sampled to exact rationals."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import gmpy2
import mpmath

from .qsqrt2 import Boundary
from .rng import words as raw_words

FAMILIES = ("cauchy", "logistic")


@dataclass(frozen=True)
class MeasureSpec:
    family: str = "cauchy"
    location: float = 0.0
    scale: float = 1.0
    bits: int = 96

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown measure family {self.family!r}; use one of {FAMILIES}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.bits < 16:
            raise ValueError("bits must be >= 16")

    @property
    def word_bits(self) -> int:
        return 64 * -(-self.bits // 64)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data) -> "MeasureSpec":
        return cls(**data)

    @classmethod
    def parse(cls, text: str) -> "MeasureSpec":
        """``cauchy``, ``logistic`` or ``family:location:scale``."""
        parts = text.split(":")
        if len(parts) == 1:
            return cls(parts[0])
        if len(parts) == 3:
            return cls(parts[0], float(parts[1]), float(parts[2]))
        raise ValueError(f"bad measure {text!r}")

    def quantile(self, u) -> "gmpy2.mpfr":
        """Quantile at ``u`` in (0, 1), as an mpfr carrying ``bits + 40`` bits."""
        with gmpy2.context(gmpy2.get_context(), precision=self.bits + 40):
            if isinstance(u, Fraction):
                u = gmpy2.mpfr(gmpy2.mpq(u.numerator, u.denominator))
            return self._quantile(gmpy2.mpfr(u))

    def _quantile(self, u):
        loc, s = gmpy2.mpfr(self.location), gmpy2.mpfr(self.scale)
        if self.family == "cauchy":
            return loc + s * gmpy2.tan(gmpy2.const_pi() * (u - gmpy2.mpfr(0.5)))
        return loc + s * gmpy2.log(u / (1 - u))

    def point(self, word: int) -> Fraction:
        """The sample for a uniform ``word_bits``-bit integer: quantile at the cell midpoint, rounded."""
        with gmpy2.context(gmpy2.get_context(), precision=self.bits + 40):
            u = gmpy2.mul_2exp(gmpy2.mpfr(2 * word + 1), -(self.word_bits + 1))
            n = int(gmpy2.rint(gmpy2.mul_2exp(self._quantile(u), self.bits)))
        return Fraction(n, 1 << self.bits)

    def cdf(self, x) -> "mpmath.mpf":
        """CDF at a rational, float or Boundary; +/-inf allowed."""
        with mpmath.workprec(self.bits + 40):
            if isinstance(x, Boundary):
                x = x.mpf(self.bits + 40)
            elif isinstance(x, Fraction):
                x = mpmath.mpf(x.numerator) / x.denominator
            else:
                x = mpmath.mpf(x)
            if mpmath.isinf(x):
                return mpmath.mpf(1 if x > 0 else 0)
            z = (x - mpmath.mpf(self.location)) / mpmath.mpf(self.scale)
            if self.family == "cauchy":
                return mpmath.mpf(1) / 2 + mpmath.atan(z) / mpmath.pi
            return 1 / (1 + mpmath.exp(-z))

    def mass(self, lo, hi) -> float:
        with mpmath.workprec(self.bits + 40):
            return float(self.cdf(hi) - self.cdf(lo))

    def to_rational(self, x) -> Fraction:
        """Round to the dyadic grid 2^-bits."""
        with gmpy2.context(gmpy2.get_context(), precision=self.bits + 40):
            n = int(gmpy2.rint(gmpy2.mul_2exp(gmpy2.mpfr(x), self.bits)))
        return Fraction(n, 1 << self.bits)


def sample_points(m: MeasureSpec, n: int, seed: int, *labels) -> list:
    """``n`` distinct exact rationals, i.i.d. from ``m`` up to the 2^-bits grid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = raw_words(seed, "points", *labels)
    k = m.word_bits // 64
    out, seen = [], set()
    while len(out) < n:
        w = rng.random_raw(k * (n - len(out)))
        for i in range(0, len(w), k):
            u = 0
            for x in w[i:i + k]:
                u = (u << 64) | int(x)
            q = m.point(u)
            if q in seen:
                continue
            seen.add(q)
            out.append(q)
    return out
