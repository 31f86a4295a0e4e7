"""Continued fractions of rationals in (0, 1): digits, convergents, the lengths
lambda_n = |q_n alpha - p_n| and the renewal index n(N).

Indexing follows q_0 = 1, q_1 = a_1, p_0 = 0, p_1 = 1, so that lambda_0 = alpha
and lambda_{-1} = 1 close the recurrence lambda_{n-1} = a_{n+1} lambda_n + lambda_{n+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from rotsums.errors import InsufficientDepth

GRID_BITS = 128
GRID = 1 << GRID_BITS
DEFAULT_MAX_TERMS = 200


def rational01(value) -> Fraction:
    """Coerce ``value`` ("num/den" string, Fraction, or (num, den)) into a
    reduced fraction strictly inside (0, 1)."""
    if isinstance(value, tuple):
        value = Fraction(*value)
    elif isinstance(value, str):
        num, sep, den = value.strip().partition("/")
        if not sep:
            raise ValueError(f"expected NUM/DEN, got {value!r}")
        value = Fraction(int(num), int(den))
    elif not isinstance(value, Fraction):
        if isinstance(value, float):
            raise TypeError("floats are not exact; pass a Fraction or 'num/den'")
        value = Fraction(value)
    if not 0 < value < 1:
        raise ValueError(f"{value} is not strictly inside (0, 1)")
    return value


def format_rational(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def fibonacci_ratio(k: int) -> Fraction:
    """F_k / F_{k+1} with F_1 = F_2 = 1."""
    a, b = 1, 1
    for _ in range(k - 1):
        a, b = b, a + b
    return Fraction(a, b)


@dataclass(frozen=True)
class CFExpansion:
    alpha: Fraction
    digits: tuple[int, ...]
    p: tuple[int, ...]
    q: tuple[int, ...]
    # |q_n A - p_n D| for alpha = A/D, i.e. lambda_n in units of 1/D
    lam_num: tuple[int, ...]
    terminated: bool

    @property
    def depth(self) -> int:
        return len(self.digits)

    @property
    def denominator(self) -> int:
        return self.alpha.denominator

    @cached_property
    def lam(self) -> tuple[Fraction, ...]:
        d = self.alpha.denominator
        return tuple(Fraction(v, d) for v in self.lam_num)

    def a(self, n: int) -> int:
        """The digit a_n (1-based, as in [a_1, a_2, ...])."""
        if not 1 <= n <= len(self.digits):
            raise InsufficientDepth(f"digit a_{n} unavailable (depth {self.depth})")
        return self.digits[n - 1]

    def require(self, level: int) -> None:
        """Ensure q_level and a strictly positive lambda_level exist."""
        if level >= len(self.q) or self.lam_num[level] == 0:
            raise InsufficientDepth(
                f"level {level} needs a deeper expansion (depth {self.depth}, "
                f"terminated={self.terminated})"
            )


def cf_expand(alpha, max_terms: int = DEFAULT_MAX_TERMS) -> CFExpansion:
    alpha = rational01(alpha)
    if max_terms < 1:
        raise ValueError("max_terms must be positive")
    A, D = alpha.numerator, alpha.denominator
    digits: list[int] = []
    num, den = A, D
    while num and len(digits) < max_terms:
        a, r = divmod(den, num)
        digits.append(a)
        den, num = num, r
    terminated = num == 0
    q = [1, digits[0]]
    p = [0, 1]
    for a in digits[1:]:
        q.append(a * q[-1] + q[-2])
        p.append(a * p[-1] + p[-2])
    lam_num = [abs(qn * A - pn * D) for pn, qn in zip(p, q)]
    return CFExpansion(
        alpha=alpha,
        digits=tuple(digits),
        p=tuple(p),
        q=tuple(q),
        lam_num=tuple(lam_num),
        terminated=terminated,
    )


def n_of(N: int, cf: CFExpansion) -> int:
    """Smallest even n with q_n > N."""
    if N < 1:
        raise ValueError("N must be positive")
    for n in range(0, len(cf.q), 2):
        if cf.q[n] > N:
            return n
    raise InsufficientDepth(f"no even n with q_n > {N} within depth {cf.depth}")


def sample_units(rng: np.random.Generator) -> int:
    """A uniform integer in [1, 2^128)."""
    while True:
        hi, lo = rng.integers(0, 1 << 64, size=2, dtype=np.uint64, endpoint=False)
        value = (int(hi) << 64) | int(lo)
        if value:
            return value


def sample_point(rng: np.random.Generator) -> Fraction:
    return Fraction(sample_units(rng), GRID)


@dataclass(frozen=True)
class UnitFrame:
    """Integer coordinates for a rotation: every point is k/denominator.

    The denominator is a common multiple of alpha's denominator and of any
    extra points registered at construction, so orbit steps are single
    modular integer additions.
    """

    cf: CFExpansion
    denominator: int

    @classmethod
    def for_points(cls, cf: CFExpansion, *points: Fraction) -> "UnitFrame":
        den = cf.denominator
        for pt in points:
            den = math.lcm(den, Fraction(pt).denominator)
        return cls(cf, den)

    @cached_property
    def _factor(self) -> int:
        return self.denominator // self.cf.denominator

    @cached_property
    def alpha(self) -> int:
        return self.cf.alpha.numerator * self._factor

    def lam(self, n: int) -> int:
        self.cf.require(n)
        return self.cf.lam_num[n] * self._factor

    def units(self, value: Fraction) -> int:
        value = Fraction(value)
        num = value.numerator * self.denominator
        if num % value.denominator:
            raise ValueError(f"{value} is not on the grid 1/{self.denominator}")
        return num // value.denominator

    def fraction(self, units: int) -> Fraction:
        return Fraction(units, self.denominator)
