"""Brute-force evaluators: Birkhoff sums of f = f1 + f2 along exact orbits, the
complex average of 1/(1 - e^{2 pi i x}), and cosecant partial sums.

These are the oracles every structured evaluator is checked against, so they
favour exactness over speed: orbit points stay integers over a common
denominator and accumulation goes through math.fsum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from rotsums.cf_core import CFExpansion, UnitFrame, fibonacci_ratio, rational01
from rotsums.errors import InvariantViolation, SingularHit

GOLDEN_INDEX = 60  # --alpha golden means F_60/F_61
TRIG_CROSSCHECK_TOL = 1e-6


def golden() -> Fraction:
    return fibonacci_ratio(GOLDEN_INDEX)


def _cosine(x):
    return np.cos(2 * np.pi * x)


SMOOTH_PARTS: dict[str, Callable[[float], float]] = {"cos": _cosine}


@dataclass(frozen=True)
class FunctionConfig:
    """f(x) = c/x - c/(1-x) + smooth(x).

    ``smooth`` is None, a registered name ("cos" is cos 2 pi x) or any C^1
    callable on [0, 1] that also accepts numpy arrays.  c = 0 is only allowed together with a smooth part.
    """

    c: float = 1.0
    smooth: str | Callable[[float], float] | None = None

    def __post_init__(self):
        if isinstance(self.smooth, str) and self.smooth not in SMOOTH_PARTS:
            raise ValueError(f"unknown smooth part {self.smooth!r}")
        if self.c == 0 and self.smooth is None:
            raise ValueError("c must be nonzero when there is no smooth part")

    @property
    def smooth_part(self) -> Callable[[float], float] | None:
        if isinstance(self.smooth, str):
            return SMOOTH_PARTS[self.smooth]
        return self.smooth

    @property
    def label(self) -> str:
        if self.smooth is None:
            return f"c={self.c!r}"
        name = self.smooth if isinstance(self.smooth, str) else getattr(self.smooth, "__name__", "custom")
        return f"c={self.c!r}, smooth={name}"


def f1_eval(x, c: float = 1.0) -> float:
    x = Fraction(x)
    if x <= 0 or x >= 1:
        raise SingularHit(f"f1 is singular at {x}")
    return c * float(1 / x - 1 / (1 - x))


def _orbit_units(cf: CFExpansion, x: Fraction, N: int):
    frame = UnitFrame.for_points(cf, x)
    D, A = frame.denominator, frame.alpha
    start = frame.units(x)
    return D, [(start + i * A) % D for i in range(N)]


def birkhoff_direct(cf: CFExpansion, x, N: int, config: FunctionConfig | None = None) -> float:
    config = config or FunctionConfig()
    x = rational01(x)
    if N < 1:
        raise ValueError("N must be positive")
    D, points = _orbit_units(cf, x, N)
    if 0 in points:
        raise SingularHit("orbit hits 0")
    c = config.c
    parts = []
    if c:
        parts += [c * (D / p) for p in points]
        parts += [-c * (D / (D - p)) for p in points]
    smooth = config.smooth_part
    if smooth is not None:
        parts += [smooth(p / D) for p in points]
    return math.fsum(parts)


def _trig_term(p: int, D: int) -> complex:
    """1/(1 - e^{2 pi i p/D}), with the angle folded into (-pi, pi]."""
    if 2 * p <= D:
        theta = 2 * math.pi * (p / D)
    else:
        theta = -2 * math.pi * ((D - p) / D)
    half = math.sin(theta / 2)
    # 1 - e^{i theta} = 2 sin^2(theta/2) - i sin(theta), no cancellation
    return 1 / complex(2 * half * half, -math.sin(theta))


def _cot_pi(p: int, D: int) -> float:
    if 2 * p <= D:
        return 1 / math.tan(math.pi * (p / D))
    return -1 / math.tan(math.pi * ((D - p) / D))


def trig_average(cf: CFExpansion, x, N: int) -> complex:
    """(1/N) sum of 1/(1 - e^{2 pi i (x + n alpha)}), n < N.

    Computed directly and again as 1/2 + (i/2N) sum cot(pi (x + n alpha));
    the two must agree to 1e-6.
    """
    x = rational01(x)
    if N < 1:
        raise ValueError("N must be positive")
    D, points = _orbit_units(cf, x, N)
    if 0 in points:
        raise SingularHit("orbit hits 0")
    terms = [_trig_term(p, D) for p in points]
    direct = complex(math.fsum(t.real for t in terms) / N, math.fsum(t.imag for t in terms) / N)
    via_cot = complex(0.5, 0.5 * math.fsum(_cot_pi(p, D) for p in points) / N)
    if abs(direct - via_cot) > TRIG_CROSSCHECK_TOL * max(1.0, abs(direct)):
        raise InvariantViolation(f"trig average cross-check failed: {direct} vs {via_cot}")
    return direct


@dataclass(frozen=True)
class CosecantReport:
    """|sum_{n<=k} 1/sin(n pi alpha)| for k = 1..N."""

    alpha: Fraction
    N: int
    abs_partial: np.ndarray

    def max_over(self, k_lo: int, k_hi: int, normalized: bool = False) -> tuple[float, int]:
        """Largest value for k in [k_lo, k_hi] and the k attaining it.

        With ``normalized`` the values are divided by k first.
        """
        seg = self.abs_partial[k_lo - 1 : k_hi]
        if normalized:
            seg = seg / np.arange(k_lo, k_lo + len(seg))
        i = int(np.argmax(seg))
        return float(seg[i]), k_lo + i

    def running_max(self) -> np.ndarray:
        return np.maximum.accumulate(self.abs_partial)

    def marks(self) -> list[dict]:
        """Running maximum at k = 1, 10, 100, ... and at N."""
        ks, k = [], 1
        while k < self.N:
            ks.append(k)
            k *= 10
        ks.append(self.N)
        out = []
        for k in ks:
            value, at = self.max_over(1, k)
            norm, norm_at = self.max_over(1, k, normalized=True)
            out.append({"k": k, "running_max": value, "argmax": at,
                        "running_max_per_k": norm, "argmax_per_k": norm_at})
        return out


COSECANT_CHUNK = 1 << 16


def cosecant_partial_sums(alpha, N: int) -> CosecantReport:
    alpha = rational01(alpha)
    if N < 1:
        raise ValueError("N must be positive")
    num, den = alpha.numerator, alpha.denominator
    if N >= den:
        raise SingularHit(f"n = {den} makes n alpha an integer")
    fits = N * num < 2**62
    out = np.empty(N)
    carry = 0.0
    for lo in range(1, N + 1, COSECANT_CHUNK):
        hi = min(N, lo + COSECANT_CHUNK - 1)
        # sin(n pi alpha) = (-1)^whole sin(pi rem/den), rem/den folded to <= 1/2
        if fits:
            n = np.arange(lo, hi + 1, dtype=np.int64)
            whole, rem = np.divmod(n * num, den)
            folded = np.minimum(rem, den - rem) / den
        else:
            pairs = [divmod(k * num, den) for k in range(lo, hi + 1)]
            whole = np.array([w & 1 for w, _ in pairs], dtype=np.int64)
            folded = np.array([min(r, den - r) / den for _, r in pairs])
        sign = np.where(whole % 2 == 0, 1.0, -1.0)
        terms = sign / np.sin(np.pi * folded)
        partial = np.cumsum(terms) + carry
        carry = float(partial[-1])
        out[lo - 1 : hi] = partial
    return CosecantReport(alpha=alpha, N=N, abs_partial=np.abs(out))
