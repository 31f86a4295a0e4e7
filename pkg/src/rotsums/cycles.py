"""Sums of f(x) = c/x - c/(1-x) along one cycle of the level-n towers.

A cycle starts in the long base [0, lambda_n) and runs q_{n+1} steps, or in
the short base [1 - lambda_{n+1}, 1) and runs q_n steps; it visits every floor
of its tower exactly once.  Distances to 0 and to 1 are exact integers over a
common denominator until the final reciprocals.

The truncated mean only sees a CycleRatios record (normalized position,
lambda_{n+1}/lambda_n, 1/(q lambda_n) and a window of digits), from which it
regenerates the ends of the coding string near 0 and near 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from rotsums.cf_core import CFExpansion, UnitFrame
from rotsums.errors import InsufficientDepth, PointOutsideDomain, SingularHit

TRUNCATION_SCALE = 56
UNIVERSAL_M = 4 * math.pi**2  # 24 * sum(i^-2) = 24 * pi^2 / 6


def k_of_eps(eps: float) -> int:
    if not eps > 0:
        raise ValueError("eps must be positive")
    return max(1, math.ceil(TRUNCATION_SCALE / eps))


def K_of_eps(eps: float) -> int:
    """Smallest even K with 2^((K-2)/2) > k(eps)."""
    k = k_of_eps(eps)
    t = 0
    while 2**t <= k:
        t += 1
    return 2 * t + 2


@dataclass(frozen=True)
class CycleGeometry:
    """Sorted distances of one cycle's points to 0 (xs) and to 1 (ys),
    as integer numerators over ``denominator``."""

    n: int
    branch: str  # "l": start in [0, lambda_n); "s": start in [1 - lambda_{n+1}, 1)
    q: int
    denominator: int
    start: int
    lam_n: int
    lam_n1: int
    xs: tuple[int, ...]
    ys: tuple[int, ...]

    def x(self, i: int) -> Fraction:
        return Fraction(self.xs[i], self.denominator)

    def y(self, i: int) -> Fraction:
        return Fraction(self.ys[i], self.denominator)


@dataclass(frozen=True)
class CycleResult:
    n: int
    start: Fraction
    q: int
    denominator: int
    xs: tuple[int, ...]
    ys: tuple[int, ...]
    exact_mean: float
    truncated_mean: float
    eps: float


def _branch(frame: UnitFrame, n: int, start_units: int) -> str:
    if start_units < frame.lam(n):
        return "l"
    if start_units >= frame.denominator - frame.lam(n + 1):
        return "s"
    raise PointOutsideDomain(f"start is outside the level-{n} return domain")


def _check_level(n: int) -> None:
    if n < 0 or n % 2:
        raise ValueError(f"cycle level must be a non-negative even integer, got {n}")


def cycle_points(cf: CFExpansion, n: int, start) -> CycleGeometry:
    _check_level(n)
    start = Fraction(start)
    if not 0 <= start < 1:
        raise PointOutsideDomain(f"{start} is not in [0, 1)")
    frame = UnitFrame.for_points(cf, start)
    return geometry_in_frame(frame, n, frame.units(start))


def geometry_in_frame(frame: UnitFrame, n: int, start_units: int) -> CycleGeometry:
    frame.cf.require(n + 1)
    D, A = frame.denominator, frame.alpha
    branch = _branch(frame, n, start_units)
    q = frame.cf.q[n + 1] if branch == "l" else frame.cf.q[n]
    points = [(start_units + i * A) % D for i in range(q)]
    xs = sorted(points)
    ys = sorted(D - p for p in points)
    return CycleGeometry(
        n=n,
        branch=branch,
        q=q,
        denominator=D,
        start=start_units,
        lam_n=frame.lam(n),
        lam_n1=frame.lam(n + 1),
        xs=tuple(xs),
        ys=tuple(ys),
    )


def geometry_sum(geom: CycleGeometry, c: float = 1.0) -> float:
    """c * sum(1/x_i - 1/y_i), each reciprocal correctly rounded."""
    if geom.xs[0] == 0:
        raise SingularHit("a cycle point sits exactly at 0")
    D = geom.denominator
    return c * math.fsum([D / x for x in geom.xs] + [-D / y for y in geom.ys])


def cycle_sum_exact(cf: CFExpansion, n: int, start, c: float = 1.0) -> float:
    return geometry_sum(cycle_points(cf, n, start), c)


def universal_bound(geom: CycleGeometry) -> float:
    """max(1/(q x_0), 1/(q y_0)) + 4 pi^2."""
    D, q = geom.denominator, geom.q
    return max(D / (q * geom.xs[0]), D / (q * geom.ys[0])) + UNIVERSAL_M


# Coding-string ends ---------------------------------------------------------

def _refine(block: str, digit: int, level: int, limit: int, from_right: bool) -> str:
    long_image = "s" + "l" * digit if level % 2 == 0 else "l" * digit + "s"
    if digit < 64:
        if from_right:
            return block[-limit:].translate({108: long_image, 115: "l"})[-limit:]
        return block[:limit].translate({108: long_image, 115: "l"})[:limit]
    # wide digit: never build more than ``limit`` letters
    clipped = "s" + "l" * min(digit, limit) if level % 2 == 0 else "l" * min(digit, limit) + "s"
    pieces, total = [], 0
    for ch in reversed(block) if from_right else block:
        image = clipped if ch == "l" else "l"
        pieces.append(image)
        total += len(image)
        if total >= limit:
            break
    if from_right:
        return "".join(reversed(pieces))[-limit:]
    return "".join(pieces)[:limit]


@lru_cache(maxsize=8192)
def coding_end(start_level: int, digits: tuple[int, ...], limit: int, from_right: bool) -> str:
    """At most ``limit`` letters at one end of the block obtained by refining
    a single long letter of level ``start_level`` once per digit.

    With ``start_level`` = -1 the single long letter is the whole circle, so
    the result is an end of the full coding string.
    """
    block = "l"
    for i, a in enumerate(digits):
        block = _refine(block, a, start_level + i, limit, from_right)
    return block


def _offsets(letters: str, target: str, count: int, long_len: float, short_len: float,
             from_right: bool) -> np.ndarray:
    """Total length of the letters lying before (or, from the right, after)
    each of the first ``count`` occurrences of ``target``."""
    arr = np.frombuffer(letters.encode("ascii"), dtype=np.uint8)
    if from_right:
        arr = arr[::-1]
    is_long = arr == ord("l")
    n_long = np.concatenate(([0], np.cumsum(is_long)[:-1]))
    idx = np.flatnonzero(is_long if target == "l" else ~is_long)[:count]
    nl = n_long[idx]
    ns = idx - nl
    return nl * long_len + ns * short_len


@dataclass(frozen=True)
class CycleRatios:
    """Everything the truncated mean is allowed to depend on.

    position:     x_0/lambda_n for a long-base start, y_0/lambda_n for a short one
    rho:          lambda_{n+1}/lambda_n
    inv_q_lambda: 1/(q lambda_n), q the cycle length
    digits:       the digits consumed by the refinement window, oldest first
    complete:     True when the window reaches the bottom of the expansion
    """

    branch: str
    position: Fraction
    rho: Fraction
    inv_q_lambda: Fraction
    digits: tuple[int, ...]
    complete: bool


def _ends(r: CycleRatios, count: int):
    """Coding-string ends: the level-n ends for a long-base start, the
    level-(n-1) ends for a short-base start."""
    limit = 2 * count + 6
    if r.branch == "l":
        digits_left = r.digits
        digits_right = r.digits if r.complete else r.digits[1:]
    else:
        digits_left = r.digits[:-1]
        digits_right = r.digits[:-1] if r.complete else r.digits[1:-1]
    start_left = -1 if r.complete else 0
    start_right = -1 if r.complete else 1
    left = coding_end(start_left, digits_left, limit, False)
    right = coding_end(start_right, digits_right, limit, True)
    return left, right


def g_from_ratios(r: CycleRatios, k: int, c: float = 1.0) -> float:
    """Truncated cycle mean from the closest k+1 approaches to 0 and to 1."""
    rho = float(r.rho)
    tau = float(r.inv_q_lambda)
    pos = float(r.position)
    # ask for one extra occurrence so a whole short cycle is recognisable
    left, right = _ends(r, k + 2)
    if r.branch == "l":
        xs = pos + _offsets(left, "l", k + 2, 1.0, rho, False)
        ys = _offsets(right, "l", k + 2, 1.0, rho, True) + 1.0 - pos
        total = min(len(xs), len(ys))
        if total < k + 1 and not r.complete:
            raise InsufficientDepth("refinement window too short for this truncation")
        if r.complete and total <= k + 1:
            # the whole cycle is available: keep every term
            terms = (rho - 2 * pos) / (ys[: total - 1] * xs[1:total])
            parts = [1.0 / pos, -1.0 / ys[total - 1]] + terms.tolist()
        else:
            terms = (rho - 2 * pos) / (ys[:k] * xs[1 : k + 1])
            parts = [1.0 / pos] + terms.tolist()
    else:
        wide = r.digits[-1] + rho  # lambda_{n-1}/lambda_n
        xs = _offsets(left, "l", k + 2, wide, 1.0, False) + r.digits[-1] + rho - pos
        ys = _offsets(right, "l", k + 2, wide, 1.0, True) + pos
        total = min(len(xs), len(ys))
        if total < k + 1 and not r.complete:
            raise InsufficientDepth("refinement window too short for this truncation")
        if r.complete and total <= k + 1:
            terms = (2 * pos - 1.0) / (xs[: total - 1] * ys[1:total])
            parts = [-1.0 / ys[0], 1.0 / xs[total - 1]] + terms.tolist()
        else:
            terms = (2 * pos - 1.0) / (xs[:k] * ys[1 : k + 1])
            parts = [-1.0 / ys[0]] + terms.tolist()
    return c * tau * math.fsum(parts)


def window_sufficient(r: CycleRatios, k: int) -> bool:
    """The digit window regenerates at least k+1 approaches on each side."""
    if r.complete:
        return True
    left, right = _ends(r, k + 2)
    return left.count("l") >= k + 1 and right.count("l") >= k + 1


def ratio_window(cf: CFExpansion, n: int, K: int) -> tuple[tuple[int, ...], bool]:
    """Digits a_{n-K+2}..a_{n+1}, or a_1..a_{n+1} when n - K < 0."""
    if n - K < 0:
        return tuple(cf.a(i) for i in range(1, n + 2)), True
    return tuple(cf.a(i) for i in range(n - K + 2, n + 2)), False


def cycle_ratios(cf: CFExpansion, n: int, start, eps: float) -> CycleRatios:
    _check_level(n)
    start = Fraction(start)
    frame = UnitFrame.for_points(cf, start)
    frame.cf.require(n + 1)
    s0 = frame.units(start)
    branch = _branch(frame, n, s0)
    lam_n, lam_n1 = frame.lam(n), frame.lam(n + 1)
    if branch == "l":
        position = Fraction(s0, lam_n)
        q = cf.q[n + 1]
    else:
        position = Fraction(frame.denominator - s0, lam_n)
        q = cf.q[n]
    K = K_of_eps(eps)
    k = k_of_eps(eps)
    while True:
        digits, complete = ratio_window(cf, n, K)
        r = CycleRatios(
            branch=branch,
            position=position,
            rho=Fraction(lam_n1, lam_n),
            inv_q_lambda=Fraction(frame.denominator, q * lam_n),
            digits=digits,
            complete=complete,
        )
        if window_sufficient(r, k):
            return r
        K += 2


def g_eps(cf: CFExpansion, n: int, start, c: float = 1.0, eps: float = 0.1) -> float:
    return g_from_ratios(cycle_ratios(cf, n, start, eps), k_of_eps(eps), c)


def analyze_cycle(cf: CFExpansion, n: int, start, c: float = 1.0, eps: float = 0.1) -> CycleResult:
    geom = cycle_points(cf, n, start)
    return CycleResult(
        n=n,
        start=Fraction(start),
        q=geom.q,
        denominator=geom.denominator,
        xs=geom.xs,
        ys=geom.ys,
        exact_mean=geometry_sum(geom, c) / geom.q,
        truncated_mean=g_eps(cf, n, start, c, eps),
        eps=eps,
    )
