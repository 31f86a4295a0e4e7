"""Split an orbit segment {x + i alpha : 0 <= i < N} into complete cycles of
even orders m <= n(N) - 2, then rebuild S_N from the cycle sums.

Points of the level-m return domain are handled in a signed coordinate
u in [-lambda_{m+1}, lambda_m): u >= 0 is the long base, u < 0 the short base
(the point 1 + u).  In that coordinate the first-return map is the exchange
u -> u - lambda_{m+1} (u >= 0), u -> u + lambda_m (u < 0), with return times
q_{m+1} and q_m.

The same walk runs on exact integers (for the decomposition itself) and on
exact ratios (for the truncated approximant G, which must be a function of the
normalized tower variables only).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.stats import beta

from rotsums.cf_core import CFExpansion, UnitFrame, cf_expand, n_of, rational01, sample_point
from rotsums.cycles import (
    CycleRatios,
    K_of_eps,
    g_from_ratios,
    geometry_in_frame,
    geometry_sum,
    k_of_eps,
    window_sufficient,
)
from rotsums.errors import InsufficientDepth, PointOutsideDomain, SingularHit

DEFAULT_ORDERS = 10  # pilot calibration at N=10^4, eps=0.1, delta=0.05


@dataclass(frozen=True)
class TowerPosition:
    tag: str  # "l" or "s": which tower of the level n-2 partition holds x
    d: Fraction
    h: int
    j: int


@dataclass(frozen=True)
class CycleRef:
    start: Fraction
    r: int
    index: int  # orbit index of the cycle's first point


@dataclass(frozen=True)
class OrderCycles:
    m: int
    cbar: int
    cunder: int
    cycles: tuple[CycleRef, ...]


@dataclass(frozen=True)
class OrbitDecomposition:
    N: int
    n: int
    x: Fraction
    orders: tuple[OrderCycles, ...]  # present orders only, highest first
    head: int  # indices [0, head) precede every cycle
    tail: int  # indices [tail, N) follow every cycle

    def covered_indices(self) -> list[int]:
        idx = list(range(self.head))
        for order in self.orders:
            for cyc in order.cycles:
                idx.extend(range(cyc.index, cyc.index + cyc.r))
        idx.extend(range(self.tail, self.N))
        return sorted(idx)

    def order(self, m: int) -> OrderCycles | None:
        for o in self.orders:
            if o.m == m:
                return o
        return None


# The walk -----------------------------------------------------------------

@dataclass
class _Visit:
    u: object
    index: object
    r: object


@dataclass
class _Walk:
    orders: list = field(default_factory=list)  # (m, ahead, behind)
    head_end: object = None
    tail_start: object = None


def _walk(top: int, bottom: int, u0, i0, N, length: Callable, time: Callable) -> _Walk:
    """Cycle inventory of orders top, top-2, ..., bottom.

    ``length(m)`` is lambda_m and ``time(m)`` is q_m in the units of ``u0``
    and ``i0``/``N``; (u0, i0) is the first visit of the orbit to the
    level-``top`` return domain.
    """
    fwd_u, fwd_i = u0, i0
    back_u, back_i = u0, i0
    out = _Walk()
    for m in range(top, bottom - 1, -2):
        Lm, Lm1 = length(m), length(m + 1)
        qm, qm1 = time(m), time(m + 1)
        behind = []
        u, i = back_u, back_i
        while True:
            if u >= Lm - Lm1:
                pu, r = u - Lm, qm
            else:
                pu, r = u + Lm1, qm1
            pi = i - r
            if pi < 0:
                break
            if i <= N:
                behind.append(_Visit(pu, pi, r))
            elif pi < N and fwd_i > N:
                # the orbit ends inside this cycle: its start opens the final segment
                fwd_u, fwd_i = pu, pi
            u, i = pu, pi
        back_u, back_i = u, i
        ahead = []
        u, i = fwd_u, fwd_i
        while i < N:
            r = qm1 if u >= 0 else qm
            if i + r > N:
                break
            ahead.append(_Visit(u, i, r))
            u = u - Lm1 if u >= 0 else u + Lm
            i = i + r
        fwd_u, fwd_i = u, i
        behind.reverse()
        out.orders.append((m, ahead, behind))
    out.head_end = min(back_i, N)
    out.tail_start = fwd_i
    return out


# Exact tower descent --------------------------------------------------------

def _signed(frame: UnitFrame, p: int, m: int) -> int:
    """Signed level-m coordinate of the point p (units), or raise."""
    if p < frame.lam(m):
        return p
    if p >= frame.denominator - frame.lam(m + 1):
        return p - frame.denominator
    raise PointOutsideDomain(f"point is outside the level-{m} return domain")


def _in_domain(frame: UnitFrame, p: int, m: int) -> bool:
    return p < frame.lam(m) or p >= frame.denominator - frame.lam(m + 1)


def induced_step_units(frame: UnitFrame, m: int, p: int, inverse: bool = False) -> tuple[int, int]:
    """One step of the level-m first-return map on unit coordinates.

    Returns (image, return time); with ``inverse`` the time is the return
    time of the preimage.
    """
    D = frame.denominator
    Lm, Lm1 = frame.lam(m), frame.lam(m + 1)
    u = _signed(frame, p, m)
    cf = frame.cf
    if not inverse:
        if u >= 0:
            return (u - Lm1) % D, cf.q[m + 1]
        return (u + Lm) % D, cf.q[m]
    if u >= Lm - Lm1:
        return (u - Lm) % D, cf.q[m]
    return (u + Lm1) % D, cf.q[m + 1]


def _check_order(m: int) -> None:
    if m < 0 or m % 2:
        raise ValueError(f"order must be a non-negative even integer, got {m}")


def induced_map_step(cf: CFExpansion, n: int, point, inverse: bool = False) -> Fraction:
    _check_order(n)
    point = Fraction(point)
    if not 0 <= point < 1:
        raise PointOutsideDomain(f"{point} is not in [0, 1)")
    frame = UnitFrame.for_points(cf, point)
    frame.cf.require(n + 1)
    image, _ = induced_step_units(frame, n, frame.units(point), inverse)
    return frame.fraction(image)


def _first_visit(frame: UnitFrame, p: int, level: int) -> tuple[int, int]:
    """(i, R^i p) for the least i >= 0 with R^i p in the level return domain."""
    cf = frame.cf
    D, A = frame.denominator, frame.alpha
    cf.require(1)
    i = 0
    if not _in_domain(frame, p, 0):
        j = p // A  # p sits on floor j of the level-0 long tower
        i = cf.q[1] - j
        p = (p + i * A) % D
    for m in range(0, level, 2):
        cf.require(m + 3)
        while not _in_domain(frame, p, m + 2):
            p, r = induced_step_units(frame, m, p)
            i += r
    return i, p


def _locate_units(frame: UnitFrame, N: int, x: int):
    cf = frame.cf
    n = n_of(N, cf)
    top = n - 2
    cf.require(n - 1)
    i, p = _first_visit(frame, x, top)
    if i == 0:
        z, j = p, 0
    else:
        z, r = induced_step_units(frame, top, p, inverse=True)
        j = r - i
    u = _signed(frame, z, top)
    if u >= 0:
        tag, d, h = "l", u, cf.q[n - 1] - j
    else:
        tag, d, h = "s", -u, cf.q[n - 2] - j
    return n, tag, d, h, j, i, p


def locate(cf: CFExpansion, N: int, x) -> TowerPosition:
    x = rational01(x)
    frame = UnitFrame.for_points(cf, x)
    _, tag, d, h, j, _, _ = _locate_units(frame, N, frame.units(x))
    return TowerPosition(tag=tag, d=frame.fraction(d), h=h, j=j)


def dn_hn_tn(cf: CFExpansion, x, N: int) -> tuple[float, float, float]:
    pos = locate(cf, N, x)
    n = n_of(N, cf)
    if pos.tag == "l":
        lam, q = cf.lam[n - 2], cf.q[n - 1]
    else:
        lam, q = cf.lam[n - 1], cf.q[n - 2]
    return float(pos.d / lam), pos.h / q, float(1 / (q * lam))


def decompose(cf: CFExpansion, x, N: int) -> OrbitDecomposition:
    x = rational01(x)
    frame = UnitFrame.for_points(cf, x)
    D = frame.denominator
    n, _, _, _, _, i0, p0 = _locate_units(frame, N, frame.units(x))
    top = n - 2
    walk = _walk(
        top, 0, _signed(frame, p0, top), i0, N,
        length=frame.lam,
        time=lambda m: cf.q[m],
    )
    orders = []
    for m, ahead, behind in walk.orders:
        if not ahead and not behind:
            continue
        cycles = tuple(
            CycleRef(frame.fraction(v.u % D), v.r, v.index) for v in behind + ahead
        )
        orders.append(OrderCycles(m=m, cbar=len(ahead), cunder=len(behind), cycles=cycles))
    return OrbitDecomposition(
        N=N, n=n, x=x, orders=tuple(orders), head=walk.head_end, tail=max(walk.tail_start, walk.head_end)
    )


def _point_term(D: int, p: int, c: float) -> float:
    if p == 0:
        raise SingularHit("orbit point sits exactly at 0")
    return c * (D / p - D / (D - p))


def birkhoff_via_cycles(cf: CFExpansion, x, N: int, c: float = 1.0,
                        decomposition: OrbitDecomposition | None = None) -> float:
    x = rational01(x)
    dec = decomposition or decompose(cf, x, N)
    frame = UnitFrame.for_points(cf, x)
    D, A = frame.denominator, frame.alpha
    x_units = frame.units(x)
    parts = []
    for order in dec.orders:
        for cyc in order.cycles:
            geom = geometry_in_frame(frame, order.m, frame.units(cyc.start))
            parts.append(geometry_sum(geom, c))
    for i in list(range(dec.head)) + list(range(dec.tail, N)):
        parts.append(_point_term(D, (x_units + i * A) % D, c))
    return math.fsum(parts)


# Truncated approximant -------------------------------------------------------

@dataclass(frozen=True)
class GTrace:
    """Normalized tower variables of (x, alpha, N); G is a function of these only.

    Long-tower tag: d/lambda_{n-2}, h/q_{n-1}, 1/(q_{n-1} lambda_{n-2}).
    Short-tower tag: d/lambda_{n-1}, h/q_{n-2}, 1/(q_{n-2} lambda_{n-1}).
    """

    tag: str
    q_n_over_N: Fraction
    d_ratio: Fraction
    h_ratio: Fraction
    lam_ratio: Fraction  # lambda_{n-1}/lambda_{n-2}
    q_ratio: Fraction  # q_{n-2}/q_{n-1}
    inv_q_lam: Fraction
    digits_below: tuple[int, ...]  # a_n, a_{n-1}, ..., a_{n-K1} (as available)
    digits_above: tuple[int, ...]  # a_{n+1}, ..., a_{n+K1} (as available)
    reaches_bottom: bool  # digits_below runs all the way to a_1


def capture_trace(cf: CFExpansion, x, N: int, eps: float, M_orders: int) -> GTrace:
    pos = locate(cf, N, x)
    n = n_of(N, cf)
    K1 = M_orders + K_of_eps(eps / 2)
    if pos.tag == "l":
        d_ratio = pos.d / cf.lam[n - 2]
        h_ratio = Fraction(pos.h, cf.q[n - 1])
        inv = 1 / (cf.q[n - 1] * cf.lam[n - 2])
    else:
        d_ratio = pos.d / cf.lam[n - 1]
        h_ratio = Fraction(pos.h, cf.q[n - 2])
        inv = 1 / (cf.q[n - 2] * cf.lam[n - 1])
    low = max(1, n - K1)
    return GTrace(
        tag=pos.tag,
        q_n_over_N=Fraction(cf.q[n], N),
        d_ratio=d_ratio,
        h_ratio=h_ratio,
        lam_ratio=cf.lam[n - 1] / cf.lam[n - 2],
        q_ratio=Fraction(cf.q[n - 2], cf.q[n - 1]),
        inv_q_lam=inv,
        digits_below=tuple(cf.a(i) for i in range(n, low - 1, -1)),
        digits_above=tuple(cf.a(i) for i in range(n + 1, min(n + K1, cf.depth) + 1)),
        reaches_bottom=low == 1,
    )


@dataclass(frozen=True)
class RatioCycle:
    rel_order: int  # order m = n - 2 - 2 * rel_order
    weight: Fraction  # r/N
    ratios: CycleRatios


def replay_cycles(trace: GTrace, eps: float, M_orders: int) -> list[RatioCycle]:
    """Cycles of orders n-2, ..., n-M_orders rebuilt from the trace alone.

    Orders are indexed relative to n, so the absolute level never enters.
    """
    below = trace.digits_below

    def a(t: int) -> int:  # a_{n-t}
        if t >= len(below):
            raise InsufficientDepth("trace does not carry enough digits")
        return below[t]

    # lengths in units of lambda_{n-2}, times in units of N, keyed by n - m
    length = {2: Fraction(1), 1: trace.lam_ratio}
    time = {1: trace.q_n_over_N / (a(0) + trace.q_ratio)}
    time[2] = trace.q_ratio * time[1]
    depth_limit = len(below) + 1 if trace.reaches_bottom else None  # n - m for m = -1

    def L(t):  # lambda_{n-t}
        while t not in length:
            s = max(length) + 1
            length[s] = a(s - 2) * length[s - 1] + length[s - 2]
        return length[t]

    def T(t):  # q_{n-t}/N
        while t not in time:
            s = max(time) + 1
            time[s] = time[s - 2] - a(s - 2) * time[s - 1]
        return time[t]

    lowest = M_orders
    if depth_limit is not None:
        lowest = min(lowest, depth_limit - 1)  # never below order 0
    lowest -= lowest % 2

    if trace.tag == "l":
        d = trace.d_ratio
        first = trace.h_ratio == 1
        u0 = d if first else d - L(1)
        i0 = Fraction(0) if first else trace.h_ratio * T(1)
        tau_top = trace.inv_q_lam  # 1/(q_{n-1} lambda_{n-2})
    else:
        d = trace.d_ratio * L(1)
        first = trace.h_ratio == 1
        u0 = -d if first else 1 - d
        i0 = Fraction(0) if first else trace.h_ratio * T(2)
        tau_top = trace.inv_q_lam * trace.q_ratio * L(1)

    # walk on relative orders: order index t = n - m
    walk = _walk(
        -2, -lowest, u0, i0, Fraction(1),
        length=lambda mm: L(-mm),
        time=lambda mm: T(-mm),
    )
    K, k = K_of_eps(eps / 2), k_of_eps(eps / 2)
    out = []
    for mm, ahead, behind in walk.orders:
        t = -mm  # order m = n - t
        for v in behind + ahead:
            Lm, Lm1 = L(t), L(t - 1)
            if v.u >= 0:
                branch, position, q_rel = "l", v.u / Lm, T(t - 1)
            else:
                branch, position, q_rel = "s", -v.u / Lm, T(t)
            inv_q_lambda = tau_top * T(1) / (q_rel * Lm)
            ratios = _window_ratios(
                a, t, K, k, depth_limit,
                branch=branch,
                position=position,
                rho=Lm1 / Lm,
                inv_q_lambda=inv_q_lambda,
            )
            out.append(RatioCycle(rel_order=(t - 2) // 2, weight=v.r, ratios=ratios))
    return out


def _window_ratios(a, t: int, K: int, k: int, depth_limit, **fields) -> CycleRatios:
    """Digit window for order m = n - t, widened exactly as ``cycle_ratios`` does.

    ``a(s)`` returns a_{n-s}; the window is a_{m-K+2}..a_{m+1}, or a_1..a_{m+1}
    when m - K < 0.
    """
    while True:
        if depth_limit is not None and depth_limit - 1 - t < K:
            digits = tuple(a(s) for s in range(depth_limit - 2, t - 2, -1))
            complete = True
        else:
            digits = tuple(a(s) for s in range(t + K - 2, t - 2, -1))
            complete = False
        r = CycleRatios(digits=digits, complete=complete, **fields)
        if window_sufficient(r, k):
            return r
        K += 2


def G_from_trace(trace: GTrace, c: float, eps: float, M_orders: int) -> float:
    k = k_of_eps(eps / 2)
    parts = [
        float(rc.weight) * g_from_ratios(rc.ratios, k, c)
        for rc in replay_cycles(trace, eps, M_orders)
    ]
    return math.fsum(parts)


def G_eps_delta(cf: CFExpansion, x, N: int, c: float = 1.0, eps: float = 0.1,
                delta: float = 0.05, M_orders: int = DEFAULT_ORDERS) -> float:
    """Truncated approximant of S_N/N: orders n-2 down to n-M_orders, each
    cycle replaced by its truncated mean at eps/2.

    ``delta`` is the measure budget that ``M_orders`` was calibrated for; it
    does not enter the value.
    """
    if M_orders < 2 or M_orders % 2:
        raise ValueError("M_orders must be an even integer >= 2")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    trace = capture_trace(cf, x, N, eps, M_orders)
    return G_from_trace(trace, c, eps, M_orders)


def order_truncation_profile(cf: CFExpansion, x, N: int, Ms, c: float = 1.0) -> dict[int, float]:
    """For each M, |S_N - (sum over cycles of orders >= n - M)| / N.

    The dropped part is the lower orders plus the leftover head and tail.
    """
    x = rational01(x)
    dec = decompose(cf, x, N)
    frame = UnitFrame.for_points(cf, x)
    D, A = frame.denominator, frame.alpha
    x_units = frame.units(x)
    leftover = [_point_term(D, (x_units + i * A) % D, c)
                for i in list(range(dec.head)) + list(range(dec.tail, N))]
    per_order = {}
    for order in dec.orders:
        per_order[order.m] = [
            geometry_sum(geometry_in_frame(frame, order.m, frame.units(cyc.start)), c)
            for cyc in order.cycles
        ]
    out = {}
    for M in Ms:
        dropped = list(leftover)
        for m, sums in per_order.items():
            if m < dec.n - M:
                dropped.extend(sums)
        out[M] = abs(math.fsum(dropped)) / N
    return out


def order_truncation_error(cf: CFExpansion, x, N: int, M_orders: int, c: float = 1.0) -> float:
    return order_truncation_profile(cf, x, N, [M_orders], c)[M_orders]


@dataclass(frozen=True)
class OrderCalibration:
    M_orders: int
    eps: float
    delta: float
    N: int
    samples: int
    confidence: float
    miss_rate: dict[int, float]  # M -> share of pilot samples with |S_N/N - G| >= eps
    upper_bound: dict[int, float]  # M -> one-sided Clopper-Pearson bound on that share


def calibrate_orders(N: int, eps: float = 0.1, delta: float = 0.05, samples: int = 1000,
                     seed: int = 0, c: float = 1.0, max_orders: int = 20,
                     confidence: float = 0.95) -> OrderCalibration:
    """Smallest even M whose pilot miss rate is at most ``delta`` with the
    given confidence (upper Clopper-Pearson bound <= delta)."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(samples):
        cf = cf_expand(sample_point(rng))
        x = sample_point(rng)
        cases.append((cf, x, birkhoff_via_cycles(cf, x, N, c) / N))
    rates: dict[int, float] = {}
    bounds: dict[int, float] = {}
    for M in range(2, max_orders + 1, 2):
        misses = sum(abs(s - G_eps_delta(cf, x, N, c, eps, delta, M)) >= eps for cf, x, s in cases)
        rates[M] = misses / samples
        bounds[M] = 1.0 if misses == samples else float(beta.ppf(confidence, misses + 1, samples - misses))
        if bounds[M] <= delta:
            return OrderCalibration(M, eps, delta, N, samples, confidence, rates, bounds)
    raise InsufficientDepth(f"no M <= {max_orders} meets the budget {delta}")
