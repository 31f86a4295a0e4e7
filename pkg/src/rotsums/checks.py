"""Invariant suite shared by `rotsums verify` and the acceptance tests.

Each check draws its own seeded instances, runs exact comparisons where the
statement is exact, and returns a CheckResult with the counts it looked at.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from rotsums.cf_core import cf_expand, sample_point
from rotsums.cycles import (
    cycle_points,
    cycle_ratios,
    g_from_ratios,
    geometry_sum,
    k_of_eps,
    universal_bound,
)
from rotsums.decomposition import (
    G_eps_delta,
    G_from_trace,
    birkhoff_via_cycles,
    capture_trace,
    decompose,
)
from rotsums.partitions import (
    build_level,
    check_tiling,
    coding_string,
    middle_points,
    reflected_string,
    substituted_string,
)
from rotsums.statistics import Histogram
from rotsums.sums import birkhoff_direct, trig_average

LEVEL_CAP = 10_000  # intervals per materialized level in the sampled checks
CYCLE_CAP = 10_000  # points per materialized cycle


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={v}" for k, v in self.detail.items())
        return f"{status} {self.name} ({info}; {self.seconds:.1f}s)"


def _timed(fn):
    def run(*args, **kwargs) -> CheckResult:
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        result.seconds = time.perf_counter() - t0
        return result

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _uniform01(rng: np.random.Generator) -> Fraction:
    """A dyadic point strictly inside (0, 1) on a 64-bit grid."""
    while True:
        k = int(rng.integers(1, 1 << 63)) * 2 + 1
        return Fraction(k, 1 << 64)


@_timed
def cf_invariants(samples: int = 10_000, levels: int = 60, seed: int = 1) -> CheckResult:
    """Both recurrences, the length identity and the two-sided bound, exactly."""
    rng = np.random.default_rng(seed)
    failures = checked = 0
    for _ in range(samples):
        cf = cf_expand(sample_point(rng))
        D = cf.denominator
        q, p, lam = cf.q, cf.p, cf.lam_num
        top = min(levels, len(q) - 2)
        ok = lam[0] == cf.alpha.numerator and cf.a(1) * lam[0] + lam[1] == D
        for n in range(0, top + 1):
            if n >= 1:
                a = cf.a(n + 1)
                ok &= q[n + 1] == a * q[n] + q[n - 1]
                ok &= lam[n - 1] == a * lam[n] + lam[n + 1]
            ok &= lam[n] == abs(q[n] * cf.alpha.numerator - p[n] * D)
            ok &= q[n + 1] * lam[n] + q[n] * lam[n + 1] == D
            ok &= D <= 2 * lam[n] * q[n + 1] <= 2 * D and lam[n + 1] * q[n] <= D
            if n + 2 < len(q):
                ok &= q[n + 2] >= 2 * q[n]
            checked += 1
        failures += not ok
    return CheckResult("cf_invariants", failures == 0,
                       {"alphas": samples, "levels_checked": checked, "failures": failures})


@_timed
def almost_symmetry(samples: int = 1000, max_level: int = 20, cap: int = LEVEL_CAP,
                    seed: int = 2) -> CheckResult:
    """Coding vs reflected coding, tiling, counts, gaps, and the midpoint
    translation relations, at every even level whose size is within ``cap``."""
    rng = np.random.default_rng(seed)
    failures, tested, skipped = [], 0, 0
    for s in range(samples):
        cf = cf_expand(sample_point(rng))
        for n in range(0, max_level + 1, 2):
            if n + 1 >= len(cf.q) or cf.q[n] + cf.q[n + 1] > cap:
                skipped += 1
                continue
            tested += 1
            level = build_level(cf, n)
            w, w2 = coding_string(level).letters, reflected_string(level).letters
            a_next = cf.a(n + 1)
            ok = check_tiling(level)
            ok &= w.count("l") == cf.q[n + 1] and w.count("s") == cf.q[n]
            ok &= w[0] == "l" and w[-1] == "s" and w2[0] == "s" and w2[-1] == "l"
            ok &= w[1:-1] == w2[1:-1]
            if n >= 4:
                ok &= w[1] == w2[1] == "l" and w[-2] == w2[-2] == "l"
            if n >= 2:
                ok &= "ss" not in w
            ok &= all(g in (a_next, a_next + 1) for g in coding_string(level).s_gaps())
            mp = middle_points(level)
            shift = 2 * (level.length_units("s") - level.length_units("l"))
            zl, zl2 = mp.z_long, mp.z_long_reflected
            zs, zs2 = mp.z_short, mp.z_short_reflected
            ok &= all(zl2[i] == zl[i + 1] + shift for i in range(len(zl) - 1))
            ok &= all(zs2[i] == zs[i - 1] + shift for i in range(1, len(zs)))
            if n >= 2:
                ok &= substituted_string(cf, n, base=n - 2) == w
            if not ok:
                failures.append((s, n))
    return CheckResult("almost_symmetry", not failures,
                       {"alphas": samples, "levels_tested": tested, "levels_skipped": skipped,
                        "failures": len(failures)})


def _random_cycle(rng: np.random.Generator, max_level: int = 20, cap: int = CYCLE_CAP):
    """(cf, n, start) with a random even n <= max_level whose cycle fits ``cap``."""
    while True:
        cf = cf_expand(sample_point(rng))
        levels = [n for n in range(0, max_level + 1, 2)
                  if n + 1 < len(cf.q) and cf.q[n + 1] <= cap]
        if not levels:
            continue
        n = levels[int(rng.integers(len(levels)))]
        u = _uniform01(rng)
        if rng.integers(2):
            start = cf.lam[n] * u
        else:
            start = 1 - cf.lam[n + 1] * u
        return cf, n, start


@_timed
def cycle_relations(samples: int = 1000, seed: int = 3) -> CheckResult:
    """Pairing relations between sorted distances, endpoint relations and
    the minimum-gap bounds, in exact arithmetic."""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(samples):
        cf, n, start = _random_cycle(rng)
        g = cycle_points(cf, n, start)
        xs, ys, q = g.xs, g.ys, g.q
        L, L1 = g.lam_n, g.lam_n1
        if g.branch == "l":
            ok = xs[0] == g.start and ys[0] == L1 + L - xs[0]
            ok &= all(ys[i] - xs[i + 1] == L1 - 2 * xs[0] for i in range(q - 1))
        else:
            ok = ys[0] == g.denominator - g.start
            ok &= all(ys[i] - xs[i - 1] == 2 * ys[0] - L for i in range(1, q))
            lam_prev = g.denominator if n == 0 else cf.lam_num[n - 1] * (g.denominator // cf.denominator)
            ok &= all(2 * xs[j] >= j * lam_prev for j in range(q))
        ok &= all(xs[j] >= j * L and ys[j] >= j * L for j in range(q))
        ok &= all(b - a >= L for a, b in zip(xs, xs[1:]))
        failures += not ok
    return CheckResult("cycle_relations", failures == 0, {"cycles": samples, "failures": failures})


@_timed
def universal_cycle_bound(samples: int = 1000, seed: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    violations, worst = 0, 0.0
    for _ in range(samples):
        cf, n, start = _random_cycle(rng)
        g = cycle_points(cf, n, start)
        mean = abs(geometry_sum(g) / g.q)
        bound = universal_bound(g)
        worst = max(worst, mean / bound)
        violations += mean > bound
    return CheckResult("universal_cycle_bound", violations == 0,
                       {"cycles": samples, "violations": violations, "worst_ratio": round(worst, 4)})


@_timed
def truncation_contract(samples: int = 1000, eps_values=(0.5, 0.1, 0.02), seed: int = 5) -> CheckResult:
    rng = np.random.default_rng(seed)
    detail = {}
    total = 0
    for eps in eps_values:
        violations, worst = 0, 0.0
        for _ in range(samples):
            cf, n, start = _random_cycle(rng)
            g = cycle_points(cf, n, start)
            r = cycle_ratios(cf, n, start, eps)
            err = abs(geometry_sum(g) / g.q - g_from_ratios(r, k_of_eps(eps)))
            worst = max(worst, err)
            violations += err > eps
        detail[f"eps={eps}"] = f"{violations} violations, worst {worst:.3g}"
        total += violations
    return CheckResult("truncation_contract", total == 0, {"cycles_per_eps": samples, **detail})


def remark_bounds_ok(cf, dec) -> bool:
    """Cycle-count bounds per order."""
    n = dec.n
    for order in dec.orders:
        m = order.m
        if m == n - 2 and order.cbar > (cf.a(n) + 1) * (cf.a(n - 1) + 1):
            return False
        prod = 2 * (cf.a(m + 3) + 1) * (cf.a(m + 2) + 1) * (cf.a(m + 1) + 1)
        if order.cbar + order.cunder > prod:
            return False
    return True


def visits_outside_next(cf, dec) -> bool:
    """Cycle starts of order m lie outside the level m+2 return domain, except
    the visit the forward walk starts from."""
    for order in dec.orders:
        m = order.m
        if m + 2 > dec.n - 2:
            continue
        inner_left, inner_right = cf.lam[m + 2], 1 - cf.lam[m + 3]
        for i, cyc in enumerate(order.cycles):
            if i != order.cunder and (cyc.start < inner_left or cyc.start >= inner_right):
                return False
    return True


@_timed
def decomposition_exactness(samples: int = 200, max_N: int = 10_000, seed: int = 6) -> CheckResult:
    rng = np.random.default_rng(seed)
    coverage = sums = bounds = visits = 0
    worst = 0.0
    for _ in range(samples):
        cf = cf_expand(sample_point(rng))
        x = sample_point(rng)
        N = int(rng.integers(1, max_N + 1))
        dec = decompose(cf, x, N)
        coverage += dec.covered_indices() != list(range(N))
        direct = birkhoff_direct(cf, x, N)
        via = birkhoff_via_cycles(cf, x, N, decomposition=dec)
        rel = abs(direct - via) / max(abs(direct), 1e-300)
        worst = max(worst, rel)
        sums += rel > 1e-9
        bounds += not remark_bounds_ok(cf, dec)
        visits += not visits_outside_next(cf, dec)
    return CheckResult("decomposition_exactness", coverage == sums == bounds == visits == 0,
                       {"instances": samples, "coverage_failures": coverage, "sum_failures": sums,
                        "bound_failures": bounds, "visit_failures": visits, "worst_rel": f"{worst:.2e}"})


@_timed
def replay_bit_exact(samples: int = 50, N: int = 10_000, eps: float = 0.1, M_orders: int = 6,
                     seed: int = 7) -> CheckResult:
    """G recomputed from its captured ratio trace equals the original bit for bit."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(samples):
        cf = cf_expand(sample_point(rng))
        x = sample_point(rng)
        original = G_eps_delta(cf, x, N, 1.0, eps, 0.05, M_orders)
        replayed = G_from_trace(capture_trace(cf, x, N, eps, M_orders), 1.0, eps, M_orders)
        mismatches += original.hex() != replayed.hex()
    return CheckResult("replay_bit_exact", mismatches == 0, {"instances": samples, "mismatches": mismatches})


@_timed
def trig_crosscheck(samples: int = 1000, N: int = 1000, seed: int = 8) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_real = 0.0
    failures = 0
    for _ in range(samples):
        cf = cf_expand(sample_point(rng))
        x = sample_point(rng)
        try:
            value = trig_average(cf, x, N)
        except AssertionError:
            failures += 1
            continue
        worst_real = max(worst_real, abs(value.real - 0.5))
    ok = failures == 0 and worst_real <= 1e-9
    return CheckResult("trig_crosscheck", ok,
                       {"instances": samples, "crosscheck_failures": failures,
                        "max_real_dev": f"{worst_real:.1e}"})


@_timed
def histogram_merge(seed: int = 9) -> CheckResult:
    rng = np.random.default_rng(seed)
    values = rng.standard_cauchy(5000) * 10
    whole = Histogram.from_values(values)
    parts = [Histogram.from_values(chunk) for chunk in np.array_split(values, 7)]
    forward = parts[0]
    for h in parts[1:]:
        forward = forward.merge(h)
    backward = parts[-1]
    for h in reversed(parts[:-1]):
        backward = h.merge(backward)
    ok = all(
        np.array_equal(whole.counts, m.counts) and whole.underflow == m.underflow
        and whole.overflow == m.overflow for m in (forward, backward)
    )
    ok &= whole.total == len(values)
    return CheckResult("histogram_merge", ok, {"values": len(values), "shards": len(parts)})


def run_suite(quick: bool = False) -> list[CheckResult]:
    if quick:
        return [
            cf_invariants(500),
            almost_symmetry(20, cap=3000),
            cycle_relations(100),
            universal_cycle_bound(100),
            truncation_contract(50, (0.5, 0.1)),
            decomposition_exactness(20, 3000),
            replay_bit_exact(5),
            trig_crosscheck(50, 500),
            histogram_merge(),
        ]
    return [
        cf_invariants(),
        almost_symmetry(),
        cycle_relations(),
        universal_cycle_bound(),
        truncation_contract(),
        decomposition_exactness(),
        replay_bit_exact(),
        trig_crosscheck(),
        histogram_merge(),
    ]
