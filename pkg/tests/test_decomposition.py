import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import dyadic
from rotsums.cf_core import UnitFrame, cf_expand, fibonacci_ratio, n_of, sample_point
from rotsums.checks import remark_bounds_ok, visits_outside_next
from rotsums.cycles import cycle_sum_exact, g_eps
from rotsums.decomposition import (
    G_eps_delta,
    G_from_trace,
    birkhoff_via_cycles,
    calibrate_orders,
    capture_trace,
    decompose,
    dn_hn_tn,
    induced_map_step,
    locate,
    order_truncation_profile,
    replay_cycles,
)
from rotsums.cycles import cycle_ratios
from rotsums.errors import InsufficientDepth, PointOutsideDomain
from rotsums.partitions import build_level
from rotsums.sums import birkhoff_direct, f1_eval

FIB = cf_expand(fibonacci_ratio(30))


def _deep(alpha, N):
    """Expansion of alpha, skipping examples too shallow for this N."""
    cf = cf_expand(alpha)
    try:
        n = n_of(N, cf)
        cf.require(n)
    except InsufficientDepth:
        assume(False)
    return cf


def _first_return(cf, n, point):
    """Raw rotation steps until the orbit is back in the level-n domain."""
    inside = lambda p: p < cf.lam[n] or p >= 1 - cf.lam[n + 1]
    p, steps = point, 0
    while True:
        p = (p + cf.alpha) % 1
        steps += 1
        if inside(p):
            return p, steps


def test_step_on_long_base():
    x = FIB.lam[4] / 3
    assert induced_map_step(FIB, 4, x) == (x - FIB.lam[5]) % 1


def test_step_inverse():
    for x in (FIB.lam[4] / 3, 1 - FIB.lam[5] / 5):
        assert induced_map_step(FIB, 4, induced_map_step(FIB, 4, x), inverse=True) == x


def test_step_matches_rotation_oracle():
    x = FIB.lam[6] * Fraction(2, 7)
    image, steps = _first_return(FIB, 6, x)
    assert image == induced_map_step(FIB, 6, x)
    assert steps == FIB.q[7]


def test_step_outside_domain():
    with pytest.raises(PointOutsideDomain):
        induced_map_step(FIB, 4, Fraction(1, 2))


def test_locate_base_floor():
    N = 50
    n = n_of(N, FIB)
    x = FIB.lam[n - 2] / 3
    pos = locate(FIB, N, x)
    assert (pos.tag, pos.j, pos.h, pos.d) == ("l", 0, FIB.q[n - 1], x)


def test_locate_one_step_up():
    N = 50
    n = n_of(N, FIB)
    x0 = FIB.lam[n - 2] / 3
    pos = locate(FIB, N, (x0 + FIB.alpha) % 1)
    assert (pos.tag, pos.j, pos.h, pos.d) == ("l", 1, FIB.q[n - 1] - 1, x0)


def test_locate_shallow():
    with pytest.raises(InsufficientDepth):
        locate(cf_expand(Fraction(3, 7)), 100, Fraction(1, 5))


@given(dyadic, dyadic, st.integers(min_value=1, max_value=4000))
def test_locate_matches_floor_search(alpha, x, N):
    cf = _deep(alpha, N)
    n = n_of(N, cf)
    if n > 12 or cf.q[n - 2] + cf.q[n - 1] > 20_000:
        return
    level = build_level(cf, n - 2)
    frame = UnitFrame(cf, level.denominator)
    u = x.numerator * level.denominator // x.denominator  # floor units
    i = int(np.searchsorted(np.array(level.lefts, dtype=object), u, side="right")) - 1
    pos = locate(cf, N, x)
    assert pos.tag == level.kinds[i] and pos.j == level.floors[i]
    base = pos.d if pos.tag == "l" else 1 - pos.d
    assert (base + pos.j * cf.alpha) % 1 == x
    q = cf.q[n - 1] if pos.tag == "l" else cf.q[n - 2]
    assert pos.h == q - pos.j
    del frame


def test_single_full_cycle():
    N = 55
    n = n_of(N, FIB)
    assert FIB.q[n - 1] == N
    x = FIB.lam[n - 2] / 3
    dec = decompose(FIB, x, N)
    assert len(dec.orders) == 1
    (order,) = dec.orders
    assert order.m == n - 2 and len(order.cycles) == 1
    assert order.cycles[0].start == x and order.cycles[0].r == N
    assert birkhoff_via_cycles(FIB, x, N) == cycle_sum_exact(FIB, n - 2, x)


def test_single_point():
    x = Fraction(1, 2) + Fraction(1, 2**40)
    assert birkhoff_via_cycles(FIB, x, 1) == pytest.approx(f1_eval(x), rel=1e-12)


@given(dyadic, dyadic, st.integers(min_value=1, max_value=3000))
def test_decomposition_covers_orbit(alpha, x, N):
    cf = _deep(alpha, N)
    dec = decompose(cf, x, N)
    assert dec.covered_indices() == list(range(N))
    assert remark_bounds_ok(cf, dec)
    assert visits_outside_next(cf, dec)
    for order in dec.orders:
        assert order.cbar + order.cunder == len(order.cycles) > 0
        for cyc in order.cycles:
            assert (cyc.start - x - cyc.index * cf.alpha) % 1 == 0


@given(dyadic, dyadic, st.integers(min_value=1, max_value=3000))
def test_cycle_sum_matches_direct(alpha, x, N):
    cf = _deep(alpha, N)
    direct = birkhoff_direct(cf, x, N)
    assert birkhoff_via_cycles(cf, x, N) == pytest.approx(direct, rel=1e-9, abs=1e-9)


def _full_order_mean(cf, x, N, eps):
    dec = decompose(cf, x, N)
    return math.fsum(
        cyc.r / N * g_eps(cf, o.m, cyc.start, 1.0, eps / 2) for o in dec.orders for cyc in o.cycles
    )


def test_all_orders_kept():
    rng = np.random.default_rng(3)
    for _ in range(10):
        cf, x, N = cf_expand(sample_point(rng)), sample_point(rng), 2000
        n = n_of(N, cf)
        got = G_eps_delta(cf, x, N, 1.0, 0.1, 0.05, n + n % 2)
        assert got == pytest.approx(_full_order_mean(cf, x, N, 0.1), rel=1e-12, abs=1e-12)


def test_replay_matches_exact_inventory():
    rng = np.random.default_rng(4)
    for _ in range(30):
        cf, x, N = cf_expand(sample_point(rng)), sample_point(rng), int(rng.integers(50, 10_000))
        dec = decompose(cf, x, N)
        M = 6
        exact = [(o.m, c) for o in dec.orders if o.m >= dec.n - M for c in o.cycles]
        replayed = replay_cycles(capture_trace(cf, x, N, 0.2, M), 0.2, M)
        assert len(exact) == len(replayed)
        for (m, cyc), rc in zip(exact, replayed):
            assert m == dec.n - 2 - 2 * rc.rel_order
            assert rc.weight == Fraction(cyc.r, N)
            assert rc.ratios == cycle_ratios(cf, m, cyc.start, 0.1)


def test_replay_bit_exact():
    rng = np.random.default_rng(5)
    for _ in range(10):
        cf, x = cf_expand(sample_point(rng)), sample_point(rng)
        trace = capture_trace(cf, x, 10_000, 0.1, 8)
        assert G_from_trace(trace, 1.0, 0.1, 8).hex() == G_eps_delta(cf, x, 10_000, 1.0, 0.1, 0.05, 8).hex()


def test_refinement_consistency():
    rng = np.random.default_rng(6)
    for _ in range(10):
        cf, x, N = cf_expand(sample_point(rng)), sample_point(rng), 5000
        M, eps = 6, 0.2
        coarse = G_eps_delta(cf, x, N, 1.0, eps, 0.05, M)
        fine = G_eps_delta(cf, x, N, 1.0, eps / 2, 0.05, M + 2)
        tails = order_truncation_profile(cf, x, N, [M, M + 2])
        assert abs(coarse - fine) <= eps / 2 + eps / 4 + tails[M] + tails[M + 2] + 1e-9


def test_g_contract_pilot():
    rng = np.random.default_rng(8)
    hits = 0
    for _ in range(100):
        cf, x = cf_expand(sample_point(rng)), sample_point(rng)
        s = birkhoff_via_cycles(cf, x, 1000) / 1000
        hits += abs(s - G_eps_delta(cf, x, 1000, 1.0, 0.05, 0.05, 12)) <= 0.1
    assert hits >= 95


def test_bad_orders():
    with pytest.raises(ValueError):
        G_eps_delta(FIB, Fraction(1, 3), 100, M_orders=3)


def test_tower_variables_base_floor():
    N = 50
    n = n_of(N, FIB)
    D, H, T = dn_hn_tn(FIB, FIB.lam[n - 2] / 3, N)
    assert D == pytest.approx(1 / 3) and H == 1.0
    assert T == pytest.approx(float(1 / (FIB.q[n - 1] * FIB.lam[n - 2])))


@given(dyadic, dyadic, st.integers(min_value=2, max_value=10**6))
def test_tower_variable_ranges(alpha, x, N):
    cf = _deep(alpha, N)
    pos = locate(cf, N, x)
    D, H, T = dn_hn_tn(cf, x, N)
    assert 0 <= D < 1 and 0 < H <= 1
    if pos.tag == "l":
        assert 1 <= T <= 2
    else:
        assert T >= 1


def test_truncation_profile_monotone_per_sample():
    rng = np.random.default_rng(9)
    rates = {M: 0 for M in (2, 4, 6, 8)}
    for _ in range(150):
        cf, x = cf_expand(sample_point(rng)), sample_point(rng)
        prof = order_truncation_profile(cf, x, 10_000, rates)
        for M in rates:
            rates[M] += prof[M] >= 0.1
    values = [rates[M] for M in (2, 4, 6, 8)]
    assert values == sorted(values, reverse=True)


def test_calibration_small():
    cal = calibrate_orders(2000, eps=0.2, delta=0.2, samples=40, seed=1)
    assert cal.M_orders % 2 == 0 and cal.miss_rate[cal.M_orders] <= 0.2
