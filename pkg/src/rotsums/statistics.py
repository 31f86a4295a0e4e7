"""Monte Carlo over uniform (alpha, x): laws of S_N/N and of the complex
average, renewal statistics of q_{n(N)}/N, and the growth of a_{n(N)-k}.

Samples are 128-bit dyadic points.  The orbit engine keeps every lane as two
uint64 limbs, so x + i alpha mod 1 is exact and only the final reciprocal is
rounded.  Work is cut into fixed-size shards, each seeded from
SeedSequence(seed, spawn_key=(shard,)), so results do not depend on how many
processes run them.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats as sps

from rotsums.cf_core import GRID, GRID_BITS, cf_expand, n_of
from rotsums.errors import InsufficientDepth, KindMismatch
from rotsums.sums import FunctionConfig

SHARD_SIZE = 8192
CORE_RANGE = (-50.0, 50.0)
DEFAULT_BINS = 100
QUANTILE_LEVELS = tuple(p / 100 for p in range(1, 100))
ENTRY_CAP = 20
COMPLEX_GRID = 20
COMPLEX_RESOLUTION = 1e-9  # complex marginals are compared on this grid

_TWO64 = 2.0**-64
_TWO128 = 2.0**-128


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("ROTSUMS_JOBS", "1")))
    except ValueError:
        return 1


# Orbit engine ----------------------------------------------------------------

def _to_float(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    return hi.astype(np.float64) * _TWO64 + lo.astype(np.float64) * _TWO128


def _complement(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """1 - x as a float, from the exact two's complement."""
    nlo = ~lo + np.uint64(1)
    nhi = ~hi + (lo == 0).astype(np.uint64)
    return _to_float(nhi, nlo)


def _neumaier(total: np.ndarray, comp: np.ndarray, v: np.ndarray) -> np.ndarray:
    t = total + v
    comp += np.where(np.abs(total) >= np.abs(v), (total - t) + v, (v - t) + total)
    return t


def orbit_averages(alpha: np.ndarray, x: np.ndarray, N: int, mode: str = "f1",
                   config: FunctionConfig | None = None):
    """Per-lane (1/N) sum over i < N at x + i alpha.

    ``alpha`` and ``x`` are (lanes, 2) uint64 arrays of (hi, lo) limbs.
    mode "f1" gives the f average (real); mode "complex" gives the average of
    1/(1 - e^{2 pi i t}).  Returns (values, ok) where ok is False for lanes
    whose orbit hit 0.
    """
    config = config or FunctionConfig()
    if mode not in ("f1", "complex"):
        raise ValueError(f"unknown mode {mode!r}")
    with np.errstate(over="ignore"):
        ahi, alo = alpha[:, 0].copy(), alpha[:, 1].copy()
        hi, lo = x[:, 0].copy(), x[:, 1].copy()
        lanes = len(hi)
        ok = np.ones(lanes, dtype=bool)
        s_re, c_re = np.zeros(lanes), np.zeros(lanes)
        s_im, c_im = np.zeros(lanes), np.zeros(lanes)
        smooth = config.smooth_part
        with np.errstate(divide="ignore", invalid="ignore"):
            for _ in range(N):
                ok &= (hi != 0) | (lo != 0)
                t = _to_float(hi, lo)
                u = _complement(hi, lo)
                if mode == "f1":
                    v = config.c * (1.0 / t - 1.0 / u) if config.c else np.zeros(lanes)
                    if smooth is not None:
                        v = v + smooth(t)
                    s_re = _neumaier(s_re, c_re, v)
                else:
                    folded = np.where(t <= 0.5, t, -u)
                    half = np.sin(np.pi * folded)
                    full = np.sin(2 * np.pi * folded)
                    denom = 4 * half**4 + full * full
                    s_re = _neumaier(s_re, c_re, 2 * half * half / denom)
                    s_im = _neumaier(s_im, c_im, full / denom)
                lo = lo + alo
                hi = hi + ahi + (lo < alo).astype(np.uint64)
    if mode == "f1":
        return (s_re + c_re) / N, ok
    return ((s_re + c_re) + 1j * (s_im + c_im)) / N, ok


def limbs_to_fraction(limbs) -> Fraction:
    return Fraction((int(limbs[0]) << 64) | int(limbs[1]), GRID)


def _shard_rng(seed: int, shard: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shard,)))


def _draw(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(0, 1 << 64, size=(count, 2), dtype=np.uint64, endpoint=False)


def _nonzero(limbs: np.ndarray) -> np.ndarray:
    return (limbs[:, 0] != 0) | (limbs[:, 1] != 0)


def _shards(samples: int) -> list[tuple[int, int]]:
    return [(i, min(SHARD_SIZE, samples - i * SHARD_SIZE))
            for i in range(math.ceil(samples / SHARD_SIZE))]


def _run_shards(worker, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


# Distributions ---------------------------------------------------------------

@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    @classmethod
    def empty(cls, bins: int = DEFAULT_BINS, core: tuple[float, float] = CORE_RANGE) -> "Histogram":
        return cls(np.linspace(core[0], core[1], bins + 1), np.zeros(bins, dtype=np.int64))

    @classmethod
    def from_values(cls, values: np.ndarray, bins: int = DEFAULT_BINS,
                    core: tuple[float, float] = CORE_RANGE) -> "Histogram":
        h = cls.empty(bins, core)
        values = np.asarray(values, dtype=float)
        inside = (values >= core[0]) & (values <= core[1])
        h.counts, _ = np.histogram(values[inside], bins=h.edges)
        h.counts = h.counts.astype(np.int64)
        h.underflow = int(np.count_nonzero(values < core[0]))
        h.overflow = int(np.count_nonzero(values > core[1]))
        return h

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def merge(self, other: "Histogram") -> "Histogram":
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("histograms have different edges")
        return Histogram(self.edges, self.counts + other.counts,
                         self.underflow + other.underflow, self.overflow + other.overflow)


def _components(kind: str, values: np.ndarray) -> dict[str, np.ndarray]:
    if kind == "scalar":
        return {"value": np.asarray(values, dtype=float)}
    return {"real": values.real.copy(), "imag": values.imag.copy()}


@dataclass
class EmpiricalDistribution:
    kind: str  # "scalar" or "complex"
    samples: int
    values: np.ndarray
    bins: dict[str, Histogram]
    quantiles: dict[str, list[tuple[float, float]]]
    seed: int
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, kind: str, values: np.ndarray, seed: int, meta: dict | None = None,
                    bins: int = DEFAULT_BINS, core: tuple[float, float] = CORE_RANGE,
                    histograms: dict[str, Histogram] | None = None) -> "EmpiricalDistribution":
        if kind not in ("scalar", "complex"):
            raise ValueError(f"unknown kind {kind!r}")
        parts = _components(kind, values)
        if histograms is None:
            histograms = {k: Histogram.from_values(v, bins, core) for k, v in parts.items()}
        quantiles = {
            k: list(zip(QUANTILE_LEVELS, np.quantile(v, QUANTILE_LEVELS).tolist()))
            for k, v in parts.items()
        }
        return cls(kind, len(values), values, histograms, quantiles, seed, dict(meta or {}))


def _snap(v: np.ndarray) -> np.ndarray:
    return np.round(v / COMPLEX_RESOLUTION) * COMPLEX_RESOLUTION


def _grid_cdf(re: np.ndarray, im: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    ix = np.searchsorted(gx, re, side="left")  # number of grid points < value
    iy = np.searchsorted(gy, im, side="left")
    cells = np.zeros((len(gx) + 1, len(gy) + 1))
    np.add.at(cells, (ix, iy), 1.0)
    # F(gx[a], gy[b]) = share with re <= gx[a] and im <= gy[b]
    cum = cells.cumsum(axis=0).cumsum(axis=1)
    return cum[: len(gx), : len(gy)] / len(re)


def ks_distance(d1: EmpiricalDistribution, d2: EmpiricalDistribution) -> float:
    """Two-sample sup-CDF distance.

    Complex laws: max of the two marginal distances and the sup over a
    20x20 grid (pooled marginal quantiles) of the joint CDF difference.
    """
    if d1.kind != d2.kind:
        raise KindMismatch(f"cannot compare {d1.kind} with {d2.kind}")
    if d1.kind == "scalar":
        return float(sps.ks_2samp(d1.values, d2.values).statistic)
    re1, im1 = _snap(d1.values.real), _snap(d1.values.imag)
    re2, im2 = _snap(d2.values.real), _snap(d2.values.imag)
    marginal = max(sps.ks_2samp(re1, re2).statistic, sps.ks_2samp(im1, im2).statistic)
    levels = np.arange(1, COMPLEX_GRID + 1) / COMPLEX_GRID
    gx = np.quantile(np.concatenate([re1, re2]), levels)
    gy = np.quantile(np.concatenate([im1, im2]), levels)
    joint = np.abs(_grid_cdf(re1, im1, gx, gy) - _grid_cdf(re2, im2, gx, gy)).max()
    return float(max(marginal, joint))


def ks_uniform(values: np.ndarray) -> float:
    return float(sps.kstest(values, "uniform").statistic)


def _snn_shard(task) -> tuple[np.ndarray, int]:
    seed, shard, count, N, mode, c, smooth = task
    rng = _shard_rng(seed, shard)
    config = FunctionConfig(c, smooth)
    out = np.empty(count, dtype=complex if mode == "complex" else float)
    need = np.arange(count)
    rejected = 0
    while need.size:
        alpha, x = _draw(rng, need.size), _draw(rng, need.size)
        vals, ok = orbit_averages(alpha, x, N, mode, config)
        ok &= _nonzero(alpha)
        out[need[ok]] = vals[ok]
        rejected += int(np.count_nonzero(~ok))
        need = need[~ok]
    return out, rejected


def empirical_snn(N: int, samples: int, seed: int, config: FunctionConfig | None = None,
                  mode: str = "f1", bins: int = DEFAULT_BINS, jobs: int = 1) -> EmpiricalDistribution:
    """Law of S_N/N (mode "f1") or of the complex average (mode "complex")."""
    config = config or FunctionConfig()
    if N < 1 or samples < 1:
        raise ValueError("N and samples must be positive")
    if mode == "complex" and (config.c != 1.0 or config.smooth is not None):
        raise ValueError("the complex average has no function parameters")
    if config.smooth is not None and not isinstance(config.smooth, str):
        raise ValueError("sampling needs a registered smooth part")
    tasks = [(seed, i, n, N, mode, config.c, config.smooth) for i, n in _shards(samples)]
    results = _run_shards(_snn_shard, tasks, jobs)
    kind = "complex" if mode == "complex" else "scalar"
    histograms = None
    for vals, _ in results:
        h = {k: Histogram.from_values(v, bins) for k, v in _components(kind, vals).items()}
        histograms = h if histograms is None else {k: histograms[k].merge(h[k]) for k in h}
    values = np.concatenate([v for v, _ in results])
    meta = {
        "N": N,
        "mode": mode,
        "function": "1/(1-exp(2 pi i x))" if mode == "complex" else config.label,
        "grid_bits": GRID_BITS,
        "rejected": sum(r for _, r in results),
        "shard_size": SHARD_SIZE,
    }
    return EmpiricalDistribution.from_values(kind, values, seed, meta, bins, histograms=histograms)


# Renewal statistics ---------------------------------------------------------------

FORCED_RANGE_QUANTITIES = ("q_n/q_n1", "lam_n1/lam_n", "1/(q_n lam_n1)", "1/(q_n1 lam_n)")


def forced_ranges_ok(values: dict[str, float]) -> bool:
    """Ranges forced by q_{n+1} lambda_n + q_n lambda_{n+1} = 1 and monotonicity."""
    return (
        0 < values["q_n/q_n1"] < 1
        and 0 < values["lam_n1/lam_n"] < 1
        and values["1/(q_n lam_n1)"] > 2
        and 1 <= values["1/(q_n1 lam_n)"] <= 2
    )


def _renewal_sample(alpha: Fraction, N: int, M: int):
    cf = cf_expand(alpha)
    n = n_of(N, cf)
    cf.require(n + 1)
    entries = tuple(
        min(cf.a(n + k), ENTRY_CAP) if 1 <= n + k <= cf.depth else None
        for k in range(-M, M + 1)
    )
    if any(e is None for e in entries[M:]):
        raise InsufficientDepth("expansion ends too close to n(N)")
    q, lam = cf.q, cf.lam
    quantities = {
        "q_n/q_n1": Fraction(q[n], q[n + 1]),
        "lam_n1/lam_n": lam[n + 1] / lam[n],
        "1/(q_n lam_n1)": 1 / (q[n] * lam[n + 1]),
        "1/(q_n1 lam_n)": 1 / (q[n + 1] * lam[n]),
    }
    return Fraction(q[n], N), entries, quantities


def _renewal_shard(task):
    seed, shard, count, N, M = task
    rng = _shard_rng(seed, shard)
    ratios, entries, quantities = [], [], {k: [] for k in FORCED_RANGE_QUANTITIES}
    range_failures = rejected = 0
    while len(ratios) < count:
        alpha = limbs_to_fraction(_draw(rng, 1)[0])
        try:
            if alpha == 0:
                raise InsufficientDepth("alpha = 0")
            ratio, ent, qty = _renewal_sample(alpha, N, M)
        except InsufficientDepth:
            rejected += 1
            continue
        ratios.append(float(ratio))
        entries.append(ent)
        exact_ok = ratio > 1 and forced_ranges_ok(qty)
        range_failures += not exact_ok
        for k, v in qty.items():
            quantities[k].append(float(v))
    return ratios, entries, quantities, range_failures, rejected


@dataclass
class RenewalStats:
    N: int
    M: int
    samples: int
    seed: int
    ratio_hist: EmpiricalDistribution
    entry_freqs: dict[int, dict[str, int]]  # k -> bucket -> count
    joint: list[tuple[tuple, int]]  # sparse joint table of (a_{n-M}, ..., a_{n+M})
    ratio_quantities: dict[str, EmpiricalDistribution]
    range_failures: int
    meta: dict = field(default_factory=dict)


def _bucket(v) -> str:
    if v is None:
        return "none"
    return f">={ENTRY_CAP}" if v >= ENTRY_CAP else str(v)


def renewal_stats(N: int, samples: int, M: int, seed: int, jobs: int = 1) -> RenewalStats:
    if not 0 <= M <= 8:
        raise ValueError("M must lie in 0..8")
    tasks = [(seed, i, n, N, M) for i, n in _shards(samples)]
    results = _run_shards(_renewal_shard, tasks, jobs)
    ratios = np.array([r for res in results for r in res[0]])
    entries = [e for res in results for e in res[1]]
    quantities = {
        k: np.array([v for res in results for v in res[2][k]]) for k in FORCED_RANGE_QUANTITIES
    }
    freqs: dict[int, dict[str, int]] = {}
    for j, k in enumerate(range(-M, M + 1)):
        counts = Counter(_bucket(e[j]) for e in entries)
        freqs[k] = dict(sorted(counts.items(), key=lambda kv: (len(kv[0]), kv[0])))
    joint = Counter(tuple(_bucket(v) for v in e) for e in entries)
    meta = {"grid_bits": GRID_BITS, "rejected": sum(res[4] for res in results), "entry_cap": ENTRY_CAP}
    return RenewalStats(
        N=N,
        M=M,
        samples=samples,
        seed=seed,
        ratio_hist=EmpiricalDistribution.from_values("scalar", ratios, seed, {"N": N}, core=(0.0, 50.0)),
        entry_freqs=freqs,
        joint=sorted(joint.items(), key=lambda kv: (-kv[1], kv[0])),
        ratio_quantities={
            k: EmpiricalDistribution.from_values("scalar", v, seed, {"N": N}, core=(0.0, 50.0))
            for k, v in quantities.items()
        },
        range_failures=sum(res[3] for res in results),
        meta=meta,
    )


# Growth bound and tower variables -----------------------------------------------

def _power_shard(task):
    seed, shard, count, N, Cs = task
    rng = _shard_rng(seed, shard)
    worst = []  # per sample: max over k of a_{n-k}/(k+1)^2
    while len(worst) < count:
        alpha = limbs_to_fraction(_draw(rng, 1)[0])
        if alpha == 0:
            continue
        cf = cf_expand(alpha)
        try:
            n = n_of(N, cf)
        except InsufficientDepth:
            continue
        worst.append(max(Fraction(cf.a(n - k), (k + 1) ** 2) for k in range(n)))
    return [[w > C for w in worst] for C in Cs]


def power_bound_rates(N: int, samples: int, Cs, seed: int, jobs: int = 1) -> dict[float, float]:
    """For each C, the share of alpha with a_{n(N)-k} > C (k+1)^2 for some k < n(N)."""
    Cs = [float(C) for C in Cs]
    tasks = [(seed, i, n, N, Cs) for i, n in _shards(samples)]
    results = _run_shards(_power_shard, tasks, jobs)
    return {C: sum(sum(res[j]) for res in results) / samples for j, C in enumerate(Cs)}


def power_bound_rate(N: int, samples: int, C: float, seed: int, jobs: int = 1) -> float:
    if not C > 0:
        raise ValueError("C must be positive")
    return power_bound_rates(N, samples, [C], seed, jobs)[float(C)]


def _tower_shard(task):
    from rotsums.decomposition import dn_hn_tn

    seed, shard, count, N = task
    rng = _shard_rng(seed, shard)
    out = []
    while len(out) < count:
        alpha, x = _draw(rng, 1)[0], _draw(rng, 1)[0]
        if not (alpha.any() and x.any()):
            continue
        try:
            out.append(dn_hn_tn(cf_expand(limbs_to_fraction(alpha)), limbs_to_fraction(x), N))
        except InsufficientDepth:
            continue
    return out


def tower_variables(N: int, samples: int, seed: int, jobs: int = 1) -> np.ndarray:
    """(samples, 3) array of D_N, H_N, T_N over uniform (alpha, x)."""
    tasks = [(seed, i, n, N) for i, n in _shards(samples)]
    rows = [r for res in _run_shards(_tower_shard, tasks, jobs) for r in res]
    return np.array(rows, dtype=float)
