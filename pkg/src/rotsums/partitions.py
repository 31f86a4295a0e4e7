"""Level-n tilings of the circle by the floors of the two rotation towers.

For even n the long base is [0, lambda_n) and the short base is
[1 - lambda_{n+1}, 1); floors are their images under j rotation steps,
j < q_{n+1} (long, letter ``l``) and j < q_n (short, letter ``s``).
Everything is computed from exact endpoints {j alpha}; the letter
substitution between consecutive levels is kept only as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from rotsums.cf_core import CFExpansion
from rotsums.errors import LevelTooLarge

MAX_INTERVALS = 10**7


@dataclass(frozen=True)
class Interval:
    left: Fraction
    type: str
    j: int


@dataclass(frozen=True)
class CodingString:
    letters: str

    def __post_init__(self):
        if set(self.letters) - {"l", "s"}:
            raise ValueError("coding strings use only the letters l and s")

    def __str__(self) -> str:
        return self.letters

    def __len__(self) -> int:
        return len(self.letters)

    def __getitem__(self, i):
        return self.letters[i]

    def count(self, letter: str) -> int:
        return self.letters.count(letter)

    def s_gaps(self) -> list[int]:
        """Number of l letters strictly between consecutive s letters."""
        pos = [i for i, ch in enumerate(self.letters) if ch == "s"]
        return [b - a - 1 for a, b in zip(pos, pos[1:])]


@dataclass(frozen=True)
class PartitionLevel:
    n: int
    q_n: int
    q_n1: int
    lambda_n: Fraction
    lambda_n1: Fraction
    denominator: int
    # left endpoints in units of 1/denominator, sorted ascending
    lefts: tuple[int, ...]
    kinds: str
    floors: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.lefts)

    @property
    def intervals(self) -> list[Interval]:
        den = self.denominator
        return [
            Interval(Fraction(u, den), t, j)
            for u, t, j in zip(self.lefts, self.kinds, self.floors)
        ]

    def length_units(self, kind: str) -> int:
        lam = self.lambda_n if kind == "l" else self.lambda_n1
        return lam.numerator * (self.denominator // lam.denominator)


def _check_even(n: int) -> None:
    if n < 0 or n % 2:
        raise ValueError(f"level must be a non-negative even integer, got {n}")


def build_level(cf: CFExpansion, n: int, max_intervals: int = MAX_INTERVALS) -> PartitionLevel:
    _check_even(n)
    cf.require(n + 1)
    qn, qn1 = cf.q[n], cf.q[n + 1]
    if qn + qn1 > max_intervals:
        raise LevelTooLarge(f"level {n} has {qn + qn1} intervals (cap {max_intervals})")
    D = cf.denominator
    A = cf.alpha.numerator
    short = cf.lam_num[n + 1]
    entries = [((j * A) % D, 0, j) for j in range(qn1)]
    entries += [((j * A - short) % D, 1, j) for j in range(qn)]
    entries.sort()
    return PartitionLevel(
        n=n,
        q_n=qn,
        q_n1=qn1,
        lambda_n=cf.lam[n],
        lambda_n1=cf.lam[n + 1],
        denominator=D,
        lefts=tuple(e[0] for e in entries),
        kinds="".join("ls"[e[1]] for e in entries),
        floors=tuple(e[2] for e in entries),
    )


def check_tiling(level: PartitionLevel) -> bool:
    """Intervals are contiguous, start at 0, end at 1, with the right lengths."""
    long_len, short_len = level.length_units("l"), level.length_units("s")
    pos = 0
    for left, kind in zip(level.lefts, level.kinds):
        if left != pos:
            return False
        pos += long_len if kind == "l" else short_len
    return pos == level.denominator


def coding_string(level: PartitionLevel) -> CodingString:
    return CodingString(level.kinds)


def reflected_string(level: PartitionLevel) -> CodingString:
    """Coding of the tiling seen through x -> 1 - x, from reflected endpoints."""
    D = level.denominator
    long_len, short_len = level.length_units("l"), level.length_units("s")
    mirrored = sorted(
        (D - (left + (long_len if kind == "l" else short_len)), kind)
        for left, kind in zip(level.lefts, level.kinds)
    )
    return CodingString("".join(kind for _, kind in mirrored))


@dataclass(frozen=True)
class MiddlePoints:
    """Interval midpoints in units of 1/denominator (twice the level's)."""

    denominator: int
    z_long: tuple[int, ...]
    z_long_reflected: tuple[int, ...]
    z_short: tuple[int, ...]
    z_short_reflected: tuple[int, ...]


def middle_points(level: PartitionLevel) -> MiddlePoints:
    D2 = 2 * level.denominator
    long_len, short_len = level.length_units("l"), level.length_units("s")
    zl = [2 * u + long_len for u, t in zip(level.lefts, level.kinds) if t == "l"]
    zs = [2 * u + short_len for u, t in zip(level.lefts, level.kinds) if t == "s"]
    return MiddlePoints(
        denominator=D2,
        z_long=tuple(zl),
        z_long_reflected=tuple(sorted(D2 - z for z in zl)),
        z_short=tuple(zs),
        z_short_reflected=tuple(sorted(D2 - z for z in zs)),
    )


# Letter substitution ------------------------------------------------------

def substitute(letters: str, digit: int, level: int) -> str:
    """Refine a level-``level`` coding into level ``level + 1``.

    A short floor becomes a long one; a long floor splits into ``digit``
    long floors and one short floor, the short piece sitting at the end
    nearest 0 on even levels and nearest 1 on odd levels.
    """
    long_image = "s" + "l" * digit if level % 2 == 0 else "l" * digit + "s"
    return "".join(long_image if ch == "l" else "l" for ch in letters)


def substituted_string(cf: CFExpansion, n: int, base: int = 0) -> str:
    """Level-n coding obtained from the level-``base`` coding by substitution,
    using digit a_{m+2} for the step m -> m+1."""
    _check_even(base)
    letters = build_level(cf, base).kinds
    for m in range(base, n):
        letters = substitute(letters, cf.a(m + 2), m)
    return letters

