"""Strip crossings, c-level crossing counts and Lebesgue partitions.

All functions here read a :class:`~fbmtv.core.SamplePath` as the
piecewise-linear interpolation of its samples. A sample that lands exactly on
a level counts as attaining it; an upcrossing of ``[a, a+c]`` completes at the
first touch of ``a+c`` after the last touch of ``a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import LevelGrid, SamplePath, TimeInterval, check_truncation, restrict
from .errors import ValidationError
from .variation import ttv, variation_value


def _values(path, iv: TimeInterval | None = None) -> np.ndarray:
    if isinstance(path, SamplePath):
        return (restrict(path, iv) if iv is not None else path).values
    if iv is not None:
        raise ValidationError("a time interval needs a SamplePath, not a bare array")
    x = np.ascontiguousarray(path, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValidationError("expected a one-dimensional sequence of values")
    return x


@dataclass(frozen=True)
class CrossingCounts:
    u: int
    d: int

    @property
    def n(self) -> int:
        return self.u + self.d


@dataclass(frozen=True)
class LevelCrossingSummary:
    """Crossings of every strip ``[p*c + rho, (p+1)*c + rho]``.

    ``per_level`` maps ``p`` to the counts of that strip; only strips with
    at least one crossing are listed.
    """

    grid: LevelGrid
    ku: int
    kd: int
    per_level: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.ku + self.kd

    def to_dict(self) -> dict:
        return {
            "c": self.grid.c,
            "rho": self.grid.rho,
            "k": self.k,
            "ku": self.ku,
            "kd": self.kd,
            "per_level": [
                {"p": p, "lower": self.grid.level(p), "u": cc.u, "d": cc.d, "n": cc.n}
                for p, cc in sorted(self.per_level.items())
            ],
        }


@dataclass(frozen=True)
class LebesguePartition:
    """Hitting times of the grid and the level hit at each time.

    Consecutive levels differ by exactly ``+-c``.
    """

    grid: LevelGrid
    times: np.ndarray = field(repr=False)
    levels: np.ndarray = field(repr=False)

    @property
    def n_steps(self) -> int:
        return max(self.times.size - 1, 0)


def strip_crossings(path, iv: TimeInterval | None, c: float, a: float) -> CrossingCounts:
    """Completed up/down crossings of the strip ``[a, a+c]`` on ``iv``."""
    c = check_truncation(c, strict=True)
    u, d = K.strip_scan(_values(path, iv), float(a), c)
    return CrossingCounts(int(u), int(d))


def level_counts(path, c: float, rho: float = 0.0) -> tuple[int, int]:
    """``(KU, KD)`` for the grid ``c*Z + rho`` without the per-level table."""
    grid = LevelGrid(c, rho)
    ku, kd = K.level_counts(_values(path), grid.c, grid.rho)
    return int(ku), int(kd)


def level_crossings(path, iv: TimeInterval | None, grid: LevelGrid) -> LevelCrossingSummary:
    x = _values(path, iv)
    p_min, ups, downs, _, _ = K.level_sweep(x, grid.c, grid.rho)
    per_level = {
        int(p_min + i): CrossingCounts(int(ups[i]), int(downs[i]))
        for i in np.nonzero(ups + downs)[0]
    }
    return LevelCrossingSummary(grid, int(ups.sum()), int(downs.sum()), per_level)


def lebesgue_partition(path, grid: LevelGrid, iv: TimeInterval | None = None) -> LebesguePartition:
    """First-exit partition: each step moves to an adjacent grid level.

    ``tau_0`` is the first time the path attains a grid level and
    ``tau_{j+1}`` the first time after ``tau_j`` it leaves
    ``(level_j - c, level_j + c)``. Hit times are exact for the interpolation.
    """
    if isinstance(path, SamplePath):
        sub = restrict(path, iv) if iv is not None else path
        t0, dt, x = sub.t0, sub.dt, sub.values
    else:
        x, t0, dt = _values(path, iv), 0.0, 1.0
    _, _, _, pos, lev = K.level_sweep(x, grid.c, grid.rho)
    times = t0 + dt * pos
    levels = lev * grid.c + grid.rho
    times.setflags(write=False)
    levels.setflags(write=False)
    return LebesguePartition(grid, times, levels)


def psi_variation(path, partition: LebesguePartition, p_exponent: float) -> float:
    """``sum |f(tau_{j+1}) - f(tau_j)|^p`` along the partition."""
    if not p_exponent >= 1:
        raise ValidationError(f"exponent must be >= 1, got {p_exponent!r}")
    if partition.times.size < 2:
        return 0.0
    if isinstance(path, SamplePath):
        f = np.interp(partition.times, path.times, path.values)
    else:
        x = _values(path)
        f = np.interp(partition.times, np.arange(x.size, dtype=np.float64), x)
    return float(np.sum(np.abs(np.diff(f)) ** p_exponent))


# ---------------------------------------------------------------------------
# crossing counts as functions of the level
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingProfile:
    """The piecewise-constant map ``a -> count(c, f - a)``.

    ``counts[i]`` is the count for ``a`` in ``(breakpoints[i], breakpoints[i+1])``;
    the count is zero outside ``[breakpoints[0], breakpoints[-1]]``.
    """

    kind: str
    c: float
    breakpoints: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)

    def integral(self) -> float:
        if self.breakpoints.size < 2:
            return 0.0
        return float(np.dot(np.diff(self.breakpoints), self.counts))

    def __call__(self, a):
        """Count at level(s) ``a`` (right-continuous convention between breakpoints)."""
        a = np.asarray(a, dtype=np.float64)
        if self.breakpoints.size < 2:
            return np.zeros(a.shape, dtype=np.int64)
        i = np.searchsorted(self.breakpoints, a, side="right") - 1
        inside = (i >= 0) & (i < self.counts.size)
        out = np.zeros(a.shape, dtype=np.int64)
        out[inside] = self.counts[i[inside]]
        return out


def crossing_legs(path, c: float, kind: str = "U", iv: TimeInterval | None = None):
    """Level ranges ``[low, high - c]`` on which each monotone c-leg crosses.

    The path is split at its alternating c-significant extremes. A rising leg
    from ``m`` to ``M`` completes exactly one upcrossing of ``[a, a+c]`` when
    ``m <= a <= M - c`` and none otherwise (falling legs likewise for
    downcrossings). Returns ``(low, high)`` arrays of the non-empty ranges.
    """
    c = check_truncation(c, strict=True)
    kind = kind.upper()
    if kind not in ("U", "D", "N"):
        raise ValidationError(f"kind must be U, D or N, got {kind!r}")
    vals, is_max = K.zigzag(_values(path, iv), c)
    if vals.size < 2:
        return np.empty(0), np.empty(0)
    lo = np.minimum(vals[:-1], vals[1:])
    hi = np.maximum(vals[:-1], vals[1:]) - c
    rising = ~is_max[:-1]
    keep = hi >= lo
    if kind == "U":
        keep &= rising
    elif kind == "D":
        keep &= ~rising
    return lo[keep], hi[keep]


def crossing_count_at(path, c: float, kind: str, a, iv: TimeInterval | None = None) -> np.ndarray:
    """U, D or N count of the strip ``[a, a+c]`` at each level in ``a``.

    Boundary levels are included (a leg touching both edges crosses).
    """
    lo, hi = crossing_legs(path, c, kind, iv)
    a = np.asarray(a, dtype=np.float64)
    lo = np.sort(lo)
    hi = np.sort(hi)
    return np.searchsorted(lo, a, side="right") - np.searchsorted(hi, a, side="left")


def crossing_profile(path, c: float, kind: str = "N", iv: TimeInterval | None = None) -> CrossingProfile:
    lo, hi = crossing_legs(path, c, kind, iv)
    kind = kind.upper()
    if lo.size == 0:
        return CrossingProfile(kind, float(c), np.empty(0), np.empty(0, dtype=np.int64))
    bp = np.unique(np.concatenate([lo, hi]))
    # +1 from each range start, -1 after each range end
    delta = np.zeros(bp.size, dtype=np.int64)
    np.add.at(delta, np.searchsorted(bp, lo), 1)
    np.add.at(delta, np.searchsorted(bp, hi), -1)
    counts = np.cumsum(delta)[:-1]
    return CrossingProfile(kind, float(c), bp, counts)


def banach_integral(path, iv: TimeInterval | None, c: float, kind: str = "N") -> float:
    """``integral over a`` of the U, D or N count of the strip ``[a, a+c]``.

    Integrates the exact piecewise-constant profile (no quadrature); equals
    UTV, DTV or TTV respectively.
    """
    return crossing_profile(path, c, kind, iv).integral()


def kbar(path, iv: TimeInterval | None, c: float) -> float:
    """``TTV(c) / c``."""
    c = check_truncation(c, strict=True)
    if isinstance(path, SamplePath) and iv is not None:
        path = restrict(path, iv)
    return ttv(path, c).value / c


def sandwich_bounds(path, c: float) -> tuple[float, float]:
    """``(TTV(2c)/c, 2*TTV(c/2)/c)``, the bounds on ``K(c)`` for every offset."""
    c = check_truncation(c, strict=True)
    x = _values(path)
    return (
        variation_value(x, 2 * c, "TTV") / c,
        2 * variation_value(x, c / 2, "TTV") / c,
    )


def balance_bound(path, c: float) -> float:
    """``2*max|f|/c + 3``, the bound on ``|KU - KD|``."""
    c = check_truncation(c, strict=True)
    return 2 * float(np.max(np.abs(_values(path)))) / c + 3


__all__ = [
    "CrossingCounts",
    "CrossingProfile",
    "LebesguePartition",
    "LevelCrossingSummary",
    "balance_bound",
    "banach_integral",
    "crossing_count_at",
    "crossing_legs",
    "crossing_profile",
    "kbar",
    "lebesgue_partition",
    "level_counts",
    "level_crossings",
    "psi_variation",
    "sandwich_bounds",
    "strip_crossings",
]
