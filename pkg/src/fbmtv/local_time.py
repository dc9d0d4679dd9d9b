"""Local time from normalized strip upcrossings, and its occupation-measure oracle.

For a path ``f`` on ``[0, 1]`` and a bounded ``g``, the upcrossing functional

    F_c(g) = c^{1/H - 1} * integral over a of U(c, f - a) g(a) da

converges, after multiplication by ``2 / frak_c(H)``, to the occupation
integral ``integral_0^1 g(f(t)) dt``. Test functions are piecewise constant,
which makes both sides exact for a piecewise-linear path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import SamplePath, check_hurst, check_truncation
from .crossings import crossing_count_at, crossing_legs
from .errors import ValidationError


@dataclass(frozen=True)
class TestFunction:
    """``g = values[i]`` on ``[breakpoints[i], breakpoints[i+1])``, zero elsewhere."""

    __test__ = False  # not a pytest class

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=np.float64)
        v = np.array(self.values, dtype=np.float64)
        if b.ndim != 1 or v.ndim != 1 or b.size != v.size + 1 or v.size < 1:
            raise ValidationError("need len(breakpoints) == len(values) + 1 >= 2")
        if not np.all(np.diff(b) > 0):
            raise ValidationError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(v))):
            raise ValidationError("test function must be finite")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        cum = np.concatenate([[0.0], np.cumsum(v * np.diff(b))])
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def indicator(cls, lo: float, hi: float, value: float = 1.0) -> "TestFunction":
        return cls(np.array([lo, hi]), np.array([value]))

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        i = np.searchsorted(self.breakpoints, y, side="right") - 1
        inside = (i >= 0) & (i < self.values.size)
        out = np.zeros(y.shape)
        out[inside] = self.values[i[inside]]
        return out

    def antiderivative(self, y):
        """``G(y) = integral_{-inf}^{y} g``."""
        y = np.asarray(y, dtype=np.float64)
        b = self.breakpoints
        yc = np.clip(y, b[0], b[-1])
        i = np.clip(np.searchsorted(b, yc, side="right") - 1, 0, self.values.size - 1)
        return self._cum[i] + self.values[i] * (yc - b[i])

    def __add__(self, other: "TestFunction") -> "TestFunction":
        b = np.union1d(self.breakpoints, other.breakpoints)
        mid = 0.5 * (b[:-1] + b[1:])
        return TestFunction(b, self(mid) + other(mid))


@dataclass(frozen=True)
class OccupationDensity:
    levels: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        lv = np.array(self.levels, dtype=np.float64)
        d = np.array(self.density, dtype=np.float64)
        if lv.shape != d.shape or lv.ndim != 1:
            raise ValidationError("levels and density must be 1-d arrays of equal length")
        if lv.size > 1 and not np.all(np.diff(lv) > 0):
            raise ValidationError("levels must be strictly increasing")
        if np.any(d < 0):
            raise ValidationError("a density cannot be negative")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "density", d)

    def integral(self) -> float:
        """Trapezoidal mass over the level grid."""
        if self.levels.size < 2:
            return 0.0
        return float(np.sum(0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.levels)))


def _path(path) -> SamplePath:
    if not isinstance(path, SamplePath):
        raise ValidationError("expected a SamplePath")
    return path


def occupation_integral(path: SamplePath, g: TestFunction) -> float:
    """``integral g(f(t)) dt`` over the time span of the interpolated path."""
    x = _path(path).values
    x0, x1 = x[:-1], x[1:]
    b = g.breakpoints
    same_piece = np.searchsorted(b, x0, side="right") == np.searchsorted(b, x1, side="right")
    dx = x1 - x0
    out = np.empty(dx.size)
    # within one piece g is constant along the segment
    out[same_piece] = g(x0[same_piece])
    cross = ~same_piece
    out[cross] = (g.antiderivative(x1[cross]) - g.antiderivative(x0[cross])) / dx[cross]
    return float(path.dt * out.sum())


def upcrossing_functional(path: SamplePath, c: float, h: float, g: TestFunction) -> float:
    """``c^{1/h - 1} * integral U(c, f - a) g(a) da``, exactly.

    Each rising c-leg from ``m`` to ``M`` contributes ``G(M - c) - G(m)``.
    """
    c = check_truncation(c, strict=True)
    h = check_hurst(h)
    lo, hi = crossing_legs(_path(path), c, "U")
    total = float(np.sum(g.antiderivative(hi) - g.antiderivative(lo))) if lo.size else 0.0
    return c ** (1.0 / h - 1.0) * total


def local_time_curve(path: SamplePath, c: float, h: float, level_grid, frak_c: float) -> OccupationDensity:
    """``a -> (2 / frak_c) * c^{1/h - 1} * U(c, f - a)`` on the given levels."""
    c = check_truncation(c, strict=True)
    h = check_hurst(h)
    if not frak_c > 0:
        raise ValidationError(f"the constant estimate must be positive, got {frak_c!r}")
    levels = np.asarray(level_grid, dtype=np.float64)
    u = crossing_count_at(_path(path), c, "U", levels)
    return OccupationDensity(levels, (2.0 / frak_c) * c ** (1.0 / h - 1.0) * u)


def local_time_compare(path: SamplePath, c_list, h: float, g: TestFunction, frak_c_estimate: float) -> list[float]:
    """Relative error of ``(2/frak_c) * F_c(g)`` against the occupation integral, per ``c``.

    When both sides vanish the error is reported as 0.
    """
    c_arr = np.asarray(c_list, dtype=np.float64)
    if c_arr.size > 1 and not np.all(np.diff(c_arr) < 0):
        raise ValidationError("c_list must be strictly decreasing")
    if not frak_c_estimate > 0:
        raise ValidationError(f"the constant estimate must be positive, got {frak_c_estimate!r}")
    ref = occupation_integral(path, g)
    errors = []
    for c in c_arr:
        est = 2.0 / frak_c_estimate * upcrossing_functional(path, float(c), h, g)
        if ref == 0.0:
            errors.append(0.0 if est == 0.0 else float("inf"))
        else:
            errors.append(abs(est - ref) / abs(ref))
    return errors
