"""Domain types and elementary path algebra.

A :class:`SamplePath` is a uniformly sampled real path. Variation functionals
read it as its sequence of knots; crossing functionals read it as the
piecewise-linear interpolation of those knots. Times are kept as
``(t0, dt, index)`` so that long grids never accumulate rounding drift.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from .errors import GridError, ValidationError

#: relative tolerance used when matching a time against the sample grid
GRID_RTOL = 1e-9


def check_hurst(h: float) -> float:
    """Return ``h`` as a float, raising unless ``0 < h < 1``."""
    h = float(h)
    if not 0.0 < h < 1.0:
        raise ValidationError(f"Hurst index must lie in (0, 1), got {h!r}")
    return h


def check_truncation(c: float, *, strict: bool = False) -> float:
    """Validate a truncation parameter (``c >= 0``, or ``c > 0`` if strict)."""
    c = float(c)
    if not math.isfinite(c) or c < 0 or (strict and c == 0):
        bound = "> 0" if strict else ">= 0"
        raise ValidationError(f"truncation parameter must be {bound}, got {c!r}")
    return c


@dataclass(frozen=True)
class SamplePath:
    """Values of a path at times ``t0 + k*dt``, ``k = 0..n_steps``."""

    t0: float
    dt: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 2:
            raise ValidationError("a path needs at least two samples")
        if not np.all(np.isfinite(values)):
            raise ValidationError("path values must be finite")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt!r}")
        if not math.isfinite(self.t0):
            raise ValidationError("t0 must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def t_end(self) -> float:
        return self.t0 + self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def time_at(self, k: int) -> float:
        return self.t0 + k * self.dt

    def index_of(self, t: float, name: str = "t") -> int:
        """Grid index of time ``t``; raises :class:`GridError` if off-grid."""
        x = (t - self.t0) / self.dt
        k = round(x)
        if abs(x - k) > GRID_RTOL * max(1.0, abs(x)):
            raise GridError(name, t, f"not a sample time of the path (t0={self.t0}, dt={self.dt})")
        if not 0 <= k <= self.n_steps:
            raise GridError(name, t, f"outside [{self.t0}, {self.t_end}]")
        return int(k)

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.dt == other.dt
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class TimeInterval:
    s: float
    t: float

    def __post_init__(self):
        if not (0 <= self.s < self.t):
            raise ValidationError(f"need 0 <= s < t, got [{self.s}, {self.t}]")


@dataclass(frozen=True)
class LevelGrid:
    """The shifted grid ``c*Z + rho``, with ``rho`` normalized to ``(-c/2, c/2]``."""

    c: float
    rho: float = 0.0

    def __post_init__(self):
        c = check_truncation(self.c, strict=True)
        rho = float(self.rho)
        r = rho - c * math.floor(rho / c + 0.5)
        if r <= -c / 2:
            r += c
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "rho", r)

    def level(self, p: int) -> float:
        return p * self.c + self.rho


def restrict(path: SamplePath, iv: TimeInterval) -> SamplePath:
    """Sub-path on ``[iv.s, iv.t]``; both endpoints must be sample times."""
    i = path.index_of(iv.s, "s")
    j = path.index_of(iv.t, "t")
    if i == 0 and j == path.n_steps:
        return path
    return SamplePath(path.time_at(i), path.dt, path.values[i : j + 1])


def negate(path: SamplePath) -> SamplePath:
    return SamplePath(path.t0, path.dt, -path.values)


def self_similar_rescale(path: SamplePath, S: float, h: float) -> SamplePath:
    """Transport a path on ``[0, 1]`` to ``[0, S]``: values scale by ``S**h``, dt by ``S``."""
    h = check_hurst(h)
    if not S > 0:
        raise ValidationError(f"scale S must be positive, got {S!r}")
    if path.t0 != 0 or not math.isclose(path.t_end, 1.0, rel_tol=GRID_RTOL):
        raise ValidationError("self_similar_rescale expects a path on [0, 1]")
    if S == 1:
        return path
    return SamplePath(0.0, path.dt * S, path.values * S**h)


def read_path_csv(file: str | PathLike) -> SamplePath:
    """Load a ``t,value`` CSV, checking that the spacing is uniform."""
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise ValidationError(f"{file}: expected header 't,value', got {header}")
        rows = [r for r in reader if r]
    try:
        data = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"{file}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 2:
        raise ValidationError(f"{file}: need at least two rows of two columns")
    t = data[:, 0]
    steps = np.diff(t)
    dt = (t[-1] - t[0]) / (t.size - 1)
    slack = GRID_RTOL * dt + 4 * np.finfo(float).eps * np.max(np.abs(t))
    if dt <= 0 or np.max(np.abs(steps - dt)) > slack:
        raise ValidationError(f"{file}: time column is not uniformly spaced")
    return SamplePath(t[0], dt, data[:, 1])


def write_path_csv(path: SamplePath, file: str | PathLike) -> None:
    with open(file, "w", newline="") as fh:
        fh.write("t,value\n")
        for t, v in zip(path.times, path.values):
            fh.write(f"{t:.17g},{v:.17g}\n")
