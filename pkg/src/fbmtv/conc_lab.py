"""Monte Carlo experiments on sampled fractional Brownian motion.

Every experiment is a loop over independent replicas. Replica ``r`` draws its
path from the seed ``replica_seed(master_seed, r)`` and returns plain numbers;
results are collected in replica order, so a report depends only on the
configuration and the master seed, never on the number of worker processes.

Path resolution matters: a grid with spacing ``dt`` cannot resolve
oscillations much below ``dt**h``, so truncation levels are kept a fixed
multiple above it (see :func:`resolution_for`).
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial

import numpy as np

from . import _kernels as K
from .core import SamplePath, check_hurst
from .crossings import crossing_profile
from .errors import FbmTvError, InvariantViolation, ReplicaFailure, UnderpoweredError, ValidationError
from .local_time import TestFunction, local_time_compare, upcrossing_functional
from .fbm import METHOD_ALIASES, METHODS, replica_seed, sample_fbm_values, splitmix64

#: smallest ratio c / dt**h used when a resolution is chosen automatically
DEFAULT_RESOLUTION_RATIO = 8.0
MAX_AUTO_STEPS = 2**24
IDENTITY_RTOL = 1e-9
#: stream offset separating the second sample of a two-sample comparison
_SECOND_STREAM = 0x5CA1E5EED


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McConfig:
    """Flat experiment configuration (mirrors the TOML config file).

    Only the fields an experiment needs are read by it; ``c_values`` must be
    strictly decreasing with every ``c <= S**h``.
    """

    h: float
    c_values: tuple = ()
    replicas: int = 1000
    seed: int = 0
    S: float = 1.0
    n_steps: int = 2**14
    method: str = "circulant_embedding"
    workers: int | None = None
    kind: str = "TTV"
    n_list: tuple = (4, 16, 64)
    rho: float = 0.0
    frak_c: float | None = None
    v_grid: tuple | None = None
    min_exceedances: int = 50
    check_invariants: bool = True

    def __post_init__(self):
        object.__setattr__(self, "h", check_hurst(self.h))
        cv = tuple(float(c) for c in self.c_values)
        object.__setattr__(self, "c_values", cv)
        if not (math.isfinite(self.S) and self.S > 0):
            raise ValidationError(f"S must be positive, got {self.S!r}")
        cap = self.S**self.h * (1 + 1e-12)
        if any(not (0 < c <= cap) for c in cv):
            raise ValidationError(f"every c must lie in (0, S^h] = (0, {self.S**self.h:.6g}], got {cv}")
        if any(a <= b for a, b in zip(cv, cv[1:])):
            raise ValidationError("c_values must be strictly decreasing")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ValidationError("replicas must be a positive integer")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValidationError("n_steps must be an integer >= 2")
        method = METHOD_ALIASES.get(self.method, self.method)
        if method not in METHODS:
            raise ValidationError(f"unknown sampling method {self.method!r}")
        object.__setattr__(self, "method", method)
        kind = str(self.kind).upper()
        if kind not in ("TTV", "UTV", "DTV"):
            raise ValidationError(f"kind must be TTV, UTV or DTV, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if any(n < 1 for n in self.n_list):
            raise ValidationError("n_list entries must be positive")
        if self.v_grid is not None:
            object.__setattr__(self, "v_grid", tuple(float(v) for v in self.v_grid))
        if self.frak_c is not None and not self.frak_c > 0:
            raise ValidationError("frak_c must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_mapping(cls, data: dict) -> "McConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown configuration keys: {sorted(unknown)}")
        if "h" not in data:
            raise ValidationError("configuration needs 'h'")
        kwargs = dict(data)
        for key in ("c_values", "n_list", "v_grid"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def echo(self) -> dict:
        """The configuration as written to reports (worker count excluded)."""
        d = asdict(self)
        d.pop("workers")
        for key in ("c_values", "n_list", "v_grid"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: ``FBMTV_WORKERS`` if set, else ``workers``, else the CPU count."""
    env = os.environ.get("FBMTV_WORKERS")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ValidationError(f"FBMTV_WORKERS must be an integer, got {env!r}") from None
    if workers is None:
        workers = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    if workers < 1:
        raise ValidationError("worker count must be positive")
    return int(workers)


def resolution_for(h: float, c_over_scale: float, ratio: float = DEFAULT_RESOLUTION_RATIO,
                   max_steps: int = MAX_AUTO_STEPS, min_steps: int = 2**10) -> int:
    """Smallest power-of-two step count with ``c / dt**h >= ratio`` on ``[0, S]``.

    ``c_over_scale`` is ``c / S**h``; the result is clipped to
    ``[min_steps, max_steps]``.
    """
    need = (ratio / c_over_scale) ** (1.0 / h)
    n = 1 << max(0, math.ceil(math.log2(max(need, 1.0))))
    return int(min(max(n, min_steps), max_steps))


# ---------------------------------------------------------------------------
# replica runner
# ---------------------------------------------------------------------------


def _call_replica(fn, master_seed: int, r: int):
    seed = replica_seed(master_seed, r)
    try:
        return fn(seed)
    except InvariantViolation as exc:
        raise InvariantViolation(str(exc), seed=seed, replica=r) from None
    except FbmTvError as exc:
        raise ReplicaFailure(str(exc), seed, r) from None
    except Exception as exc:  # noqa: BLE001 - re-raised with the replica attached
        raise ReplicaFailure(f"{type(exc).__name__}: {exc}", seed, r) from None


def run_replicas(fn, replicas: int, master_seed: int, workers: int | None = None) -> list:
    """Evaluate ``fn(replica_seed(master_seed, r))`` for ``r = 0..replicas-1``.

    ``fn`` must be picklable (a module-level function or a partial of one).
    Results come back in replica order whatever the worker count.
    """
    workers = resolve_workers(workers)
    task = partial(_call_replica, fn, int(master_seed))
    if workers == 1 or replicas == 1:
        return [task(r) for r in range(replicas)]
    chunk = max(1, replicas // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(replicas), chunksize=chunk))


def _sample(h, n_steps, S, method, seed):
    return sample_fbm_values(h, n_steps, S / n_steps, seed, method)


def _check_split(x, c, ttv_v, utv_v, dtv_v):
    scale = max(1.0, float(np.abs(np.diff(x)).sum()))
    if abs(ttv_v - utv_v - dtv_v) > IDENTITY_RTOL * scale:
        raise InvariantViolation(f"TTV != UTV + DTV at c={c!r}: {ttv_v!r} vs {utv_v + dtv_v!r}")


def _check_banach(x, c, ttv_v):
    area = crossing_profile(x, c, "N").integral()
    if abs(area - ttv_v) > IDENTITY_RTOL * max(1.0, ttv_v):
        raise InvariantViolation(f"level integral of N != TTV at c={c!r}: {area!r} vs {ttv_v!r}")


def _mean_se(a, axis=0):
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[axis]
    mean = a.mean(axis=axis)
    se = a.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def _wls_slope(x, y, sigma):
    """Weighted least-squares slope and its standard error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = 1.0 / np.maximum(np.asarray(sigma, dtype=np.float64), 1e-300) ** 2
    xm = np.sum(w * x) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    return float(slope), float(math.sqrt(1.0 / sxx))


def _ols_slope(x, y, sigma):
    """Unweighted least-squares slope; its error propagated from independent ``sigma``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    w = dx / np.sum(dx**2)
    return float(np.dot(w, y - y.mean())), float(math.sqrt(np.sum((w * np.asarray(sigma)) ** 2)))


@dataclass
class ExperimentReport:
    """Serializable outcome of one experiment run.

    ``to_dict`` omits ``wall_clock`` so that reports of identical runs are
    byte-identical; timing is recorded in the run manifest instead.
    """

    experiment: str
    config: dict
    seed: int
    estimates: dict
    checks: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(chk["passed"] for chk in self.checks.values())

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "config": self.config,
            "estimates": self.estimates,
            "checks": self.checks,
            "passed": self.passed,
        }


def _check(passed, **detail) -> dict:
    return {"passed": bool(passed), **detail}


# ---------------------------------------------------------------------------
# expectation scaling
# ---------------------------------------------------------------------------


def _mean_tv_replica(h, n_steps, S, method, c_values, check, seed):
    x = _sample(h, n_steps, S, method, seed)
    out = np.empty((3, len(c_values)))
    for j, c in enumerate(c_values):
        t, u, d = K.ttv_value(x, c), K.utv_value(x, c), K.dtv_value(x, c)
        if check:
            _check_split(x, c, t, u, d)
        out[:, j] = (t, u, d)
    return out


@dataclass(frozen=True)
class MeanTvResult:
    h: float
    S: float
    kind: str
    c: tuple
    mean: dict
    stderr: dict
    normalized: tuple
    slope: float
    slope_stderr: float
    symmetry_diff: float
    symmetry_stderr: float
    replicas: int

    @property
    def target_slope(self) -> float:
        return 1.0 - 1.0 / self.h

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c"] = list(self.c)
        d["normalized"] = list(self.normalized)
        d["target_slope"] = self.target_slope
        return d

    def checks(self, slope_tol: float = 0.05) -> dict:
        sym = abs(self.symmetry_diff) <= 2 * self.symmetry_stderr
        return {
            "slope": _check(abs(self.slope - self.target_slope) <= slope_tol,
                            value=self.slope, target=self.target_slope, tolerance=slope_tol),
            "utv_equals_dtv": _check(sym, diff=self.symmetry_diff, stderr=self.symmetry_stderr),
            "ttv_equals_2utv": _check(sym, diff=self.symmetry_diff, stderr=self.symmetry_stderr),
        }


def default_decade(h: float, S: float, n_steps: int, points: int = 6,
                   ratio: float = DEFAULT_RESOLUTION_RATIO) -> tuple:
    """A decade of ``c`` starting ``ratio * dt**h`` above the grid scale.

    When that decade would exceed ``S**h`` it is pushed down to end at
    ``S**h`` instead (the resolution is then too coarse for the decade).
    """
    h = check_hurst(h)
    c_lo = ratio * (S / n_steps) ** h
    c_hi = 10 * c_lo
    if c_hi > S**h:
        c_hi = S**h
        c_lo = c_hi / 10
    return tuple(float(c) for c in np.geomspace(c_hi, c_lo, points))


def estimate_mean_tv(cfg: McConfig, kind: str | None = None) -> MeanTvResult:
    """Mean TTV/UTV/DTV per ``c`` on ``[0, S]`` and the log-log slope of ``kind``.

    The slope is the ordinary least-squares fit of ``log mean`` on ``log c``.

    The symmetry statistic is the replica mean of
    ``sum_c (UTV - DTV) c^{1/h-1} / S`` averaged over the c grid; since
    ``TTV - 2 UTV = DTV - UTV`` path by path, it tests both symmetry relations.
    """
    kind = (kind or cfg.kind).upper()
    if kind not in ("TTV", "UTV", "DTV"):
        raise ValidationError(f"kind must be TTV, UTV or DTV, got {kind!r}")
    c_values = cfg.c_values or default_decade(cfg.h, cfg.S, cfg.n_steps)
    fn = partial(_mean_tv_replica, cfg.h, cfg.n_steps, cfg.S, cfg.method, tuple(c_values), cfg.check_invariants)
    res = np.stack(run_replicas(fn, cfg.replicas, cfg.seed, cfg.workers))  # (R, 3, C)
    c_arr = np.asarray(c_values)
    names = ("TTV", "UTV", "DTV")
    means, ses = {}, {}
    for i, name in enumerate(names):
        m, s = _mean_se(res[:, i, :])
        means[name] = [float(v) for v in m]
        ses[name] = [float(v) for v in s]
    m = np.asarray(means[kind])
    s = np.asarray(ses[kind])
    # equal weights: over a decade the error is dominated by bias, not noise
    slope, slope_se = _ols_slope(np.log(c_arr), np.log(m), s / m)
    norm = c_arr ** (1 / cfg.h - 1) / cfg.S
    sym = ((res[:, 1, :] - res[:, 2, :]) * norm).mean(axis=1)
    sym_m, sym_se = _mean_se(sym)
    return MeanTvResult(
        h=cfg.h, S=cfg.S, kind=kind, c=tuple(float(c) for c in c_arr),
        mean=means, stderr=ses,
        normalized=tuple(float(v) for v in m * norm),
        slope=slope, slope_stderr=slope_se,
        symmetry_diff=float(sym_m), symmetry_stderr=float(sym_se),
        replicas=cfg.replicas,
    )


# ---------------------------------------------------------------------------
# Fekete bounds on the limit constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeketeBounds:
    """``lower = E TTV([0,n], 1) / n`` and ``upper = lower + 1/n``."""

    n: int
    lower: float
    upper: float
    stderr: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class FrakCEstimate:
    h: float
    bounds: tuple
    n_steps: int
    resolution_ratio: float
    replicas: int

    @property
    def estimate(self) -> float:
        """Midpoint of the bounds at the largest ``n``."""
        return max(self.bounds, key=lambda b: b.n).midpoint

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "n_steps": self.n_steps,
            "resolution_ratio": self.resolution_ratio,
            "replicas": self.replicas,
            "estimate": self.estimate,
            "bounds": [
                {"n": b.n, "lower": b.lower, "upper": b.upper, "stderr": b.stderr, "midpoint": b.midpoint}
                for b in self.bounds
            ],
        }

    def checks(self) -> dict:
        ordered = all(b.lower <= b.upper for b in self.bounds)
        gap = all(abs((b.upper - b.lower) - 1.0 / b.n) <= 1e-12 for b in self.bounds)
        bs = sorted(self.bounds, key=lambda b: b.n)
        mono = all(
            b2.lower >= b1.lower - 2 * math.hypot(b1.stderr, b2.stderr) for b1, b2 in zip(bs, bs[1:])
        )
        return {
            "ordered": _check(ordered),
            "gap_is_1_over_n": _check(gap),
            "lower_nondecreasing": _check(mono, lowers=[b.lower for b in bs]),
        }


def _frak_c_replica(h, n_steps, method, c_values, seed):
    x = sample_fbm_values(h, n_steps, 1.0 / n_steps, seed, method)
    return np.array([K.ttv_value(x, c) for c in c_values])


def estimate_frak_c(h: float, n_list=(4, 16, 64), replicas: int = 1000, seed: int = 0, *,
                    n_steps: int | None = None, workers: int | None = None,
                    method: str = "circulant_embedding", ratio: float = 64.0,
                    max_steps: int = 2**20) -> FrakCEstimate:
    """Fekete bounds ``E TTV([0,n],1)/n <= frak_c <= (E TTV([0,n],1) + 1)/n``.

    ``TTV([0,n], 1)`` has the law of ``n**h * TTV([0,1], n**-h)``, so every
    ``n`` is evaluated on the same unit-interval path. Unless given, the step
    count makes ``n_max**-h / dt**h >= ratio`` (capped at ``max_steps``).
    """
    h = check_hurst(h)
    n_list = tuple(sorted(int(n) for n in n_list))
    c_unit = tuple(n ** (-h) for n in n_list)
    if n_steps is None:
        n_steps = resolution_for(h, min(c_unit), ratio, max_steps)
    fn = partial(_frak_c_replica, h, n_steps, method, c_unit)
    res = np.stack(run_replicas(fn, replicas, seed, workers))
    bounds = []
    for j, n in enumerate(n_list):
        ttv_n = res[:, j] * n**h
        m, s = _mean_se(ttv_n)
        bounds.append(FeketeBounds(n, float(m / n), float(m / n + 1.0 / n), float(s / n)))
    achieved = min(c_unit) / (1.0 / n_steps) ** h
    return FrakCEstimate(h, tuple(bounds), int(n_steps), float(achieved), int(replicas))


def _qv_replica(n_steps, c, rho, seed):
    x = sample_fbm_values(0.5, n_steps, 1.0 / n_steps, seed)
    ku, kd = K.level_counts(x, c, rho)
    return c * c * (ku + kd)


def brownian_qv_oracle(c: float = 0.02, replicas: int = 1000, seed: int = 0,
                       n_steps: int = 2**22, workers: int | None = None) -> tuple[float, float]:
    """Mean and standard error of ``c**2 * K_{0,1}(c, B)`` for Brownian paths.

    Along Lebesgue partitions the quadratic variation of Brownian motion on
    ``[0, 1]`` is 1, so this tends to 1 as ``c -> 0``; it is the reference for
    the ``h = 1/2`` value of the limit constant.
    """
    fn = partial(_qv_replica, int(n_steps), float(c), 0.0)
    m, s = _mean_se(run_replicas(fn, replicas, seed, workers))
    return float(m), float(s)


# ---------------------------------------------------------------------------
# concentration tails
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailCurve:
    h: float
    S: float
    c: float
    kind: str
    mean: float
    v: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    exceedances: np.ndarray = field(repr=False)
    fit_range: tuple = ()
    slope: float = float("nan")
    slope_stderr: float = float("nan")
    slope_half_window: float = float("nan")
    replicas: int = 0

    @property
    def target_exponent(self) -> float:
        return 1 + 2 * self.h if self.h < 0.5 else 2.0

    @property
    def regime(self) -> str:
        # for v >= 1, min(v^{1+2h}, v^2) = v^{1+2h} when h < 1/2
        return "v^(1+2H)" if self.h < 0.5 else "v^2"

    @property
    def confidence_band(self) -> tuple:
        return (self.slope - 1.96 * self.slope_stderr, self.slope + 1.96 * self.slope_stderr)

    def to_dict(self) -> dict:
        return {
            "h": self.h, "S": self.S, "c": self.c, "kind": self.kind, "mean": self.mean,
            "replicas": self.replicas,
            "fit_range": list(self.fit_range), "slope": self.slope,
            "slope_stderr": self.slope_stderr, "confidence_band": list(self.confidence_band),
            "slope_half_window": self.slope_half_window,
            "target_exponent": self.target_exponent, "regime": self.regime,
            "curve": [
                {"v": float(v), "p": float(p), "stderr": float(s), "exceedances": int(k)}
                for v, p, s, k in zip(self.v, self.p, self.stderr, self.exceedances)
            ],
        }

    def checks(self, band: tuple | None = None) -> dict:
        out = {
            "p_nonincreasing": _check(bool(np.all(np.diff(self.p) <= 0))),
            "half_window_stable": _check(abs(self.slope_half_window - self.slope) < 0.2,
                                         slope=self.slope, half=self.slope_half_window),
            "not_lighter_than_target": _check(self.slope <= self.target_exponent + 0.4,
                                              slope=self.slope, target=self.target_exponent),
        }
        if band is not None:
            out["slope_in_band"] = _check(band[0] <= self.slope <= band[1], slope=self.slope, band=list(band))
        return out


def _tail_replica(h, n_steps, S, method, c, kind, seed):
    x = _sample(h, n_steps, S, method, seed)
    if kind == "UTV":
        return K.utv_value(x, c)
    if kind == "DTV":
        return K.dtv_value(x, c)
    return K.ttv_value(x, c)


def _fit_tail(v, p):
    y = np.log(-np.log(p))
    return np.polyfit(np.log(v), y, 1)[0]


def tail_experiment(cfg: McConfig, kind: str | None = None) -> TailCurve:
    """Empirical ``P(|TV - E TV| > S c^{1-1/h} v)`` and its fitted exponent.

    Uses ``c = cfg.c_values[0]`` (default ``S**h``). The exponent is the
    slope of ``log(-log p)`` against ``log v`` over ``1 <= v <= v_hi``, where
    ``v_hi`` is the largest grid point with at least ``min_exceedances``
    exceedances; ``slope_half_window`` refits on the lower half (in ``log v``)
    of that window.
    """
    kind = (kind or cfg.kind).upper()
    if cfg.replicas < 100:
        raise ValidationError("tail experiments need at least 100 replicas")
    c = cfg.c_values[0] if cfg.c_values else cfg.S**cfg.h
    fn = partial(_tail_replica, cfg.h, cfg.n_steps, cfg.S, cfg.method, float(c), kind)
    tv = np.asarray(run_replicas(fn, cfg.replicas, cfg.seed, cfg.workers))
    mean = float(tv.mean())
    scale = cfg.S * c ** (1 - 1 / cfg.h)
    dev = np.sort(np.abs(tv - mean) / scale)
    if cfg.v_grid is not None:
        v = np.asarray(cfg.v_grid, dtype=np.float64)
    else:
        v = np.geomspace(1.0, max(2.0, float(dev[-1])), 48)
    exceed = dev.size - np.searchsorted(dev, v, side="right")
    R = cfg.replicas
    p = exceed / R
    se = np.sqrt(p * (1 - p) / R)
    usable = (exceed >= cfg.min_exceedances) & (p < 1)
    window = usable & (v >= 1)
    if window.sum() < 2:
        # beyond dev[-m] fewer than m replicas exceed
        m = cfg.min_exceedances
        largest = float(np.nextafter(dev[-m], -np.inf)) if 0 < m <= dev.size else None
        raise UnderpoweredError(
            f"fewer than two v >= 1 with {cfg.min_exceedances}+ exceedances "
            f"(largest usable v: {largest})",
            largest,
        )
    vw, pw = v[window], p[window]
    y = np.log(-np.log(pw))
    sig = se[window] / (pw * np.abs(np.log(pw)))
    slope, slope_se = _wls_slope(np.log(vw), y, sig)
    half = np.log(vw) <= 0.5 * (np.log(vw[0]) + np.log(vw[-1]))
    slope_half = _wls_slope(np.log(vw[half]), y[half], sig[half])[0] if half.sum() >= 2 else float("nan")
    return TailCurve(cfg.h, cfg.S, float(c), kind, mean, v, p, se, exceed,
                     (float(vw[0]), float(vw[-1])), slope, slope_se, slope_half, R)


# ---------------------------------------------------------------------------
# almost-sure limits
# ---------------------------------------------------------------------------


def _limit_replica(h, n_steps, S, method, c_values, rho, check, seed):
    """Per c: c^{1/h-1} TTV/S, UTV, DTV and c^{1/h} K/S, KU, KD (rows)."""
    x = _sample(h, n_steps, S, method, seed)
    out = np.empty((6, len(c_values)))
    prev_ttv = -math.inf
    for j, c in enumerate(c_values):
        t, u, d = K.ttv_value(x, c), K.utv_value(x, c), K.dtv_value(x, c)
        ku, kd = K.level_counts(x, c, rho)
        if check:
            _check_split(x, c, t, u, d)
            _check_banach(x, c, t)
            k = ku + kd
            low, high = K.ttv_value(x, 2 * c) / c, 2 * K.ttv_value(x, c / 2) / c
            tol = IDENTITY_RTOL * max(1.0, high)
            if not (low - tol <= k <= high + tol):
                raise InvariantViolation(f"crossing sandwich fails at c={c!r}: {low} <= {k} <= {high}")
            if abs(ku - kd) > 2 * np.max(np.abs(x)) / c + 3:
                raise InvariantViolation(f"|KU - KD| bound fails at c={c!r}")
            ku2, kd2 = K.level_counts(x, c, rho + c)
            if (ku2, kd2) != (ku, kd):
                raise InvariantViolation(f"K changes under a grid shift by c at c={c!r}")
            if t < prev_ttv:
                raise InvariantViolation(f"TTV increases with c at c={c!r}")
            prev_ttv = t
            inv = 1.0 / c
            if math.floor(inv) >= 1:
                c_hi, c_lo = 1.0 / math.floor(inv), 1.0 / math.ceil(inv)
                t_hi, t_lo = K.ttv_value(x, c_hi), K.ttv_value(x, c_lo)
                if not (t_hi <= t <= t_lo):
                    raise InvariantViolation(f"reciprocal squeeze fails at c={c!r}")
        a = c ** (1 / h - 1) / S
        b = c ** (1 / h) / S
        out[:, j] = (t * a, u * a, d * a, (ku + kd) * b, ku * b, kd * b)
    return out


@dataclass(frozen=True)
class LimitResult:
    h: float
    S: float
    c: tuple
    frak_c: float
    n_steps: int
    mean: dict
    sd: dict
    stderr: dict
    replicas: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["c"] = list(self.c)
        return d

    def rel_error(self, name: str) -> float:
        target = self.frak_c if name in ("TTV", "K") else 0.5 * self.frak_c
        return abs(self.mean[name][-1] - target) / target

    def checks(self, tol: float = 0.05, names=("TTV", "UTV", "DTV")) -> dict:
        out = {}
        for name in names:
            out[f"{name}_within_tol"] = _check(self.rel_error(name) <= tol, rel_error=self.rel_error(name))
        if "TTV" in names:
            sd = self.sd["TTV"]
            out["dispersion_shrinks"] = _check(all(a > b for a, b in zip(sd, sd[1:])), sd=sd)
        return out


_LIMIT_ROWS = ("TTV", "UTV", "DTV", "K", "KU", "KD")


def _limit_run(h, c_list, S, replicas, seed, n_steps, frak_c, rho, workers, method, check):
    h = check_hurst(h)
    c_list = tuple(float(c) for c in c_list)
    if any(a <= b for a, b in zip(c_list, c_list[1:])):
        raise ValidationError("c_list must be strictly decreasing")
    if n_steps is None:
        n_steps = resolution_for(h, min(c_list) / S**h, 50.0)
    fn = partial(_limit_replica, h, int(n_steps), float(S), method, c_list, float(rho), check)
    res = np.stack(run_replicas(fn, replicas, seed, workers))
    mean, sd, se = {}, {}, {}
    for i, name in enumerate(_LIMIT_ROWS):
        m, s = _mean_se(res[:, i, :])
        mean[name] = [float(v) for v in m]
        se[name] = [float(v) for v in s]
        sd[name] = [float(v) for v in res[:, i, :].std(axis=0, ddof=1)] if replicas > 1 else [0.0] * len(c_list)
    if frak_c is None:
        frak_c = estimate_frak_c(h, replicas=min(replicas, 1000), seed=splitmix64(seed), workers=workers).estimate
    return LimitResult(h, float(S), c_list, float(frak_c), int(n_steps), mean, sd, se, int(replicas))


def ttv_limit_experiment(h: float, c_list, interval=(0.0, 1.0), replicas: int = 200, seed: int = 0, *,
                         n_steps: int | None = None, frak_c: float | None = None,
                         workers: int | None = None, method: str = "circulant_embedding",
                         check_invariants: bool = True) -> LimitResult:
    """Distribution of ``c^{1/h-1} TTV / (t-s)`` (and UTV, DTV) per ``c``.

    Means are compared with ``frak_c`` (TTV) and ``frak_c / 2`` (UTV, DTV);
    when ``frak_c`` is not given it is estimated with :func:`estimate_frak_c`.
    """
    s, t = interval
    if not 0 <= s < t:
        raise ValidationError("interval must satisfy 0 <= s < t")
    # stationary increments: only the length of the interval matters
    return _limit_run(h, c_list, t - s, replicas, seed, n_steps, frak_c, 0.0, workers, method, check_invariants)


def k_convergence_experiment(h: float, c_list, rho: float = 0.0, replicas: int = 200, seed: int = 0, *,
                             n_steps: int | None = None, frak_c: float | None = None,
                             workers: int | None = None, method: str = "circulant_embedding",
                             check_invariants: bool = True) -> LimitResult:
    """Distribution of ``c^{1/h} K_{0,1}(c, W - rho)`` per ``c``.

    With invariant checks on, every replica also verifies the crossing
    sandwich, the ``|KU - KD|`` bound and invariance under a grid shift by ``c``.
    """
    return _limit_run(h, c_list, 1.0, replicas, seed, n_steps, frak_c, rho, workers, method, check_invariants)


# ---------------------------------------------------------------------------
# self-similarity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingResult:
    h: float
    S: float
    c: float
    mean_direct: float
    mean_rescaled: float
    stderr_direct: float
    stderr_rescaled: float
    z_statistic: float
    p_value: float
    quantiles: dict
    replicas: int

    def to_dict(self) -> dict:
        return asdict(self)

    def checks(self) -> dict:
        se = math.hypot(self.stderr_direct, self.stderr_rescaled)
        q_ok = all(abs(q["direct"] - q["rescaled"]) <= 3 * q["stderr"] for q in self.quantiles.values())
        return {
            "means_within_2se": _check(abs(self.mean_direct - self.mean_rescaled) <= 2 * se),
            "location_test_0.01": _check(self.p_value >= 0.01, p_value=self.p_value),
            "quantiles_within_3se": _check(q_ok),
        }


def _scaling_replica(h, n_steps, S, method, c, seed):
    x = _sample(h, n_steps, S, method, seed)
    return K.ttv_value(x, c)


def _quantile_se(sorted_a, q):
    """Order-statistic standard error of the ``q`` quantile (binomial sectioning)."""
    n = sorted_a.size
    half = 1.96 * math.sqrt(q * (1 - q) / n)
    lo = sorted_a[max(0, int(math.floor((q - half) * n)))]
    hi = sorted_a[min(n - 1, int(math.ceil((q + half) * n)))]
    return (hi - lo) / (2 * 1.96)


def scaling_distribution_check(h: float, S: float, c: float, replicas: int = 10_000, seed: int = 0, *,
                               n_steps: int = 2**12, workers: int | None = None,
                               method: str = "circulant_embedding") -> ScalingResult:
    """Compare ``TTV([0,S], c)`` with ``S**h * TTV([0,1], c * S**-h)``.

    The two samples use independent replica streams. Reports a two-sample
    z-test on the means and the 10/50/90% quantiles with their standard errors.
    """
    h = check_hurst(h)
    if not S > 0:
        raise ValidationError("S must be positive")
    if not 0 < c <= S**h * (1 + 1e-12):
        raise ValidationError("need 0 < c <= S^h")
    direct = np.asarray(run_replicas(partial(_scaling_replica, h, n_steps, float(S), method, float(c)),
                                     replicas, seed, workers))
    unit = np.asarray(run_replicas(partial(_scaling_replica, h, n_steps, 1.0, method, float(c) * S ** (-h)),
                                   replicas, splitmix64(seed ^ _SECOND_STREAM), workers))
    rescaled = unit * S**h
    m1, s1 = _mean_se(direct)
    m2, s2 = _mean_se(rescaled)
    se = math.hypot(s1, s2)
    z = float((m1 - m2) / se) if se > 0 else 0.0
    p = math.erfc(abs(z) / math.sqrt(2))
    a, b = np.sort(direct), np.sort(rescaled)
    quant = {}
    for q in (0.1, 0.5, 0.9):
        qa, qb = float(np.quantile(a, q)), float(np.quantile(b, q))
        quant[f"{q:.1f}"] = {"direct": qa, "rescaled": qb,
                             "stderr": float(math.hypot(_quantile_se(a, q), _quantile_se(b, q)))}
    return ScalingResult(h, float(S), float(c), float(m1), float(m2), float(s1), float(s2), z, p, quant, replicas)


# ---------------------------------------------------------------------------
# local time
# ---------------------------------------------------------------------------


def _local_time_replica(h, n_steps, method, c_values, frak_c, g, seed):
    x = sample_fbm_values(h, n_steps, 1.0 / n_steps, seed, method)
    path = SamplePath(0.0, 1.0 / n_steps, x)
    errs = local_time_compare(path, c_values, h, g, frak_c)
    # level integral of the unnormalized curve against c^{1/h-1} UTV
    ident = []
    for c in c_values:
        wide = TestFunction.indicator(float(x.min()) - 2 * c - 1, float(x.max()) + 1)
        lhs = upcrossing_functional(path, c, h, wide)
        rhs = c ** (1 / h - 1) * K.utv_value(x, c)
        ident.append(abs(lhs - rhs) / max(1e-300, abs(rhs)) if rhs != 0 else abs(lhs))
    return np.array(errs), np.array(ident)


@dataclass(frozen=True)
class LocalTimeResult:
    h: float
    c: tuple
    frak_c: float
    n_steps: int
    median_error: tuple
    max_identity_error: float
    paths: int

    def to_dict(self) -> dict:
        return asdict(self)

    def checks(self, tol: float = 0.10) -> dict:
        med = self.median_error
        return {
            "median_error_decreases": _check(all(a > b for a, b in zip(med, med[1:])), median=list(med)),
            "smallest_c_below_tol": _check(med[-1] < tol, value=med[-1], tolerance=tol),
            "level_integral_identity": _check(self.max_identity_error <= 1e-9, value=self.max_identity_error),
        }


def local_time_experiment(h: float, c_list, frak_c: float, paths: int = 50, seed: int = 0, *,
                          g=None, n_steps: int | None = None, workers: int | None = None,
                          method: str = "circulant_embedding") -> LocalTimeResult:
    """Median relative error of the normalized upcrossing functional over ``paths`` paths.

    ``g`` defaults to the indicator of ``[-1/2, 1/2]``.
    """
    from .local_time import TestFunction

    h = check_hurst(h)
    c_list = tuple(float(c) for c in c_list)
    if g is None:
        g = TestFunction.indicator(-0.5, 0.5)
    if n_steps is None:
        n_steps = resolution_for(h, min(c_list), 50.0)
    if any(a <= b for a, b in zip(c_list, c_list[1:])):
        raise ValidationError("c_list must be strictly decreasing")
    if not frak_c > 0:
        raise ValidationError("frak_c must be positive")
    fn = partial(_local_time_replica, h, int(n_steps), method, c_list, float(frak_c), g)
    res = run_replicas(fn, paths, seed, workers)
    errs = np.stack([r[0] for r in res])
    ident = np.stack([r[1] for r in res])
    med = tuple(float(v) for v in np.median(errs, axis=0))
    return LocalTimeResult(h, c_list, float(frak_c), int(n_steps), med, float(ident.max()), int(paths))


# ---------------------------------------------------------------------------
# dispatch used by the command line
# ---------------------------------------------------------------------------

EXPERIMENTS = ("mean-tv", "frak-c", "tails", "limits", "k-limit", "scaling", "local-time")


def run_experiment(name: str, cfg: McConfig) -> tuple[ExperimentReport, object]:
    """Run experiment ``name`` and wrap it in a report; also returns the raw result."""
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    start = time.perf_counter()
    if name == "mean-tv":
        result = estimate_mean_tv(cfg)
        checks = result.checks()
    elif name == "frak-c":
        result = estimate_frak_c(cfg.h, cfg.n_list, cfg.replicas, cfg.seed, workers=cfg.workers, method=cfg.method)
        checks = result.checks()
    elif name == "tails":
        result = tail_experiment(cfg)
        checks = result.checks()
    elif name in ("limits", "k-limit"):
        if not cfg.c_values:
            raise ValidationError("limit experiments need c_values")
        runner = ttv_limit_experiment if name == "limits" else k_convergence_experiment
        kwargs = dict(replicas=cfg.replicas, seed=cfg.seed, frak_c=cfg.frak_c, workers=cfg.workers,
                      method=cfg.method, check_invariants=cfg.check_invariants)
        if name == "limits":
            result = runner(cfg.h, cfg.c_values, (0.0, cfg.S), **kwargs)
            checks = result.checks()
        else:
            result = runner(cfg.h, cfg.c_values, cfg.rho, **kwargs)
            checks = result.checks(names=("K",))
    elif name == "local-time":
        if not cfg.c_values:
            raise ValidationError("the local-time experiment needs c_values")
        frak_c = cfg.frak_c
        if frak_c is None:
            frak_c = estimate_frak_c(cfg.h, replicas=min(cfg.replicas, 1000), seed=splitmix64(cfg.seed),
                                     workers=cfg.workers, method=cfg.method).estimate
        result = local_time_experiment(cfg.h, cfg.c_values, frak_c, cfg.replicas, cfg.seed,
                                       workers=cfg.workers, method=cfg.method)
        checks = result.checks()
    else:
        c = cfg.c_values[0] if cfg.c_values else 0.5 * cfg.S**cfg.h
        result = scaling_distribution_check(cfg.h, cfg.S, c, cfg.replicas, cfg.seed,
                                            n_steps=cfg.n_steps, workers=cfg.workers, method=cfg.method)
        checks = result.checks()
    report = ExperimentReport(name, cfg.echo(), int(cfg.seed), result.to_dict(), checks,
                              time.perf_counter() - start)
    return report, result
