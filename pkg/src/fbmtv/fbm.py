"""Exact grid sampling of fractional Brownian motion and increment covariances.

Sampling draws fractional Gaussian noise (unit-spaced increments with
autocovariance ``gamma(k)``) and cumulates it. Two methods are available:

* ``circulant_embedding`` (default): Davies-Harte style embedding of the
  Toeplitz covariance in a circulant of size ``2n``, O(n log n).
* ``cholesky``: dense factorization, kept as an oracle for small grids.

Randomness is keyed by a 64-bit seed. Replica ``r`` of an experiment with
master seed ``m`` uses ``replica_seed(m, r)``, a SplitMix64 mix of both, so
results never depend on how replicas are scheduled.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import SamplePath, check_hurst
from .errors import BudgetExceeded, EmbeddingError, ValidationError

METHODS = ("circulant_embedding", "cholesky")
METHOD_ALIASES = {"fft": "circulant_embedding", "chol": "cholesky"}

#: relative size of a negative circulant eigenvalue still treated as roundoff
EIGEN_RTOL = 1e-8
CHOLESKY_MAX_STEPS = 4096
BRUTEFORCE_BUDGET = 2_000_000

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output step applied to ``x`` (mod 2**64)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replica_seed(master_seed: int, replica: int) -> int:
    """Seed of replica ``replica``: ``splitmix64(splitmix64(master) ^ replica)``."""
    return splitmix64(splitmix64(int(master_seed) & _MASK64) ^ (int(replica) & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


@dataclass(frozen=True)
class FbmSpec:
    h: float
    n_steps: int
    dt: float
    seed: int
    method: str = "circulant_embedding"

    def __post_init__(self):
        object.__setattr__(self, "h", check_hurst(self.h))
        method = METHOD_ALIASES.get(self.method, self.method)
        if method not in METHODS:
            raise ValidationError(f"unknown sampling method {self.method!r}")
        object.__setattr__(self, "method", method)
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if method == "circulant_embedding" and self.n_steps < 2:
            raise ValidationError("circulant embedding needs n_steps >= 2")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt!r}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValidationError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class IncrementInterval:
    s: float
    t: float

    def __post_init__(self):
        if not self.s < self.t:
            raise ValidationError(f"increment interval needs s < t, got [{self.s}, {self.t}]")


def fgn_autocovariance(h: float, lag):
    """Autocovariance of unit-spaced fBm increments at integer ``lag``.

    ``gamma(k) = (|k+1|^{2h} - 2|k|^{2h} + |k-1|^{2h}) / 2``, so ``gamma(0) = 1``.
    Accepts a scalar or an array of lags.
    """
    k = np.abs(np.asarray(lag, dtype=np.float64))
    two_h = 2.0 * h
    g = 0.5 * ((k + 1.0) ** two_h - 2.0 * k**two_h + np.abs(k - 1.0) ** two_h)
    return float(g) if g.ndim == 0 else g


@lru_cache(maxsize=16)
def _circulant_sqrt_eigs(h: float, n: int) -> np.ndarray:
    # first row of the 2n circulant: gamma(0..n), gamma(n-1..1)
    gam = fgn_autocovariance(h, np.arange(n + 1))
    row = np.concatenate([gam, gam[-2:0:-1]])
    eig = np.fft.fft(row).real
    lam_max = eig.max()
    if eig.min() < -EIGEN_RTOL * lam_max:
        raise EmbeddingError(
            f"circulant embedding for h={h}, n={n} has eigenvalue {eig.min():.3e}; "
            "use method='cholesky'"
        )
    eig = np.clip(eig, 0.0, None)
    out = np.sqrt(eig / row.size)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=4)
def _cholesky_factor(h: float, n: int) -> np.ndarray:
    gam = fgn_autocovariance(h, np.arange(n))
    idx = np.arange(n)
    cov = gam[np.abs(idx[:, None] - idx[None, :])]
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise EmbeddingError(f"Cholesky factorization failed for h={h}, n={n}: {exc}") from None
    L.setflags(write=False)
    return L


def sample_fgn(h: float, n: int, rng: np.random.Generator, method: str = "circulant_embedding") -> np.ndarray:
    """``n`` unit-variance fractional Gaussian noise increments."""
    method = METHOD_ALIASES.get(method, method)
    if method == "cholesky":
        if n > CHOLESKY_MAX_STEPS:
            raise BudgetExceeded(f"cholesky sampling is limited to {CHOLESKY_MAX_STEPS} steps")
        return _cholesky_factor(h, n) @ rng.standard_normal(n)
    if method != "circulant_embedding":
        raise ValidationError(f"unknown sampling method {method!r}")
    if h == 0.5:
        # the embedding is the identity here: every eigenvalue equals 1
        return rng.standard_normal(n)
    root = _circulant_sqrt_eigs(h, n)
    m = root.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(root * z).real[:n]


def sample_fbm_values(h: float, n_steps: int, dt: float, seed: int, method: str = "circulant_embedding") -> np.ndarray:
    """Values ``W(k*dt)``, ``k = 0..n_steps``, as a bare array."""
    incr = sample_fgn(h, n_steps, make_rng(seed), method)
    out = np.empty(n_steps + 1)
    out[0] = 0.0
    np.cumsum(incr, out=out[1:])
    if dt != 1.0:
        out *= dt**h
    return out


def sample_fbm(spec: FbmSpec) -> SamplePath:
    """Draw one fBm path on ``[0, n_steps*dt]`` starting at 0."""
    values = sample_fbm_values(spec.h, spec.n_steps, spec.dt, spec.seed, spec.method)
    return SamplePath(0.0, spec.dt, values)


def fbm_covariance(h: float, s, t):
    """``E W_s W_t = (|s|^{2h} + |t|^{2h} - |t-s|^{2h}) / 2``."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    two_h = 2 * h
    return 0.5 * (np.abs(s) ** two_h + np.abs(t) ** two_h - np.abs(t - s) ** two_h)


def increment_sum_covariance(h: float, a: IncrementInterval, b: IncrementInterval) -> float:
    """Covariance of the increments of fBm over intervals ``a`` and ``b``."""
    two_h = 2 * h
    if a == b:
        return (a.t - a.s) ** two_h
    return 0.5 * (
        abs(b.t - a.s) ** two_h
        + abs(a.t - b.s) ** two_h
        - abs(b.s - a.s) ** two_h
        - abs(b.t - a.t) ** two_h
    )


def weak_variance_alternating(h: float, S: float, n: int) -> float:
    """Exact ``E S_n^2`` for the sum of the increments over ``[(2i-1)S/2n, 2iS/2n]``.

    Uses the closed form obtained by grouping pairs at equal distance ``m``:
    ``(S/2n)^{2h} [n + sum_m (n-m)((2m+1)^{2h} + (2m-1)^{2h} - 2(2m)^{2h})]``.
    """
    h = check_hurst(h)
    if n < 1:
        raise ValidationError("n must be a positive integer")
    two_h = 2 * h
    m = np.arange(1, n, dtype=np.float64)
    cross = (n - m) * ((2 * m + 1) ** two_h + (2 * m - 1) ** two_h - 2 * (2 * m) ** two_h)
    return float((S / (2 * n)) ** two_h * (n + cross.sum()))


def weak_variance_sup_bruteforce(h: float, S: float, n: int, grid_resolution: int) -> float:
    """Maximal variance of a sum of ``n`` ordered increments with endpoints on a grid.

    Endpoints range over ``grid_resolution`` equally spaced points of
    ``[0, S]`` (both ends included). Configurations are the closure of the
    ordered ones (``s_1 <= t_1 <= s_2 <= ...``); the supremum over the open
    set equals the maximum over its closure.
    """
    h = check_hurst(h)
    if n < 1 or grid_resolution < 2:
        raise ValidationError("need n >= 1 and grid_resolution >= 2")
    n_configs = math.comb(grid_resolution + 2 * n - 1, 2 * n)
    if n_configs > BRUTEFORCE_BUDGET:
        raise BudgetExceeded(
            f"{n_configs} configurations exceed the budget of {BRUTEFORCE_BUDGET}"
        )
    grid = np.linspace(0.0, S, grid_resolution)
    gram = fbm_covariance(h, grid[:, None], grid[None, :])
    combos = np.array(
        list(itertools.combinations_with_replacement(range(grid_resolution), 2 * n)),
        dtype=np.intp,
    )
    sign = np.tile([-1.0, 1.0], n)
    var = np.zeros(len(combos))
    for i in range(2 * n):
        for j in range(2 * n):
            var += sign[i] * sign[j] * gram[combos[:, i], combos[:, j]]
    return float(var.max())
