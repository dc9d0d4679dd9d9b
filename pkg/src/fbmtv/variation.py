"""Truncated variation of a sampled path.

For ``c >= 0`` and values ``x_0..x_N``:

* ``UTV(x, c) = sup sum_i (x_{t_i} - x_{s_i} - c)_+`` over ``s_1 < t_1 < s_2 < ...``
* ``DTV(x, c) = UTV(-x, c)``
* ``TTV(x, c) = sup sum_i (|x_{t_i} - x_{s_i}| - c)_+``, and ``TTV = UTV + DTV``.

Three independent algorithms are provided: linear-time dynamic programmes
(with optimal witnesses), the taut string (TTV as the least total variation
of a sequence kept within ``c/2`` of the path), and exhaustive enumeration
for very short paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import SamplePath, check_truncation
from .errors import BudgetExceeded, InvariantViolation, ValidationError

KINDS = ("UTV", "DTV", "TTV")
BRUTE_FORCE_MAX_LENGTH = 14
#: tolerance of the TTV = UTV + DTV self-check, relative to sum |dx|
IDENTITY_RTOL = 1e-9


def _values(path) -> np.ndarray:
    if isinstance(path, SamplePath):
        return path.values
    x = np.ascontiguousarray(path, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValidationError("expected a one-dimensional sequence of values")
    return x


def _kind(kind: str) -> str:
    k = str(kind).upper()
    if k not in KINDS:
        raise ValidationError(f"kind must be one of {KINDS}, got {kind!r}")
    return k


@dataclass(frozen=True)
class VariationResult:
    """Value of a truncated variation and an optimal set of index pairs.

    ``witness[i] = (s_i, t_i)`` with ``s_i < t_i <= s_{i+1}``; ``payoffs[i]`` is
    the (positive) contribution of pair ``i``, so ``value == sum(payoffs)`` up
    to rounding (exactly, except for TTV at ``c = 0``, which is ``sum |dx|``).
    For UTV/DTV consecutive pairs never share an index.
    """

    kind: str
    c: float
    value: float
    witness: tuple = field(default=())
    payoffs: tuple = field(default=())


def _result(kind, c, x, s_idx, t_idx, sign) -> VariationResult:
    if sign == 0:
        pay = np.abs(x[t_idx] - x[s_idx]) - c
    else:
        pay = sign * (x[t_idx] - x[s_idx]) - c
    # tied optima may produce pairs that contribute nothing
    keep = pay > 0
    s_idx, t_idx, pay = s_idx[keep], t_idx[keep], pay[keep]
    # summing the witness makes value and witness agree to the last bit
    value = float(np.sum(pay)) if pay.size else 0.0
    witness = tuple((int(s), int(t)) for s, t in zip(s_idx, t_idx))
    return VariationResult(kind, c, value, witness, tuple(float(p) for p in pay))


def utv(path, c: float) -> VariationResult:
    """Upward truncated variation with an optimal witness."""
    c = check_truncation(c)
    x = _values(path)
    _, s, t = K.utv_witness(x, c)
    return _result("UTV", c, x, s, t, 1)


def dtv(path, c: float) -> VariationResult:
    """Downward truncated variation, i.e. :func:`utv` of the negated path."""
    c = check_truncation(c)
    x = _values(path)
    _, s, t = K.utv_witness(-x, c)
    return _result("DTV", c, x, s, t, -1)


def ttv(path, c: float, *, check: bool = True) -> VariationResult:
    """Truncated total variation with an optimal witness.

    Computed by its own dynamic programme; with ``check=True`` the result is
    compared against ``utv + dtv`` and an :class:`InvariantViolation` is
    raised if they disagree by more than ``1e-9 * max(1, sum |dx|)``.
    """
    c = check_truncation(c)
    x = _values(path)
    if c == 0:
        # every move counts: the value is the total variation, summed as such
        steps = np.nonzero(np.diff(x))[0]
        res = _result("TTV", c, x, steps, steps + 1, 0)
        return VariationResult("TTV", c, total_variation(x), res.witness, res.payoffs)
    _, s, t = K.ttv_witness(x, c)
    res = _result("TTV", c, x, s, t, 0)
    if check:
        split = K.utv_value(x, c) + K.dtv_value(x, c)
        scale = max(1.0, float(np.abs(np.diff(x)).sum()))
        if abs(res.value - split) > IDENTITY_RTOL * scale:
            raise InvariantViolation(
                f"TTV={res.value!r} differs from UTV+DTV={split!r} at c={c!r}"
            )
    return res


def variation_value(path, c: float, kind: str = "TTV") -> float:
    """Value only (no witness); the fast path used by Monte Carlo loops."""
    c = check_truncation(c)
    x = _values(path)
    kind = _kind(kind)
    if kind == "UTV":
        return float(K.utv_value(x, c))
    if kind == "DTV":
        return float(K.dtv_value(x, c))
    if c == 0:
        return total_variation(x)
    return float(K.ttv_value(x, c))


def total_variation(path) -> float:
    return float(np.abs(np.diff(_values(path))).sum())


@dataclass(frozen=True)
class TautString:
    """Knots ``(index, level)`` of the least-variation sequence inside the tube.

    Between knots the string is linear in the index, and every sample of the
    path lies within ``c/2`` of the string. ``levels`` holds the string at
    every sample index.
    """

    c: float
    knots: tuple
    levels: np.ndarray = field(repr=False)

    @property
    def tv(self) -> float:
        return float(np.abs(np.diff(self.levels)).sum())


def taut_string(path, c: float) -> TautString:
    c = check_truncation(c, strict=True)
    x = _values(path)
    g = K.taut_string(x, c)
    g.setflags(write=False)
    if g.size <= 2:
        keep = np.arange(g.size)
    else:
        # knots are the endpoints and the indices where the slope changes
        d = np.diff(g)
        bend = np.nonzero(d[1:] != d[:-1])[0] + 1
        keep = np.concatenate([[0], bend, [g.size - 1]])
    knots = tuple((int(i), float(g[i])) for i in keep)
    return TautString(c, knots, g)


def brute_force_variation(path, c: float, kind: str = "TTV") -> float:
    """Exhaustive supremum over all index subsequences (length <= 14)."""
    c = check_truncation(c)
    x = _values(path)
    kind = _kind(kind)
    if x.size > BRUTE_FORCE_MAX_LENGTH:
        raise BudgetExceeded(
            f"exhaustive search is limited to {BRUTE_FORCE_MAX_LENGTH} samples, got {x.size}"
        )
    if kind == "UTV":
        return float(K.brute_pairs_utv(x, c))
    if kind == "DTV":
        return float(K.brute_pairs_utv(-x, c))
    return float(K.brute_chain_ttv(x, c))
