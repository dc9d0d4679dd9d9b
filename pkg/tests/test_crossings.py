import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fbmtv import _kernels as K
from fbmtv.core import LevelGrid, SamplePath, TimeInterval
from fbmtv.crossings import (
    balance_bound,
    banach_integral,
    crossing_count_at,
    crossing_profile,
    kbar,
    lebesgue_partition,
    level_counts,
    level_crossings,
    psi_variation,
    sandwich_bounds,
    strip_crossings,
)
from fbmtv.errors import ValidationError
from fbmtv.fbm import sample_fbm_values
from fbmtv.variation import total_variation, variation_value

from conftest import positive_truncations, random_walk, value_arrays


def _event_scan(x, a, c):
    """Crossings of [a, a+c] by stepping the interpolated path through its edges."""
    lo, hi = a, a + c
    state, u, d = None, 0, 0  # last edge touched
    for v0, v1 in zip(np.r_[x[0], x[:-1]], x):
        for edge in sorted({lo, hi}, reverse=bool(v1 < v0)):
            if min(v0, v1) <= edge <= max(v0, v1):
                if edge == lo and state == "hi":
                    d += 1
                if edge == hi and state == "lo":
                    u += 1
                state = "lo" if edge == lo else "hi"
    return u, d


# --- worked examples -------------------------------------------------------------


def test_strip_examples():
    assert strip_crossings([0.25, 0.75], None, 1, 0).n == 0
    cc = strip_crossings([-0.5, 1.5, -0.5, 1.5], None, 1, 0)
    assert (cc.u, cc.d, cc.n) == (2, 1, 3)
    assert strip_crossings([0.1, 2.15], None, 1, 1).u == 1


def test_level_examples():
    s = level_crossings([0.1, 2.15], None, LevelGrid(1.0))
    assert (s.k, s.ku, s.kd) == (1, 1, 0)
    assert list(s.per_level) == [1]
    assert level_crossings([0.3, 0.3, 0.3], None, LevelGrid(1.0)).k == 0
    assert s.to_dict()["per_level"][0]["lower"] == 1.0


def test_lebesgue_examples():
    part = lebesgue_partition(SamplePath(0.0, 1.0, [0.0, 2.05]), LevelGrid(1.0))
    np.testing.assert_allclose(part.levels, [0, 1, 2])
    np.testing.assert_allclose(part.times, [0, 1 / 2.05, 2 / 2.05])
    assert part.n_steps == 2
    assert psi_variation(SamplePath(0.0, 1.0, [0.0, 2.05]), part, 2) == pytest.approx(2.0)
    empty = lebesgue_partition([0.2, 0.7, 0.3], LevelGrid(1.0))
    assert empty.n_steps == 0 and empty.times.size == 0
    with pytest.raises(ValidationError):
        psi_variation([0.0, 1.0], part, 0.5)


def test_banach_and_kbar_examples():
    assert banach_integral([0.0, 1.0], None, 0.4, "U") == pytest.approx(0.6)
    assert banach_integral([0.0, 1.0], None, 0.4, "D") == 0.0
    assert banach_integral([2.0, 2.0], None, 0.4, "N") == 0.0
    assert kbar([0, 1, 0, 1], None, 0.5) == pytest.approx(3.0)
    with pytest.raises(ValidationError):
        kbar([0, 1, 0, 1], None, 0.0)


def test_interval_restriction():
    p = SamplePath(0.0, 0.25, [0.0, 2.0, 0.0, 2.0, 0.0])
    assert strip_crossings(p, TimeInterval(0.0, 0.5), 1, 0.5).u == 1
    assert strip_crossings(p, None, 1, 0.5).n == 4
    with pytest.raises(ValidationError):
        strip_crossings([0.0, 1.0], TimeInterval(0.0, 0.5), 1, 0)


# --- oracles ---------------------------------------------------------------------


@given(value_arrays(max_size=30), positive_truncations, st.floats(-10, 10))
def test_strip_scan_matches_event_oracle(x, c, a):
    cc = strip_crossings(x, None, c, a)
    assert (cc.u, cc.d) == _event_scan(x, a, c)


@given(value_arrays(max_size=30), st.floats(0.05, 5), st.floats(-0.5, 0.5))
def test_level_counts_are_sums_of_strips(x, c, rho):
    grid = LevelGrid(c, rho * c)
    ku, kd = level_counts(x, grid.c, grid.rho)
    lo = int(np.floor((x.min() - grid.rho) / c)) - 1
    hi = int(np.ceil((x.max() - grid.rho) / c)) + 1
    su = sd = 0
    for p in range(lo, hi + 1):
        cc = strip_crossings(x, None, c, grid.level(p))
        su, sd = su + cc.u, sd + cc.d
    assert (ku, kd) == (su, sd)


def test_profile_matches_strip_scan_at_random_levels(rng):
    for _ in range(20):
        x = random_walk(rng, 300)
        c = float(rng.uniform(0.2, 3))
        levels = rng.uniform(x.min() - c - 1, x.max() + 1, 200)
        for kind, col in (("U", 0), ("D", 1)):
            got = crossing_count_at(x, c, kind, levels)
            want = [K.strip_scan(x, a, c)[col] for a in levels]
            np.testing.assert_array_equal(got, want)
        prof = crossing_profile(x, c, "N")
        want_n = [sum(K.strip_scan(x, a, c)) for a in levels]
        np.testing.assert_array_equal(prof(levels), want_n)


# --- identities and bounds ---------------------------------------------------------


@given(value_arrays(max_size=200), positive_truncations)
def test_banach_indicatrix(x, c):
    for kind, tv in (("N", "TTV"), ("U", "UTV"), ("D", "DTV")):
        want = variation_value(x, c, tv)
        got = banach_integral(x, None, c, kind)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-9 * max(1.0, total_variation(x)))


@given(value_arrays(max_size=120), positive_truncations, st.floats(-0.5, 0.5))
def test_sandwich_and_balance(x, c, rho):
    ku, kd = level_counts(x, c, rho * c)
    lo, hi = sandwich_bounds(x, c)
    tol = 1e-9 * max(1.0, hi)
    assert lo - tol <= ku + kd <= hi + tol
    assert abs(ku - kd) <= balance_bound(x, c)


@given(value_arrays(max_size=80), positive_truncations, st.floats(-0.5, 0.5), st.integers(-3, 3))
def test_grid_shift_by_multiples_of_c(x, c, rho, q):
    # compare grids that are the same set of floats after normalization
    assume(LevelGrid(c, rho * c).rho == LevelGrid(c, rho * c + q * c).rho)
    assert level_counts(x, c, rho * c + q * c) == level_counts(x, c, rho * c)


@given(value_arrays(max_size=80), positive_truncations, st.floats(-0.5, 0.5))
def test_lebesgue_partition_steps_equal_k(x, c, rho):
    grid = LevelGrid(c, rho * c)
    part = lebesgue_partition(x, grid)
    s = level_crossings(x, None, grid)
    assert part.n_steps == s.k
    if part.n_steps:
        np.testing.assert_allclose(np.abs(np.diff(part.levels)), c, rtol=1e-9)
        assert np.all(np.diff(part.times) >= 0)
        assert psi_variation(x, part, 2.0) == pytest.approx(c**2 * s.k, rel=1e-6)


def test_psi_variation_on_fbm():
    h = 0.7
    x = sample_fbm_values(h, 2**14, 2**-14, 3)
    path = SamplePath(0.0, 2**-14, x)
    for c in (0.2, 0.1, 0.05):
        grid = LevelGrid(c)
        part = lebesgue_partition(path, grid)
        k = level_crossings(path, None, grid).k
        assert abs(psi_variation(path, part, 1 / h) - c ** (1 / h) * k) <= c ** (1 / h)


def test_k_is_not_monotone_in_c():
    # on [1.7, 2.7] the grid 0.55*Z meets only 2.2, while 0.59*Z meets 1.77 and 2.36
    x = np.array([1.7, 2.7])
    assert sum(level_counts(x, 0.55)) == 0
    assert sum(level_counts(x, 0.59)) == 1


def test_profile_integrates_to_variation(rng):
    x = random_walk(rng, 500)
    prof = crossing_profile(x, 0.8, "U")
    assert prof.integral() == pytest.approx(variation_value(x, 0.8, "UTV"), rel=1e-12)
    assert prof(np.array([x.min() - 10, x.max() + 10])).tolist() == [0, 0]
