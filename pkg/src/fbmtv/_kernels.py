"""Compiled inner loops. Everything here takes bare float64 arrays."""

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# truncated variation: dynamic programmes
# ---------------------------------------------------------------------------


@njit(cache=True)
def utv_value(x, c):
    opn = -x[0]
    closed = 0.0
    for k in range(1, x.size):
        xk = x[k]
        cand_closed = opn + xk - c
        cand_open = closed - xk
        if cand_closed > closed:
            closed = cand_closed
        if cand_open > opn:
            opn = cand_open
    return closed


@njit(cache=True)
def dtv_value(x, c):
    opn = x[0]
    closed = 0.0
    for k in range(1, x.size):
        xk = x[k]
        cand_closed = opn - xk - c
        cand_open = closed + xk
        if cand_closed > closed:
            closed = cand_closed
        if cand_open > opn:
            opn = cand_open
    return closed


@njit(cache=True)
def utv_witness(x, c):
    n = x.size
    opened = np.zeros(n, dtype=np.bool_)
    closed_at = np.zeros(n, dtype=np.bool_)
    opn = -x[0]
    opened[0] = True
    closed = 0.0
    for k in range(1, n):
        xk = x[k]
        cand_closed = opn + xk - c
        cand_open = closed - xk
        if cand_closed > closed:
            closed = cand_closed
            closed_at[k] = True
        if cand_open > opn:
            opn = cand_open
            opened[k] = True
    # backtrack: state 0 = CLOSED, 1 = OPEN
    s_idx = np.empty(n, dtype=np.int64)
    t_idx = np.empty(n, dtype=np.int64)
    m = 0
    state = 0
    k = n - 1
    while k >= 0:
        if state == 0:
            if k > 0 and closed_at[k]:
                t_idx[m] = k
                state = 1
            k -= 1
        else:
            if opened[k]:
                s_idx[m] = k
                m += 1
                state = 0
            k -= 1
    return closed, s_idx[:m][::-1].copy(), t_idx[:m][::-1].copy()


@njit(cache=True)
def ttv_value(x, c):
    closed = 0.0
    up = -x[0]
    down = x[0]
    for k in range(1, x.size):
        xk = x[k]
        a = up + xk - c
        b = down - xk - c
        if a > closed:
            closed = a
        if b > closed:
            closed = b
        if closed - xk > up:
            up = closed - xk
        if closed + xk > down:
            down = closed + xk
    return closed


@njit(cache=True)
def ttv_witness(x, c):
    n = x.size
    choice = np.zeros(n, dtype=np.int8)  # 1: closes an up pair, 2: a down pair
    up_open = np.zeros(n, dtype=np.bool_)
    down_open = np.zeros(n, dtype=np.bool_)
    closed = 0.0
    up = -x[0]
    down = x[0]
    up_open[0] = True
    down_open[0] = True
    for k in range(1, n):
        xk = x[k]
        a = up + xk - c
        b = down - xk - c
        if a > closed:
            closed = a
            choice[k] = 1
        if b > closed:
            closed = b
            choice[k] = 2
        if closed - xk > up:
            up = closed - xk
            up_open[k] = True
        if closed + xk > down:
            down = closed + xk
            down_open[k] = True
    s_idx = np.empty(n, dtype=np.int64)
    t_idx = np.empty(n, dtype=np.int64)
    m = 0
    # state 0 = CLOSED, 1 = pending minimum, 2 = pending maximum
    state = 0
    k = n - 1
    while k >= 0:
        if state == 0:
            if choice[k] != 0:
                t_idx[m] = k
                state = choice[k]
            k -= 1
        elif state == 1:
            if up_open[k]:
                s_idx[m] = k
                m += 1
                state = 0  # the pair may share index k with an earlier one
            else:
                k -= 1
        else:
            if down_open[k]:
                s_idx[m] = k
                m += 1
                state = 0
            else:
                k -= 1
    return closed, s_idx[:m][::-1].copy(), t_idx[:m][::-1].copy()


@njit(cache=True)
def taut_string(x, c):
    """Minimal-TV sequence within ``[x_k - c/2, x_k + c/2]`` (lazy string)."""
    n = x.size
    r = 0.5 * c
    lo = np.empty(n)
    hi = np.empty(n)
    cur_lo = x[0] - r
    cur_hi = x[0] + r
    lo[0] = cur_lo
    hi[0] = cur_hi
    for k in range(1, n):
        a = x[k] - r
        b = x[k] + r
        if b < cur_lo:
            cur_lo = b
            cur_hi = b
        elif a > cur_hi:
            cur_lo = a
            cur_hi = a
        else:
            if a > cur_lo:
                cur_lo = a
            if b < cur_hi:
                cur_hi = b
        lo[k] = cur_lo
        hi[k] = cur_hi
    g = np.empty(n)
    g[n - 1] = 0.5 * (lo[n - 1] + hi[n - 1])
    for k in range(n - 2, -1, -1):
        v = g[k + 1]
        if v < lo[k]:
            v = lo[k]
        elif v > hi[k]:
            v = hi[k]
        g[k] = v
    return g


# ---------------------------------------------------------------------------
# exhaustive oracles (short paths only)
# ---------------------------------------------------------------------------


@njit(cache=True)
def brute_chain_ttv(x, c):
    """max over index subsets z_0 < ... < z_m of sum (|x_{z_j+1} - x_{z_j}| - c)_+."""
    n = x.size
    best = 0.0
    for mask in range(1, 1 << n):
        total = 0.0
        prev = -1
        for i in range(n):
            if mask & (1 << i):
                if prev >= 0:
                    d = abs(x[i] - x[prev]) - c
                    if d > 0:
                        total += d
                prev = i
        if total > best:
            best = total
    return best


@njit(cache=True)
def brute_pairs_utv(x, c):
    """max over even subsets s_1 < t_1 < s_2 < ... of sum (x_t - x_s - c)_+."""
    n = x.size
    best = 0.0
    for mask in range(1, 1 << n):
        total = 0.0
        count = 0
        start = 0.0
        for i in range(n):
            if mask & (1 << i):
                if count % 2 == 0:
                    start = x[i]
                else:
                    d = x[i] - start - c
                    if d > 0:
                        total += d
                count += 1
        if count % 2 == 0 and total > best:
            best = total
    return best


# ---------------------------------------------------------------------------
# crossings of a piecewise-linear path
# ---------------------------------------------------------------------------


@njit(cache=True)
def strip_scan(x, a, c):
    """Completed (up, down) crossings of ``[a, a+c]`` by the interpolated path."""
    lo = a
    hi = a + c
    last = 0  # 0 none, 1 touched lo, 2 touched hi
    u = 0
    d = 0
    for k in range(x.size - 1):
        x0 = x[k]
        x1 = x[k + 1]
        if x1 >= x0:
            if x0 <= lo <= x1:
                if last == 2:
                    d += 1
                last = 1
            if x0 <= hi <= x1:
                if last == 1:
                    u += 1
                last = 2
        else:
            if x1 <= hi <= x0:
                if last == 1:
                    u += 1
                last = 2
            if x1 <= lo <= x0:
                if last == 2:
                    d += 1
                last = 1
    if x.size == 1:
        return 0, 0
    return u, d


@njit(cache=True)
def level_counts(x, c, rho):
    """Total (KU, KD) for the grid ``c*Z + rho``."""
    have = False
    cur = 0
    ku = 0
    kd = 0
    for k in range(x.size - 1):
        x0 = x[k]
        x1 = x[k + 1]
        if x1 >= x0:
            j_lo = np.int64(np.ceil((x0 - rho) / c))
            j_hi = np.int64(np.floor((x1 - rho) / c))
            if j_hi < j_lo:
                continue
            if not have:
                have = True
                cur = j_lo
            if j_hi > cur:
                ku += j_hi - cur
                cur = j_hi
        else:
            j_hi = np.int64(np.floor((x0 - rho) / c))
            j_lo = np.int64(np.ceil((x1 - rho) / c))
            if j_hi < j_lo:
                continue
            if not have:
                have = True
                cur = j_hi
            if j_lo < cur:
                kd += cur - j_lo
                cur = j_lo
    return ku, kd


@njit(cache=True)
def level_sweep(x, c, rho):
    """Per-strip crossing counts plus the Lebesgue hitting sequence.

    Returns ``(p_min, ups, downs, hit_pos, hit_level)`` where strip ``p``
    (levels ``p`` and ``p+1``) has ``ups[p - p_min]`` upcrossings and
    ``hit_pos`` holds fractional sample positions of consecutive hits.
    """
    vmin = x.min()
    vmax = x.max()
    p_min = np.int64(np.floor((vmin - rho) / c)) - 1
    p_max = np.int64(np.ceil((vmax - rho) / c)) + 1
    width = p_max - p_min + 1
    ups = np.zeros(width + 1, dtype=np.int64)
    downs = np.zeros(width + 1, dtype=np.int64)
    cap = 16
    hit_pos = np.empty(cap)
    hit_level = np.empty(cap, dtype=np.int64)
    m = 0
    have = False
    cur = 0
    for k in range(x.size - 1):
        x0 = x[k]
        x1 = x[k + 1]
        if x1 >= x0:
            j_lo = np.int64(np.ceil((x0 - rho) / c))
            j_hi = np.int64(np.floor((x1 - rho) / c))
            step = 1
        else:
            j_lo = np.int64(np.floor((x0 - rho) / c))
            j_hi = np.int64(np.ceil((x1 - rho) / c))
            step = -1
        if (j_hi - j_lo) * step < 0:
            continue
        j = j_lo
        if have and j == cur:
            j += step
        elif have:
            # first touched level is adjacent to (or equal to) the current one
            pass
        while (j_hi - j) * step >= 0:
            if have:
                if step == 1:
                    ups[cur - p_min] += 1
                else:
                    downs[j - p_min] += 1
            if m == cap:
                cap *= 2
                hp = np.empty(cap)
                hl = np.empty(cap, dtype=np.int64)
                hp[:m] = hit_pos[:m]
                hl[:m] = hit_level[:m]
                hit_pos = hp
                hit_level = hl
            lev = j * c + rho
            if x1 != x0:
                frac = (lev - x0) / (x1 - x0)
            else:
                frac = 0.0
            if frac < 0.0:
                frac = 0.0
            elif frac > 1.0:
                frac = 1.0
            hit_pos[m] = k + frac
            hit_level[m] = j
            m += 1
            have = True
            cur = j
            j += step
    return p_min, ups, downs, hit_pos[:m].copy(), hit_level[:m].copy()


@njit(cache=True)
def strip_profile(x, c, mids):
    """(U, D) of strip ``[a, a+c]`` for every ``a`` in ``mids``."""
    m = mids.size
    u = np.zeros(m, dtype=np.int64)
    d = np.zeros(m, dtype=np.int64)
    for i in range(m):
        uu, dd = strip_scan(x, mids[i], c)
        u[i] = uu
        d[i] = dd
    return u, d


@njit(cache=True)
def zigzag(x, c):
    """Alternating c-significant extremes of the sequence ``x``.

    Returns ``(vals, is_max)``. A pending extreme is confirmed once the path
    reverses from it by at least ``c``; the initial and final pending
    extremes are included, so consecutive (min, max) pairs enclose every
    completed upcrossing of a strip of height ``c``.
    """
    n = x.size
    vals = np.empty(n + 1)
    is_max = np.empty(n + 1, dtype=np.bool_)
    m = 0
    run_min = x[0]
    run_max = x[0]
    direction = 0  # 0 undecided, 1 rising (tracking a max), -1 falling
    for k in range(1, n):
        v = x[k]
        if direction == 0:
            if v > run_max:
                run_max = v
            if v < run_min:
                run_min = v
            if run_max - run_min >= c:
                # the extreme reached earlier is the first confirmed one
                if v == run_max:
                    vals[m] = run_min
                    is_max[m] = False
                    direction = 1
                else:
                    vals[m] = run_max
                    is_max[m] = True
                    direction = -1
                m += 1
        elif direction == 1:
            if v > run_max:
                run_max = v
            elif run_max - v >= c:
                vals[m] = run_max
                is_max[m] = True
                m += 1
                direction = -1
                run_min = v
        else:
            if v < run_min:
                run_min = v
            elif v - run_min >= c:
                vals[m] = run_min
                is_max[m] = False
                m += 1
                direction = 1
                run_max = v
    if direction == 1:
        vals[m] = run_max
        is_max[m] = True
        m += 1
    elif direction == -1:
        vals[m] = run_min
        is_max[m] = False
        m += 1
    return vals[:m].copy(), is_max[:m].copy()
