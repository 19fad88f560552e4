"""Hot numeric kernels.

Each public function dispatches to a numba loop (``_*_nb``) or a vectorised
numpy path (``_*_np``) depending on :mod:`lavgap._accel`. Inputs are
float64 arrays; the Cantor kernels work on the (1-2*lam)-middle set of
generation ``k`` in [-1/2, 1/2].
"""

import math

import numpy as np

from ._accel import HAVE_NUMBA, njit


# ---------------------------------------------------------------------------
# distance to the generation-k set C_{lam,k}


@njit
def _cantor_distance_nb(x, lam, k):
    n = x.shape[0]
    dist = np.empty(n)
    slope = np.empty(n)
    for i in range(n):
        xi = x[i]
        if xi < -0.5:
            dist[i] = -0.5 - xi
            slope[i] = -1.0
            continue
        if xi > 0.5:
            dist[i] = xi - 0.5
            slope[i] = 1.0
            continue
        a = -0.5
        length = 1.0
        d = 0.0
        s = 0.0
        for _ in range(k):
            child = lam * length
            lo_gap = a + child
            hi_gap = a + length - child
            if xi <= lo_gap:
                length = child
            elif xi >= hi_gap:
                a = hi_gap
                length = child
            else:
                left = xi - lo_gap
                right = hi_gap - xi
                if left <= right:
                    d = left
                    s = 1.0
                else:
                    d = right
                    s = -1.0
                break
        dist[i] = d
        slope[i] = s
    return dist, slope


def _cantor_distance_np(x, lam, k):
    x = np.asarray(x, dtype=float)
    dist = np.zeros_like(x)
    slope = np.zeros_like(x)
    below = x < -0.5
    above = x > 0.5
    dist[below] = -0.5 - x[below]
    slope[below] = -1.0
    dist[above] = x[above] - 0.5
    slope[above] = 1.0
    active = ~(below | above)
    a = np.full_like(x, -0.5)
    length = 1.0
    for _ in range(k):
        if not active.any():
            break
        child = lam * length
        lo_gap = a + child
        hi_gap = a + length - child
        go_right = active & (x >= hi_gap)
        in_gap = active & (x > lo_gap) & ~go_right
        left = x - lo_gap
        right = hi_gap - x
        use_left = in_gap & (left <= right)
        use_right = in_gap & ~(left <= right)
        dist[use_left] = left[use_left]
        slope[use_left] = 1.0
        dist[use_right] = right[use_right]
        slope[use_right] = -1.0
        a = np.where(go_right, hi_gap, a)
        active &= ~in_gap
        length = child
    return dist, slope


def cantor_distance(x, lam, k):
    """Distance from each ``x`` to the union of generation-``k`` intervals.

    Returns ``(dist, slope)`` where ``slope`` is the a.e. derivative of the
    distance (+1, -1, or 0 inside an interval).
    """
    x = np.ascontiguousarray(x, dtype=float).ravel()
    if HAVE_NUMBA:
        return _cantor_distance_nb(x, float(lam), int(k))
    return _cantor_distance_np(x, float(lam), int(k))


# ---------------------------------------------------------------------------
# cumulative distribution of mu_{lam,k}


@njit
def _cantor_cdf_nb(x, lam, k):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        xi = x[i]
        if xi <= -0.5:
            out[i] = 0.0
            continue
        if xi >= 0.5:
            out[i] = 1.0
            continue
        a = -0.5
        length = 1.0
        base = 0.0
        mass = 1.0
        done = False
        for _ in range(k):
            child = lam * length
            half = 0.5 * mass
            if xi <= a + child:
                length = child
                mass = half
            elif xi >= a + length - child:
                a = a + length - child
                length = child
                base += half
                mass = half
            else:
                out[i] = base + half
                done = True
                break
        if not done:
            out[i] = base + mass * (xi - a) / length
    return out


def _cantor_cdf_np(x, lam, k):
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.5, 1.0, 0.0)
    active = (x > -0.5) & (x < 0.5)
    a = np.full_like(x, -0.5)
    base = np.zeros_like(x)
    length = 1.0
    mass = 1.0
    for _ in range(k):
        child = lam * length
        half = 0.5 * mass
        hi_gap = a + length - child
        go_right = active & (x >= hi_gap)
        in_gap = active & (x > a + child) & ~go_right
        out[in_gap] = base[in_gap] + half
        base = np.where(go_right, base + half, base)
        a = np.where(go_right, hi_gap, a)
        active &= ~in_gap
        length = child
        mass = half
    out[active] = base[active] + mass * (x[active] - a[active]) / length
    return out


def cantor_cdf(x, lam, k):
    """``mu_{lam,k}((-inf, x])`` for the normalised generation-``k`` measure."""
    x = np.ascontiguousarray(x, dtype=float).ravel()
    if HAVE_NUMBA:
        return _cantor_cdf_nb(x, float(lam), int(k))
    return _cantor_cdf_np(x, float(lam), int(k))


# ---------------------------------------------------------------------------
# convolution of the axial Cantor measure with the saddle profile


@njit
def _smoothstep_desc(u):
    # 1 for u <= 0, 0 for u >= 1, cubic in between
    if u <= 0.0:
        return 1.0
    if u >= 1.0:
        return 0.0
    return 1.0 - u * u * (3.0 - 2.0 * u)


@njit
def _saddle(rad, h):
    # 1/2 sgn(h) psi(rad/|h|) with transition on rad/|h| in [1/2, 2]
    if h == 0.0:
        return 0.0
    ah = abs(h)
    val = 0.5 * _smoothstep_desc((rad / ah - 0.5) / 1.5)
    return val if h > 0.0 else -val


@njit
def _saddle_sum_nb(rad, xd, lam, k, lump):
    n = rad.shape[0]
    out = np.empty(n)
    stack_a = np.empty(2 * k + 4)
    stack_len = np.empty(2 * k + 4)
    stack_lev = np.empty(2 * k + 4, dtype=np.int64)
    for i in range(n):
        r = rad[i]
        x = xd[i]
        total = 0.0
        top = 0
        stack_a[0] = -0.5
        stack_len[0] = 1.0
        stack_lev[0] = 0
        top = 1
        while top > 0:
            top -= 1
            a = stack_a[top]
            length = stack_len[top]
            lev = stack_lev[top]
            mass = 0.5 ** lev
            hmin = x - a - length
            hmax = x - a
            if hmin >= 2.0 * r and hmin > 0.0:
                total += 0.5 * mass
                continue
            if hmax <= -2.0 * r and hmax < 0.0:
                total -= 0.5 * mass
                continue
            if r > 0.0 and hmin >= -0.5 * r and hmax <= 0.5 * r:
                continue
            if lev == k or length <= lump * r:
                total += mass * _saddle(r, x - (a + 0.5 * length))
                continue
            child = lam * length
            stack_a[top] = a
            stack_len[top] = child
            stack_lev[top] = lev + 1
            top += 1
            stack_a[top] = a + length - child
            stack_len[top] = child
            stack_lev[top] = lev + 1
            top += 1
        out[i] = total
    return out


def _lump_levels(rad, lam, k, lump):
    levels = np.full(rad.shape, k, dtype=np.int64)
    pos = rad > 0.0
    with np.errstate(divide="ignore"):
        need = np.ceil(np.log(lump * rad[pos]) / math.log(lam) - 1e-12)
    levels[pos] = np.clip(need, 0, k).astype(np.int64)
    return levels


def _level_midpoints(lam, level):
    a = np.array([-0.5])
    length = 1.0
    for _ in range(level):
        child = lam * length
        a = np.stack([a, a + length - child], axis=1).ravel()
        length = child
    return a + 0.5 * length


def _saddle_np(rad, h):
    ah = np.abs(h)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (rad / ah - 0.5) / 1.5
    u = np.where(ah > 0.0, u, np.inf)
    u = np.clip(u, 0.0, 1.0)
    val = 0.5 * (1.0 - u * u * (3.0 - 2.0 * u))
    return np.sign(h) * val


def _saddle_sum_np(rad, xd, lam, k, lump, chunk=1 << 22):
    out = np.zeros(rad.shape[0])
    levels = _lump_levels(rad, lam, k, lump)
    for level in np.unique(levels):
        idx = np.nonzero(levels == level)[0]
        mids = _level_midpoints(lam, int(level))
        mass = 0.5 ** int(level)
        rows = max(1, chunk // mids.size)
        for start in range(0, idx.size, rows):
            sel = idx[start:start + rows]
            h = xd[sel, None] - mids[None, :]
            out[sel] = mass * _saddle_np(rad[sel, None], h).sum(axis=1)
    return out


def saddle_sum(rad, xd, lam, k, lump=1.0 / 32.0):
    """Sum over generation-``k`` atoms of ``2^-k * w(rad, xd - tau)``.

    ``w(r, h) = 1/2 sgn(h) psi(r/|h|)`` is the single-saddle profile. Subtrees
    of the Cantor tree shorter than ``lump * rad`` are collapsed onto their
    midpoint; ``lump=0`` gives the plain atomic sum.
    """
    rad = np.ascontiguousarray(rad, dtype=float).ravel()
    xd = np.ascontiguousarray(xd, dtype=float).ravel()
    if HAVE_NUMBA:
        return _saddle_sum_nb(rad, xd, float(lam), int(k), float(lump))
    return _saddle_sum_np(rad, xd, float(lam), int(k), float(lump))


# ---------------------------------------------------------------------------
# tensor-grid pair sums for the Gagliardo-type phases


@njit
def _pair_sum_table_nb(v, p, table, nbins, bin_of_offset):
    # 1-D uniform grid; table[n] is the cell-pair kernel weight at offset n
    n = v.shape[0]
    sums = np.zeros(nbins)
    comp = np.zeros(nbins)
    for i in range(n):
        vi = v[i]
        for j in range(i + 1, n):
            diff = abs(vi - v[j])
            if diff == 0.0:
                continue
            off = j - i
            term = 2.0 * diff ** p * table[off]
            b = bin_of_offset[off]
            # Neumaier compensated accumulation per shell
            t = sums[b] + term
            if abs(sums[b]) >= abs(term):
                comp[b] += (sums[b] - t) + term
            else:
                comp[b] += (term - t) + sums[b]
            sums[b] = t
    return sums + comp


def _pair_sum_table_np(v, p, table, nbins, bin_of_offset):
    n = v.shape[0]
    parts = [[] for _ in range(nbins)]
    for off in range(1, n):
        diff = np.abs(v[off:] - v[:-off])
        s = 2.0 * table[off] * float(np.sum(diff ** p))
        parts[bin_of_offset[off]].append(s)
    return np.array([math.fsum(part) for part in parts])


def pair_sum_table(v, p, table, bin_of_offset, nbins):
    """Shell-binned ``sum_{i != j} |v_i - v_j|^p table[|i-j|]`` on a 1-D grid."""
    v = np.ascontiguousarray(v, dtype=float)
    table = np.ascontiguousarray(table, dtype=float)
    bin_of_offset = np.ascontiguousarray(bin_of_offset, dtype=np.int64)
    if HAVE_NUMBA:
        return _pair_sum_table_nb(v, float(p), table, int(nbins), bin_of_offset)
    return _pair_sum_table_np(v, float(p), table, int(nbins), bin_of_offset)


@njit
def _pair_sum_points_nb(x, v, p, gamma, cell, delta, bin_lo, nbins):
    # midpoint rule on an arbitrary node set with equal cell volumes
    n = v.shape[0]
    d = x.shape[1]
    sums = np.zeros(nbins)
    comp = np.zeros(nbins)
    for i in range(n):
        vi = v[i]
        for j in range(i + 1, n):
            diff = abs(vi - v[j])
            if diff == 0.0:
                continue
            r2 = 0.0
            for c in range(d):
                t = x[i, c] - x[j, c]
                r2 += t * t
            r = math.sqrt(r2)
            if r < delta:
                continue
            term = 2.0 * cell * cell * diff ** p * r ** (-gamma)
            b = int(math.floor(math.log2(r))) - bin_lo
            if b < 0:
                b = 0
            elif b >= nbins:
                b = nbins - 1
            t = sums[b] + term
            if abs(sums[b]) >= abs(term):
                comp[b] += (sums[b] - t) + term
            else:
                comp[b] += (term - t) + sums[b]
            sums[b] = t
    return sums + comp


def _pair_sum_points_np(x, v, p, gamma, cell, delta, bin_lo, nbins, block=512):
    n = v.shape[0]
    parts = [[] for _ in range(nbins)]
    for start in range(0, n, block):
        stop = min(n, start + block)
        diff = np.abs(v[start:stop, None] - v[None, :])
        r = np.sqrt(((x[start:stop, None, :] - x[None, :, :]) ** 2).sum(axis=2))
        ii = np.arange(start, stop)[:, None]
        jj = np.arange(n)[None, :]
        keep = (jj > ii) & (diff > 0.0) & (r >= delta)
        with np.errstate(divide="ignore"):
            term = 2.0 * cell * cell * diff[keep] ** p * r[keep] ** (-gamma)
            b = np.floor(np.log2(r[keep])).astype(np.int64) - bin_lo
        b = np.clip(b, 0, nbins - 1)
        binned = np.bincount(b, weights=term, minlength=nbins)
        for k in range(nbins):
            parts[k].append(float(binned[k]))
    return np.array([math.fsum(part) for part in parts])


def pair_sum_points(x, v, p, gamma, cell, delta, bin_lo, nbins):
    """Shell-binned midpoint sum of ``|v_i-v_j|^p |x_i-x_j|^-gamma cell^2``."""
    x = np.ascontiguousarray(x, dtype=float)
    v = np.ascontiguousarray(v, dtype=float)
    if HAVE_NUMBA:
        return _pair_sum_points_nb(x, v, float(p), float(gamma), float(cell), float(delta),
                                   int(bin_lo), int(nbins))
    return _pair_sum_points_np(x, v, float(p), float(gamma), float(cell), float(delta),
                               int(bin_lo), int(nbins))
