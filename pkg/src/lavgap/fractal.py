"""Generalised Cantor sets, their finite generations and the Cantor measure.

The (1-2*lam)-middle Cantor set lives on [-1/2, 1/2]; generation ``k`` is the
union of 2^k closed intervals of length lam^k and carries the measure with
density (2*lam)^-k. Product sets use the Euclidean distance.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError, ResourceLimitError

MAX_INTERVALS = 1 << 22


@dataclass(frozen=True)
class FractalParams:
    """Parameters of the product Cantor set ``C_lam^m`` at generation ``k``.

    Parameters
    ----------
    lam : float
        Contraction ratio, strictly inside (0, 1/2).
    m : int
        Number of product factors.
    generation : int
        Finite generation used for every "limit" object.
    """

    lam: float
    m: int = 1
    generation: int = 12

    def __post_init__(self):
        if not (0.0 < self.lam < 0.5) or not math.isfinite(self.lam):
            raise ParameterError(f"lambda must lie in (0, 1/2), got {self.lam}")
        if int(self.m) != self.m or self.m < 1:
            raise ParameterError(f"m must be a positive integer, got {self.m}")
        if int(self.generation) != self.generation or self.generation < 0:
            raise ParameterError(f"generation must be a non-negative integer, got {self.generation}")

    @property
    def dimension(self):
        return fractal_dimension(self)

    def with_generation(self, k):
        return FractalParams(self.lam, self.m, int(k))

    @classmethod
    def from_dimension(cls, dim, m=1, generation=12):
        """Pick lam so that the product set has dimension ``dim``."""
        if not (0.0 < dim < m):
            raise ParameterError(f"dimension must lie in (0, {m}), got {dim}")
        return cls(2.0 ** (-m / dim), m, generation)


@dataclass(frozen=True)
class CantorGeneration:
    """Intervals ``[a_i, b_i]`` of ``C_{lam,k}``, ordered left to right."""

    intervals: np.ndarray
    level: int
    lam: float

    @property
    def length(self):
        return self.lam ** self.level

    def __len__(self):
        return self.intervals.shape[0]


def fractal_dimension(params):
    """Return ``m log 2 / log(1/lam)``."""
    return params.m * math.log(2.0) / math.log(1.0 / params.lam)


def _check_storage(count, cap):
    if count > cap:
        raise ResourceLimitError(f"{count} boxes exceed the storage cap {cap}")


def left_endpoints(lam, k, cap=MAX_INTERVALS):
    """Left endpoints of the 2^k generation-k intervals, increasing."""
    _check_storage(2 ** k, cap)
    a = np.array([-0.5])
    length = 1.0
    for _ in range(k):
        child = lam * length
        a = np.stack([a, a + (length - child)], axis=1).ravel()
        length = child
    return a


def build_generation(params, cap=MAX_INTERVALS):
    """Return the 2^k intervals of ``C_{lam,k}``.

    Raises
    ------
    ResourceLimitError
        If 2^k exceeds ``cap``.
    """
    k = params.generation
    a = left_endpoints(params.lam, k, cap)
    ivals = np.column_stack([a, a + params.lam ** k])
    # pin the outermost endpoints, which are exact in any arithmetic
    ivals[0, 0] = -0.5
    ivals[-1, 1] = 0.5
    return CantorGeneration(ivals, k, params.lam)


def gap_intervals(lam, k):
    """Removed open gaps of generations 1..k as ``(level, a, b)`` arrays.

    Level ``l`` holds the 2^l gaps cut out of the generation-``l`` intervals.
    """
    levels, lo, hi = [], [], []
    for lev in range(k):
        a = left_endpoints(lam, lev)
        length = lam ** lev
        child = lam * length
        levels.append(np.full(a.size, lev))
        lo.append(a + child)
        hi.append(a + length - child)
    if not levels:
        return np.zeros(0, dtype=int), np.zeros(0), np.zeros(0)
    return np.concatenate(levels), np.concatenate(lo), np.concatenate(hi)


def _generation_for_tol(lam, tol):
    if tol is None:
        return None
    if tol <= 0:
        raise ParameterError("tol must be positive")
    return max(0, math.ceil(math.log(tol) / math.log(lam)))


def distance_to_cantor(x, params, tol=None):
    """Distance from ``x`` to ``C_lam``.

    The descent stops at the generation whose intervals are shorter than
    ``tol`` (default: the generation stored in ``params``), so the result is
    within ``tol`` of the limit-set distance. Accepts scalars or arrays.
    """
    k = _generation_for_tol(params.lam, tol)
    k = params.generation if k is None else k
    arr = np.asarray(x, dtype=float)
    dist, _ = kernels.cantor_distance(arr.ravel(), params.lam, k)
    if arr.ndim == 0:
        return float(dist[0])
    return dist.reshape(arr.shape)


def distance_to_cantor_product(x, params, tol=None):
    """Euclidean distance from points to the product set ``C_lam^m``.

    ``x`` has trailing axis of length ``m``.
    """
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1:] != (params.m,):
        raise ParameterError(f"expected trailing dimension {params.m}, got shape {arr.shape}")
    per = distance_to_cantor(arr, params, tol)
    out = np.sqrt(np.sum(np.asarray(per) ** 2, axis=-1))
    return float(out) if out.ndim == 0 else out


def cantor_cdf(x, params):
    """CDF of the generation-k measure in one coordinate."""
    arr = np.asarray(x, dtype=float)
    out = kernels.cantor_cdf(arr.ravel(), params.lam, params.generation)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


@dataclass(frozen=True)
class CantorMeasure:
    """The normalised measure ``mu_{lam,k}^m`` on the product of generations."""

    params: FractalParams

    @property
    def box_mass(self):
        return 2.0 ** (-self.params.m * self.params.generation)

    @property
    def density(self):
        return (2.0 * self.params.lam) ** (-self.params.m * self.params.generation)

    def total_mass(self):
        """Box count times box mass; both are powers of two, so this is exact."""
        return float(2 ** (self.params.m * self.params.generation)) * self.box_mass

    def midpoints(self, cap=MAX_INTERVALS):
        """Box midpoints, shape ``(2^(m k), m)``."""
        p = self.params
        _check_storage(2 ** (p.m * p.generation), cap)
        mids = left_endpoints(p.lam, p.generation, cap) + 0.5 * p.lam ** p.generation
        grids = np.meshgrid(*([mids] * p.m), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def sample(self, rng, n):
        """Draw ``n`` points from the measure (uniform inside a random box)."""
        p = self.params
        out = np.empty((n, p.m))
        for c in range(p.m):
            bits = rng.integers(0, 2, size=(n, p.generation))
            a = np.full(n, -0.5)
            length = 1.0
            for lev in range(p.generation):
                child = p.lam * length
                a += bits[:, lev] * (length - child)
                length = child
            out[:, c] = a + length * rng.random(n)
        return out


def _G(x, r):
    # antiderivative of sqrt(r^2 - x^2)
    x = np.clip(x, -r, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.sqrt(np.maximum(r * r - x * x, 0.0))
        ang = np.where(r > 0, np.arcsin(np.clip(x / np.where(r > 0, r, 1.0), -1.0, 1.0)), 0.0)
    return 0.5 * (x * g + r * r * ang)


def _quadrant_area(a, b, r):
    # area of {x <= a, y <= b} inside the disk of radius r at the origin
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    r = np.broadcast_to(np.asarray(r, dtype=float), np.broadcast(a, b).shape)
    hi = np.clip(a, -r, r)
    lo = -r
    bc = np.clip(b, -r, r)
    w = np.sqrt(np.maximum(r * r - bc * bc, 0.0))

    def seg(x1, x2):
        s = np.maximum(lo, x1)
        e = np.minimum(hi, x2)
        return s, np.maximum(e, s)

    full = 2.0 * (_G(hi, r) - _G(lo, r))
    # outer pieces: chord half-length g <= |b|; contributes 2g when b > 0, 0 when b < 0
    s1, e1 = seg(-r, -w)
    s3, e3 = seg(w, r)
    outer = 2.0 * (_G(e1, r) - _G(s1, r) + _G(e3, r) - _G(s3, r))
    outer = np.where(bc > 0, outer, 0.0)
    s2, e2 = seg(-w, w)
    mid = bc * (e2 - s2) + _G(e2, r) - _G(s2, r)
    res = outer + mid
    res = np.where(b >= r, full, res)
    res = np.where(b <= -r, 0.0, res)
    return res


def disk_rect_area(center, r, x0, x1, y0, y1):
    """Exact area of the intersection of a closed disk with axis boxes."""
    cx, cy = center
    ax0, ax1 = x0 - cx, x1 - cx
    by0, by1 = y0 - cy, y1 - cy
    area = (_quadrant_area(ax1, by1, r) - _quadrant_area(ax0, by1, r)
            - _quadrant_area(ax1, by0, r) + _quadrant_area(ax0, by0, r))
    return np.clip(area, 0.0, (x1 - x0) * (y1 - y0))


def measure_ball(center, r, measure):
    """Mass of the closed ball ``B_r(center)`` under ``mu_{lam,k}^m``.

    Exact for m = 1 (difference of the piecewise-linear CDF). For m = 2 the
    box tree is pruned level by level and leaf boxes use the exact
    disk/rectangle intersection area.
    """
    if r < 0:
        raise ParameterError("radius must be non-negative")
    p = measure.params
    c = np.atleast_1d(np.asarray(center, dtype=float))
    if c.size != p.m:
        raise ParameterError(f"center must have {p.m} coordinates")
    if p.m == 1:
        lo, hi = kernels.cantor_cdf(np.array([c[0] - r, c[0] + r]), p.lam, p.generation)
        return float(hi - lo)
    if p.m != 2:
        raise NotImplementedError("measure_ball supports m <= 2")
    if r == 0.0:
        return 0.0
    lam, k = p.lam, p.generation
    # frontier boxes (x0, y0) at the current level, side ``length``
    x0 = np.array([-0.5])
    y0 = np.array([-0.5])
    length = 1.0
    total = []
    for lev in range(k + 1):
        mass = 0.25 ** lev
        # farthest and nearest point of each box to the center
        dx_far = np.maximum(np.abs(x0 - c[0]), np.abs(x0 + length - c[0]))
        dy_far = np.maximum(np.abs(y0 - c[1]), np.abs(y0 + length - c[1]))
        inside = dx_far * dx_far + dy_far * dy_far <= r * r
        dx_near = np.maximum(0.0, np.maximum(x0 - c[0], c[0] - x0 - length))
        dy_near = np.maximum(0.0, np.maximum(y0 - c[1], c[1] - y0 - length))
        touch = dx_near * dx_near + dy_near * dy_near <= r * r
        total.append(mass * np.count_nonzero(inside))
        partial = touch & ~inside
        x0, y0 = x0[partial], y0[partial]
        if x0.size == 0:
            break
        if lev == k:
            area = disk_rect_area(c, r, x0, x0 + length, y0, y0 + length)
            total.append(math.fsum(mass * area / (length * length)))
            break
        child = lam * length
        shift = length - child
        x0 = np.concatenate([x0, x0 + shift, x0, x0 + shift])
        y0 = np.concatenate([y0, y0, y0 + shift, y0 + shift])
        length = child
    return min(1.0, math.fsum(total))


def _union_len_1d(rho, lam, k, end=1.5):
    # length of {x : dis(x, C_k) <= rho}, each end clipped after ``end``
    rho = np.asarray(rho, dtype=float)
    out = np.full(rho.shape, (2.0 * lam) ** k)
    for lev in range(k):
        g = lam ** lev * (1.0 - 2.0 * lam)
        out = out + 2 ** lev * np.minimum(g, 2.0 * rho)
    return out + np.minimum(2.0 * end, 2.0 * rho)


def _int_min_chord(g, r, U):
    # integral over u in [0, U] of min(g, 2 sqrt(r^2 - u^2)), U <= r
    if U <= 0.0:
        return 0.0
    if g >= 2.0 * r:
        return float(2.0 * (_G(U, r) - _G(0.0, r)))
    ustar = math.sqrt(r * r - 0.25 * g * g)
    if U <= ustar:
        return g * U
    return float(g * ustar + 2.0 * (_G(U, r) - _G(ustar, r)))


def neighborhood_volume(r, params, clip=2.0):
    """Lebesgue measure of the closed ``r``-neighbourhood of ``C_{lam,k}^m``.

    The neighbourhood is clipped to ``[-clip, clip]^m`` (default [-2, 2]).
    m = 1 uses interval-union arithmetic; m = 2 integrates the exact 1-D
    section lengths in closed form.
    """
    if r <= 0:
        raise ParameterError("r must be positive")
    if clip < 0.5:
        raise ParameterError("clip box must contain the hull [-1/2, 1/2]")
    lam, k, m = params.lam, params.generation, params.m
    end = clip - 0.5
    if m == 1:
        return float(_union_len_1d(r, lam, k, end))
    if m != 2:
        raise NotImplementedError("neighborhood_volume supports m <= 2")
    total = (2.0 * lam) ** k
    gaps = [(2 ** lev, lam ** lev * (1.0 - 2.0 * lam)) for lev in range(k)]
    gaps_and_end = gaps + [(1, 2.0 * end)]

    def section_integral(U):
        # integral over u in [0, U] of the 1-D section length at radius sqrt(r^2-u^2)
        U = min(U, r)
        return total * U + math.fsum(n * _int_min_chord(g, r, U) for n, g in gaps_and_end)

    parts = [total * float(_union_len_1d(r, lam, k, end))]
    for n, g in gaps:
        parts.append(n * 2.0 * section_integral(0.5 * g))
    parts.append(2.0 * section_integral(end))
    return math.fsum(parts)


def measure_integrate(f, measure, cap=MAX_INTERVALS):
    """Midpoint rule ``sum_boxes 2^(-m k) f(midpoint)``.

    ``f`` receives an ``(N,)`` array for m = 1 and ``(N, m)`` otherwise.
    """
    pts = measure.midpoints(cap)
    arg = pts[:, 0] if measure.params.m == 1 else pts
    vals = np.asarray(f(arg), dtype=float)
    if vals.shape == ():
        vals = np.full(pts.shape[0], float(vals))
    return math.fsum(vals * measure.box_mass)


def loglog_slope(r, values):
    """Least-squares slope of log(values) against log(r)."""
    lr = np.log(np.asarray(r, dtype=float))
    lv = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(lr, lv, 1)[0])


def ball_mass_slope(center, measure, radii=None):
    """Log-log slope of ``r -> measure_ball(center, r)`` over dyadic radii."""
    p = measure.params
    if radii is None:
        lo = p.lam ** p.generation
        radii = 2.0 ** np.arange(math.ceil(math.log2(lo)) + 1, 0)
    masses = [measure_ball(center, float(r), measure) for r in radii]
    return loglog_slope(radii, masses)


def neighborhood_slope(params, radii=None):
    """Log-log slope of ``r -> neighborhood_volume(r)`` over ``r = lam^j``."""
    if radii is None:
        radii = params.lam ** np.arange(1, params.generation + 1)
    vols = [neighborhood_volume(float(r), params) for r in radii]
    return loglog_slope(radii, vols)
