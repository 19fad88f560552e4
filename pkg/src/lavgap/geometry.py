"""Barrier sets, cones, the Cantor necklace and smooth cutoffs.

Subcritical geometry puts the Cantor set ``C^{d-1}`` in the hyperplane
``x_d = 0``; supercritical geometry puts ``C`` on the ``x_d`` axis and the
necklace diamonds ``{|xbar| <= dis(x_d, C)/4}`` bridge its gaps. Points are
arrays with trailing axis ``d``; every function accepts one point or a stack.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError, SingularInputError
from .fractal import FractalParams, gap_intervals


def as_points(x, d=None):
    """Return ``(pts, single)`` with ``pts`` of shape ``(N, d)``."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if d is not None and pts.shape[1] != d:
        raise ParameterError(f"expected points in R^{d}, got shape {arr.shape}")
    return pts, single


def _out(vals, single):
    return float(vals[0]) if single else vals


# ---------------------------------------------------------------------------
# cutoff profile


def psi(u):
    """Cubic smoothstep descending from 1 (u <= 0) to 0 (u >= 1)."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return 1.0 - u * u * (3.0 - 2.0 * u)


def dpsi(u):
    """Derivative of :func:`psi`; zero outside (0, 1)."""
    u = np.asarray(u, dtype=float)
    inner = (u > 0.0) & (u < 1.0)
    return np.where(inner, -6.0 * u * (1.0 - u), 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    """Monotone cutoff equal to 1 below ``r0`` and 0 above ``r1``."""

    r0: float
    r1: float

    def __post_init__(self):
        if not self.r1 > self.r0:
            raise ParameterError("cutoff needs r1 > r0")

    def __call__(self, t):
        return psi((np.asarray(t, dtype=float) - self.r0) / (self.r1 - self.r0))

    def derivative(self, t):
        w = self.r1 - self.r0
        return dpsi((np.asarray(t, dtype=float) - self.r0) / w) / w


RHO = CutoffSpec(2.0, 4.0)
RHO_PM = CutoffSpec(0.5, 2.0)
ETA_1D = CutoffSpec(4.0 / 6.0, 5.0 / 6.0)
# localisation of the subcritical weight inside {eta = 1}
CHI_1D = CutoffSpec(0.55, 0.65)
# supercritical diamond weight: 1 on the diamond, 0 at twice its width
DIAMOND = CutoffSpec(0.25, 0.5)


def box_cutoff(x, spec):
    """Separable product ``prod_i spec(|x_i|)``."""
    pts, single = as_points(x)
    vals = np.prod(spec(np.abs(pts)), axis=1)
    return _out(vals, single)


def box_cutoff_grad(x, spec):
    pts, single = as_points(x)
    f = spec(np.abs(pts))
    df = spec.derivative(np.abs(pts)) * np.sign(pts)
    grad = np.empty_like(pts)
    for i in range(pts.shape[1]):
        others = np.prod(np.delete(f, i, axis=1), axis=1)
        grad[:, i] = df[:, i] * others
    return grad[0] if single else grad


def eval_eta(x):
    """Boundary cutoff: 1 on (-4/6, 4/6)^d, 0 outside (-5/6, 5/6)^d."""
    return box_cutoff(x, ETA_1D)


# ---------------------------------------------------------------------------
# barrier geometry


@dataclass(frozen=True)
class BarrierGeometry:
    """Barrier sets ``M_tau^{+-}`` around a Cantor set.

    Parameters
    ----------
    fractal : FractalParams
        ``m = d - 1`` for the subcritical geometry, ``m = 1`` for the
        supercritical one.
    tau : float
        Opening of the barrier.
    d : int
        Ambient dimension, at least 2.
    regime : {"sub", "super"}
    """

    fractal: FractalParams
    tau: float = 4.0
    d: int = 2
    regime: str = "sub"

    def __post_init__(self):
        if self.d < 2:
            raise ParameterError("ambient dimension must be at least 2")
        if self.tau <= 0:
            raise ParameterError("tau must be positive")
        if self.regime not in ("sub", "super"):
            raise ParameterError(f"unknown regime {self.regime!r}")
        want = self.d - 1 if self.regime == "sub" else 1
        if self.fractal.m != want:
            raise ParameterError(f"{self.regime} geometry needs m = {want}, got {self.fractal.m}")

    @property
    def dimension(self):
        return self.fractal.dimension

    def with_tau(self, tau):
        return BarrierGeometry(self.fractal, tau, self.d, self.regime)


def sub_distance(pts, geom, with_grad=False):
    """``dis(xbar, C^{d-1})`` and optionally its a.e. gradient in ``xbar``."""
    f = geom.fractal
    xb = pts[:, :-1]
    dist, slope = kernels.cantor_distance(xb.ravel(), f.lam, f.generation)
    dist = dist.reshape(xb.shape)
    total = np.sqrt(np.sum(dist * dist, axis=1))
    if not with_grad:
        return total
    slope = slope.reshape(xb.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(total[:, None] > 0, dist * slope / total[:, None], 0.0)
    return total, g


def axis_distance(xd, geom, with_grad=False):
    """``dis(x_d, C)`` for the supercritical geometry."""
    f = geom.fractal
    dist, slope = kernels.cantor_distance(np.asarray(xd, dtype=float).ravel(), f.lam, f.generation)
    return (dist, slope) if with_grad else dist


def in_omega(pts, scale=1.0):
    return np.all(np.abs(pts) < scale, axis=1)


def in_barrier(x, geom):
    """Membership in ``M_tau^+`` (+1), ``M_tau^-`` (-1) or neither (0).

    For the supercritical geometry the barrier is the complement of the
    necklace inside Omega, and membership is reported as +1 / 0.
    """
    pts, single = as_points(x, geom.d)
    inside = in_omega(pts)
    if geom.regime == "sub":
        dist = sub_distance(pts, geom)
        xd = pts[:, -1]
        hit = dist <= geom.tau * np.abs(xd)
        flag = np.where(hit & inside & (xd > 0), 1, np.where(hit & inside & (xd < 0), -1, 0))
    else:
        flag = np.where(inside & (necklace_index(pts, geom)[0] == NOT_IN_NECKLACE), 1, 0)
    return int(flag[0]) if single else flag


def _ratio(pts, geom):
    dist = sub_distance(pts, geom)
    xd = np.abs(pts[:, -1])
    if np.any((xd == 0) & (dist == 0)):
        raise SingularInputError("cutoff evaluated on the apex set C x {0}")
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(xd > 0, dist / np.where(xd > 0, xd, 1.0), np.inf)


def eval_rho(x, geom, cutoff=RHO):
    """``psi`` of ``dis(xbar, C)/|x_d|``: 1 where the ratio is <= 2, 0 where >= 4."""
    pts, single = as_points(x, geom.d)
    return _out(cutoff(_ratio(pts, geom)), single)


def grad_rho(x, geom, cutoff=RHO):
    """A.e. gradient of :func:`eval_rho` by the chain rule."""
    pts, single = as_points(x, geom.d)
    dist, gbar = sub_distance(pts, geom, with_grad=True)
    xd = pts[:, -1]
    if np.any((xd == 0) & (dist == 0)):
        raise SingularInputError("gradient requested on the apex set")
    ax = np.abs(xd)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ax > 0, dist / np.where(ax > 0, ax, 1.0), np.inf)
        dr = np.where(np.isfinite(ratio), cutoff.derivative(ratio), 0.0)
        grad = np.empty_like(pts)
        grad[:, :-1] = (dr / np.where(ax > 0, ax, 1.0))[:, None] * gbar
        grad[:, -1] = -dr * ratio * np.sign(xd) / np.where(ax > 0, ax, 1.0)
    grad[~np.isfinite(grad)] = 0.0
    return grad[0] if single else grad


def eval_rho_pm(x, geom, sign, cutoff=RHO_PM):
    """One-sided cutoff ``rho^+`` (sign=+1) or ``rho^-`` (sign=-1)."""
    if sign not in (1, -1):
        raise ParameterError("sign must be +1 or -1")
    pts, single = as_points(x, geom.d)
    xd = pts[:, -1]
    side = sign * xd > 0
    vals = np.zeros(pts.shape[0])
    if np.any(side):
        vals[side] = cutoff(_ratio(pts[side], geom))
    return _out(vals, single)


# ---------------------------------------------------------------------------
# Cantor necklace (supercritical)

NOT_IN_NECKLACE = -2


@dataclass(frozen=True)
class NecklaceElement:
    """Diamond bridging the gap ``(a, b)`` of the axial Cantor set.

    ``level = -1`` marks the two half-diamonds between the hull and the
    boundary of Omega.
    """

    level: int
    index: int
    a: float
    b: float
    d: int = 2

    @property
    def vertex_upper(self):
        v = np.zeros(self.d)
        v[-1] = self.b
        return v

    @property
    def vertex_lower(self):
        v = np.zeros(self.d)
        v[-1] = self.a
        return v

    @property
    def half(self):
        return self.level == -1

    def width(self, xd):
        """Admissible ``|xbar|`` at height ``xd``: a quarter of the distance to the Cantor set."""
        xd = np.asarray(xd, dtype=float)
        if self.half:
            # the Cantor side is the one at +-1/2
            edge = self.a if self.a > 0 else self.b
            w = 0.25 * np.abs(xd - edge)
        else:
            w = 0.25 * np.minimum(xd - self.a, self.b - xd)
        inside = (xd > self.a) & (xd < self.b)
        return np.where(inside, np.maximum(w, 0.0), -1.0)

    def contains(self, x):
        pts, single = as_points(x, self.d)
        rad = np.sqrt(np.sum(pts[:, :-1] ** 2, axis=1))
        hit = rad <= self.width(pts[:, -1])
        return bool(hit[0]) if single else hit


def necklace_enumerate(geom, max_level, include_outer=True):
    """Necklace elements of levels ``-1`` (optional), ``0..max_level``.

    Level ``l`` holds the 2^l gaps removed from the generation-``l``
    intervals; ``index`` runs from 1 at the top (largest ``x_d``) downwards.
    """
    if geom.regime != "super":
        raise ParameterError("the necklace belongs to the supercritical geometry")
    if max_level < 0:
        raise ParameterError("max_level must be non-negative")
    levels, lo, hi = gap_intervals(geom.fractal.lam, max_level + 1)
    out = []
    if include_outer:
        out.append(NecklaceElement(-1, 1, 0.5, 1.0, geom.d))
        out.append(NecklaceElement(-1, 2, -1.0, -0.5, geom.d))
    for lev in range(max_level + 1):
        sel = np.nonzero(levels == lev)[0][::-1]
        for j, i in enumerate(sel, start=1):
            out.append(NecklaceElement(lev, j, float(lo[i]), float(hi[i]), geom.d))
    return out


def necklace_index(x, geom):
    """``(level, index)`` of the diamond containing each point.

    Points outside every diamond get level ``NOT_IN_NECKLACE``. Gaps deeper
    than the stored generation are not resolved (their diamonds have width
    below ``lam^k``).
    """
    pts, _ = as_points(x, geom.d)
    lam, k = geom.fractal.lam, geom.fractal.generation
    xd = pts[:, -1]
    rad = np.sqrt(np.sum(pts[:, :-1] ** 2, axis=1))
    level = np.full(xd.shape, NOT_IN_NECKLACE)
    index = np.zeros(xd.shape, dtype=int)
    top = (xd > 0.5) & (xd <= 1.0) & (rad <= 0.25 * (xd - 0.5))
    bot = (xd < -0.5) & (xd >= -1.0) & (rad <= 0.25 * (-0.5 - xd))
    level[top | bot] = -1
    index[top] = 1
    index[bot] = 2
    # descend the tree; position counts intervals from the left at each level
    active = (np.abs(xd) < 0.5) & ~(top | bot)
    a = np.full(xd.shape, -0.5)
    pos = np.zeros(xd.shape, dtype=np.int64)
    length = 1.0
    for lev in range(k):
        child = lam * length
        lo_gap = a + child
        hi_gap = a + length - child
        in_gap = active & (xd > lo_gap) & (xd < hi_gap)
        hit = in_gap & (rad <= 0.25 * np.minimum(xd - lo_gap, hi_gap - xd))
        level[hit] = lev
        index[hit] = 2 ** lev - pos[hit]
        active &= ~in_gap
        right = xd >= hi_gap
        a = np.where(right, hi_gap, a)
        pos = 2 * pos + right.astype(np.int64)
        length = child
    return level, index


# ---------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class ConeSpec:
    """Cone ``{|ybar| <= ratio |y_d|, 0 < +-y_d <= extent}`` at ``apex``."""

    apex: tuple = None
    ratio: float = 0.25
    extent: float = 2.0
    orientation: str = "up"

    def __post_init__(self):
        if self.orientation not in ("up", "down", "both"):
            raise ParameterError(f"unknown orientation {self.orientation!r}")
        if self.ratio <= 0 or self.extent <= 0:
            raise ParameterError("cone ratio and extent must be positive")


def in_cone(x, y, spec):
    """Whether ``y - x`` lies in the cone; the apex itself is excluded."""
    xs = np.atleast_2d(np.asarray(x, dtype=float))
    ys, single = as_points(y)
    z = ys - xs
    zd = z[:, -1]
    rad = np.sqrt(np.sum(z[:, :-1] ** 2, axis=1))
    up = (zd > 0) & (zd <= spec.extent) & (rad <= spec.ratio * zd)
    down = (zd < 0) & (zd > -spec.extent) & (rad <= -spec.ratio * zd)
    hit = {"up": up, "down": down, "both": up | down}[spec.orientation]
    return bool(hit[0]) if single else hit


def cone_slab(j, ratio=0.25):
    """Height range ``[2^-j, 2^(1-j)]`` of the slab ``K_j``."""
    return 2.0 ** (-j), 2.0 ** (1 - j)


def cone_slab_volume(j, d, ratio=0.25):
    """Lebesgue measure of ``K_j`` in ``R^d``."""
    lo, hi = cone_slab(j, ratio)
    ball = math.pi ** ((d - 1) / 2) / math.gamma((d + 1) / 2)
    return ball * ratio ** (d - 1) * (hi ** d - lo ** d) / d


def sub_geometry(lam, d=2, generation=12, tau=4.0):
    return BarrierGeometry(FractalParams(lam, d - 1, generation), tau, d, "sub")


def super_geometry(lam, d=2, generation=12, tau=4.0):
    return BarrierGeometry(FractalParams(lam, 1, generation), tau, d, "super")
