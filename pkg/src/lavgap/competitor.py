"""Competitor fields, boundary data, transition weights and mollification.

Subcritical competitor: ``u_C = 1/2 sgn(x_d) rho(x)`` around ``C^{d-1} x {0}``.
Supercritical competitor: the axial Cantor measure convolved with the saddle
``w(xbar, h) = 1/2 sgn(h) psi(|xbar|/|h|)`` (transition on ratios [1/2, 2]).
Each weight vanishes wherever its competitor has a nonzero increment, so
``a(x, y) |u_C(x) - u_C(y)| = 0`` holds exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ParameterError
from .fields import Field
from .geometry import (CHI_1D, DIAMOND, ETA_1D, RHO, CutoffSpec, as_points, axis_distance,
                       box_cutoff, box_cutoff_grad, eval_rho, eval_rho_pm, grad_rho,
                       sub_distance)

SADDLE_LUMP = 1.0 / 32.0


class SubCompetitor(Field):
    """``u_C(x) = 1/2 sgn(x_d) rho(x)``; raises on the apex set."""

    has_gradient = True
    regime = "sub"

    def __init__(self, geom):
        if geom.regime != "sub":
            raise ParameterError("subcritical competitor needs the subcritical geometry")
        super().__init__(geom.d)
        self.geom = geom

    def _eval(self, pts):
        return 0.5 * np.sign(pts[:, -1]) * eval_rho(pts, self.geom)

    def _grad(self, pts):
        return 0.5 * np.sign(pts[:, -1])[:, None] * grad_rho(pts, self.geom)


class SuperCompetitor(Field):
    """Axial Cantor measure convolved with the single-saddle profile.

    Parameters
    ----------
    geom : BarrierGeometry
        Supercritical geometry; its generation sets the atom count 2^k.
    lump : float
        Subtrees shorter than ``lump * |xbar|`` are collapsed onto their
        barycentre; 0 evaluates the plain atomic sum.
    """

    regime = "super"

    def __init__(self, geom, lump=SADDLE_LUMP):
        if geom.regime != "super":
            raise ParameterError("supercritical competitor needs the supercritical geometry")
        super().__init__(geom.d)
        self.geom = geom
        self.lump = float(lump)
        self.fd_step = 1e-6

    def _eval(self, pts):
        rad = np.sqrt(np.sum(pts[:, :-1] ** 2, axis=1))
        f = self.geom.fractal
        return kernels.saddle_sum(rad, pts[:, -1], f.lam, f.generation, self.lump)


def saddle(xbar_norm, h):
    """Single-saddle profile ``1/2 sgn(h) psi((|xbar|/|h| - 1/2)/(3/2))``."""
    h = np.asarray(h, dtype=float)
    return kernels._saddle_np(np.asarray(xbar_norm, dtype=float), h)


def make_competitor(geom, **kw):
    return SubCompetitor(geom) if geom.regime == "sub" else SuperCompetitor(geom, **kw)


class BoundaryDatum(Field):
    """``u_D = eta u_C`` with the separable boundary cutoff ``eta``."""

    def __init__(self, competitor):
        super().__init__(competitor.d, support=(-5.0 / 6.0, 5.0 / 6.0))
        self.competitor = competitor
        self.has_gradient = competitor.has_gradient

    def _eval(self, pts):
        eta = box_cutoff(pts, ETA_1D)
        vals = np.zeros(pts.shape[0])
        live = eta > 0
        if live.any():
            vals[live] = eta[live] * self.competitor(pts[live])
        return vals

    def _grad(self, pts):
        return (box_cutoff_grad(pts, ETA_1D) * self.competitor(pts)[:, None]
                + box_cutoff(pts, ETA_1D)[:, None] * self.competitor.gradient(pts))


class RegularizedCompetitor(Field):
    """Lipschitz approximant of ``u_C`` at scale ``eps``.

    Subcritical: ``1/2 (x_d / h) rho(dis / h)`` with ``h = sqrt(x_d^2 + eps^2)``.
    Supercritical: the saddle sum evaluated at ``sqrt(|xbar|^2 + eps^2)``.
    Both are continuous, odd in the signed variable, have gradients of order
    ``1/eps`` and agree with ``u_C`` up to ``O(eps)`` away from the set.
    """

    def __init__(self, competitor, eps):
        if not eps > 0:
            raise ParameterError("regularisation scale must be positive")
        super().__init__(competitor.d)
        self.competitor = competitor
        self.geom = competitor.geom
        self.eps = float(eps)
        self.fd_step = self.eps * 1e-3

    def _eval(self, pts):
        if self.geom.regime == "sub":
            h = np.sqrt(pts[:, -1] ** 2 + self.eps ** 2)
            ratio = sub_distance(pts, self.geom) / h
            return 0.5 * (pts[:, -1] / h) * RHO(ratio)
        rad = np.sqrt(np.sum(pts[:, :-1] ** 2, axis=1) + self.eps ** 2)
        f = self.geom.fractal
        return kernels.saddle_sum(rad, pts[:, -1], f.lam, f.generation, self.competitor.lump)


def eval_u_D(x, competitor):
    return BoundaryDatum(competitor)(x)


# ---------------------------------------------------------------------------
# weights


class WeightField:
    """Symmetric bivariate weight ``a(y, z) >= 0``."""

    bivariate = True

    def __call__(self, y, z):
        ys, single = as_points(y, self.d)
        zs, _ = as_points(z, self.d)
        vals = self._eval(ys, zs)
        return float(vals[0]) if single else vals

    def _eval(self, ys, zs):
        raise NotImplementedError


class ConstantWeight(WeightField):
    def __init__(self, d, value=1.0):
        self.d = d
        self.value = float(value)

    def _eval(self, ys, zs):
        return np.full(max(ys.shape[0], zs.shape[0]), self.value)


class ScaledWeight(WeightField):
    """``nu * a``."""

    def __init__(self, weight, nu):
        self.weight = weight
        self.d = weight.d
        self.nu = float(nu)
        self.bivariate = weight.bivariate

    def _eval(self, ys, zs):
        return self.nu * self.weight._eval(ys, zs)


class SubWeight(WeightField):
    """``(rho+ rho+ + rho- rho-)(|y_d|^a + |z_d|^a) chi(y) chi(z)``.

    ``chi`` localises to (-0.65, 0.65)^d, inside the region where the
    boundary cutoff equals 1; ``localize=False`` drops it.
    """

    def __init__(self, geom, alpha, localize=True):
        if alpha < 0:
            raise ParameterError("alpha must be non-negative")
        self.geom = geom
        self.d = geom.d
        self.alpha = float(alpha)
        self.localize = localize

    def factor(self, pts):
        """Per-point pieces ``(rho+, rho-, |x_d|^alpha, chi)``."""
        chi = box_cutoff(pts, CHI_1D) if self.localize else np.ones(pts.shape[0])
        return (eval_rho_pm(pts, self.geom, 1), eval_rho_pm(pts, self.geom, -1),
                np.abs(pts[:, -1]) ** self.alpha, chi)

    def _eval(self, ys, zs):
        py, my, hy, cy = self.factor(ys)
        pz, mz, hz, cz = self.factor(zs)
        return (py * pz + my * mz) * (hy + hz) * cy * cz


def gap_id(xd, lam, k, max_level):
    """Integer id of the gap of ``C_lam`` containing each ``x_d``.

    Levels ``0..max_level`` (capped at ``k - 1``) are resolved; the two outer
    intervals (1/2, 1] and [-1, -1/2) get ids 1 and 2; everything else -1.
    """
    xd = np.asarray(xd, dtype=float)
    ids = np.full(xd.shape, -1, dtype=np.int64)
    ids[(xd > 0.5) & (xd <= 1.0)] = 1
    ids[(xd < -0.5) & (xd >= -1.0)] = 2
    active = np.abs(xd) < 0.5
    a = np.full(xd.shape, -0.5)
    pos = np.zeros(xd.shape, dtype=np.int64)
    length = 1.0
    for lev in range(min(k, max_level + 1)):
        child = lam * length
        lo_gap = a + child
        hi_gap = a + length - child
        in_gap = active & (xd > lo_gap) & (xd < hi_gap)
        # ids 2^(l+2) + pos are unique across levels and avoid 1, 2
        ids[in_gap] = 2 ** (lev + 2) + pos[in_gap]
        active &= ~in_gap
        right = xd >= hi_gap
        a = np.where(right, hi_gap, a)
        pos = 2 * pos + right.astype(np.int64)
        length = child
    return ids


class SuperWeight(WeightField):
    """``sum_j (|xbar|^a + |ybar|^a) rho_j(x) rho_j(y)`` over necklace gaps.

    ``rho_j(x) = 1_{gap j}(x_d) psi`` of ``|xbar| / dis(x_d, C)`` with
    transition on [1/4, 1/2]: 1 on the whole diamond, 0 before the saddle
    profile starts to vary. Gaps deeper than ``max_level`` carry no weight.
    With ``localize`` the outer gaps are cut off before the boundary datum
    starts to differ from ``u_C``.
    """

    def __init__(self, geom, alpha, max_level=8, cutoff=DIAMOND, localize=True):
        if alpha < 0:
            raise ParameterError("alpha must be non-negative")
        self.geom = geom
        self.d = geom.d
        self.alpha = float(alpha)
        self.max_level = int(max_level)
        self.cutoff = cutoff
        self.localize = bool(localize)

    def factor(self, pts):
        f = self.geom.fractal
        xd = pts[:, -1]
        rad = np.sqrt(np.sum(pts[:, :-1] ** 2, axis=1))
        ids = gap_id(xd, f.lam, f.generation, self.max_level)
        dist = axis_distance(xd, self.geom)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, rad / np.where(dist > 0, dist, 1.0), np.inf)
        rho = np.where(ids >= 0, self.cutoff(ratio), 0.0)
        if self.localize:
            rho = rho * box_cutoff(pts, CHI_1D)
        return ids, rho, rad ** self.alpha

    def _eval(self, ys, zs):
        iy, ry, hy = self.factor(ys)
        iz, rz, hz = self.factor(zs)
        same = (iy == iz) & (iy >= 0)
        return np.where(same, (hy + hz) * ry * rz, 0.0)


class LocalWeight:
    """Univariate weight ``a(x)`` for a local second phase."""

    bivariate = False

    def __call__(self, x):
        pts, single = as_points(x, self.d)
        vals = self._eval(pts)
        return float(vals[0]) if single else vals


class ConstantLocalWeight(LocalWeight):
    def __init__(self, d, value=1.0):
        self.d = d
        self.value = float(value)

    def _eval(self, pts):
        return np.full(pts.shape[0], self.value)


SHELL_IN = CutoffSpec(0.5, 1.0)
SHELL_OUT = CutoffSpec(5.0, 6.0)


class ModelIIWeight(LocalWeight):
    """``a(x) = |x_d|^alpha (1 - chi_shell(x)) chi(x)``.

    ``chi_shell`` is 1 for ``dis/|x_d|`` in [1, 5] and 0 below 1/2 or above 6,
    so ``a`` vanishes on a neighbourhood of the competitor's transition shell
    [2, 4] and equals ``|x_d|^alpha`` on the cone ``dis <= |x_d|/2`` inside
    the localisation box.
    """

    def __init__(self, geom, alpha, localize=True):
        if geom.regime != "sub":
            raise ParameterError("the local weight is built for the subcritical geometry")
        self.geom = geom
        self.d = geom.d
        self.alpha = float(alpha)
        self.localize = localize

    def _eval(self, pts):
        dist = sub_distance(pts, self.geom)
        ax = np.abs(pts[:, -1])
        with np.errstate(divide="ignore"):
            ratio = np.where(ax > 0, dist / np.where(ax > 0, ax, 1.0), np.inf)
        shell = (1.0 - SHELL_IN(ratio)) * SHELL_OUT(ratio)
        chi = box_cutoff(pts, CHI_1D) if self.localize else 1.0
        return ax ** self.alpha * (1.0 - shell) * chi


def eval_weight_sub(y, z, geom, alpha, localize=False):
    """The subcritical weight formula; ``localize=False`` gives the bare display."""
    return SubWeight(geom, alpha, localize)(y, z)


def eval_weight_super(x, y, geom, alpha, max_level=8):
    return SuperWeight(geom, alpha, max_level)(x, y)


def make_weight(geom, alpha, **kw):
    return SubWeight(geom, alpha, **kw) if geom.regime == "sub" else SuperWeight(geom, alpha, **kw)


# ---------------------------------------------------------------------------
# mollification


@dataclass(frozen=True)
class MollifierSpec:
    """Polynomial bump ``(1 - |z/eps|^2)^2`` on a grid of spacing ``eps/8``.

    Nodes sit at cell centres ``(i + 1/2) eps/8``: the grid is symmetric but
    never contains the origin, so a mollified field is never sampled on the
    hyperplane through the evaluation point.
    """

    eps: float
    subdivisions: int = 8

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError("mollifier radius must be positive")
        if self.subdivisions < 1:
            raise ParameterError("subdivisions must be positive")

    def nodes(self, d):
        n = self.subdivisions
        ticks = (np.arange(-n, n) + 0.5) * (self.eps / n)
        grids = np.meshgrid(*([ticks] * d), indexing="ij")
        z = np.stack([g.ravel() for g in grids], axis=1)
        u2 = np.sum(z * z, axis=1) / self.eps ** 2
        keep = u2 < 1.0
        z = z[keep]
        w = (1.0 - u2[keep]) ** 2
        total = math.fsum(w)
        return z, w / total


class Mollified(Field):
    """``v_eps(x) = sum_n w_n v(x - z_n)``, a discrete unit-mass convolution."""

    def __init__(self, field, spec, chunk=1 << 18):
        support = None
        if field.support is not None:
            lo, hi = field.support
            support = (lo - spec.eps, hi + spec.eps)
        super().__init__(field.d, support)
        self.field = field
        self.spec = spec
        self.z, self.w = spec.nodes(field.d)
        self.chunk = chunk
        self.fd_step = spec.eps * 1e-3

    def _eval(self, pts):
        out = np.zeros(pts.shape[0])
        rows = max(1, self.chunk // self.z.shape[0])
        for start in range(0, pts.shape[0], rows):
            blk = pts[start:start + rows]
            shifted = (blk[:, None, :] - self.z[None, :, :]).reshape(-1, self.d)
            vals = self.field(shifted).reshape(blk.shape[0], -1)
            out[start:start + rows] = vals @ self.w
        return out


def mollify(field, spec):
    return Mollified(field, spec)


# ---------------------------------------------------------------------------
# increment bounds


def increment_bound_sub(y, z, geom):
    """Indicator structure of the nonlocal increment bound (constant-free).

    Far pairs ``|y-z| >= (|y_d|+|z_d|)/4`` get ``1_{M_4}(y) + 1_{M_4}(z)``;
    near pairs get ``1_{M_8}(y) 1_{M_8}(z) |y-z| / (|y_d|+|z_d|)``.
    """
    ys, _ = as_points(y, geom.d)
    zs, _ = as_points(z, geom.d)
    sep = np.sqrt(np.sum((ys - zs) ** 2, axis=1))
    hsum = np.abs(ys[:, -1]) + np.abs(zs[:, -1])
    dy = sub_distance(ys, geom)
    dz = sub_distance(zs, geom)
    m4 = (dy <= 4 * np.abs(ys[:, -1])).astype(float) + (dz <= 4 * np.abs(zs[:, -1]))
    m8 = (dy <= 8 * np.abs(ys[:, -1])) & (dz <= 8 * np.abs(zs[:, -1]))
    with np.errstate(divide="ignore", invalid="ignore"):
        near = np.where(m8, sep / hsum, 0.0)
    return np.where(sep >= 0.25 * hsum, m4, near)


def increment_bound_super(y, z, dim):
    """``min{1, |y-z|^D / D, |y-z| / max(|ybar|, |zbar|)^(1-D)}``."""
    ys, _ = as_points(y)
    zs, _ = as_points(z)
    sep = np.sqrt(np.sum((ys - zs) ** 2, axis=1))
    rad = np.maximum(np.sqrt(np.sum(ys[:, :-1] ** 2, axis=1)),
                     np.sqrt(np.sum(zs[:, :-1] ** 2, axis=1)))
    with np.errstate(divide="ignore"):
        third = np.where(rad > 0, sep / np.where(rad > 0, rad, 1.0) ** (1.0 - dim), np.inf)
    return np.minimum(np.minimum(1.0, sep ** dim / dim), third)


__all__ = [
    "SubCompetitor", "SuperCompetitor", "BoundaryDatum", "SubWeight", "SuperWeight",
    "ModelIIWeight", "ConstantWeight", "ScaledWeight", "ConstantLocalWeight", "MollifierSpec",
    "Mollified", "mollify", "RegularizedCompetitor", "make_competitor", "make_weight",
    "eval_u_D", "eval_weight_sub", "eval_weight_super", "increment_bound_sub", "increment_bound_super", "gap_id", "saddle",
    "RHO",
]
