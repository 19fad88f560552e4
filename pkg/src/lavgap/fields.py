"""Pointwise scalar fields on R^d.

A field evaluates on a stack of points ``(N, d)`` (or one point) and returns
zero outside its declared support box. Fields that know their a.e. gradient
expose ``gradient``; the others fall back to central differences.
"""

import numpy as np

from .errors import ParameterError
from .geometry import as_points


class Field:
    """Base class; subclasses implement ``_eval`` (and optionally ``_grad``).

    Parameters
    ----------
    d : int
        Ambient dimension.
    support : tuple of float, optional
        ``(lo, hi)``; the field vanishes outside ``[lo, hi]^d``.
    """

    has_gradient = False
    fd_step = 1e-7

    def __init__(self, d, support=None):
        self.d = int(d)
        self.support = support

    def _mask(self, pts):
        if self.support is None:
            return None
        lo, hi = self.support
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def __call__(self, x):
        pts, single = as_points(x, self.d)
        mask = self._mask(pts)
        if mask is None:
            vals = np.asarray(self._eval(pts), dtype=float)
        else:
            vals = np.zeros(pts.shape[0])
            if mask.any():
                vals[mask] = self._eval(pts[mask])
        return float(vals[0]) if single else vals

    def gradient(self, x):
        pts, single = as_points(x, self.d)
        if self.has_gradient:
            g = np.asarray(self._grad(pts), dtype=float)
            mask = self._mask(pts)
            if mask is not None:
                g = np.where(mask[:, None], g, 0.0)
        else:
            g = self.fd_gradient(pts)
        return g[0] if single else g

    def fd_gradient(self, pts, step=None):
        h = self.fd_step if step is None else step
        g = np.empty_like(pts)
        for i in range(self.d):
            e = np.zeros(self.d)
            e[i] = h
            g[:, i] = (self(pts + e) - self(pts - e)) / (2.0 * h)
        return g

    def _eval(self, pts):
        raise NotImplementedError


class FunctionField(Field):
    """Wrap vectorised callables ``f(pts)`` and optional ``grad(pts)``."""

    def __init__(self, d, f, grad=None, support=None):
        super().__init__(d, support)
        self._f = f
        self._g = grad
        self.has_gradient = grad is not None

    def _eval(self, pts):
        return self._f(pts)

    def _grad(self, pts):
        return self._g(pts)


class ConstantField(Field):
    has_gradient = True

    def __init__(self, d, value, support=None):
        super().__init__(d, support)
        self.value = float(value)

    def _eval(self, pts):
        return np.full(pts.shape[0], self.value)

    def _grad(self, pts):
        return np.zeros_like(pts)


class LinearField(Field):
    """``v(x) = c . x + b``."""

    has_gradient = True

    def __init__(self, coef, offset=0.0, support=None):
        coef = np.asarray(coef, dtype=float)
        super().__init__(coef.size, support)
        self.coef = coef
        self.offset = float(offset)

    def _eval(self, pts):
        return pts @ self.coef + self.offset

    def _grad(self, pts):
        return np.broadcast_to(self.coef, pts.shape).copy()


class ScaledField(Field):
    """``c * v``."""

    def __init__(self, field, factor):
        super().__init__(field.d, field.support)
        self.field = field
        self.factor = float(factor)
        self.has_gradient = field.has_gradient

    def _eval(self, pts):
        return self.factor * self.field(pts)

    def _grad(self, pts):
        return self.factor * self.field.gradient(pts)


class ProductField(Field):
    """Pointwise product of two fields (product rule for the gradient)."""

    def __init__(self, left, right):
        if left.d != right.d:
            raise ParameterError("dimension mismatch")
        support = left.support if left.support is not None else right.support
        super().__init__(left.d, support)
        self.left, self.right = left, right
        self.has_gradient = left.has_gradient and right.has_gradient

    def _eval(self, pts):
        return self.left(pts) * self.right(pts)

    def _grad(self, pts):
        return (self.left.gradient(pts) * self.right(pts)[:, None]
                + self.left(pts)[:, None] * self.right.gradient(pts))


class OddPart(Field):
    """``(v(xbar, x_d) - v(xbar, -x_d)) / 2``, the symmetrisation in ``x_d``."""

    def __init__(self, field):
        super().__init__(field.d, field.support)
        self.field = field
        self.has_gradient = field.has_gradient

    def _flip(self, pts):
        q = pts.copy()
        q[:, -1] = -q[:, -1]
        return q

    def _eval(self, pts):
        return 0.5 * (self.field(pts) - self.field(self._flip(pts)))

    def _grad(self, pts):
        g = self.field.gradient(self._flip(pts))
        g[:, -1] = -g[:, -1]
        return 0.5 * (self.field.gradient(pts) - g)
