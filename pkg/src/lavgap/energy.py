"""Phase functionals, model assembly, Luxemburg norms and shell diagnostics.

Two quadrature modes share one result type:

* ``tensor``: cell-midpoint nodes on a uniform grid, all cell pairs summed
  once and doubled, the same-cell band excluded and reported as a one-sided
  error term. In d = 1 with ``sp < 1`` the cell-pair kernel is integrated
  exactly, so piecewise-constant fields on the grid are reproduced exactly.
* ``mc``: stratified importance sampling. ``y`` is stratified in geometric
  bands of the transverse height (distance to the hyperplane carrying the
  Cantor set, or to the axis carrying it), its anchor coordinates drawn from
  a mixture of the uniform law and a Cantor-concentrated law; ``z = y + r
  theta`` with ``r`` log-uniform, i.e. density proportional to
  ``|y - z|^(1-d)`` per unit radius.

Every result carries a shell spectrum: contributions per height band and per
dyadic separation ``|y - z|``. Divergent energies are not errors; they show as
a non-decaying spectrum, which ``shell_diagnostic`` classifies.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import DivergenceError, ParameterError, ResourceLimitError
from .fractal import CantorMeasure, FractalParams, cantor_cdf, neighborhood_volume

MODES = ("tensor", "mc")
DEFAULT_H = {1: 1.0 / 512.0, 2: 1.0 / 24.0, 3: 1.0 / 8.0}
REFINE_FACTOR = 4
MC_CHUNK = 1 << 15


def sphere_area(d):
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings shared by all phases.

    Parameters
    ----------
    mode : {"tensor", "mc"}
    h : float, optional
        Tensor-mode cell size; defaults per dimension (1/512 in d = 1).
    delta_diag : float, optional
        Tensor-mode exclusion radius, in ``(0, h]``; defaults to ``h``.
    half_width : float
        Nonlocal domain ``(-H, H)^d``; 3 is the tripled cube.
    local_half_width : float
        Local phases integrate over ``(-H_loc, H_loc)^d``; 1 is the cube.
    samples : int
        MC samples per height band.
    seed : int
    bands : int
        MC height bands; band 0 is ``[1/base, H]``, band ``j`` is
        ``[base^-(j+1), base^-j)``.
    base : float
        Ratio between consecutive height bands.
    crn : bool
        Reuse the same random stream in every band (common random numbers).
        Fluctuations then cancel in band-to-band ratios; either way adding
        bands never changes the earlier ones.
    anchor_uniform : float
        Mixture weight of the uniform anchor law.
    near_radius : float
        Cantor-concentrated anchors are spread over ``near_radius`` band heights.
    r_min_rel : float
        MC exclusion radius relative to the band's lower height.
    max_pairs : int
        Tensor-mode pair budget.
    refine : int
        Tensor-mode refinement levels applied on top of ``h``.
    domain : tuple, optional
        Tensor-mode interval ``(lo, hi)`` overriding both symmetric cubes,
        e.g. ``(0, 1)`` for closed-form checks on the unit cube.
    """

    mode: str = "tensor"
    h: float = None
    delta_diag: float = None
    half_width: float = 3.0
    local_half_width: float = 1.0
    samples: int = 20000
    seed: int = 0
    bands: int = 10
    base: float = 2.0
    crn: bool = True
    anchor_uniform: float = 0.3
    near_radius: float = 8.0
    r_min_rel: float = 2.0 ** -10
    max_pairs: int = 10 ** 7
    refine: int = 0
    domain: tuple = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown quadrature mode {self.mode!r}")
        if self.h is not None and not self.h > 0:
            raise ParameterError("h must be positive")
        if self.delta_diag is not None:
            if not self.delta_diag > 0 or (self.h is not None and self.delta_diag > self.h):
                raise ParameterError("delta_diag must lie in (0, h]")
        if self.samples < 1:
            raise ParameterError("sample budget must be at least 1")
        if self.refine < 0:
            raise ParameterError("refinement levels must be non-negative")
        if self.bands < 1:
            raise ParameterError("at least one height band is required")
        if not self.base > 1:
            raise ParameterError("band base must exceed 1")
        if not 0.0 <= self.anchor_uniform <= 1.0:
            raise ParameterError("anchor_uniform must lie in [0, 1]")
        if not self.half_width > 1.0 / self.base:
            raise ParameterError("domain must contain the first height band")
        if not 0 < self.r_min_rel < 1:
            raise ParameterError("r_min_rel must lie in (0, 1)")
        if self.domain is not None and not (len(self.domain) == 2
                                            and self.domain[0] < self.domain[1]):
            raise ParameterError("domain must be an interval (lo, hi) with lo < hi")

    def box(self, local=False):
        if self.domain is not None:
            return tuple(float(x) for x in self.domain)
        half = self.local_half_width if local else self.half_width
        return -half, half

    def cell(self, d):
        h = self.h if self.h is not None else DEFAULT_H.get(d, 1.0 / 6.0)
        return h / REFINE_FACTOR ** self.refine

    def refined(self, levels=1):
        """Tensor: ``h`` divided by 4 per level. MC: one more band per level."""
        if levels < 0:
            raise ParameterError("refinement levels must be non-negative")
        if self.mode == "tensor":
            return replace(self, refine=self.refine + levels)
        return replace(self, bands=self.bands + levels)


@dataclass(frozen=True)
class EnergyValue:
    """Value of one phase with its error budget and shell spectra.

    ``height`` and ``separation`` are tuples of ``(scale, contribution)``
    ordered from coarse to fine. ``value`` equals the sum of either spectrum.
    """

    value: float
    error: float
    height: tuple = ()
    separation: tuple = ()
    nodes: int = 0
    stderr: float = 0.0
    diag: float = 0.0
    tail: float = 0.0
    base: float = 2.0
    label: str = ""

    def spectrum(self, kind=None):
        if kind is None:
            kind = "height" if len(self.height) else "separation"
        if kind not in ("height", "separation"):
            raise ParameterError(f"unknown spectrum {kind!r}")
        return getattr(self, kind)

    def to_dict(self):
        return {
            "label": self.label,
            "value": self.value,
            "error": self.error,
            "stderr": self.stderr,
            "diag": self.diag,
            "tail": self.tail,
            "nodes": self.nodes,
            "base": self.base,
            "height": [list(s) for s in self.height],
            "separation": [list(s) for s in self.separation],
        }


def zero_energy(label=""):
    return EnergyValue(0.0, 0.0, label=label)


def _check_finite(vals, what="field"):
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise DivergenceError(f"non-finite {what} value at sample {bad}")


def _check_exponents(s, p):
    if not 0 < s < 1:
        raise ParameterError("fractional order must lie in (0, 1)")
    if not p > 1:
        raise ParameterError("exponent must exceed 1")


# ---------------------------------------------------------------------------
# tensor mode


def _grid(spec, d, box):
    lo, hi = box
    h0 = spec.cell(d)
    n = max(2, int(round((hi - lo) / h0)))
    h = (hi - lo) / n
    ticks = lo + (np.arange(n) + 0.5) * h
    grids = np.meshgrid(*([ticks] * d), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1), h


def _diag_bound(v, pts, p, order, h, d, wdiag=None):
    # (1/p) sum |grad v|^p h^d A_d (sqrt(d) h)^(p - sp) / (p - sp)
    sigma = order * p
    if not p > sigma:
        return math.inf
    g = np.asarray(v.gradient(pts))
    gn = np.sqrt(np.sum(g * g, axis=1)) ** p
    if wdiag is not None:
        gn = gn * wdiag
    per_cell = h ** d * sphere_area(d) * (math.sqrt(d) * h) ** (p - sigma) / (p - sigma)
    return math.fsum(gn) * per_cell / p


def _sep_spectrum(sums, bin_lo):
    return tuple((2.0 ** (bin_lo + b), float(c)) for b, c in enumerate(sums))[::-1]


def _cell_table(n, h, gamma, exact):
    off = np.arange(n, dtype=float)
    if exact:
        # Phi'' = t^-gamma; cell-pair integral = Phi((n+1)h) - 2 Phi(nh) + Phi((n-1)h)
        c = 1.0 / ((1.0 - gamma) * (2.0 - gamma))
        phi = lambda t: c * (t * h) ** (2.0 - gamma)
        table = phi(off + 1) - 2.0 * phi(off) + phi(np.maximum(off - 1, 0.0))
    else:
        with np.errstate(divide="ignore"):
            table = h * h * (off * h) ** (-gamma)
    table[0] = 0.0
    return table


def _tensor_nonlocal(v, sigma, p, spec, weight, label, half=True):
    d = v.d
    box = spec.box()
    pts, h = _grid(spec, d, box)
    n = pts.shape[0]
    pairs = n * (n - 1) // 2
    if pairs > spec.max_pairs:
        raise ResourceLimitError(f"{pairs} node pairs exceed the budget {spec.max_pairs}")
    vals = np.asarray(v(pts), dtype=float)
    _check_finite(vals)
    gamma = d + sigma * p
    delta = h if spec.delta_diag is None else min(spec.delta_diag, h)
    diam = (box[1] - box[0]) * math.sqrt(d)
    bin_lo = int(math.floor(math.log2(min(delta, h))))
    nbins = int(math.floor(math.log2(diam))) - bin_lo + 1
    wdiag = None
    if d == 1 and weight is None:
        exact = sigma * p < 1.0
        table = _cell_table(n, h, gamma, exact)
        offs = np.arange(n)
        with np.errstate(divide="ignore"):
            bins = np.floor(np.log2(np.maximum(offs, 1) * h)).astype(np.int64) - bin_lo
        bins = np.clip(bins, 0, nbins - 1)
        sums = kernels.pair_sum_table(vals, p, table, bins, nbins)
    elif weight is None:
        sums = kernels.pair_sum_points(pts, vals, p, gamma, h ** d, delta, bin_lo, nbins)
    else:
        sums = _weighted_pairs(pts, vals, p, gamma, h ** d, delta, bin_lo, nbins, weight, half)
        wdiag = weight(pts, pts)
    sums = np.asarray(sums) / p
    value = math.fsum(sums)
    diag = _diag_bound(v, pts, p, sigma, h, d, wdiag)
    roundoff = 1e-13 * value * math.sqrt(max(pairs, 1))
    return EnergyValue(value, diag + roundoff, (), _sep_spectrum(sums, bin_lo), n,
                       diag=diag, label=label)


def _weighted_pairs(pts, vals, p, gamma, cell, delta, bin_lo, nbins, weight, half, block=256):
    n = pts.shape[0]
    parts = [[] for _ in range(nbins)]
    for start in range(0, n, block):
        stop = min(n, start + block)
        ii, jj = np.meshgrid(np.arange(start, stop), np.arange(n), indexing="ij")
        keep = (jj > ii) if half else (jj != ii)
        ii, jj = ii[keep], jj[keep]
        diff = np.abs(vals[ii] - vals[jj])
        r = np.sqrt(np.sum((pts[ii] - pts[jj]) ** 2, axis=1))
        live = (diff > 0) & (r >= delta)
        ii, jj, diff, r = ii[live], jj[live], diff[live], r[live]
        if ii.size == 0:
            continue
        a = weight(pts[ii], pts[jj])
        term = (2.0 if half else 1.0) * cell * cell * a * diff ** p * r ** (-gamma)
        b = np.clip(np.floor(np.log2(r)).astype(np.int64) - bin_lo, 0, nbins - 1)
        binned = np.bincount(b, weights=term, minlength=nbins)
        for k in range(nbins):
            parts[k].append(float(binned[k]))
    return np.array([math.fsum(part) for part in parts])


def _tensor_local(v, p, spec, weight, label):
    d = v.d
    box = spec.box(local=True)

    def midpoint(cell_spec):
        pts, h = _grid(cell_spec, d, box)
        g = np.asarray(v.gradient(pts))
        _check_finite(g, "gradient")
        dens = np.sqrt(np.sum(g * g, axis=1)) ** p / p
        if weight is not None:
            dens = dens * weight(pts)
        return math.fsum(dens) * h ** d, pts.shape[0]

    value, nodes = midpoint(spec)
    coarse, _ = midpoint(replace(spec, h=2.0 * spec.cell(d), delta_diag=None, refine=0))
    return EnergyValue(value, abs(value - coarse), (), (), nodes, label=label)


# ---------------------------------------------------------------------------
# Monte Carlo mode


@dataclass(frozen=True)
class SamplingLayout:
    """Which coordinates are anchored near the Cantor set and which are banded.

    ``regime='sub'``: anchors ``xbar`` (the set lives in ``x_d = 0``), bands in
    ``|x_d|``. ``regime='super'``: anchor ``x_d`` (the set lives on the axis),
    bands in the sup norm of ``xbar``. ``regime='plain'``: no Cantor anchor.
    """

    d: int
    regime: str = "plain"
    fractal: FractalParams = None

    def __post_init__(self):
        if self.regime not in ("sub", "super", "plain"):
            raise ParameterError(f"unknown layout {self.regime!r}")
        if self.regime != "plain" and self.fractal is None:
            raise ParameterError("Cantor layouts need the fractal parameters")
        if self.regime == "sub" and self.fractal.m != self.d - 1:
            raise ParameterError("subcritical layout needs m = d - 1")

    @property
    def anchor(self):
        return list(range(self.d - 1)) if self.regime != "super" else [self.d - 1]

    @property
    def transverse(self):
        return [self.d - 1] if self.regime != "super" else list(range(self.d - 1))

    @classmethod
    def for_geometry(cls, geom, d=None):
        if geom is None:
            return cls(d)
        if geom.regime == "sub":
            return cls(geom.d, "sub", geom.fractal)
        return cls(geom.d, "super", FractalParams(geom.fractal.lam, 1, geom.fractal.generation))


def _band(j, spec, half):
    b = spec.base
    if j == 0:
        return 1.0 / b, half
    return b ** (-j - 1), b ** (-j)


def _shell_points(rng, n, t, lo, hi):
    if t == 1:
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return (sign * rng.uniform(lo, hi, n))[:, None]
    out = np.empty((n, t))
    filled = 0
    while filled < n:
        cand = rng.uniform(-hi, hi, (n, t))
        cand = cand[np.max(np.abs(cand), axis=1) >= lo]
        take = min(n - filled, cand.shape[0])
        out[filled:filled + take] = cand[:take]
        filled += take
    return out


def _sample_y(rng, n, j, layout, spec, half):
    """Points of height band ``j`` and their sampling density."""
    lo, hi = _band(j, spec, half)
    tdim = len(layout.transverse)
    adim = len(layout.anchor)
    y = np.empty((n, layout.d))
    trans = _shell_points(rng, n, tdim, lo, hi)
    dens = np.full(n, 1.0 / ((2.0 * hi) ** tdim - (2.0 * lo) ** tdim))
    if adim:
        uni = rng.uniform(-half, half, (n, adim))
        q_uni = 1.0 / (2.0 * half) ** adim
        if layout.regime == "plain":
            anchors, q_anchor = uni, np.full(n, q_uni)
        else:
            beta = spec.anchor_uniform
            pick = rng.random(n) < beta
            radius = min(spec.near_radius * hi, half)
            fp = FractalParams(layout.fractal.lam, adim, layout.fractal.generation)
            near = CantorMeasure(fp).sample(rng, n) + rng.uniform(-radius, radius, (n, adim))
            anchors = np.where(pick[:, None], uni, near)
            inside = np.all(np.abs(anchors) <= half, axis=1)
            q_near = np.ones(n)
            for c in range(adim):
                a = anchors[:, c]
                mass = (cantor_cdf(np.clip(a + radius, -0.5, 0.5), fp)
                        - cantor_cdf(np.clip(a - radius, -0.5, 0.5), fp))
                q_near = q_near * mass / (2.0 * radius)
            q_anchor = beta * q_uni * inside + (1.0 - beta) * q_near
        y[:, layout.anchor] = anchors
        dens = dens * q_anchor
    y[:, layout.transverse] = trans
    return y, dens


def _stream(spec, j):
    key = [spec.seed] if spec.crn else [spec.seed, j]
    return np.random.default_rng(key)


def _tail_estimate(contribs):
    # geometric continuation of the last three bands
    c = [x for x in contribs[-3:]]
    if len(c) < 3 or c[-1] <= 0.0:
        return 0.0
    if c[-2] <= 0.0:
        return math.inf
    ratio = math.sqrt(c[-1] / c[-3]) if c[-3] > 0 else c[-1] / c[-2]
    if ratio >= 1.0:
        return math.inf
    return c[-1] * ratio / (1.0 - ratio)


def _combine_se(ses, crn):
    if crn:
        return math.fsum(ses)
    return math.sqrt(math.fsum(s * s for s in ses))


def _mc_nonlocal(v, sigma, p, spec, weight, layout, label):
    d = v.d
    half = spec.half_width
    gamma = d + sigma * p
    diam = 2.0 * half * math.sqrt(d)
    area = sphere_area(d)
    r_floor = spec.r_min_rel * spec.base ** (-spec.bands)
    bin_lo = int(math.floor(math.log2(r_floor)))
    nbins = int(math.floor(math.log2(diam))) - bin_lo + 1
    sep_parts = [[] for _ in range(nbins)]
    contribs, ses, lows = [], [], []
    checked = weight is None
    for j in range(spec.bands):
        rng = _stream(spec, j)
        lo_h, _ = _band(j, spec, half)
        r_lo = spec.r_min_rel * lo_h
        logspan = math.log(diam / r_lo)
        n_total = spec.samples
        sums, sqs, low = [], [], []
        done = 0
        while done < n_total:
            n = min(MC_CHUNK, n_total - done)
            done += n
            y, qy = _sample_y(rng, n, j, layout, spec, half)
            r = r_lo * np.exp(logspan * rng.random(n))
            theta = rng.standard_normal((n, d))
            theta /= np.sqrt(np.sum(theta * theta, axis=1))[:, None]
            z = y + r[:, None] * theta
            keep = np.all(np.abs(y) < half, axis=1) & np.all(np.abs(z) < half, axis=1)
            contrib = np.zeros(n)
            if keep.any():
                yk, zk, rk = y[keep], z[keep], r[keep]
                vals = np.asarray(v(np.concatenate([yk, zk])), dtype=float)
                _check_finite(vals)
                m = yk.shape[0]
                diff = np.abs(vals[:m] - vals[m:])
                # f / q_z = (1/p)|dv|^p r^(d - gamma) |S^(d-1)| log(diam / r_lo)
                term = diff ** p * rk ** (d - gamma) * (area * logspan / p) / qy[keep]
                if weight is not None:
                    if not checked:
                        _check_symmetric(weight, yk, zk)
                        checked = True
                    live = diff > 0
                    a = np.zeros(m)
                    if live.any():
                        a[live] = weight(yk[live], zk[live])
                    term = term * a
                contrib[keep] = term
            sums.append(math.fsum(contrib))
            sqs.append(math.fsum(contrib * contrib))
            low.append(math.fsum(contrib[r < 2.0 * r_lo]))
            b = np.clip(np.floor(np.log2(r)).astype(np.int64) - bin_lo, 0, nbins - 1)
            binned = np.bincount(b, weights=contrib, minlength=nbins)
            for k in np.flatnonzero(binned):
                sep_parts[k].append(float(binned[k]) / n_total)
        mean = math.fsum(sums) / n_total
        var = max(math.fsum(sqs) / n_total - mean * mean, 0.0)
        contribs.append(mean)
        ses.append(math.sqrt(var / n_total))
        lows.append(math.fsum(low) / n_total)
    value = math.fsum(contribs)
    sep = np.array([math.fsum(part) for part in sep_parts])
    tail = _tail_estimate(contribs)
    # excluded ball |y - z| < r_lo: octave contributions of a C^1 field scale
    # like r^(p - sigma p)
    expo = p - sigma * p
    diag = math.fsum(lows) * (2.0 ** -expo / (1.0 - 2.0 ** -expo)) if expo > 0 else math.inf
    stderr = _combine_se(ses, spec.crn)
    height = tuple((_band(j, spec, half)[1], c) for j, c in enumerate(contribs))
    return EnergyValue(value, stderr + tail + diag, height, _sep_spectrum(sep, bin_lo),
                       spec.samples * spec.bands, stderr, diag, tail, spec.base, label)


def _mc_local(v, p, spec, weight, layout, label):
    half = spec.local_half_width
    local = replace(spec, half_width=max(half, 1.0 / spec.base + 1e-12))
    contribs, ses = [], []
    for j in range(spec.bands):
        rng = _stream(spec, j)
        sums, sqs = [], []
        done = 0
        while done < spec.samples:
            n = min(MC_CHUNK, spec.samples - done)
            done += n
            y, qy = _sample_y(rng, n, j, layout, local, half)
            keep = np.all(np.abs(y) < half, axis=1)
            contrib = np.zeros(n)
            if keep.any():
                g = np.asarray(v.gradient(y[keep]))
                _check_finite(g, "gradient")
                dens = np.sqrt(np.sum(g * g, axis=1)) ** p / p
                if weight is not None:
                    dens = dens * weight(y[keep])
                contrib[keep] = dens / qy[keep]
            sums.append(math.fsum(contrib))
            sqs.append(math.fsum(contrib * contrib))
        mean = math.fsum(sums) / spec.samples
        var = max(math.fsum(sqs) / spec.samples - mean * mean, 0.0)
        contribs.append(mean)
        ses.append(math.sqrt(var / spec.samples))
    value = math.fsum(contribs)
    tail = _tail_estimate(contribs)
    stderr = _combine_se(ses, spec.crn)
    height = tuple((_band(j, local, half)[1], c) for j, c in enumerate(contribs))
    return EnergyValue(value, stderr + tail, height, (), spec.samples * spec.bands,
                       stderr, 0.0, tail, spec.base, label)


def _check_symmetric(weight, ys, zs, count=16):
    k = min(count, ys.shape[0])
    if k == 0:
        return
    a = weight(ys[:k], zs[:k])
    b = weight(zs[:k], ys[:k])
    if not np.allclose(a, b, rtol=1e-12, atol=0.0):
        raise ParameterError("weight is not symmetric in its two arguments")


# ---------------------------------------------------------------------------
# phases


def gagliardo_phase(v, s, p, spec=QuadratureSpec(), geom=None):
    """``(1/p) int int |v(y) - v(z)|^p / |y - z|^(d + sp)`` over the spec domain.

    Parameters
    ----------
    v : Field
    s, p : float
        Order in (0, 1) and exponent > 1.
    spec : QuadratureSpec
    geom : BarrierGeometry, optional
        Selects the Cantor-aware MC layout; ignored in tensor mode.
    """
    _check_exponents(s, p)
    return _nonlocal(v, s, p, spec, None, geom, "gagliardo")


def weighted_nonlocal_phase(v, a, t, q, spec=QuadratureSpec(), geom=None):
    """``(1/q) int int a(y, z) |v(y) - v(z)|^q / |y - z|^(d + tq)``."""
    _check_exponents(t, q)
    if a is None:
        return zero_energy("weighted_nonlocal")
    if not getattr(a, "bivariate", False):
        raise ParameterError("the nonlocal phase needs a bivariate weight")
    if getattr(a, "value", None) == 0.0:
        return zero_energy("weighted_nonlocal")
    return _nonlocal(v, t, q, spec, a, geom, "weighted_nonlocal")


def _nonlocal(v, sigma, p, spec, weight, geom, label):
    if spec.mode == "tensor":
        if weight is not None and v.d > 1:
            _check_symmetric(weight, *_spot_pairs(v.d, spec))
        return _tensor_nonlocal(v, sigma, p, spec, weight, label)
    layout = SamplingLayout.for_geometry(geom, v.d)
    return _mc_nonlocal(v, sigma, p, spec, weight, layout, label)


def _spot_pairs(d, spec, count=16):
    rng = np.random.default_rng([spec.seed, 7919])
    lo, hi = spec.box()
    return rng.uniform(lo, hi, (count, d)), rng.uniform(lo, hi, (count, d))


def _need_gradient(v):
    if not callable(getattr(v, "gradient", None)):
        raise ParameterError("local phases need a field with a gradient")


def local_phase(v, p, spec=QuadratureSpec(), geom=None):
    """``int (1/p) |grad v|^p`` over the local domain (the cube by default)."""
    if not p > 1:
        raise ParameterError("exponent must exceed 1")
    _need_gradient(v)
    if spec.mode == "tensor":
        return _tensor_local(v, p, spec, None, "local")
    return _mc_local(v, p, spec, None, SamplingLayout.for_geometry(geom, v.d), "local")


def weighted_local_phase(v, a, q, spec=QuadratureSpec(), geom=None):
    """``int (1/q) a(x) |grad v|^q`` with a univariate weight."""
    if not q > 1:
        raise ParameterError("exponent must exceed 1")
    _need_gradient(v)
    if a is None:
        return zero_energy("weighted_local")
    if getattr(a, "bivariate", True):
        raise ParameterError("the local phase needs a univariate weight")
    if getattr(a, "value", None) == 0.0:
        return zero_energy("weighted_local")
    if spec.mode == "tensor":
        return _tensor_local(v, q, spec, a, "weighted_local")
    return _mc_local(v, q, spec, a, SamplingLayout.for_geometry(geom, v.d), "weighted_local")


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class ModelEnergy:
    """Two-phase energy with its breakdown and homogeneity exponents."""

    first: EnergyValue
    second: EnergyValue
    p: float
    q: float

    @property
    def total(self):
        return self.first.value + self.second.value

    def phases(self):
        return {"first": self.first, "second": self.second}


def assemble_model(params, v, weight, spec=QuadratureSpec(), geom=None):
    """Evaluate both phases of model I-IV.

    I: local + weighted local; II: Gagliardo + weighted local;
    III: local + weighted nonlocal; IV: Gagliardo + weighted nonlocal.
    ``weight=None`` means ``a = 0``.
    """
    local_first = params.model in ("I", "III")
    local_second = params.model in ("I", "II")
    if weight is not None:
        bivariate = getattr(weight, "bivariate", None)
        if bivariate is None or bivariate == local_second:
            kind = "univariate" if local_second else "bivariate"
            raise ParameterError(f"model {params.model} needs a {kind} weight")
    if v.d != params.d:
        raise ParameterError("field dimension does not match the model")
    if local_first:
        first = local_phase(v, params.p, spec, geom)
    else:
        first = gagliardo_phase(v, params.s, params.p, spec, geom)
    if local_second:
        second = weighted_local_phase(v, weight, params.q, spec, geom)
    else:
        second = weighted_nonlocal_phase(v, weight, params.t, params.q, spec, geom)
    return ModelEnergy(first, second, params.p, params.q)


def luxemburg_from_phases(phases, tol=1e-12):
    """Smallest ``lam`` with ``sum_i lam^(-p_i) J_i <= 1``, by bisection.

    ``phases`` is a sequence of ``(J_i, p_i)`` with ``J_i >= 0``.
    """
    live = [(float(j), float(p)) for j, p in phases if j != 0.0]
    for j, _ in live:
        if not math.isfinite(j):
            raise DivergenceError("energy is not finite; the norm is undefined")
        if j < 0:
            raise ParameterError("phase values must be non-negative")
    if not live:
        return 0.0

    def excess(lam):
        return math.fsum(j * lam ** -p for j, p in live) - 1.0

    lo = min(j ** (1.0 / p) for j, p in live)
    hi = max((len(live) * j) ** (1.0 / p) for j, p in live)
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def luxemburg_norm(v, params, spec=QuadratureSpec(), tol=1e-12, weight=None, geom=None):
    """``inf{lam > 0 : J(v / lam) <= 1}`` using the homogeneity of each phase."""
    energy = assemble_model(params, v, weight, spec, geom)
    return luxemburg_from_phases([(energy.first.value, energy.p),
                                  (energy.second.value, energy.q)], tol)


# ---------------------------------------------------------------------------
# Riesz potential


def _gl(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def restricted_riesz(g, x, cone, spec=None, order=16, panels=40):
    """``int_K g(x + y) |y|^(1-d) dy`` over a cone (``up``, ``down`` or ``both``).

    With ``y = y_d (u, 1)``, ``|u| <= ratio``, the kernel becomes the bounded
    ``(1 + |u|^2)^((1-d)/2)``; heights use dyadic Gauss-Legendre panels.
    """
    x = np.asarray(x, dtype=float).ravel()
    d = x.size
    if cone.orientation == "both":
        return (restricted_riesz(g, x, replace(cone, orientation="up"), spec, order, panels)
                + restricted_riesz(g, x, replace(cone, orientation="down"), spec, order, panels))
    sign = 1.0 if cone.orientation == "up" else -1.0
    gx, gw = _gl(order)
    edges = [cone.extent * 2.0 ** -k for k in range(panels + 1)] + [0.0]
    hs, hw = [], []
    for a, b in zip(edges[1:], edges[:-1]):
        hs.append(0.5 * (a + b) + 0.5 * (b - a) * gx)
        hw.append(0.5 * (b - a) * gw)
    hs, hw = np.concatenate(hs), np.concatenate(hw)
    if d == 2:
        us = (cone.ratio * gx)[:, None]
        uw = cone.ratio * gw
    elif d == 3:
        nphi = 2 * order
        phi = 2.0 * math.pi * np.arange(nphi) / nphi
        rad = 0.5 * cone.ratio * (gx + 1.0)
        rr, pp = np.meshgrid(rad, phi, indexing="ij")
        us = np.stack([(rr * np.cos(pp)).ravel(), (rr * np.sin(pp)).ravel()], axis=1)
        uw = (np.outer(0.5 * cone.ratio * gw * rad, np.full(nphi, 2.0 * math.pi / nphi))).ravel()
    else:
        raise NotImplementedError("restricted_riesz supports d = 2 and d = 3")
    kern = uw * (1.0 + np.sum(us * us, axis=1)) ** ((1.0 - d) / 2.0)
    pts = np.empty((hs.size * us.shape[0], d))
    hh = np.repeat(hs, us.shape[0])
    pts[:, :-1] = np.tile(us, (hs.size, 1)) * hh[:, None]
    pts[:, -1] = sign * hh
    pts += x
    vals = np.asarray(g(pts), dtype=float).reshape(hs.size, us.shape[0])
    return math.fsum((vals @ kern) * hw)


# ---------------------------------------------------------------------------
# shell diagnostics


@dataclass(frozen=True)
class ShellVerdict:
    """Outcome of a geometric-decay fit over coarse-to-fine shells."""

    verdict: str
    ratio: float
    rate: float
    scales: int

    def to_dict(self):
        return {"verdict": self.verdict, "ratio": self.ratio, "rate": self.rate,
                "scales": self.scales}


def fit_shell_ratio(contribs, skip=2):
    """Least-squares ``log c_j = a + j log(ratio)`` over shells ``j >= skip``."""
    c = np.asarray(contribs, dtype=float)[skip:]
    j = np.arange(c.size, dtype=float)
    live = c > 0
    if live.sum() < 2:
        return 0.0
    slope = np.polyfit(j[live], np.log(c[live]), 1)[0]
    return float(math.exp(slope))


def shell_diagnostic(ev, kind=None, skip=2, min_scales=6, lo=0.9, hi=1.1):
    """Classify a spectrum as converging, diverging or inconclusive.

    The per-step ratio of the fitted geometric law decides: below ``lo``
    converges, above ``hi`` diverges. ``rate`` is ``log(ratio)/log(base)``,
    the exponent of the contribution in the shell scale.
    """
    shells = ev.spectrum(kind) if isinstance(ev, EnergyValue) else ev
    contribs = [c for _, c in shells]
    if len(contribs) - skip < min_scales:
        raise ParameterError(f"need at least {min_scales + skip} shells, got {len(contribs)}")
    if all(c == 0.0 for c in contribs):
        return ShellVerdict("converges", 0.0, -math.inf, len(contribs) - skip)
    if sum(1 for c in contribs[skip:] if c > 0) < min_scales:
        # too few populated fine shells: treated as a vanishing tail
        return ShellVerdict("converges", 0.0, -math.inf, len(contribs) - skip)
    ratio = fit_shell_ratio(contribs, skip)
    scales = [s for s, _ in shells]
    # band 0 is wider than the rest, so the step comes from the fine end
    step = scales[-2] / scales[-1] if scales[-1] > 0 else 2.0
    rate = math.log(ratio) / math.log(step)
    verdict = "converges" if ratio < lo else "diverges" if ratio > hi else "inconclusive"
    return ShellVerdict(verdict, ratio, rate, len(contribs) - skip)


def cone_neighbourhood_integral(sigma, fractal, d=2, tau=4.0, bands=30, order=24):
    """``int_Omega |z_d|^sigma 1{dis(zbar, C) <= tau |z_d|} dz`` per dyadic band.

    Deterministic: the ``zbar``-section is the exact neighbourhood volume of
    the Cantor product inside the cube, integrated in ``|z_d|`` by
    Gauss-Legendre on four sub-panels of each band.
    """
    if fractal.m != d - 1:
        raise ParameterError("the Cantor product must have dimension m = d - 1")
    need = int(math.ceil((bands + 4) * math.log(2.0) / math.log(1.0 / fractal.lam)))
    fp = fractal.with_generation(max(fractal.generation, need))
    gx, gw = _gl(order)
    contribs = []
    for j in range(bands):
        lo, hi = 2.0 ** (-j - 1), 2.0 ** (-j)
        parts = []
        edges = np.linspace(lo, hi, 5)
        for a, b in zip(edges[:-1], edges[1:]):
            for x, w in zip(0.5 * (a + b) + 0.5 * (b - a) * gx, 0.5 * (b - a) * gw):
                parts.append(w * x ** sigma * neighborhood_volume(tau * x, fp, clip=1.0))
        contribs.append(2.0 * math.fsum(parts))
    value = math.fsum(contribs)
    height = tuple((2.0 ** -j, c) for j, c in enumerate(contribs))
    tail = _tail_estimate(contribs)
    return EnergyValue(value, tail, height, (), bands * 4 * order, tail=tail, label="cone_neighbourhood")


__all__ = [
    "QuadratureSpec", "EnergyValue", "ModelEnergy", "SamplingLayout", "ShellVerdict",
    "gagliardo_phase", "weighted_nonlocal_phase", "local_phase", "weighted_local_phase",
    "assemble_model", "luxemburg_norm", "luxemburg_from_phases", "restricted_riesz",
    "shell_diagnostic", "fit_shell_ratio", "cone_neighbourhood_integral", "sphere_area",
    "zero_energy",
]
