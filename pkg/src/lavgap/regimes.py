"""Parameter regimes, gap conditions and fractal-dimension windows.

Every model is handled through the model-IV formulas with ``s = 1`` (local
first phase) or ``t = 1`` (local second phase) pinned by the model tag:

* subcritical ``s - d/p < 0``: gap iff ``tq > sp + alpha``;
* supercritical ``s - d/p > 0``: gap iff
  ``q'(t - (d + alpha)/q) > p'(s - d/p)``;
* critical ``s - d/p = 0`` (model IV only): gap iff ``sp + alpha < d < tq``.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ParameterError, RegimeError

MODELS = ("I", "II", "III", "IV")
SUB, CRITICAL, SUPER = "subcritical", "critical", "supercritical"


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one double-phase model.

    ``s = 1`` encodes a local first phase (models I, III) and ``t = 1`` a
    local second phase (models I, II).
    """

    model: str = "IV"
    d: int = 2
    s: float = 0.4
    t: float = 0.8
    p: float = 2.0
    q: float = 2.0
    alpha: float = 0.1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ParameterError(f"unknown model {self.model!r}")
        if int(self.d) != self.d or self.d < 2:
            raise ParameterError("d must be an integer >= 2")
        for name in ("s", "t"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1]")
        for name in ("p", "q"):
            if not getattr(self, name) > 1.0 or not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must lie in (1, inf)")
        if not self.alpha >= 0.0 or not math.isfinite(self.alpha):
            raise ParameterError("alpha must be non-negative")
        local_s = self.s == 1.0
        local_t = self.t == 1.0
        want = {"I": (True, True), "II": (False, True), "III": (True, False),
                "IV": (False, False)}[self.model]
        if (local_s, local_t) != want:
            raise ParameterError(
                f"model {self.model} needs s {'= 1' if want[0] else '< 1'} and "
                f"t {'= 1' if want[1] else '< 1'}")
        if self.model == "IV" and self.s > self.t:
            raise ParameterError("model IV needs s <= t")

    @property
    def m(self):
        return self.d - 1

    def to_dict(self):
        return asdict(self)


def conjugate(p):
    return p / (p - 1.0)


def sobolev_index(s, d, p):
    """``s - d/p``."""
    return s - d / p


@dataclass(frozen=True)
class RegimeClass:
    kind: str
    index: float

    def to_dict(self):
        return {"kind": self.kind, "index": self.index}


def classify_regime(params):
    """Sign of ``s - d/p``; the sign of ``sp - d`` decides exact zeros."""
    index = sobolev_index(params.s, params.d, params.p)
    key = params.s * params.p - params.d
    kind = SUB if key < 0 else SUPER if key > 0 else CRITICAL
    return RegimeClass(kind, index)


@dataclass(frozen=True)
class GapCondition:
    """Evaluated inequality ``lhs > rhs`` (critical: ``lhs < d < rhs``)."""

    holds: bool
    regime: str
    lhs: float
    rhs: float
    relation: str

    def to_dict(self):
        return {"holds": self.holds, "regime": self.regime, "lhs": self.lhs,
                "rhs": self.rhs, "relation": self.relation}


ROW_TEXT = {
    (SUB, "I"): "q > p + alpha",
    (SUB, "II"): "q > sp + alpha",
    (SUB, "III"): "tq > p + alpha",
    (SUB, "IV"): "tq > sp + alpha",
    (SUPER, "I"): "q'(1 - (d+alpha)/q) > p'(1 - d/p)",
    (SUPER, "II"): "q'(1 - (d+alpha)/q) > p'(s - d/p)",
    (SUPER, "III"): "q'(t - (d+alpha)/q) > p'(1 - d/p)",
    (SUPER, "IV"): "q'(t - (d+alpha)/q) > p'(s - d/p)",
    (CRITICAL, "IV"): "sp + alpha < d < tq",
}


def gap_condition(params):
    """Evaluate the gap inequality for the model and its regime."""
    regime = classify_regime(params).kind
    s, t, p, q, a, d = params.s, params.t, params.p, params.q, params.alpha, params.d
    if regime == CRITICAL:
        if params.model != "IV":
            raise RegimeError(f"the critical condition is not stated for model {params.model}")
        lhs, rhs = s * p + a, t * q
        return GapCondition(lhs < d < rhs, regime, lhs, rhs, ROW_TEXT[(regime, "IV")])
    if regime == SUB:
        lhs, rhs = t * q, s * p + a
    else:
        lhs = conjugate(q) * (t - (d + a) / q)
        rhs = conjugate(p) * (s - d / p)
    return GapCondition(lhs > rhs, regime, lhs, rhs, ROW_TEXT[(regime, params.model)])


@dataclass(frozen=True)
class DimensionWindow:
    """Open interval ``(lo, hi)`` of admissible dimensions after clipping."""

    lo: float
    hi: float
    raw_lo: float
    raw_hi: float
    m: int
    feasible_hi: float = None

    @property
    def empty(self):
        return not self.lo < self.hi

    @property
    def mid(self):
        if self.empty:
            raise ParameterError("empty window has no midpoint")
        return 0.5 * (self.lo + self.hi)

    def contains(self, dim):
        return self.lo < dim < self.hi

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "raw_lo": self.raw_lo, "raw_hi": self.raw_hi,
                "m": self.m, "empty": self.empty, "feasible_hi": self.feasible_hi}


def _clip(lo, hi, m, feasible_hi=None):
    return DimensionWindow(max(lo, 0.0), min(hi, float(m)), lo, hi, m, feasible_hi)


def dimension_window_sub(params):
    """``(d - tq + alpha, d - sp)`` intersected with ``(0, d - 1)``.

    The lower end is the lower-bound condition ``t - (d-D)/q - alpha/q > 0``,
    the upper end the finiteness condition ``s - (d-D)/p < 0``.
    """
    if classify_regime(params).kind != SUB:
        raise RegimeError("the subcritical window needs s - d/p < 0")
    d = params.d
    return _clip(d - params.t * params.q + params.alpha, d - params.s * params.p, d - 1)


def dimension_window_super(params):
    """``((sp - d)/(p - 1), q'(t - (d + alpha)/q))`` intersected with ``(0, 1)``.

    ``feasible_hi = min(1, s)`` records the competitor's own requirement
    ``s > D``; it is reported but not applied.
    """
    if classify_regime(params).kind != SUPER:
        raise RegimeError("the supercritical window needs s - d/p > 0")
    s, t, p, q, a, d = params.s, params.t, params.p, params.q, params.alpha, params.d
    lo = (s * p - d) / (p - 1.0)
    hi = conjugate(q) * (t - (d + a) / q)
    return _clip(lo, hi, 1, min(1.0, s))


def dimension_window(params):
    kind = classify_regime(params).kind
    if kind == SUB:
        return dimension_window_sub(params)
    if kind == SUPER:
        return dimension_window_super(params)
    raise RegimeError("no dimension window in the critical regime")


def _lemma_conditions(params, dims):
    # the two lemma inequalities, evaluated pointwise in D
    s, t, p, q, a, d = params.s, params.t, params.p, params.q, params.alpha, params.d
    if classify_regime(params).kind == SUB:
        finite = s - (d - dims) / p < 0.0
        lower = t - (d - dims) / q - a / q > 0.0
        return finite & lower & (dims > 0) & (dims < d - 1)
    # p < (d - D)/(s - D) multiplied out; for D >= s it holds trivially
    finite = p * (s - dims) < d - dims
    lower = conjugate(q) * (t - (d + a) / q) > dims
    return finite & lower & (dims > 0) & (dims < 1)


@dataclass(frozen=True)
class WindowCheck:
    consistent: bool
    gap: bool
    window_nonempty: bool
    scan_hit: bool

    def to_dict(self):
        return asdict(self)


def window_consistency(params, resolution=20000):
    """Brute-force scan of ``D`` against the closed-form window and the gap row.

    The scan evaluates the two lemma inequalities pointwise on an open grid;
    consistency means scan, window and gap condition all agree.
    """
    win = dimension_window(params)
    m = win.m
    dims = (np.arange(resolution) + 0.5) * (m / resolution)
    hit = bool(np.any(_lemma_conditions(params, dims)))
    gap = gap_condition(params).holds
    nonempty = not win.empty
    # a grid can miss a window narrower than its spacing; resolve by the window
    if nonempty and not hit and win.hi - win.lo < 2.0 * m / resolution:
        hit = True
    return WindowCheck(gap == nonempty == hit, gap, nonempty, hit)


def random_params(rng, model, regime, d_choices=(2, 3), max_exp=8.0, max_alpha=2.0,
                  max_tries=10000):
    """Draw ``ModelParams`` uniformly over the box, conditioned on the regime."""
    for _ in range(max_tries):
        d = int(rng.choice(d_choices))
        s = 1.0 if model in ("I", "III") else float(rng.uniform(0.01, 0.99))
        t = 1.0 if model in ("I", "II") else float(rng.uniform(0.01, 0.99))
        if model == "IV" and s > t:
            s, t = t, s
        p = float(rng.uniform(1.05, max_exp))
        q = float(rng.uniform(1.05, max_exp))
        alpha = float(rng.uniform(0.0, max_alpha))
        params = ModelParams(model, d, s, t, p, q, alpha)
        if classify_regime(params).kind == regime:
            return params
    raise ParameterError(f"no {regime} parameters found for model {model}")


__all__ = [
    "ModelParams", "RegimeClass", "GapCondition", "DimensionWindow", "WindowCheck",
    "sobolev_index", "classify_regime", "gap_condition", "dimension_window_sub",
    "dimension_window_super", "dimension_window", "window_consistency", "random_params",
    "conjugate", "MODELS", "SUB", "SUPER", "CRITICAL", "ROW_TEXT",
]
