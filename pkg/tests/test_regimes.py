import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lavgap.errors import ParameterError, RegimeError
from lavgap.regimes import (CRITICAL, SUB, SUPER, ModelParams, classify_regime, conjugate,
                            dimension_window, dimension_window_sub, dimension_window_super,
                            gap_condition, random_params, sobolev_index, window_consistency)

unit = st.floats(0.02, 0.98)
expo = st.floats(1.05, 8.0)
alpha = st.floats(0.0, 2.0)


def table_row(model, regime, s, t, p, q, a, d):
    # the rows of the gap table, written out independently of the implementation
    if regime == SUB:
        return {"I": q > p + a, "II": q > s * p + a, "III": t * q > p + a,
                "IV": t * q > s * p + a}[model]
    left_t = 1.0 if model in ("I", "II") else t
    right_s = 1.0 if model in ("I", "III") else s
    return q / (q - 1) * (left_t - (d + a) / q) > p / (p - 1) * (right_s - d / p)


class TestIndex:
    @pytest.mark.parametrize("s,d,p,want,kind", [(0.5, 2, 2, -0.5, SUB), (0.9, 2, 10, 0.7, SUPER),
                                                 (1.0, 2, 2, 0.0, CRITICAL)])
    def test_examples(self, s, d, p, want, kind):
        assert sobolev_index(s, d, p) == pytest.approx(want, abs=1e-15)
        t = max(s, 0.95) if s < 1.0 else 0.95
        model = "III" if s == 1.0 else "IV"
        assert classify_regime(ModelParams(model, d, s, t, p, 2, 0.0)).kind == kind

    def test_params_validation(self):
        with pytest.raises(ParameterError):
            ModelParams("IV", 2, 0.9, 0.5, 2, 2, 0.0)
        with pytest.raises(ParameterError):
            ModelParams("I", 2, 0.5, 1.0, 2, 2, 0.0)
        with pytest.raises(ParameterError):
            ModelParams("IV", 1, 0.5, 0.6, 2, 2, 0.0)
        with pytest.raises(ParameterError):
            ModelParams("IV", 2, 0.5, 0.6, 2, 2, -1.0)


class TestGapCondition:
    def test_examples(self):
        g = gap_condition(ModelParams("IV", 2, 0.5, 0.9, 2, 3, 0.1))
        assert g.holds and g.lhs == pytest.approx(2.7) and g.rhs == pytest.approx(1.1)
        g = gap_condition(ModelParams("I", 3, 1.0, 1.0, 2, 3.5, 1.0))
        assert g.holds and (g.lhs, g.rhs) == (3.5, 3.0)
        g = gap_condition(ModelParams("IV", 2, 0.8, 0.95, 3, 4, 0.0))
        assert g.holds and g.lhs == pytest.approx(0.6) and g.rhs == pytest.approx(0.2)

    def test_critical(self):
        g = gap_condition(ModelParams("IV", 2, 0.5, 0.9, 4, 3, 0.1))
        assert g.regime == CRITICAL
        assert (g.lhs, g.rhs) == pytest.approx((2.1, 2.7))
        assert not g.holds
        with pytest.raises(RegimeError):
            gap_condition(ModelParams("I", 2, 1.0, 1.0, 2, 3, 0.1))

    @given(st.sampled_from(["I", "II", "III", "IV"]), unit, unit, expo, expo, alpha,
           st.sampled_from([2, 3]))
    def test_matches_table(self, model, s, t, p, q, a, d):
        s = 1.0 if model in ("I", "III") else s
        t = 1.0 if model in ("I", "II") else t
        if model == "IV" and s > t:
            s, t = t, s
        params = ModelParams(model, d, s, t, p, q, a)
        regime = classify_regime(params).kind
        if regime == CRITICAL:
            return
        assert gap_condition(params).holds == table_row(model, regime, s, t, p, q, a, d)

    @given(unit, unit, expo, expo, alpha, st.sampled_from([2, 3]))
    def test_reductions(self, s, t, p, q, a, d):
        # model IV inequalities at t = 1, s = 1, s = t = 1 are rows II, III, I
        for model, ss, tt in (("II", s, 1.0), ("III", 1.0, t), ("I", 1.0, 1.0)):
            params = ModelParams(model, d, ss, tt, p, q, a)
            regime = classify_regime(params).kind
            if regime == CRITICAL:
                continue
            if regime == SUB:
                iv = tt * q > ss * p + a
            else:
                iv = conjugate(q) * (tt - (d + a) / q) > conjugate(p) * (ss - d / p)
            assert gap_condition(params).holds == iv


class TestWindows:
    def test_sub_example(self):
        w = dimension_window_sub(ModelParams("IV", 2, 0.4, 0.8, 2, 2, 0.1))
        assert (w.lo, w.hi) == pytest.approx((0.5, 1.0))
        assert not w.empty and w.contains(0.65) and not w.contains(0.4)

    def test_super_example(self):
        w = dimension_window_super(ModelParams("IV", 2, 0.8, 0.95, 3, 4, 0.0))
        assert (w.lo, w.hi) == pytest.approx((0.2, 0.6))

    def test_empty_cases(self):
        assert dimension_window(ModelParams("IV", 2, 0.4, 0.45, 2, 2, 0.1)).empty
        # boundary tq = sp + alpha gives an open, empty window
        assert dimension_window(ModelParams("IV", 2, 0.25, 0.6, 2, 2, 0.7)).empty
        assert dimension_window(ModelParams("IV", 2, 0.8, 0.95, 3, 4, 5.0)).empty

    def test_wrong_regime(self):
        with pytest.raises(RegimeError):
            dimension_window_super(ModelParams("IV", 2, 0.4, 0.8, 2, 2, 0.1))
        with pytest.raises(RegimeError):
            dimension_window_sub(ModelParams("IV", 2, 0.8, 0.95, 3, 4, 0.0))
        with pytest.raises(RegimeError):
            dimension_window(ModelParams("III", 2, 1.0, 0.9, 2, 3, 0.0))

    @given(unit, unit, expo, expo, alpha, alpha)
    def test_alpha_monotone(self, s, t, p, q, a, b):
        s, t = min(s, t), max(s, t)
        lo_a, hi_a = sorted((a, b))
        pa = ModelParams("IV", 2, s, t, p, q, lo_a)
        if classify_regime(pa).kind != SUB:
            return
        wa = dimension_window_sub(pa)
        wb = dimension_window_sub(ModelParams("IV", 2, s, t, p, q, hi_a))
        assert wb.lo >= wa.lo
        if not wb.empty:
            assert wa.lo <= wb.lo and wb.hi <= wa.hi


def unattainable(params):
    # gap row holds but the admissible dimensions (0, d - 1) miss the window
    tq = params.t * params.q
    return (params.model in ("II", "IV") and classify_regime(params).kind == SUB
            and params.s * params.p + params.alpha < tq <= 1.0 + params.alpha)


class TestConsistency:
    def test_examples(self):
        for params in (ModelParams("IV", 2, 0.4, 0.8, 2, 2, 0.1),
                       ModelParams("IV", 2, 0.8, 0.95, 3, 4, 0.0),
                       ModelParams("IV", 2, 0.375, 0.5, 2, 1.5, 0.0)):
            assert window_consistency(params).consistent
        degenerate = window_consistency(ModelParams("IV", 2, 0.375, 0.5, 2, 1.5, 0.0))
        assert not degenerate.gap and not degenerate.window_nonempty

    @pytest.mark.parametrize("model", ["I", "II", "III", "IV"])
    @pytest.mark.parametrize("regime", [SUB, SUPER])
    def test_failures_are_exactly_the_unattainable_set(self, model, regime):
        rng = np.random.default_rng(["I", "II", "III", "IV"].index(model) + 10 * (regime == SUB))
        for _ in range(200):
            params = random_params(rng, model, regime)
            check = window_consistency(params, resolution=4000)
            assert check.window_nonempty == check.scan_hit
            assert check.consistent != unattainable(params)

    def test_unattainable_point(self):
        params = ModelParams("IV", 2, 0.1, 0.3, 2, 2, 0.1)
        assert gap_condition(params).holds
        assert dimension_window(params).empty
        assert not window_consistency(params).consistent
