import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lavgap.competitor import (BoundaryDatum, ConstantLocalWeight, ConstantWeight, ModelIIWeight,
                               SubCompetitor, SubWeight, SuperCompetitor, SuperWeight)
from lavgap.energy import (EnergyValue, QuadratureSpec, _tensor_nonlocal, assemble_model,
                           cone_neighbourhood_integral, gagliardo_phase, local_phase,
                           luxemburg_from_phases, luxemburg_norm, restricted_riesz,
                           shell_diagnostic, weighted_local_phase, weighted_nonlocal_phase)
from lavgap.errors import DivergenceError, ParameterError
from lavgap.fields import ConstantField, FunctionField, LinearField, ScaledField
from lavgap.fractal import FractalParams
from lavgap.geometry import ConeSpec, sub_geometry, super_geometry
from lavgap.regimes import ModelParams

def ZeroField(d):
    return ConstantField(d, 0.0)


UNIT = QuadratureSpec(mode="tensor", domain=(0.0, 1.0))
STEP = FunctionField(1, lambda p: (p[:, 0] > 0).astype(float), support=(-1.0, 1.0))
STEP_EXACT = 0.5 * (16.0 - 8.0 * math.sqrt(2.0))
MC = QuadratureSpec(mode="mc", samples=4000, bands=8)


def smooth_field(d=2):
    return FunctionField(d, lambda p: np.sin(2 * p[:, 0]) * np.cos(p[:, -1]) + 0.3 * p[:, -1],
                         support=(-1.0, 1.0))


def oracle_linear_unit():
    # (1/2) int int |x-y|^2 / |x-y|^2 over the unit square
    return 0.5


class TestClosedForms:
    def test_constant(self):
        assert gagliardo_phase(ConstantField(1, 2.0), 0.5, 2, UNIT).value == 0.0
        assert local_phase(ConstantField(2, 2.0), 2).value == 0.0

    @pytest.mark.parametrize("refine,rtol", [(0, 1e-2), (1, 1e-3)])
    def test_linear_unit_square(self, refine, rtol):
        spec = QuadratureSpec(mode="tensor", domain=(0.0, 1.0), refine=refine)
        v = LinearField([1.0], support=(0.0, 1.0))
        assert gagliardo_phase(v, 0.5, 2, spec).value == pytest.approx(oracle_linear_unit(), rel=rtol)

    @pytest.mark.parametrize("refine,rtol", [(0, 1e-2), (1, 1e-3)])
    def test_step(self, refine, rtol):
        spec = QuadratureSpec(mode="tensor", domain=(-1.0, 1.0), refine=refine)
        assert gagliardo_phase(STEP, 0.25, 2, spec).value == pytest.approx(STEP_EXACT, rel=rtol)

    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("refine", [0, 1])
    def test_linear_local(self, d, refine):
        c, p = 1.5, 3.0
        v = LinearField([0.0] * (d - 1) + [c])
        exact = c ** p / p * 2.0 ** d
        got = local_phase(v, p, QuadratureSpec(mode="tensor", refine=refine)).value
        assert got == pytest.approx(exact, rel=1e-3 if refine else 1e-2)

    def test_refinement_within_error(self):
        v = LinearField([1.0], support=(0.0, 1.0))
        coarse = gagliardo_phase(v, 0.5, 2, UNIT)
        fine = gagliardo_phase(v, 0.5, 2, QuadratureSpec(mode="tensor", domain=(0, 1), refine=1))
        assert abs(fine.value - coarse.value) < coarse.error

    def test_spectrum_sums_to_value(self):
        for ev in (gagliardo_phase(STEP, 0.25, 2, QuadratureSpec(mode="tensor", domain=(-1, 1))),
                   gagliardo_phase(smooth_field(), 0.5, 2, MC)):
            spec = ev.spectrum()
            assert all(c >= 0 for _, c in spec)
            assert math.fsum(c for _, c in spec) == pytest.approx(ev.value, rel=1e-9)

    def test_symmetry_exploitation(self):
        spec = QuadratureSpec(mode="tensor", h=1.0 / 8.0, half_width=1.0)
        v = smooth_field()
        half = _tensor_nonlocal(v, 0.5, 2.0, spec, None, "g", half=True)
        full = _tensor_nonlocal(v, 0.5, 2.0, spec, None, "g", half=False)
        assert half.value == pytest.approx(full.value, rel=1e-12)

    def test_nonfinite_field(self):
        bad = FunctionField(1, lambda p: np.where(p[:, 0] > 0, np.nan, 0.0))
        with pytest.raises(DivergenceError, match="non-finite"):
            gagliardo_phase(bad, 0.5, 2, UNIT)

    def test_exponent_checks(self):
        with pytest.raises(ParameterError):
            gagliardo_phase(STEP, 1.2, 2, UNIT)
        with pytest.raises(ParameterError):
            local_phase(STEP, 0.5)


class TestHomogeneity:
    @settings(max_examples=10)
    @given(st.floats(0.2, 5.0))
    def test_scaling(self, c):
        v = smooth_field()
        base = gagliardo_phase(v, 0.5, 3.0, MC).value
        scaled = gagliardo_phase(ScaledField(v, c), 0.5, 3.0, MC).value
        assert scaled == pytest.approx(c ** 3.0 * base, rel=1e-10)


class TestWeightedPhases:
    def test_zero_and_one(self):
        v = smooth_field()
        assert weighted_nonlocal_phase(v, ConstantWeight(2, 0.0), 0.5, 2, MC).value == 0.0
        assert weighted_nonlocal_phase(v, None, 0.5, 2, MC).value == 0.0
        assert weighted_local_phase(v, ConstantLocalWeight(2, 0.0), 2).value == 0.0
        one = weighted_nonlocal_phase(v, ConstantWeight(2, 1.0), 0.5, 2.5, MC).value
        assert one == pytest.approx(gagliardo_phase(v, 0.5, 2.5, MC).value, rel=1e-12)
        spec = QuadratureSpec(mode="tensor")
        assert (weighted_local_phase(v, ConstantLocalWeight(2, 1.0), 3, spec).value
                == pytest.approx(local_phase(v, 3, spec).value, rel=1e-12))

    def test_weight_kind_checked(self):
        v = smooth_field()
        with pytest.raises(ParameterError):
            weighted_nonlocal_phase(v, ConstantLocalWeight(2, 1.0), 0.5, 2, MC)
        with pytest.raises(ParameterError):
            weighted_local_phase(v, ConstantWeight(2, 1.0), 2)

    def test_competitor_sub_exact_zero(self):
        g = sub_geometry(1 / 3)
        u = BoundaryDatum(SubCompetitor(g))
        ev = weighted_nonlocal_phase(u, SubWeight(g, 0.1), 0.8, 2, MC, g)
        assert ev.value == 0.0 and ev.nodes > 0
        ev = weighted_local_phase(u, ModelIIWeight(g, 0.1), 2, MC, g)
        assert ev.value == 0.0 and ev.nodes > 0

    def test_competitor_super_exact_zero(self):
        g = super_geometry(1 / 3)
        u = BoundaryDatum(SuperCompetitor(g))
        ev = weighted_nonlocal_phase(u, SuperWeight(g, 0.1), 0.9, 5, MC, g)
        assert ev.value == 0.0 and ev.nodes > 0


class TestModels:
    def test_model_iv_competitor(self):
        g = sub_geometry(1 / 3)
        u = BoundaryDatum(SubCompetitor(g))
        params = ModelParams("IV", 2, 0.4, 0.8, 2, 2, 0.1)
        e = assemble_model(params, u, SubWeight(g, 0.1), MC, g)
        assert e.second.value == 0.0
        assert e.first.value == gagliardo_phase(u, 0.4, 2, MC, g).value > 0

    @pytest.mark.parametrize("model", ["I", "II", "III", "IV"])
    def test_zero_field(self, model):
        s = 1.0 if model in ("I", "III") else 0.4
        t = 1.0 if model in ("I", "II") else 0.8
        params = ModelParams(model, 2, s, t, 2, 2, 0.1)
        w = ConstantLocalWeight(2) if model in ("I", "II") else ConstantWeight(2)
        e = assemble_model(params, ZeroField(2), w, MC)
        assert (e.first.value, e.second.value) == (0.0, 0.0)

    def test_reduces_without_weight(self):
        params = ModelParams("II", 2, 0.4, 1.0, 2, 2, 0.1)
        v = smooth_field()
        e = assemble_model(params, v, None, MC)
        assert e.second.value == 0.0
        assert e.first.value == gagliardo_phase(v, 0.4, 2, MC).value

    def test_wrong_weight_kind(self):
        params = ModelParams("IV", 2, 0.4, 0.8, 2, 2, 0.1)
        with pytest.raises(ParameterError):
            assemble_model(params, smooth_field(), ConstantLocalWeight(2), MC)


class TestLuxemburg:
    def test_single_phase(self):
        assert luxemburg_from_phases([(16.0, 2.0)]) == pytest.approx(4.0, rel=1e-10)

    def test_two_phase(self):
        exact = math.sqrt((1 + math.sqrt(5)) / 2)
        assert luxemburg_from_phases([(1.0, 2.0), (1.0, 4.0)]) == pytest.approx(exact, rel=1e-10)

    def test_zero_and_divergent(self):
        assert luxemburg_from_phases([(0.0, 2.0), (0.0, 3.0)]) == 0.0
        with pytest.raises(DivergenceError):
            luxemburg_from_phases([(math.inf, 2.0)])
        params = ModelParams("IV", 2, 0.4, 0.8, 2, 2, 0.1)
        assert luxemburg_norm(ZeroField(2), params, MC) == 0.0

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1.1, 6), st.floats(1.1, 6))
    def test_defining_equation(self, a, b, p, q):
        lam = luxemburg_from_phases([(a, p), (b, q)])
        assert a * lam ** -p + b * lam ** -q == pytest.approx(1.0, rel=1e-9)

    @given(st.floats(0.1, 10.0))
    def test_norm_homogeneous(self, c):
        a, b, p, q = 2.0, 3.0, 2.0, 4.0
        lam = luxemburg_from_phases([(a, p), (b, q)])
        scaled = luxemburg_from_phases([(a * c ** p, p), (b * c ** q, q)])
        assert scaled == pytest.approx(c * lam, rel=1e-9)


class TestRiesz:
    def test_zero(self):
        assert restricted_riesz(ZeroField(2), np.zeros(2), ConeSpec(ratio=0.25)) == 0.0

    @pytest.mark.parametrize("ratio,extent", [(0.25, 2.0), (1.0, 0.5)])
    def test_polar_oracle_2d(self, ratio, extent):
        # polar coordinates: int_{-a}^{a} extent / cos(theta) dtheta, a = atan(ratio)
        a = math.atan(ratio)
        exact = extent * 2.0 * math.log(1 / math.cos(a) + math.tan(a))
        got = restricted_riesz(ConstantField(2, 1.0), np.zeros(2), ConeSpec(ratio=ratio, extent=extent))
        assert got == pytest.approx(exact, rel=1e-10)

    def test_polar_oracle_3d(self):
        ratio, extent = 0.5, 1.0
        exact = 2 * math.pi * extent * math.log(1 / math.cos(math.atan(ratio)))
        got = restricted_riesz(ConstantField(3, 1.0), np.zeros(3), ConeSpec(ratio=ratio, extent=extent))
        assert got == pytest.approx(exact, rel=1e-8)

    def test_additivity(self):
        g = FunctionField(2, lambda p: np.exp(-np.sum(p ** 2, axis=1)) * (1 + p[:, 1] ** 2))
        x = np.array([0.1, -0.2])
        parts = [restricted_riesz(g, x, ConeSpec(ratio=0.3, orientation=o)) for o in ("up", "down")]
        both = restricted_riesz(g, x, ConeSpec(ratio=0.3, orientation="both"))
        assert both == sum(parts)


def synthetic(exponent, n=12, d=2):
    # shell contributions of int |y|^(exponent) over dyadic annuli, from the radial integral
    gx, gw = np.polynomial.legendre.leggauss(20)
    shells = []
    for j in range(n):
        lo, hi = 2.0 ** (-j - 1), 2.0 ** -j
        r = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
        shells.append((hi, float(np.sum(0.5 * (hi - lo) * gw * r ** exponent * r ** (d - 1)))))
    return EnergyValue(sum(c for _, c in shells), 0.0, height=tuple(shells))


class TestShellDiagnostic:
    def test_examples(self):
        assert shell_diagnostic(synthetic(-2 + 0.5)).verdict == "converges"
        assert shell_diagnostic(synthetic(-2 - 0.5)).verdict == "diverges"
        assert shell_diagnostic(synthetic(-2.0)).verdict == "inconclusive"

    def test_ratio_and_rate(self):
        v = shell_diagnostic(synthetic(-2 + 0.5))
        assert v.ratio == pytest.approx(2 ** -0.5, rel=1e-9)
        assert v.rate == pytest.approx(-0.5, rel=1e-9)

    def test_too_few_scales(self):
        with pytest.raises(ParameterError):
            shell_diagnostic(synthetic(-1.5, n=5))

    def test_local_competitor_threshold(self):
        # |grad u_C| ~ 1/|x_d| on a set of section ~ |x_d|^(d-1-D): finite iff p < d - D
        lam = 0.2
        g = sub_geometry(lam)
        u = SubCompetitor(g)
        spec = QuadratureSpec(mode="mc", samples=20000, bands=14)
        below = shell_diagnostic(local_phase(u, 1.2, spec, g))
        above = shell_diagnostic(local_phase(u, 2.0, spec, g))
        assert below.verdict == "converges"
        assert above.verdict == "diverges"
        dim = math.log(2) / math.log(1 / lam)
        assert below.rate == pytest.approx(-(2 - dim - 1.2), abs=0.1)


class TestConeNeighbourhood:
    @pytest.mark.parametrize("lam", [1 / 3, 0.2])
    def test_threshold(self, lam):
        fp = FractalParams(lam, 1, 12)
        crit = -(2 - fp.dimension)
        assert shell_diagnostic(cone_neighbourhood_integral(crit + 0.2, fp)).verdict == "converges"
        assert shell_diagnostic(cone_neighbourhood_integral(crit - 0.2, fp)).verdict == "diverges"


class TestDeterminism:
    def test_identical_bytes(self):
        g = sub_geometry(1 / 3)
        u = BoundaryDatum(SubCompetitor(g))
        a = gagliardo_phase(u, 0.4, 2, MC, g)
        b = gagliardo_phase(u, 0.4, 2, MC, g)
        assert repr(a.to_dict()) == repr(b.to_dict())
        c = gagliardo_phase(u, 0.4, 2, QuadratureSpec(mode="mc", samples=4000, bands=8, seed=1), g)
        assert c.value != a.value

    def test_adding_bands_keeps_earlier(self):
        g = sub_geometry(1 / 3)
        u = BoundaryDatum(SubCompetitor(g))
        a = gagliardo_phase(u, 0.4, 2, MC, g).height
        b = gagliardo_phase(u, 0.4, 2, MC.refined(2), g).height
        assert b[:len(a) - 1] == a[:-1]
