import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lavgap.errors import ParameterError, SingularInputError
from lavgap.geometry import (DIAMOND, RHO, RHO_PM, ConeSpec, CutoffSpec, cone_slab,
                             cone_slab_volume, dpsi, eval_eta, eval_rho, eval_rho_pm, grad_rho,
                             in_barrier, in_cone, necklace_enumerate, necklace_index, psi,
                             sub_distance, sub_geometry, super_geometry, NOT_IN_NECKLACE)

SUB = sub_geometry(1 / 3)
SUPER = super_geometry(1 / 3)


class TestProfile:
    def test_psi_values(self):
        assert psi(-1.0) == 1.0 and psi(2.0) == 0.0
        assert psi(0.5) == pytest.approx(0.5, abs=1e-15)

    @given(st.floats(-2, 3), st.floats(-2, 3))
    def test_monotone_bounded(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert 0.0 <= psi(hi) <= psi(lo) <= 1.0

    @given(st.floats(0.0, 5.0), st.floats(0.01, 3.0), st.floats(-1.0, 10.0))
    def test_derivative_bound(self, r0, width, t):
        c = CutoffSpec(r0, r0 + width)
        assert abs(c.derivative(t)) <= 2.0 / width + 1e-12
        h = 1e-6 * width
        fd = (c(t + h) - c(t - h)) / (2 * h)
        assert fd == pytest.approx(c.derivative(t), abs=1e-4 / width)

    def test_rejects_inverted(self):
        with pytest.raises(ParameterError):
            CutoffSpec(2.0, 1.0)

    @given(st.floats(-3, 3))
    def test_dpsi_matches(self, u):
        h = 1e-7
        assert (psi(u + h) - psi(u - h)) / (2 * h) == pytest.approx(dpsi(u), abs=1e-5)


class TestBarrier:
    def test_examples(self):
        assert in_barrier(np.array([0.5, 0.1]), SUB) == 1
        assert in_barrier(np.array([0.0, 0.01]), SUB) == 0
        assert in_barrier(np.array([0.5, -0.1]), SUB) == -1

    @given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), st.floats(0.5, 6))
    def test_tau_monotone(self, a, b, tau):
        x = np.array([a, b])
        if in_barrier(x, SUB.with_tau(tau)) != 0:
            assert in_barrier(x, SUB.with_tau(tau * 1.5)) == in_barrier(x, SUB.with_tau(tau))

    @given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
    def test_sign_matches_half_space(self, a, b):
        flag = in_barrier(np.array([a, b]), SUB)
        assert flag == 0 or flag == np.sign(b)

    def test_geometry_validation(self):
        from lavgap.fractal import FractalParams
        from lavgap.geometry import BarrierGeometry
        with pytest.raises(ParameterError):
            BarrierGeometry(FractalParams(0.3, 2), 4.0, 2, "sub")
        with pytest.raises(ParameterError):
            BarrierGeometry(FractalParams(0.3, 1), -1.0, 2, "sub")


class TestRho:
    def _point(self, ratio, xd=0.05):
        # xbar = 0 sits 1/6 from C_{1/3}; move along x_d to hit the ratio
        return np.array([0.5 + ratio * xd, xd])

    def test_examples(self):
        assert eval_rho(self._point(1.0), SUB) == 1.0
        assert eval_rho(self._point(5.0), SUB) == 0.0
        assert eval_rho(self._point(3.0), SUB) == pytest.approx(0.5, abs=1e-9)

    def test_rho_pm_examples(self):
        assert eval_rho_pm(np.array([0.5, -0.2]), SUB, 1) == 0.0
        assert eval_rho_pm(np.array([0.5, 0.3]), SUB, 1) == 1.0
        assert eval_rho_pm(self._point(1.25), SUB, 1) == pytest.approx(0.5, abs=1e-9)

    def test_apex_is_singular(self):
        with pytest.raises(SingularInputError):
            eval_rho(np.array([0.5, 0.0]), SUB)

    @given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99))
    def test_sandwich(self, a, b):
        x = np.array([[a, b]])
        if b == 0.0:
            return
        ratio = float(sub_distance(x, SUB)[0]) / abs(b)
        r = float(eval_rho(x, SUB)[0])
        assert (1.0 if ratio <= 2 else 0.0) <= r <= (1.0 if ratio <= 4 else 0.0)
        for sign in (1, -1):
            rp = float(eval_rho_pm(x, SUB, sign)[0])
            inner = 1.0 if (sign * b > 0 and ratio <= 0.5) else 0.0
            outer = 1.0 if (sign * b > 0 and ratio <= 2) else 0.0
            assert inner <= rp <= outer

    def test_gradient_bound_and_support(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-0.9, 0.9, (4000, 2))
        g = np.linalg.norm(grad_rho(pts, SUB), axis=1)
        ratio = sub_distance(pts, SUB) / np.abs(pts[:, 1])
        outside = (ratio < 2) | (ratio > 4)
        assert np.all(g[outside] == 0.0)
        # |d/dx rho| <= 2/(r1 - r0) * |grad ratio| <= (1 + ratio)/|x_d|
        assert np.all(g * np.abs(pts[:, 1]) <= 1.5 * (1 + 4.0) + 1e-9)

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(6)
        pts = []
        while len(pts) < 10:
            x = rng.uniform(-0.9, 0.9, 2)
            r = sub_distance(x[None], SUB)[0] / abs(x[1])
            if 2.2 < r < 3.8:
                pts.append(x)
        pts = np.array(pts)
        h = 1e-7
        for x in pts:
            fd = [(eval_rho(x + h * e, SUB) - eval_rho(x - h * e, SUB)) / (2 * h)
                  for e in np.eye(2)]
            np.testing.assert_allclose(grad_rho(x, SUB), fd, rtol=1e-4, atol=1e-4)


class TestEta:
    def test_examples(self):
        assert eval_eta(np.zeros(2)) == 1.0
        assert eval_eta(np.array([0.9, 0.0])) == 0.0
        assert eval_eta(np.array([0.75, 0.0])) == pytest.approx(0.5, abs=1e-12)

    @given(st.lists(st.floats(-1.2, 1.2), min_size=2, max_size=3))
    def test_sandwich(self, xs):
        x = np.array(xs)
        e = eval_eta(x)
        inner = float(np.all(np.abs(x) < 4 / 6))
        outer = float(np.all(np.abs(x) < 5 / 6))
        assert inner <= e <= outer


class TestNecklace:
    def test_examples(self):
        elems = necklace_enumerate(SUPER, 0, include_outer=False)
        assert len(elems) == 1
        e = elems[0]
        assert (e.level, e.index) == (0, 1)
        assert (e.a, e.b) == pytest.approx((-1 / 6, 1 / 6), abs=1e-15)
        np.testing.assert_allclose(e.vertex_upper, [0, 1 / 6], atol=1e-15)
        np.testing.assert_allclose(e.vertex_lower, [0, -1 / 6], atol=1e-15)

    @pytest.mark.parametrize("level", range(6))
    def test_counts(self, level):
        elems = necklace_enumerate(SUPER, level)
        assert sum(e.level == level for e in elems) == 2 ** level
        assert sum(e.level == -1 for e in elems) == 2

    def test_diameter_scaling(self):
        elems = necklace_enumerate(SUPER, 6, include_outer=False)
        for e in elems:
            assert e.b - e.a == pytest.approx((1 / 3) ** e.level / 3, rel=1e-9)

    def test_requires_super(self):
        with pytest.raises(ParameterError):
            necklace_enumerate(SUB, 2)

    def test_disjoint_and_complementary(self):
        # every point lies in at most one diamond, and index() agrees with contains()
        elems = necklace_enumerate(SUPER, 5)
        rng = np.random.default_rng(7)
        pts = rng.uniform(-1, 1, (20000, 2))
        pts[:, 0] *= 0.2
        hits = np.array([e.contains(pts) for e in elems])
        assert np.all(hits.sum(axis=0) <= 1)
        level, index = necklace_index(pts, SUPER)
        owner = np.full(len(pts), -1)
        for i, e in enumerate(elems):
            owner[hits[i]] = i
        for n in np.nonzero(owner >= 0)[0]:
            e = elems[owner[n]]
            assert (level[n], index[n]) == (e.level, e.index)
        # points outside every enumerated diamond are in the barrier or in deeper diamonds
        free = owner < 0
        assert np.all((level[free] == NOT_IN_NECKLACE) | (level[free] > 5))
        barrier = in_barrier(pts, SUPER)
        assert np.all((barrier == 1) == (level == NOT_IN_NECKLACE))


class TestCones:
    def test_examples(self):
        k = ConeSpec()
        x = np.zeros(2)
        assert not in_cone(x, x, k)
        assert in_cone(x, np.array([0.1, 1.0]), k)
        assert not in_cone(x, np.array([0.3, 1.0]), k)
        both = ConeSpec(orientation="both")
        assert in_cone(x, np.array([0.1, -1.0]), both)
        assert not in_cone(x, np.array([0.1, -1.0]), k)

    @pytest.mark.parametrize("d", [2, 3])
    def test_slabs_tile(self, d):
        vol = sum(cone_slab_volume(j, d) for j in range(0, 60))
        full = math.pi ** ((d - 1) / 2) / math.gamma((d + 1) / 2) * 0.25 ** (d - 1) * 2 ** d / d
        assert vol == pytest.approx(full, rel=1e-12)
        assert cone_slab(0) == (1.0, 2.0)
        for j in range(1, 10):
            assert cone_slab(j)[1] == cone_slab(j - 1)[0]

    def test_slab_volume_mc(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform([-0.5, 0.0], [0.5, 2.0], (400000, 2))
        hit = in_cone(np.zeros(2), pts, ConeSpec()) & (pts[:, 1] >= 1.0)
        assert 2.0 * hit.mean() == pytest.approx(cone_slab_volume(0, 2), rel=0.02)

    def test_rejects_orientation(self):
        with pytest.raises(ParameterError):
            ConeSpec(orientation="sideways")


def test_cutoff_constants():
    assert (RHO.r0, RHO.r1) == (2.0, 4.0)
    assert (RHO_PM.r0, RHO_PM.r1) == (0.5, 2.0)
    assert (DIAMOND.r0, DIAMOND.r1) == (0.25, 0.5)
