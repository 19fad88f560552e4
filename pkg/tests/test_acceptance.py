"""Acceptance criteria 1-9, each at its stated tolerance and time budget."""

import json
import math
import time

import numpy as np
import pytest

from lavgap.cli import main
from lavgap.energy import QuadratureSpec, cone_neighbourhood_integral, gagliardo_phase, shell_diagnostic
from lavgap.experiments import (SweepSpec, certificate_sound, finiteness_scan,
                                riesz_suite, riesz_telescope_check, run_gap_sweep)
from lavgap.fields import ConstantField, FunctionField, LinearField
from lavgap.fractal import (CantorMeasure, FractalParams, ball_mass_slope, measure_ball,
                            measure_integrate, neighborhood_slope)
from lavgap.regimes import (CRITICAL, SUB, SUPER, ModelParams, classify_regime, conjugate,
                            gap_condition, random_params, window_consistency)

LAMBDAS = (1 / 3, 1 / 4)


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def test_criterion_1_mass(criterion):
    worst = 0.0
    with Clock() as clk:
        for lam in (0.1, 0.2, 0.25, 1 / 3, 0.45):
            for m in (1, 2):
                for k in range(1, 13):
                    mu = CantorMeasure(FractalParams(lam, m, k))
                    masses = [mu.total_mass(), measure_ball(np.zeros(m), 2.0, mu)]
                    if m == 1 or k <= 9:
                        one = (lambda x: np.ones(len(x)))
                        masses.append(measure_integrate(one, mu))
                    worst = max(worst, max(abs(x - 1.0) for x in masses))
    ok = worst <= 1e-12 and clk.elapsed < 1.0
    criterion(1, ok, f"max |mass - 1| = {worst:.2e}, {clk.elapsed:.2f} s")
    assert ok


def test_criterion_2_scaling(criterion):
    rng = np.random.default_rng(2024)
    ball_err, nbhd_err = 0.0, 0.0
    with Clock() as clk:
        for lam in LAMBDAS:
            p = FractalParams(lam, 1, 12)
            mu = CantorMeasure(p)
            for c in mu.sample(rng, 20):
                ball_err = max(ball_err, abs(ball_mass_slope(c, mu) - p.dimension))
            for m in (1, 2):
                q = FractalParams(lam, m, 12)
                nbhd_err = max(nbhd_err, abs(neighborhood_slope(q) - (m - q.dimension)))
    ok = ball_err <= 0.05 and nbhd_err <= 0.1 and clk.elapsed < 10.0
    criterion(2, ok, f"ball slope error {ball_err:.3f}, neighbourhood slope error "
                     f"{nbhd_err:.3f}, {clk.elapsed:.1f} s")
    assert ok


def test_criterion_3_closed_forms(criterion):
    cases = [
        (ConstantField(1, 0.7), 0.5, (0.0, 1.0), 0.0),
        (LinearField([1.0], support=(0.0, 1.0)), 0.5, (0.0, 1.0), 0.5),
        (FunctionField(1, lambda p: (p[:, 0] > 0).astype(float), support=(-1.0, 1.0)), 0.25,
         (-1.0, 1.0), 0.5 * (16.0 - 8.0 * math.sqrt(2.0))),
    ]
    errs = {0: 0.0, 1: 0.0}
    with Clock() as clk:
        for v, s, dom, exact in cases:
            for refine in (0, 1):
                val = gagliardo_phase(v, s, 2, QuadratureSpec(mode="tensor", domain=dom,
                                                               refine=refine)).value
                err = abs(val - exact) / exact if exact else abs(val)
                errs[refine] = max(errs[refine], err)
    ok = errs[0] <= 1e-2 and errs[1] <= 1e-3 and clk.elapsed < 30.0
    criterion(3, ok, f"relative error {errs[0]:.2e} default, {errs[1]:.2e} refined, "
                     f"{clk.elapsed:.1f} s")
    assert ok


def test_criterion_4_corollary(criterion):
    details, ok = [], True
    with Clock() as clk:
        for lam in LAMBDAS:
            fp = FractalParams(lam, 1, 12)
            crit = -(2 - fp.dimension)
            far = [shell_diagnostic(cone_neighbourhood_integral(crit + off, fp)).verdict
                   for off in (0.2, -0.2)]
            grid = crit + 0.05 + 0.1 * np.arange(-4, 4)
            rates = [shell_diagnostic(cone_neighbourhood_integral(sg, fp)).rate for sg in grid]
            flips = [(float(a), float(b)) for a, b, ra, rb in zip(grid, grid[1:], rates, rates[1:])
                     if ra > 0 >= rb]
            good = (far == ["converges", "diverges"] and len(flips) == 1
                    and flips[0][0] - 0.1 <= crit <= flips[0][1] + 0.1)
            ok = ok and good
            details.append(f"lam={lam:.3f} flip={tuple(round(x, 3) for x in flips[0]) if flips else None}"
                           f" threshold={crit:.3f}")
    ok = ok and clk.elapsed < 60.0
    criterion(4, ok, "; ".join(details) + f", {clk.elapsed:.1f} s")
    assert ok


GAP_PARAMS = ModelParams("IV", 2, 0.4, 0.8, 2, 2, 0.1)


def test_criterion_5_mechanism(criterion):
    with Clock() as clk:
        rep = run_gap_sweep(SweepSpec(GAP_PARAMS, 0.65))
    checks = {
        "second(u_C) == 0": rep.competitor_second == 0.0,
        "first converges": rep.competitor_verdict == "converges",
        "plateau drift < 5%": rep.plateau_drift < 0.05,
        "floor": rep.c0 > rep.floor and not rep.decay_last3,
        "certificate": rep.certificate and certificate_sound(rep),
    }
    ok = all(checks.values()) and clk.elapsed < 600.0
    failed = [k for k, v in checks.items() if not v]
    criterion(5, ok, f"c0={rep.c0:.4g} floor={rep.floor:.3g} nu={rep.nu:.4g} "
                     f"drift={rep.plateau_drift:.4f} failed={failed}, {clk.elapsed:.1f} s")
    assert ok


SCANS = {
    "sub": (ModelParams("IV", 2, 0.7, 0.8, 2, 2, 0.0), np.round(np.arange(0.40, 0.81, 0.05), 2)),
    "super": (ModelParams("IV", 2, 0.9, 0.95, 5, 2, 0.1), np.round(np.arange(0.45, 0.81, 0.05), 2)),
}


def test_criterion_6_scan(criterion):
    ok, details = True, []
    for name, (params, grid) in SCANS.items():
        with Clock() as clk:
            rep = finiteness_scan(params, grid)
        good = rep.bracketed and rep.step <= 0.05 + 1e-12 and clk.elapsed < 600.0
        ok = ok and good
        details.append(f"{name}: flip {rep.flip} threshold {rep.threshold:.3f} "
                       f"({clk.elapsed:.1f} s)")
    criterion(6, ok, "; ".join(details))
    assert ok


def _rows_verbatim(rng, count=1000):
    # model IV formulas at t = 1 / s = 1 / s = t = 1 against the stored rows
    bad = 0
    for _ in range(count):
        s, t = rng.uniform(0.01, 0.99, 2)
        p, q = rng.uniform(1.05, 8.0, 2)
        a = rng.uniform(0.0, 2.0)
        d = int(rng.choice([2, 3]))
        for model, ss, tt in (("II", s, 1.0), ("III", 1.0, t), ("I", 1.0, 1.0)):
            params = ModelParams(model, d, ss, tt, p, q, a)
            kind = classify_regime(params).kind
            if kind == CRITICAL:
                continue
            if kind == SUB:
                iv = tt * q > ss * p + a
            else:
                iv = conjugate(q) * (tt - (d + a) / q) > conjugate(p) * (ss - d / p)
            bad += gap_condition(params).holds != iv
    return bad


def test_criterion_7_consistency(criterion):
    rng = np.random.default_rng(7)
    failures, outside = {}, 0
    with Clock() as clk:
        for model in ("I", "II", "III", "IV"):
            for regime in (SUB, SUPER):
                n = 0
                for _ in range(1000):
                    params = random_params(rng, model, regime)
                    if not window_consistency(params, resolution=2000).consistent:
                        n += 1
                        tq = params.t * params.q
                        if not params.s * params.p + params.alpha < tq <= 1.0 + params.alpha:
                            outside += 1
                failures[f"{model}/{regime[:3]}"] = n
        reductions = _rows_verbatim(rng)
    total = sum(failures.values())
    ok = total == 0 and reductions == 0 and clk.elapsed < 5.0
    criterion(7, ok, f"failures {failures} (outside sp+alpha < tq <= 1+alpha: {outside}), "
                     f"reduction mismatches {reductions}, {clk.elapsed:.1f} s")
    assert ok


def test_criterion_8_riesz(criterion):
    with Clock() as clk:
        checks = riesz_suite(count=100)
        lhs = riesz_telescope_check(LinearField([0.0, 1.0]), [0.0])[0].lhs
    value_ok = abs(lhs - 14.0 / 9.0) <= 1e-6
    ok = all(c.passed for c in checks) and value_ok and clk.elapsed < 300.0
    parts = [f"{c.name} C={c.constant.value:.4g} ({'ok' if c.passed else 'violated'})"
             for c in checks]
    criterion(8, ok, ", ".join(parts) + f", LHS(y_d) - 14/9 = {lhs - 14 / 9:.1e}, "
                                        f"{clk.elapsed:.1f} s")
    assert ok


def test_criterion_9_determinism(criterion, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["sweep", "--out", str(out)]) == 0
        outs.append(out)
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
               for f in ("sweep.csv", "sweep.json"))
    cert = json.loads((outs[0] / "sweep.json").read_text())["result"]["certificate"]
    criterion(9, same, f"sweep.csv and sweep.json byte-identical across two runs "
                       f"(certificate {cert})")
    assert same
