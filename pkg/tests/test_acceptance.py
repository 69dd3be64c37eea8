"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see only these lines, or
deselect the two long Monte-Carlo criteria with `-m "not slow"`.
"""
import math
import time

import numpy as np
import pytest

from critwave import kac_rice as kr
from critwave.bessel import addition_sums
from critwave.density import pooled_slope
from critwave.series import RegularityModel, SeriesSpec, series_asymptotic, series_direct
from critwave.wave import (empirical_expectation, exponent_fit, find_critical_points,
                           linear_law_per_sample, match_far_field, min_l_max, sample_wave)

K0 = 1 / (2 * math.sqrt(3))


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}")
        assert ok, detail
    return emit


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _identity_errors(mixed_target):
    rng = np.random.default_rng(1)
    worst = {}
    for r in rng.uniform(0.1, 500.0, 100):
        got, exact = addition_sums(float(r))
        exact["l2JJp"] = mixed_target(r)
        for k in got:
            worst[k] = max(worst.get(k, 0.0), abs(got[k] - exact[k]) / abs(exact[k]))
    q_err = max(abs(kr.periodic_integral(lambda x: 1 / (1 + b * np.sin(2 * x))) - math.pi / math.sqrt(1 - b * b))
                for b in (0.0, 0.3, -0.3, 0.9, -0.9))
    return worst, q_err


def test_criterion_01_exact_identities(report):
    # literal statement, including sum eps l^2 J J' = r/4
    with Clock() as c:
        worst, q_err = _identity_errors(lambda r: r / 4)
    ok = all(v < 1e-9 for v in worst.values()) and q_err < 1e-10 and c.elapsed < 5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", periodic {q_err:.1e}, {c.elapsed:.1f}s"
    report("1 exact identities (stated r/4)", ok, detail)


def test_criterion_01_exact_identities_half_radius(report):
    with Clock() as c:
        worst, q_err = _identity_errors(lambda r: r / 2)
    ok = all(v < 1e-9 for v in worst.values()) and q_err < 1e-10 and c.elapsed < 5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", periodic {q_err:.1e}, {c.elapsed:.1f}s"
    report("1 exact identities (r/2)", ok, detail)


def test_criterion_02_kappa_zero(report):
    with Clock() as c:
        k = kr.kappa_sub_half(0.0)
    ok = abs(k - K0) < 1e-6 and c.elapsed < 1
    report("2 kappa(0) by reduction", ok, f"{k!r} vs {K0!r}, {c.elapsed:.3f}s")


def test_criterion_03_closed_form_vs_pipeline(report):
    with Clock() as c:
        gaps = {s: abs(kr.kappa_constant(s).kappa - kr.kappa_asymptotic(s).kappa) for s in (0.6, 1.0, 1.4)}
        left = kr.kappa_sub_half(0.5 - 1e-9)
    lim = math.sqrt(2 / 3) / math.pi
    ok = max(gaps.values()) < 1e-4 and abs(left - lim) < 1e-6 and c.elapsed < 30
    report("3 closed form vs generic pipeline", ok,
           f"max gap {max(gaps.values()):.1e}, left limit {left:.8f} vs {lim:.8f}, {c.elapsed:.1f}s")


def test_criterion_04_five_half_constant(report):
    with Clock() as c:
        k = kr.kappa_constant(2.5).kappa
    ok = abs(k - 0.497339) < 1e-4 and c.elapsed < 5
    report("4 kappa at 5/2", ok, f"{k:.7f}, {c.elapsed:.3f}s")


def test_criterion_05_monotonicity(report):
    with Clock() as c:
        up = [k for _, k in kr.kappa_monotonicity_scan([-4, -2, -1, -0.5, -0.1, 0])]
        down = [k for _, k in kr.kappa_monotonicity_scan([0, 0.1, 0.25, 0.4, 0.49])]
    ok = (all(a < b for a, b in zip(up, up[1:])) and all(a > b for a, b in zip(down, down[1:]))
          and c.elapsed < 60)
    report("5 monotonicity below 1/2", ok, f"up {np.round(up, 5)}, down {np.round(down, 5)}")


def _period_deviation(s, m, mp, r, n=24):
    sp = SeriesSpec(RegularityModel(s), m, mp)
    if s < 0.5:
        scale = r ** (-2 * s)
    elif s == 0.5 and (m - mp) % 2 == 0:
        scale = math.log(r) / r
    else:
        scale = 1 / r
    return float(np.mean([abs(series_direct(sp, r + t).value - series_asymptotic(sp, r + t).value) / scale
                          for t in np.arange(n) * math.pi / n]))


def test_criterion_06_series_asymptotics(report):
    pairs = [(0, 0), (1, 0), (2, 0), (2, 1)]
    problems = []
    with Clock() as c:
        for s in (-1.0, 0.0, 0.25, 0.5, 1.0, 2.0):
            for m, mp in pairs:
                d50, d400 = _period_deviation(s, m, mp, 50.0), _period_deviation(s, m, mp, 400.0)
                if d400 > d50 + 1e-12:
                    problems.append(f"s={s} ({m},{mp}) not decreasing")
                cap = 0.15 if s == 0.5 else 0.05
                if s in (0.0, 1.0, 2.0, 0.5) and d400 >= cap:
                    problems.append(f"s={s} ({m},{mp}) deviation {d400:.3f} at r=400")
    ok = not problems and c.elapsed < 120
    report("6 series asymptotics", ok, "; ".join(problems) or f"all decreasing, {c.elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_07_kac_rice_vs_monte_carlo(report):
    R = 30.0
    with Clock() as c:
        mean, se = empirical_expectation(0.0, R, 200, master_seed=0)
        expect = kr.expected_critical_points(0.0, R, r_min=0.1)
        fits = {s: exponent_fit(s, [10, 20, 40, 80], 100, master_seed=7)[0] for s in (0.0, 2.0, 3.0)}
    windows = {0.0: (1.85, 2.15), 2.0: (1.3, 1.7), 3.0: (0.85, 1.15)}
    agree = abs(mean - expect) < 4 * se
    scaled = abs(mean / R ** 2 - 0.2887) < 4 * se / R ** 2
    fit_ok = all(lo <= fits[s] <= hi for s, (lo, hi) in windows.items())
    ok = agree and scaled and fit_ok and c.elapsed < 45 * 60
    report("7 Kac-Rice vs Monte Carlo", ok,
           f"mean {mean:.2f} +- {se:.2f} vs {expect:.2f}, mean/R^2 {mean / R ** 2:.4f}, "
           f"exponents {', '.join(f'{s}: {e:.3f}' for s, e in fits.items())}, {c.elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_08_linear_law(report):
    dev40, dev80, worst = [], [], 0.0
    with Clock() as c:
        for i in range(20):
            w = sample_wave(6.0, 10_000 + i, min_l_max(80))
            dev40.append(abs(linear_law_per_sample(w, 40.0).ratio - 1))
            pts = find_critical_points(w, 80.0)
            law = linear_law_per_sample(w, 80.0)
            dev80.append(abs(law.ratio - 1))
            rows = match_far_field(w, pts, 40.0)
            if len(rows) != sum(p.r > 40 for p in pts):
                worst = math.inf
            worst = max([worst] + [r[4] for r in rows])
    m40, m80 = float(np.median(dev40)), float(np.median(dev80))
    ok = m80 < m40 and m80 < 0.25 and worst < 0.5 and c.elapsed < 15 * 60
    report("8 linear law and far field", ok,
           f"median |ratio-1| {m40:.4f} at 40, {m80:.4f} at 80, max match distance {worst:.4f}, {c.elapsed:.0f}s")


def test_criterion_09_reduction_vs_monte_carlo(report):
    rng = np.random.default_rng(9)
    misses = []
    with Clock() as c:
        for k, (A, B, C) in enumerate(rng.uniform(-5, 5, (50, 3))):
            q = kr.AbsQuadraticCoeffs(A, B, C)
            red = kr.abs_gaussian_integral(q)
            mc, se = kr.abs_gaussian_montecarlo(q, 10 ** 6, seed=k)
            if abs(red - mc) >= 4 * se:
                misses.append(f"({A:.2f},{B:.2f},{C:.2f}) {(red - mc) / se:.1f} SE")
        e1 = abs(kr.abs_gaussian_integral(kr.AbsQuadraticCoeffs(1, 0, 0)) - 1)
        e2 = abs(kr.abs_gaussian_integral(kr.AbsQuadraticCoeffs(0, 0, 1)) - 4 / math.pi)
    ok = not misses and e1 < 1e-8 and e2 < 1e-8 and c.elapsed < 120
    report("9 Gaussian reduction", ok, "; ".join(misses) or f"50/50 within 4 SE, exact {e1:.1e} {e2:.1e}, {c.elapsed:.1f}s")


def test_criterion_10_regularity_fingerprints(report):
    out = []
    ok = True
    with Clock() as c:
        for s in (1.0, 3.0):
            ds = [sample_wave(s, 300 + 50 * int(s) + k, 1024).density() for k in range(10)]
            for shift, want in ((-1.0, -1), (-0.5, 0), (0.0, 1)):
                slope = pooled_slope(ds, 10, s + shift)
                ok &= abs(slope - want) <= 0.3
                out.append(f"s={s} sigma=s{shift:+.1f}: {slope:+.3f}")
    ok &= c.elapsed < 120
    report("10 dyadic fingerprints", ok, ", ".join(out))


def test_criterion_11_log_regimes(report):
    radii = np.geomspace(100, 1000, 8)
    out = []
    ok = True
    for s, norm in ((1.5, lambda r: r / np.sqrt(np.log(r))), (2.5, lambda r: np.sqrt(np.log(r)))):
        vals = []
        for r0 in radii:
            rr = r0 + np.arange(64) * math.pi / 64
            vals.append(float(np.mean(kr.integrand_direct(s, rr) / norm(rr))))
        spread = max(vals) / min(vals)
        ok &= spread < 1.5 and np.all(np.isfinite(vals))
        out.append(f"s={s}: max/min {spread:.3f}")
    report("11 logarithmic regimes", ok, ", ".join(out))
