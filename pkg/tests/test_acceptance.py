"""Acceptance gate: ten criteria at their stated tolerances.

Each test prints one PASS/FAIL line (also listed in the terminal summary).
"""

import time

import numpy as np

from flexramp import grid, risk
from flexramp.config import DEFAULT as TOL
from flexramp.parametric import MINC, SliceSpec, construct_slice, feasible_bounds
from flexramp.risk import EmpiricalErrorDistribution, ingest_samples, risk_dispatch
from flexramp.surface import build_surface

from conftest import MODELS, interior_points
from oracles import interesting_points, shape_violations_on_grid, inverse_identity_residuals


def report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_01_golden_dispatch(threebus):
    t0 = time.perf_counter()
    sol = grid.solve_dispatch(threebus, 0.0, 0.0)
    elapsed = time.perf_counter() - t0
    ok = (sol.status == "optimal"
          and np.all(np.abs(sol.g[:, 0] - [100, 0, 10]) <= TOL.feas)
          and np.all(np.abs(sol.g[:, 1] - [100, 0, 20]) <= TOL.feas)
          and abs(sol.objective - 12400.0) <= 1e-6 * 12400.0
          and elapsed < 1.0)
    report(1, ok, f"g0={sol.g[:, 0].round(9).tolist()} g1={sol.g[:, 1].round(9).tolist()} "
                  f"cost={sol.objective} in {elapsed:.3f}s")


def free_width(fn):
    """Extent of the leading zero-slope piece and the slope after it."""
    s = fn.slopes
    assert abs(s[0]) <= TOL.slope_tol(*s), "first piece is not flat"
    return fn.breakpoints[1], s[1]


def test_02_free_ramp_widths(threebus):
    up = construct_slice(threebus, SliceSpec(MINC, "f_u", 0.0, 0.0, 60.0))
    down = construct_slice(threebus, SliceSpec(MINC, "f_d", 0.0, 0.0, 70.0))
    wu, su = free_width(up)
    wd, sd = free_width(down)
    ok = (abs(wu - 30.0) <= 1e-7 * 60 and abs(wd - 40.0) <= 1e-7 * 70
          and su > TOL.slope_tol(su) and sd > TOL.slope_tol(sd))
    report(2, ok, f"flat up to f_u={wu}, f_d={wd}; next slopes {su}, {sd}")


def test_03_triangle_count(threebus):
    n = build_surface(threebus).n_triangles
    report(3, n == 29, f"{n} triangles")


def test_04_surface_argmax(threebus):
    b = feasible_bounds(threebus)
    ok = np.allclose(b.argmax, (50.0, 70.0), atol=1e-7)
    report(4, ok, f"argmax {b.argmax}, theta_max {b.theta_max}")


def test_05_oracle_equivalence(models):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = {}
    for name in MODELS:
        m = models[name]
        s = build_surface(m)
        scale = max(1.0, abs(s.theta_max))
        errs = [abs(s.query(*p) - grid.min_cost(m, *p)) / scale
                for p in interior_points(s, 200, rng)]
        worst[name] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = all(w <= 1e-6 for w in worst.values()) and elapsed < 120
    report(5, ok, f"worst relative error {worst} in {elapsed:.1f}s")


def test_06_monotone_convex_grid(models):
    detail, ok = {}, True
    for name in MODELS:
        m = models[name]
        bad, n_points = shape_violations_on_grid(m, feasible_bounds(m), n=25)
        detail[name] = f"{len(bad)} violations over {n_points} points"
        ok &= not bad
    report(6, ok, str(detail))


def test_07_inverse_identities(models):
    rng = np.random.default_rng(77)
    worst, ok = {}, True
    for name in MODELS:
        m = models[name]
        b = feasible_bounds(m)
        tol = 1e-6 * max(1.0, abs(b.theta_max))
        pts = interesting_points(m, b, 20, rng)
        w = max(abs(res) for fu, fd in pts for res, _ in inverse_identity_residuals(m, fu, fd).values())
        worst[name] = w
        ok &= len(pts) == 20 and w <= tol
    report(7, ok, f"worst residual {worst}")


# moments of the three reference bands, shrunk to each model's ramping scale
RISK_SCALE = {"threebus": 15.0 / 300.0, "garver6": 20.0 / 300.0}
SKEW = {"low": 1.5, "mid": -1.2, "high": -2.0}


def model_distributions(name, seed=0):
    rng = np.random.default_rng(seed)
    k = RISK_SCALE[name]
    return {band: EmpiricalErrorDistribution(
        risk.skewed_samples(mean * k, std * k, 2000, SKEW[band], rng), band)
        for band, (mean, std) in risk.REFERENCE_MOMENTS.items()}


def test_08_risk_dominance(models):
    cases, failures = 0, []
    for name in MODELS:
        s = build_surface(models[name])
        tol = TOL.val_tol(s.theta_max)
        for band, d in model_distributions(name).items():
            prev = -np.inf
            for p in (0.80, 0.90, 0.95, 0.99):
                res = risk_dispatch(s, d, p)
                g = res.greedy["cost"]
                cases += 1
                if g is None or res.cost > g + tol or res.cost < prev - tol:
                    failures.append((name, band, p, res.cost, g))
                prev = res.cost
    report(8, not failures, f"{cases} cases, failures {failures}")


def test_09_ingestion_statistics():
    rng = np.random.default_rng(99)
    recs = risk.synthetic_records(100_000, rng=rng)
    m = ingest_samples(recs, risk.REFERENCE_CAPACITY)
    worst = 0.0
    for band, (mean, std) in risk.REFERENCE_MOMENTS.items():
        d = m.band(band)
        worst = max(worst, abs(d.mean - mean) / abs(mean), abs(d.std - std) / std)
    report(9, worst <= 0.02, f"worst relative moment error {worst:.2e}")


def test_10_linear_search_complexity(models):
    runs, failures = 0, []
    for name in MODELS:
        s = build_surface(models[name])
        for band, d in model_distributions(name, seed=1).items():
            for p in (0.5, 0.8, 0.9, 0.95, 0.99):
                for steps in (50, 200, 800):
                    res = risk_dispatch(s, d, p, (d.b - d.a) / steps, compare_greedy=False)
                    bound = (max(d.b, 0) - min(d.a, 0)) / res.delta + res.outer_iterations
                    runs += 1
                    if res.checks > bound:
                        failures.append((name, band, p, steps, res.checks, bound))
    report(10, not failures, f"{runs} instrumented runs, failures {failures}")
