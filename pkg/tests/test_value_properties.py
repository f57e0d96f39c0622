import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexramp import grid

from conftest import MODELS
from oracles import interesting_points, shape_violations_on_grid, inverse_identity_residuals


@pytest.mark.parametrize("name", MODELS)
def test_min_cost_is_monotone_and_convex_on_grid(models, bounds, name):
    bad, n_points = shape_violations_on_grid(models[name], bounds[name], n=15)
    assert n_points > 100
    assert bad == []


@pytest.mark.parametrize("name", MODELS)
def test_inverse_identities_hold_in_interesting_region(models, bounds, name):
    m, b = models[name], bounds[name]
    rng = np.random.default_rng(21)
    for fu, fd in interesting_points(m, b, 8, rng):
        for label, (res, scale) in inverse_identity_residuals(m, fu, fd).items():
            assert abs(res) <= 1e-6 * max(1.0, abs(b.theta_max)), (label, fu, fd)


@settings(max_examples=25, deadline=None)
@given(fd=st.floats(0.0, 70.0), t1=st.floats(0.0, 1.0), t2=st.floats(0.0, 1.0))
def test_max_up_ramp_is_concave_and_nondecreasing_in_budget(threebus, bounds, fd, t1, t2):
    b = bounds["threebus"]
    lo = grid.min_cost(threebus, 0.0, fd)
    a, c = sorted((lo + t1 * (b.theta_max - lo), lo + t2 * (b.theta_max - lo)))
    f = lambda th: grid.max_up_ramp(threebus, th, fd)
    tol = 1e-6 * b.theta_max
    assert f(c) >= f(a) - 1e-7
    assert f(0.5 * (a + c)) >= 0.5 * (f(a) + f(c)) - tol


@settings(max_examples=25, deadline=None)
@given(fu=st.floats(0.0, 50.0), s1=st.floats(0.0, 1.0), s2=st.floats(0.0, 1.0))
def test_max_down_ramp_is_concave_and_nonincreasing_in_up_requirement(garver6, bounds, fu, s1, s2):
    b = bounds["garver6"]
    theta = 0.5 * (b.base_cost + b.theta_max)
    top = grid.max_up_ramp(garver6, theta, 0.0)
    a, c = sorted((s1 * top, s2 * top))
    f = lambda x: grid.max_down_ramp(garver6, theta, x)
    assert f(c) <= f(a) + 1e-7
    assert f(0.5 * (a + c)) >= 0.5 * (f(a) + f(c)) - 1e-6
