"""Brute-force reference checks shared by the property and acceptance suites."""

import numpy as np

from flexramp import grid
from flexramp.parametric import MAXUR, SliceSpec, construct_slice


def region_grid(bounds, n=25):
    """n x n grid over the bounding box, keeping points inside the feasible region."""
    fus = np.linspace(0.0, bounds.max_up, n)
    fds = np.linspace(0.0, bounds.max_down, n)
    return fus, fds


def shape_violations_on_grid(model, bounds, n=25, rel=1e-6):
    """Monotonicity and midpoint-convexity failures of MinC along grid rows and columns."""
    scale = max(1.0, abs(bounds.theta_max))
    tol = rel * scale
    fus, fds = region_grid(bounds, n)
    values = np.full((n, n), np.nan)
    for i, fu in enumerate(fus):
        for j, fd in enumerate(fds):
            if bounds.contains(fu, fd, tol=-1e-9):
                values[i, j] = grid.min_cost(model, fu, fd)
    bad = []
    for axis in (0, 1):
        v = values if axis == 0 else values.T
        for row in v.T:
            ok = row[~np.isnan(row)]
            # rows are contiguous: the region is convex and contains the axes
            if ok.size >= 2 and np.any(np.diff(ok) < -tol):
                bad.append(("monotone", axis))
            if ok.size >= 3 and np.any(np.diff(ok, 2) < -tol):
                bad.append(("convex", axis))
    return bad, int(np.sum(~np.isnan(values)))


def _strictly_increasing(model, bounds, fu, fd, h):
    if fu + h >= bounds.upper_u(fd) or fd + h >= bounds.upper_d(fu):
        return False
    c = grid.min_cost(model, fu, fd)
    du = grid.min_cost(model, fu + h, fd) - c
    dd = grid.min_cost(model, fu, fd + h) - c
    return du > 1e-6 * h * max(1.0, c) and dd > 1e-6 * h * max(1.0, c)


def interesting_points(model, bounds, n, rng, h=1e-3):
    """Random points where MinC strictly increases in both arguments.

    A random level theta is drawn first; candidates are the breakpoints of
    the level curve MaxUR(theta, .) plus random points on its segments. When
    MinC is a maximum of one function per argument, the strictly increasing
    set is just the curve of level-set corners, which uniform sampling of
    the plane would miss.
    """
    out = []
    for _ in range(200 * n):
        if len(out) == n:
            return out
        theta = rng.uniform(bounds.base_cost, bounds.theta_max)
        width = grid.max_down_ramp(model, theta, 0.0)
        if width <= h:
            continue
        fn = construct_slice(model, SliceSpec(MAXUR, "f_d", theta, 0.0, width))
        xs = list(fn.breakpoints)
        xs += list(rng.uniform(fn.breakpoints[:-1], fn.breakpoints[1:]))
        cands = [(float(fn(x)), float(x)) for x in xs]
        rng.shuffle(cands)
        for fu, fd in cands:
            if _strictly_increasing(model, bounds, fu, fd, h):
                out.append((fu, fd))
                break
    raise RuntimeError("could not sample the interesting region")


def inverse_identity_residuals(model, fu, fd):
    """Residuals of the six inverse identities at one point (theta = MinC there)."""
    minc, maxur, maxdr = grid.min_cost, grid.max_up_ramp, grid.max_down_ramp
    theta = minc(model, fu, fd)
    return {
        "MaxUR(MinC(fu,fd),fd)=fu": (maxur(model, theta, fd) - fu, fu),
        "MinC(MaxUR(theta,fd),fd)=theta": (minc(model, maxur(model, theta, fd), fd) - theta, theta),
        "MaxDR(MinC(fu,fd),fu)=fd": (maxdr(model, theta, fu) - fd, fd),
        "MinC(fu,MaxDR(theta,fu))=theta": (minc(model, fu, maxdr(model, theta, fu)) - theta, theta),
        "MaxUR(theta,MaxDR(theta,fu))=fu": (maxur(model, theta, maxdr(model, theta, fu)) - fu, fu),
        "MaxDR(theta,MaxUR(theta,fd))=fd": (maxdr(model, theta, maxur(model, theta, fd)) - fd, fd),
    }
