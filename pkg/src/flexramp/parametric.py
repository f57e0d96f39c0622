"""Exact one-parameter slices of MinC / MaxUR / MaxDR and the feasible-region bounds.

Slices are built by tangent intersection: solve the LP at both ends of an
interval, read the parameter's dual as the slope, intersect the two tangent
lines and test the LP value at the intersection. A match means the function
on the interval is exactly the upper (convex) or lower (concave) envelope of
the two tangents; otherwise both halves are refined.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import grid
from . import lp as lpmod
from .config import DEFAULT, Tolerances
from .geometry import clean_polygon
from .grid import GridModel, InfeasibleDispatchError

logger = logging.getLogger(__name__)

MINC, MAXUR, MAXDR = "MinC", "MaxUR", "MaxDR"
CONVEX, CONCAVE = "convex", "concave"
NONDECREASING, NONINCREASING = "nondecreasing", "nonincreasing"


class EndpointInfeasibleError(RuntimeError):
    pass


class BaseInfeasibleError(RuntimeError):
    """The model has no feasible dispatch even without ramping requirements."""


class SliceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Continuous piecewise-linear function given by breakpoints and values."""

    breakpoints: np.ndarray
    values: np.ndarray
    orientation: str = CONVEX
    monotonicity: str = NONDECREASING
    solves: int = field(default=0, compare=False)
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float).ravel()
        y = np.asarray(self.values, dtype=float).ravel()
        if x.size == 0 or x.size != y.size:
            raise ValueError("breakpoints and values must be non-empty and equally long")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", y)

    @property
    def lo(self) -> float:
        return float(self.breakpoints[0])

    @property
    def hi(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def n_segments(self) -> int:
        return self.breakpoints.size - 1

    @property
    def kinks(self) -> np.ndarray:
        """Interior breakpoints (where the slope changes)."""
        return self.breakpoints[1:-1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-9 * max(1.0, abs(self.hi), abs(self.lo))
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            raise ValueError(f"argument outside [{self.lo}, {self.hi}]")
        out = np.interp(x, self.breakpoints, self.values)
        return float(out) if out.ndim == 0 else out

    def shape_violations(self, tol: Tolerances = DEFAULT) -> list:
        s = self.slopes
        bad = []
        if s.size > 1:
            ds = np.diff(s)
            lim = tol.slope_tol(*s) * 10
            if self.orientation == CONVEX and np.any(ds < -lim):
                bad.append("slopes not nondecreasing (convexity)")
            if self.orientation == CONCAVE and np.any(ds > lim):
                bad.append("slopes not nonincreasing (concavity)")
        vt = tol.val_tol(np.max(np.abs(self.values)))
        dv = np.diff(self.values)
        if self.monotonicity == NONDECREASING and np.any(dv < -vt):
            bad.append("values decrease")
        if self.monotonicity == NONINCREASING and np.any(dv > vt):
            bad.append("values increase")
        return bad

    def to_csv(self) -> str:
        """CSV text with columns breakpoint, value, left_slope (empty at the first point)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["breakpoint", "value", "left_slope"])
        s = self.slopes
        for i, (x, y) in enumerate(zip(self.breakpoints, self.values)):
            w.writerow([f"{x:.9g}", f"{y:.9g}", "" if i == 0 else f"{s[i - 1]:.9g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, orientation=CONVEX, monotonicity=NONDECREASING):
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([float(r["breakpoint"]) for r in rows], [float(r["value"]) for r in rows],
                   orientation, monotonicity)


@dataclass(frozen=True)
class SliceSpec:
    """Which one-parameter slice to build.

    ``function`` is MinC, MaxUR or MaxDR. ``vary`` names the free argument:
    ``"f_u"``/``"f_d"`` for MinC, ``"f_d"``/``"theta"`` for MaxUR and
    ``"f_u"``/``"theta"`` for MaxDR. ``fixed`` is the other argument
    (``None`` means an unlimited budget).
    """

    function: str
    vary: str
    fixed: Optional[float]
    lo: float
    hi: float

    def __post_init__(self):
        allowed = {MINC: ("f_u", "f_d"), MAXUR: ("f_d", "theta"), MAXDR: ("f_u", "theta")}
        if self.function not in allowed:
            raise ValueError(f"unknown function {self.function!r}")
        if self.vary not in allowed[self.function]:
            raise ValueError(f"{self.function} cannot vary {self.vary!r}")
        if not self.lo < self.hi:
            raise ValueError("slice interval needs lo < hi")
        if self.vary == "theta" and self.fixed is None:
            raise ValueError("the fixed ramping argument cannot be None")

    @property
    def orientation(self) -> str:
        return CONVEX if self.function == MINC else CONCAVE

    @property
    def monotonicity(self) -> str:
        if self.function == MINC or self.vary == "theta":
            return NONDECREASING
        return NONINCREASING


class SliceEvaluator:
    """Evaluates a slice's value and slope with one LP solve per call."""

    def __init__(self, model: GridModel, spec: SliceSpec):
        self.model = model
        self.spec = spec
        self.solves = 0
        f, v = spec.function, spec.vary
        up, down = grid.up_labels(model), grid.down_labels(model)
        self._fixed_rhs = {}
        self._vary_labels = None  # None: the budget row is the parameter
        if f == MINC:
            self._base = grid.build_minc_lp(model, 0.0, 0.0)
            fixed, self._vary_labels = (down, up) if v == "f_u" else (up, down)
            self._fixed_rhs = {lab: float(spec.fixed or 0.0) for lab in fixed}
        else:
            build = grid.build_maxur_lp if f == MAXUR else grid.build_maxdr_lp
            other = down if f == MAXUR else up
            if v == "theta":
                self._base = build(model, 0.0, spec.fixed)
            else:
                self._base = build(model, spec.fixed, 0.0)
                self._vary_labels = other

    def solve(self, x: float) -> lpmod.LpSolution:
        if x < 0:
            raise grid.NegativeParameterError(f"{self.spec.vary} must be >= 0")
        self.solves += 1
        eq, ub = dict(self._fixed_rhs), {}
        if self._vary_labels is None:
            ub["budget"] = x
        else:
            eq.update({lab: x for lab in self._vary_labels})
        return lpmod.solve(self._base.with_rhs(eq=eq, ub=ub))

    def __call__(self, x: float):
        """Return ``(value, slope)`` or ``None`` when the LP is not optimal."""
        sol = self.solve(x)
        if not sol.optimal:
            return None
        if self._vary_labels is None:
            slope = sol.ub_dual("budget")
        else:
            slope = sum(sol.eq_dual(lab) for lab in self._vary_labels)
        return sol.objective, slope


def _simplify(xs, ys, tol: Tolerances, width: float):
    """Drop duplicate and collinear breakpoints."""
    pts = sorted(zip(xs, ys))
    merged = [pts[0]]
    for x, y in pts[1:]:
        if x - merged[-1][0] <= tol.dedup_rel * width:
            continue
        merged.append((x, y))
    if len(merged) == 1 and len(pts) > 1:
        merged.append(pts[-1])
    if merged[-1][0] != pts[-1][0]:
        merged[-1] = pts[-1]
    out = [merged[0]]
    for i in range(1, len(merged) - 1):
        x0, y0 = out[-1]
        x1, y1 = merged[i]
        x2, y2 = merged[i + 1]
        s_left = (y1 - y0) / (x1 - x0)
        s_right = (y2 - y1) / (x2 - x1)
        # collinear when the middle point lies on the chord within value tolerance
        chord = y0 + (y2 - y0) * (x1 - x0) / (x2 - x0)
        if abs(y1 - chord) <= tol.val_tol(max(abs(y0), abs(y1), abs(y2))) \
                or abs(s_left - s_right) <= tol.slope_tol(s_left, s_right):
            continue
        out.append((x1, y1))
    out.append(merged[-1])
    return [p[0] for p in out], [p[1] for p in out]


def construct_slice(model: GridModel, spec: SliceSpec, tol: Tolerances = DEFAULT,
                    evaluator: Optional[Callable] = None) -> PiecewiseLinearFn:
    """Build the exact piecewise-linear slice described by ``spec``.

    Raises
    ------
    EndpointInfeasibleError
        If the LP at ``spec.lo`` or ``spec.hi`` is not optimal.
    """
    ev = evaluator or SliceEvaluator(model, spec)
    lo, hi = float(spec.lo), float(spec.hi)
    width = hi - lo
    ends = []
    for x in (lo, hi):
        r = ev(x)
        if r is None:
            raise EndpointInfeasibleError(f"{spec.function} slice infeasible at {spec.vary}={x}")
        ends.append(r)
    convex = spec.orientation == CONVEX
    pts = {lo: ends[0][0], hi: ends[1][0]}
    notes = []

    # explicit stack instead of recursion; entries carry their depth
    stack = [(lo, ends[0][0], ends[0][1], hi, ends[1][0], ends[1][1], 0)]
    while stack:
        a, fa, sa, b, fb, sb, depth = stack.pop()
        vt = tol.val_tol(max(abs(fa), abs(fb)))
        if b - a <= max(tol.min_width_rel * width, 0.0) or depth >= tol.max_depth:
            msg = f"{spec.function} slice: stopped refining [{a:.9g}, {b:.9g}] at depth {depth}"
            notes.append(msg)
            warnings.warn(msg, SliceWarning, stacklevel=2)
            continue
        if abs(sa - sb) <= tol.slope_tol(sa, sb):
            m = 0.5 * (a + b)
            r = ev(m)
            if r is not None and abs(r[0] - 0.5 * (fa + fb)) <= vt:
                continue
            if r is None:
                raise lpmod.NumericalFailureError(f"interior point {m} infeasible")
            pts[m] = r[0]
            stack.append((a, fa, sa, m, r[0], r[1], depth + 1))
            stack.append((m, r[0], r[1], b, fb, sb, depth + 1))
            continue
        x = (fb - fa + sa * a - sb * b) / (sa - sb)
        if not np.isfinite(x):
            x = 0.5 * (a + b)
        near = tol.dedup_rel * width
        if x <= a + near or x >= b - near:
            # tangent at one end passes through the other end: affine on [a, b]
            chord = fa + (fb - fa) * 0.5
            m = 0.5 * (a + b)
            r = ev(m)
            if r is not None and abs(r[0] - chord) <= vt:
                continue
            if r is None:
                raise lpmod.NumericalFailureError(f"interior point {m} infeasible")
            pts[m] = r[0]
            stack.append((a, fa, sa, m, r[0], r[1], depth + 1))
            stack.append((m, r[0], r[1], b, fb, sb, depth + 1))
            continue
        c = fa + sa * (x - a)
        r = ev(x)
        if r is None:
            raise lpmod.NumericalFailureError(f"interior point {x} infeasible")
        fx, sx = r
        pts[x] = fx
        if abs(fx - c) <= vt:
            continue
        # an exact tangent model would have fx >= c (convex) / fx <= c (concave)
        if (convex and fx < c - vt) or (not convex and fx > c + vt):
            logger.debug("tangent bound violated at %s: %s vs %s", x, fx, c)
        stack.append((a, fa, sa, x, fx, sx, depth + 1))
        stack.append((x, fx, sx, b, fb, sb, depth + 1))

    xs, ys = _simplify(list(pts), [pts[k] for k in pts], tol, width)
    return PiecewiseLinearFn(np.array(xs), np.array(ys), spec.orientation, spec.monotonicity,
                             solves=getattr(ev, "solves", 0), notes=tuple(notes))


def point_fn(x: float, y: float, orientation=CONCAVE, monotonicity=NONINCREASING):
    """Degenerate single-point function (used when a boundary domain collapses)."""
    return PiecewiseLinearFn(np.array([x]), np.array([y]), orientation, monotonicity)


@dataclass(frozen=True)
class FeasibleBounds:
    """Upper/lower boundary curves of the (f_u, f_d) parameter region.

    ``upper_u`` maps f_d to the largest feasible f_u (MaxUR with unlimited
    budget); ``lower_u`` maps f_d to the largest f_u reachable at the base
    cost (the free-ramping boundary). ``upper_d``/``lower_d`` mirror them.
    """

    base_cost: float
    upper_u: PiecewiseLinearFn
    upper_d: PiecewiseLinearFn
    lower_u: PiecewiseLinearFn
    lower_d: PiecewiseLinearFn
    theta_max: float
    argmax: tuple
    region: np.ndarray  # convex polygon (f_u, f_d), counter-clockwise

    @property
    def max_up(self) -> float:
        return float(self.upper_u.values[0])

    @property
    def max_down(self) -> float:
        return float(self.upper_d.values[0])

    @property
    def free_up(self) -> float:
        return float(self.lower_u.values[0])

    @property
    def free_down(self) -> float:
        return float(self.lower_d.values[0])

    def contains(self, f_u: float, f_d: float, tol: float = 1e-9) -> bool:
        if f_u < -tol or f_d < -tol or f_d > self.max_down + tol:
            return False
        return f_u <= self.upper_u(min(max(f_d, 0.0), self.max_down)) + tol

    def is_free(self, f_u: float, f_d: float, tol: float = 1e-9) -> bool:
        """True inside the zero-distortion (non-interesting) region."""
        if f_u < -tol or f_d < -tol or f_d > self.free_down + tol:
            return False
        return f_u <= self.lower_u(min(max(f_d, 0.0), self.free_down)) + tol


def _boundary_fn(model, function, budget, width, tol) -> PiecewiseLinearFn:
    if width <= 0:
        v = grid.max_up_ramp(model, budget, 0.0) if function == MAXUR \
            else grid.max_down_ramp(model, budget, 0.0)
        return point_fn(0.0, v)
    vary = "f_d" if function == MAXUR else "f_u"
    return construct_slice(model, SliceSpec(function, vary, budget, 0.0, width), tol)


def feasible_bounds(model: GridModel, tol: Tolerances = DEFAULT) -> FeasibleBounds:
    """Boundary curves of the parameter region and the maximal MinC over it.

    The maximum of MinC is taken over the vertices of the (convex) feasible
    polygon, which is exact because MinC is convex.
    """
    base = lpmod.solve(grid.build_minc_lp(model, 0.0, 0.0))
    if not base.optimal:
        raise BaseInfeasibleError(f"MinC(0, 0) is {base.status}")
    base_cost = base.objective

    max_u = grid.max_up_ramp(model, None, 0.0)
    max_d = grid.max_down_ramp(model, None, 0.0)
    upper_u = _boundary_fn(model, MAXUR, None, max_d, tol)
    upper_d = _boundary_fn(model, MAXDR, None, max_u, tol)
    # zero-distortion boundary: budget equal to the base cost
    budget = base_cost
    try:
        free_d = grid.max_down_ramp(model, budget, 0.0)
    except InfeasibleDispatchError:
        # rounding in the base solve; relax by the value tolerance only
        budget = base_cost + tol.val_tol(base_cost)
        free_d = grid.max_down_ramp(model, budget, 0.0)
    lower_u = _boundary_fn(model, MAXUR, budget, free_d, tol)
    free_u = grid.max_up_ramp(model, budget, 0.0)
    lower_d = _boundary_fn(model, MAXDR, budget, free_u, tol)

    eps = 1e-9 * max(1.0, max_u, max_d)
    pts = [(0.0, 0.0)]
    pts += [(fu, fd) for fd, fu in zip(upper_u.breakpoints, upper_u.values)]
    pts += [(0.0, max_d)]
    region = clean_polygon(pts, eps)

    # candidate vertices: region corners plus both boundary curves' breakpoints
    cands = [tuple(p) for p in region]
    cands += [(fu, fd) for fu, fd in zip(upper_d.breakpoints, upper_d.values)]
    best, arg = -math.inf, (0.0, 0.0)
    for fu, fd in cands:
        try:
            v = grid.min_cost(model, max(fu, 0.0), max(fd, 0.0))
        except InfeasibleDispatchError:
            v = grid.min_cost(model, max(fu, 0.0) * (1 - 1e-9), max(fd, 0.0) * (1 - 1e-9))
        if v > best + tol.val_tol(v):
            best, arg = v, (float(fu), float(fd))
    return FeasibleBounds(base_cost, upper_u, upper_d, lower_u, lower_d, best, arg, region)
