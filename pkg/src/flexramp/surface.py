"""Triangulated MinC surface over (f_u, f_d), point queries, DS and contours.

Construction
------------
1. Slice MinC along both axes and merge the two breakpoint-cost lists into
   section levels.
2. For every level, build the horizontal section MaxUR(level, .) over
   [0, MaxDR(level, 0)].
3. Harvest supporting planes from LP duals at section and boundary points.
   MinC is convex, so it is the pointwise maximum of these planes once every
   facet is represented; cells whose vertices disagree with a direct solve
   get an extra plane until all agree.
4. Cut each facet cell by the section levels and fan-triangulate the convex
   pieces. No triangle then straddles a kink of MinC.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from . import grid
from . import lp as lpmod
from .config import DEFAULT, Tolerances
from .grid import GridModel, InfeasibleDispatchError
from .parametric import (
    MAXUR, MINC, FeasibleBounds, PiecewiseLinearFn, SliceSpec,
    construct_slice, feasible_bounds,
)

logger = logging.getLogger(__name__)

__all__ = [
    "CostSurface", "ContourSet", "QueryResult", "OutOfRegionError",
    "TriangulationError", "build_surface", "section_levels", "contour", "query", "ds",
]


class OutOfRegionError(ValueError):
    """Query point lies outside the feasible parameter region."""


class TriangulationError(AssertionError):
    """Internal: a cell could not be triangulated without degenerate pieces."""


class ContourWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Levels
# ---------------------------------------------------------------------------

def section_levels(cost_d, cost_u, rel: float = 1e-9) -> list:
    """Merge two ascending breakpoint-cost lists into section levels.

    Walks both lists in step, taking the smaller head and advancing both on
    a tie. The walk stops as soon as either list is exhausted, so costs
    beyond the shorter list's last entry do not become levels.
    """
    out = []
    i = j = 0
    while i < len(cost_d) and j < len(cost_u):
        a, b = cost_d[i], cost_u[j]
        tie = abs(a - b) <= rel * max(1.0, abs(a), abs(b))
        if tie or a < b:
            lev = a
            i += 1
            if tie:
                j += 1
        else:
            lev = b
            j += 1
        if not out or abs(lev - out[-1]) > rel * max(1.0, abs(lev)):
            out.append(lev)
    return out


def _breakpoint_costs(fn: PiecewiseLinearFn) -> list:
    # kinks plus the far endpoint; the origin is the base cost itself
    return [float(v) for v in fn.values[1:]]


# ---------------------------------------------------------------------------
# Planes
# ---------------------------------------------------------------------------

class _PlaneOracle:
    """Direct MinC solves returning value and supporting plane, with a cache."""

    def __init__(self, model: GridModel):
        self.model = model
        self._lp = grid.build_minc_lp(model, 0.0, 0.0)
        self._up = grid.up_labels(model)
        self._down = grid.down_labels(model)
        self._cache = {}
        self.solves = 0

    def _solve(self, fu, fd):
        self.solves += 1
        eq = {lab: fu for lab in self._up}
        eq.update({lab: fd for lab in self._down})
        return lpmod.solve(self._lp.with_rhs(eq=eq))

    def __call__(self, fu: float, fd: float):
        """Return ``(value, (c0, g_u, g_d))`` at the point, nudging inward on rounding failures."""
        key = (round(fu, 9), round(fd, 9))
        if key in self._cache:
            return self._cache[key]
        fu0, fd0 = max(fu, 0.0), max(fd, 0.0)
        sol = self._solve(fu0, fd0)
        shrink = 1e-10
        while not sol.optimal and shrink < 1e-5:
            fu0, fd0 = max(fu, 0.0) * (1 - shrink), max(fd, 0.0) * (1 - shrink)
            sol = self._solve(fu0, fd0)
            shrink *= 10
        if not sol.optimal:
            raise InfeasibleDispatchError(f"MinC({fu}, {fd}) is {sol.status}")
        gu = sum(sol.eq_dual(lab) for lab in self._up)
        gd = sum(sol.eq_dual(lab) for lab in self._down)
        v = sol.objective
        out = (v, (v - gu * fu0 - gd * fd0, gu, gd))
        self._cache[key] = out
        return out


def _add_plane(planes: list, p, tol: Tolerances, scale: float) -> bool:
    st = tol.slope_tol(p[1], p[2]) * 10
    vt = tol.val_tol(scale)
    for q in planes:
        if abs(q[1] - p[1]) <= st and abs(q[2] - p[2]) <= st and abs(q[0] - p[0]) <= vt:
            return False
    planes.append(tuple(float(x) for x in p))
    return True


def _model_value(planes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return np.max(planes[:, 0][None, :] + pts @ planes[:, 1:].T, axis=1)


def _cells(region, planes: np.ndarray, eps: float) -> list:
    """Convex cell of each plane: region points where that plane attains the maximum."""
    cells = []
    for k in range(len(planes)):
        poly = region
        for j in range(len(planes)):
            if j == k or len(poly) == 0:
                continue
            # plane_j - plane_k <= 0
            a = planes[j, 1:] - planes[k, 1:]
            b = planes[k, 0] - planes[j, 0]
            if np.allclose(a, 0.0):
                if b < -eps:
                    poly = np.zeros((0, 2))
                continue
            poly = geo.clip(poly, a, b, eps * 1e-3)
        cells.append(poly)
    return cells


# ---------------------------------------------------------------------------
# Surface
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QueryResult:
    cost: float
    non_interesting: bool = False
    triangle: Optional[int] = None


@dataclass(frozen=True)
class CostSurface:
    """Triangulated MinC over the feasible (f_u, f_d) region.

    Attributes
    ----------
    vertices : ndarray (n, 3)
        ``(f_u, f_d, cost)`` rows; ``cost`` is a direct LP solve.
    triangles : ndarray (m, 3)
        Vertex indices, counter-clockwise.
    strip : ndarray (m,)
        Index of the level strip holding each triangle. Strip 0 is the
        zero-distortion region (cost equal to ``base_cost``).
    levels : ndarray
        Section levels, ascending; ``levels[0] == base_cost``.
    sublevel : list of ndarray
        Convex polygons ``{MinC <= levels[i]}``; nested and used for strip search.
    region : ndarray
        Feasible parameter region (convex polygon, counter-clockwise).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    strip: np.ndarray
    levels: np.ndarray
    sublevel: tuple
    region: np.ndarray
    base_cost: float
    theta_max: float
    argmax: tuple
    free_up: float = 0.0
    free_down: float = 0.0
    bounds: Optional[FeasibleBounds] = field(default=None, compare=False, repr=False)
    sections: tuple = field(default=(), compare=False, repr=False)
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def empty(self) -> bool:
        return len(self.triangles) == 0

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.theta_max), abs(self.base_cost))

    @property
    def _eps(self) -> float:
        span = float(np.max(np.abs(self.region))) if len(self.region) else 1.0
        return 1e-9 * max(1.0, span)

    def triangle_points(self) -> np.ndarray:
        """Triangles as an (m, 3, 2) coordinate array."""
        return self.vertices[self.triangles][:, :, :2]

    def in_region(self, f_u: float, f_d: float) -> bool:
        if self.empty:
            return abs(f_u) <= self._eps and abs(f_d) <= self._eps
        return geo.contains(self.region, (f_u, f_d), self._eps * 10)

    def lookup(self, f_u: float, f_d: float) -> QueryResult:
        """Locate ``(f_u, f_d)`` and interpolate its cost.

        Raises
        ------
        OutOfRegionError
            If the point is outside the feasible region.
        """
        if not (np.isfinite(f_u) and np.isfinite(f_d)):
            raise ValueError("query point must be finite")
        if not self.in_region(f_u, f_d):
            raise OutOfRegionError(f"({f_u}, {f_d}) is outside the feasible ramping region")
        if self.empty:
            return QueryResult(self.base_cost, True)
        eps = self._eps * 10
        p = (f_u, f_d)
        # smallest i with p inside sublevel i; sublevels are nested
        lo, hi = 0, len(self.sublevel)
        while lo < hi:
            mid = (lo + hi) // 2
            if geo.contains(self.sublevel[mid], p, eps):
                hi = mid
            else:
                lo = mid + 1
        if lo == 0 and len(self.sublevel[0]) >= 3:
            return QueryResult(self.base_cost, True)
        strip = lo if lo < len(self.sublevel) else len(self.sublevel)
        idx = np.flatnonzero(self.strip == strip)
        k, w = self._locate(idx, p)
        if k is None:
            # boundary round-off: fall back to every triangle
            k, w = self._locate(np.arange(len(self.triangles)), p)
        cost = float(w @ self.vertices[self.triangles[k], 2])
        ni = bool(self.strip[k] == 0)
        return QueryResult(self.base_cost if ni else cost, ni, int(k))

    def _locate(self, idx, p):
        if len(idx) == 0:
            return None, None
        tri = self.vertices[self.triangles[idx]][:, :, :2]
        w = geo.barycentric(tri, np.array([p], dtype=float))[:, 0, :]
        worst = w.min(axis=1)
        best = int(np.argmax(worst))
        if worst[best] < -1e-7:
            return None, None
        return int(idx[best]), w[best]

    def query(self, f_u: float, f_d: float) -> float:
        return self.lookup(f_u, f_d).cost

    def ds(self, f_u: float, f_d: float) -> float:
        """Distortion cost: MinC(f_u, f_d) - MinC(0, 0)."""
        return self.query(f_u, f_d) - self.base_cost

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "base_cost": self.base_cost,
            "theta_max": self.theta_max,
            "argmax": list(self.argmax),
            "free_up": self.free_up,
            "free_down": self.free_down,
            "region": self.region.tolist(),
            "levels": self.levels.tolist(),
            "sublevel": [np.asarray(s).tolist() for s in self.sublevel],
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "strip": self.strip.tolist(),
            "stats": dict(self.stats),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CostSurface":
        return cls(
            vertices=np.array(data["vertices"], dtype=float).reshape(-1, 3),
            triangles=np.array(data["triangles"], dtype=int).reshape(-1, 3),
            strip=np.array(data["strip"], dtype=int),
            levels=np.array(data["levels"], dtype=float),
            sublevel=tuple(np.array(s, dtype=float).reshape(-1, 2) for s in data["sublevel"]),
            region=np.array(data["region"], dtype=float).reshape(-1, 2),
            base_cost=float(data["base_cost"]),
            theta_max=float(data["theta_max"]),
            argmax=tuple(data["argmax"]),
            free_up=float(data.get("free_up", 0.0)),
            free_down=float(data.get("free_down", 0.0)),
            stats=dict(data.get("stats", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CostSurface":
        return cls.from_dict(json.loads(text))


def query(surface: CostSurface, f_u: float, f_d: float) -> float:
    return surface.query(f_u, f_d)


def ds(surface: CostSurface, f_u: float, f_d: float) -> float:
    return surface.ds(f_u, f_d)


def _empty_surface(bounds: FeasibleBounds) -> CostSurface:
    msg = "feasible ramping region has no interior; surface is the single point (0, 0)"
    warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return CostSurface(
        vertices=np.array([[0.0, 0.0, bounds.base_cost]]),
        triangles=np.zeros((0, 3), dtype=int),
        strip=np.zeros(0, dtype=int),
        levels=np.array([bounds.base_cost]),
        sublevel=(np.zeros((0, 2)),),
        region=bounds.region,
        base_cost=bounds.base_cost,
        theta_max=bounds.base_cost,
        argmax=(0.0, 0.0),
        free_up=bounds.free_up,
        free_down=bounds.free_down,
        bounds=bounds,
        stats={"empty": True},
    )


def build_surface(model: GridModel, tol: Tolerances = DEFAULT,
                  bounds: Optional[FeasibleBounds] = None) -> CostSurface:
    """Triangulate MinC over the feasible ramping region.

    Raises
    ------
    BaseInfeasibleError
        If the dispatch is infeasible even with zero ramping requirements.
    TriangulationError
        Internal consistency failure (should not happen for a convex PWL surface).
    """
    bounds = bounds or feasible_bounds(model, tol)
    region = bounds.region
    base = bounds.base_cost
    area = geo.polygon_area(region)
    span = float(np.max(np.abs(region))) if len(region) else 0.0
    if len(region) < 3 or area <= tol.area_rel * max(1.0, span) ** 2:
        return _empty_surface(bounds)
    eps = 1e-9 * max(1.0, span)
    scale = max(1.0, abs(bounds.theta_max), abs(base))
    vt = tol.val_tol(scale)

    # preprocess: boundary slices and section levels
    max_u, max_d = bounds.max_up, bounds.max_down
    slice_d = construct_slice(model, SliceSpec(MINC, "f_d", 0.0, 0.0, max_d), tol) \
        if max_d > eps else None
    slice_u = construct_slice(model, SliceSpec(MINC, "f_u", 0.0, 0.0, max_u), tol) \
        if max_u > eps else None
    cost_d = _breakpoint_costs(slice_d) if slice_d else []
    cost_u = _breakpoint_costs(slice_u) if slice_u else []
    levels = section_levels(cost_d, cost_u)
    if not levels or abs(levels[0] - base) > vt:
        levels = [base] + [lv for lv in levels if lv > base + vt]
    levels = np.array(levels)

    # sections: MaxUR(level, .) over [0, MaxDR(level, 0)]
    sections = []
    for lev in levels:
        try:
            top = grid.max_down_ramp(model, lev, 0.0)
        except InfeasibleDispatchError:
            top = grid.max_down_ramp(model, lev + vt, 0.0)
        if top > eps:
            sec = construct_slice(model, SliceSpec(MAXUR, "f_d", lev, 0.0, top), tol)
            pts = np.column_stack([sec.values, sec.breakpoints])
        else:
            pts = np.array([[grid.max_up_ramp(model, lev, 0.0), 0.0]])
        sections.append(pts)

    # planes from duals at section points, segment midpoints and region corners
    oracle = _PlaneOracle(model)
    seeds = [tuple(p) for p in region]
    for fn, axis in ((slice_d, 1), (slice_u, 0)):
        if fn is None:
            continue
        xs = np.concatenate([fn.breakpoints, 0.5 * (fn.breakpoints[1:] + fn.breakpoints[:-1])])
        for x in xs:
            seeds.append((0.0, x) if axis == 1 else (x, 0.0))
    for pts in sections:
        seeds += [tuple(p) for p in pts]
        seeds += [tuple(p) for p in 0.5 * (pts[1:] + pts[:-1])]
    planes = []
    for p in seeds:
        _add_plane(planes, oracle(*p)[1], tol, scale)

    # refinement: every cell vertex must agree with a direct solve
    for it in range(200):
        P = np.array(planes)
        cells = _cells(region, P, eps)
        added = False
        for k, cell in enumerate(cells):
            cell = geo.clean_polygon(cell, eps)
            if len(cell) < 3 or geo.polygon_area(cell) <= tol.area_rel * area:
                continue
            probe = list(cell) + [cell.mean(axis=0)]
            model_vals = _model_value(P, np.array(probe))
            for q, mv in zip(probe, model_vals):
                v, plane = oracle(*q)
                if v > mv + vt:
                    added |= _add_plane(planes, plane, tol, scale)
        if not added:
            break
    else:
        raise TriangulationError("plane refinement did not converge")
    P = np.array(planes)
    cells = [geo.clean_polygon(c, eps) for c in _cells(region, P, eps)]

    # sublevel polygons {max planes <= level}
    sublevel = []
    for lev in levels:
        poly = region
        for c0, gu, gd in P:
            if abs(gu) <= tol.slope_tol() and abs(gd) <= tol.slope_tol():
                continue
            poly = geo.clip(poly, (gu, gd), lev - c0, eps * 1e-3)
        sublevel.append(geo.clean_polygon(poly, eps))

    # cut cells by the level strips and fan-triangulate
    bands = [(-np.inf, levels[0])] + list(zip(levels[:-1], levels[1:])) + [(levels[-1], np.inf)]
    pieces = []
    for k, cell in enumerate(cells):
        if len(cell) < 3 or geo.polygon_area(cell) <= tol.area_rel * area:
            continue
        c0, gu, gd = P[k]
        if abs(gu) <= tol.slope_tol(gu) and abs(gd) <= tol.slope_tol(gd):
            # flat facet: cost equals c0 on the whole cell
            s = int(np.searchsorted(levels, c0 - vt, side="left"))
            pieces.append((cell, min(s, len(bands) - 1)))
            continue
        for s, (lo, hi) in enumerate(bands):
            poly = cell
            if np.isfinite(hi):
                poly = geo.clip(poly, (gu, gd), hi - c0, eps * 1e-3)
            if np.isfinite(lo) and len(poly):
                poly = geo.clip(poly, (-gu, -gd), c0 - lo, eps * 1e-3)
            poly = geo.clean_polygon(poly, eps)
            if len(poly) >= 3 and geo.polygon_area(poly) > tol.area_rel * area:
                pieces.append((poly, s))

    verts, index, tris, strips = [], {}, [], []

    def vid(p):
        key = (round(float(p[0]), 7), round(float(p[1]), 7))
        if key not in index:
            index[key] = len(verts)
            verts.append((float(p[0]), float(p[1]), oracle(float(p[0]), float(p[1]))[0]))
        return index[key]

    for poly, s in pieces:
        if geo.polygon_area(poly) < 0:
            poly = poly[::-1]
        for a, b, c in geo.fan(poly):
            tri_area = geo.polygon_area(np.array([a, b, c]))
            if tri_area <= tol.area_rel * area:
                raise TriangulationError("degenerate triangle in a convex piece")
            tris.append((vid(a), vid(b), vid(c)))
            strips.append(s)

    covered = sum(geo.polygon_area(p) for p, _ in pieces)
    if abs(covered - area) > 1e-6 * area:
        raise TriangulationError(f"pieces cover {covered} of region area {area}")

    return CostSurface(
        vertices=np.array(verts, dtype=float),
        triangles=np.array(tris, dtype=int),
        strip=np.array(strips, dtype=int),
        levels=levels,
        sublevel=tuple(sublevel),
        region=region,
        base_cost=base,
        theta_max=bounds.theta_max,
        argmax=bounds.argmax,
        free_up=bounds.free_up,
        free_down=bounds.free_down,
        bounds=bounds,
        sections=tuple(sections),
        stats={"planes": len(planes), "solves": oracle.solves, "levels": len(levels)},
    )


# ---------------------------------------------------------------------------
# Contours
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContourSet:
    """Level curves of MinC: ``polylines[i]`` is the graph of MaxUR(levels[i], .).

    Each polyline is an (m, 2) array of ``(f_u, f_d)`` points ordered by
    increasing ``f_d``.
    """

    levels: np.ndarray
    polylines: tuple
    slices: tuple = field(default=(), compare=False, repr=False)
    solves: int = 0

    def __len__(self):
        return len(self.levels)

    def segment_counts(self) -> list:
        return [max(len(p) - 1, 0) for p in self.polylines]

    def to_csv(self, i: int) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f_u", "f_d"])
        for fu, fd in self.polylines[i]:
            w.writerow([f"{fu:.9g}", f"{fd:.9g}"])
        return buf.getvalue()

    @staticmethod
    def read_csv(text: str) -> np.ndarray:
        rows = list(csv.DictReader(io.StringIO(text)))
        return np.array([[float(r["f_u"]), float(r["f_d"])] for r in rows]).reshape(-1, 2)


def contour(model: GridModel, k: int, tol: Tolerances = DEFAULT,
            bounds: Optional[FeasibleBounds] = None) -> ContourSet:
    """Level curves at ``k`` equally spaced costs from MinC(0, 0) to the maximum.

    Raises
    ------
    ValueError
        If ``k < 2``.
    BaseInfeasibleError
        If the model is infeasible at zero ramping.
    """
    if k < 2:
        raise ValueError("need at least two contour levels")
    bounds = bounds or feasible_bounds(model, tol)
    base, top = bounds.base_cost, bounds.theta_max
    if top - base <= tol.val_tol(top):
        warnings.warn("cost surface is flat; no contour levels", ContourWarning, stacklevel=2)
        return ContourSet(np.zeros(0), ())
    levels = np.linspace(base, top, k)
    polys, slices, solves = [], [], 0
    for lev in levels:
        try:
            width = grid.max_down_ramp(model, lev, 0.0)
        except InfeasibleDispatchError:
            lev_eval = lev + tol.val_tol(lev)
            width = grid.max_down_ramp(model, lev_eval, 0.0)
        else:
            lev_eval = lev
        solves += 1
        if width <= 1e-12:
            polys.append(np.array([[grid.max_up_ramp(model, lev_eval, 0.0), 0.0]]))
            slices.append(None)
            solves += 1
            continue
        fn = construct_slice(model, SliceSpec(MAXUR, "f_d", lev_eval, 0.0, width), tol)
        solves += fn.solves
        polys.append(np.column_stack([fn.values, fn.breakpoints]))
        slices.append(fn)
    return ContourSet(levels, tuple(polys), tuple(slices), solves)
