"""Small convex-polygon helpers used by the surface triangulation."""

from __future__ import annotations

import numpy as np


def polygon_area(poly) -> float:
    """Signed area (positive for counter-clockwise vertex order)."""
    poly = np.asarray(poly, dtype=float).reshape(-1, 2)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clean_polygon(pts, eps: float) -> np.ndarray:
    """Drop repeated and collinear vertices of a convex polygon."""
    out = []
    for p in np.asarray(pts, dtype=float).reshape(-1, 2):
        if not out or np.hypot(*(p - out[-1])) > eps:
            out.append(p)
    while len(out) > 1 and np.hypot(*(out[0] - out[-1])) <= eps:
        out.pop()
    changed = True
    while changed and len(out) > 2:
        changed = False
        for i in range(len(out)):
            p0, p1, p2 = out[i - 1], out[i], out[(i + 1) % len(out)]
            cross = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
            if abs(cross) <= eps * max(1.0, np.hypot(*(p2 - p0))):
                out.pop(i)
                changed = True
                break
    return np.array(out, dtype=float).reshape(-1, 2)


def clip(poly: np.ndarray, a, b: float, eps: float = 0.0) -> np.ndarray:
    """Intersect a convex polygon with the half-plane ``a . x <= b``."""
    if len(poly) == 0:
        return poly
    a = np.asarray(a, dtype=float)
    s = poly @ a - b
    if np.all(s <= eps):
        return poly
    if np.all(s > eps):
        return np.zeros((0, 2))
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        pi, pj, si, sj = poly[i], poly[j], s[i], s[j]
        if si <= eps:
            out.append(pi)
        if (si <= eps) != (sj <= eps):
            t = si / (si - sj)
            out.append(pi + t * (pj - pi))
    return np.array(out, dtype=float).reshape(-1, 2)


def contains(poly: np.ndarray, p, eps: float) -> bool:
    """Point-in-convex-polygon test (counter-clockwise order) with slack ``eps``."""
    if len(poly) == 0:
        return False
    if len(poly) < 3:
        # degenerate polygon: distance to its vertices/segment
        if len(poly) == 1:
            return bool(np.hypot(*(np.asarray(p) - poly[0])) <= eps)
        d = poly[1] - poly[0]
        t = np.clip(np.dot(np.asarray(p) - poly[0], d) / max(np.dot(d, d), 1e-300), 0, 1)
        return bool(np.hypot(*(poly[0] + t * d - p)) <= eps)
    e = np.roll(poly, -1, axis=0) - poly
    rel = np.asarray(p, dtype=float) - poly
    cross = e[:, 0] * rel[:, 1] - e[:, 1] * rel[:, 0]
    return bool(np.all(cross >= -eps * np.hypot(e[:, 0], e[:, 1])))


def fan(poly: np.ndarray) -> list:
    """Fan triangulation of a convex polygon from its first vertex."""
    return [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]


def barycentric(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Barycentric weights of ``pts`` (m x 2) in each triangle of ``tri`` (k x 3 x 2).

    Returns an array of shape (k, m, 3).
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    v0 = b - a
    v1 = c - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    rel = pts[None, :, :] - a[:, None, :]
    w1 = (rel[..., 0] * v1[:, None, 1] - rel[..., 1] * v1[:, None, 0]) / det[:, None]
    w2 = (v0[:, None, 0] * rel[..., 1] - v0[:, None, 1] * rel[..., 0]) / det[:, None]
    return np.stack([1.0 - w1 - w2, w1, w2], axis=-1)
