"""2D convex polygon clipping and area, used for screen-space occlusion tests.

Sutherland-Hodgman against a convex clip polygon; areas by the shoelace
formula. Polygons are (N, 2) float arrays in either winding.
"""

from __future__ import annotations

import numpy as np


def signed_area(poly: np.ndarray) -> float:
    p = np.asarray(poly, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    return abs(signed_area(poly))


def ensure_ccw(poly: np.ndarray) -> np.ndarray:
    poly = np.asarray(poly, dtype=np.float64)
    return poly if signed_area(poly) >= 0 else poly[::-1]


def clip_polygon(subject, clip) -> np.ndarray:
    """Clip `subject` against convex `clip`; returns (M, 2), possibly empty."""
    out = [np.asarray(p, dtype=np.float64) for p in subject]
    clip = ensure_ccw(clip)
    n = len(clip)
    for i in range(n):
        if not out:
            return np.empty((0, 2))
        a = clip[i]
        b = clip[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]

        def inside(p):
            return ex * (p[1] - a[1]) - ey * (p[0] - a[0]) >= 0.0

        def intersect(p, q):
            dx, dy = q[0] - p[0], q[1] - p[1]
            denom = ex * dy - ey * dx
            if denom == 0.0:
                return q
            t = (ex * (a[1] - p[1]) - ey * (a[0] - p[0])) / denom
            return np.array([p[0] + t * dx, p[1] + t * dy])

        prev = out[-1]
        prev_in = inside(prev)
        new_out = []
        for cur in out:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    new_out.append(intersect(prev, cur))
                new_out.append(cur)
            elif prev_in:
                new_out.append(intersect(prev, cur))
            prev, prev_in = cur, cur_in
        out = new_out
    return np.asarray(out) if out else np.empty((0, 2))


def intersection_area(poly_a, poly_b) -> float:
    """Area of the intersection of two convex polygons."""
    return polygon_area(clip_polygon(poly_a, poly_b))


def fill_convex_polygon(poly, height: int, width: int) -> np.ndarray:
    """Boolean mask of pixels whose centers lie inside a convex polygon."""
    poly = ensure_ccw(poly)
    if len(poly) < 3 or polygon_area(poly) == 0.0:
        return np.zeros((height, width), dtype=bool)
    x0 = max(0, int(np.floor(poly[:, 0].min() - 0.5)))
    x1 = min(width - 1, int(np.ceil(poly[:, 0].max())))
    y0 = max(0, int(np.floor(poly[:, 1].min() - 0.5)))
    y1 = min(height - 1, int(np.ceil(poly[:, 1].max())))
    mask = np.zeros((height, width), dtype=bool)
    if x1 < x0 or y1 < y0:
        return mask
    xs = np.arange(x0, x1 + 1) + 0.5
    ys = np.arange(y0, y1 + 1) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    inside = np.ones_like(gx, dtype=bool)
    n = len(poly)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        inside &= (b[0] - a[0]) * (gy - a[1]) - (b[1] - a[1]) * (gx - a[0]) >= 0.0
    mask[y0:y1 + 1, x0:x1 + 1] = inside
    return mask
