"""Small planar-polygon helpers shared by the contour and charpoint modules."""

import numpy as np


def signed_area(poly) -> float:
    """Shoelace area; positive for counterclockwise vertex order."""
    p = np.asarray(poly, float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def points_in_polygon(points, poly, include_boundary=True, tol=1e-9) -> np.ndarray:
    """Even-odd ray casting for many points against one closed polygon.

    Points within ``tol`` (scaled by the polygon extent) of an edge count as
    inside when ``include_boundary`` is set, outside otherwise.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    p = np.asarray(poly, float)
    a = p
    b = np.roll(p, -1, axis=0)
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]

    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    inside = np.count_nonzero(straddle & (px < x_cross), axis=1) % 2 == 1

    # the edge test only matters for points whose crossing parity it could overturn
    check = ~inside if include_boundary else inside
    if not check.any():
        return inside
    scale = max(float(np.ptp(p[:, 0])), float(np.ptp(p[:, 1])), 1e-300)
    qx, qy = px[check], py[check]
    ex, ey = bx - ax, by - ay
    len2 = ex * ex + ey * ey
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.clip(((qx - ax) * ex + (qy - ay) * ey) / len2, 0.0, 1.0)
    t = np.where(len2 > 0, t, 0.0)
    dx = qx - (ax + t * ex)
    dy = qy - (ay + t * ey)
    on_edge = np.any(dx * dx + dy * dy <= (tol * scale) ** 2, axis=1)
    out = inside.copy()
    out[check] = on_edge if include_boundary else ~on_edge
    return out


def segments_intersect_count(poly) -> int:
    """Number of properly crossing non-adjacent edge pairs (0 for a simple polygon).

    O(n^2); intended for tests and debugging.
    """
    p = np.asarray(poly, float)
    n = len(p)
    a = p
    b = np.roll(p, -1, axis=0)

    def orient(o, q, r):
        return (q[..., 0] - o[..., 0]) * (r[..., 1] - o[..., 1]) - (q[..., 1] - o[..., 1]) * (r[..., 0] - o[..., 0])

    count = 0
    for i in range(n):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if j.size == 0:
            continue
        o1 = orient(a[i], b[i], a[j])
        o2 = orient(a[i], b[i], b[j])
        o3 = orient(a[j], b[j], a[i])
        o4 = orient(a[j], b[j], b[i])
        count += int(np.count_nonzero((o1 * o2 < 0) & (o3 * o4 < 0)))
    return count
