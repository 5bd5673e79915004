"""Characteristic points (CPs): convex, locally sharpest vertices of smoothed contours."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import splev, splprep

from .contour import ContourGroup, ContourLine
from .geometry import signed_area
from .pdap import NormalizationContext

__all__ = [
    "SmoothedContour",
    "CharacteristicPoint",
    "smooth_contour",
    "detect_cps",
    "shared_prefix",
    "assign_cp_clusters",
    "cps_to_json",
    "DEFAULT_N_SMOOTH",
    "DEFAULT_SMOOTHING",
]

log = logging.getLogger(__name__)

DEFAULT_N_SMOOTH = 128
# RMS spline deviation allowed per vertex, in grid steps
DEFAULT_SMOOTHING = 0.25


@dataclass(frozen=True, eq=False)
class SmoothedContour:
    """Resampled contour in per-contour min-max coordinates.

    ``offset + scale * points`` maps back to (tau ns, phi deg).
    """

    source_id: int
    points: np.ndarray
    offset: np.ndarray
    scale: np.ndarray
    degenerate: bool = False

    def denormalize(self, pts) -> np.ndarray:
        return self.offset + self.scale * np.asarray(pts, float)


@dataclass(frozen=True)
class CharacteristicPoint:
    tau: float
    phi: float
    contour_id: int
    cluster_id: int | None = None
    convexity_margin: float = 0.0
    seeded: bool = False


def _minmax(pts):
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    flat = span <= 1e-12 * np.maximum(1.0, np.abs(lo))
    safe = np.where(flat, 1.0, span)
    out = (pts - lo) / safe
    out[:, flat] = 0.5
    return out, lo, np.where(flat, 0.0, span), bool(flat.any())


def smooth_contour(c: ContourLine, n_smooth: int = DEFAULT_N_SMOOTH, grid_step=None,
                   smoothing: float = DEFAULT_SMOOTHING) -> SmoothedContour:
    """Periodic smoothing-spline resampling at ``n_smooth`` equal arc-length stations.

    The polyline is normalised to the unit box and fitted there, so the stations
    are evenly spaced in the coordinates the CP test works in. Given the PDAP
    ``grid_step`` = (delay, angle), the spline may deviate from the vertices by
    about ``smoothing`` grid steps RMS, which removes the staircase left by
    marching squares. Without ``grid_step`` (or with ``smoothing=0``) the
    spline interpolates. The result is min-max normalised once more to absorb
    spline overshoot.
    """
    pts = np.asarray(c.points, float)
    if len(pts) < 3:
        raise ValueError(f"contour {c.id} has fewer than 3 vertices")
    if n_smooth < 8:
        raise ValueError("n_smooth must be at least 8")

    unit, lo, span, degenerate = _minmax(pts)
    if degenerate:
        log.warning("contour %s has zero extent on an axis", c.id)

    closed = np.vstack([unit, unit[:1]])
    seg = np.hypot(*np.diff(closed, axis=0).T)
    keep = np.concatenate([[True], seg > 0])
    closed = closed[keep]
    closed[-1] = closed[0]
    if len(closed) < 5 or not np.any(seg > 0):
        flat = np.full((n_smooth, 2), 0.5)
        return SmoothedContour(c.id, flat, lo + 0.5 * span, np.zeros(2), True)

    h2 = 0.0
    if grid_step is not None:
        safe = np.where(span > 0, span, 1.0)
        h2 = float(np.mean((np.asarray(grid_step, float) / safe) ** 2))
    m = len(closed) - 1
    try:
        tck, _ = splprep(closed.T, per=1, s=m * smoothing ** 2 * h2, quiet=2)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"contour {c.id}: spline fit failed ({exc})") from exc

    # re-parametrise by the spline's own arc length
    grid_u = np.linspace(0.0, 1.0, 16 * n_smooth + 1)
    fine = np.array(splev(grid_u, tck)).T
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(fine, axis=0).T))])
    u = np.interp(np.linspace(0.0, arc[-1], n_smooth, endpoint=False), arc, grid_u)
    res = np.array(splev(u, tck)).T

    res2, lo2, span2, _ = _minmax(res)
    offset = lo + span * lo2
    scale = span * span2
    return SmoothedContour(c.id, res2, offset, scale, degenerate)


def _turns(pts):
    v1 = pts - np.roll(pts, 1, axis=0)
    v2 = np.roll(pts, -1, axis=0) - pts
    cross = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    dot = np.sum(v1 * v2, axis=1)
    return np.arctan2(cross, dot), cross


def _cyclic_peaks(v, tol):
    """Indices of strict cyclic local maxima of ``v``; runs within ``tol`` count once, at their middle."""
    n = len(v)
    jump = np.abs(v - np.roll(v, 1)) > tol
    if not jump.any():
        return []
    shift = int(np.argmax(jump))
    w = np.roll(v, -shift)
    starts = np.flatnonzero(np.abs(w - np.roll(w, 1)) > tol)
    ends = np.append(starts[1:], n) - 1
    if len(starts) < 2:
        return []
    peaks = []
    for s, e in zip(starts, ends):
        before = w[s - 1]
        after = w[(e + 1) % n]
        if w[s] > before and w[e] > after:
            peaks.append(((s + e) // 2 + shift) % n)
    return sorted(peaks)


def detect_cps(s: SmoothedContour, orientation: int | None = None, angle_tol: float | None = None):
    """Vertices whose interior angle is a cyclic local minimum and which are convex.

    ``orientation`` is +1 for counterclockwise input (the default when the
    signed area is positive) and -1 for clockwise; the convexity test is
    ``orientation * cross > 0``. ``angle_tol`` (rad) merges near-equal angles
    into plateaus; default ``1e-3 * 2*pi / n``.
    """
    pts = s.points
    n = len(pts)
    if orientation is None:
        orientation = 1 if signed_area(pts) >= 0 else -1
    if angle_tol is None:
        angle_tol = 1e-3 * 2.0 * np.pi / n
    turn, cross = _turns(pts)
    # interior angle = pi - |turn|, so local angle minima are local |turn| maxima
    out = []
    for m in _cyclic_peaks(np.abs(turn), angle_tol):
        margin = float(orientation * cross[m])
        if margin > 0:
            tau, phi = s.denormalize(pts[m])
            out.append(CharacteristicPoint(float(tau), float(phi), s.source_id, None, margin))
    return out


def shared_prefix(g1: ContourGroup, g2: ContourGroup) -> tuple[int, ...]:
    out = []
    for a, b in zip(g1.path, g2.path):
        if a != b:
            break
        out.append(a)
    return tuple(out)


def assign_cp_clusters(groups, cps, ctx: NormalizationContext, lines=None):
    """Give every CP the cluster of its contour group.

    Cluster ``k + 1`` belongs to ``groups[k]``. CPs on contours owned by a single
    group take that group's cluster. CPs on contours shared by several groups go
    to the candidate cluster holding the nearest (normalised distance)
    single-group CP. A group left without own CPs is seeded with the centroid
    of its leaf contour (``seeded=True``); this needs ``lines`` (id -> ContourLine).
    """
    owners: dict[int, list[int]] = {}
    for k, g in enumerate(groups):
        for cid in g.path:
            owners.setdefault(cid, []).append(k + 1)

    assigned, pending = [], []
    for cp in cps:
        if cp.contour_id not in owners:
            raise ValueError(f"CP on contour {cp.contour_id} which belongs to no group")
        own = owners[cp.contour_id]
        if len(own) == 1:
            assigned.append(replace(cp, cluster_id=own[0]))
        else:
            pending.append((cp, own))

    have = {cp.cluster_id for cp in assigned}
    for k, g in enumerate(groups):
        if k + 1 in have:
            continue
        if lines is None:
            raise ValueError(f"group {k + 1} has no own CPs and no contour lines were given for seeding")
        leaf = lines[g.leaf_id]
        tau, phi = leaf.centroid()
        log.warning("cluster %d has no characteristic points; seeded from leaf contour %d", k + 1, g.leaf_id)
        assigned.append(CharacteristicPoint(float(tau), float(phi), g.leaf_id, k + 1, 0.0, seeded=True))

    assigned.sort(key=lambda cp: cp.cluster_id)
    if not pending:
        return assigned
    ref = ctx.scale([cp.tau for cp in assigned], [cp.phi for cp in assigned])
    ref_cluster = np.array([cp.cluster_id for cp in assigned])
    out = list(assigned)
    for cp, own in pending:
        allowed = np.isin(ref_cluster, own)
        q = ctx.scale(cp.tau, cp.phi)
        d = np.hypot(*(ref - q).T)
        d = np.where(allowed, d, np.inf)
        out.append(replace(cp, cluster_id=int(ref_cluster[int(np.argmin(d))])))
    return out


def cps_to_json(cps) -> list[dict]:
    return [
        {"tau_ns": cp.tau, "phi_deg": cp.phi, "contour_id": cp.contour_id, "cluster_id": cp.cluster_id}
        for cp in cps
    ]
