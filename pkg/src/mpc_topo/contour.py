"""Iso-power contour extraction, the contour containment tree and its groups.

Contours are traced with marching squares on the bilinear power field. Every
returned contour is the outer boundary of one connected super-level region,
oriented counterclockwise in the (delay, angle) plane; lines touching the grid
edge are closed along it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from .geometry import points_in_polygon, signed_area
from .pdap import MpcSamples, Pdap

__all__ = [
    "ContourLine",
    "ContourTree",
    "TreeNode",
    "ContourGroup",
    "ContourTreeError",
    "ROOT_ID",
    "LEVEL_EPS_DB",
    "sweep_levels",
    "extract_contours",
    "build_contour_tree",
    "trace_groups",
    "contours_to_json",
    "tree_to_json",
]

ROOT_ID = 0
# plateau guard: contour levels are nudged up so nodes exactly at a level count as below it
LEVEL_EPS_DB = 1e-9


class ContourTreeError(ValueError):
    """Inconsistent containment among contour lines."""


@dataclass(frozen=True, eq=False)
class ContourLine:
    id: int
    level: float
    points: np.ndarray
    peak_point: tuple[float, float] | None = None
    peak_power: float | None = None
    n_inside: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def representative(self) -> np.ndarray:
        if self.peak_point is not None:
            return np.asarray(self.peak_point, float)
        return self.points[0]

    def centroid(self) -> np.ndarray:
        p = self.points
        a = signed_area(p)
        if a == 0:
            return p.mean(axis=0)
        x, y = p[:, 0], p[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        return np.array([np.sum((x + xn) * cr), np.sum((y + yn) * cr)]) / (6.0 * a)


@dataclass
class TreeNode:
    parent: int | None
    children: list[int] = field(default_factory=list)
    layer: int = 0


@dataclass
class ContourTree:
    nodes: dict[int, TreeNode]
    lines: dict[int, ContourLine]
    root: int = ROOT_ID

    def leaves(self) -> list[int]:
        return sorted(i for i, n in self.nodes.items() if i != self.root and not n.children)

    def path_to_root(self, node_id: int) -> list[int]:
        path = []
        cur = node_id
        while cur is not None and cur != self.root:
            path.append(cur)
            cur = self.nodes[cur].parent
        return path


@dataclass(frozen=True)
class ContourGroup:
    path: tuple[int, ...]
    leaf_id: int


# --------------------------------------------------------------------------
# levels


def sweep_levels(p: Pdap | None, samples: MpcSamples, step_percent: float) -> list[float]:
    """Ascending contour heights from the weakest sample up to (not including) the strongest.

    The step is ``step_percent`` of the sample dynamic range.
    """
    if not 0.0 < step_percent < 1.0:
        raise ValueError("step_percent must lie in (0, 1)")
    if len(samples) == 0:
        raise ValueError("no samples to sweep")
    lo = float(np.min(samples.power))
    hi = float(np.max(samples.power))
    span = hi - lo
    if not span > 0:
        raise ValueError("samples have zero dynamic range")
    step = step_percent * span
    n = int(np.ceil(span / step - 1e-9))
    return [lo + k * step for k in range(n)]


# --------------------------------------------------------------------------
# marching squares


def _padded_field(p: Pdap):
    v = np.asarray(p.power, float)
    pad = float(v.min()) - 1e6
    vp = np.pad(v, 1, constant_values=pad)
    dt, da = p.delay_step, p.angle_step
    taus = np.concatenate([[p.delay_axis[0] - dt], p.delay_axis, [p.delay_axis[-1] + dt]])
    phis = np.concatenate([[p.angle_axis[0] - da], p.angle_axis, [p.angle_axis[-1] + da]])
    return vp, taus, phis


def _trace_level(vp, taus, phis, level, bounds):
    """Closed counterclockwise outer loops of ``{power > level}``."""
    n, m = vp.shape
    above = vp > level
    a = above[:-1, :-1]
    b = above[1:, :-1]
    c = above[1:, 1:]
    d = above[:-1, 1:]
    mixed = ~((a == b) & (b == c) & (c == d))
    cells = np.argwhere(mixed)
    if cells.size == 0:
        return []

    # edge keys: along-delay edge (i,j)-(i+1,j) -> i*m + j ; along-angle edge (i,j)-(i,j+1) -> base + i*m + j
    base = n * m
    nxt: dict[int, int] = {}
    for i, j in cells:
        i = int(i)
        j = int(j)
        corners = (above[i, j], above[i + 1, j], above[i + 1, j + 1], above[i, j + 1])
        edges = (i * m + j, base + (i + 1) * m + j, i * m + j + 1, base + i * m + j)
        kinds = []  # (edge, True for high->low)
        for k in range(4):
            s, e = corners[k], corners[(k + 1) % 4]
            if s != e:
                kinds.append((edges[k], bool(s)))
        if len(kinds) == 2:
            h2l = kinds[0] if kinds[0][1] else kinds[1]
            l2h = kinds[1] if kinds[0][1] else kinds[0]
            nxt[h2l[0]] = l2h[0]
        else:
            centre = 0.25 * (vp[i, j] + vp[i + 1, j] + vp[i + 1, j + 1] + vp[i, j + 1])
            step = 1 if centre > level else -1
            for k in range(4):
                if kinds[k][1]:
                    nxt[kinds[k][0]] = kinds[(k + step) % 4][0]

    tau_lo, tau_hi, phi_lo, phi_hi = bounds

    def point(key: int):
        if key < base:
            i, j = divmod(key, m)
            v0, v1 = vp[i, j], vp[i + 1, j]
            t = (level - v0) / (v1 - v0)
            x, y = taus[i] + t * (taus[i + 1] - taus[i]), phis[j]
        else:
            i, j = divmod(key - base, m)
            v0, v1 = vp[i, j], vp[i, j + 1]
            t = (level - v0) / (v1 - v0)
            x, y = taus[i], phis[j] + t * (phis[j + 1] - phis[j])
        return min(max(x, tau_lo), tau_hi), min(max(y, phi_lo), phi_hi)

    loops = []
    seen = set()
    for start in nxt:
        if start in seen:
            continue
        keys = []
        k = start
        while k not in seen:
            seen.add(k)
            keys.append(k)
            k = nxt[k]
        pts = [point(k) for k in keys]
        clean = [pts[0]]
        for q in pts[1:]:
            if q != clean[-1]:
                clean.append(q)
        while len(clean) > 1 and clean[-1] == clean[0]:
            clean.pop()
        if len(clean) < 3:
            continue
        arr = np.array(clean)
        if signed_area(arr) > 0:
            loops.append(arr)
    return loops


def extract_contours(p: Pdap, levels, threshold_db: float | None = None) -> list[ContourLine]:
    """Outer iso-power loops for each level, ids ascending with level then discovery order.

    Loops enclosing no grid node above their level are dropped.
    """
    levels = [float(v) for v in levels]
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be ascending")
    if threshold_db is not None and levels and levels[0] < threshold_db:
        raise ValueError("contour levels must not lie below the noise threshold")
    vp, taus, phis = _padded_field(p)
    bounds = (p.delay_axis[0], p.delay_axis[-1], p.angle_axis[0], p.angle_axis[-1])
    node_t, node_p = np.meshgrid(p.delay_axis, p.angle_axis, indexing="ij")

    def work(level):
        out = []
        lev = level + LEVEL_EPS_DB
        for loop in _trace_level(vp, taus, phis, lev, bounds):
            sel = (
                (node_t >= loop[:, 0].min()) & (node_t <= loop[:, 0].max())
                & (node_p >= loop[:, 1].min()) & (node_p <= loop[:, 1].max())
                & (p.power > lev)
            )
            ii, jj = np.nonzero(sel)
            if ii.size == 0:
                continue
            cand = np.column_stack([p.delay_axis[ii], p.angle_axis[jj]])
            inside = points_in_polygon(cand, loop, include_boundary=True)
            if not inside.any():
                continue
            pw = p.power[ii[inside], jj[inside]]
            k = int(np.argmax(pw))
            out.append((loop, tuple(cand[inside][k]), float(pw[k]), int(inside.sum())))
        return out

    per_level = ordered_map(work, levels)
    lines = []
    next_id = 1
    for level, found in zip(levels, per_level):
        for loop, peak_pt, peak_pw, n_in in found:
            lines.append(ContourLine(next_id, level, loop, peak_pt, peak_pw, n_in))
            next_id += 1
    return lines


# --------------------------------------------------------------------------
# tree


def build_contour_tree(lines) -> ContourTree:
    """Containment tree: a contour's parent is the nearest lower-level contour enclosing its peak node."""
    lines = sorted(lines, key=lambda c: (c.level, c.id))
    by_level: dict[float, list[ContourLine]] = {}
    for c in lines:
        by_level.setdefault(c.level, []).append(c)
    level_order = sorted(by_level)

    outline = {c.id: c.points for c in lines}
    if len(outline) != len(lines):
        raise ContourTreeError("duplicate contour ids")
    nodes: dict[int, TreeNode] = {ROOT_ID: TreeNode(parent=None, layer=0)}
    for li, level in enumerate(level_order):
        for c in by_level[level]:
            parent = ROOT_ID
            rep = c.representative
            for lj in range(li - 1, -1, -1):
                hits = [
                    q.id for q in by_level[level_order[lj]]
                    if points_in_polygon(rep, q.points, include_boundary=True)[0]
                ]
                if hits:
                    # several hits: a region nested in another's hole; the innermost encloses it
                    parent = min(hits, key=lambda h: (abs(signed_area(outline[h])), h))
                    for h in hits:
                        if h != parent and not points_in_polygon(outline[parent], outline[h]).all():
                            raise ContourTreeError(
                                f"contour {c.id} lies in overlapping contours {parent} and {h}")
                    break
            nodes[c.id] = TreeNode(parent=parent, layer=nodes[parent].layer + 1)
            nodes[parent].children.append(c.id)
    return ContourTree(nodes=nodes, lines={c.id: c for c in lines})


def trace_groups(tree: ContourTree) -> list[ContourGroup]:
    """One root-to-leaf path per leaf, ordered by leaf id."""
    groups = []
    for leaf in tree.leaves():
        path = tuple(reversed(tree.path_to_root(leaf)))
        groups.append(ContourGroup(path=path, leaf_id=leaf))
    return groups


# --------------------------------------------------------------------------
# debug dumps


def contours_to_json(lines) -> list[dict]:
    return [
        {"id": c.id, "level_db": c.level, "points": c.points.tolist()}
        for c in lines
    ]


def tree_to_json(tree: ContourTree) -> list[dict]:
    return [
        {"id": i, "parent": n.parent, "children": list(n.children)}
        for i, n in sorted(tree.nodes.items())
    ]
