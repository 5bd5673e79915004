"""Reference clustering algorithms: weighted k-means, power-aware k-medoids, DBSCAN and elbow k.

Cluster ids of every baseline are canonical: 1, 2, ... in order of each
cluster's smallest member index, so results compare across seeds and orders.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .clusterer import OUTLIER, ClusteringResult, result_from_labels
from .pdap import MpcSamples, normalization_context

__all__ = [
    "BaselineConfig",
    "KMeansState",
    "embed",
    "kmeans",
    "kmeans_lloyd",
    "kmedoids",
    "kmeans_power",
    "power_distance_matrix",
    "dbscan",
    "dbscan_labels",
    "default_eps",
    "elbow_k",
    "canonical_labels",
]

METRICS = ("normalized_euclidean", "mcd")


@dataclass
class BaselineConfig:
    w_tau: float = 1.0
    w_phi: float = 1.0
    alpha: float = 0.05  # per dB
    k_max: int = 10
    eps: float | None = None
    min_pts: int = 5
    metric: str = "normalized_euclidean"
    zeta: float = 1.0
    normalization: str = "minmax"
    n_init: int = 5
    max_iter: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.w_tau < 0 or self.w_phi < 0:
            raise ValueError("weights must be non-negative")
        if self.k_max < 2:
            raise ValueError("k_max must be at least 2")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.normalization not in ("minmax", "zscore"):
            raise ValueError("normalization must be 'minmax' or 'zscore'")
        if self.eps is not None and not self.eps > 0:
            raise ValueError("eps must be positive")


def canonical_labels(labels) -> np.ndarray:
    """Relabel clusters 1.. by their smallest member index; outliers stay -1."""
    labels = np.asarray(labels)
    out = np.full(labels.shape, OUTLIER, dtype=np.int64)
    seen: dict = {}
    for i, v in enumerate(labels):
        if v == OUTLIER:
            continue
        if v not in seen:
            seen[v] = len(seen) + 1
        out[i] = seen[v]
    return out


def embed(samples: MpcSamples, cfg: BaselineConfig) -> np.ndarray:
    """Weighted normalised coordinates in which the Eq.-10 style distance is Euclidean."""
    x = np.column_stack([samples.tau, samples.phi]).astype(float)
    if cfg.normalization == "minmax":
        lo = x.min(axis=0)
        span = x.max(axis=0) - lo
    else:
        lo = x.mean(axis=0)
        span = x.std(axis=0)
    span = np.where(span > 0, span, 1.0)
    return (x - lo) / span * np.sqrt([cfg.w_tau, cfg.w_phi])


def _result(samples, labels, name, cfg, extra=None):
    prov = {"algorithm": name, "config": asdict(cfg)}
    prov.update(extra or {})
    return result_from_labels(samples, canonical_labels(labels), normalization_context(samples), (), prov)


# --------------------------------------------------------------------------
# k-means


@dataclass
class KMeansState:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: list
    n_iter: int


def _sqdist(z, c):
    return np.sum((z[:, None, :] - c[None, :, :]) ** 2, axis=-1)


def _plusplus(z, k, rng):
    centers = [z[int(rng.integers(len(z)))]]
    d2 = np.sum((z - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        tot = d2.sum()
        i = int(rng.choice(len(z), p=d2 / tot)) if tot > 0 else int(rng.integers(len(z)))
        centers.append(z[i])
        d2 = np.minimum(d2, np.sum((z - z[i]) ** 2, axis=1))
    return np.array(centers)


def kmeans_lloyd(z, k: int, rng, max_iter: int = 300) -> KMeansState:
    """Lloyd iterations from k-means++ seeds. ``history`` holds the objective after each assignment."""
    z = np.asarray(z, float)
    n = len(z)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    c = _plusplus(z, k, rng)
    labels = np.argmin(_sqdist(z, c), axis=1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(k):
            if not np.any(labels == j):
                far = int(np.argmax(np.sum((z - c[labels]) ** 2, axis=1)))
                labels[far] = j
        c = np.array([z[labels == j].mean(axis=0) for j in range(k)])
        d2 = _sqdist(z, c)
        new = np.argmin(d2, axis=1)
        w = float(d2[np.arange(n), new].sum())
        if history and w > history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError("k-means objective increased")
        history.append(w)
        if np.array_equal(new, labels):
            break
        labels = new
    return KMeansState(labels, c, history[-1], history, it)


def _best_kmeans(z, k, cfg):
    best = None
    for init in range(cfg.n_init):
        st = kmeans_lloyd(z, k, np.random.default_rng([cfg.seed, init]), cfg.max_iter)
        if best is None or st.inertia < best.inertia:
            best = st
    return best


def kmeans(samples: MpcSamples, k: int, cfg: BaselineConfig | None = None) -> ClusteringResult:
    """k-means with the weighted, per-axis normalised delay/angle distance."""
    cfg = cfg or BaselineConfig()
    st = _best_kmeans(embed(samples, cfg), k, cfg)
    return _result(samples, st.labels, "kmeans", cfg, {"k": int(k), "inertia": st.inertia})


def elbow_k(samples: MpcSamples, cfg: BaselineConfig | None = None, return_curve: bool = False):
    """k at the largest discrete second difference of the k-means objective; ties to the smaller k."""
    cfg = cfg or BaselineConfig()
    if cfg.k_max < 3:
        raise ValueError("elbow needs k_max >= 3")
    k_max = min(cfg.k_max, len(samples))
    if k_max < 3:
        raise ValueError("too few samples for the elbow method")
    z = embed(samples, cfg)
    w = np.array([_best_kmeans(z, k, cfg).inertia for k in range(1, k_max + 1)])
    second = w[:-2] - 2 * w[1:-1] + w[2:]
    k = int(np.argmax(second)) + 2
    return (k, w) if return_curve else k


# --------------------------------------------------------------------------
# k-medoids with the power term


def power_distance_matrix(samples: MpcSamples, cfg: BaselineConfig, rows=None) -> np.ndarray:
    z = embed(samples, cfg)
    p = samples.power
    r = slice(None) if rows is None else rows
    geo = np.sqrt(_sqdist(z[r], z))
    return geo + cfg.alpha * np.abs(p[r][:, None] - p[None, :])


def kmedoids(dist: np.ndarray, k: int, seed: int = 0, max_iter: int = 300):
    """Swap-based k-medoids on a full distance matrix. Returns (labels, medoid indices, cost)."""
    dist = np.asarray(dist, float)
    n = len(dist)
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    med = [int(rng.integers(n))]
    near = dist[:, med[0]].copy()
    for _ in range(1, k):
        w = near ** 2
        tot = w.sum()
        i = int(rng.choice(n, p=w / tot)) if tot > 0 else int(np.setdiff1d(np.arange(n), med)[0])
        med.append(i)
        near = np.minimum(near, dist[:, i])
    med = np.array(med)

    def cost_of(m):
        return float(dist[:, m].min(axis=1).sum())

    cost = cost_of(med)
    for _ in range(max_iter):
        dm = dist[:, med]
        order = np.argsort(dm, axis=1, kind="stable")
        d1 = dm[np.arange(n), order[:, 0]]
        d2 = dm[np.arange(n), order[:, 1]] if k > 1 else np.full(n, np.inf)
        best = (cost * (1 - 1e-12), None, None)
        for slot in range(k):
            base = np.where(order[:, 0] == slot, d2, d1)
            cand = np.minimum(dist, base[:, None]).sum(axis=0)
            cand[med] = np.inf
            h = int(np.argmin(cand))
            if cand[h] < best[0]:
                best = (float(cand[h]), slot, h)
        if best[1] is None:
            break
        med = med.copy()
        med[best[1]] = best[2]
        cost = cost_of(med)
    labels = np.argmin(dist[:, med], axis=1)
    return labels, med, cost


def kmeans_power(samples: MpcSamples, k: int, cfg: BaselineConfig | None = None) -> ClusteringResult:
    """k-medoids under the weighted distance plus ``alpha`` times the absolute power difference."""
    cfg = cfg or BaselineConfig()
    dist = power_distance_matrix(samples, cfg)
    best = None
    for init in range(cfg.n_init):
        seed = int(np.random.default_rng([cfg.seed, init]).integers(2**31))
        run = kmedoids(dist, k, seed, cfg.max_iter)
        if best is None or run[2] < best[2]:
            best = run
    labels, med, cost = best
    return _result(samples, labels, "kmeans-power", cfg,
                   {"k": int(k), "cost": cost, "medoids": sorted(int(m) for m in med)})


# --------------------------------------------------------------------------
# DBSCAN


def _dbscan_space(samples: MpcSamples, cfg: BaselineConfig) -> np.ndarray:
    """Coordinates in which the configured metric is plain Euclidean distance."""
    tau = np.asarray(samples.tau, float)
    phi = np.radians(samples.phi)
    if cfg.metric == "normalized_euclidean":
        ctx = normalization_context(samples)
        return ctx.scale(samples.tau, samples.phi)
    # angular term |u_i - u_j| / 2 on the unit circle; delay term zeta |dtau| std(tau) / range(tau)^2
    span = float(np.ptp(tau))
    scale = cfg.zeta * float(np.std(tau)) / span ** 2 if span > 0 else 0.0
    return np.column_stack([0.5 * np.cos(phi), 0.5 * np.sin(phi), scale * tau])


def default_eps(points: np.ndarray, min_pts: int) -> float:
    """Knee of the sorted ``min_pts``-th neighbour distance curve (max distance to its chord)."""
    n = len(points)
    k = min(min_pts, n)
    if n < 2:
        return 1.0
    dk, _ = cKDTree(points).query(points, k=k)
    dk = np.sort(np.atleast_2d(dk.T)[-1] if k > 1 else np.zeros(n))
    if dk[-1] <= dk[0]:
        return float(dk[-1]) if dk[-1] > 0 else 1.0
    xs = np.linspace(0.0, 1.0, n)
    ys = (dk - dk[0]) / (dk[-1] - dk[0])
    knee = int(np.argmax(xs - ys))
    eps = float(dk[knee])
    return eps if eps > 0 else float(dk[dk > 0][0])


def dbscan_labels(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Order-independent DBSCAN labels (canonical ids, -1 for noise).

    A point is core when at least ``min_pts`` points (itself included) lie within
    ``eps``. Core points connected through eps-neighbourhoods share a cluster;
    a border point joins the cluster of its nearest core point.
    """
    points = np.asarray(points, float)
    n = len(points)
    tree = cKDTree(points)
    # relative slack so grid neighbours at exactly eps are not lost to rounding
    nbrs = tree.query_ball_point(points, r=eps * (1.0 + 1e-9))
    counts = np.array([len(v) for v in nbrs])
    core = counts >= min_pts
    labels = np.full(n, OUTLIER, dtype=np.int64)
    if not core.any():
        return labels
    ci = np.flatnonzero(core)
    pos = -np.ones(n, dtype=np.int64)
    pos[ci] = np.arange(len(ci))
    rows, cols = [], []
    for a in ci:
        b = np.asarray(nbrs[a], dtype=np.int64)
        b = b[core[b]]
        rows.append(np.full(len(b), pos[a]))
        cols.append(pos[b])
    graph = coo_matrix((np.ones(sum(len(r) for r in rows)), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(len(ci), len(ci)))
    _, comp = connected_components(graph, directed=False)
    labels[ci] = comp
    # equidistant cores (common on a grid) resolve by coordinates, not by index
    for b in np.flatnonzero(~core):
        cand = np.asarray(nbrs[b], dtype=np.int64)
        cand = cand[core[cand]]
        if cand.size == 0:
            continue
        d = np.sum((points[cand] - points[b]) ** 2, axis=1)
        cand = cand[d <= d.min() * (1.0 + 1e-9)]
        pick = cand[np.lexsort(points[cand].T[::-1])[0]]
        labels[b] = comp[pos[pick]]
    return canonical_labels(labels)


def dbscan(samples: MpcSamples, cfg: BaselineConfig | None = None) -> ClusteringResult:
    cfg = cfg or BaselineConfig()
    pts = _dbscan_space(samples, cfg)
    eps = cfg.eps if cfg.eps is not None else default_eps(pts, cfg.min_pts)
    labels = dbscan_labels(pts, eps, cfg.min_pts)
    return _result(samples, labels, "dbscan", cfg, {"eps": eps})
