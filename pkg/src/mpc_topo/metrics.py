"""Internal clustering-validity indices: silhouette, per-cluster rank correlation and WACC.

Outliers (label -1) are excluded everywhere. Distances are the sigma-normalised
Euclidean distance, with sigmas taken over the clustered (inner) samples unless
a context is passed explicitly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .clusterer import OUTLIER, ClusteringResult
from .pdap import NormalizationContext, normalization_context

__all__ = [
    "MetricsReport",
    "UndefinedCorrelation",
    "pair_distance",
    "silhouette",
    "rank_correlation",
    "spearman_rho",
    "wacc",
    "evaluate",
]


class UndefinedCorrelation(ValueError):
    """Rank correlation with a constant rank vector (or fewer than two members)."""


@dataclass
class MetricsReport:
    mean_si: float
    wacc: float
    per_cluster_rho: list = field(default_factory=list)  # (id, rho or None, n)
    n_inner: int = 0

    def to_dict(self) -> dict:
        return {
            "mean_si": self.mean_si,
            "wacc": self.wacc,
            "clusters": [{"id": cid, "n": n, "rho": rho} for cid, rho, n in self.per_cluster_rho],
        }


def pair_distance(a, b, ctx: NormalizationContext) -> float | np.ndarray:
    """sqrt((dtau/sigma_tau)^2 + (dphi/sigma_phi)^2); broadcasts over leading axes."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    out = np.hypot((a[..., 0] - b[..., 0]) / ctx.sigma_tau, (a[..., 1] - b[..., 1]) / ctx.sigma_phi)
    return float(out) if np.ndim(out) == 0 else out


def _inner_context(result: ClusteringResult) -> NormalizationContext:
    return normalization_context(result.samples.subset(result.inner))


def silhouette(result: ClusteringResult, ctx: NormalizationContext | None = None, chunk: int = 1024):
    """Mean silhouette over inner samples and the per-sample values (in inner order).

    Singleton clusters score 0.
    """
    inner = result.inner
    labels = result.labels[inner]
    ids, lab = np.unique(labels, return_inverse=True)
    if len(ids) < 2:
        raise ValueError("silhouette needs at least two clusters")
    if ctx is None:
        ctx = _inner_context(result)
    q = ctx.scale(result.samples.tau[inner], result.samples.phi[inner])
    n = len(q)
    onehot = np.zeros((n, len(ids)))
    onehot[np.arange(n), lab] = 1.0
    sizes = onehot.sum(axis=0)

    s = np.zeros(n)
    for lo in range(0, n, chunk):
        blk = q[lo:lo + chunk]
        dist = np.hypot(blk[:, None, 0] - q[None, :, 0], blk[:, None, 1] - q[None, :, 1])
        sums = dist @ onehot
        own = lab[lo:lo + chunk]
        rows = np.arange(len(blk))
        own_size = sizes[own]
        with np.errstate(invalid="ignore", divide="ignore"):
            a = sums[rows, own] / (own_size - 1)
            mean_other = sums / sizes[None, :]
        mean_other[rows, own] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            sv = np.where(denom > 0, (b - a) / denom, 0.0)
        sv[own_size == 1] = 0.0
        s[lo:lo + chunk] = sv
    return float(np.mean(s)), s


def rank_correlation(d, p) -> float:
    """Pearson correlation of fractional (average) ranks."""
    d = np.asarray(d, float)
    p = np.asarray(p, float)
    if d.size != p.size:
        raise ValueError("d and p must have equal length")
    if d.size < 2:
        raise UndefinedCorrelation("need at least two members")
    rd = rankdata(d)
    rp = rankdata(p)
    cd = rd - rd.mean()
    cp = rp - rp.mean()
    sd = np.sqrt(np.mean(cd * cd))
    sp = np.sqrt(np.mean(cp * cp))
    if sd == 0 or sp == 0:
        raise UndefinedCorrelation("constant ranks")
    rho = float(np.mean(cd * cp) / (sd * sp))
    return min(1.0, max(-1.0, rho))


def spearman_rho(result: ClusteringResult, cluster_id: int, ctx: NormalizationContext | None = None) -> float:
    """Rank correlation between member power and normalised distance to the dominant member."""
    c = result.cluster(cluster_id)
    if ctx is None:
        ctx = _inner_context(result)
    s = result.samples
    m = c.members
    dom = np.array([c.dominant.tau, c.dominant.phi])
    d = pair_distance(np.column_stack([s.tau[m], s.phi[m]]), dom, ctx)
    return rank_correlation(np.atleast_1d(d), s.power[m])


def _rhos(result, ctx):
    out = []
    for c in result.clusters:
        try:
            rho = spearman_rho(result, c.id, ctx)
        except UndefinedCorrelation as exc:
            warnings.warn(f"cluster {c.id}: rank correlation undefined ({exc}); skipped in WACC", stacklevel=3)
            rho = None
        out.append((c.id, rho, c.size))
    return out


def _weighted(rhos) -> float:
    num = sum(n * r for _, r, n in rhos if r is not None)
    den = sum(n for _, r, n in rhos if r is not None)
    if den == 0:
        raise UndefinedCorrelation("no cluster has a defined rank correlation")
    return float(num / den)


def wacc(result: ClusteringResult, ctx: NormalizationContext | None = None) -> float:
    """Cluster-size weighted mean rank correlation, sum(N_k rho_k) / sum(N_k)."""
    if ctx is None:
        ctx = _inner_context(result)
    return _weighted(_rhos(result, ctx))


def evaluate(result: ClusteringResult, ctx: NormalizationContext | None = None) -> MetricsReport:
    if ctx is None:
        ctx = _inner_context(result)
    mean_si, _ = silhouette(result, ctx)
    rhos = _rhos(result, ctx)
    return MetricsReport(mean_si, _weighted(rhos), rhos, int(np.sum(result.labels != OUTLIER)))
