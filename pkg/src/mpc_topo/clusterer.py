"""Nearest-CP assignment of MPC samples and the clustering result container."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .charpoint import CharacteristicPoint
from .pdap import MpcSample, MpcSamples, NormalizationContext, PdapFormatError

__all__ = [
    "Cluster",
    "ClusteringResult",
    "assign_mpcs",
    "nearest_cp",
    "summarize",
    "result_from_labels",
    "result_to_json",
    "result_from_json",
]

log = logging.getLogger(__name__)

OUTLIER = -1


@dataclass
class Cluster:
    id: int
    members: np.ndarray
    dominant: MpcSample
    cps: list = field(default_factory=list)
    scatterer: object = None

    @property
    def size(self) -> int:
        return int(len(self.members))


@dataclass
class ClusteringResult:
    """Partition of a denoised sample set.

    ``labels[n]`` is the cluster id of ``samples[n]`` or -1 for an outlier;
    ``clusters[k].members`` index into ``samples``.
    """

    samples: MpcSamples
    labels: np.ndarray
    clusters: list
    context: NormalizationContext
    provenance: dict = field(default_factory=dict)

    @property
    def outliers(self) -> np.ndarray:
        return np.flatnonzero(self.labels == OUTLIER)

    @property
    def inner(self) -> np.ndarray:
        return np.flatnonzero(self.labels != OUTLIER)

    def cluster(self, cid: int) -> Cluster:
        for c in self.clusters:
            if c.id == cid:
                return c
        raise KeyError(cid)


def result_from_labels(samples, labels, ctx, cps=(), provenance=None) -> ClusteringResult:
    """Build clusters (ids in ascending order) from a label vector; empty ids are skipped."""
    labels = np.asarray(labels, dtype=np.int64)
    clusters = []
    by_cluster: dict[int, list] = {}
    for cp in cps:
        by_cluster.setdefault(cp.cluster_id, []).append(cp)
    for cid in np.unique(labels[labels != OUTLIER]):
        members = np.flatnonzero(labels == cid)
        best = members[int(np.argmax(samples.power[members]))]
        clusters.append(Cluster(int(cid), members, samples[int(best)], by_cluster.get(int(cid), [])))
    dropped = set(by_cluster) - {c.id for c in clusters}
    if dropped:
        log.warning("clusters %s received no samples", sorted(dropped))
    return ClusteringResult(samples, labels, clusters, ctx, dict(provenance or {}))


def nearest_cp(tau, phi, cps, ctx: NormalizationContext, chunk: int = 4096):
    """Index (into ``cps``) of the nearest CP per sample under the normalised distance.

    Ties go to the lower cluster id, then the lower CP index.
    """
    cps = list(cps)
    order = sorted(range(len(cps)), key=lambda k: (cps[k].cluster_id, k))
    ref = ctx.scale([cps[k].tau for k in order], [cps[k].phi for k in order])
    q = ctx.scale(tau, phi).reshape(-1, 2)
    out = np.empty(len(q), dtype=np.int64)
    for s in range(0, len(q), chunk):
        blk = q[s:s + chunk]
        d2 = (blk[:, None, 0] - ref[None, :, 0]) ** 2 + (blk[:, None, 1] - ref[None, :, 1]) ** 2
        out[s:s + chunk] = np.argmin(d2, axis=1)
    return np.asarray(order, dtype=np.int64)[out]


def assign_mpcs(samples: MpcSamples, cps, ctx: NormalizationContext, provenance=None) -> ClusteringResult:
    """Label every sample with the cluster of its globally nearest CP."""
    cps = list(cps)
    if not cps:
        raise ValueError("cannot assign samples without characteristic points")
    if any(cp.cluster_id is None for cp in cps):
        raise ValueError("all characteristic points need a cluster_id")
    idx = nearest_cp(samples.tau, samples.phi, cps, ctx)
    labels = np.array([cps[k].cluster_id for k in idx], dtype=np.int64)
    return result_from_labels(samples, labels, ctx, cps, provenance)


def _weighted_std(x, w):
    mu = np.sum(w * x) / np.sum(w)
    return float(np.sqrt(np.sum(w * (x - mu) ** 2) / np.sum(w)))


def summarize(result: ClusteringResult) -> list[dict]:
    """Per-cluster size, dominant path and linear-power-weighted delay/angle spreads."""
    s = result.samples
    rows = []
    for c in result.clusters:
        m = c.members
        w = 10.0 ** ((s.power[m] - s.power[m].max()) / 10.0)
        rows.append({
            "id": c.id,
            "size": c.size,
            "dominant": {"tau_ns": c.dominant.tau, "phi_deg": c.dominant.phi, "power_db": c.dominant.power},
            "delay_spread_ns": _weighted_std(s.tau[m], w),
            "angle_spread_deg": _weighted_std(s.phi[m], w),
        })
    return rows


def result_to_json(result: ClusteringResult) -> dict:
    clusters = []
    for c in result.clusters:
        entry = {
            "id": c.id,
            "dominant": {"tau_ns": c.dominant.tau, "phi_deg": c.dominant.phi, "power_db": c.dominant.power},
            "members": c.members.tolist(),
            "scatterer": None if c.scatterer is None else c.scatterer.to_dict(),
        }
        clusters.append(entry)
    prov = result.provenance
    return {
        "clusters": clusters,
        "outliers": result.outliers.tolist(),
        "samples": {
            "tau_ns": result.samples.tau.tolist(),
            "phi_deg": result.samples.phi.tolist(),
            "power_db": result.samples.power.tolist(),
            "grid_index": result.samples.grid_index.tolist(),
        },
        "cps": [
            {"tau_ns": cp.tau, "phi_deg": cp.phi, "contour_id": cp.contour_id, "cluster_id": cp.cluster_id}
            for c in result.clusters for cp in c.cps
        ],
        "context": result.context.to_dict(),
        "params": {
            "threshold_db": prov.get("threshold_db"),
            "step_percent": prov.get("step_percent"),
            "seed": prov.get("seed"),
        },
        "provenance": prov,
    }


def result_from_json(d: dict) -> ClusteringResult:
    """Inverse of :func:`result_to_json` (scatterer models are not restored)."""
    try:
        smp = d["samples"]
        samples = MpcSamples(smp["tau_ns"], smp["phi_deg"], smp["power_db"],
                             smp.get("grid_index", np.zeros((len(smp["tau_ns"]), 2), np.int64)))
        labels = np.full(len(samples), OUTLIER, dtype=np.int64)
        for c in d["clusters"]:
            labels[np.asarray(c["members"], dtype=np.int64)] = int(c["id"])
        cps = [
            CharacteristicPoint(float(c["tau_ns"]), float(c["phi_deg"]), int(c["contour_id"]),
                                None if c["cluster_id"] is None else int(c["cluster_id"]))
            for c in d.get("cps", [])
        ]
        cx = d["context"]
        ctx = NormalizationContext(float(cx["sigma_tau_ns"]), float(cx["sigma_phi_deg"]),
                                   tuple(cx["tau_range_ns"]), tuple(cx["phi_range_deg"]))
    except (KeyError, TypeError, IndexError) as exc:
        raise PdapFormatError(f"malformed clustering result: {exc!r}") from exc
    return result_from_labels(samples, labels, ctx, cps, d.get("provenance"))
