"""End-to-end topographic clustering: denoise, contour, tree, CPs, assignment, scatterer fits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .charpoint import DEFAULT_N_SMOOTH, assign_cp_clusters, detect_cps, smooth_contour
from .clusterer import ClusteringResult, assign_mpcs
from .contour import ContourTree, build_contour_tree, extract_contours, sweep_levels, trace_groups
from .pdap import MpcSamples, NormalizationContext, Pdap, denoise, normalization_context
from .scatterer import RansacConfig, d_los_prior_from_samples, select_model

__all__ = ["PipelineOutput", "cluster_pdap", "fit_scatterers"]

log = logging.getLogger(__name__)


@dataclass
class PipelineOutput:
    result: ClusteringResult
    samples: MpcSamples
    context: NormalizationContext
    lines: list
    tree: ContourTree
    groups: list
    cps: list = field(default_factory=list)


def cluster_pdap(p: Pdap, threshold_db: float, step_percent: float = 0.02,
                 n_smooth: int = DEFAULT_N_SMOOTH, seed: int | None = None) -> PipelineOutput:
    """Cluster the nodes of ``p`` above ``threshold_db``; the cluster count comes from the contour tree."""
    samples = denoise(p, threshold_db)
    if len(samples) < 2:
        raise ValueError(f"only {len(samples)} samples above {threshold_db} dB")
    ctx = normalization_context(samples)
    levels = sweep_levels(p, samples, step_percent)
    lines = extract_contours(p, levels, threshold_db)
    tree = build_contour_tree(lines)
    groups = trace_groups(tree)
    if not groups:
        raise ValueError("no contour groups found")

    raw = []
    for c in lines:
        try:
            raw.extend(detect_cps(smooth_contour(c, n_smooth, (p.delay_step, p.angle_step))))
        except ValueError as exc:
            log.debug("contour %d skipped: %s", c.id, exc)
    cps = assign_cp_clusters(groups, raw, ctx, tree.lines)
    prov = {"threshold_db": float(threshold_db), "step_percent": float(step_percent), "seed": seed,
            "n_smooth": int(n_smooth), "algorithm": "proposed", "n_groups": len(groups)}
    result = assign_mpcs(samples, cps, ctx, prov)
    return PipelineOutput(result, samples, ctx, lines, tree, groups, cps)


def fit_scatterers(result: ClusteringResult, cfg: RansacConfig | None = None,
                   d_los_prior: float | None = None) -> ClusteringResult:
    """Attach a point or wall model to every cluster (in place); returns ``result``."""
    cfg = cfg or RansacConfig()
    if d_los_prior is None:
        d_los_prior = d_los_prior_from_samples(result.samples)
    for c in result.clusters:
        c.scatterer = select_model(c.cps, c.dominant, d_los_prior, cfg, result.context)
    return result
