"""Topographic clustering of multipath components in power-delay-angle profiles.

The pipeline reads a PDAP as terrain: iso-power contours are organised in a
containment tree whose root-to-leaf paths fix the number of clusters, convex
ridge points on smoothed contours seed the clusters, and every sample joins
the cluster of its nearest ridge point. Fitted point or wall scatterer models,
validity indices and baseline algorithms complete the toolbox.
"""

__version__ = "0.1.0"

from .baselines import BaselineConfig, dbscan, elbow_k, kmeans, kmeans_power
from .charpoint import CharacteristicPoint, assign_cp_clusters, detect_cps, smooth_contour
from .clusterer import Cluster, ClusteringResult, assign_mpcs, result_to_json, summarize
from .contour import build_contour_tree, extract_contours, sweep_levels, trace_groups
from .metrics import MetricsReport, evaluate, pair_distance, silhouette, spearman_rho, wacc
from .pdap import MpcSample, MpcSamples, NormalizationContext, Pdap, denoise, load_pdap, save_pdap
from .pipeline import PipelineOutput, cluster_pdap, fit_scatterers
from .scatterer import (
    RansacConfig,
    WallParams,
    fit_point_model,
    forward_model,
    optimize_hidden,
    ransac_fit,
    reconstruct_wall,
    residual,
    select_model,
    wall_rmse,
)
from .synth import SceneSpec, demo_scene, generate_pdap

__all__ = [
    "BaselineConfig", "dbscan", "elbow_k", "kmeans", "kmeans_power",
    "CharacteristicPoint", "assign_cp_clusters", "detect_cps", "smooth_contour",
    "Cluster", "ClusteringResult", "assign_mpcs", "result_to_json", "summarize",
    "build_contour_tree", "extract_contours", "sweep_levels", "trace_groups",
    "MetricsReport", "evaluate", "pair_distance", "silhouette", "spearman_rho", "wacc",
    "MpcSample", "MpcSamples", "NormalizationContext", "Pdap", "denoise", "load_pdap", "save_pdap",
    "PipelineOutput", "cluster_pdap", "fit_scatterers",
    "RansacConfig", "WallParams", "fit_point_model", "forward_model", "optimize_hidden", "ransac_fit",
    "reconstruct_wall", "residual", "select_model", "wall_rmse",
    "SceneSpec", "demo_scene", "generate_pdap",
]
