"""Command-line entry point: ``mpc-topo <subcommand> ...``.

Every artifact is written as sorted-key JSON, so identical inputs and
configuration give byte-identical files. Each run also writes its resolved
configuration next to the output (``<out>.config.json``); that file can be fed
back through ``--config``.

Exit codes: 0 success, 1 invalid input or configuration, 2 algorithmic failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import zlib
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import BaselineConfig, dbscan, elbow_k, kmeans, kmeans_power
from .clusterer import result_from_json, result_to_json
from .contour import ContourTreeError
from .metrics import UndefinedCorrelation, evaluate
from .pdap import DegenerateAxisError, PdapFormatError, PdapValidationError, load_pdap, pdap_from_dict
from .pipeline import cluster_pdap
from .plot import render_pdap, render_result, render_sweep
from .scatterer import (
    RansacConfig,
    RansacFailure,
    WallParams,
    d_los_prior_from_samples,
    fit_point_model,
    ransac_fit,
    reconstruct_wall,
    select_model,
    wall_rmse,
)
from .synth import demo_scene, generate_pdap, load_scene

__all__ = ["main", "build_parser", "dumps", "stage_seed", "CliError"]

log = logging.getLogger("mpc_topo")

ALGORITHMS = ("proposed", "kmeans", "kmeans-power", "dbscan")
# keys that never enter the resolved config
_RUNTIME_KEYS = {"config", "stdout", "func", "verbose"}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit 1) with the JSON payload."""

    def error(self, message):
        raise CliError(f"{self.prog}: {message}", 1)


# --------------------------------------------------------------------------
# helpers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, non-finite floats as null, trailing newline."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def stage_seed(root: int, stage: str) -> int:
    """Seed of one pipeline stage, derived from the run's root seed."""
    ss = np.random.SeedSequence([int(root), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise CliError(f"file not found: {path}", 1) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", 1) from exc


def _load_pdap_any(path):
    """A PDAP file, or a ``generate`` artifact (PDAP plus labels)."""
    if str(path).lower().endswith(".csv"):
        return load_pdap(path)
    return pdap_from_dict(_read_json(path))


def _emit(args, payload: dict, text: str | None = None):
    body = dumps(payload) if text is None else text
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(body)
        cfg = {k: v for k, v in sorted(vars(args).items()) if k not in _RUNTIME_KEYS}
        out.with_name(out.stem + ".config.json").write_text(dumps(cfg))
    if args.stdout:
        sys.stdout.write(dumps(payload) if text is None else body)
    elif not args.out:
        raise CliError("nothing to write: give --out or --stdout", 1)


def _thresholds(spec: str, step: float) -> list[float]:
    """``T1..T2`` or ``T1..T2:step`` or a comma list."""
    try:
        if ".." in spec:
            rng, _, st = spec.partition(":")
            a, b = (float(v) for v in rng.split(".."))
            st = float(st) if st else step
            if st <= 0:
                raise ValueError("step must be positive")
            lo, hi = min(a, b), max(a, b)
            n = int(math.floor((hi - lo) / st + 1e-9))
            return [round(lo + k * st, 10) for k in range(n + 1)]
        return [float(v) for v in spec.split(",")]
    except ValueError as exc:
        raise CliError(f"bad --thresholds {spec!r}: {exc}", 1) from exc


def _baseline_cfg(args) -> BaselineConfig:
    try:
        return BaselineConfig(
            w_tau=args.w_tau, w_phi=args.w_phi, alpha=args.alpha, k_max=args.k_max, eps=args.eps,
            min_pts=args.min_pts, metric=args.metric, zeta=args.zeta, seed=stage_seed(args.seed, "baseline"),
        )
    except ValueError as exc:
        raise CliError(str(exc), 1) from exc


def _run_algorithm(pdap, args, algorithm: str, threshold: float):
    if algorithm == "proposed":
        out = cluster_pdap(pdap, threshold, args.step_percent, args.n_smooth, args.seed)
        return out.result
    from .pdap import denoise

    samples = denoise(pdap, threshold)
    if len(samples) < 2:
        raise CliError(f"only {len(samples)} samples above {threshold} dB", 2)
    cfg = _baseline_cfg(args)
    if algorithm == "dbscan":
        res = dbscan(samples, cfg)
    else:
        k = args.k if args.k else elbow_k(samples, cfg)
        res = kmeans(samples, k, cfg) if algorithm == "kmeans" else kmeans_power(samples, k, cfg)
    res.provenance.update({"threshold_db": float(threshold), "seed": args.seed})
    return res


# --------------------------------------------------------------------------
# subcommands


def cmd_generate(args):
    if args.scene:
        try:
            scene = load_scene(args.scene)
        except FileNotFoundError as exc:
            raise CliError(f"file not found: {args.scene}", 1) from exc
        except (TypeError, ValueError) as exc:
            raise CliError(f"invalid scene {args.scene}: {exc}", 1) from exc
        if args.seed_override:
            scene = replace(scene, seed=stage_seed(args.seed, "synth"))
    else:
        scene = demo_scene(args.seed)
    _emit(args, generate_pdap(scene).to_dict())


def cmd_cluster(args):
    pdap = _load_pdap_any(args.pdap)
    res = _run_algorithm(pdap, args, args.algorithm, args.threshold_db)
    _emit(args, result_to_json(res))


def cmd_baseline(args):
    if args.algorithm == "proposed":
        raise CliError("baseline needs --algorithm kmeans, kmeans-power or dbscan", 1)
    cmd_cluster(args)


def _true_wall(path):
    if not path:
        return None
    scene = load_scene(path)
    return None if scene.wall is None else scene.wall.params


def cmd_fit(args):
    res = result_from_json(_read_json(args.result))
    try:
        cfg = RansacConfig(iterations=args.iterations, inlier_error_threshold=args.inlier_threshold,
                           w_prior=args.w_prior, seed=stage_seed(args.seed, "ransac"))
    except ValueError as exc:
        raise CliError(str(exc), 1) from exc
    prior = args.d_los_prior if args.d_los_prior is not None else d_los_prior_from_samples(res.samples)
    truth = _true_wall(args.scene)
    reports = []
    for c in res.clusters:
        if args.model == "wall":
            try:
                fit = ransac_fit(c.cps, prior, cfg)
            except ValueError as exc:
                raise CliError(f"cluster {c.id}: {exc}", 2) from exc
            entry = {"model": "wall", **fit.to_dict()}
            wall = fit
        elif args.model == "point":
            pt = fit_point_model(c.cps, res.context, c.dominant)
            entry = {"model": "point", "params": pt.to_dict()}
            wall = None
        else:
            m = select_model(c.cps, c.dominant, prior, cfg, res.context)
            entry = m.to_dict()
            wall = m.wall if m.kind == "wall" else None
        if wall is not None and truth is not None:
            pts = reconstruct_wall(wall.params, wall.x[wall.inliers])
            entry["rmse_m"] = wall_rmse(pts, truth)
        entry["id"] = c.id
        entry["n_cps"] = len(c.cps)
        reports.append(entry)
    _emit(args, {"clusters": reports, "d_los_prior_m": prior, "ransac": {
        "iterations": cfg.iterations, "n_s": cfg.n_s, "inlier_error_threshold": cfg.inlier_error_threshold,
        "w_prior": cfg.w_prior, "seed": cfg.seed}})


def cmd_metrics(args):
    res = result_from_json(_read_json(args.result))
    _emit(args, evaluate(res).to_dict())


def cmd_sweep(args):
    pdap = _load_pdap_any(args.pdap)
    thresholds = _thresholds(args.thresholds, args.step_db)
    algos = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise CliError(f"unknown algorithm(s): {bad}", 1)
    counts = {a: [] for a in algos}
    for t in thresholds:
        for a in algos:
            counts[a].append(len(_run_algorithm(pdap, args, a, t).clusters))
    table = {"thresholds_db": thresholds, "counts": counts}
    if not args.stdout:
        width = max(len(a) for a in algos)
        lines = ["threshold_db  " + "  ".join(a.rjust(width) for a in algos)]
        for i, t in enumerate(thresholds):
            lines.append(f"{t:12.2f}  " + "  ".join(str(counts[a][i]).rjust(width) for a in algos))
        print("\n".join(lines))
    if args.out or args.stdout:
        _emit(args, table)


def cmd_plot(args):
    pdap = _load_pdap_any(args.pdap) if args.pdap else None
    walls = []
    if args.fit:
        for entry in _read_json(args.fit).get("clusters", []):
            if entry.get("model") == "wall":
                prm = entry["params"]
                walls.append(WallParams(prm["d_los_m"], prm["d_perp_m"], prm["theta_deg"], tuple(prm["x_range_m"])))
    if args.result:
        svg = render_result(result_from_json(_read_json(args.result)), pdap, walls=walls)
    elif args.sweep:
        svg = render_sweep(_read_json(args.sweep))
    elif pdap is not None:
        svg = render_pdap(pdap, args.floor_db)
    else:
        raise CliError("plot needs --result, --sweep or --pdap", 1)
    if not args.out:
        raise CliError("plot needs --out", 1)
    Path(args.out).write_text(svg)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (flags override it)")
    common.add_argument("--out", help="output file")
    common.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    common.add_argument("--stdout", action="store_true", help="also print the JSON artifact on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    algo = _Parser(add_help=False)
    algo.add_argument("--pdap", required=True, help="PDAP JSON/CSV (or a generate artifact)")
    algo.add_argument("--step-percent", type=float, default=0.02, help="contour step as a fraction of the range")
    algo.add_argument("--n-smooth", type=int, default=128, help="stations per smoothed contour")
    algo.add_argument("--k", type=int, default=None, help="k-means k (default: elbow method)")
    algo.add_argument("--k-max", type=int, default=10)
    algo.add_argument("--w-tau", type=float, default=1.0)
    algo.add_argument("--w-phi", type=float, default=1.0)
    algo.add_argument("--alpha", type=float, default=0.05, help="power weight per dB (kmeans-power)")
    algo.add_argument("--eps", type=float, default=None, help="DBSCAN radius (default: k-distance knee)")
    algo.add_argument("--min-pts", type=int, default=5)
    algo.add_argument("--metric", choices=("normalized_euclidean", "mcd"), default="normalized_euclidean")
    algo.add_argument("--zeta", type=float, default=1.0)

    p = _Parser(prog="mpc-topo", description="Topographic MPC clustering of PDAPs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="scene -> synthetic PDAP")
    g.add_argument("--scene", help="scene JSON (default: the five-source demo scene)")
    g.add_argument("--seed-override", action="store_true", help="replace the scene file's seed by one derived from --seed")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("cluster", parents=[common, algo], help="PDAP -> clustering result")
    c.add_argument("--threshold-db", type=float, required=True)
    c.add_argument("--algorithm", choices=ALGORITHMS, default="proposed")
    c.set_defaults(func=cmd_cluster)

    b = sub.add_parser("baseline", parents=[common, algo], help="PDAP -> baseline clustering result")
    b.add_argument("--threshold-db", type=float, required=True)
    b.add_argument("--algorithm", choices=ALGORITHMS, default="kmeans")
    b.set_defaults(func=cmd_baseline)

    f = sub.add_parser("fit", parents=[common], help="clustering result -> scatterer models")
    f.add_argument("--result", required=True)
    f.add_argument("--scene", help="scene JSON with the true wall, for rmse_m")
    f.add_argument("--model", choices=("auto", "wall", "point"), default="auto")
    f.add_argument("--d-los-prior", type=float, default=None, help="metres (default: c times strongest delay)")
    f.add_argument("--iterations", type=int, default=10000)
    f.add_argument("--inlier-threshold", type=float, default=0.5)
    f.add_argument("--w-prior", type=float, default=2.0)
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("metrics", parents=[common], help="clustering result -> validity indices")
    m.add_argument("--result", required=True)
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("sweep", parents=[common, algo], help="cluster count per algorithm per threshold")
    s.add_argument("--thresholds", required=True, help="T1..T2[:step] or a comma list (dB)")
    s.add_argument("--step-db", type=float, default=1.0)
    s.add_argument("--algorithms", default="proposed,dbscan,kmeans")
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", parents=[common], help="artifact -> SVG")
    pl.add_argument("--result")
    pl.add_argument("--pdap")
    pl.add_argument("--fit", help="fit report whose wall curves are drawn")
    pl.add_argument("--sweep", help="sweep table JSON")
    pl.add_argument("--floor-db", type=float, default=None)
    pl.set_defaults(func=cmd_plot)
    return p


def _apply_config(parser, argv):
    """Load --config as defaults for the chosen subcommand, then parse the command line."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if not known.config or command is None:
        return parser.parse_args(argv)
    cfg = _read_json(known.config)
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object", 1)
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    cmd = cfg.pop("command", command)
    if cmd != command:
        raise CliError(f"config is for {cmd!r}, not {command!r}", 1)
    sub = choices[command]
    known_keys = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known_keys)
    if unknown:
        raise CliError(f"unknown config keys: {unknown}", 1)
    for a in sub._actions:
        if a.dest in cfg:
            a.required = False
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    # known before parsing, so usage errors also reach stdout
    want_json = "--stdout" in argv
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
        return 0
    except CliError as exc:
        code, err = exc.code, exc
    except (PdapFormatError, PdapValidationError, FileNotFoundError) as exc:
        code, err = 1, exc
    except (RansacFailure, ContourTreeError, DegenerateAxisError, UndefinedCorrelation) as exc:
        code, err = 2, exc
    except ValueError as exc:
        code, err = 2, exc
    payload = dumps({"error": {"type": type(err).__name__, "message": str(err), "exit_code": code}})
    sys.stderr.write(payload)
    if want_json:
        sys.stdout.write(payload)
    return code


if __name__ == "__main__":
    sys.exit(main())
