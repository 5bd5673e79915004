"""Synthetic PDAPs from a declarative 2-D scene, with per-node ground-truth labels.

Every source contributes a dB-domain surface; a node takes the maximum over
sources and the noise floor, and its label is the winning source (-1 when the
floor wins). Reflectors are labelled 0..K-1 in declaration order and the wall,
when present, is K.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .pdap import Pdap, pdap_to_dict
from .scatterer import ANGLE_OFFSET_DEG, C_M_PER_NS, WallParams, forward_model

__all__ = [
    "GridSpec",
    "PointReflector",
    "WallSpec",
    "SceneSpec",
    "SynthResult",
    "NOISE_LABEL",
    "generate_pdap",
    "scene_from_dict",
    "scene_to_dict",
    "load_scene",
    "demo_scene",
    "reflector_delay_angle",
]

NOISE_LABEL = -1
LOBE_SHAPES = ("paraboloid", "diamond")


@dataclass
class GridSpec:
    delay_min: float = 20.0
    delay_max: float = 80.0
    delay_step: float = 0.5
    angle_min: float = 60.0
    angle_max: float = 240.0
    angle_step: float = 1.0

    def __post_init__(self):
        if not (self.delay_step > 0 and self.angle_step > 0):
            raise ValueError("grid steps must be positive")
        if not (self.delay_max > self.delay_min and self.angle_max > self.angle_min):
            raise ValueError("grid ranges must be increasing")

    def axes(self):
        nd = int(round((self.delay_max - self.delay_min) / self.delay_step)) + 1
        na = int(round((self.angle_max - self.angle_min) / self.angle_step)) + 1
        return (self.delay_min + self.delay_step * np.arange(nd),
                self.angle_min + self.angle_step * np.arange(na))


@dataclass
class PointReflector:
    """A lobe at (tau0, phi0), or at ``position`` (m, Tx-origin frame) if given.

    ``paraboloid`` lobes drop by dtau^2/2s_tau^2 + dphi^2/2s_phi^2 dB (elliptic
    contours); ``diamond`` lobes drop by (|dtau|/s_tau + |dphi|/s_phi)^2 / 2
    (rhombic contours whose corners lie on two perpendicular lines).
    """

    tau0: float | None = None
    phi0: float | None = None
    peak_db: float = -90.0
    sigma_tau: float = 1.0
    sigma_phi: float = 3.0
    position: tuple[float, float] | None = None
    shape: str = "paraboloid"

    def __post_init__(self):
        if not (self.sigma_tau > 0 and self.sigma_phi > 0):
            raise ValueError("lobe sigmas must be positive")
        if self.shape not in LOBE_SHAPES:
            raise ValueError(f"lobe shape must be one of {LOBE_SHAPES}")
        if self.position is None and (self.tau0 is None or self.phi0 is None):
            raise ValueError("a reflector needs (tau0, phi0) or a position")


@dataclass
class WallSpec:
    """Ridge along the wall curve for abscissae in ``x_span``.

    Power is ``peak_db`` at ``x_span[0]`` and falls by ``decay_db_per_m`` per
    metre towards ``x_span[1]``; across the ridge it falls as d^2/2, d being
    the distance to the curve in units of ``ridge_sigma`` = (ns, deg).
    """

    d_los: float
    d_perp: float
    theta: float
    x_span: tuple[float, float] = (0.0, 8.0)
    peak_db: float = -95.0
    decay_db_per_m: float = 2.0
    ridge_sigma: tuple[float, float] = (0.8, 4.0)

    def __post_init__(self):
        st, sp = self.ridge_sigma
        if not (st > 0 and sp > 0):
            raise ValueError("ridge sigmas must be positive")

    @property
    def params(self) -> WallParams:
        return WallParams(self.d_los, self.d_perp, self.theta)


@dataclass
class SceneSpec:
    tx: tuple[float, float] = (0.0, 0.0)
    rx: tuple[float, float] | None = None
    point_reflectors: list = field(default_factory=list)
    wall: WallSpec | None = None
    noise_floor_db: float = -130.0
    noise_sigma_db: float = 1.0
    grid: GridSpec = field(default_factory=GridSpec)
    seed: int = 0
    angle_offset: float = ANGLE_OFFSET_DEG

    def __post_init__(self):
        if self.noise_sigma_db < 0:
            raise ValueError("noise_sigma_db must be non-negative")
        if self.wall is not None:
            lo, hi = sorted(self.wall.x_span)
            if lo < -0.2 * self.wall.d_los or hi > 1.2 * self.wall.d_los:
                raise ValueError("wall x_span leaves the hidden-variable search range")
            if self.rx is not None:
                d = math.dist(self.tx, self.rx)
                if abs(d - self.wall.d_los) > 1e-6 * max(1.0, d):
                    raise ValueError("wall d_los disagrees with the Tx-Rx distance")


@dataclass
class SynthResult:
    pdap: Pdap
    labels: np.ndarray  # per grid node
    source_names: list

    def to_dict(self) -> dict:
        d = pdap_to_dict(self.pdap)
        d["labels"] = self.labels.tolist()
        d["sources"] = list(self.source_names)
        return d


def _frame(scene: SceneSpec):
    """Rotation/translation taking world coordinates to the Tx-origin frame with Rx on +x."""
    tx = np.asarray(scene.tx, float)
    if scene.rx is None:
        d = scene.wall.d_los if scene.wall is not None else None
        return tx, np.eye(2), d
    rx = np.asarray(scene.rx, float)
    v = rx - tx
    d = float(np.hypot(*v))
    if d == 0:
        raise ValueError("Tx and Rx coincide")
    c, s = v / d
    return tx, np.array([[c, s], [-s, c]]), d


def reflector_delay_angle(position, d_los: float, angle_offset: float = ANGLE_OFFSET_DEG):
    """Single-bounce (tau ns, phi deg) of a point at ``position`` in the Tx-origin frame."""
    x, y = position
    path = math.hypot(x, y) + math.hypot(x - d_los, y)
    ang = math.atan2(y, d_los - x) % math.pi
    return path / C_M_PER_NS, math.degrees(ang) + angle_offset


def _lobe(r: PointReflector, tt, pp, scene):
    if r.position is not None:
        origin, rot, d = _frame(scene)
        if d is None:
            raise ValueError("a positioned reflector needs rx or a wall")
        local = rot @ (np.asarray(r.position, float) - origin)
        tau0, phi0 = reflector_delay_angle(local, d, scene.angle_offset)
    else:
        tau0, phi0 = r.tau0, r.phi0
    u = np.abs(tt - tau0) / r.sigma_tau
    v = np.abs(pp - phi0) / r.sigma_phi
    if r.shape == "diamond":
        return r.peak_db - 0.5 * (u + v) ** 2
    return r.peak_db - 0.5 * (u * u + v * v)


def _ridge(w: WallSpec, tt, pp, offset, n_curve=4001):
    xs = np.linspace(w.x_span[0], w.x_span[1], n_curve)
    ct, cp = forward_model(w.params, xs, offset)
    st, sp = w.ridge_sigma
    curve = np.column_stack([ct / st, cp / sp])
    dist, k = cKDTree(curve).query(np.column_stack([tt.ravel() / st, pp.ravel() / sp]))
    along = np.abs(xs[k] - w.x_span[0])
    out = w.peak_db - w.decay_db_per_m * along - 0.5 * dist ** 2
    return out.reshape(tt.shape)


def generate_pdap(scene: SceneSpec) -> SynthResult:
    """Grid of max-combined source surfaces over a jittered noise floor."""
    delay, angle = scene.grid.axes()
    tt, pp = np.meshgrid(delay, angle, indexing="ij")
    layers = [_lobe(r, tt, pp, scene) for r in scene.point_reflectors]
    names = [f"reflector{k}" for k in range(len(scene.point_reflectors))]
    if scene.wall is not None:
        layers.append(_ridge(scene.wall, tt, pp, scene.angle_offset))
        names.append("wall")

    rng = np.random.default_rng(scene.seed)
    floor = scene.noise_floor_db + scene.noise_sigma_db * rng.standard_normal(tt.shape)
    if layers:
        stack = np.stack(layers)
        best = np.argmax(stack, axis=0)
        top = np.take_along_axis(stack, best[None], 0)[0]
        # jitter only perturbs the floor, so source surfaces keep their exact shape
        src = top > scene.noise_floor_db
        power = np.where(src, top, floor)
        labels = np.where(src, best, NOISE_LABEL)
    else:
        power = floor
        labels = np.full(tt.shape, NOISE_LABEL)
    meta = {"generator": "synth", "seed": scene.seed, "sources": names}
    return SynthResult(Pdap(delay, angle, power, meta), labels.astype(np.int64), names)


# --------------------------------------------------------------------------
# scene files


def scene_to_dict(scene: SceneSpec) -> dict:
    return asdict(scene)


def _tuple(v):
    return None if v is None else tuple(v)


def scene_from_dict(d: dict) -> SceneSpec:
    d = dict(d)
    refl = []
    for r in d.pop("point_reflectors", []):
        r = dict(r)
        r["position"] = _tuple(r.get("position"))
        refl.append(PointReflector(**r))
    wall = d.pop("wall", None)
    if wall is not None:
        wall = dict(wall)
        for key in ("x_span", "ridge_sigma"):
            if key in wall:
                wall[key] = tuple(wall[key])
        wall = WallSpec(**wall)
    grid = GridSpec(**d.pop("grid", {}))
    for key in ("tx", "rx"):
        if key in d:
            d[key] = _tuple(d[key])
    return SceneSpec(point_reflectors=refl, wall=wall, grid=grid, **d)


def load_scene(path) -> SceneSpec:
    return scene_from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# the five-source demo


RX1 = (10.3329, 4.3406, 9.8698)


def demo_scene(seed: int = 0, jitter: bool = True) -> SceneSpec:
    """LoS lobe, one wall ridge and three diamond-shaped reflector lobes.

    Two of the reflectors touch through a saddle near -119 dB, so their joint
    support splits or merges as the power threshold crosses it. ``seed``
    drives the floor noise and, with ``jitter``, small perturbations of the
    source positions and strengths.
    """
    rng = np.random.default_rng([seed, 1])
    j = (lambda s: float(rng.uniform(-s, s))) if jitter else (lambda s: 0.0)
    d_los, d_perp, theta = RX1
    los_tau = d_los / C_M_PER_NS
    lobe = (0.4, 2.0)
    # reflectors 1 and 3 move together so the saddle between them stays near -119 dB
    dt, dp = j(1.0), j(4.0)
    reflectors = [
        PointReflector(los_tau, ANGLE_OFFSET_DEG, -85.0 + j(1.0), *lobe, shape="diamond"),
        PointReflector(50.0 + dt, 175.0 + dp, -100.0 + j(1.0), *lobe, shape="diamond"),
        PointReflector(70.0 + j(1.5), 120.0 + j(5.0), -104.0 + j(1.5), *lobe, shape="diamond"),
        PointReflector(50.0 + dt, 199.5 + dp, -102.0 + j(1.0), *lobe, shape="diamond"),
    ]
    wall = WallSpec(d_los, d_perp, theta, x_span=(8.0, 1.0), peak_db=-96.0 + j(1.0),
                    decay_db_per_m=1.5, ridge_sigma=lobe)
    return SceneSpec(tx=(0.0, 0.0), rx=(d_los, 0.0), point_reflectors=reflectors, wall=wall,
                     noise_floor_db=-130.0, noise_sigma_db=1.0, grid=GridSpec(), seed=seed)
