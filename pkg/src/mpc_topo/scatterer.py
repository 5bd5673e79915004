"""Physical scatterer models fitted to characteristic points.

Two explanations are offered for a CP cluster:

* a point scatterer, whose CPs lie on two perpendicular lines through the
  dominant path (fitted in sigma-normalised delay/angle coordinates);
* a wide-spread planar scatterer (a wall). Tx sits at the origin, Rx at
  ``(d_los, 0)``, and the wall is the line ``y = d_perp - x * tan(theta)``.
  A wall point at abscissa ``x`` produces a single-bounce path with

      tau(x) = (|P - Rx| + |P - Tx|) / c
      phi(x) = mod(atan((d_perp - x tan theta) / (d_los - x)), 180) + 90

  where ``x`` is a per-CP hidden variable.

Wall fitting uses RANSAC with partitioned minimal samples. Within an
iteration, hidden variables and the three wall parameters are updated
alternately. The per-CP error combines the delay residual in metres (c * dtau),
the angle residual in degrees and a prior on the LoS distance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import speed_of_light

from ._parallel import ordered_map
from .pdap import MpcSample, NormalizationContext

__all__ = [
    "C_M_PER_NS",
    "ANGLE_OFFSET_DEG",
    "WallParams",
    "WallFit",
    "PointScatterer",
    "ScattererModel",
    "RansacConfig",
    "RansacFailure",
    "forward_model",
    "residual",
    "optimize_hidden",
    "refine_wall",
    "ransac_fit",
    "fit_point_model",
    "select_model",
    "reconstruct_wall",
    "wall_line",
    "wall_rmse",
    "invert_to_plane",
    "d_los_prior_from_samples",
]

log = logging.getLogger(__name__)

C_M_PER_NS = speed_of_light * 1e-9
# angle datum of the measurement frame (west = 0 deg, clockwise); exposed rather than hard-coded
ANGLE_OFFSET_DEG = 90.0

_GOLD = (math.sqrt(5.0) - 1.0) / 2.0
_DEG = 180.0 / math.pi


class RansacFailure(RuntimeError):
    """No RANSAC hypothesis reached the required inlier fraction."""

    def __init__(self, best_fraction: float):
        super().__init__(f"no consensus: best inlier fraction {best_fraction:.3f}")
        self.best_fraction = best_fraction


@dataclass(frozen=True)
class WallParams:
    d_los: float
    d_perp: float
    theta: float
    x_range: tuple[float, float] = (math.nan, math.nan)

    def is_valid(self) -> bool:
        return self.d_los > 0 and self.d_perp > 0 and abs(self.theta) < 90.0

    def to_dict(self) -> dict:
        return {"d_los_m": self.d_los, "d_perp_m": self.d_perp, "theta_deg": self.theta,
                "x_range_m": list(self.x_range)}


@dataclass
class RansacConfig:
    n_s: int = 10
    iterations: int = 10000
    inlier_fraction_min: float = 0.30
    inlier_error_threshold: float = 0.5
    w_prior: float = 2.0
    seed: int = 0
    max_rounds: int = 50
    batch_size: int = 200
    angle_offset: float = ANGLE_OFFSET_DEG
    threads: int | None = None

    def __post_init__(self):
        if self.n_s < 4:
            raise ValueError("n_s must be at least 4")
        if not 0 < self.inlier_fraction_min <= 1:
            raise ValueError("inlier_fraction_min must lie in (0, 1]")
        if self.iterations < 1 or self.batch_size < 1 or self.max_rounds < 1:
            raise ValueError("iterations, batch_size and max_rounds must be positive")
        if not self.inlier_error_threshold > 0:
            raise ValueError("inlier_error_threshold must be positive")
        if self.w_prior < 0:
            raise ValueError("w_prior must be non-negative")


# --------------------------------------------------------------------------
# wall model, vectorised over broadcastable arrays


def _model(d, p, tt, x, offset):
    """Path length (m) and AoA (deg)."""
    q = p - x * tt
    path = np.hypot(x - d, q) + np.hypot(x, q)
    ang = np.arctan2(q, d - x)
    phi = np.degrees(np.where(ang < 0, ang + np.pi, np.where(ang >= np.pi, ang - np.pi, ang))) + offset
    return path, phi


def _sq_err(d, p, tt, x, obs_m, obs_phi, offset):
    path, phi = _model(d, p, tt, x, offset)
    return (obs_m - path) ** 2 + (obs_phi - phi) ** 2


def forward_model(params: WallParams, x, angle_offset: float = ANGLE_OFFSET_DEG):
    """(tau ns, phi deg) of the wall point at abscissa ``x`` (m)."""
    tt = math.tan(math.radians(params.theta))
    path, phi = _model(params.d_los, params.d_perp, tt, np.asarray(x, float), angle_offset)
    return path / C_M_PER_NS, phi


def residual(params: WallParams, d_los_prior: float, w_prior: float, cp, x,
             angle_offset: float = ANGLE_OFFSET_DEG):
    """Per-CP error: delay mismatch in metres, angle mismatch in degrees, LoS-prior penalty."""
    tau, phi = cp
    f_tau, f_phi = forward_model(params, x, angle_offset)
    dd = C_M_PER_NS * (np.asarray(tau, float) - f_tau)
    dphi = np.asarray(phi, float) - f_phi
    return np.sqrt(dd ** 2 + dphi ** 2 + w_prior * (params.d_los - d_los_prior) ** 2)


def _hidden_search(d, p, tt, obs_m, obs_phi, offset, n_grid=200, tol=1e-4, x_start=None):
    """argmin_x of the squared data error over x in [-0.2 d, 1.2 d].

    Coarse grid then golden section, checked against the foot of the CP's
    inverted plane point.

    With ``x_start`` the grid scan is skipped and the golden section runs on
    ``x_start +- 3`` grid spacings (warm start between nearby parameter sets).
    """
    d, p, tt, obs_m, obs_phi = np.broadcast_arrays(d, p, tt, obs_m, obs_phi)
    lo = -0.2 * d
    hi = 1.2 * d
    h = (hi - lo) / (n_grid - 1)
    if x_start is None:
        frac = np.linspace(0.0, 1.0, n_grid)
        grid = lo[..., None] + (hi - lo)[..., None] * frac
        cost = _sq_err(d[..., None], p[..., None], tt[..., None], grid, obs_m[..., None], obs_phi[..., None], offset)
        k = np.argmin(cost, axis=-1)
        xk = np.take_along_axis(grid, k[..., None], -1)[..., 0]
        fk = np.take_along_axis(cost, k[..., None], -1)[..., 0]
        a = np.maximum(xk - h, lo)
        b = np.minimum(xk + h, hi)
    else:
        xk = np.clip(np.broadcast_to(x_start, d.shape), lo, hi)
        fk = _sq_err(d, p, tt, xk, obs_m, obs_phi, offset)
        a = np.maximum(xk - 3 * h, lo)
        b = np.minimum(xk + 3 * h, hi)

    def f(x):
        return _sq_err(d, p, tt, x, obs_m, obs_phi, offset)

    width = float(np.max(b - a)) if a.size else 0.0
    n_it = max(0, int(math.ceil(math.log(max(width, tol) / tol) / -math.log(_GOLD))))
    c = b - _GOLD * (b - a)
    e = a + _GOLD * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(n_it):
        left = fc < fe
        a = np.where(left, a, c)
        b = np.where(left, e, b)
        new = np.where(left, b - _GOLD * (b - a), a + _GOLD * (b - a))
        fn = f(new)
        c, e = np.where(left, new, e), np.where(left, c, new)
        fc, fe = np.where(left, fn, fe), np.where(left, fc, fn)
    xs = 0.5 * (a + b)
    fs = f(xs)
    better = fs <= fk
    xk, fk = np.where(better, xs, xk), np.where(better, fs, fk)
    # closed-form candidates also compete; they win where the AoA fold breaks unimodality
    for px, py in _invert_pair(d, obs_m, obs_phi, offset):
        with np.errstate(invalid="ignore"):
            xf = (px - (py - p) * tt) / (1.0 + tt * tt)
        xf = np.clip(np.where(np.isfinite(xf), xf, xk), lo, hi)
        ff = f(xf)
        better = ff < fk
        xk, fk = np.where(better, xf, xk), np.where(better, ff, fk)
    return xk, fk


def optimize_hidden(params: WallParams, d_los_prior: float, w_prior: float, cp,
                    angle_offset: float = ANGLE_OFFSET_DEG):
    """Best hidden abscissa ``x*`` and its error for CP(s) ``cp = (tau, phi)``.

    The prior term does not depend on ``x``, so it only shifts the reported error.
    """
    tau, phi = cp
    tt = math.tan(math.radians(params.theta))
    x, sq = _hidden_search(params.d_los, params.d_perp, tt, C_M_PER_NS * np.asarray(tau, float),
                           np.asarray(phi, float), angle_offset)
    e = np.sqrt(sq + w_prior * (params.d_los - d_los_prior) ** 2)
    if np.ndim(x) == 0:
        return float(x), float(e)
    return x, e


def _jacobians(d, p, th, x, offset):
    """Model derivatives w.r.t. (d_los, d_perp, theta[rad]) and w.r.t. x."""
    tt = np.tan(th)
    sec2 = 1.0 + tt * tt
    q = p - x * tt
    r1 = np.hypot(x - d, q)
    r2 = np.hypot(x, q)
    u = d - x
    g2 = u * u + q * q
    dpath_dq = q / r1 + q / r2
    dphi_dq = _DEG * u / g2
    dphi_du = -_DEG * q / g2
    dq_dth = -x * sec2
    jp = np.stack([
        np.stack([u / r1, dpath_dq, dpath_dq * dq_dth], -1),
        np.stack([dphi_du, dphi_dq, dphi_dq * dq_dth], -1),
    ], -2)  # (..., 2, 3)
    jx = np.stack([(x - d) / r1 + x / r2 - tt * dpath_dq, -dphi_du - tt * dphi_dq], -1)  # (..., 2)
    return jp, jx


def _x_gauss_newton(d, p, tt, x, obs_m, obs_phi, offset, steps=3):
    """Polish hidden variables with per-CP Gauss-Newton steps; a step is kept only if it helps."""
    lo, hi = -0.2 * d, 1.2 * d
    sq = _sq_err(d, p, tt, x, obs_m, obs_phi, offset)
    for _ in range(steps):
        q = p - x * tt
        r1 = np.hypot(x - d, q)
        r2 = np.hypot(x, q)
        u = d - x
        g2 = u * u + q * q
        path, phi = _model(d, p, tt, x, offset)
        dpath = (x - d) / r1 + x / r2 - tt * (q / r1 + q / r2)
        dphi = _DEG * (q - tt * u) / g2
        den = dpath * dpath + dphi * dphi
        dx = ((obs_m - path) * dpath + (obs_phi - phi) * dphi) / np.where(den > 0, den, 1.0)
        xn = np.clip(x + dx, lo, hi)
        sqn = _sq_err(d, p, tt, xn, obs_m, obs_phi, offset)
        better = sqn < sq
        x = np.where(better, xn, x)
        sq = np.where(better, sqn, sq)
    return x, sq


def _valid(d, p, th):
    return (d > 0) & (p > 0) & (np.abs(th) < math.radians(89.9))


def _objective(d, p, th, obs_m, obs_phi, w_prior, prior, offset):
    valid = _valid(d, p, th)
    tt = np.tan(np.where(valid, th, 0.0))
    x, sq = _hidden_search(d[..., None], p[..., None], tt[..., None], obs_m, obs_phi, offset)
    n = obs_m.shape[-1]
    cost = np.sum(sq, -1) + n * w_prior * (d - prior) ** 2
    return np.where(valid, cost, np.inf), x


def _foot_x(d, p, tt, obs_m, obs_phi, offset):
    """Abscissa of the foot, on the wall line, of each CP's inverted plane point."""
    px, py = _invert(d, obs_m, obs_phi, offset)
    x0 = (px - (py - p) * tt) / (1.0 + tt * tt)
    return np.clip(np.where(np.isfinite(x0), x0, 0.5 * d), -0.2 * d, 1.2 * d)


def _refine(d, p, th, obs_m, obs_phi, w_prior, prior, offset, max_rounds, exhaustive=True):
    """Alternate hidden-variable updates and Gauss-Newton steps on (d_los, d_perp, theta).

    Batched over the leading axis. Hidden variables start from the full grid
    search; between parameter steps they are polished by per-CP Gauss-Newton
    from the linearised prediction. The parameter step uses the Jacobian with
    each CP's own x-direction projected out, so it accounts for the hidden
    variables re-adjusting. Steps are halved until the cost does not increase.
    Convergence: largest parameter change below 1e-6 (m, deg).

    ``exhaustive=False`` replaces the bracketing grid search at entry and exit
    by the geometric warm start (used for RANSAC hypotheses).
    """
    d, p, th = (np.array(v, float) for v in (d, p, th))
    n = obs_m.shape[-1]
    if exhaustive:
        cost, x = _objective(d, p, th, obs_m, obs_phi, w_prior, prior, offset)
    else:
        valid = _valid(d, p, th)
        tt = np.tan(np.where(valid, th, 0.0))[..., None]
        x = _foot_x(d[..., None], p[..., None], tt, obs_m, obs_phi, offset)
        x, sq = _x_gauss_newton(d[..., None], p[..., None], tt, x, obs_m, obs_phi, offset, steps=4)
        cost = np.where(valid, np.sum(sq, -1) + n * w_prior * (d - prior) ** 2, np.inf)
    active = np.isfinite(cost)
    sw = math.sqrt(n * w_prior)
    for _ in range(max_rounds):
        if not active.any():
            break
        jp, jx = _jacobians(d[..., None], p[..., None], th[..., None], x, offset)
        path, phi = _model(d[..., None], p[..., None], np.tan(th)[..., None], x, offset)
        r = np.stack([obs_m - path, obs_phi - phi], -1)  # (B, n, 2)
        nx = np.sum(jx * jx, -1, keepdims=True)
        nx = np.where(nx > 0, nx, 1.0)
        proj = np.einsum("...k,...kj->...j", jx, jp) / nx  # (B, n, 3)
        jred = -(jp - jx[..., None] * proj[..., None, :])
        jj = jred.reshape(d.shape + (2 * n, 3))
        rr = r.reshape(d.shape + (2 * n,))
        a = np.einsum("...ki,...kj->...ij", jj, jj)
        g = np.einsum("...ki,...k->...i", jj, rr)
        a[..., 0, 0] += sw * sw
        g[..., 0] += sw * (sw * (d - prior))
        a = a + 1e-12 * np.eye(3) * (np.trace(a, axis1=-2, axis2=-1)[..., None, None] + 1e-12)
        try:
            delta = -np.linalg.solve(a, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            delta = -np.einsum("...ij,...j->...i", np.linalg.pinv(a), g)
        delta = np.where(active[..., None] & np.isfinite(delta), delta, 0.0)

        accepted = ~active
        step = np.zeros_like(delta)
        for _half in range(10):
            cand = np.stack([d, p, th], -1) + delta
            cd, cp_, cth = cand[..., 0], cand[..., 1], cand[..., 2]
            valid = _valid(cd, cp_, cth)
            ctt = np.tan(np.where(valid, cth, 0.0))
            # linearised hidden-variable shift, then polish
            x0 = x + np.sum(jx * (r - np.einsum("...kj,...j->...k", jp, delta[..., None, :])), -1) / nx[..., 0]
            cx, csq = _x_gauss_newton(cd[..., None], cp_[..., None], ctt[..., None], x0, obs_m, obs_phi, offset)
            c_cost = np.where(valid, np.sum(csq, -1) + n * w_prior * (cd - prior) ** 2, np.inf)
            ok = (~accepted) & (c_cost <= cost)
            d = np.where(ok, cd, d)
            p = np.where(ok, cp_, p)
            th = np.where(ok, cth, th)
            cost = np.where(ok, c_cost, cost)
            x = np.where(ok[..., None], cx, x)
            step = np.where(ok[..., None], delta, step)
            accepted |= ok
            if accepted.all():
                break
            delta = np.where(accepted[..., None], delta, 0.5 * delta)
        moved = np.abs(step)
        moved[..., 2] = np.degrees(moved[..., 2])
        active &= accepted & (moved.max(-1) >= 1e-6)
    if not exhaustive:
        return d, p, th, x, cost
    final_cost, x_full = _objective(d, p, th, obs_m, obs_phi, w_prior, prior, offset)
    better = final_cost < cost
    return d, p, th, np.where(better[..., None], x_full, x), np.where(better, final_cost, cost)


def _invert(d, obs_m, obs_phi, offset):
    """Wall-plane point reached by a single-bounce path of length ``obs_m`` arriving at AoA ``obs_phi``."""
    beta = np.radians(np.mod(obs_phi - offset, 180.0))
    cb = np.cos(beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (obs_m ** 2 - d ** 2) / (2.0 * (obs_m - d * cb))
    return d - r * cb, r * np.sin(beta)


def _invert_pair(d, obs_m, obs_phi, offset):
    """Both points of the delay ellipse on the AoA line through Rx (the AoA is folded mod 180 deg)."""
    beta = np.radians(np.mod(obs_phi - offset, 180.0))
    cb, sb = np.cos(beta), np.sin(beta)
    k = 0.5 * (obs_m ** 2 - d ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = k / (obs_m - d * cb)
        r2 = k / (obs_m + d * cb)
    return (d - r1 * cb, r1 * sb), (d + r2 * cb, -r2 * sb)


def invert_to_plane(tau, phi, d_los: float, angle_offset: float = ANGLE_OFFSET_DEG):
    """(x, y) in the Tx frame of the scatterer of a single-bounce path; inverse of the forward model."""
    return _invert(d_los, C_M_PER_NS * np.asarray(tau, float), np.asarray(phi, float), angle_offset)


def _initial_guess(d, obs_m, obs_phi, offset):
    x, y = _invert(d[..., None], obs_m, obs_phi, offset)
    mx = np.nanmean(x, -1, keepdims=True)
    my = np.nanmean(y, -1, keepdims=True)
    vx = np.nanmean((x - mx) ** 2, -1)
    cxy = np.nanmean((x - mx) * (y - my), -1)
    slope = np.where(vx > 1e-12, cxy / np.where(vx > 1e-12, vx, 1.0), 0.0)
    slope = np.nan_to_num(slope)
    p0 = np.nan_to_num(my[..., 0] - slope * mx[..., 0], nan=1.0)
    th0 = np.clip(np.arctan(-slope), -math.radians(80), math.radians(80))
    return np.maximum(p0, 0.05 * d), th0


def _as_obs(cps):
    if hasattr(cps, "shape"):
        arr = np.asarray(cps, float).reshape(-1, 2)
        return arr[:, 0], arr[:, 1]
    cps = list(cps)
    if cps and hasattr(cps[0], "tau"):
        return np.array([c.tau for c in cps], float), np.array([c.phi for c in cps], float)
    arr = np.asarray(cps, float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


@dataclass
class WallFit:
    params: WallParams
    inliers: np.ndarray
    x: np.ndarray
    errors: np.ndarray
    mean_inlier_error: float
    inlier_fraction: float
    d_los_prior: float
    w_prior: float

    def data_residuals(self, tau, phi, angle_offset: float = ANGLE_OFFSET_DEG) -> np.ndarray:
        _, sq = optimize_hidden(self.params, self.params.d_los, 0.0, (tau, phi), angle_offset)
        return np.asarray(sq)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "inlier_mask": self.inliers.astype(bool).tolist(),
            "mean_inlier_error": self.mean_inlier_error,
            "inlier_fraction": self.inlier_fraction,
            "d_los_prior_m": self.d_los_prior,
        }


def refine_wall(cps, d_los_prior: float, init: WallParams | None = None, w_prior: float = 2.0,
                max_rounds: int = 50, angle_offset: float = ANGLE_OFFSET_DEG):
    """Least-squares wall fit of all given CPs (no outlier rejection); returns (params, x, errors)."""
    tau, phi = _as_obs(cps)
    obs_m = (C_M_PER_NS * tau)[None, :]
    obs_phi = phi[None, :]
    if init is None:
        d0 = np.array([d_los_prior], float)
        p0, th0 = _initial_guess(d0, obs_m, obs_phi, angle_offset)
    else:
        d0 = np.array([init.d_los])
        p0 = np.array([init.d_perp])
        th0 = np.array([math.radians(init.theta)])
    d, p, th, x, _ = _refine(d0, p0, th0, obs_m, obs_phi, w_prior, d_los_prior, angle_offset, max_rounds)
    x = x[0]
    params = WallParams(float(d[0]), float(p[0]), float(math.degrees(th[0])), (float(x.min()), float(x.max())))
    err = residual(params, d_los_prior, w_prior, (tau, phi), x, angle_offset)
    return params, x, err


def ransac_fit(cps, d_los_prior: float, cfg: RansacConfig | None = None) -> WallFit:
    """Robust wall fit with partitioned minimal samples.

    Each iteration draws one CP from each of ``n_s`` contiguous delay-sorted
    partitions. It fits the wall to those CPs and scores every CP. Among the
    hypotheses with enough inliers, the one with the lowest mean inlier error
    wins and is refitted on its inliers. Iteration ``i`` depends only on
    ``(cfg.seed, i // cfg.batch_size)``, so results are independent of threading.
    """
    cfg = cfg or RansacConfig()
    tau, phi = _as_obs(cps)
    n = tau.size
    if n < cfg.n_s:
        raise ValueError(f"need at least n_s={cfg.n_s} CPs, got {n}")
    order = np.argsort(tau, kind="stable")
    parts = np.array_split(order, cfg.n_s)
    p_start = np.array([0] + list(np.cumsum([len(q) for q in parts])[:-1]))
    p_size = np.array([len(q) for q in parts])
    obs_m_all = C_M_PER_NS * tau
    off = cfg.angle_offset
    n_batches = int(math.ceil(cfg.iterations / cfg.batch_size))

    def run_batch(b):
        size = min(cfg.batch_size, cfg.iterations - b * cfg.batch_size)
        rng = np.random.default_rng([cfg.seed, b])
        u = rng.random((size, cfg.n_s))
        pick = order[p_start + np.floor(u * p_size).astype(np.int64)]
        om, op = obs_m_all[pick], phi[pick]
        d0 = np.full(size, float(d_los_prior))
        p0, th0 = _initial_guess(d0, om, op, off)
        d, p, th, _, cost = _refine(d0, p0, th0, om, op, cfg.w_prior, d_los_prior, off, cfg.max_rounds,
                                    exhaustive=False)
        good = np.isfinite(cost)
        tt = np.tan(np.where(good, th, 0.0))
        # score all CPs from the foot of their inverted plane point on the candidate wall
        x0 = _foot_x(d[:, None], p[:, None], tt[:, None], obs_m_all[None, :], phi[None, :], off)
        _, sq = _x_gauss_newton(d[:, None], p[:, None], tt[:, None], x0, obs_m_all[None, :], phi[None, :], off,
                                steps=4)
        err = np.sqrt(sq + cfg.w_prior * (d - d_los_prior)[:, None] ** 2)
        inl = (err < cfg.inlier_error_threshold) & good[:, None]
        frac = inl.mean(1)
        ok = frac >= cfg.inlier_fraction_min
        mean_err = np.where(ok, np.sum(np.where(inl, err, 0.0), 1) / np.maximum(inl.sum(1), 1), np.inf)
        k = int(np.argmin(mean_err))
        return float(mean_err[k]), inl[k], (d[k], p[k], th[k]), float(frac.max(initial=0.0))

    results = ordered_map(run_batch, range(n_batches), cfg.threads)
    best_err, best_inl, best_par = math.inf, None, None
    best_frac = 0.0
    for mean_err, inl, par, frac in results:
        best_frac = max(best_frac, frac)
        if mean_err < best_err:
            best_err, best_inl, best_par = mean_err, inl, par
    if best_inl is None:
        raise RansacFailure(best_frac)

    init = WallParams(float(best_par[0]), float(best_par[1]), float(math.degrees(best_par[2])))
    params, _, _ = refine_wall(np.column_stack([tau[best_inl], phi[best_inl]]), d_los_prior, init, cfg.w_prior, cfg.max_rounds, off)
    x_all, err_all = optimize_hidden(params, d_los_prior, cfg.w_prior, (tau, phi), off)
    x_all = np.atleast_1d(x_all)
    err_all = np.atleast_1d(err_all)
    xi = x_all[best_inl]
    params = WallParams(params.d_los, params.d_perp, params.theta, (float(xi.min()), float(xi.max())))
    return WallFit(
        params=params,
        inliers=best_inl.copy(),
        x=x_all,
        errors=err_all,
        mean_inlier_error=float(err_all[best_inl].mean()),
        inlier_fraction=float(best_inl.mean()),
        d_los_prior=float(d_los_prior),
        w_prior=cfg.w_prior,
    )


# --------------------------------------------------------------------------
# point scatterer


@dataclass
class PointScatterer:
    tau0: float
    phi0: float
    line_orientation: float
    position: tuple[float, float] | None = None
    collinear: bool = False
    residuals: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"tau0_ns": self.tau0, "phi0_deg": self.phi0, "line_orientation_deg": self.line_orientation,
                "position_m": None if self.position is None else list(self.position),
                "collinear": self.collinear}


def _cross_fit(q, alpha_deg, c0, iters=50):
    """Centre and per-point offsets (to the nearer line) of the best cross at orientation ``alpha``."""
    a = math.radians(alpha_deg)
    u = np.array([math.cos(a), math.sin(a)])
    nrm = np.array([-math.sin(a), math.cos(a)])
    c = np.asarray(c0, float).copy()
    prev = None
    for _ in range(iters):
        d1 = (q - c) @ nrm  # distance to the line along u
        d2 = (q - c) @ u  # distance to the line along nrm
        on1 = np.abs(d1) <= np.abs(d2)
        if prev is not None and np.array_equal(on1, prev):
            break
        prev = on1
        cn = float(np.mean(q[on1] @ nrm)) if on1.any() else float(c @ nrm)
        cu = float(np.mean(q[~on1] @ u)) if (~on1).any() else float(c @ u)
        c = cu * u + cn * nrm
    d1 = (q - c) @ nrm
    d2 = (q - c) @ u
    on1 = np.abs(d1) <= np.abs(d2)
    off = np.where(on1[:, None], d1[:, None] * nrm, d2[:, None] * u)
    return c, off, float(np.sum(off * off))


def fit_point_model(cps, ctx: NormalizationContext, dominant: MpcSample | None = None) -> PointScatterer:
    """Two perpendicular lines through a common centre, least squares to the nearer line.

    Works in sigma-normalised coordinates. Orientation is scanned on a 1 deg grid,
    then golden-section refined; the centre for a given orientation comes from
    alternating point-to-line assignment and closed-form line offsets.
    """
    tau, phi = _as_obs(cps)
    if tau.size < 4:
        raise ValueError("point-model fit needs at least 4 CPs")
    q = ctx.scale(tau, phi)
    c0 = ctx.scale(dominant.tau, dominant.phi) if dominant is not None else q.mean(0)

    centred = q - q.mean(0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[-1] <= 1e-9 * max(sv[0], 1e-300):
        _, _, vt = np.linalg.svd(centred)
        u = vt[0]
        foot = q.mean(0) + ((c0 - q.mean(0)) @ u) * u
        alpha = math.degrees(math.atan2(u[1], u[0])) % 90.0
        t0, p0 = ctx.unscale(foot)
        log.warning("point-model CPs are collinear; returning single-line solution")
        res = np.zeros(tau.size)
        return PointScatterer(float(t0), float(p0), alpha, collinear=True, residuals=res)

    scan = [(_cross_fit(q, a, c0)[2], a) for a in range(90)]
    _, a0 = min(scan)
    lo, hi = a0 - 1.0, a0 + 1.0

    def f(a):
        return _cross_fit(q, a, c0)[2]

    x1, x2 = hi - _GOLD * (hi - lo), lo + _GOLD * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > 1e-4:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLD * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLD * (hi - lo)
            f2 = f(x2)
    alpha = 0.5 * (lo + hi)
    if f(alpha) > f(float(a0)):
        alpha = float(a0)
    c, off, _ = _cross_fit(q, alpha, c0)
    t0, p0 = ctx.unscale(c)
    # offsets back to metres (delay) and degrees (angle)
    off_phys = ctx.unscale(off) * np.array([C_M_PER_NS, 1.0])
    return PointScatterer(float(t0), float(p0), alpha % 90.0, residuals=np.hypot(*off_phys.T))


# --------------------------------------------------------------------------
# model selection and wall geometry


@dataclass
class ScattererModel:
    kind: str
    point: PointScatterer | None = None
    wall: WallFit | None = None
    median_residual: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"model": self.kind, "median_residual": dict(self.median_residual)}
        if self.kind == "wall" and self.wall is not None:
            out.update(self.wall.to_dict())
        if self.point is not None:
            out["point"] = self.point.to_dict()
            if self.kind == "point":
                out["params"] = self.point.to_dict()
        return out


def select_model(cps, dominant: MpcSample, d_los_prior: float, cfg: RansacConfig | None,
                 ctx: NormalizationContext) -> ScattererModel:
    """Fit both models and keep the one with the lower median per-CP data residual.

    Residuals are in the shared metre/degree units; the wall's prior penalty is
    left out. Ties, too few CPs and wall-fit failures resolve to the point model.
    """
    cfg = cfg or RansacConfig()
    tau, phi = _as_obs(cps)
    if tau.size < 4:
        t0, p0 = (dominant.tau, dominant.phi)
        pt = PointScatterer(float(t0), float(p0), 0.0, collinear=True, residuals=np.zeros(tau.size))
        return ScattererModel("point", point=pt)
    pt = fit_point_model(cps, ctx, dominant)
    x, y = invert_to_plane(pt.tau0, pt.phi0, d_los_prior, cfg.angle_offset)
    if np.isfinite(x) and np.isfinite(y):
        pt.position = (float(x), float(y))
    med = {"point": float(np.median(pt.residuals))}
    wall = None
    if tau.size >= cfg.n_s:
        try:
            wall = ransac_fit(np.column_stack([tau, phi]), d_los_prior, cfg)
        except RansacFailure as exc:
            log.info("wall fit failed: %s", exc)
    if wall is not None:
        med["wall"] = float(np.median(wall.data_residuals(tau, phi, cfg.angle_offset)))
        if med["wall"] < med["point"] * (1.0 - 1e-9) - 1e-12:
            return ScattererModel("wall", point=pt, wall=wall, median_residual=med)
    return ScattererModel("point", point=pt, wall=wall, median_residual=med)


def reconstruct_wall(params: WallParams, x_values, tx_origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Scattering points ``(x, d_perp - x tan theta)``; ``tx_origin`` = (x, y, heading deg) of the Tx frame."""
    x = np.asarray(x_values, float)
    y = params.d_perp - x * math.tan(math.radians(params.theta))
    ox, oy, *rest = tx_origin
    h = math.radians(rest[0]) if rest else 0.0
    ch, sh = math.cos(h), math.sin(h)
    return np.column_stack([ox + ch * x - sh * y, oy + sh * x + ch * y])


def wall_line(params: WallParams):
    """(point, unit direction) of the wall line in the Tx frame."""
    t = math.tan(math.radians(params.theta))
    direction = np.array([1.0, -t]) / math.hypot(1.0, t)
    return np.array([0.0, params.d_perp]), direction


def wall_rmse(reconstructed, true_wall) -> float:
    """RMS perpendicular distance of the points to ``true_wall`` (WallParams or (point, direction))."""
    pts = np.atleast_2d(np.asarray(reconstructed, float))
    if len(pts) == 0:
        raise ValueError("no reconstructed points")
    if isinstance(true_wall, WallParams):
        p0, v = wall_line(true_wall)
    else:
        p0, v = (np.asarray(a, float) for a in true_wall)
        v = v / np.hypot(*v)
    rel = pts - p0
    dist = rel[:, 0] * v[1] - rel[:, 1] * v[0]
    return float(np.sqrt(np.mean(dist ** 2)))


def d_los_prior_from_samples(samples) -> float:
    """c times the delay of the strongest sample."""
    return float(C_M_PER_NS * samples.tau[int(np.argmax(samples.power))])
