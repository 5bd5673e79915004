"""
Reconstructing a wall from characteristic points
================================================

CPs along a wall ridge follow a closed-form delay/AoA curve parameterised by
the LoS distance, the wall's distance from the Tx and its tilt. RANSAC fits
that curve, and each inlier's hidden abscissa maps back to a point on the wall.
"""

import math

import numpy as np

from mpc_topo import WallParams, forward_model, ransac_fit, reconstruct_wall, wall_rmse
from mpc_topo.scatterer import C_M_PER_NS, RansacConfig

# Four receiver positions next to the same wall: (d_los, d_perp, theta).
receivers = {
    "Rx1": (10.3329, 4.3406, 9.8698),
    "Rx2": (12.0412, 4.3293, 9.1387),
    "Rx3": (14.9281, 4.8428, 10.0218),
    "Rx4": (16.4544, 4.6534, 8.5517),
}
rng = np.random.default_rng(1)

for name, geom in receivers.items():
    truth = WallParams(*geom)
    x = np.sort(rng.uniform(0.1 * truth.d_los, 0.9 * truth.d_los, 40))
    tau, phi = forward_model(truth, x)

    # 15 cm of path-length noise, plus a few stray CPs from other clusters
    tau = tau + rng.normal(0, 0.15, x.size) / C_M_PER_NS
    stray = np.column_stack([rng.uniform(tau.min(), tau.max(), 4), rng.uniform(100, 200, 4)])
    cps = np.vstack([np.column_stack([tau, phi]), stray])

    # the LoS prior is what a 0.5 ns delay grid would report
    prior = C_M_PER_NS * round(truth.d_los / C_M_PER_NS / 0.5) * 0.5
    fit = ransac_fit(cps, prior, RansacConfig(iterations=10000, seed=0))
    pts = reconstruct_wall(fit.params, fit.x[fit.inliers])
    p = fit.params
    print(f"{name}: d_los {p.d_los:.3f} m, d_perp {p.d_perp:.3f} m, theta {p.theta:.2f} deg, "
          f"{fit.inliers.sum()}/{len(cps)} inliers, strays kept {fit.inliers[-4:].sum()}, "
          f"wall RMSE {wall_rmse(pts, truth):.3f} m")

###############################################################################
# The fitted line in the Tx frame: y = d_perp - x tan(theta).
p = fit.params
for xv in (0.0, p.d_los / 2, p.d_los):
    print(f"x = {xv:5.2f} m -> y = {p.d_perp - xv * math.tan(math.radians(p.theta)):.3f} m")
