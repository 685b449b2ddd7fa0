"""Rescaled orbit cloud {gamma u / T} of the modular group and its limiting radial law.

Prints a text histogram of |gamma u| / T next to the density (4/pi) sqrt(1 - r^2).
Pass --csv PATH to also write the cloud as r,theta,weight rows.
"""

import math
import sys

import numpy as np

from orbits import L2, build_modular, orbit_cloud
from orbits.patterson import radial_cdf_modular

T = 300.0
u = (1 / math.sqrt(3), math.sqrt(2 / 3))
cloud = orbit_cloud(build_modular(), L2, T, u, 1.0)
if "--csv" in sys.argv:
    cloud.to_csv(sys.argv[sys.argv.index("--csv") + 1])

edges = np.linspace(0, 1, 11)
hist, _ = np.histogram(cloud.r, bins=edges, weights=cloud.weight)
hist = hist / cloud.total
want = np.diff(radial_cdf_modular(edges))
print(f"{len(cloud)} points, max radius {cloud.r.max():.4f}")
for lo, h, w in zip(edges, hist, want):
    print(f"  r={lo:.1f}  {'#' * int(200 * h):<40s} {h:.4f} (limit {w:.4f})")
