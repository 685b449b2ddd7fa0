"""Orbit counts in norm balls: quadratic growth for the modular group, T^{2 delta} for a Schottky group.

Run: python3 demos/counting_growth.py
"""

import math

import numpy as np

from orbits import L2, build_modular, build_schottky, count_function
from orbits.patterson import estimate_delta, log_grid

mod = build_modular()
print("modular group, l2 ball")
for T, n in count_function(mod, L2, log_grid(100.0, 2000.0, 5)):
    print(f"  T={T:8.1f}  N={n:9d}  N/T^2={n / T ** 2:.4f}")
print("  the SL(2,Z) count grows like 6 T^2")

sch = build_schottky(2.5, 2.5, math.pi / 2)
d = estimate_delta(sch, "l2ball_fit", 1e5)
grid = log_grid(1e4, 1e5, 8)
counts = np.array([n for _, n in count_function(sch, L2, grid)], dtype=float)
slope = np.polyfit(np.log(grid), np.log(counts), 1)[0]
print(f"\nSchottky {sch.label}: delta ~ {d.value:.4f} +- {d.stderr:.4f}")
print(f"  log-log slope over the last decade {slope:.4f}, 2 delta = {2 * d.value:.4f}")
