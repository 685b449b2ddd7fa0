"""Patterson measure of the modular group and the quantities built from it.

For the modular group the measure is uniform on the circle, tau at the
identity frame is 2/pi, and pi times mu_bar is Lebesgue measure.
"""

import math

from orbits import build_modular
from orbits.moebius import IDENTITY_FRAME
from orbits.patterson import mu_bar, patterson_measure, tau

nu = patterson_measure(build_modular(), 1.0, 0.05, n_min=50_000)
print(f"{len(nu)} atoms, KS distance to uniform {nu.ks_uniform():.4f}")

t = tau(IDENTITY_FRAME, nu, 1.0)
print(f"tau(identity) = {t:.4f}   2/pi = {2 / math.pi:.4f}")

mb = mu_bar(1.0, nu, 0.25, 4.0, grid=300)
for lo, hi in [(0.5, 1.0), (1.0, 2.0), (2.0, 3.0)]:
    m = mb.mass(lambda r, th, lo=lo, hi=hi: (r >= lo) & (r <= hi))
    print(f"mu_bar(annulus {lo}..{hi}) = {m:.4f}   area/pi = {hi * hi - lo * lo:.4f}")
