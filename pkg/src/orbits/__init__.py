"""Orbits of Fuchsian groups acting linearly on the plane.

Ball enumeration (:mod:`orbits.balls`), hyperbolic geometry and matrix norms
(:mod:`orbits.moebius`), concrete groups (:mod:`orbits.groups`), the plane
action machinery (:mod:`orbits.plane`), Patterson--Sullivan data
(:mod:`orbits.patterson`) and the experiment harness (:mod:`orbits.lab`,
:mod:`orbits.suites`).
"""

from .balls import BallResult, count_function, enumerate_ball, geodesic_ball, orbit_cloud
from .groups import GroupSpec, build_modular, build_parabolic_free, build_schottky, parse_group
from .moebius import L1, L2, LINF, Frame, Mat2, NormSpec, parse_norm
from .plane import BumpFunction

__version__ = "0.1.0"

__all__ = [
    "BallResult", "BumpFunction", "Frame", "GroupSpec", "L1", "L2", "LINF", "Mat2", "NormSpec",
    "build_modular", "build_parabolic_free", "build_schottky", "count_function", "enumerate_ball",
    "geodesic_ball", "orbit_cloud", "parse_group", "parse_norm",
]
