"""Patterson–Sullivan data estimated from finite orbits.

* critical exponent from orbit growth,
* the boundary measure as a weighted sum of visual directions of orbit points,
* its symmetric lift to the circle of plane directions and the plane measure
  ``2 r^{2 delta - 1} dr d nu(theta)``,
* the horocyclic mass ``tau``, shadows, the large-scale density ``Xi``.

Boundary points are stored by projective angle ``p`` in ``[0, pi)`` with
``xi = cot p``, which is also the angle of the plane line through ``(xi, 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special, stats

from .balls import BallResult, count_function, enumerate_ball, geodesic_ball
from .groups import Arc, GroupSpec
from .measures import EmpiricalMeasure, weighted_ks
from .moebius import (
    INF,
    L2,
    Frame,
    Mat2,
    NormSpec,
    a_t,
    frame_at,
    hyp_dist_array,
    mobius_act,
    n_s,
)
from .plane import psi_matrix, theta_window

TWO_PI = 2 * math.pi


# --------------------------------------------------------------------------
# Critical exponent
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DeltaEstimate:
    value: float
    stderr: float
    method: str
    window: Tuple[float, float]

    def __post_init__(self):
        if not (0.0 < self.value <= 1.0 + 0.2):
            raise ValueError(f"implausible critical exponent {self.value}")


def log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """``n`` log-spaced points with the endpoints exactly ``lo`` and ``hi``."""
    g = np.exp(np.linspace(math.log(lo), math.log(hi), n))
    g[0], g[-1] = lo, hi
    return g


def _counts_l2(spec: GroupSpec, T_grid: Sequence[float]) -> np.ndarray:
    return np.array([n for _, n in count_function(spec, L2, T_grid)], dtype=float)


def orbit_distances(spec: GroupSpec, t_max: float, block: int = 64):
    """Yield arrays of ``d(i, gamma i)`` over the PSL orbit ball of radius ``t_max``.

    Distances come from the Mobius images ``gamma i`` and the half-plane
    distance formula, not from matrix norms.  The modular ball is generated in
    chunks of the first-column entry ``a`` to bound memory.
    """
    T = math.sqrt(2 * math.cosh(t_max)) * (1 + 1e-9)
    if spec.kind == "modular":
        from .balls import _l2_threshold, _modular_l2_ball

        m2 = _l2_threshold(T)
        amax = int(math.isqrt(m2))
        for lo in range(0, amax + 1, block):
            ent = _modular_l2_ball(m2, lo, lo + block - 1).astype(float)
            if ent.size:
                yield _distances_of(ent)
        return
    ball = enumerate_ball(spec, L2, T)
    yield _distances_of(np.asarray(ball.entries, dtype=float))


def _distances_of(ent: np.ndarray) -> np.ndarray:
    z = (ent[:, 0] * 1j + ent[:, 1]) / (ent[:, 2] * 1j + ent[:, 3])
    return hyp_dist_array(z, 1j)


def geodesic_counts(spec: GroupSpec, t_grid: Sequence[float]) -> np.ndarray:
    """SL-level ``#{gamma : d(i, gamma i) <= t}`` for each ``t`` of an ascending grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    counts = np.zeros(t_grid.size, dtype=np.int64)
    for d in orbit_distances(spec, float(t_grid[-1])):
        d = np.sort(d)
        counts += np.searchsorted(d, t_grid * (1 + 1e-12), side="right")
    return spec.sl_factor * counts


def estimate_delta(spec: GroupSpec, method: str = "l2ball_fit", T_max: float = 2000.0,
                   n_grid: int = 40) -> DeltaEstimate:
    """Growth-rate fit over the top half of the range.

    ``geodesic_count``: slope of ``log #{d(i, gamma i) <= t}`` against ``t``
    on ``[t_max / 2, t_max]`` with ``2 cosh t_max = T_max^2``.  ``l2ball_fit``:
    half the slope of ``log N(T)`` against ``log T`` on ``[sqrt(T_max), T_max]``.
    """
    if n_grid < 20:
        raise ValueError("need at least 20 grid values for a growth fit")
    if method == "geodesic_count":
        t_max = math.acosh(T_max * T_max / 2)
        t = np.linspace(t_max / 2, t_max, n_grid)
        N = geodesic_counts(spec, t).astype(float)
        fit = stats.linregress(t, np.log(N))
        return DeltaEstimate(float(fit.slope), float(fit.stderr), method, (float(t[0]), float(t[-1])))
    if method in ("l2ball_fit", "l2ball"):
        T = log_grid(math.sqrt(T_max), T_max, n_grid)
        N = _counts_l2(spec, T)
        fit = stats.linregress(np.log(T), np.log(N))
        return DeltaEstimate(float(fit.slope) / 2, float(fit.stderr) / 2, "l2ball_fit",
                             (float(T[0]), float(T[-1])))
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# Boundary measures
# --------------------------------------------------------------------------


def disk_angle(z: np.ndarray) -> np.ndarray:
    """Visual angle at ``i`` of points of H, in the disk model."""
    z = np.asarray(z, dtype=complex)
    return np.mod(np.angle((z - 1j) / (z + 1j)), TWO_PI)


def projective_of_disk_angle(psi: np.ndarray) -> np.ndarray:
    """Projective angle ``p`` (``xi = cot p``) of the endpoint of the ray from ``i`` at visual angle ``psi``.

    That endpoint is ``-cot(psi / 2)``, so ``p = pi - psi / 2`` modulo ``pi``.
    """
    return np.mod(math.pi - np.asarray(psi, dtype=float) / 2, math.pi)


def disk_angle_of_projective(p: np.ndarray) -> np.ndarray:
    return np.mod(TWO_PI - 2 * np.asarray(p, dtype=float), TWO_PI)


def boundary_of_projective(p: np.ndarray) -> np.ndarray:
    """``cot p`` with ``INF`` at ``p = 0``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(p == 0.0, INF, np.cos(p) / np.sin(p))


def projective_of_boundary(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return np.where(np.isinf(xi), 0.0, np.mod(np.arctan2(1.0, xi), math.pi))


def _poisson_h(z: np.ndarray, ex: np.ndarray, ey: np.ndarray) -> np.ndarray:
    """Poisson kernel at ``z`` toward the boundary point with homogeneous coordinates ``(ex, ey)``.

    Scaled by ``ey^2`` relative to ``Im z / |z - xi|^2``; the factor cancels in
    every ratio and the formula stays finite at ``ey = 0`` (the point ``INF``).
    """
    w = ey * z - ex
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(ey == 0.0, np.imag(z) / (ex * ex), np.imag(z) / (w.real ** 2 + w.imag ** 2))


@dataclass
class BoundaryMeasure:
    """Atomic probability measure on the boundary of H.

    Atoms are stored by projective angle ``p`` in ``[0, pi)``, standing for the
    boundary point ``cot p`` (``INF`` at ``p = 0``) and for the line through the
    plane vector ``(cos p, sin p)``.  ``theta`` / ``weight`` give the symmetric
    lift to the circle of plane directions: each atom split evenly between the
    two unit vectors ``±(cos p, sin p)``.
    """

    p: np.ndarray
    mass: np.ndarray
    s_parameter: float
    t_max: Optional[float] = None

    def __post_init__(self):
        self.p = np.mod(np.asarray(self.p, dtype=float), math.pi)
        self.mass = np.asarray(self.mass, dtype=float)
        if self.p.shape != self.mass.shape:
            raise ValueError("angles and masses must have the same shape")
        tot = self.mass.sum()
        if not tot > 0:
            raise ValueError("boundary measure needs positive mass")
        self.mass = self.mass / tot

    @classmethod
    def from_boundary(cls, xi, mass, s_parameter: float, t_max=None) -> "BoundaryMeasure":
        return cls(projective_of_boundary(xi), mass, s_parameter, t_max)

    @property
    def xi(self) -> np.ndarray:
        return boundary_of_projective(self.p)

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([self.p, self.p + math.pi])

    @property
    def weight(self) -> np.ndarray:
        return np.concatenate([self.mass, self.mass]) / 2

    @property
    def psi(self) -> np.ndarray:
        """Visual angles at ``i``."""
        return disk_angle_of_projective(self.p)

    @property
    def homogeneous(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.cos(self.p), np.sin(self.p)

    def __len__(self) -> int:
        return self.p.size

    def total(self) -> float:
        return float(self.weight.sum())

    def arc_mask(self, arc: Arc) -> np.ndarray:
        off = np.mod(self.p - arc.lo, math.pi)
        return (off <= arc.length + 1e-15) | (off >= math.pi - 1e-15)

    def arc_mass(self, arc: Arc) -> float:
        """Mass of a closed projective arc."""
        return float(self.mass[self.arc_mask(arc)].sum())

    def visual_arc_mass(self, lo: float, hi: float) -> float:
        """Mass of visual angles in ``[lo, hi)`` taken modulo ``2 pi``."""
        off = np.mod(self.psi - lo % TWO_PI, TWO_PI)
        return float(self.mass[off < hi - lo].sum())

    def circle_mass(self, lo: float, hi: float) -> float:
        """Lifted mass of plane angles in ``[lo, hi)`` modulo ``2 pi``."""
        off = np.mod(self.theta - lo % TWO_PI, TWO_PI)
        return float(self.weight[off < hi - lo].sum())

    def ks_uniform(self) -> float:
        """KS distance of the visual angle law to the uniform law on the circle."""
        return weighted_ks(self.psi, self.mass, lambda t: t / TWO_PI)

    def ks_uniform_lift(self) -> float:
        return weighted_ks(np.mod(self.theta, TWO_PI), self.weight, lambda t: t / TWO_PI)

    def pushforward(self, g: Mat2) -> "BoundaryMeasure":
        """Image under the projective action, ``(x, y) -> (a x + b y, c x + d y)``."""
        x, y = self.homogeneous
        gx = g.a * x + g.b * y
        gy = g.c * x + g.d * y
        return BoundaryMeasure(np.mod(np.arctan2(gy, gx), math.pi), self.mass, self.s_parameter, self.t_max)

    def binned(self, n_bins: int) -> Tuple[np.ndarray, np.ndarray]:
        """Lifted measure binned on ``n_bins`` equal angular cells: ``(centers, weights)``."""
        edges = np.linspace(0.0, TWO_PI, n_bins + 1)
        w, _ = np.histogram(np.mod(self.theta, TWO_PI), bins=edges, weights=self.weight)
        return 0.5 * (edges[:-1] + edges[1:]), w

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("theta,weight\n")
            for t, w in zip(np.mod(self.theta, TWO_PI), self.weight):
                fh.write(f"{t:.17g},{w:.17g}\n")

    @classmethod
    def from_csv(cls, path, s_parameter: float = float("nan")) -> "BoundaryMeasure":
        """Read a lifted measure back; the two lifts of each atom are merged."""
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        p = np.mod(data[:, 0], math.pi)
        # theta and theta + pi land within rounding of each other (or of 0 and pi)
        p = np.where(p > math.pi - 1e-12, 0.0, p)
        order = np.argsort(p, kind="stable")
        p, w = p[order], data[order, 1]
        start = np.r_[True, np.diff(p) > 1e-12]
        groups = np.cumsum(start) - 1
        return cls(p[start], np.bincount(groups, weights=w), s_parameter)


def _shell_count(ball: BallResult, t_max: float, width: Optional[float]) -> int:
    if width is None:
        return ball.psl_count
    e = np.asarray(ball.entries, dtype=float)
    d = _distances_of(e)
    return int(np.count_nonzero(d > t_max - width))


def _choose_radius(spec: GroupSpec, n_min: int, width: Optional[float], t0: float = 4.0):
    t = t0
    while True:
        ball = geodesic_ball(spec, t)
        if _shell_count(ball, t, width) >= n_min or t > 60:
            return ball, t
        t += 1.0


def patterson_measure(spec: GroupSpec, delta: float, epsilon: float = 0.05,
                      t_max: Optional[float] = None, n_min: int = 10_000,
                      weighting: str = "shell", shell_width: float = 1.0,
                      ball: Optional[BallResult] = None) -> BoundaryMeasure:
    """Visual directions of ``gamma i`` weighted by ``exp(-(delta + epsilon) d(i, gamma i))``.

    ``weighting="series"`` keeps every orbit point of the geodesic ball of
    radius ``t_max``: this is the truncated Poincare series, whose mass is
    spread evenly over all distance shells, so the lumpy first shells keep a
    fixed share of it.  ``weighting="shell"`` (default) keeps only the outer
    shell ``t_max - shell_width < d <= t_max``, where directions have already
    equidistributed toward the conformal density.  ``t_max`` defaults to the
    smallest integer radius giving ``n_min`` atoms.  Elements fixing ``i``
    carry no direction and are left out.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive for the Poincare series to converge")
    if weighting not in ("shell", "series"):
        raise ValueError(f"unknown weighting {weighting!r}")
    width = shell_width if weighting == "shell" else None
    if ball is None:
        if t_max is None:
            ball, t_max = _choose_radius(spec, n_min, width)
        else:
            ball = geodesic_ball(spec, t_max)
    elif t_max is None:
        raise ValueError("t_max is needed together with a precomputed ball")
    e = np.asarray(ball.entries, dtype=float)
    z = (e[:, 0] * 1j + e[:, 1]) / (e[:, 2] * 1j + e[:, 3])
    d = hyp_dist_array(z, 1j)
    keep = (d > 1e-9) & (d <= t_max * (1 + 1e-12))
    if width is not None:
        keep &= d > t_max - width
    z, d = z[keep], d[keep]
    s = delta + epsilon
    w = np.exp(-s * (d - d.min()))
    return BoundaryMeasure(projective_of_disk_angle(disk_angle(z)), w, s, float(t_max))


def epsilon_sensitivity(spec: GroupSpec, delta: float, epsilon: float = 0.05, **kw) -> float:
    """KS distance between the visual laws built at ``epsilon`` and ``epsilon / 2``."""
    a = patterson_measure(spec, delta, epsilon, **kw)
    b = patterson_measure(spec, delta, epsilon / 2, **kw)
    grid = np.linspace(0.0, TWO_PI, 1001)

    def cdf(nu):
        ps = nu.psi
        o = np.argsort(ps)
        cum = np.r_[0.0, np.cumsum(nu.mass[o])]
        return cum[np.searchsorted(ps[o], grid, side="right")]

    return float(np.max(np.abs(cdf(a) - cdf(b))))


def conformality_check(nu: BoundaryMeasure, g: Mat2, delta: float, n_arcs: int = 8) -> np.ndarray:
    """Relative errors of ``(g_* nu)(A) = int_A exp(-delta beta_xi(g i, i)) d nu(xi)`` on equal visual arcs."""
    push = nu.pushforward(g)
    gi = mobius_act(g, 1j)
    ex, ey = nu.homogeneous
    # beta_xi(g i, i) = log(P(i, xi) / P(g i, xi))
    beta = np.log(_poisson_h(np.array(1j), ex, ey) / _poisson_h(np.array(gi), ex, ey))
    reweighted = nu.mass * np.exp(-delta * beta)
    ps = nu.psi
    errs = []
    edges = np.linspace(0, TWO_PI, n_arcs + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        lhs = push.visual_arc_mass(lo, hi)
        rhs = float(reweighted[(ps >= lo) & (ps < hi)].sum())
        errs.append(abs(lhs - rhs) / max(rhs, 1e-300))
    return np.array(errs)


def limit_set_leakage(nu: BoundaryMeasure, spec: GroupSpec) -> float:
    """Mass of ``nu`` outside the union of the ping-pong arcs."""
    inside = np.zeros(nu.p.shape, bool)
    for arc in spec.ping_pong_domains.values():
        off = np.mod(nu.p - arc.lo, math.pi)
        inside |= (off <= arc.length + 1e-12) | (off >= math.pi - 1e-12)
    return float(nu.mass[~inside].sum())


# --------------------------------------------------------------------------
# Plane measure
# --------------------------------------------------------------------------


def mu_bar(delta: float, nu: BoundaryMeasure, r_min: float, r_max: float, grid: int = 200,
           n_bins: Optional[int] = None) -> EmpiricalMeasure:
    """Product quadrature of ``2 r^{2 delta - 1} dr d nu_bar(theta)`` on ``[r_min, r_max]``.

    Each radial cell carries its exact mass ``(r1^{2 delta} - r0^{2 delta}) / delta``
    at its midpoint, so annuli aligned with the grid get exact masses.
    """
    if not (0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    edges = np.linspace(r_min, r_max, grid + 1)
    cell = (edges[1:] ** (2 * delta) - edges[:-1] ** (2 * delta)) / delta
    mid = 0.5 * (edges[1:] + edges[:-1])
    if n_bins is None:
        th, w = np.mod(nu.theta, TWO_PI), nu.weight
    else:
        th, w = nu.binned(n_bins)
    R = np.repeat(mid, th.size)
    TH = np.tile(th, mid.size)
    W = np.outer(cell, w).ravel()
    return EmpiricalMeasure(R, TH, W)


def mu_bar_integral_bump(f, delta: float, nu: BoundaryMeasure, u=None, norm: NormSpec = L2) -> float:
    """``int f(v) (v * u)^{-delta} d mu_bar`` (or ``int f d mu_bar`` if ``u`` is None).

    The star product is 1-homogeneous in ``v``, so the integral splits into a
    radial moment of the bump and an angular sum over the atoms of ``nu_bar``.
    """
    from .plane import star_array

    th, w = np.mod(nu.theta, TWO_PI), nu.weight
    ang = f.angular(th) * f.scale
    if u is None:
        return 2 * f.radial_moment(2 * delta - 1) * float(np.dot(ang, w))
    E = np.stack([np.cos(th), np.sin(th)], axis=1)
    st = star_array(E, u, norm)
    return 2 * f.radial_moment(delta - 1) * float(np.dot(ang * st ** (-delta), w))


# --------------------------------------------------------------------------
# Horocyclic mass tau
# --------------------------------------------------------------------------


def _atoms_on_horocycle(g: Mat2, nu: BoundaryMeasure, R: float):
    """Atoms ``xi = g(s)`` with ``|s| <= R`` along the horocycle of the frame ``g``.

    ``(h^s g)^- = g n_s (0) = g(s)``, so ``s = g^-1(xi)``, read off homogeneous
    coordinates; the atom ``g(INF)`` is never on the arc.
    """
    gi = g.inv()
    ex, ey = nu.homogeneous
    x = gi.a * ex + gi.b * ey
    y = gi.c * ex + gi.d * ey
    with np.errstate(divide="ignore", invalid="ignore"):
        s = x / y
    ok = np.isfinite(s) & (np.abs(s) <= R)
    return ex[ok], ey[ok], nu.mass[ok], s[ok]


def _busemann_weights(g: Mat2, ex: np.ndarray, ey: np.ndarray, s: np.ndarray, delta: float) -> np.ndarray:
    """``exp(delta beta_xi(i, g(s + i)))`` for ``xi`` with homogeneous coordinates ``(ex, ey)``."""
    w = s + 1j
    p = (g.a * w + g.b) / (g.c * w + g.d)
    return (_poisson_h(p, ex, ey) / _poisson_h(np.array(1j), ex, ey)) ** delta


def tau(v: Frame, nu: BoundaryMeasure, delta: float) -> float:
    """Conditional mass of the unit horocyclic ball ``{h^s v : |s| <= 1}``."""
    g = v.m
    ex, ey, w, s = _atoms_on_horocycle(g, nu, 1.0)
    if w.size == 0:
        return 0.0
    return float(np.dot(w, _busemann_weights(g, ex, ey, s, delta)))


def tau_ball(v: Frame, nu: BoundaryMeasure, delta: float, R: float) -> float:
    """Conditional mass of ``{h^s v : |s| <= R}``, summed directly."""
    g = v.m
    ex, ey, w, s = _atoms_on_horocycle(g, nu, R)
    if w.size == 0:
        return 0.0
    return float(np.dot(w, _busemann_weights(g, ex, ey, s, delta)))


def tau_ball_scaled(v: Frame, nu: BoundaryMeasure, delta: float, R: float) -> float:
    """``R^delta tau(g^{log R} v)``; equals :func:`tau_ball` by the scaling relation."""
    return R ** delta * tau(Frame(v.m @ a_t(math.log(R))), nu, delta)


def tau_modular_exact(delta: float = 1.0, R: float = 1.0) -> float:
    """``int_{-R}^{R} (1 + s^2)^{delta - 1} ds / pi`` for the identity frame and the visual measure."""
    from scipy import integrate

    return integrate.quad(lambda s: (1 + s * s) ** (delta - 1) / math.pi, -R, R, epsabs=1e-14)[0]


# --------------------------------------------------------------------------
# Shadows
# --------------------------------------------------------------------------


def geodesic_point(x: complex, xi, t: float) -> complex:
    """The point at distance ``t`` from ``x`` on the ray toward ``xi``."""
    g = frame_at(x, xi).m
    return mobius_act(g, math.exp(t) * 1j)


def shadow(x: complex, xi, t: float) -> Arc:
    """Boundary points whose projection on the ray from ``x`` to ``xi`` lies beyond distance ``t``.

    Moving ``x`` to ``i`` and ``xi`` to ``INF``, the geodesic perpendicular to
    the ray at ``e^t i`` is the circle ``|z| = e^t`` and the shadow is
    ``{|eta| >= e^t}``; its endpoints are the images of ``±e^t``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = frame_at(x, xi).m
    e = math.exp(t)
    return Arc.between(mobius_act(g, e), mobius_act(g, -e))


def shadow_endpoints(x: complex, xi, t: float):
    g = frame_at(x, xi).m
    e = math.exp(t)
    return mobius_act(g, -e), mobius_act(g, e)


@dataclass
class ShadowReport:
    ratios: np.ndarray
    ts: np.ndarray
    band: float
    truncation_radius: float


def shadow_lemma_check(spec: GroupSpec, nu: BoundaryMeasure, delta: float, samples: int = 200,
                       t_max: float = 5.0, seed: int = 0, orbit_radius: Optional[float] = None) -> ShadowReport:
    """Ratios ``nu(V(i, xi, t)) / exp(-delta t + (1 - delta) d_hat)`` over random ``(xi, t)``.

    ``xi`` is drawn from the atoms of ``nu`` and ``t`` uniformly in ``[0, t_max]``;
    ``d_hat`` is the distance from the shadow's vertex to the enumerated orbit,
    an upper bound for the distance to the full orbit.
    """
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(nu), size=samples, p=nu.mass)
    ts = rng.uniform(0.0, t_max, size=samples)
    if orbit_radius is None:
        orbit_radius = t_max + 4.0
    ball = geodesic_ball(spec, orbit_radius)
    e = np.asarray(ball.entries, dtype=float)
    orbit = (e[:, 0] * 1j + e[:, 1]) / (e[:, 2] * 1j + e[:, 3])
    ratios = np.empty(samples)
    for k in range(samples):
        xi = float(nu.xi[idx[k]])
        t = float(ts[k])
        arc = shadow(1j, xi, t)
        mass = nu.arc_mass(arc)
        p = geodesic_point(1j, xi, t)
        dh = float(hyp_dist_array(orbit, p).min())
        ratios[k] = mass / math.exp(-delta * t + (1 - delta) * dh)
    band = float(ratios.max() / ratios.min()) if ratios.min() > 0 else math.inf
    return ShadowReport(ratios, ts, band, orbit_radius)


# --------------------------------------------------------------------------
# Large-scale density
# --------------------------------------------------------------------------


def xi_frame(u, v, norm: NormSpec = L2) -> Optional[Tuple[Frame, float]]:
    """``(g^{log Theta} h^{-Theta^m} Psi(u), Theta)`` or None outside ``D(u)``."""
    w = theta_window(u, v, norm)
    if w.theta_half <= 0:
        return None
    m = psi_matrix(u) @ n_s(-w.theta_mid) @ a_t(math.log(w.theta_half))
    return Frame(m), w.theta_half


def xi_density(u, v, norm: NormSpec, nu: BoundaryMeasure, delta: float) -> float:
    """``Theta^delta tau(g^{log Theta} h^{-Theta^m} Psi(u))``, zero outside ``D(u)``."""
    fr = xi_frame(u, v, norm)
    if fr is None:
        return 0.0
    frame, th = fr
    return th ** delta * tau(frame, nu, delta)


def xi_density_direct(u, v, norm: NormSpec, nu: BoundaryMeasure, delta: float) -> float:
    """Same quantity as the conditional mass of ``{h^s Psi(u) : |s + Theta^m| <= Theta}``."""
    w = theta_window(u, v, norm)
    if w.theta_half <= 0:
        return 0.0
    g = psi_matrix(u)
    ex, ey, mass, s = _atoms_on_horocycle(g, nu, abs(w.theta_mid) + w.theta_half)
    sel = np.abs(s + w.theta_mid) <= w.theta_half
    if not np.any(sel):
        return 0.0
    return float(np.dot(mass[sel], _busemann_weights(g, ex[sel], ey[sel], s[sel], delta)))


def xi_modular_l2(v, u_norm: float = 1.0) -> float:
    """Closed form for the modular group, l2 norm, ``|u| = 1``: ``(2/pi) sqrt(1 - r^2) / r``."""
    r = math.hypot(*v)
    if r >= u_norm:
        return 0.0
    return (2 / math.pi) * math.sqrt(1 - r * r) / r


def xi_mass(u, norm: NormSpec, nu: BoundaryMeasure, delta: float, n_bins: int = 64,
            n_radial: int = 48) -> float:
    """``int_{D(u)} Xi(u, v) d mu_bar(v)``.

    Angular part: the lifted measure binned on ``n_bins`` cells.  Radial part:
    Gauss–Legendre in ``phi`` with ``r = rho(theta) sin(phi)`` on
    ``[0, pi/2]``, which absorbs the square-root edge of ``Xi`` at the boundary
    of ``D(u)``; the ``2 r^{2 delta - 1}`` density goes along.
    """
    from .plane import domain_D_radius

    centers, weights = nu.binned(n_bins)
    x, wx = np.polynomial.legendre.leggauss(n_radial)
    phis = (x + 1) * math.pi / 4
    wphi = wx * math.pi / 4
    total = 0.0
    for th, w in zip(centers, weights):
        if w == 0:
            continue
        rho = domain_D_radius(u, float(th), norm)
        acc = 0.0
        for ph, wp in zip(phis, wphi):
            r = rho * math.sin(ph)
            dr = rho * math.cos(ph)
            v = (r * math.cos(th), r * math.sin(th))
            acc += wp * dr * xi_density(u, v, norm, nu, delta) * 2 * r ** (2 * delta - 1)
        total += w * acc
    return total


def radial_cdf_modular(r):
    """``F(r) = (2/pi)(arcsin r + r sqrt(1 - r^2))`` on ``[0, 1]``."""
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    return (2 / math.pi) * (np.arcsin(r) + r * np.sqrt(1 - r * r))


def radial_cdf_modular_quad(r: float) -> float:
    """The same CDF by quadrature of the density ``(4/pi) sqrt(1 - s^2)``."""
    from scipy import integrate

    r = min(max(r, 0.0), 1.0)
    return integrate.quad(lambda s: (4 / math.pi) * math.sqrt(max(1 - s * s, 0.0)), 0.0, r,
                          epsabs=1e-14)[0]


# --------------------------------------------------------------------------
# Integrability series for cusps
# --------------------------------------------------------------------------


@dataclass
class SeriesReport:
    delta: float
    N: int
    checkpoints: np.ndarray
    partial_sums: np.ndarray
    converges: bool
    tail_bound: Optional[float]
    limit: Optional[float]


def cusp_integrability_series(delta: float, N: int = 10 ** 6, n_checkpoints: int = 13) -> SeriesReport:
    """Partial sums of ``sum_n n^{1 - 3 delta}``.

    Along a cusp ``e^{d(o, p^n o)}`` grows like ``n^2``, so the orbit terms
    ``e^{-delta d} * e^{d}...`` reduce to this series, which converges iff
    ``3 delta - 1 > 1``.  For convergent cases the tail past ``N`` is at most
    ``N^{2 - 3 delta} / (3 delta - 2)``.
    """
    if N < 10:
        raise ValueError("N must be at least 10")
    p = 3 * delta - 1
    n = np.arange(1, N + 1, dtype=float)
    terms = n ** (-p)
    cums = np.cumsum(terms)
    checkpoints = np.unique(np.round(np.exp(np.linspace(math.log(10), math.log(N), n_checkpoints))).astype(int))
    partial = cums[checkpoints - 1]
    converges = p > 1
    tail = N ** (1 - p) / (p - 1) if converges else None
    limit = float(special.zeta(p)) if converges else None
    return SeriesReport(delta, N, checkpoints, partial, converges, tail, limit)
