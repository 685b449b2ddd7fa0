"""The linear action on the punctured plane and its link with horocycles.

A nonzero vector ``v`` picks out the frame ``Psi(v)`` whose first column is
``v``; the horocycle through that frame depends on ``v`` up to sign.  The
cocycle ``c_u(g)`` measures how far along its horocycle ``g Psi(u)`` sits
relative to ``Psi(g u)``.

Test functions are triangular bumps in polar coordinates, symmetric under
``v -> -v``.  The mollifier along horocycles is the triangle kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import integrate, optimize

from .balls import enumerate_ball
from .groups import GroupSpec
from .moebius import INF, L2, Frame, Mat2, NormSpec, busemann, is_inf, mobius_act, norm_eval

U0 = (1.0, 0.0)


def _vec(u) -> Tuple[float, float]:
    x, y = float(u[0]), float(u[1])
    if x == 0.0 and y == 0.0:
        raise ValueError("the zero vector is not allowed")
    return x, y


# --------------------------------------------------------------------------
# Psi, Phi and the cocycle
# --------------------------------------------------------------------------


def psi_matrix(u) -> Mat2:
    """``((u_x, -u_y/|u|^2), (u_y, u_x/|u|^2))``, the frame sending ``u0`` to ``u``."""
    x, y = _vec(u)
    n2 = x * x + y * y
    return Mat2(x, -y / n2, y, x / n2)


def psi(u) -> Frame:
    return Frame(psi_matrix(u))


def plane_to_horocycle(v):
    """``(xi, t)``: the horocycle of ``v`` based at ``xi = Psi(v)(INF)`` at level ``t = 2 log |v|``."""
    x, y = _vec(v)
    xi = INF if y == 0.0 else x / y
    return xi, math.log(x * x + y * y)


def phi(xi, t: float) -> Tuple[float, float]:
    """Inverse of :func:`plane_to_horocycle`; representative with ``y > 0`` (or ``(r, 0)``, ``r > 0``)."""
    r = math.exp(t / 2)
    if is_inf(xi):
        return (r, 0.0)
    s = math.hypot(xi, 1.0)
    return (r * xi / s, r / s)


def horocycle_level(xi, x: complex) -> float:
    """Level of the horocycle based at ``xi`` through ``x``: ``beta_xi(i, x)``."""
    return busemann(xi, 1j, x)


def horocycle_act(g: Mat2, xi, t: float):
    """Left action on horocycles, ``(g xi, t + beta_{g xi}(i, g i))``."""
    gxi = mobius_act(g, xi)
    return gxi, t + busemann(gxi, 1j, mobius_act(g, 1j))


def cocycle(u, g: Mat2, tol: float = 1e-9) -> float:
    """``c_u(g)`` from ``n_{c} = Psi(g u)^-1 g Psi(u)``.

    Raises if the product is not ``±`` upper unipotent within ``tol``.
    """
    x, y = _vec(u)
    P = psi_matrix(g.apply((x, y))).inv() @ g @ psi_matrix((x, y))
    scale = max(1.0, abs(P.b))
    if abs(P.c) > tol * scale or abs(abs(P.a) - 1) > tol * scale or abs(P.d - P.a) > tol * scale:
        raise ArithmeticError(f"cocycle product is not unipotent: {P}")
    return P.b / P.a


def cocycle_array(u, entries: np.ndarray) -> np.ndarray:
    """Vectorized ``c_u(gamma)`` for an ``(N, 4)`` array of matrices.

    With ``v = gamma u`` and ``w`` the second column of ``gamma Psi(u)``, the
    product ``Psi(v)^-1 gamma Psi(u)`` has corner entry ``<v, w> / |v|^2``.
    """
    x, y = _vec(u)
    e = np.asarray(entries, dtype=float)
    a, b, c, d = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
    vx = a * x + b * y
    vy = c * x + d * y
    n2u = x * x + y * y
    n2v = vx * vx + vy * vy
    # second column of g Psi(u)
    wx = (-a * y + b * x) / n2u
    wy = (-c * y + d * x) / n2u
    return (vx * wx + vy * wy) / n2v


# --------------------------------------------------------------------------
# Star product, kappa and Theta windows
# --------------------------------------------------------------------------


def star_matrix(v, u) -> Mat2:
    vx, vy = _vec(v)
    ux, uy = _vec(u)
    return Mat2(-uy * vx, ux * vx, -uy * vy, ux * vy)


def star(v, u, norm: NormSpec = L2) -> float:
    """``v * u``: the norm of ``v (x) (-u_y, u_x)``."""
    return norm_eval(norm, star_matrix(v, u))


def star_array(V: np.ndarray, u, norm: NormSpec = L2) -> np.ndarray:
    ux, uy = _vec(u)
    V = np.asarray(V, dtype=float)
    ent = np.stack([-uy * V[:, 0], ux * V[:, 0], -uy * V[:, 1], ux * V[:, 1]], axis=1)
    return norm.entrywise(ent)


def kappa_matrix(u, v, s: float) -> Mat2:
    """``Psi(v) ((1, s), (0, 0)) Psi(u)^-1 = v (x) (u/|u|^2 + s u_perp)``."""
    ux, uy = _vec(u)
    vx, vy = _vec(v)
    n2 = ux * ux + uy * uy
    wx = ux / n2 - s * uy
    wy = uy / n2 + s * ux
    return Mat2(vx * wx, vx * wy, vy * wx, vy * wy)


def kappa(u, v, s: float, norm: NormSpec = L2) -> float:
    return norm_eval(norm, kappa_matrix(u, v, s))


def kappa_l2(u, v, s: float) -> float:
    """Closed form ``kappa^2 = |v|^2/|u|^2 + s^2 |v|^2 |u|^2``."""
    nu = math.hypot(*_vec(u))
    nv = math.hypot(*_vec(v))
    return math.sqrt(nv * nv / (nu * nu) + s * s * nv * nv * nu * nu)


@dataclass(frozen=True)
class ThetaWindow:
    theta_minus: float
    theta_plus: float

    @property
    def theta_mid(self) -> float:
        return 0.5 * (self.theta_minus + self.theta_plus)

    @property
    def theta_half(self) -> float:
        return 0.5 * (self.theta_plus - self.theta_minus)

    @property
    def empty(self) -> bool:
        return self.theta_minus == self.theta_plus == 0.0


EMPTY_WINDOW = ThetaWindow(0.0, 0.0)


def _require_strict(norm: NormSpec) -> None:
    if not norm.strictly_convex:
        raise ValueError(f"norm {norm.name} is not strictly convex; Theta windows are not continuous")


def _kappa_min(u, v, norm: NormSpec) -> Tuple[float, float]:
    """``(s*, kappa(s*))`` minimizing the convex function ``s -> kappa(u, v, s)``."""
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    # kappa >= c_low |s| |u| |v| and kappa(0) <= c_high |v|/|u| bound the minimizer
    B = 2.0 * norm.c_high / (norm.c_low * nu * nu) + 1e-12
    res = optimize.minimize_scalar(lambda s: kappa(u, v, s, norm), bounds=(-B, B), method="bounded",
                                   options={"xatol": 1e-13 / max(1.0, nu * nv), "maxiter": 500})
    s0 = float(res.x)
    return s0, kappa(u, v, s0, norm)


def theta_window(u, v, norm: NormSpec = L2) -> ThetaWindow:
    """The interval ``{s : kappa(u, v, s) <= 1}`` (zero when empty or degenerate)."""
    _require_strict(norm)
    u = _vec(u)
    v = _vec(v)
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if norm.kind == "l2":
        if nv > nu:
            return EMPTY_WINDOW
        h = math.sqrt(max(0.0, 1.0 - nv * nv / (nu * nu))) / (nu * nv)
        return ThetaWindow(-h, h) if h > 0 else EMPTY_WINDOW
    s0, k0 = _kappa_min(u, v, norm)
    if k0 >= 1.0:
        return EMPTY_WINDOW
    # kappa(s) >= c_low |s| |u| |v| > 1 beyond this radius
    far = 1.0 / (norm.c_low * nu * nv) + abs(s0) + 1.0
    fn = lambda s: kappa(u, v, s, norm) - 1.0  # noqa: E731
    lo = optimize.brentq(fn, s0 - far, s0, xtol=1e-14, rtol=1e-15, maxiter=500)
    hi = optimize.brentq(fn, s0, s0 + far, xtol=1e-14, rtol=1e-15, maxiter=500)
    return ThetaWindow(lo, hi)


def theta_window_bisect(u, v, norm: NormSpec, tol: float = 1e-12) -> ThetaWindow:
    """Independent route: scan for a point below 1, then plain bisection on each side."""
    u = _vec(u)
    v = _vec(v)
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    far = 1.0 / (norm.c_low * nu * nv) + 1.0
    grid = np.linspace(-far, far, 20001)
    vals = np.array([kappa(u, v, s, norm) for s in grid])
    j = int(np.argmin(vals))
    if vals[j] >= 1.0:
        return EMPTY_WINDOW
    s0 = grid[j]

    def bis(a, b, inside_at_a):
        for _ in range(200):
            m = 0.5 * (a + b)
            if (kappa(u, v, m, norm) <= 1.0) == inside_at_a:
                a = m
            else:
                b = m
            if abs(b - a) < tol:
                break
        return 0.5 * (a + b)

    return ThetaWindow(bis(s0, -far, True), bis(s0, far, True))


def in_domain_D(u, v, norm: NormSpec = L2) -> bool:
    return theta_window(u, v, norm).theta_half > 0


def domain_D_radius(u, angle: float, norm: NormSpec = L2) -> float:
    """Boundary radius of ``D(u)`` in direction ``angle``.

    ``kappa`` is 1-homogeneous in ``v``, so ``r e`` lies in ``D(u)`` exactly
    when ``r < 1 / min_s kappa(u, e, s)``.
    """
    u = _vec(u)
    e = (math.cos(angle), math.sin(angle))
    if norm.kind == "l2":
        return math.hypot(*u)
    _require_strict(norm)
    _, k0 = _kappa_min(u, e, norm)
    return 1.0 / k0


def domain_D_radius_bisect(u, angle: float, norm: NormSpec, tol: float = 1e-10) -> float:
    """Same radius by bisection on membership, using star-shapedness of ``D(u)``."""
    e = (math.cos(angle), math.sin(angle))
    nu = math.hypot(*_vec(u))
    lo, hi = 0.0, 4.0 * nu * norm.c_high / norm.c_low + 1.0
    while hi - lo > tol:
        m = 0.5 * (lo + hi)
        if m > 0 and in_domain_D(u, (m * e[0], m * e[1]), norm):
            lo = m
        else:
            hi = m
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# Bump functions and the mollifier
# --------------------------------------------------------------------------


def tri(t):
    """Triangle kernel ``max(0, 1 - |t|)``: support ``[-1, 1]``, integral 1."""
    return np.maximum(0.0, 1.0 - np.abs(t))


def tri_cdf(x):
    """``int_{-inf}^x tri``."""
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    return np.where(x <= 0, 0.5 * (1 + x) ** 2, 1.0 - 0.5 * (1 - x) ** 2)


def tri_window(c, L):
    """``int_{-L}^{L} tri(c + s) ds``."""
    return tri_cdf(np.asarray(c) + L) - tri_cdf(np.asarray(c) - L)


def _pi_dist(a, b):
    """Distance between angles modulo ``pi``."""
    d = np.mod(np.asarray(a) - b, math.pi)
    return np.minimum(d, math.pi - d)


@dataclass(frozen=True)
class BumpFunction:
    """``f(v) = tri((|v| - r0)/wr) * tri(dist_pi(arg v, theta0)/wtheta)``.

    With ``wtheta >= pi`` the angular factor is identically 1.  The angular
    factor has period ``pi``, so ``f(-v) = f(v)``.
    """

    r0: float
    wr: float
    theta0: float = 0.0
    wtheta: float = math.pi
    scale: float = 1.0

    def __post_init__(self):
        if not (self.r0 > 0 and self.wr > 0 and self.wtheta > 0):
            raise ValueError("bump parameters must be positive")
        if self.wr >= self.r0:
            raise ValueError("bump support must stay away from the origin")

    @property
    def full_circle(self) -> bool:
        return self.wtheta >= math.pi

    @property
    def r_min(self) -> float:
        return self.r0 - self.wr

    @property
    def r_max(self) -> float:
        return self.r0 + self.wr

    def radial(self, r):
        return tri((np.asarray(r, dtype=float) - self.r0) / self.wr)

    def angular(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.full_circle:
            return np.ones_like(theta)
        return tri(_pi_dist(theta, self.theta0) / self.wtheta)

    def polar(self, r, theta):
        return self.scale * self.radial(r) * self.angular(theta)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.polar(np.hypot(x, y), np.arctan2(y, x))

    def at(self, v) -> float:
        return float(self(v[0], v[1]))

    def scaled(self, k: float) -> "BumpFunction":
        return BumpFunction(self.r0, self.wr, self.theta0, self.wtheta, self.scale * k)

    def dilated(self, k: float) -> "BumpFunction":
        """``v -> f(v / k)``."""
        return BumpFunction(self.r0 * k, self.wr * k, self.theta0, self.wtheta, self.scale)

    def angular_mass(self) -> float:
        """``int_0^{2 pi}`` of the angular factor."""
        w = self.wtheta
        if self.full_circle:
            return 2 * math.pi
        if w <= math.pi / 2:
            return 2 * w
        return 2 * (math.pi - math.pi ** 2 / (4 * w))

    def radial_moment(self, p: float) -> float:
        """``int_0^inf radial(r) r^p dr`` by quadrature split at the kink."""
        f = lambda r: (1.0 - abs(r - self.r0) / self.wr) * r ** p  # noqa: E731
        a = integrate.quad(f, self.r_min, self.r0, epsabs=0, epsrel=1e-13, limit=200)[0]
        b = integrate.quad(f, self.r0, self.r_max, epsabs=0, epsrel=1e-13, limit=200)[0]
        return a + b

    def integral_over_r(self) -> float:
        """``int f(v) / |v| dv`` in closed form: ``wr * angular_mass``."""
        return self.scale * self.wr * self.angular_mass()

    def angular_support(self):
        """Arcs ``(lo, hi)`` in ``[0, 2 pi)`` outside of which the angular factor vanishes."""
        if self.full_circle:
            return [(0.0, 2 * math.pi)]
        w = min(self.wtheta, math.pi / 2)
        return [(self.theta0 - w, self.theta0 + w), (self.theta0 + math.pi - w, self.theta0 + math.pi + w)]

    def spec_string(self) -> str:
        return f"bump:{self.r0:.17g},{self.wr:.17g},{self.theta0:.17g},{self.wtheta:.17g}"


def parse_bump(s: str) -> BumpFunction:
    if not s.startswith("bump:"):
        raise ValueError(f"bad bump {s!r}")
    parts = [float(x) for x in s[5:].split(",")]
    if len(parts) != 4:
        raise ValueError(f"bump needs r0,wr,theta0,wtheta: {s!r}")
    return BumpFunction(*parts)


# --------------------------------------------------------------------------
# Support statistics
# --------------------------------------------------------------------------


def _angle_grid(f: BumpFunction, n: int = 2049) -> np.ndarray:
    pts = []
    for lo, hi in f.angular_support():
        pts.append(np.linspace(lo, hi, n))
        k0, k1 = math.ceil(lo / (math.pi / 4)), math.floor(hi / (math.pi / 4))
        pts.append(np.arange(k0, k1 + 1) * (math.pi / 4))
    return np.concatenate(pts)


def _refine_extremum(fn, grid: np.ndarray, vals: np.ndarray, sign: int, lo: float, hi: float) -> float:
    """Polish the best grid value of ``sign * fn`` with a bounded 1-D search."""
    j = int(np.argmax(sign * vals))
    best = vals[j]
    step = (grid.max() - grid.min()) / max(len(grid) - 1, 1)
    a, b = max(lo, grid[j] - 2 * step), min(hi, grid[j] + 2 * step)
    if b > a:
        res = optimize.minimize_scalar(lambda t: -sign * fn(t), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12})
        if sign * (-sign * res.fun) > sign * best:
            best = -sign * res.fun
    return float(best)


def support_stats(u, f: BumpFunction, norm: NormSpec = L2) -> Tuple[float, float, float, float]:
    """``(R, r, R/r, D)`` for the bump's support.

    ``v * u`` is 1-homogeneous in ``v``, so ``R`` and ``r`` are the outer and
    inner support radii times the extreme angular values of ``e * u``.
    ``D = sup |Psi(v) Psi(u)^-1|``; for l2 its square is ``rho^2 + rho^-2``
    with ``rho = |v|/|u|``, maximal at a support radius.
    """
    u = _vec(u)
    nu = math.hypot(*u)
    if norm.kind == "l2":
        R = f.r_max * nu
        r = f.r_min * nu
        D = max(math.sqrt((rho * rho) + 1 / (rho * rho)) for rho in (f.r_min / nu, f.r_max / nu))
        return R, r, R / r, D
    th = _angle_grid(f)
    E = np.stack([np.cos(th), np.sin(th)], axis=1)
    sv = star_array(E, u, norm)
    fn = lambda t: star((math.cos(t), math.sin(t)), u, norm)  # noqa: E731
    smax = max(_refine_extremum(fn, th, sv, +1, lo, hi) for lo, hi in f.angular_support())
    smin = min(_refine_extremum(fn, th, sv, -1, lo, hi) for lo, hi in f.angular_support())
    R = f.r_max * smax
    r = f.r_min * smin
    # D: Psi(v) Psi(u)^-1 over a polar grid of the support
    radii = np.linspace(f.r_min, f.r_max, 65)
    Pinv = psi_matrix(u).inv()
    best = 0.0
    for rad in radii:
        V = rad * E
        n2 = rad * rad
        # Psi(v) = ((vx, -vy/n2), (vy, vx/n2))
        ent = np.stack([
            V[:, 0] * Pinv.a - V[:, 1] / n2 * Pinv.c,
            V[:, 0] * Pinv.b - V[:, 1] / n2 * Pinv.d,
            V[:, 1] * Pinv.a + V[:, 0] / n2 * Pinv.c,
            V[:, 1] * Pinv.b + V[:, 0] / n2 * Pinv.d,
        ], axis=1)
        best = max(best, float(norm.entrywise(ent).max()))
    return R, r, R / r, best * (1 + 1e-3)


def d_bound_constant(u, f: BumpFunction, norm: NormSpec = L2) -> float:
    """Measured ``c_1`` with ``D <= c_1 sup max(|v|/|u|, |u|/|v|)`` on the support."""
    nu = math.hypot(*_vec(u))
    D = support_stats(u, f, norm)[3]
    m = max(f.r_max / nu, nu / f.r_min)
    return D / m


# --------------------------------------------------------------------------
# Lifts to the frame bundle and horocycle integrals
# --------------------------------------------------------------------------


def lift_f_tilde(f: BumpFunction, g: Mat2) -> float:
    """``f~(g) = f(g u0) * tri(c_{u0}(g))``."""
    v = g.apply(U0)
    fv = f.at(v)
    if fv == 0.0:
        return 0.0
    return fv * float(tri(cocycle(U0, g)))


def _frame_data(v: Frame):
    """``(u, c')`` with ``v = ± Psi(u) n_{c'}``."""
    u = v.m.apply(U0)
    return u, cocycle(U0, v.m)


def _contributors(f: BumpFunction, u, spec: GroupSpec, norm: NormSpec, cmax: float, jobs: int = 1):
    """Group elements that can have ``gamma u`` in supp f with ``|c_u(gamma)| <= cmax``.

    By ``| |gamma| - |c_u(gamma)| (gamma u * u) | <= D`` such elements have norm at
    most ``cmax R + D``; enumerate that ball with a 10% margin and filter.
    """
    R, r, _, D = support_stats(u, f, norm)
    radius = 1.1 * (cmax * R + D)
    ball = enumerate_ball(spec, norm, radius, jobs)
    V = ball.apply(u)
    fv = f(V[:, 0], V[:, 1])
    keep = fv > 0
    ent = ball.entries[keep]
    c = cocycle_array(u, ent)
    vals = fv[keep]
    sel = np.abs(c) <= cmax
    return vals[sel], c[sel], ball


def bar_f(f: BumpFunction, v: Frame, spec: GroupSpec, norm: NormSpec = L2) -> float:
    """``sum over gamma in Gamma (PSL) of f~(gamma g)`` at the frame ``v``."""
    u, c0 = _frame_data(v)
    vals, c, _ = _contributors(f, u, spec, norm, 1.0 + abs(c0))
    return float(np.sum(vals * tri(c + c0)))


def horocycle_birkhoff(f: BumpFunction, v: Frame, t: float, spec: GroupSpec, norm: NormSpec = L2,
                       jobs: int = 1) -> float:
    """``int_{-t}^{t} f_bar(h^s v) ds``.

    Along the horocycle ``c_{u0}(gamma g n_s) = c_{u0}(gamma g) + s``, so each
    group element contributes ``f(gamma u) * int_{-t}^{t} tri(c + s) ds`` and the
    integral is evaluated exactly from the triangle's antiderivative.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    u, c0 = _frame_data(v)
    vals, c, _ = _contributors(f, u, spec, norm, t + 1.0 + abs(c0), jobs)
    return float(np.sum(vals * tri_window(c + c0, t)))


def horocycle_birkhoff_quad(f: BumpFunction, v: Frame, t: float, spec: GroupSpec,
                            norm: NormSpec = L2) -> float:
    """Reference route: adaptive quadrature of ``s -> f_bar(h^s v)`` on its kinks."""
    u, c0 = _frame_data(v)
    vals, c, _ = _contributors(f, u, spec, norm, t + 1.0 + abs(c0))
    cc = c + c0
    kinks = np.unique(np.concatenate([-cc - 1, -cc, -cc + 1]))
    kinks = kinks[(kinks > -t) & (kinks < t)]
    pts = np.r_[-t, kinks, t]
    total = 0.0
    g = lambda s: float(np.sum(vals * tri(cc + s)))  # noqa: E731
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            total += integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-12)[0]
    return total


def orbit_sum(f: BumpFunction, u, spec: GroupSpec, norm: NormSpec, T: float, alpha: float = 0.0,
              ball=None) -> float:
    """``sum over gamma in Gamma_T (SL level) of f(gamma u / T^alpha)``."""
    if ball is None:
        ball = enumerate_ball(spec, norm, T)
    elif ball.T > T:
        ball = ball.restrict(T)
    V = ball.apply(_vec(u)) / T ** alpha
    return spec.sl_factor * float(np.sum(f(V[:, 0], V[:, 1])))


def sandwich_bounds(f: BumpFunction, u, spec: GroupSpec, norm: NormSpec, T: float):
    """``(lower, orbit sum, upper)`` for the horocycle sandwich at the frame ``Psi(u)``."""
    R, r, _, D = support_stats(u, f, norm)
    fr = psi(u)
    S = orbit_sum(f, u, spec, norm, T)
    t_up = 1.0 + (T + D) / r
    upper = spec.sl_factor * horocycle_birkhoff(f, fr, t_up, spec, norm)
    t_lo = (T - D) / R - 1.0
    lower = spec.sl_factor * horocycle_birkhoff(f, fr, t_lo, spec, norm) if t_lo > 0 else 0.0
    return lower, S, upper
