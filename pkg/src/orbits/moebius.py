"""2x2 matrix algebra, matrix norms and upper half-plane geometry.

Points of the hyperbolic plane are complex numbers with positive imaginary
part.  Boundary points are real floats or ``INF``; the point at infinity is
always tested for explicitly and never fed into arithmetic.

Unit tangent vectors are identified with PSL(2, R): the identity is the
upward unit vector at ``i``.  The geodesic and horocycle flows act by right
multiplication by ``a_t`` and ``n_s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

INF = math.inf

Boundary = float  # a real number or INF
Point = Union[complex, float]


def is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


@dataclass(frozen=True)
class Mat2:
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_array(cls, m) -> "Mat2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def __matmul__(self, o: "Mat2") -> "Mat2":
        return Mat2(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    def __neg__(self) -> "Mat2":
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, k: float) -> "Mat2":
        return Mat2(k * self.a, k * self.b, k * self.c, k * self.d)

    __rmul__ = __mul__

    def __add__(self, o: "Mat2") -> "Mat2":
        return Mat2(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)

    def __sub__(self, o: "Mat2") -> "Mat2":
        return Mat2(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def inv(self) -> "Mat2":
        """Inverse, assuming unit determinant."""
        return Mat2(self.d, -self.b, -self.c, self.a)

    def apply(self, v):
        """Linear action on a plane vector ``(x, y)``."""
        x, y = v
        return (self.a * x + self.b * y, self.c * x + self.d * y)

    def entries(self) -> tuple:
        return (self.a, self.b, self.c, self.d)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def sign_normalized(self) -> "Mat2":
        """Representative of ``±M`` whose first nonzero entry is positive."""
        for e in self.entries():
            if e != 0.0:
                return self if e > 0 else -self
        return self

    def allclose(self, o: "Mat2", tol: float = 1e-9) -> bool:
        scale = max(1.0, max(abs(e) for e in self.entries()))
        return all(abs(x - y) <= tol * scale for x, y in zip(self.entries(), o.entries()))


IDENTITY = Mat2(1.0, 0.0, 0.0, 1.0)


def a_t(t: float) -> Mat2:
    """Geodesic flow element ``diag(e^{t/2}, e^{-t/2})``."""
    e = math.exp(t / 2)
    return Mat2(e, 0.0, 0.0, 1.0 / e)


def n_s(s: float) -> Mat2:
    """Horocycle flow element ``((1, s), (0, 1))``."""
    return Mat2(1.0, s, 0.0, 1.0)


def rotation(phi: float) -> Mat2:
    """``((cos, -sin), (sin, cos))``; fixes ``i`` and turns tangent vectors there by ``2 phi``."""
    c, s = math.cos(phi), math.sin(phi)
    return Mat2(c, -s, s, c)


def random_sl2(rng: np.random.Generator, scale: float = 1.0) -> Mat2:
    """Random unit-determinant matrix ``k_1 a_t k_2`` with ``|t| <= 4 scale``."""
    t = rng.uniform(-4 * scale, 4 * scale)
    return rotation(rng.uniform(0, 2 * math.pi)) @ a_t(t) @ rotation(rng.uniform(0, 2 * math.pi))


# --------------------------------------------------------------------------
# Moebius action and hyperbolic geometry
# --------------------------------------------------------------------------


def mobius_act(g: Mat2, z):
    """Homography ``(az+b)/(cz+d)`` on H or on the boundary R ∪ {INF}."""
    if is_inf(z):
        return INF if g.c == 0 else g.a / g.c
    den = g.c * z + g.d
    if den == 0:
        return INF
    w = (g.a * z + g.b) / den
    if isinstance(w, complex):
        return w
    return float(w)


def hyp_dist(z: complex, w: complex) -> float:
    """Hyperbolic distance, ``cosh d = 1 + |z-w|^2 / (2 Im z Im w)``."""
    if z.imag <= 0 or w.imag <= 0:
        raise ValueError("points must lie in the upper half-plane")
    q = abs(z - w) ** 2 / (2 * z.imag * w.imag)
    # arcosh(1+q) written to stay accurate for small q
    return math.log1p(q + math.sqrt(q * (q + 2)))


def hyp_dist_array(z: np.ndarray, w: complex) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    q = np.abs(z - w) ** 2 / (2 * z.imag * w.imag)
    return np.log1p(q + np.sqrt(q * (q + 2)))


def _poisson(z: complex, xi: float) -> float:
    if is_inf(xi):
        return z.imag
    return z.imag / abs(z - xi) ** 2


def busemann(xi, x: complex, y: complex) -> float:
    """Busemann cocycle ``lim_{z->xi} d(x,z) - d(y,z)`` in closed form.

    For ``xi = INF`` this is ``log(Im y / Im x)``; for real ``xi`` it is the
    log-ratio of Poisson kernels, which is the same formula after moving
    ``xi`` to infinity by an isometry.
    """
    return math.log(_poisson(y, xi) / _poisson(x, xi))


def busemann_array(xi: np.ndarray, x: complex, y: np.ndarray) -> np.ndarray:
    """Vectorized Busemann cocycle for finite boundary points ``xi``."""
    xi = np.asarray(xi, dtype=float)
    y = np.asarray(y, dtype=complex)
    px = x.imag / np.abs(x - xi) ** 2
    py = y.imag / np.abs(y - xi) ** 2
    return np.log(py / px)


def cayley_direction(z) -> float:
    """Angle in ``[0, 2 pi)`` at which the ray from ``i`` through ``z`` leaves the disk model."""
    w = (z - 1j) / (z + 1j)
    return float(np.angle(w)) % (2 * math.pi)


def boundary_from_disk_angle(psi):
    """Boundary point of H hit by the disk-model ray from ``i`` at angle ``psi``."""
    psi = np.asarray(psi, dtype=float)
    with np.errstate(divide="ignore"):
        return -1.0 / np.tan(psi / 2)


# --------------------------------------------------------------------------
# Frames: unit tangent vectors as PSL(2, R)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    m: Mat2

    def __post_init__(self):
        if abs(self.m.det - 1.0) > 1e-9 * max(1.0, max(abs(e) for e in self.m.entries())) ** 2:
            raise ValueError(f"frame matrix must have unit determinant, got {self.m.det}")
        object.__setattr__(self, "m", self.m.sign_normalized())

    @property
    def backward(self):
        return mobius_act(self.m, 0.0)

    @property
    def forward(self):
        return mobius_act(self.m, INF)

    @property
    def basepoint(self) -> complex:
        return mobius_act(self.m, 1j)

    def __eq__(self, other) -> bool:
        return isinstance(other, Frame) and self.m.allclose(other.m)

    def __hash__(self):
        return hash(tuple(round(e, 9) for e in self.m.entries()))

    def left(self, g: Mat2) -> "Frame":
        return Frame(g @ self.m)


IDENTITY_FRAME = Frame(IDENTITY)


def geodesic_flow(v: Frame, t: float) -> Frame:
    return Frame(v.m @ a_t(t))


def horocycle_flow(v: Frame, s: float) -> Frame:
    return Frame(v.m @ n_s(s))


def frame_endpoints(v: Frame):
    """``(v^-, v^+, basepoint)`` of the geodesic through ``v``."""
    return v.backward, v.forward, v.basepoint


def frame_at(x: complex, xi) -> Frame:
    """The unit vector based at ``x`` pointing toward the boundary point ``xi``."""
    s = math.sqrt(x.imag)
    h = Mat2(s, x.real / s, 0.0, 1.0 / s)
    eta = mobius_act(h.inv(), xi)
    # rotation(phi) sends INF to cot(phi) up to sign
    phi = 0.0 if is_inf(eta) else math.atan2(1.0, eta)
    return Frame(h @ rotation(phi))


# --------------------------------------------------------------------------
# Matrix norms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NormSpec:
    """A norm on 2x2 matrices together with equivalence constants against l2.

    ``c_low * |M|_2 <= |M| <= c_high * |M|_2`` for every matrix ``M``.
    ``p`` is set for entrywise l^p norms and enables vectorized evaluation.
    """

    kind: str
    name: str
    c_low: float
    c_high: float
    strictly_convex: bool
    p: Optional[float] = None
    evaluator: Optional[Callable[[Mat2], float]] = None

    def __post_init__(self):
        if self.kind not in ("l1", "l2", "linf", "custom"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if not (0 < self.c_low <= self.c_high):
            raise ValueError("need 0 < c_low <= c_high")
        if self.kind == "l2" and not (self.c_low == self.c_high == 1.0):
            raise ValueError("l2 equivalence constants must be 1")
        if self.p is None and self.evaluator is None:
            raise ValueError("custom norms need an evaluator")

    def __call__(self, m: Mat2) -> float:
        return norm_eval(self, m)

    def entrywise(self, arr: np.ndarray) -> np.ndarray:
        """Vectorized norm of an ``(N, 4)`` array of entries ``(a, b, c, d)``."""
        arr = np.abs(np.asarray(arr, dtype=float))
        if self.p is None:
            return np.array([norm_eval(self, Mat2(*row)) for row in arr])
        if math.isinf(self.p):
            return arr.max(axis=-1)
        if self.p == 2:
            return np.sqrt((arr * arr).sum(axis=-1))
        if self.p == 1:
            return arr.sum(axis=-1)
        return (arr ** self.p).sum(axis=-1) ** (1.0 / self.p)

    def __repr__(self):
        return f"NormSpec({self.name})"


def lp_norm(p: float) -> NormSpec:
    """Entrywise l^p norm on the four matrix entries."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if math.isinf(p):
        return NormSpec("linf", "linf", 0.5, 1.0, False, p=INF)
    if p == 2:
        return NormSpec("l2", "l2", 1.0, 1.0, True, p=2.0)
    if p == 1:
        return NormSpec("l1", "l1", 1.0, 2.0, False, p=1.0)
    k = 4.0 ** (1.0 / p - 0.5)
    lo, hi = (1.0, k) if p < 2 else (k, 1.0)
    name = f"l{p:g}"
    return NormSpec("custom", name, lo, hi, True, p=float(p))


L1 = lp_norm(1)
L2 = lp_norm(2)
LINF = lp_norm(INF)


def _op_norm(m: Mat2) -> float:
    return float(np.linalg.norm(m.as_array(), 2))


OPERATOR = NormSpec("custom", "op", 1.0 / math.sqrt(2), 1.0, False, evaluator=_op_norm)


def custom_norm(name: str, fn: Callable[[Mat2], float], c_low: float, c_high: float,
                strictly_convex: bool) -> NormSpec:
    return NormSpec("custom", name, c_low, c_high, strictly_convex, evaluator=fn)


def parse_norm(s: str) -> NormSpec:
    """``l1 | l2 | linf | custom:<name>`` with names ``op`` or ``l<p>``."""
    s = s.strip()
    if s == "l1":
        return L1
    if s == "l2":
        return L2
    if s == "linf":
        return LINF
    if s.startswith("custom:"):
        name = s.split(":", 1)[1]
        if name == "op":
            return OPERATOR
        if name.startswith("l"):
            try:
                return lp_norm(float(name[1:]))
            except ValueError:
                pass
    raise ValueError(f"unknown norm {s!r}")


def norm_eval(n: NormSpec, m: Mat2) -> float:
    if n.p is not None:
        return float(n.entrywise(np.array(m.entries()))[()])
    val = n.evaluator(m)
    if not (val >= 0.0) or math.isnan(val):
        raise ValueError(f"norm {n.name} returned invalid value {val}")
    return float(val)


def operator_norm(m: Mat2) -> float:
    return _op_norm(m)
