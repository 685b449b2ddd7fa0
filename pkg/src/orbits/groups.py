"""Concrete Fuchsian groups: the modular group, Schottky groups and free groups
generated by two parabolics.

Boundary points are handled in *projective angle*: the vector ``(cos p, sin p)``
spans the line of the boundary point ``cot p``, so ``p`` lives in ``R / pi Z``
with ``INF`` at ``p = 0``.  Ping-pong domains are closed arcs in this angle,
which keeps the point at infinity an ordinary interior point.

Words are tuples of signed generator indices starting at 1, for example
``(+1, -2, +1)``.  Consecutive letters with the same index form a syllable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .moebius import INF, IDENTITY, Mat2, a_t, is_inf, operator_norm, rotation

PI = math.pi


# --------------------------------------------------------------------------
# Projective arcs
# --------------------------------------------------------------------------


def boundary_to_angle(x) -> float:
    """Projective angle in ``[0, pi)`` of a boundary point."""
    if is_inf(x):
        return 0.0
    return math.atan2(1.0, x) % PI


def angle_to_boundary(p: float):
    p = p % PI
    if p == 0.0:
        return INF
    return math.cos(p) / math.sin(p)


def projective_image(g: Mat2, p: float) -> float:
    x, y = g.apply((math.cos(p), math.sin(p)))
    return math.atan2(y, x) % PI


@dataclass(frozen=True)
class Arc:
    """Closed arc ``[lo, lo + length]`` in ``R / pi Z``."""

    lo: float
    length: float

    def __post_init__(self):
        if not (0.0 <= self.length < PI):
            raise ValueError("arc length must lie in [0, pi)")
        object.__setattr__(self, "lo", self.lo % PI)

    @classmethod
    def centered(cls, center: float, half_width: float) -> "Arc":
        return cls(center - half_width, 2 * half_width)

    @classmethod
    def between(cls, x, y) -> "Arc":
        """Boundary points met going from ``x`` to ``y`` in increasing order (through INF if needed).

        The angle ``p`` decreases as ``cot p`` increases, so the arc runs from ``y`` to ``x``.
        """
        p, q = boundary_to_angle(x), boundary_to_angle(y)
        return cls(q, (p - q) % PI)

    @property
    def hi(self) -> float:
        return (self.lo + self.length) % PI

    def offset(self, p: float) -> float:
        return (p - self.lo) % PI

    def contains(self, p: float, tol: float = 1e-12) -> bool:
        o = self.offset(p)
        return o <= self.length + tol or o >= PI - tol

    def sample(self, n: int) -> np.ndarray:
        return self.lo + np.linspace(0, self.length, n)

    def endpoints_boundary(self):
        return angle_to_boundary(self.lo), angle_to_boundary(self.hi)


def min_stretch(m: Mat2, arc: Arc) -> float:
    """``min |m y|`` over unit vectors ``y`` whose line lies in ``arc``.

    The squared stretch is ``q(p) = A + B cos 2p + C sin 2p``; its minimum on an
    arc is attained at an endpoint or at an eigen-direction of ``m^T m``.
    """
    e11 = m.a * m.a + m.c * m.c
    e22 = m.b * m.b + m.d * m.d
    e12 = m.a * m.b + m.c * m.d
    A = 0.5 * (e11 + e22)
    B = 0.5 * (e11 - e22)
    C = e12
    cands = [arc.lo, arc.lo + arc.length]
    crit = 0.5 * math.atan2(C, B)  # maximum of q; minimum sits a quarter turn away
    for p in (crit + PI / 2, crit):
        if arc.contains(p):
            cands.append(p)
    q = min(A + B * math.cos(2 * p) + C * math.sin(2 * p) for p in cands)
    return math.sqrt(max(q, 0.0))


# --------------------------------------------------------------------------
# Group data
# --------------------------------------------------------------------------

Word = Tuple[int, ...]


@dataclass
class GroupSpec:
    kind: str
    generators: List[Mat2]
    contains_minus_I: bool
    known_delta: Optional[float] = None
    growth_certificate: Optional[Tuple[float, float]] = None
    ping_pong_domains: Optional[Dict[Tuple[int, int], Arc]] = None
    minus_I_adjoined: bool = False
    params: Tuple = ()
    # indices i whose letter satisfies i^2 = 1 in PSL
    involutions: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        for g in self.generators:
            if abs(g.det - 1.0) > 1e-12:
                raise ValueError(f"generator {g} does not have unit determinant")

    @property
    def sl_factor(self) -> int:
        return 2 if (self.contains_minus_I or self.minus_I_adjoined) else 1

    @property
    def label(self) -> str:
        if self.kind == "modular":
            return "modular"
        if self.kind == "schottky":
            return "schottky:" + ",".join(f"{p:.17g}" for p in self.params)
        if self.kind == "parabolic_free":
            return f"parabolic:{self.params[0]:.17g}"
        return "custom"

    def letter(self, k: int) -> Mat2:
        g = self.generators[abs(k) - 1]
        return g if k > 0 else g.inv()

    def evaluate(self, word: Sequence[int]) -> Mat2:
        m = IDENTITY
        for k in word:
            m = m @ self.letter(k)
        return m

    def reduce(self, word: Sequence[int]) -> Word:
        out: List[int] = []
        for k in word:
            if out and (out[-1] == -k or (out[-1] == k and abs(k) in self.involutions)):
                out.pop()
            else:
                out.append(-k if (k < 0 and abs(k) in self.involutions) else k)
        return tuple(out)

    def is_reduced(self, word: Sequence[int]) -> bool:
        return self.reduce(word) == tuple(word)

    @property
    def certified(self) -> bool:
        return self.kind == "modular" or self.growth_certificate is not None


@dataclass(frozen=True)
class GroupElement:
    m: Mat2
    word: Word

    def check(self, spec: GroupSpec, tol: float = 1e-9) -> bool:
        ev = spec.evaluate(self.word)
        return ev.allclose(self.m, tol) or ev.allclose(-self.m, tol)


def format_word(word: Sequence[int]) -> str:
    return "".join(f"{k:+d}" for k in word)


def parse_word(s: str) -> Word:
    import re

    if not s:
        return ()
    toks = re.findall(r"[+-]\d+", s)
    if "".join(toks) != s:
        raise ValueError(f"malformed word {s!r}")
    return tuple(int(t) for t in toks)


# --------------------------------------------------------------------------
# Builders
# --------------------------------------------------------------------------

S_MAT = Mat2(0.0, -1.0, 1.0, 0.0)
T_MAT = Mat2(1.0, 1.0, 0.0, 1.0)


def build_modular() -> GroupSpec:
    """SL(2, Z) with generators ``S`` (index 1) and ``T`` (index 2)."""
    return GroupSpec(
        kind="modular",
        generators=[S_MAT, T_MAT],
        contains_minus_I=True,
        known_delta=1.0,
        involutions=frozenset({1}),
    )


def _hyperbolic_arc_half_width(t: float) -> float:
    # smallest symmetric arcs around the fixed lines that diag(e^{t/2}, e^{-t/2}) plays ping-pong on
    return math.atan(math.exp(-t / 2))


def build_schottky(t1: float, t2: float, angle: float) -> GroupSpec:
    """Two hyperbolic generators with translation lengths ``t1``, ``t2``.

    ``A = a_{t1}`` has axis ``0 -> INF``; ``B`` is ``a_{t2}`` conjugated by the
    rotation of tangent vectors at ``i`` through ``angle``.
    """
    if t1 <= 0 or t2 <= 0:
        raise ValueError("translation lengths must be positive")
    A = a_t(t1)
    r = rotation(angle / 2)
    B = r @ a_t(t2) @ r.inv()
    w1, w2 = _hyperbolic_arc_half_width(t1), _hyperbolic_arc_half_width(t2)
    c = (angle / 2) % PI
    domains = {
        (1, +1): Arc.centered(0.0, w1),
        (1, -1): Arc.centered(PI / 2, w1),
        (2, +1): Arc.centered(c, w2),
        (2, -1): Arc.centered(c + PI / 2, w2),
    }
    spec = GroupSpec(
        kind="schottky",
        generators=[A, B],
        contains_minus_I=False,
        minus_I_adjoined=True,
        ping_pong_domains=domains,
        params=(float(t1), float(t2), float(angle)),
    )
    if not verify_ping_pong(spec):
        raise ValueError(
            f"schottky({t1}, {t2}, {angle}): ping-pong domains overlap, group not certified free")
    spec.growth_certificate = growth_certificate(spec)
    return spec


def build_parabolic_free(mu: float) -> GroupSpec:
    """Free group on ``((1, mu), (0, 1))`` and ``((1, 0), (mu, 1))``."""
    if not mu >= 3:
        raise ValueError("parabolic free group needs mu >= 3")
    A = Mat2(1.0, mu, 0.0, 1.0)
    B = Mat2(1.0, 0.0, mu, 1.0)
    domains = {
        (1, +1): Arc.between(mu / 2, INF),
        (1, -1): Arc.between(INF, -mu / 2),
        (2, +1): Arc.between(0.0, 2 / mu),
        (2, -1): Arc.between(-2 / mu, 0.0),
    }
    spec = GroupSpec(
        kind="parabolic_free",
        generators=[A, B],
        contains_minus_I=False,
        minus_I_adjoined=True,
        ping_pong_domains=domains,
        params=(float(mu),),
    )
    if not verify_ping_pong(spec):
        raise ValueError(f"parabolic({mu}): ping-pong fails")
    spec.growth_certificate = growth_certificate(spec)
    return spec


def parse_group(s: str) -> GroupSpec:
    s = s.strip()
    if s == "modular":
        return build_modular()
    try:
        if s.startswith("schottky:"):
            t1, t2, ang = (float(x) for x in s.split(":", 1)[1].split(","))
            return build_schottky(t1, t2, ang)
        if s.startswith("parabolic:"):
            return build_parabolic_free(float(s.split(":", 1)[1]))
    except ValueError as e:
        raise ValueError(f"bad group {s!r}: {e}") from None
    raise ValueError(f"unknown group {s!r}")


# --------------------------------------------------------------------------
# Ping-pong verification and growth certificates
# --------------------------------------------------------------------------


def _fixed_angles(g: Mat2) -> List[float]:
    """Projective angles of the eigenlines of ``g``."""
    ev, vecs = np.linalg.eig(g.as_array())
    out = []
    for k in range(2):
        if abs(ev[k].imag) < 1e-12:
            v = vecs[:, k].real
            out.append(math.atan2(v[1], v[0]) % PI)
    return out


def _arcs_disjoint(d1: Arc, d2: Arc, shared_fixed: Sequence[float]) -> bool:
    """Closed arcs disjoint, except that they may touch at a shared parabolic fixed point."""
    eps = 1e-12
    a = d1.offset(d2.lo)  # where d2 starts, seen from d1
    b = d2.offset(d1.lo)
    a = a - PI if a > PI - eps else a
    b = b - PI if b > PI - eps else b
    if a > d1.length + eps and b > d2.length + eps:
        return True
    if d1.length + d2.length >= PI - eps:
        return False
    touch = None
    if abs(a - d1.length) <= eps and b > d2.length + eps:
        touch = d2.lo
    elif abs(b - d2.length) <= eps and a > d1.length + eps:
        touch = d1.lo
    if touch is None:
        return False
    return any(abs((touch - f + PI / 2) % PI - PI / 2) < 1e-9 for f in shared_fixed)


def verify_ping_pong(spec: GroupSpec) -> bool:
    """Check disjointness of the domains and ``g(complement of D(g^-1)) ⊂ D(g)``.

    The projective action of a unit-determinant matrix is an orientation
    preserving homeomorphism of the circle, so an arc maps onto the arc
    between the images of its endpoints; a midpoint fixes which of the two.
    """
    doms = spec.ping_pong_domains
    if not doms:
        return False
    keys = sorted(doms)
    for k1 in range(len(keys)):
        for k2 in range(k1 + 1, len(keys)):
            i1, i2 = keys[k1][0], keys[k2][0]
            shared = _fixed_angles(spec.generators[i1 - 1]) if i1 == i2 else []
            if not _arcs_disjoint(doms[keys[k1]], doms[keys[k2]], shared):
                return False
    for (i, s), target in doms.items():
        g = spec.letter(i * s)
        source = doms.get((i, -s))
        if source is None:
            return False
        # complement of the closed source arc: from its hi end to its lo end
        comp_lo = source.lo + source.length
        comp_len = PI - source.length
        pts = [comp_lo + comp_len * f for f in (0.0, 0.25, 0.5, 0.75, 1.0)]
        imgs = [target.offset(projective_image(g, p)) for p in pts]
        tol = 1e-12
        imgs = [o - PI if o > PI - tol else o for o in imgs]
        if any(o < -tol or o > target.length + tol for o in imgs):
            return False
        if any(imgs[k + 1] < imgs[k] - tol for k in range(4)):
            return False
    return True


def syllable_stretch(spec: GroupSpec, i: int, n: int) -> float:
    """Minimal stretch of ``g_i^n`` on unit vectors in the other generators' domains."""
    g = _power(spec.letter(i if n > 0 else -i), abs(n))
    best = INF
    for (j, s), arc in spec.ping_pong_domains.items():
        if j != i:
            best = min(best, min_stretch(g, arc))
    return best


def step_stretch(spec: GroupSpec, i: int, sign: int) -> float:
    """Minimal stretch of ``g_i^{sign}`` on its own attracting domain."""
    return min_stretch(spec.letter(i * sign), spec.ping_pong_domains[(i, sign)])


def _power(g: Mat2, n: int) -> Mat2:
    out = IDENTITY
    base = g
    while n:
        if n & 1:
            out = out @ base
        base = base @ base
        n >>= 1
    return out


def growth_certificate(spec: GroupSpec) -> Tuple[float, float]:
    """``(c, lam)`` with ``|gamma_w|_op >= c * lam^(syllables of w)``.

    For ping-pong groups: every syllable ``g_i^n`` stretches vectors of the
    other domains by at least ``s(i, n) >= s(i, ±1)`` (powers only grow the
    stretch because each letter expands its own attracting domain), and a
    reduced word applied to a vector of a suitable domain stretches by the
    product.  Hence ``c = 1`` and ``lam = min_i s(i, ±1)``.
    """
    if spec.ping_pong_domains is None:
        if len(spec.generators) == 1:
            return _single_generator_certificate(spec.generators[0])
        raise ValueError("growth certificate needs ping-pong domains")
    lam = INF
    for i in range(1, len(spec.generators) + 1):
        for sign in (1, -1):
            if step_stretch(spec, i, sign) < 1.0 - 1e-12:
                raise ValueError(f"generator {i * sign:+d} contracts its own domain")
            lam = min(lam, syllable_stretch(spec, i, sign))
    if not lam > 1.0:
        raise ValueError(f"syllable stretch {lam} does not exceed 1; no certificate")
    return 1.0, lam


def _single_generator_certificate(g: Mat2) -> Tuple[float, float]:
    """Cyclic group of a diagonalizable hyperbolic ``g = P D P^-1``.

    ``|g^n|_op >= |D^n| / cond(P)`` and ``|D^n|_op = rho^|n|``.
    """
    ev, P = np.linalg.eig(g.as_array())
    rho = float(max(abs(ev)))
    if not rho > 1.0:
        raise ValueError("single generator is not hyperbolic")
    return 1.0 / float(np.linalg.cond(P)), rho


def cyclic_spec(g: Mat2) -> GroupSpec:
    spec = GroupSpec(kind="custom", generators=[g], contains_minus_I=False)
    spec.growth_certificate = growth_certificate(spec)
    return spec


def syllable_count(word: Sequence[int]) -> int:
    n = 0
    prev = None
    for k in word:
        if prev is None or abs(k) != abs(prev):
            n += 1
        prev = k
    return n


def op_norm_of_word(spec: GroupSpec, word: Sequence[int]) -> float:
    return operator_norm(spec.evaluate(word))
