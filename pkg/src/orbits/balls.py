"""Exact enumeration of norm balls ``{gamma : |gamma| <= T}`` in Fuchsian groups.

Three back-ends:

* ``modular_scan``: every primitive first column ``(a, c)`` of SL(2, Z)
  determines its second columns up to the shift ``(b, d) += k (a, c)``, so the
  ball is a union of integer intervals in ``k``.  Vectorized, exact.
* ``modular_word_search``: a tree on SL(2, Z) rooted at the stabilizer of
  ``i``, where each element's parent is its best neighbour across a face of the
  Dirichlet domain at ``i``.  Norms grow strictly along every branch, which
  makes pruning exact.  Used as the independent oracle for the scan.
* ``pingpong_search``: level-wise search over reduced words of a ping-pong
  group, syllable by syllable, pruning a subtree once a stretch lower bound on
  every element in it exceeds the radius.

All back-ends work in PSL(2, R): one sign representative per element, the
first nonzero entry in row-major order positive.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .groups import (
    GroupElement,
    GroupSpec,
    Word,
    format_word,
    parse_word,
    syllable_stretch,
)
from .measures import EmpiricalMeasure
from .moebius import L2, Mat2, NormSpec


def _normalize_rows(arr: np.ndarray) -> np.ndarray:
    """Flip the sign of rows whose first nonzero entry is negative."""
    arr = np.array(arr, copy=True)
    if arr.size == 0:
        return arr
    nz = arr != 0
    first = np.argmax(nz, axis=1)
    lead = arr[np.arange(arr.shape[0]), first]
    arr[lead < 0] *= -1
    return arr


@dataclass
class BallResult:
    """A ball of PSL representatives, stored column-wise.

    ``entries`` is an ``(N, 4)`` array of ``(a, b, c, d)``; ``words`` lists the
    reduced words when the back-end produced them (modular scans compute them
    on demand).
    """

    spec: GroupSpec
    norm: NormSpec
    T: float
    entries: np.ndarray
    norms: np.ndarray
    words: Optional[List[Word]] = None
    stats: Dict[str, float] = field(default_factory=dict)

    @property
    def psl_count(self) -> int:
        return int(self.entries.shape[0])

    @property
    def sl_count(self) -> int:
        return self.spec.sl_factor * self.psl_count

    def __len__(self) -> int:
        return self.psl_count

    def matrices(self) -> List[Mat2]:
        return [Mat2(*map(float, row)) for row in self.entries]

    def get_words(self) -> List[Word]:
        if self.words is None:
            if self.spec.kind != "modular":
                raise ValueError("words missing for a word-search ball")
            self.words = modular_words(self.entries)
        return self.words

    @property
    def elements(self) -> List[GroupElement]:
        return [GroupElement(m, w) for m, w in zip(self.matrices(), self.get_words())]

    def key_set(self) -> set:
        return {tuple(row) for row in np.asarray(self.entries).tolist()}

    def restrict(self, T: float) -> "BallResult":
        """Sub-ball of radius ``T <= self.T``, order preserved."""
        if T > self.T * (1 + 1e-15):
            raise ValueError("can only restrict to a smaller radius")
        if self._norm_sorted:
            # every back-end emits norm-major canonical order, so the sub-ball is a prefix
            n = int(np.searchsorted(self.norms, T, side="right"))
            words = None if self.words is None else self.words[:n]
            return BallResult(self.spec, self.norm, T, self.entries[:n], self.norms[:n], words,
                              {"restricted_from": self.T})
        keep = self.norms <= T
        words = None if self.words is None else [w for w, k in zip(self.words, keep) if k]
        return BallResult(self.spec, self.norm, T, self.entries[keep], self.norms[keep], words,
                          {"restricted_from": self.T})

    @cached_property
    def _norm_sorted(self) -> bool:
        return bool(np.all(self.norms[1:] >= self.norms[:-1]))

    def apply(self, u) -> np.ndarray:
        """Images ``gamma u`` for the PSL representatives, shape ``(N, 2)``."""
        e = np.asarray(self.entries, dtype=float)
        ux, uy = float(u[0]), float(u[1])
        return np.stack([e[:, 0] * ux + e[:, 1] * uy, e[:, 2] * ux + e[:, 3] * uy], axis=1)


# --------------------------------------------------------------------------
# Modular group: exact integer scan
# --------------------------------------------------------------------------


def _ext_gcd(a: np.ndarray, c: np.ndarray):
    """Vectorized extended Euclid: ``g, x, y`` with ``a x + c y = g``."""
    old_r, r = a.astype(np.int64), c.astype(np.int64)
    old_s, s = np.ones_like(old_r), np.zeros_like(old_r)
    old_t, t = np.zeros_like(old_r), np.ones_like(old_r)
    while np.any(r != 0):
        nz = r != 0
        q = np.zeros_like(r)
        q[nz] = old_r[nz] // r[nz]
        old_r, r = np.where(nz, r, old_r), np.where(nz, old_r - q * r, r)
        old_s, s = np.where(nz, s, old_s), np.where(nz, old_s - q * s, s)
        old_t, t = np.where(nz, t, old_t), np.where(nz, old_t - q * t, t)
    sign = np.where(old_r < 0, -1, 1)
    return old_r * sign, old_s * sign, old_t * sign


def _l2_threshold(T: float) -> int:
    """Largest integer ``m`` with ``sqrt(m) <= T`` in floating point."""
    if T <= 0:
        return -1
    m = int(math.floor(T * T))
    while m >= 0 and math.sqrt(m) > T:
        m -= 1
    while math.sqrt(m + 1) <= T:
        m += 1
    return m


def _primitive_columns(n2max: int, a_lo: int = 0, a_hi: Optional[int] = None):
    """First columns ``(a, c)`` of PSL(2, Z) representatives with ``a^2 + c^2 <= n2max``.

    Representatives have ``a > 0``, plus the column ``(0, -1)`` (row ``(0, 1)``).
    """
    amax = int(math.isqrt(max(n2max, 0)))
    hi = amax if a_hi is None else min(a_hi, amax)
    cols_a, cols_c = [], []
    if a_lo <= 0 and n2max >= 1:
        cols_a.append(np.array([0]))
        cols_c.append(np.array([-1]))
    block = 256
    for a0 in range(max(a_lo, 1), hi + 1, block):
        a = np.arange(a0, min(a0 + block, hi + 1), dtype=np.int64)
        cmax = np.floor(np.sqrt(np.maximum(n2max - a * a, 0))).astype(np.int64)
        cnt = 2 * cmax + 1
        aa = np.repeat(a, cnt)
        starts = np.repeat(-cmax, cnt)
        offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        cc = starts + offs
        keep = aa * aa + cc * cc <= n2max
        cols_a.append(aa[keep])
        cols_c.append(cc[keep])
    if not cols_a:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(cols_a), np.concatenate(cols_c)


def _modular_l2_ball(m2: int, a_lo: int = 0, a_hi: Optional[int] = None, count_only: bool = False):
    """All PSL(2, Z) entries with ``a^2+b^2+c^2+d^2 <= m2`` (integer threshold)."""
    if m2 < 2:
        return 0 if count_only else np.zeros((0, 4), np.int64)
    # n^2 + 1/n^2 <= m2 forces n^2 <= m2 - 1 once n >= 1
    a, c = _primitive_columns(m2 - 1, a_lo, a_hi)
    g, x, y = _ext_gcd(a, c)
    ok = g == 1
    a, c, x, y = a[ok], c[ok], x[ok], y[ok]
    # a d0 - c b0 = 1  with  d0 = x, b0 = -y
    b0, d0 = -y, x
    n2 = a * a + c * c
    proj = (a * b0 + c * d0).astype(float) / n2
    h = np.sqrt(np.maximum(m2 - n2 - 1.0 / n2, 0.0)) / np.sqrt(n2)
    kmin = np.ceil(-proj - h).astype(np.int64) - 1
    kmax = np.floor(-proj + h).astype(np.int64) + 1

    def inside(k):
        b = b0 + k * a
        d = d0 + k * c
        return n2 + b * b + d * d <= m2

    if count_only:
        # integers in [kmin+2, kmax-2] lie inside beyond any rounding doubt; probe the four ends
        span = kmax - kmin
        total = np.maximum(span - 3, 0)
        long_ = span >= 3
        for k in (kmin, kmin + 1, kmax - 1, kmax):
            total = total + (inside(k) & long_)
        for j in range(3):
            total = total + ((~long_) & (kmin + j <= kmax) & inside(kmin + j))
        return int(total.sum())
    cnt = kmax - kmin + 1
    rep = np.repeat(np.arange(a.size), cnt)
    k = np.repeat(kmin, cnt) + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
    A, C, B0, D0 = a[rep], c[rep], b0[rep], d0[rep]
    B = B0 + k * A
    D = D0 + k * C
    keep = A * A + B * B + C * C + D * D <= m2
    out = np.stack([A[keep], B[keep], C[keep], D[keep]], axis=1)
    return out


def _canonical_order(entries: np.ndarray, norms: np.ndarray) -> np.ndarray:
    e = entries
    return np.lexsort((e[:, 3], e[:, 2], e[:, 1], e[:, 0], norms))


def modular_scan(T: float, norm: NormSpec = L2, jobs: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Integer entries and norms of the PSL(2, Z) ball, canonically ordered."""
    T_l2 = T / norm.c_low
    m2 = _l2_threshold(T_l2)
    if jobs > 1 and m2 > 10_000:
        from concurrent.futures import ProcessPoolExecutor

        amax = int(math.isqrt(m2))
        edges = np.linspace(0, amax + 1, jobs + 1).astype(int)
        parts = [(m2, int(edges[j]) if j else 0, int(edges[j + 1]) - 1) for j in range(jobs)]
        with ProcessPoolExecutor(jobs) as ex:
            chunks = list(ex.map(_scan_part, parts))
        ent = np.concatenate(chunks) if chunks else np.zeros((0, 4), np.int64)
    else:
        ent = _modular_l2_ball(m2)
    norms = norm.entrywise(ent.astype(float))
    keep = norms <= T
    ent, norms = ent[keep], norms[keep]
    order = _canonical_order(ent, norms)
    return ent[order], norms[order]


def _scan_part(args):
    m2, lo, hi = args
    return _modular_l2_ball(m2, lo, hi)


def modular_count_l2(T: float) -> int:
    """``|Gamma_T|`` in PSL(2, Z) for the l2 norm without storing elements."""
    return _modular_l2_ball(_l2_threshold(T), count_only=True)


def modular_counts_l2(T_grid: Sequence[float]) -> np.ndarray:
    """PSL counts at every radius of ``T_grid``, sharing one set of first columns."""
    ms = [_l2_threshold(float(t)) for t in T_grid]
    out = np.zeros(len(ms), dtype=np.int64)
    top = max(ms) if ms else 0
    if top < 2:
        return out
    a, c = _primitive_columns(top - 1)
    g, x, y = _ext_gcd(a, c)
    ok = g == 1
    a, c, x, y = a[ok], c[ok], x[ok], y[ok]
    b0, d0 = -y, x
    n2 = a * a + c * c
    proj = (a * b0 + c * d0).astype(float) / n2
    order = np.argsort(n2, kind="stable")
    a, c, b0, d0, n2, proj = a[order], c[order], b0[order], d0[order], n2[order], proj[order]
    for j, m2 in enumerate(ms):
        if m2 < 2:
            continue
        stop = int(np.searchsorted(n2, m2 - 1, side="right"))
        A, C, B0, D0, N2, P = a[:stop], c[:stop], b0[:stop], d0[:stop], n2[:stop], proj[:stop]
        h = np.sqrt(np.maximum(m2 - N2 - 1.0 / N2, 0.0)) / np.sqrt(N2)
        kmin = np.ceil(-P - h).astype(np.int64) - 1
        kmax = np.floor(-P + h).astype(np.int64) + 1

        def inside(k):
            b = B0 + k * A
            d = D0 + k * C
            return N2 + b * b + d * d <= m2

        span = kmax - kmin
        long_ = span >= 3
        total = np.maximum(span - 3, 0)
        for k in (kmin, kmin + 1, kmax - 1, kmax):
            total = total + (inside(k) & long_)
        for i in range(3):
            total = total + ((~long_) & (kmin + i <= kmax) & inside(kmin + i))
        out[j] = int(total.sum())
    return out


# --------------------------------------------------------------------------
# Modular group: Dirichlet tree word search
# --------------------------------------------------------------------------

# letters: S = +1 (an involution in PSL), T = +2, T^-1 = -2
_S = (0, -1, 1, 0)
_T = (1, 1, 0, 1)
_TI = (1, -1, 0, 1)


def _imul(m, n):
    return (m[0] * n[0] + m[1] * n[2], m[0] * n[1] + m[1] * n[3],
            m[2] * n[0] + m[3] * n[2], m[2] * n[1] + m[3] * n[3])


def _isign(m):
    for e in m:
        if e:
            return m if e > 0 else tuple(-x for x in m)
    return m


# face pairings of the Dirichlet domain at i, which is F ∪ S(F)
_FACES = [
    (_T, (2,)),
    (_TI, (-2,)),
    (_isign(_imul(_imul(_S, _T), _S)), (1, 2, 1)),
    (_isign(_imul(_imul(_S, _TI), _S)), (1, -2, 1)),
]
# the inverse of face k is face _FACE_INV[k]
_FACE_INV = [1, 0, 3, 2]


def _isq(m):
    return m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3]


def _parent_face(m) -> int:
    """Face ``k`` minimizing the norm of ``m g_k`` (ties to the lowest index)."""
    best, arg = None, -1
    for k, (g, _) in enumerate(_FACES):
        q = _isq(_imul(m, g))
        if best is None or q < best:
            best, arg = q, k
    return arg


def _reduce_modular(word: Sequence[int]) -> Word:
    out: List[int] = []
    for k in word:
        if out and (out[-1] == -k or (k == 1 and out[-1] == 1)):
            out.pop()
        else:
            out.append(k)
    return tuple(out)


def modular_word_search(T: float, norm: NormSpec = L2) -> Tuple[np.ndarray, np.ndarray, List[Word], dict]:
    """Certified tree search; returns entries, norms, words and search statistics."""
    thr2 = _l2_threshold(T / norm.c_low)
    roots = [((1, 0, 0, 1), ()), (_isign(_S), (1,))]
    found = []
    explored = pruned = 0
    stack = [r for r in roots if _isq(r[0]) <= thr2]
    pruned += len(roots) - len(stack)
    while stack:
        m, word = stack.pop()
        explored += 1
        found.append((m, word))
        for k, (g, gw) in enumerate(_FACES):
            child = _isign(_imul(m, g))
            if _isq(child) > thr2:
                pruned += 1
                continue
            if _isq(child) <= 2:  # the roots I and S have no parent
                continue
            # accept only if we are the canonical parent: the child's best face undoes g
            if _parent_face(child) != _FACE_INV[k]:
                continue
            if _isq(child) <= _isq(m):
                raise AssertionError("norm failed to increase along the Dirichlet tree")
            stack.append((child, _reduce_modular(word + gw)))
    if not found:
        return np.zeros((0, 4), np.int64), np.zeros(0), [], {"explored": explored, "pruned": pruned}
    ent = np.array([f[0] for f in found], dtype=np.int64)
    words = [f[1] for f in found]
    norms = norm.entrywise(ent.astype(float))
    keep = np.nonzero(norms <= T)[0]
    ent, norms = ent[keep], norms[keep]
    words = [words[j] for j in keep]
    order = _canonical_order(ent, norms)
    return ent[order], norms[order], [words[j] for j in order], {"explored": explored, "pruned": pruned}


def modular_word(m) -> Word:
    """Reduced word in ``S, T`` for an integer unimodular matrix, by descending the Dirichlet tree."""
    m = _isign(tuple(int(x) for x in m))
    tail: List[int] = []
    while _isq(m) > 2:
        k = _parent_face(m)
        g, gw = _FACES[k]
        m = _isign(_imul(m, g))
        # m_old = m_new * g^-1; record g^-1 on the right
        tail = list(_FACES[_FACE_INV[k]][1]) + tail
    if m == (1, 0, 0, 1):
        head: List[int] = []
    elif m == _isign(_S):
        head = [1]
    else:
        raise ValueError(f"not an element of SL(2, Z): {m}")
    return _reduce_modular(head + tail)


def modular_words(entries: np.ndarray) -> List[Word]:
    return [modular_word(row) for row in np.asarray(entries).tolist()]


# --------------------------------------------------------------------------
# Ping-pong groups: certified syllable search
# --------------------------------------------------------------------------


def _mul(m, n):
    return (m[0] * n[0] + m[1] * n[2], m[0] * n[1] + m[1] * n[3],
            m[2] * n[0] + m[3] * n[2], m[2] * n[1] + m[3] * n[3])


def _arc_data(arc):
    lo, hi = arc.lo, arc.lo + arc.length
    return (lo, arc.length, math.cos(2 * lo), math.sin(2 * lo), math.cos(2 * hi), math.sin(2 * hi))


def min_stretch_rows(M: np.ndarray, arc) -> np.ndarray:
    """``groups.min_stretch`` for every row ``(a, b, c, d)`` of ``M`` at once."""
    lo, length, clo, slo, chi, shi = _arc_data(arc)
    a, b, c, d = M[:, 0], M[:, 1], M[:, 2], M[:, 3]
    e11 = a * a + c * c
    e22 = b * b + d * d
    A = 0.5 * (e11 + e22)
    B = 0.5 * (e11 - e22)
    C = a * b + c * d
    q = np.minimum(A + B * clo + C * slo, A + B * chi + C * shi)
    # interior minimum of the sinusoid in 2p, written without cancellation
    o = (0.5 * np.arctan2(C, B) + 0.5 * math.pi - lo) % math.pi
    inside = (o <= length + 1e-12) | (o >= math.pi - 1e-12)
    den = A + np.hypot(B, C)
    qi = np.divide((a * d - b * c) ** 2, den, out=np.zeros_like(den), where=den > 0)
    q = np.where(inside, np.minimum(q, qi), q)
    return np.sqrt(np.maximum(q, 0.0))


def _mul_rows(M: np.ndarray, g) -> np.ndarray:
    a, b, c, d = g
    return np.stack([M[:, 0] * a + M[:, 1] * c, M[:, 0] * b + M[:, 1] * d,
                     M[:, 2] * a + M[:, 3] * c, M[:, 2] * b + M[:, 3] * d], axis=1)


class _StretchTable:
    """Cache of syllable stretches ``s(i, n)`` and powers ``g_i^n``."""

    def __init__(self, spec: GroupSpec):
        self.spec = spec
        self._s: Dict[Tuple[int, int], float] = {}

    def s(self, i: int, n: int) -> float:
        key = (i, n)
        if key not in self._s:
            self._s[key] = syllable_stretch(self.spec, i, n)
        return self._s[key]


def _ngen(spec: GroupSpec) -> int:
    return len(spec.generators)


def _first_syllables(spec: GroupSpec, thr: float, table: _StretchTable):
    out = []
    for i in range(1, _ngen(spec) + 1):
        for sign in (1, -1):
            n = 1
            while table.s(i, sign * n) <= thr:
                out.append((i, sign * n))
                n += 1
    return out


def pingpong_search(spec: GroupSpec, norm: NormSpec, T: float,
                    first: Optional[Sequence[Tuple[int, int]]] = None):
    """Reduced words ``w`` with ``|g_w| <= T``, restricted to first syllables in ``first``.

    Subtree bounds: if ``w`` ends in a generator other than ``i`` then every
    element ``w g_i^n r`` (``r`` empty or starting with another generator)
    satisfies ``|.|_op >= L_w(i, sign n) * s(i, n)`` where ``L_w`` is the least
    stretch of ``w`` on the attracting domain of ``g_i^{sign n}``.  This bound
    grows with ``n`` and ends the loop over powers.  Independently, every
    element ``w r`` with ``r`` not starting with the last generator of ``w``
    has ``|.|_op >= min L_w``, which discards a node together with its subtree.

    Returns ``(entries, norms, words, stats)`` with the identity included when
    ``first`` is None.
    """
    if spec.growth_certificate is None or spec.ping_pong_domains is None:
        raise ValueError("ping-pong search needs a growth certificate and domains")
    thr = T / norm.c_low
    table = _StretchTable(spec)
    ng = _ngen(spec)
    keys = [(i, sign) for i in range(1, ng + 1) for sign in (-1, 1)]
    arcs = [spec.ping_pong_domains[k] for k in keys]
    letters = {k: spec.letter(k).entries() for i in range(1, ng + 1) for k in (i, -i)}
    explored = 0
    cuts = 0
    min_cut_ratio = math.inf

    # the search runs level by level on arrays; each node records its parent
    # (an index into the found nodes), its last letter and that letter's power
    ident = (1.0, 0.0, 0.0, 1.0)
    prefixes: List[Word] = []
    if first is None:
        M = np.array([ident])
        last = np.zeros(1, dtype=np.int64)
        parent = np.full(1, -1, dtype=np.int64)
        letter = np.zeros(1, dtype=np.int64)
        power = np.zeros(1, dtype=np.int64)
        prefixes.append(())
    else:
        rows = []
        for (i, n) in first:
            m = ident
            for _ in range(abs(n)):
                m = _mul(m, letters[i if n > 0 else -i])
            rows.append(m)
            prefixes.append((i if n > 0 else -i,) * abs(n))
        M = np.array(rows, dtype=float).reshape(-1, 4)
        last = np.array([i for i, _ in first], dtype=np.int64)
        parent = np.arange(-1, -len(first) - 1, -1, dtype=np.int64)
        letter = np.zeros(len(first), dtype=np.int64)
        power = np.zeros(len(first), dtype=np.int64)
    is_root = True

    found_m, found_parent, found_letter, found_power = [], [], [], []
    n_found = 0
    while len(M):
        explored += len(M)
        if is_root and first is None:
            L = np.ones((len(M), len(keys)))
        else:
            L = np.stack([min_stretch_rows(M, arc) for arc in arcs], axis=1)
        excluded = last[:, None] == np.array([i for i, _ in keys])[None, :]
        L = np.where(excluded, np.inf, L)
        # every element of a node's subtree, the node included, moves some vector
        # of the admissible domains by at least the least admissible stretch
        lmin = L.min(axis=1)
        cut = np.isfinite(lmin) & (lmin > thr)
        if np.any(cut):
            cuts += int(cut.sum())
            min_cut_ratio = min(min_cut_ratio, float(lmin[cut].min()) / thr)
        keep = ~cut
        M, L, last = M[keep], L[keep], last[keep]
        ids = np.arange(n_found, n_found + len(M))
        n_found += len(M)
        found_m.append(M)
        found_parent.append(parent[keep])
        found_letter.append(letter[keep])
        found_power.append(power[keep])
        nxt_m, nxt_last, nxt_parent, nxt_letter, nxt_power = [], [], [], [], []
        for j, (i, sign) in enumerate(keys):
            sel = last != i
            Lj, child, pid = L[sel, j], M[sel], ids[sel]
            g = letters[i * sign]
            n = 1
            while len(Lj):
                bound = Lj * table.s(i, sign * n)
                over = bound > thr
                if np.any(over):
                    cuts += int(over.sum())
                    min_cut_ratio = min(min_cut_ratio, float(bound[over].min()) / thr)
                    ok = ~over
                    Lj, child, pid = Lj[ok], child[ok], pid[ok]
                if not len(Lj):
                    break
                child = _mul_rows(child, g)
                nxt_m.append(child)
                nxt_last.append(np.full(len(Lj), i, dtype=np.int64))
                nxt_parent.append(pid)
                nxt_letter.append(np.full(len(Lj), i * sign, dtype=np.int64))
                nxt_power.append(np.full(len(Lj), n, dtype=np.int64))
                n += 1
        if not nxt_m:
            break
        M = np.concatenate(nxt_m)
        last = np.concatenate(nxt_last)
        parent = np.concatenate(nxt_parent)
        letter = np.concatenate(nxt_letter)
        power = np.concatenate(nxt_power)
        is_root = False

    # soundness audit: every cut subtree had a certified bound beyond the threshold
    assert min_cut_ratio > 1.0, "pruned a subtree whose bound does not exceed the radius"
    ent = np.concatenate(found_m) if found_m else np.zeros((0, 4))
    par = np.concatenate(found_parent).tolist() if found_m else []
    let = np.concatenate(found_letter).tolist() if found_m else []
    pw = np.concatenate(found_power).tolist() if found_m else []
    ent = _normalize_rows(ent)
    norms = norm.entrywise(ent)
    keep = np.nonzero(norms <= T)[0]
    # parents always precede their children, so words build up in one pass
    all_words: List[Word] = []
    for p_, k_, n_ in zip(par, let, pw):
        all_words.append(prefixes[-p_ - 1] if p_ < 0 else all_words[p_] + (k_,) * n_)
    ent, norms = ent[keep], norms[keep]
    words = [all_words[j] for j in keep]
    stats = {"explored": explored, "pruned": cuts, "min_cut_ratio": min_cut_ratio}
    return ent, norms, words, stats


def _word_order(norms: np.ndarray, words: List[Word]) -> List[int]:
    return sorted(range(len(words)), key=lambda j: (norms[j], len(words[j]), words[j]))


def _pingpong_part(args):
    spec, norm, T, first = args
    return pingpong_search(spec, norm, T, first)


def pingpong_ball(spec: GroupSpec, norm: NormSpec, T: float, jobs: int = 1, partition: bool = False):
    """Full ball, optionally searched as a disjoint union of first-syllable subtrees."""
    if not partition and jobs <= 1:
        ent, norms, words, stats = pingpong_search(spec, norm, T)
    else:
        table = _StretchTable(spec)
        firsts = _first_syllables(spec, T / norm.c_low, table)
        tasks = [(spec, norm, T, [f]) for f in firsts]
        if jobs > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(jobs) as ex:
                parts = list(ex.map(_pingpong_part, tasks))
        else:
            parts = [_pingpong_part(t) for t in tasks]
        ident = np.array([[1.0, 0.0, 0.0, 1.0]])
        ent_l = [ident] + [p[0] for p in parts]
        norms_l = [norm.entrywise(ident)] + [p[1] for p in parts]
        words = [()] + [w for p in parts for w in p[2]]
        ent = np.concatenate(ent_l)
        norms = np.concatenate(norms_l)
        keep = np.nonzero(norms <= T)[0]
        ent, norms = ent[keep], norms[keep]
        words = [words[j] for j in keep]
        stats = {
            "explored": sum(p[3]["explored"] for p in parts) + 1,
            "pruned": sum(p[3]["pruned"] for p in parts),
            "min_cut_ratio": min([p[3]["min_cut_ratio"] for p in parts] + [math.inf]),
            "partitions": len(parts),
        }
    order = _word_order(norms, words)
    return ent[order], norms[order], [words[j] for j in order], stats


# --------------------------------------------------------------------------
# Public API
# --------------------------------------------------------------------------

_MEMO: Dict[Tuple[str, str], BallResult] = {}


def _cache_dir() -> Optional[Path]:
    d = os.environ.get("ORBITS_CACHE_DIR")
    return Path(d) if d else None


def cache_path(spec: GroupSpec, norm: NormSpec, T: float, directory: Optional[Path] = None) -> Optional[Path]:
    d = directory or _cache_dir()
    if d is None:
        return None
    safe = spec.label.replace(":", "_").replace(",", "_")
    return Path(d) / f"ball_{safe}_{norm.name}_{T:.17g}.csv"


def enumerate_ball(spec: GroupSpec, norm: NormSpec, T: float, jobs: int = 1,
                   backend: Optional[str] = None, use_cache: bool = True) -> BallResult:
    """``{gamma in Gamma (PSL) : |gamma| <= T}``, exactly.

    ``backend`` is ``scan`` or ``words`` for the modular group (``scan`` by
    default) and ignored for ping-pong groups.  Results are memoized per
    (group, norm): a later call with a smaller radius restricts the largest
    ball computed so far, and an ``ORBITS_CACHE_DIR`` file is read or written
    when the environment variable is set.
    """
    if not T > 0:
        raise ValueError("radius must be positive")
    t0 = time.perf_counter()
    memo_key = (spec.label, norm.name)
    if use_cache and backend is None and spec.kind != "custom":
        hit = _MEMO.get(memo_key)
        if hit is not None and hit.T >= T:
            return hit.restrict(T) if hit.T > T else hit
        path = cache_path(spec, norm, T)
        if path is not None and path.exists():
            res = load_ball_csv(path, spec, norm, T)
            _MEMO[memo_key] = res
            return res

    if spec.kind == "modular":
        if backend in (None, "scan"):
            ent, norms = modular_scan(T, norm, jobs)
            res = BallResult(spec, norm, T, ent, norms, None, {"backend": "scan"})
        elif backend == "words":
            ent, norms, words, st = modular_word_search(T, norm)
            res = BallResult(spec, norm, T, ent, norms, words, dict(st, backend="words"))
        else:
            raise ValueError(f"unknown backend {backend!r}")
    else:
        if not spec.certified:
            raise ValueError("group has no growth certificate; cannot enumerate exactly")
        ent, norms, words, st = pingpong_ball(spec, norm, T, jobs)
        res = BallResult(spec, norm, T, ent, norms, words, dict(st, backend="pingpong"))
    res.stats["wall_time"] = time.perf_counter() - t0

    if use_cache and backend is None and spec.kind != "custom":
        prev = _MEMO.get(memo_key)
        if prev is None or prev.T < T:
            _MEMO[memo_key] = res
        path = cache_path(spec, norm, T)
        if path is not None and not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            write_ball_csv(res, path)
    return res


def clear_memo() -> None:
    _MEMO.clear()


def write_ball_csv(res: BallResult, path) -> None:
    """CSV ``a,b,c,d,word,norm`` to a path or an open text stream."""
    if hasattr(path, "write"):
        _write_ball_rows(res, path)
        return
    with open(path, "w") as fh:
        _write_ball_rows(res, fh)


def _write_ball_rows(res: BallResult, fh) -> None:
    words = res.get_words()
    fh.write("a,b,c,d,word,norm\n")
    for row, w, nv in zip(np.asarray(res.entries).tolist(), words, res.norms.tolist()):
        a, b, c, d = (f"{float(x):.17g}" for x in row)
        fh.write(f"{a},{b},{c},{d},{format_word(w)},{nv:.17g}\n")


def load_ball_csv(path, spec: GroupSpec, norm: NormSpec, T: float) -> BallResult:
    rows, words, norms = [], [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "a,b,c,d,word,norm":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            a, b, c, d, w, nv = line.rstrip("\n").split(",")
            rows.append((float(a), float(b), float(c), float(d)))
            words.append(parse_word(w))
            norms.append(float(nv))
    ent = np.array(rows, dtype=float).reshape(-1, 4)
    if spec.kind == "modular":
        ent = ent.astype(np.int64)
    return BallResult(spec, norm, T, ent, np.array(norms), words, {"backend": "cache"})


def count_function(spec: GroupSpec, norm: NormSpec, T_grid: Sequence[float], jobs: int = 1):
    """``[(T, N(T))]`` with ``N`` the SL-level count, from one ball at the largest radius."""
    T_grid = [float(t) for t in T_grid]
    if any(b < a for a, b in zip(T_grid, T_grid[1:])):
        raise ValueError("T grid must be ascending")
    if not T_grid:
        return []
    if spec.kind == "modular" and norm.name == "l2" and T_grid[-1] > 1200:
        counts = modular_counts_l2(T_grid)
        return [(t, spec.sl_factor * int(n)) for t, n in zip(T_grid, counts)]
    ball = enumerate_ball(spec, norm, T_grid[-1], jobs)
    sorted_norms = np.sort(ball.norms)
    counts = np.searchsorted(sorted_norms, T_grid, side="right")
    return [(t, spec.sl_factor * int(n)) for t, n in zip(T_grid, counts)]


GEODESIC_SLACK = 1e-12


def geodesic_ball(spec: GroupSpec, t: float, jobs: int = 1) -> BallResult:
    """``{gamma : d(i, gamma i) <= t}`` via ``|gamma|_2^2 = 2 cosh d(i, gamma i)``.

    The radius carries a relative slack of 1e-12 so that elements sitting
    exactly on the sphere are not lost to rounding in ``cosh``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    T = math.sqrt(2 * math.cosh(t)) * (1 + GEODESIC_SLACK)
    return enumerate_ball(spec, L2, T, jobs)


def orbit_cloud(spec: GroupSpec, norm: NormSpec, T: float, u, alpha: float,
                ball: Optional[BallResult] = None) -> EmpiricalMeasure:
    """``{gamma u / T^alpha : gamma in Gamma_T}`` at SL level, unit weights."""
    ux, uy = float(u[0]), float(u[1])
    if ux == 0 and uy == 0:
        raise ValueError("u must be nonzero")
    if ball is None:
        ball = enumerate_ball(spec, norm, T)
    elif ball.T > T:
        ball = ball.restrict(T)
    pts = ball.apply((ux, uy)) / T ** alpha
    if spec.sl_factor == 2:
        pts = np.concatenate([pts, -pts])
    return EmpiricalMeasure.from_xy(pts[:, 0], pts[:, 1])
