import itertools
import math

import numpy as np
import pytest

from orbits.groups import (
    Arc,
    GroupElement,
    GroupSpec,
    angle_to_boundary,
    boundary_to_angle,
    build_modular,
    build_parabolic_free,
    build_schottky,
    cyclic_spec,
    format_word,
    min_stretch,
    op_norm_of_word,
    parse_group,
    parse_word,
    syllable_count,
    verify_ping_pong,
)
from orbits.moebius import INF, L2, Mat2, a_t, norm_eval


def _int_pow(m, n):
    out = np.eye(2, dtype=np.int64)
    for _ in range(n):
        out = out @ m
    return out


def test_modular_relations_exact():
    spec = build_modular()
    S = np.array([[0, -1], [1, 0]], dtype=np.int64)
    T = np.array([[1, 1], [0, 1]], dtype=np.int64)
    I = np.eye(2, dtype=np.int64)
    assert spec.known_delta == 1.0
    assert spec.contains_minus_I and spec.sl_factor == 2
    assert (S @ S == -I).all()
    assert (_int_pow(S @ T, 3) == -I).all()
    assert (_int_pow(S, 4) == I).all()
    assert (_int_pow(S @ T, 6) == I).all()
    assert spec.evaluate((1, 1)).allclose(Mat2(-1, 0, 0, -1))


def _reduced_words(ngen, max_syllables, powers=(1, 2)):
    """Reduced words of a free group as syllable sequences ``g_i^{±n}``."""
    out = []

    def rec(prefix, last, depth):
        if prefix:
            out.append(prefix)
        if depth == max_syllables:
            return
        for i in range(1, ngen + 1):
            if i == last:
                continue
            for sign in (1, -1):
                for n in powers:
                    rec(prefix + (sign * i,) * n, i, depth + 1)

    rec((), 0, 0)
    return out


@pytest.mark.parametrize("spec", [build_schottky(4, 4, math.pi / 2), build_parabolic_free(3)],
                         ids=["schottky", "parabolic"])
def test_no_short_reduced_word_is_trivial(spec):
    for w in _reduced_words(2, 6):
        m = spec.evaluate(w)
        assert not (m.allclose(Mat2(1, 0, 0, 1), 1e-6) or m.allclose(Mat2(-1, 0, 0, -1), 1e-6)), w


def test_schottky_valid_and_invalid():
    spec = build_schottky(4, 4, math.pi / 2)
    assert verify_ping_pong(spec)
    assert spec.growth_certificate[1] > 1
    assert spec.sl_factor == 2 and not spec.contains_minus_I
    with pytest.raises(ValueError):
        build_schottky(0.1, 0.1, math.pi / 2)


def test_schottky_inverse_reduces_to_identity():
    spec = build_schottky(4, 4, math.pi / 2)
    assert spec.reduce((1, -1)) == ()
    assert spec.evaluate((1, -1)).allclose(Mat2(1, 0, 0, 1), 1e-12)


def test_parabolic_free_group():
    spec = build_parabolic_free(3)
    assert verify_ping_pong(spec)
    for n in (1, 2, 5, 10, -7):
        # A^n = ((1, mu n), (0, 1)), l2 norm sqrt(2 + mu^2 n^2)
        w = (1,) * n if n > 0 else (-1,) * (-n)
        assert norm_eval(L2, spec.evaluate(w)) == pytest.approx(math.sqrt(2 + 9 * n * n), rel=1e-12)
    with pytest.raises(ValueError):
        build_parabolic_free(2)


def test_identical_domains_fail_ping_pong():
    spec = build_schottky(4, 4, math.pi / 2)
    doms = dict(spec.ping_pong_domains)
    doms[(2, 1)] = doms[(1, 1)]
    doms[(2, -1)] = doms[(1, -1)]
    bad = GroupSpec("custom", spec.generators, False, ping_pong_domains=doms)
    assert not verify_ping_pong(bad)


@pytest.mark.parametrize("spec", [build_schottky(4, 4, math.pi / 2), build_schottky(2.5, 2.5, math.pi / 2),
                                  build_parabolic_free(3)], ids=["s4", "s25", "p3"])
def test_growth_certificate_holds_on_words(spec):
    c, lam = spec.growth_certificate
    worst = min(op_norm_of_word(spec, w) / lam ** syllable_count(w) for w in _reduced_words(2, 5, (1, 2, 3)))
    assert worst >= c * (1 - 1e-12)


def test_single_generator_certificate_is_exact():
    t = 1.7
    c, lam = cyclic_spec(a_t(t)).growth_certificate
    assert lam == pytest.approx(math.exp(t / 2), rel=1e-12)
    assert c == pytest.approx(1.0)


def test_group_elements_rebuild_from_words():
    spec = build_schottky(2.5, 2.5, math.pi / 2)
    rng = np.random.default_rng(0)
    for _ in range(100):
        w = spec.reduce(tuple(int(k) for k in rng.choice([-2, -1, 1, 2], size=12)))
        el = GroupElement(spec.evaluate(w), w)
        assert spec.is_reduced(w)
        assert el.check(spec)


def test_word_format_roundtrip():
    for w in [(), (1,), (1, -2, 1), (-1, -1, 2)]:
        assert parse_word(format_word(w)) == w
    with pytest.raises(ValueError):
        parse_word("+1x2")


def test_parse_group():
    assert parse_group("modular").kind == "modular"
    assert parse_group("schottky:4,4,1.5707963267948966").params == (4.0, 4.0, math.pi / 2)
    assert parse_group("parabolic:3").params == (3.0,)
    for bad in ["hyperbolic", "schottky:1,2", "parabolic:2"]:
        with pytest.raises(ValueError):
            parse_group(bad)


def test_boundary_angle_roundtrip():
    assert boundary_to_angle(INF) == 0.0
    assert angle_to_boundary(0.0) == INF
    for x in [-3.0, -0.2, 0.0, 0.5, 7.0]:
        assert angle_to_boundary(boundary_to_angle(x)) == pytest.approx(x, abs=1e-12)


def test_arc_between_contains_expected_points():
    arc = Arc.between(1.0, 3.0)
    assert arc.contains(boundary_to_angle(2.0))
    assert not arc.contains(boundary_to_angle(0.0))
    through_inf = Arc.between(5.0, -5.0)
    assert through_inf.contains(boundary_to_angle(INF))
    assert not through_inf.contains(boundary_to_angle(0.0))


def test_min_stretch_against_dense_sampling():
    rng = np.random.default_rng(7)
    for _ in range(300):
        m = Mat2(*rng.normal(size=4))
        arc = Arc(rng.uniform(0, math.pi), rng.uniform(0, 3.0))
        p = arc.lo + np.linspace(0, arc.length, 20001)
        v = m.as_array() @ np.vstack([np.cos(p), np.sin(p)])
        sampled = np.sqrt((v ** 2).sum(0)).min()
        got = min_stretch(m, arc)
        # sampled minimum overshoots the true one by at most ||M|| * spacing
        slack = np.linalg.norm(m.as_array(), 2) * arc.length / 20000
        assert got <= sampled * (1 + 1e-9)
        assert got >= sampled - slack


def test_combinatorics_of_words():
    assert syllable_count(()) == 0
    assert syllable_count((1, 1, -2, 1)) == 3
    assert list(itertools.islice(_reduced_words(2, 1, (1,)), 10)) == [(1,), (-1,), (2,), (-2,)]
