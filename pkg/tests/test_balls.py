import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbits import balls
from orbits.balls import (
    cache_path,
    clear_memo,
    count_function,
    enumerate_ball,
    geodesic_ball,
    load_ball_csv,
    min_stretch_rows,
    modular_counts_l2,
    orbit_cloud,
    pingpong_ball,
    write_ball_csv,
)
from orbits.groups import Arc, build_modular, build_parabolic_free, build_schottky, min_stretch
from orbits.moebius import L1, L2, LINF, Mat2, norm_eval
from orbits.patterson import estimate_delta, log_grid


@pytest.fixture(autouse=True)
def _fresh_memo(monkeypatch):
    monkeypatch.delenv("ORBITS_CACHE_DIR", raising=False)
    clear_memo()
    yield
    clear_memo()


def _psl_key(m):
    m = tuple(m)
    first = next(x for x in m if x != 0)
    return m if first > 0 else tuple(-x for x in m)


def _brute_modular(T, norm=L2):
    """All integer (a, b, c, d) with ad - bc = 1 and |.| <= T, one per sign."""
    k = int(math.floor(T / norm.c_low)) + 1
    r = range(-k, k + 1)
    out = set()
    for a, b, c in itertools.product(r, r, r):
        # solve for d from the determinant when a != 0, else scan d
        ds = [(1 + b * c) // a] if a != 0 and (1 + b * c) % a == 0 else (r if a == 0 else [])
        for d in ds:
            if a * d - b * c == 1 and norm_eval(norm, Mat2(a, b, c, d)) <= T:
                out.add(_psl_key((a, b, c, d)))
    return out


@pytest.mark.parametrize("norm", [L2, L1, LINF], ids=lambda n: n.name)
def test_modular_ball_matches_brute_force(norm):
    T = 10.0
    ball = enumerate_ball(build_modular(), norm, T)
    assert ball.key_set() == _brute_modular(T, norm)
    assert len(ball.key_set()) == ball.psl_count


def test_modular_ball_pinned_sizes():
    spec = build_modular()
    assert enumerate_ball(spec, L2, 10.0).psl_count == 290
    assert enumerate_ball(spec, L2, 1.0).psl_count == 0
    # only I and S have |.|_2 = sqrt 2; with -I and -S that is four SL elements
    ball = enumerate_ball(spec, L2, math.sqrt(2) * (1 + 1e-12))
    assert ball.sl_count == 4


def test_modular_backends_agree():
    spec = build_modular()
    scan = enumerate_ball(spec, L2, 25.0, backend="scan")
    words = enumerate_ball(spec, L2, 25.0, backend="words")
    assert scan.key_set() == words.key_set()
    for el in words.elements[:200]:
        assert el.check(spec)


def test_modular_multi_threshold_counts():
    spec = build_modular()
    T = [3.0, 10.0, 40.0, 90.0]
    direct = [enumerate_ball(spec, L2, t).psl_count for t in T]
    assert list(modular_counts_l2(T)) == direct


def _reduced_letter_words(ngen, length):
    letters = [s * i for i in range(1, ngen + 1) for s in (1, -1)]
    words = [(x,) for x in letters]
    for _ in range(length - 1):
        words = [w + (x,) for w in words for x in letters if x != -w[-1]]
    return words


@pytest.mark.parametrize("spec,T", [(build_schottky(2.5, 2.5, math.pi / 2), 60.0),
                                    (build_schottky(4, 4, 1.0), 200.0),
                                    (build_parabolic_free(3), 15.0)], ids=["s25", "s4", "p3"])
def test_pingpong_ball_matches_word_oracle(spec, T):
    L = 9
    brute = {(): spec.evaluate(())}
    longest_min = math.inf
    for n in range(1, L + 1):
        vals = []
        for w in _reduced_letter_words(2, n):
            m = spec.evaluate(w)
            v = norm_eval(L2, m)
            vals.append(v)
            if v <= T:
                brute[w] = m
        if n == L:
            longest_min = min(vals)
    ball = enumerate_ball(spec, L2, T)
    assert set(ball.get_words()) == set(brute)
    # the oracle only proves anything if no word at the cut-off length fits
    assert longest_min > T
    assert max(len(w) for w in ball.get_words()) < L


def test_pingpong_audit_stats():
    ball = enumerate_ball(build_schottky(2.5, 2.5, math.pi / 2), L2, 1000.0)
    assert ball.stats["pruned"] > 0
    assert ball.stats["min_cut_ratio"] > 1


def test_min_stretch_rows_matches_scalar():
    rng = np.random.default_rng(11)
    M = rng.normal(size=(500, 4))
    for _ in range(20):
        arc = Arc(rng.uniform(0, math.pi), rng.uniform(0, math.pi))
        got = min_stretch_rows(M, arc)
        want = [min_stretch(Mat2(*row), arc) for row in M]
        assert np.allclose(got, want, rtol=1e-9, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0, 3.2), st.floats(0.01, 3.1))
def test_min_stretch_rows_is_lower_bound(row, lo, length):
    arc = Arc(lo, length)
    p = arc.lo + np.linspace(0, arc.length, 4001)
    a, b, c, d = row
    sampled = np.hypot(a * np.cos(p) + b * np.sin(p), c * np.cos(p) + d * np.sin(p)).min()
    got = float(min_stretch_rows(np.array([row]), arc)[0])
    slack = np.linalg.norm(np.reshape(row, (2, 2)), 2) * length / 4000
    assert got <= sampled + 1e-12
    assert got >= sampled - slack - 1e-12


@pytest.mark.parametrize("spec", [build_modular(), build_schottky(2.5, 2.5, math.pi / 2)],
                         ids=["modular", "schottky"])
def test_balls_are_nested(spec):
    small = enumerate_ball(spec, L2, 40.0, use_cache=False)
    big = enumerate_ball(spec, L2, 160.0, use_cache=False)
    assert small.key_set() <= big.key_set()
    assert big.restrict(40.0).key_set() == small.key_set()


def test_partitioned_search_matches_single():
    spec = build_schottky(2.5, 2.5, math.pi / 2)
    whole = pingpong_ball(spec, L2, 500.0)
    parts = pingpong_ball(spec, L2, 500.0, partition=True)
    assert whole[2] == parts[2]
    assert np.array_equal(whole[0], parts[0])
    assert parts[3]["partitions"] > 1


def test_enumeration_is_deterministic():
    spec = build_schottky(2.5, 2.5, math.pi / 2)
    a = enumerate_ball(spec, L2, 300.0, use_cache=False)
    b = enumerate_ball(spec, L2, 300.0, use_cache=False)
    assert a.get_words() == b.get_words()
    assert np.array_equal(a.entries, b.entries)


def _csv_text(res):
    buf = io.StringIO()
    write_ball_csv(res, buf)
    return buf.getvalue()


@pytest.mark.parametrize("spec", [build_modular(), build_schottky(2.5, 2.5, math.pi / 2)],
                         ids=["modular", "schottky"])
def test_cache_roundtrip(spec, tmp_path, monkeypatch):
    monkeypatch.setenv("ORBITS_CACHE_DIR", str(tmp_path))
    first = enumerate_ball(spec, L2, 80.0)
    path = cache_path(spec, L2, 80.0)
    assert path.exists()
    clear_memo()
    again = enumerate_ball(spec, L2, 80.0)
    assert again.stats["backend"] == "cache"
    assert again.key_set() == first.key_set()
    assert again.get_words() == first.get_words()
    assert _csv_text(again) == path.read_text()
    loaded = load_ball_csv(path, spec, L2, 80.0)
    assert np.array_equal(loaded.norms, first.norms)


def test_csv_bytes_stable_across_runs():
    spec = build_modular()
    a = _csv_text(enumerate_ball(spec, L2, 30.0, use_cache=False))
    b = _csv_text(enumerate_ball(spec, L2, 30.0, use_cache=False))
    assert a == b
    assert a.splitlines()[0] == "a,b,c,d,word,norm"


def test_load_rejects_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        load_ball_csv(p, build_modular(), L2, 1.0)


def test_enumerate_rejects_bad_input():
    with pytest.raises(ValueError):
        enumerate_ball(build_modular(), L2, 0.0)
    with pytest.raises(ValueError):
        enumerate_ball(build_modular(), L2, 5.0, backend="nope")


def test_geodesic_ball():
    spec = build_modular()
    # I and S both fix i
    assert geodesic_ball(spec, 0.0).psl_count == 2
    assert geodesic_ball(build_schottky(2.5, 2.5, math.pi / 2), 0.0).psl_count == 1
    # T moves i to 1 + i at distance acosh(3/2); the ball must be closed
    near = geodesic_ball(spec, math.acosh(1.5))
    assert (1, 1, 0, 1) in near.key_set()
    with pytest.raises(ValueError):
        geodesic_ball(spec, -1.0)


def test_geodesic_ball_is_distance_ball():
    spec = build_modular()
    t = 5.0
    ball = geodesic_ball(spec, t)
    d = np.arccosh(ball.norms.astype(float) ** 2 / 2)
    assert np.all(d <= t + 1e-9)
    bigger = enumerate_ball(spec, L2, 2 * math.sqrt(2 * math.cosh(t)))
    d_all = np.arccosh(bigger.norms.astype(float) ** 2 / 2)
    assert ball.psl_count == int(np.sum(d_all <= t + 1e-9))


@pytest.mark.parametrize("spec", [build_modular(), build_schottky(2.5, 2.5, math.pi / 2)],
                         ids=["modular", "schottky"])
def test_orbit_cloud(spec):
    u, T, alpha = (1.0, math.sqrt(2)), 50.0, 0.5
    ball = enumerate_ball(spec, L2, T)
    cloud = orbit_cloud(spec, L2, T, u, alpha)
    assert len(cloud) == ball.sl_count
    # |gamma u| <= |gamma|_op |u| <= |gamma|_2 |u|
    assert cloud.r.max() <= T * math.hypot(*u) / T ** alpha * (1 + 1e-12)
    with pytest.raises(ValueError):
        orbit_cloud(spec, L2, T, (0.0, 0.0), alpha)


def test_orbit_cloud_empty():
    assert len(orbit_cloud(build_modular(), L2, 1.0, (1.0, 0.0), 1.0)) == 0


@pytest.mark.parametrize("spec", [build_modular(), build_schottky(2.5, 2.5, math.pi / 2)],
                         ids=["modular", "schottky"])
def test_counts_monotone(spec):
    grid = log_grid(2.0, 500.0, 25)
    counts = [n for _, n in count_function(spec, L2, grid)]
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == enumerate_ball(spec, L2, 500.0).sl_count
    with pytest.raises(ValueError):
        count_function(spec, L2, [5.0, 2.0])


def test_modular_large_count_route_matches_ball():
    spec = build_modular()
    grid = [100.0, 700.0, 1300.0]
    fast = dict(count_function(spec, L2, grid))
    assert fast[1300.0] == enumerate_ball(spec, L2, 1300.0).sl_count
    assert fast[700.0] == enumerate_ball(spec, L2, 700.0).sl_count


def test_schottky_count_slope_matches_two_delta():
    spec = build_schottky(4, 4, math.pi / 2)
    d = estimate_delta(spec, "geodesic_count", T_max=1e5)
    grid = log_grid(1e4, 1e5, 20)
    N = np.array([n for _, n in count_function(spec, L2, grid)], dtype=float)
    slope = np.polyfit(np.log(grid), np.log(N), 1)[0]
    assert slope == pytest.approx(2 * d.value, abs=0.03)


def test_memo_restricts_larger_ball():
    spec = build_modular()
    big = enumerate_ball(spec, L2, 60.0)
    small = enumerate_ball(spec, L2, 20.0)
    assert small.stats.get("restricted_from") == big.T
    assert balls._MEMO[(spec.label, "l2")] is big
