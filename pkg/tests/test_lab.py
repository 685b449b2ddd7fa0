import json
import math

import numpy as np
import pytest

from orbits.balls import clear_memo, enumerate_ball
from orbits.groups import build_modular, build_schottky
from orbits.lab import (
    FAIL,
    INFO,
    PASS,
    ExperimentReport,
    band_rhs,
    cauchy_spread,
    draw_cone_vector,
    in_cone,
    large_scale_experiment,
    lattice_integral,
    lattice_limit_experiment,
    log_cesaro_series,
    log_cesaro_trapezoid,
    nested_reuse_check,
    no_limit_probe,
    parse_grid,
    ratio_band_experiment,
    sandwich_suite,
    top_decade,
    xi_law,
)
from orbits.moebius import L2, lp_norm
from orbits.patterson import log_grid
from orbits.plane import BumpFunction, orbit_sum

U = (1.0, math.sqrt(2))


def test_parse_grid():
    g = parse_grid("10:1000:3")
    assert g.tolist() == pytest.approx([10.0, 100.0, 1000.0], rel=1e-14)
    for bad in ["10:1000", "a:b:c", "10:1000:x"]:
        with pytest.raises(ValueError):
            parse_grid(bad)


def test_log_grid_endpoints_exact():
    g = log_grid(10.0, 1e4, 31)
    assert g[0] == 10.0 and g[-1] == 1e4
    assert np.all(np.diff(g) > 0)


def test_cauchy_spread_and_top_decade():
    assert cauchy_spread([2.0, 2.0]) == 0.0
    assert cauchy_spread([1.0, 1.5]) == pytest.approx(0.5)
    assert cauchy_spread([]) == math.inf
    assert cauchy_spread([0.0, 1.0]) == math.inf
    assert top_decade(np.array([1.0, 5.0, 10.0, 50.0, 100.0])).tolist() == [False, False, True, True, True]


def test_lattice_integral_l2_closed_form_vs_quadrature():
    f = BumpFunction(1.0, 0.4, 0.5, 0.8)
    # the generic quadrature path with a norm equal to l2 up to its name
    from orbits.moebius import custom_norm, norm_eval

    l2_copy = custom_norm("l2copy", lambda m: norm_eval(L2, m), 1.0, 1.0, True)
    assert lattice_integral(f, U, L2) == pytest.approx(lattice_integral(f, U, l2_copy), rel=1e-9)


def test_lattice_ratio_is_one_when_f_equals_g():
    f = BumpFunction(1.0, 0.5)
    rep = lattice_limit_experiment(U, f, f, log_grid(20, 200, 10))
    rho = np.array(rep.series["rho"])
    assert np.all(rho[np.isfinite(rho)] == 1.0)
    assert rep.metrics["target"] == 1.0


def test_lattice_limit_passes_for_modular():
    f, g = BumpFunction(1.0, 0.3), BumpFunction(2.0, 0.5)
    rep = lattice_limit_experiment(U, f, g, log_grid(50, 1000, 21))
    assert rep.verdict == PASS, rep.metrics


def test_lattice_limit_rejects_non_lattice():
    f = BumpFunction(1.0, 0.3)
    with pytest.raises(ValueError):
        lattice_limit_experiment(U, f, f, [10.0, 20.0], spec=build_schottky(2.5, 2.5, math.pi / 2))


def test_in_cone():
    spec = build_schottky(2.5, 2.5, math.pi / 2)
    assert in_cone(spec, (1.0, 0.0))
    assert in_cone(build_modular(), (0.3, 0.7))
    # a direction strictly between two ping-pong arcs is outside the cone
    p_gap = 0.5 * (spec.ping_pong_domains[(1, 1)].hi + spec.ping_pong_domains[(2, 1)].lo)
    assert not in_cone(spec, (math.cos(p_gap), math.sin(p_gap)))


def test_draw_cone_vector_lands_in_cone(schottky_data):
    spec, d, nu = schottky_data
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = draw_cone_vector(nu, rng)
        assert 1.0 <= math.hypot(*u) <= 2.0
        assert in_cone(spec, u)


def test_band_invariant_under_scaling_f(schottky_data):
    spec, d, nu = schottky_data
    u = draw_cone_vector(nu, np.random.default_rng(1))
    f = BumpFunction(1.0, 0.5)
    grid = log_grid(50, 500, 8)
    a = ratio_band_experiment(spec, u, f, 0.0, grid, nu, d.value)
    b = ratio_band_experiment(spec, u, f.scaled(2.0), 0.0, grid, nu, d.value)
    assert b.metrics["band"] == pytest.approx(a.metrics["band"], rel=1e-12)
    assert np.allclose(b.series["ratio"], a.series["ratio"], rtol=1e-12)
    assert band_rhs(f.scaled(2.0), u, nu, d.value) == pytest.approx(2 * band_rhs(f, u, nu, d.value))
    with pytest.raises(ValueError):
        ratio_band_experiment(spec, u, f, 1.0, grid, nu, d.value)


def test_band_fails_outside_cone(schottky_data):
    spec, d, nu = schottky_data
    p_gap = 0.5 * (spec.ping_pong_domains[(1, 1)].hi + spec.ping_pong_domains[(2, 1)].lo)
    u = (1.5 * math.cos(p_gap), 1.5 * math.sin(p_gap))
    rep = ratio_band_experiment(spec, u, BumpFunction(1.0, 0.5), 0.0, log_grid(50, 200, 5), nu, d.value)
    assert rep.verdict == FAIL
    assert rep.params["in_cone"] is False


def test_oscillation_at_least_one():
    spec = build_schottky(2.5, 2.5, math.pi / 2)
    rep = no_limit_probe(spec, (1.0, 0.1), log_grid(10, 2000, 21))
    assert rep.metrics["osc"] >= 1
    assert all(x >= 1 for x in rep.series["decade_osc"])
    assert rep.verdict == INFO


@pytest.mark.parametrize("spec", [build_modular(), build_schottky(2.0, 2.0, math.pi / 2)],
                         ids=["modular", "schottky"])
def test_log_cesaro_exact_vs_trapezoid(spec):
    f = BumpFunction(1.0, 0.9)
    delta = 1.0 if spec.kind == "modular" else 0.6
    for S in (50.0, 300.0):
        exact = log_cesaro_series(spec, U, f, [S], delta)[0]
        trap = log_cesaro_trapezoid(spec, U, f, S, delta, n=200_000)
        assert exact == pytest.approx(trap, rel=1e-4)


def test_log_cesaro_single_element_closed_form():
    # with f supported at the minimal orbit vectors only, L(S) is a one-term formula
    spec = build_modular()
    f = BumpFunction(1.0, 0.5, 0.0, 0.3)
    ball = enumerate_ball(spec, L2, 2.0)
    V = ball.apply((1.0, 0.0))
    fv = f(V[:, 0], V[:, 1])
    n = np.maximum(ball.norms, 1.0)
    S = 2.0
    want = spec.sl_factor * np.sum(fv * (n ** -1.0 - S ** -1.0)) / math.log(S)
    assert log_cesaro_series(spec, (1.0, 0.0), f, [S], 1.0, ball=ball)[0] == pytest.approx(want)


def test_large_scale_modular():
    rep = large_scale_experiment(build_modular(), tuple(np.array(U) / math.sqrt(3)), L2, 200.0)
    assert rep.verdict == PASS, rep.metrics
    assert rep.metrics["support_violation"] == 0


def test_xi_law_normalized(modular_nu):
    law = xi_law((1.0, 0.0), lp_norm(4), modular_nu, 1.0, n_bins=16, n_radial=16)
    assert law.total == pytest.approx(1.0)
    assert np.all(law.weight >= 0)


def test_sandwich_suite_small():
    rep = sandwich_suite(build_modular(), trials=5, seed=3)
    assert rep.metrics["violations"] == 0
    assert rep.verdict == PASS


def test_nested_reuse():
    clear_memo()
    assert nested_reuse_check(build_modular(), U, BumpFunction(1.0, 0.5), 50.0, 200.0)
    spec = build_schottky(2.5, 2.5, math.pi / 2)
    assert nested_reuse_check(spec, U, BumpFunction(1.0, 0.5), 100.0, 800.0)


def test_orbit_sum_alpha_scaling():
    spec = build_modular()
    f = BumpFunction(1.0, 0.5)
    ball = enumerate_ball(spec, L2, 100.0)
    # f(gamma u / T^alpha) = f.dilated(T^alpha)(gamma u)
    T, alpha = 100.0, 0.5
    assert orbit_sum(f, U, spec, L2, T, alpha, ball=ball) == pytest.approx(
        orbit_sum(f.dilated(T ** alpha), U, spec, L2, T, 0.0, ball=ball), rel=1e-12)


def test_report_json_is_stable():
    f, g = BumpFunction(1.0, 0.3), BumpFunction(2.0, 0.5)
    a = lattice_limit_experiment(U, f, g, log_grid(20, 200, 6))
    clear_memo()
    b = lattice_limit_experiment(U, f, g, log_grid(20, 200, 6))
    assert a.to_json(with_runtime=False) == b.to_json(with_runtime=False)
    d = json.loads(a.to_json())
    assert set(d) == {"name", "group", "norm", "params", "metrics", "series", "verdict", "runtime_s"}


def test_report_series_csv_and_nonfinite():
    rep = ExperimentReport("x", "g", "l2", series={"a": [1.0, 2.0], "b": [3.0]},
                           metrics={"m": math.inf})
    assert rep.series_csv() == "a,b\n1,3\n2,\n"
    assert json.loads(rep.to_json())["metrics"]["m"] == "inf"
    assert not rep.failed
    assert ExperimentReport("x", "g", "l2", verdict=FAIL).failed
