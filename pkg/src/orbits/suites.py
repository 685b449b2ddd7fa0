"""Named verification suites: each bundles the experiments behind one family of checks.

``run_suite(name, seed)`` returns a list of :class:`ExperimentReport`; a suite
passes when none of its reports has verdict ``fail``.
"""

from __future__ import annotations

import functools
import math
from typing import Callable, Dict, List

import numpy as np

from .balls import count_function, enumerate_ball
from .groups import build_modular, build_parabolic_free, build_schottky
from .lab import (
    CESARO_SCHOTTKY_PARAMS,
    FAIL,
    INFO,
    PASS,
    SCHOTTKY_PARAMS,
    ExperimentReport,
    _Timer,
    cauchy_spread,
    draw_cone_vector,
    large_scale_experiment,
    lattice_limit_experiment,
    log_cesaro_experiment,
    log_grid,
    nested_reuse_check,
    no_limit_probe,
    ratio_band_experiment,
    sandwich_suite,
)
from .moebius import (
    IDENTITY_FRAME,
    L2,
    Frame,
    Mat2,
    a_t,
    geodesic_flow,
    horocycle_flow,
    hyp_dist,
    mobius_act,
    n_s,
    random_sl2,
)
from .patterson import (
    cusp_integrability_series,
    epsilon_sensitivity,
    estimate_delta,
    conformality_check,
    mu_bar,
    patterson_measure,
    shadow_lemma_check,
    tau,
    xi_mass,
)
from .plane import BumpFunction, cocycle, kappa, kappa_l2, psi_matrix, star

SUITES = ("algebra", "lattice", "largescale", "sandwich", "band", "cesaro", "shadow", "series")

U_IRRATIONAL = (1.0, math.sqrt(2.0))
LATTICE_PAIRS = (
    (BumpFunction(1.0, 0.3), BumpFunction(2.0, 0.5)),
    (BumpFunction(1.5, 0.4, math.pi / 4, 1.2), BumpFunction(0.8, 0.3)),
)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _mat_err(m: Mat2, n: Mat2) -> float:
    scale = max(1.0, max(abs(e) for e in n.entries()))
    return max(abs(x - y) for x, y in zip(m.entries(), n.entries())) / scale


def _random_vector(rng: np.random.Generator):
    r = math.exp(rng.uniform(-1.0, 1.0))
    a = rng.uniform(0.0, 2 * math.pi)
    return (r * math.cos(a), r * math.sin(a))


# --------------------------------------------------------------------------
# algebra
# --------------------------------------------------------------------------


def identity_errors(n: int = 1000, seed: int = 0) -> Dict[str, float]:
    """Largest error of each algebraic identity over ``n`` random inputs."""
    rng = np.random.default_rng(seed)
    u0 = (1.0, 0.0)
    err = dict.fromkeys(["psi_section", "psi_det", "psi_scaling", "cocycle_translation",
                         "cocycle_dilation", "cocycle_base_change", "flow_commutation",
                         "star_l2", "kappa_l2", "norm_distance"], 0.0)

    def bump(key, value):
        err[key] = max(err[key], float(value))

    for _ in range(n):
        v = _random_vector(rng)
        u = _random_vector(rng)
        g = random_sl2(rng, 0.5)
        s = float(rng.uniform(-3, 3))
        t = float(rng.uniform(-2, 2))
        P = psi_matrix(v)
        w = P.apply(u0)
        bump("psi_section", math.hypot(w[0] - v[0], w[1] - v[1]) / math.hypot(*v))
        bump("psi_det", abs(P.det - 1.0))
        ev = (math.exp(t) * v[0], math.exp(t) * v[1])
        bump("psi_scaling", _mat_err(psi_matrix(ev), P @ a_t(2 * t)))
        c = cocycle(u0, g)
        bump("cocycle_translation", _rel(cocycle(u0, g @ n_s(s)), c + s))
        bump("cocycle_dilation", _rel(cocycle(u0, g @ a_t(t)), math.exp(-t) * c))
        bump("cocycle_base_change", _rel(cocycle(u, g), cocycle(u0, g @ psi_matrix(u))))
        fr = Frame(g)
        lhs = geodesic_flow(horocycle_flow(fr, s), t)
        rhs = horocycle_flow(geodesic_flow(fr, t), s * math.exp(-t))
        bump("flow_commutation", _mat_err(lhs.m, rhs.m))
        bump("star_l2", _rel(star(v, u, L2), math.hypot(*v) * math.hypot(*u)))
        bump("kappa_l2", _rel(kappa(u, v, s, L2), kappa_l2(u, v, s)))
        gi = mobius_act(g, 1j)
        n2 = sum(e * e for e in g.entries())
        bump("norm_distance", abs(n2 - 2 * math.cosh(hyp_dist(1j, gi))) / n2)
    return err


def algebra_reports(seed: int = 0, n: int = 1000, tol: float = 1e-9) -> List[ExperimentReport]:
    with _Timer() as tm:
        err = identity_errors(n, seed)
    worst = max(err.values())
    ident = ExperimentReport("algebraic_identities", "none", "l2", {"samples": n, "seed": seed, "tol": tol},
                             dict(err, worst=worst), {}, PASS if worst <= tol else FAIL, tm.elapsed)
    return [ident, ball_exactness_report()]


def ball_exactness_report(T: float = 10.0) -> ExperimentReport:
    """Modular l2 ball from the word search versus the integer scan, plus the two smallest radii."""
    with _Timer() as tm:
        spec = build_modular()
        scan = enumerate_ball(spec, L2, T, backend="scan")
        words = enumerate_ball(spec, L2, T, backend="words")
        same = scan.key_set() == words.key_set() and scan.psl_count == words.psl_count
        n1 = enumerate_ball(spec, L2, 1.0, use_cache=False).sl_count
        n2 = enumerate_ball(spec, L2, math.sqrt(2.0), use_cache=False).sl_count
    ok = same and n1 == 0 and n2 == 4
    return ExperimentReport("ball_exactness", spec.label, "l2", {"T": T},
                            {"sets_equal": float(same), "psl_count": scan.psl_count,
                             "sl_count_T1": n1, "sl_count_Tsqrt2": n2},
                            {}, PASS if ok else FAIL, tm.elapsed)


# --------------------------------------------------------------------------
# lattice
# --------------------------------------------------------------------------


def delta_recovery_report(T_modular: float = 2000.0, T_schottky: float = 1e5) -> ExperimentReport:
    with _Timer() as tm:
        mod = build_modular()
        sch = build_schottky(*SCHOTTKY_PARAMS)
        mg = estimate_delta(mod, "geodesic_count", T_modular)
        ml = estimate_delta(mod, "l2ball_fit", T_modular)
        sg = estimate_delta(sch, "geodesic_count", T_schottky)
        sl = estimate_delta(sch, "l2ball_fit", T_schottky)
    gap = abs(sg.value - sl.value)
    ok = abs(mg.value - 1) <= 0.05 and abs(ml.value - 1) <= 0.05 and gap <= 0.05
    return ExperimentReport(
        "delta_recovery", f"{mod.label}+{sch.label}", "l2",
        {"T_max_modular": T_modular, "T_max_schottky": T_schottky},
        {"modular_geodesic": mg.value, "modular_geodesic_stderr": mg.stderr,
         "modular_l2ball": ml.value, "modular_l2ball_stderr": ml.stderr,
         "schottky_geodesic": sg.value, "schottky_geodesic_stderr": sg.stderr,
         "schottky_l2ball": sl.value, "schottky_l2ball_stderr": sl.stderr,
         "schottky_method_gap": gap},
        {}, PASS if ok else FAIL, tm.elapsed)


def counting_law_report(T_schottky: float = 1e5, n_grid: int = 30) -> ExperimentReport:
    """Modular ``N(T)/T^2`` on ``[200, 2000]``; Schottky log-log slope over the top decade against ``2 delta``."""
    with _Timer() as tm:
        mod = build_modular()
        grid = log_grid(200.0, 2000.0, n_grid)
        cm = np.array([n for _, n in count_function(mod, L2, grid)], dtype=float)
        const = cm / grid ** 2
        spread = cauchy_spread(const)
        sch = build_schottky(*SCHOTTKY_PARAMS)
        d = estimate_delta(sch, "l2ball_fit", T_schottky)
        sg = log_grid(T_schottky / 10, T_schottky, n_grid)
        cs = np.array([n for _, n in count_function(sch, L2, sg)], dtype=float)
        slope = float(np.polyfit(np.log(sg), np.log(cs), 1)[0])
    ok = spread < 0.05 and abs(slope - 2 * d.value) <= 0.05
    return ExperimentReport(
        "counting_law", f"{mod.label}+{sch.label}", "l2", {"T_max_schottky": T_schottky},
        {"modular_spread": spread, "modular_constant": float(const[-1]),
         "schottky_slope": slope, "schottky_two_delta": 2 * d.value},
        {"T_modular": grid.tolist(), "N_over_T2": const.tolist(), "T_schottky": sg.tolist(),
         "N_schottky": cs.tolist()},
        PASS if ok else FAIL, tm.elapsed)


def lattice_reports(seed: int = 0, T_max: float = 1000.0, n_grid: int = 21) -> List[ExperimentReport]:
    grid = log_grid(T_max / 10, T_max, n_grid)
    out = [lattice_limit_experiment(U_IRRATIONAL, f, g, grid) for f, g in LATTICE_PAIRS]
    out += [delta_recovery_report(), counting_law_report()]
    with _Timer() as tm:
        same = nested_reuse_check(build_modular(), U_IRRATIONAL, LATTICE_PAIRS[0][0], 50.0, T_max)
    out.append(ExperimentReport("nested_reuse", "modular", "l2", {"T_small": 50.0, "T_big": T_max},
                                {"identical": float(same)}, {}, PASS if same else FAIL, tm.elapsed))
    return out


# --------------------------------------------------------------------------
# largescale
# --------------------------------------------------------------------------


@functools.lru_cache(maxsize=4)
def modular_patterson(n_min: int = 100_000, delta: float = 1.0):
    return patterson_measure(build_modular(), delta, 0.05, n_min=n_min)


def patterson_chain_report(n_min: int = 100_000, T_delta: float = 2000.0) -> ExperimentReport:
    """delta, nu, tau and mu_bar for the modular group against their closed forms."""
    with _Timer() as tm:
        spec = build_modular()
        d = estimate_delta(spec, "geodesic_count", T_delta)
        nu = modular_patterson(n_min, d.value)
        ks = nu.ks_uniform()
        t_hat = tau(IDENTITY_FRAME, nu, d.value)
        tau_err = abs(t_hat / (2 / math.pi) - 1)
        mb = mu_bar(d.value, nu, 0.25, 4.0, grid=300)
        ann = {(1.0, 2.0): 3.0, (0.5, 1.0): 0.75, (2.0, 3.0): 5.0}
        ann_err = max(abs(mb.mass(lambda r, t, lo=lo, hi=hi: (r >= lo) & (r <= hi)) / m - 1)
                      for (lo, hi), m in ann.items())
        S, T = Mat2(0, -1, 1, 0), Mat2(1, 1, 0, 1)
        conf = max(float(np.max(conformality_check(nu, g, d.value))) for g in (T, S @ T, T @ S @ T))
        sens = epsilon_sensitivity(spec, d.value, 0.05, n_min=n_min)
    ok = abs(d.value - 1) <= 0.05 and ks <= 0.05 and tau_err <= 0.03 and ann_err <= 0.02
    return ExperimentReport(
        "patterson_chain", spec.label, "l2", {"n_min": n_min, "epsilon": 0.05, "t_max": nu.t_max},
        {"delta_hat": d.value, "ks_uniform": ks, "tau_identity": t_hat, "tau_rel_error": tau_err,
         "annulus_rel_error": ann_err, "conformality_max_error": conf, "epsilon_sensitivity": sens,
         "atoms": len(nu)},
        {}, PASS if ok else FAIL, tm.elapsed)


def mass_law_report(n_min: int = 100_000) -> ExperimentReport:
    with _Timer() as tm:
        nu = modular_patterson(n_min)
        m = xi_mass((1.0, 0.0), L2, nu, 1.0)
    err = abs(m - 1.0)
    return ExperimentReport("mass_law", "modular", "l2", {"u": [1.0, 0.0], "delta": 1.0},
                            {"delta_times_mass": m, "rel_error": err}, {},
                            PASS if err <= 0.02 else FAIL, tm.elapsed)


def largescale_reports(seed: int = 0, T: float = 300.0) -> List[ExperimentReport]:
    u = (U_IRRATIONAL[0] / math.sqrt(3), U_IRRATIONAL[1] / math.sqrt(3))
    return [large_scale_experiment(build_modular(), u, L2, T), patterson_chain_report(), mass_law_report()]


# --------------------------------------------------------------------------
# sandwich, band, shadow, series
# --------------------------------------------------------------------------


def sandwich_reports(seed: int = 0, trials: int = 50) -> List[ExperimentReport]:
    return [sandwich_suite(build_modular(), trials, seed), sandwich_suite(build_schottky(*SCHOTTKY_PARAMS), trials, seed)]


def _schottky_data(params, T_delta: float, n_min: int = 10_000):
    spec = build_schottky(*params)
    d = estimate_delta(spec, "l2ball_fit", T_delta)
    nu = patterson_measure(spec, d.value, 0.05, n_min=n_min)
    return spec, d, nu


def band_reports(seed: int = 0, n_grid: int = 25) -> List[ExperimentReport]:
    spec, d, nu = _schottky_data(SCHOTTKY_PARAMS, 1e4)
    rng = np.random.default_rng(seed)
    u = draw_cone_vector(nu, rng)
    grid = log_grid(50.0, 5000.0, n_grid)
    out = []
    for f in (BumpFunction(1.0, 0.5), BumpFunction(1.0, 0.9)):
        for alpha in (-0.5, 0.0, 0.5):
            out.append(ratio_band_experiment(spec, u, f, alpha, grid, nu, d.value))
    return out


def shadow_report(seed: int = 0, samples: int = 200, t_max: float = 5.0) -> ExperimentReport:
    with _Timer() as tm:
        spec = build_modular()
        nu = modular_patterson()
        rep = shadow_lemma_check(spec, nu, 1.0, samples, t_max, seed)
    return ExperimentReport("shadow_lemma", spec.label, "l2",
                            {"samples": samples, "t_max": t_max, "seed": seed,
                             "orbit_radius": rep.truncation_radius},
                            {"band": rep.band, "min_ratio": float(rep.ratios.min()),
                             "max_ratio": float(rep.ratios.max())},
                            {"t": rep.ts.tolist(), "ratio": rep.ratios.tolist()},
                            PASS if rep.band <= 10 else FAIL, tm.elapsed)


def series_reports(seed: int = 0, delta: float = 0.7, N: int = 10 ** 6) -> List[ExperimentReport]:
    with _Timer() as tm:
        rep = cusp_integrability_series(delta, N)
        ok = True
        metrics = {"converges": float(rep.converges), "partial_sum_N": float(rep.partial_sums[-1])}
        if rep.converges:
            p = 3 * delta - 1
            gap = rep.limit - rep.partial_sums[-1]
            # the tail lies between the integrals of x^{-p} over [N+1, inf) and [N, inf)
            lower = (N + 1) ** (1 - p) / (p - 1)
            metrics.update(limit=rep.limit, tail=gap, tail_bound=rep.tail_bound, tail_lower=lower)
            ok = lower <= gap <= rep.tail_bound
        else:
            ok = bool(np.all(np.diff(rep.partial_sums) > 0))
        flip = {}
        for dl in (0.6, 2 / 3, 2 / 3 + 1e-9, 0.7, 0.9):
            flip[f"{dl:.10g}"] = cusp_integrability_series(dl, 1000).converges
        flip_ok = [flip[k] for k in sorted(flip, key=float)] == [False, False, True, True, True]
    main = ExperimentReport("integrability_series", "none", "none", {"delta": delta, "N": N},
                            metrics, {"checkpoints": rep.checkpoints.tolist(),
                                      "partial_sums": rep.partial_sums.tolist()},
                            PASS if ok else FAIL, tm.elapsed)
    flip_rep = ExperimentReport("integrability_flip", "none", "none", {},
                                {k: float(v) for k, v in flip.items()}, {},
                                PASS if flip_ok else FAIL, 0.0)
    return [main, flip_rep]


# --------------------------------------------------------------------------
# cesaro
# --------------------------------------------------------------------------


CESARO_BUMPS = (BumpFunction(1.0, 0.9), BumpFunction(1.3, 1.1))


def cesaro_reports(seed: int = 0, S_max: float = 1e4, n_grid: int = 31,
                   cusp: bool = True) -> List[ExperimentReport]:
    rng = np.random.default_rng(seed)
    spec, d, nu = _schottky_data(CESARO_SCHOTTKY_PARAMS, S_max)
    us = [draw_cone_vector(nu, rng) for _ in range(2)]
    S_grid = log_grid(10.0, S_max, n_grid)
    out = [log_cesaro_experiment(spec, us, CESARO_BUMPS, S_grid, nu, d.value)]

    probe_spec, _, probe_nu = _schottky_data(SCHOTTKY_PARAMS, 1e4)
    pu = draw_cone_vector(probe_nu, rng)
    out.append(no_limit_probe(probe_spec, pu, log_grid(100.0, 1e4, 61)))
    out.append(no_limit_probe(build_modular(), U_IRRATIONAL, log_grid(20.0, 2000.0, 61)))
    if cusp:
        out.append(cusp_cesaro_report(rng))
    return out


def cusp_cesaro_report(rng: np.random.Generator, T_delta: float = 3000.0) -> ExperimentReport:
    """Log-Cesaro averages on the parabolic free group, run only when its delta clearly exceeds 2/3."""
    with _Timer() as tm:
        spec = build_parabolic_free(3.0)
        d = estimate_delta(spec, "l2ball_fit", T_delta)
        threshold = 2 / 3 + 2 * d.stderr
        if d.value <= threshold:
            rep = None
        else:
            nu = patterson_measure(spec, d.value, 0.05, n_min=10_000)
            us = [draw_cone_vector(nu, rng) for _ in range(2)]
            rep = log_cesaro_experiment(spec, us, CESARO_BUMPS, log_grid(10.0, T_delta, 25), nu, d.value)
    params = {"T_delta": T_delta, "delta_hat": d.value, "stderr": d.stderr, "threshold": threshold}
    if rep is None:
        return ExperimentReport("log_cesaro_cusp", spec.label, "l2", dict(params, skipped=True),
                                {}, {}, INFO, tm.elapsed)
    rep.name = "log_cesaro_cusp"
    rep.params.update(params, skipped=False)
    rep.metrics["criteria_met"] = float(rep.verdict == PASS)
    rep.verdict = INFO
    rep.runtime_s = tm.elapsed
    return rep


_RUNNERS: Dict[str, Callable[..., List[ExperimentReport]]] = {
    "algebra": algebra_reports,
    "lattice": lattice_reports,
    "largescale": largescale_reports,
    "sandwich": sandwich_reports,
    "band": band_reports,
    "cesaro": cesaro_reports,
    "shadow": lambda seed=0, **kw: [shadow_report(seed, **kw)],
    "series": series_reports,
}


def run_suite(name: str, seed: int = 0, **params) -> List[ExperimentReport]:
    if name not in _RUNNERS:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return _RUNNERS[name](seed=seed, **params)


def suite_passed(reports: List[ExperimentReport]) -> bool:
    return not any(r.failed for r in reports)


__all__ = ["SUITES", "run_suite", "suite_passed", "identity_errors"]
