"""Experiments turning the orbit-distribution results into numerical checks.

Each experiment returns an :class:`ExperimentReport` whose verdict is a pure
function of its metrics.  Constants that cannot be computed (the total
Patterson–Sullivan mass and friends) are cancelled by taking ratios.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate

from .balls import count_function, enumerate_ball, orbit_cloud
from .groups import GroupSpec, build_modular, build_schottky
from .measures import EmpiricalMeasure, weighted_ks
from .moebius import L2, NormSpec
from .patterson import (
    BoundaryMeasure,
    estimate_delta,
    log_grid,
    mu_bar_integral_bump,
    radial_cdf_modular,
    xi_density,
)
from .plane import BumpFunction, domain_D_radius, orbit_sum, sandwich_bounds, star

PASS, FAIL, INFO = "pass", "fail", "informational"

# Schottky group used by the band and sandwich experiments, and the denser one
# used for log-Cesaro averages (see README)
SCHOTTKY_PARAMS = (2.5, 2.5, math.pi / 2)
CESARO_SCHOTTKY_PARAMS = (2.0, 2.0, math.pi / 2)


@dataclass
class ExperimentReport:
    name: str
    group: str
    norm: str
    params: Dict[str, object] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)
    series: Dict[str, List[float]] = field(default_factory=dict)
    verdict: str = INFO
    runtime_s: float = 0.0

    @property
    def failed(self) -> bool:
        return self.verdict == FAIL

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, with_runtime: bool = True) -> str:
        d = self.to_dict()
        if not with_runtime:
            # wall time is the only nondeterministic field
            d["runtime_s"] = 0.0
        return json.dumps(_jsonable(d), indent=2, sort_keys=True)

    def series_csv(self) -> str:
        """Series as CSV columns (padded with empty cells to the longest)."""
        keys = sorted(self.series)
        n = max((len(self.series[k]) for k in keys), default=0)
        rows = [",".join(keys)]
        for i in range(n):
            rows.append(",".join(f"{self.series[k][i]:.17g}" if i < len(self.series[k]) else ""
                                 for k in keys))
        return "\n".join(rows) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def parse_grid(s: str) -> np.ndarray:
    """``lo:hi:N`` as an N-point log-spaced grid."""
    try:
        lo, hi, n = s.split(":")
        return log_grid(float(lo), float(hi), int(n))
    except ValueError as exc:
        raise ValueError(f"bad grid {s!r}, expected lo:hi:N") from exc


def cauchy_spread(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=float)
    if v.size == 0 or np.min(v) <= 0:
        return math.inf
    return float(v.max() / v.min() - 1.0)


def top_decade(T_grid: np.ndarray) -> np.ndarray:
    return T_grid >= T_grid[-1] / 10 * (1 - 1e-12)


# --------------------------------------------------------------------------
# Lattice limit
# --------------------------------------------------------------------------


def lattice_integral(f: BumpFunction, u, norm: NormSpec = L2) -> float:
    """``int f(v) / (v * u) dv``; the radial part integrates to ``wr``.

    For l2 ``v * u = |v||u|`` and the angular part is closed form; otherwise the
    angular integral of ``ang(theta) / (e_theta * u)`` is done by quadrature.
    """
    if norm.name == "l2":
        return f.integral_over_r() / math.hypot(*u)

    def g(t):
        return float(f.angular(t)) / star((math.cos(t), math.sin(t)), u, norm)

    pts = sorted({x % (2 * math.pi) for lo, hi in f.angular_support() for x in (lo, hi, (lo + hi) / 2)})
    ang = integrate.quad(g, 0.0, 2 * math.pi, points=pts or None, limit=400, epsabs=1e-13)[0]
    return f.scale * f.wr * ang


def lattice_limit_experiment(u, f: BumpFunction, g: BumpFunction, T_grid: Sequence[float],
                             norm: NormSpec = L2, spec: Optional[GroupSpec] = None) -> ExperimentReport:
    """Ratio of orbit sums against the Lebesgue-type target for a lattice."""
    with _Timer() as tm:
        spec = spec or build_modular()
        if spec.kind != "modular":
            raise ValueError("the lattice limit is checked on the modular group")
        T_grid = np.asarray(sorted(T_grid), dtype=float)
        Ig = lattice_integral(g, u, norm)
        if not Ig > 0:
            raise ValueError("g has zero integral")
        target = lattice_integral(f, u, norm) / Ig
        ball = enumerate_ball(spec, norm, T_grid[-1])
        sf = np.array([orbit_sum(f, u, spec, norm, T, ball=ball) for T in T_grid])
        sg = sf if f == g else np.array([orbit_sum(g, u, spec, norm, T, ball=ball) for T in T_grid])
        with np.errstate(invalid="ignore", divide="ignore"):
            rho = sf / sg
        rel = abs(rho[-1] / target - 1.0)
        growth = sf / T_grid
        spread = cauchy_spread(growth[top_decade(T_grid)])
    verdict = PASS if (rel <= 0.05 and spread < 0.10) else FAIL
    return ExperimentReport(
        "lattice_limit", spec.label, norm.name,
        {"u": list(map(float, u)), "f": f.spec_string(), "g": g.spec_string()},
        {"target": target, "rho_Tmax": float(rho[-1]), "rel_error": rel, "cauchy_spread": spread},
        {"T": T_grid.tolist(), "rho": rho.tolist(), "sum_f_over_T": growth.tolist()},
        verdict, tm.elapsed)


# --------------------------------------------------------------------------
# Ratio band
# --------------------------------------------------------------------------


def in_cone(spec: GroupSpec, u) -> bool:
    """Necessary condition for ``u`` to lie in the limit cone: its line falls in a ping-pong arc."""
    doms = spec.ping_pong_domains
    if not doms:
        return True
    p = math.atan2(u[1], u[0]) % math.pi
    for arc in doms.values():
        off = (p - arc.lo) % math.pi
        if off <= arc.length + 1e-12 or off >= math.pi - 1e-12:
            return True
    return False


def draw_cone_vector(nu: BoundaryMeasure, rng: np.random.Generator, r_range=(1.0, 2.0)):
    """Angle from the lifted Patterson atoms, radius uniform in ``r_range``."""
    th = float(nu.theta[rng.choice(2 * len(nu), p=nu.weight)])
    r = float(rng.uniform(*r_range))
    return (r * math.cos(th), r * math.sin(th))


def band_rhs(f: BumpFunction, u, nu: BoundaryMeasure, delta: float, norm: NormSpec = L2) -> float:
    """``int f(v) / (v * u)^delta d mu_bar(v)``."""
    return mu_bar_integral_bump(f, delta, nu, u, norm)


def ratio_band_experiment(spec: GroupSpec, u, f: BumpFunction, alpha: float, T_grid: Sequence[float],
                          nu: BoundaryMeasure, delta: float, norm: NormSpec = L2) -> ExperimentReport:
    """``I(alpha, f, T, u) = T^{-(1+alpha) delta} sum f(gamma u / T^alpha)`` against its integral."""
    with _Timer() as tm:
        if not -1 < alpha < 1:
            raise ValueError("alpha must lie in (-1, 1)")
        cone = in_cone(spec, u)
        T_grid = np.asarray(sorted(T_grid), dtype=float)
        ball = enumerate_ball(spec, norm, T_grid[-1])
        rhs = band_rhs(f, u, nu, delta, norm)
        I = np.array([T ** (-(1 + alpha) * delta) * orbit_sum(f, u, spec, norm, T, alpha, ball=ball)
                      for T in T_grid])
        ratio = I / rhs
        positive = bool(np.all(ratio > 0))
        band = float(ratio.max() / ratio.min()) if positive else math.inf
    verdict = PASS if (positive and band <= 25 and cone) else FAIL
    return ExperimentReport(
        "ratio_band", spec.label, norm.name,
        {"u": list(map(float, u)), "f": f.spec_string(), "alpha": alpha, "delta": delta, "in_cone": cone},
        {"band": band, "min_ratio": float(ratio.min()), "max_ratio": float(ratio.max()), "rhs": rhs},
        {"T": T_grid.tolist(), "I": I.tolist(), "ratio": ratio.tolist()},
        verdict, tm.elapsed)


# --------------------------------------------------------------------------
# Oscillation probe
# --------------------------------------------------------------------------


def no_limit_probe(spec: GroupSpec, u, T_grid: Sequence[float], f: Optional[BumpFunction] = None,
                   norm: NormSpec = L2) -> ExperimentReport:
    """``rho(T) = sum f(gamma u) / sum g(gamma u)`` with ``g(v) = f(2v)``; extrema over the top two decades."""
    with _Timer() as tm:
        f = f or BumpFunction(1.0, 0.5)
        g = f.dilated(0.5)
        T_grid = np.asarray(sorted(T_grid), dtype=float)
        ball = enumerate_ball(spec, norm, T_grid[-1])
        sf = np.array([orbit_sum(f, u, spec, norm, T, ball=ball) for T in T_grid])
        sg = np.array([orbit_sum(g, u, spec, norm, T, ball=ball) for T in T_grid])
        valid = (sf > 0) & (sg > 0)
        rho = np.where(valid, sf / np.where(valid, sg, 1.0), np.nan)
        ok = valid & (T_grid >= T_grid[-1] / 100 * (1 - 1e-12))
        osc = float(np.max(rho[ok]) / np.min(rho[ok])) if np.any(ok) else math.nan
        # oscillation on successive decades, stepping by half a decade, to show the trend
        decades = []
        lo = T_grid[0]
        while lo * 10 <= T_grid[-1] * (1 + 1e-12):
            sel = valid & (T_grid >= lo * (1 - 1e-12)) & (T_grid <= lo * 10 * (1 + 1e-12))
            if np.any(sel):
                decades.append(float(np.max(rho[sel]) / np.min(rho[sel])))
            lo *= math.sqrt(10)
    return ExperimentReport(
        "no_limit_probe", spec.label, norm.name,
        {"u": list(map(float, u)), "f": f.spec_string(), "g": g.spec_string()},
        {"osc": osc, "osc_last_decade": decades[-1] if decades else math.nan},
        {"T": T_grid.tolist(), "rho": np.nan_to_num(rho, nan=0.0).tolist(), "decade_osc": decades},
        INFO, tm.elapsed)


# --------------------------------------------------------------------------
# Log-Cesaro averages
# --------------------------------------------------------------------------


def log_cesaro_series(spec: GroupSpec, u, f: BumpFunction, S_grid: Sequence[float], delta: float,
                      norm: NormSpec = L2, ball=None) -> np.ndarray:
    """``L(S) = (1/log S) int_1^S T^{-delta} sum_{Gamma_T} f(gamma u) dT/T`` exactly.

    ``T -> sum_{Gamma_T} f(gamma u)`` is a step function, so each element with
    norm ``n`` contributes ``f(gamma u) (max(n, 1)^{-delta} - S^{-delta}) / delta``.
    """
    S_grid = np.asarray(S_grid, dtype=float)
    if ball is None:
        ball = enumerate_ball(spec, norm, S_grid.max())
    V = ball.apply(u)
    fv = f(V[:, 0], V[:, 1])
    keep = fv > 0
    fv, n = fv[keep], np.maximum(ball.norms[keep], 1.0)
    out = []
    for S in S_grid:
        m = n <= S
        val = np.sum(fv[m] * (n[m] ** (-delta) - S ** (-delta))) / delta
        out.append(spec.sl_factor * val / math.log(S))
    return np.array(out)


def log_cesaro_trapezoid(spec: GroupSpec, u, f: BumpFunction, S: float, delta: float, n: int = 4000,
                         norm: NormSpec = L2, ball=None) -> float:
    """Same average by the trapezoid rule on a log grid (reference route)."""
    if ball is None:
        ball = enumerate_ball(spec, norm, S)
    V = ball.apply(u)
    fv = f(V[:, 0], V[:, 1])
    keep = fv > 0
    fv, nm = fv[keep], ball.norms[keep]
    o = np.argsort(nm)
    fv, nm = fv[o], nm[o]
    cum = np.r_[0.0, np.cumsum(fv)]
    x = np.linspace(0.0, math.log(S), n)
    T = np.exp(x)
    sums = spec.sl_factor * cum[np.searchsorted(nm, T, side="right")]
    return float(integrate.trapezoid(T ** (-delta) * sums, x) / math.log(S))


def log_cesaro_experiment(spec: GroupSpec, us: Sequence, fs: Sequence[BumpFunction],
                          S_grid: Sequence[float], nu: BoundaryMeasure, delta: float,
                          norm: NormSpec = L2) -> ExperimentReport:
    """Cauchy spread of ``L(S)`` over the top decade, and invariance of ``L(S_max) / RHS`` across ``(u, f)``."""
    with _Timer() as tm:
        S_grid = np.asarray(sorted(S_grid), dtype=float)
        ball = enumerate_ball(spec, norm, S_grid[-1])
        spreads, ratios, series = [], [], {"S": S_grid.tolist()}
        top = top_decade(S_grid)
        for i, u in enumerate(us):
            for j, f in enumerate(fs):
                L = log_cesaro_series(spec, u, f, S_grid, delta, norm, ball)
                spreads.append(cauchy_spread(L[top]))
                ratios.append(float(L[-1] / band_rhs(f, u, nu, delta, norm)))
                series[f"L_u{i}_f{j}"] = L.tolist()
        inv = float(max(ratios) / min(ratios)) if min(ratios) > 0 else math.inf
        spread = float(max(spreads))
    verdict = PASS if (spread < 0.10 and inv <= 1.15) else FAIL
    return ExperimentReport(
        "log_cesaro", spec.label, norm.name,
        {"us": [list(map(float, u)) for u in us], "fs": [f.spec_string() for f in fs], "delta": delta},
        {"cauchy_spread": spread, "invariance_ratio": inv, "ratios": ratios},
        series, verdict, tm.elapsed)


# --------------------------------------------------------------------------
# Large-scale cloud
# --------------------------------------------------------------------------


def xi_law(u, norm: NormSpec, nu: BoundaryMeasure, delta: float, n_bins: int = 64,
           n_radial: int = 64) -> EmpiricalMeasure:
    """Discretized ``delta Xi(u, v) d mu_bar(v)`` on polar cells inside ``D(u)``, normalized."""
    centers, weights = nu.binned(n_bins)
    rs, ths, ws = [], [], []
    for th, w in zip(centers, weights):
        if w == 0:
            continue
        rho = domain_D_radius(u, float(th), norm)
        edges = rho * np.sin(np.linspace(0, math.pi / 2, n_radial + 1))
        mid = 0.5 * (edges[1:] + edges[:-1])
        cell = (edges[1:] ** (2 * delta) - edges[:-1] ** (2 * delta)) / delta
        for r, c in zip(mid, cell):
            v = (r * math.cos(th), r * math.sin(th))
            rs.append(r)
            ths.append(th)
            ws.append(w * c * delta * xi_density(u, v, norm, nu, delta))
    return EmpiricalMeasure(np.array(rs), np.array(ths), np.array(ws)).normalized()


def _cdf_from_measure(m: EmpiricalMeasure, coord: str) -> Callable[[np.ndarray], np.ndarray]:
    vals = m.r if coord == "r" else m.theta
    o = np.argsort(vals)
    xs, cum = vals[o], np.cumsum(m.weight[o]) / m.total
    return lambda x: np.interp(x, xs, cum, left=0.0, right=1.0)


def large_scale_experiment(spec: GroupSpec, u, norm: NormSpec, T: float, nu: Optional[BoundaryMeasure] = None,
                           delta: Optional[float] = None, T2: Optional[float] = None) -> ExperimentReport:
    """Normalized cloud ``{gamma u / T}`` against ``delta Xi(u, .) d mu_bar``."""
    with _Timer() as tm:
        modular_l2 = spec.kind == "modular" and norm.name == "l2"
        if delta is None:
            delta = 1.0 if spec.kind == "modular" else estimate_delta(spec, "l2ball_fit", 1e4).value
        cloud = orbit_cloud(spec, norm, T, u, 1.0)
        if len(cloud) == 0:
            raise ValueError("empty cloud; increase T")
        un = math.hypot(*u)
        if norm.name == "l2":
            bound = un * (1 + 1e-9)
            viol = float(np.count_nonzero(cloud.r > bound)) / len(cloud)
        else:
            rad = np.array([domain_D_radius(u, float(t), norm) for t in cloud.theta])
            viol = float(np.count_nonzero(cloud.r > rad * (1 + 1e-9))) / len(cloud)
        if modular_l2:
            F = lambda r: radial_cdf_modular(np.asarray(r) / un)  # noqa: E731
            G = lambda t: np.asarray(t) / (2 * math.pi)  # noqa: E731
        else:
            if nu is None:
                raise ValueError("a Patterson measure is needed off the modular l2 case")
            law = xi_law(u, norm, nu, delta)
            F, G = _cdf_from_measure(law, "r"), _cdf_from_measure(law, "theta")
        ks_r = weighted_ks(cloud.r, cloud.weight, F)
        ks_t = weighted_ks(cloud.theta, cloud.weight, G)
        T2 = T2 or T / 2
        counts = count_function(spec, norm, sorted([T2, T]))
        stab = [n * delta / (2 * t ** (2 * delta)) for t, n in counts]
        stability = abs(stab[1] / stab[0] - 1)
    ok = viol == 0 and ks_r <= 0.03 and ks_t <= 0.03
    return ExperimentReport(
        "large_scale", spec.label, norm.name,
        {"u": list(map(float, u)), "T": T, "T2": T2, "delta": delta},
        {"support_violation": viol, "ks_radial": ks_r, "ks_angular": ks_t, "count_stability": stability,
         "n_points": len(cloud)},
        {"count_constant": stab},
        PASS if ok else FAIL, tm.elapsed)


# --------------------------------------------------------------------------
# Sandwich
# --------------------------------------------------------------------------


def random_bump(rng: np.random.Generator) -> BumpFunction:
    r0 = float(rng.uniform(0.5, 2.0))
    wr = float(rng.uniform(0.1, 0.6)) * r0
    if rng.random() < 0.5:
        return BumpFunction(r0, wr)
    return BumpFunction(r0, wr, float(rng.uniform(0, math.pi)), float(rng.uniform(0.2, math.pi)))


def sandwich_suite(spec: GroupSpec, trials: int = 50, seed: int = 0, norm: NormSpec = L2,
                   T_range=None, tol: float = 1e-6) -> ExperimentReport:
    """Lower and upper horocycle bounds around orbit sums for random ``(f, u, T)``."""
    with _Timer() as tm:
        rng = np.random.default_rng(seed)
        if T_range is None:
            T_range = (2.0, 60.0) if spec.kind == "modular" else (5.0, 400.0)
        lows, mids, ups = [], [], []
        violations = 0
        worst = math.inf
        for _ in range(trials):
            f = random_bump(rng)
            r = float(rng.uniform(0.5, 2.0))
            a = float(rng.uniform(0, 2 * math.pi))
            u = (r * math.cos(a), r * math.sin(a))
            T = float(math.exp(rng.uniform(math.log(T_range[0]), math.log(T_range[1]))))
            lo, S, up = sandwich_bounds(f, u, spec, norm, T)
            scale = max(1.0, abs(S))
            slack = min(S - lo, up - S) / scale
            worst = min(worst, slack)
            if S < lo - tol * scale or S > up + tol * scale:
                violations += 1
            lows.append(lo)
            mids.append(S)
            ups.append(up)
    return ExperimentReport(
        "sandwich", spec.label, norm.name, {"trials": trials, "seed": seed, "T_range": list(T_range)},
        {"violations": violations, "min_relative_slack": worst},
        {"lower": lows, "sum": mids, "upper": ups},
        PASS if violations == 0 else FAIL, tm.elapsed)


def nested_reuse_check(spec: GroupSpec, u, f: BumpFunction, T_small: float, T_big: float,
                       norm: NormSpec = L2) -> bool:
    """Orbit sums from a restricted larger ball equal those of a cold enumeration."""
    big = enumerate_ball(spec, norm, T_big)
    cold = enumerate_ball(spec, norm, T_small, use_cache=False)
    return orbit_sum(f, u, spec, norm, T_small, ball=big) == orbit_sum(f, u, spec, norm, T_small, ball=cold)


def default_schottky() -> GroupSpec:
    return build_schottky(*SCHOTTKY_PARAMS)
