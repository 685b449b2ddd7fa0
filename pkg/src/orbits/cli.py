"""Command-line front end: ``orbits {enumerate,count,delta,cloud,verify}``.

Options come from flags or a flat ``key = value`` file given with ``--config``;
flags win.  Exit codes: 0 success or pass, 1 a failed verdict, 2 a usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import dataclass, fields
from typing import List, Optional

import numpy as np

from .balls import count_function, enumerate_ball, orbit_cloud, write_ball_csv
from .groups import parse_group
from .lab import INFO, PASS, FAIL, ExperimentReport, _Timer, parse_grid
from .moebius import parse_norm
from .patterson import estimate_delta
from .suites import SUITES, run_suite, suite_passed

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Config:
    group: Optional[str] = None
    norm: Optional[str] = None
    radius: Optional[str] = None
    grid: Optional[str] = None
    u: Optional[str] = None
    alpha: Optional[str] = None
    seed: Optional[str] = None
    jobs: Optional[str] = None
    out: Optional[str] = None
    csv_dir: Optional[str] = None
    cache_dir: Optional[str] = None
    method: Optional[str] = None
    tmax: Optional[str] = None
    suite: Optional[str] = None
    delta: Optional[str] = None

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def parse(cls, text: str) -> "Config":
        """Flat ``key = value`` lines; ``#`` starts a comment.  Unknown keys are rejected by name."""
        vals = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {n}: expected key = value, got {raw!r}")
            k, v = (x.strip() for x in line.split("=", 1))
            k = k.replace("-", "_")
            if k not in cls.keys():
                raise UsageError(f"config line {n}: unknown key {k!r}")
            vals[k] = v
        return cls(**vals)

    def to_text(self) -> str:
        return "".join(f"{k} = {getattr(self, k)}\n" for k in self.keys() if getattr(self, k) is not None)

    def merged(self, other: "Config") -> "Config":
        """Values of ``other`` override those of ``self`` where set."""
        return Config(**{k: getattr(other, k) if getattr(other, k) is not None else getattr(self, k)
                         for k in self.keys()})


# --------------------------------------------------------------------------
# Value parsing
# --------------------------------------------------------------------------


def _need(cfg: Config, key: str) -> str:
    v = getattr(cfg, key)
    if v is None:
        raise UsageError(f"missing required option --{key.replace('_', '-')}")
    return v


def _float(cfg: Config, key: str, default=None) -> float:
    v = getattr(cfg, key)
    if v is None:
        if default is None:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
        return default
    try:
        return float(v)
    except ValueError:
        raise UsageError(f"--{key}: not a number: {v!r}") from None


def _int(cfg: Config, key: str, default: int) -> int:
    v = getattr(cfg, key)
    if v is None:
        return default
    try:
        return int(v)
    except ValueError:
        raise UsageError(f"--{key}: not an integer: {v!r}") from None


def _vector(s: str):
    try:
        x, y = (float(t) for t in s.split(","))
    except ValueError:
        raise UsageError(f"--u: expected x,y, got {s!r}") from None
    if x == 0 and y == 0:
        raise UsageError("--u must be nonzero")
    return (x, y)


def _spec(cfg: Config):
    try:
        return parse_group(_need(cfg, "group"))
    except ValueError as e:
        raise UsageError(str(e)) from None


def _norm(cfg: Config):
    try:
        return parse_norm(cfg.norm or "l2")
    except ValueError as e:
        raise UsageError(str(e)) from None


def _grid(cfg: Config) -> np.ndarray:
    try:
        return parse_grid(_need(cfg, "grid"))
    except ValueError as e:
        raise UsageError(str(e)) from None


def _radii(cfg: Config) -> np.ndarray:
    if cfg.grid is not None:
        return _grid(cfg)
    return np.array([_float(cfg, "radius")])


def _open_out(cfg: Config):
    if cfg.out in (None, "-"):
        return sys.stdout, False
    try:
        return open(cfg.out, "w"), True
    except OSError as e:
        raise UsageError(f"cannot write {cfg.out}: {e.strerror}") from None


def _emit(cfg: Config, text: str) -> None:
    fh, close = _open_out(cfg)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_enumerate(cfg: Config) -> int:
    spec, norm = _spec(cfg), _norm(cfg)
    T = _float(cfg, "radius")
    if not T > 0:
        raise UsageError("--radius must be positive")
    ball = enumerate_ball(spec, norm, T, jobs=_int(cfg, "jobs", 1))
    fh, close = _open_out(cfg)
    try:
        write_ball_csv(ball, fh)
    finally:
        if close:
            fh.close()
    print(f"{ball.psl_count} PSL elements, sl_count {ball.sl_count}", file=sys.stderr)
    return EXIT_OK


def cmd_count(cfg: Config) -> int:
    spec, norm = _spec(cfg), _norm(cfg)
    curve = count_function(spec, norm, _radii(cfg), jobs=_int(cfg, "jobs", 1))
    _emit(cfg, "T,N\n" + "".join(f"{t:.17g},{n}\n" for t, n in curve))
    return EXIT_OK


def cmd_delta(cfg: Config, stable: bool = False) -> int:
    spec = _spec(cfg)
    method = cfg.method or "l2ball_fit"
    T_max = _float(cfg, "tmax", 2000.0)
    with _Timer() as tm:
        try:
            est = estimate_delta(spec, method, T_max)
        except ValueError as e:
            raise UsageError(str(e)) from None
    verdict = INFO
    if spec.known_delta is not None:
        verdict = PASS if abs(est.value - spec.known_delta) <= 0.05 else FAIL
    rep = ExperimentReport("delta", spec.label, "l2", {"method": est.method, "T_max": T_max},
                           {"value": est.value, "stderr": est.stderr, "window_lo": est.window[0],
                            "window_hi": est.window[1]},
                           {}, verdict, tm.elapsed)
    _emit(cfg, rep.to_json(with_runtime=not stable) + "\n")
    return EXIT_FAIL if rep.failed else EXIT_OK


def cmd_cloud(cfg: Config) -> int:
    spec, norm = _spec(cfg), _norm(cfg)
    u = _vector(cfg.u or "1,1.4142135623730951")
    alpha = _float(cfg, "alpha", 1.0)
    if not -1 <= alpha <= 1:
        raise UsageError("--alpha must lie in [-1, 1]")
    radii = _radii(cfg)
    ball = enumerate_ball(spec, norm, float(radii.max()), jobs=_int(cfg, "jobs", 1))
    rows = ["T,x,y\n"]
    for T in radii:
        c = orbit_cloud(spec, norm, float(T), u, alpha, ball=ball)
        t = f"{T:.17g}"
        rows.extend(f"{t},{x:.17g},{y:.17g}\n" for x, y in zip(c.x.tolist(), c.y.tolist()))
    _emit(cfg, "".join(rows))
    return EXIT_OK


def cmd_verify(cfg: Config, stable: bool = False) -> int:
    suite = _need(cfg, "suite")
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    params = {}
    if cfg.delta is not None:
        if suite != "series":
            raise UsageError("--delta applies to the series suite only")
        params["delta"] = _float(cfg, "delta")
    reports = run_suite(suite, seed=_int(cfg, "seed", 0), **params)
    docs = [json.loads(r.to_json(with_runtime=not stable)) for r in reports]
    _emit(cfg, json.dumps({"suite": suite, "passed": suite_passed(reports), "reports": docs},
                          indent=2, sort_keys=True) + "\n")
    if cfg.csv_dir:
        os.makedirs(cfg.csv_dir, exist_ok=True)
        for k, r in enumerate(reports):
            if r.series:
                with open(os.path.join(cfg.csv_dir, f"{suite}_{k:02d}_{r.name}.csv"), "w") as fh:
                    fh.write(r.series_csv())
    for r in reports:
        print(f"{r.verdict.upper():14s} {r.name} [{r.group}]", file=sys.stderr)
    return EXIT_OK if suite_passed(reports) else EXIT_FAIL


COMMANDS = {"enumerate": cmd_enumerate, "count": cmd_count, "delta": cmd_delta,
            "cloud": cmd_cloud, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--seed", help="seed for every random draw (default 0)")
    common.add_argument("--jobs", help="worker processes for enumeration (default 1)")
    common.add_argument("--out", help="output path ('-' or absent: stdout)")
    common.add_argument("--cache-dir", dest="cache_dir", help="ball cache directory (sets ORBITS_CACHE_DIR)")

    p = argparse.ArgumentParser(prog="orbits", description="Orbit enumeration and distribution checks "
                                "for Fuchsian groups acting on the plane.")
    sub = p.add_subparsers(dest="command", required=True)

    group_help = "modular | schottky:t1,t2,angle | parabolic:mu"
    norm_help = "l1 | l2 | linf | custom:op | custom:l<p>"
    e = sub.add_parser("enumerate", parents=[common], help="write a ball as CSV a,b,c,d,word,norm")
    e.add_argument("--group", help=group_help)
    e.add_argument("--norm", help=norm_help)
    e.add_argument("--radius")

    c = sub.add_parser("count", parents=[common], help="counting function N(T) as CSV T,N")
    c.add_argument("--group", help=group_help)
    c.add_argument("--norm", help=norm_help)
    c.add_argument("--radius")
    c.add_argument("--grid", help="lo:hi:N log-spaced radii")

    d = sub.add_parser("delta", parents=[common], help="critical exponent estimate as a JSON report")
    d.add_argument("--group", help=group_help)
    d.add_argument("--method", help="geodesic_count | l2ball_fit (alias l2ball)")
    d.add_argument("--tmax")
    d.add_argument("--stable", action="store_true", help="zero the wall time so the report is byte-stable")

    o = sub.add_parser("cloud", parents=[common], help="orbit cloud gamma u / T^alpha as CSV T,x,y")
    o.add_argument("--group", help=group_help)
    o.add_argument("--norm", help=norm_help)
    o.add_argument("--radius")
    o.add_argument("--grid", help="lo:hi:N log-spaced radii")
    o.add_argument("--u", help="x,y (default 1,sqrt 2)")
    o.add_argument("--alpha", help="scaling exponent in [-1, 1] (default 1)")

    v = sub.add_parser("verify", parents=[common], help="run a verification suite, JSON reports")
    v.add_argument("--suite", help=" | ".join(SUITES))
    v.add_argument("--delta", help="exponent for the series suite")
    v.add_argument("--csv-dir", dest="csv_dir", help="also write each report's series as CSV here")
    v.add_argument("--stable", action="store_true", help="zero the wall time so reports are byte-stable")
    return p


@contextlib.contextmanager
def _cache_dir(path: Optional[str]):
    """Point ``ORBITS_CACHE_DIR`` at ``path`` for one command, then restore it."""
    if not path:
        yield
        return
    before = os.environ.get("ORBITS_CACHE_DIR")
    os.environ["ORBITS_CACHE_DIR"] = path
    try:
        yield
    finally:
        if before is None:
            os.environ.pop("ORBITS_CACHE_DIR", None)
        else:
            os.environ["ORBITS_CACHE_DIR"] = before


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    flags = Config(**{k: getattr(ns, k) for k in Config.keys() if hasattr(ns, k)})
    try:
        cfg = Config()
        if ns.config:
            try:
                with open(ns.config) as fh:
                    cfg = Config.parse(fh.read())
            except OSError as e:
                raise UsageError(f"cannot read config {ns.config}: {e.strerror}") from None
        cfg = cfg.merged(flags)
        with _cache_dir(cfg.cache_dir):
            if ns.command in ("verify", "delta"):
                return COMMANDS[ns.command](cfg, stable=ns.stable)
            return COMMANDS[ns.command](cfg)
    except UsageError as e:
        print(f"orbits {ns.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # the reader went away (``| head``); silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
