import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from orbits.balls import clear_memo, enumerate_ball
from orbits.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, Config, UsageError, main
from orbits.groups import build_modular
from orbits.moebius import L2


@pytest.fixture(autouse=True)
def _isolated(monkeypatch):
    monkeypatch.delenv("ORBITS_CACHE_DIR", raising=False)
    clear_memo()
    yield
    clear_memo()


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_enumerate_header_and_rows(capsys):
    code, out, err = run(capsys, "enumerate", "--group", "modular", "--radius", "10")
    lines = out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "a,b,c,d,word,norm"
    assert len(lines) - 1 == 290
    assert "290 PSL" in err


def test_enumerate_empty_ball(capsys):
    code, out, _ = run(capsys, "enumerate", "--group", "modular", "--radius", "1")
    assert code == EXIT_OK
    assert out.splitlines() == ["a,b,c,d,word,norm"]


def test_enumerate_warm_cache_identical(tmp_path, capsys):
    cache = tmp_path / "cache"
    args = ["enumerate", "--group", "schottky:2.5,2.5,1.5707963267948966", "--radius", "200",
            "--cache-dir", str(cache)]
    _, cold, _ = run(capsys, *args, "--out", str(tmp_path / "a.csv"))
    clear_memo()
    _, warm, _ = run(capsys, *args, "--out", str(tmp_path / "b.csv"))
    assert list(cache.iterdir())
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    # the cache directory applies to the command only
    assert "ORBITS_CACHE_DIR" not in os.environ


def test_count_matches_ball(capsys):
    code, out, _ = run(capsys, "count", "--group", "modular", "--grid", "2:100:5")
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert code == EXIT_OK and out.startswith("T,N\n")
    assert int(rows[-1][1]) == enumerate_ball(build_modular(), L2, 100.0).sl_count
    counts = [int(r[1]) for r in rows]
    assert counts == sorted(counts)


def test_cloud_disk_bound_and_count(capsys):
    T = 80.0
    code, out, _ = run(capsys, "cloud", "--group", "modular", "--radius", str(T), "--u", "0.6,0.8")
    data = np.loadtxt(out.splitlines()[1:], delimiter=",", ndmin=2)
    assert code == EXIT_OK
    assert data.shape[0] == enumerate_ball(build_modular(), L2, T).sl_count
    assert np.all(np.hypot(data[:, 1], data[:, 2]) <= 1 + 1e-12)


def test_cloud_grid_and_alpha(capsys):
    code, out, _ = run(capsys, "cloud", "--group", "modular", "--grid", "10:40:3", "--alpha", "0.5")
    T = np.loadtxt(out.splitlines()[1:], delimiter=",", ndmin=2)[:, 0]
    assert code == EXIT_OK
    assert sorted(set(np.round(T, 9))) == pytest.approx([10.0, 20.0, 40.0])


def test_config_roundtrip_and_rejection(tmp_path):
    cfg = Config(group="modular", radius="10", u="1,2")
    assert Config.parse(cfg.to_text()) == cfg
    assert Config.parse("# comment\ngroup = modular  # trailing\n\ncache-dir = /x\n").cache_dir == "/x"
    with pytest.raises(UsageError, match="unknown key 'colour'"):
        Config.parse("group = modular\ncolour = red\n")
    with pytest.raises(UsageError, match="line 1"):
        Config.parse("no equals sign\n")
    assert Config(group="a", radius="1").merged(Config(radius="2")) == Config(group="a", radius="2")


def test_config_file_and_flag_override(tmp_path, capsys):
    p = tmp_path / "run.cfg"
    p.write_text("group = modular\nradius = 1\n")
    _, out, _ = run(capsys, "enumerate", "--config", str(p), "--radius", "10")
    assert len(out.splitlines()) == 291
    p.write_text("group = modular\nwidth = 3\n")
    code, _, err = run(capsys, "enumerate", "--config", str(p))
    assert code == EXIT_USAGE and "unknown key 'width'" in err


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["enumerate", "--group", "modular"],
    ["enumerate", "--group", "hyperbolic", "--radius", "3"],
    ["enumerate", "--group", "modular", "--radius", "-1"],
    ["enumerate", "--group", "modular", "--radius", "ten"],
    ["count", "--group", "modular", "--grid", "1:2"],
    ["cloud", "--group", "modular", "--radius", "5", "--u", "0,0"],
    ["cloud", "--group", "modular", "--radius", "5", "--alpha", "3"],
    ["verify", "--suite", "nope"],
    ["verify", "--suite", "algebra", "--delta", "0.7"],
    ["delta", "--group", "modular", "--method", "magic"],
    ["enumerate", "--config", "/nonexistent/file.cfg"],
], ids=lambda a: " ".join(a) or "empty")
def test_usage_errors_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == EXIT_USAGE


def test_delta_modular_pass(capsys):
    code, out, _ = run(capsys, "delta", "--group", "modular", "--method", "l2ball", "--tmax", "2000", "--stable")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["metrics"]["value"] == pytest.approx(1.0, abs=0.05)
    assert rep["verdict"] == "pass" and rep["runtime_s"] == 0.0


def test_delta_failed_verdict_exit_1(capsys):
    # a tiny geodesic window is far from the asymptotic regime
    code, out, _ = run(capsys, "delta", "--group", "modular", "--method", "geodesic_count", "--tmax", "5")
    assert code == EXIT_FAIL
    assert json.loads(out)["verdict"] == "fail"


def test_delta_unknown_exponent_is_informational(capsys):
    code, out, _ = run(capsys, "delta", "--group", "schottky:4,4,1.5707963267948966", "--tmax", "1e4")
    assert code == EXIT_OK
    assert json.loads(out)["verdict"] == "informational"


def test_verify_algebra_fast(capsys):
    t0 = time.perf_counter()
    code, out, err = run(capsys, "verify", "--suite", "algebra")
    assert time.perf_counter() - t0 < 30
    doc = json.loads(out)
    assert code == EXIT_OK and doc["passed"] is True
    assert "PASS" in err


def test_verify_series_converges(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--suite", "series", "--delta", "0.7", "--stable",
                       "--csv-dir", str(tmp_path))
    doc = json.loads(out)
    assert code == EXIT_OK
    main_rep = doc["reports"][0]
    assert main_rep["metrics"]["converges"] == 1.0
    assert (tmp_path / "series_00_integrability_series.csv").read_text().startswith("checkpoints,partial_sums")


def test_verify_series_stable_bytes(capsys):
    _, a, _ = run(capsys, "verify", "--suite", "series", "--stable")
    _, b, _ = run(capsys, "verify", "--suite", "series", "--stable")
    assert a == b


def test_module_entry_point(tmp_path):
    out = tmp_path / "b.csv"
    r = subprocess.run([sys.executable, "-m", "orbits", "enumerate", "--group", "modular", "--radius",
                        str(math.sqrt(2) * (1 + 1e-12)), "--out", str(out)], capture_output=True, text=True)
    assert r.returncode == 0
    assert len(out.read_text().splitlines()) == 3
    r = subprocess.run([sys.executable, "-m", "orbits", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("enumerate", "count", "delta", "cloud", "verify"):
        assert cmd in r.stdout
