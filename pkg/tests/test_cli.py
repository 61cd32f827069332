import json
import subprocess
import sys

import pytest

import torusgc as t
from torusgc import cli
from torusgc.config import RunConfig, config_hash, load_config

FAST = ["--n", "32", "--grad-tol", "1e-7", "--res-tol", "1e-3"]


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_solve_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    rc = cli.main(["solve", "--lambda", "0.3", "--out", str(out)] + FAST)
    assert rc == 0
    for name in ("solve.json", "w.field", "u.field", "fig_u.png"):
        assert (out / name).exists(), name
    data = read_json(out / "solve.json")
    assert data["format"] == "v1"
    assert abs(data["problem"]["lambda_max"] - 1.0) < 1e-14
    assert data["result"]["converged"] is True
    assert abs(data["result"]["constraint_residual"]) < 1e-8
    u = t.load_field(str(out / "u.field"))
    assert u.grid.n == 32
    assert "converged" in capsys.readouterr().out


def test_solve_rejects_bad_lambda(tmp_path, capsys):
    rc = cli.main(["solve", "--lambda", "1.5", "--out", str(tmp_path)] + FAST)
    assert rc == 1
    err = capsys.readouterr().err
    assert "Lambda = (0, 1)" in err


def test_bad_grid_exits_one(tmp_path, capsys):
    rc = cli.main(["solve", "--lambda", "0.3", "--n", "63",
                   "--out", str(tmp_path)])
    assert rc == 1
    assert "power of two" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("lam = 0.3\nwat = 7\n")
    rc = cli.main(["solve", "--config", str(cfgfile), "--out", str(tmp_path)])
    assert rc == 1
    assert "wat" in capsys.readouterr().err


def test_unknown_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--frobnicate", "1"])
    assert exc.value.code == 1
    assert "config error" in capsys.readouterr().err


def test_version_subprocess():
    proc = subprocess.run([sys.executable, "-m", "torusgc.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == t.__version__


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep"
    rc = cli.main(["sweep", "--schedule", "list:0.5,0.4,0.3",
                   "--escalate", "false", "--out", str(out)] + FAST)
    assert rc == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].split(",") == list(t.CSV_COLUMNS)
    assert len(lines) == 4
    lams = [float(l.split(",")[0]) for l in lines[1:]]
    assert lams == [0.5, 0.4, 0.3]
    assert (out / "beta_lambda.dat").exists()
    assert (out / "fig_beta.png").exists()
    data = read_json(out / "sweep.json")
    assert all(r["converged"] for r in data["records"])


def test_blowup_two_lambdas(tmp_path):
    out = tmp_path / "bl"
    rc = cli.main(["blowup", "--schedule", "list:0.1,0.05",
                   "--escalate", "false", "--out", str(out)] + FAST)
    assert rc == 0
    data = read_json(out / "blowup.json")
    assert data["analysis_lambda"] == 0.05
    assert data["bubbles"]
    # two solutions cannot support a trend call
    assert "dichotomy" not in data
    b = data["bubbles"][0]
    assert b["u_peak"] > 0.5
    assert (out / "profile_ray0.dat").exists()
    assert (out / "profile_model.dat").exists()
    assert (out / "fig_profile.png").exists()


def test_compare_json(tmp_path):
    out = tmp_path / "cmp"
    rc = cli.main(["compare", "--lambda", "0.2", "--h-samples", "4",
                   "--out", str(out)] + FAST)
    assert rc == 0
    data = read_json(out / "compare.json")
    assert set(data) >= {"alpha", "phi", "monotonicity"}
    assert data["alpha"]["value"] <= 3.0
    assert data["monotonicity"]["beta_drops"] is True
    assert (out / "h_curve.dat").exists()
    assert (out / "fig_h.png").exists()


def test_lmax_three_points(tmp_path):
    out = tmp_path / "lm"
    rc = cli.main(["lmax", "--points", "0.9,0.99,0.999",
                   "--out", str(out)] + FAST)
    assert rc == 0
    data = read_json(out / "lmax.json")
    assert len(data["records"]) == 3
    assert data["report"]["pass"] is True
    for sl in data["slices"].values():
        assert abs(sl["s0"] + 2.0) < 1e-8
    assert (out / "fig_lmax.png").exists()


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["solve", "--lambda", "0.3", "--seed", "5"] + FAST
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    for name in ("w.field", "u.field"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ja = read_json(a / "solve.json")
    jb = read_json(b / "solve.json")
    ja["config"].pop("out"), jb["config"].pop("out")
    assert ja == jb


def test_warm_start_roundtrip(tmp_path):
    cold = tmp_path / "cold"
    assert cli.main(["solve", "--lambda", "0.3", "--out", str(cold)] + FAST) == 0
    warm = tmp_path / "warm"
    rc = cli.main(["solve", "--lambda", "0.28", "--out", str(warm),
                   "--warm-start", str(cold / "w.field")] + FAST)
    assert rc == 0
    jc = read_json(cold / "solve.json")
    jw = read_json(warm / "solve.json")
    assert jw["result"]["iters"] < jc["result"]["iters"]


def test_config_hash_ignores_out():
    a = RunConfig(lam=0.3, out="x")
    b = RunConfig(lam=0.3, out="y")
    c = RunConfig(lam=0.31, out="x")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(c)


def test_load_config_bool_coercion(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("escalate = no\nn = 64\n")
    cfg = load_config(str(cfgfile))
    assert cfg.escalate is False and cfg.n == 64
    assert load_config(None, {"escalate": "true"}).escalate is True
    with pytest.raises(ValueError):
        load_config(None, {"escalate": "maybe"})
