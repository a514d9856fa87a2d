import io
import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from jlmedoids.cli import main, parse_config, UsageError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


@pytest.fixture
def basis8(tmp_path):
    path = tmp_path / "basis8.csv"
    assert run("gen", "--family", "basis", "--params", "n=8", "--out", path)[0] == 0
    return path


def test_ddim_basis(basis8):
    code, text = run("ddim", "--input", basis8)
    assert code == 0 and float(text) == 3.0


def test_opt_exact_basis(basis8):
    code, text = run("opt", "--input", basis8, "--k", 2, "--mode", "exact")
    doc = json.loads(text)
    assert code == 0 and doc["exact"]
    assert doc["value"] == pytest.approx(6 * math.sqrt(2), rel=1e-12)


def test_verify_identity_passes(basis8, tmp_path):
    out = tmp_path / "rep.json"
    for check in ("expansion", "contraction", "relaxed-contraction", "fixed-solution", "preserve-sum"):
        code, text = run("verify", "--input", basis8, "--check", check, "--identity", "--trials", 3, "--out", out)
        assert code == 0 and "3/3" in text
        doc = json.loads(out.read_text())
        assert doc["summary"]["rate"] == 1.0 and doc["t"] == 8


def test_project_and_net(basis8, tmp_path):
    proj = tmp_path / "p.csv"
    code, text = run("project", "--input", basis8, "--t", 5, "--seed", 1, "--out", proj, "--map-out", tmp_path / "g.bin")
    assert code == 0 and "t=5" in text
    assert (tmp_path / "g.bin").exists()
    code, text = run("net", "--input", basis8, "--rho", 1.0)
    doc = json.loads(text)
    assert code == 0 and doc["size"] == 8 and doc["packing"] and doc["covering"]


def test_usage_errors_exit_2(basis8, tmp_path):
    assert run("frobnicate")[0] == 2
    assert run("ddim")[0] == 2
    assert run("ddim", "--input", tmp_path / "missing.csv")[0] == 2
    assert run("gen", "--family", "basis", "--params", "n=7", "--out", tmp_path / "x.csv")[0] == 2
    assert run("verify", "--input", basis8, "--check", "contraction")[0] == 2  # no t
    assert run("project", "--input", basis8, "--seed", 0, "--out", tmp_path / "y.csv")[0] == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("trials = 2\n")
    assert run("experiment", "--config", bad)[0] == 2


def test_internal_error_exit_3(monkeypatch, basis8):
    import jlmedoids.cli as cli

    def boom(*a, **k):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "estimate_ddim", boom)
    assert run("ddim", "--input", basis8)[0] == 3


def test_config_validation():
    base = {"instance": {"family": "basis", "params": {"n": 8}}, "t": 4, "checks": [{"name": "expansion"}],
            "eps": 0.25}
    assert parse_config(base).ts == [4]
    for bad in ({"bogus": 1}, {"t": 0}, {"checks": [{"name": "nope"}]}, {"eps": 0.9}, {"trials": 0},
                {"recipe": {"variant": "relaxed", "eps": 0.25}}, {"workers": 0}):
        with pytest.raises(UsageError):
            parse_config({**base, **bad})


def experiment_csv(config, tmp_path, workers=None, name="out.csv"):
    out = tmp_path / name
    argv = ["experiment", "--config", config, "--out", out]
    if workers:
        argv += ["--workers", workers]
    code, _ = run(*argv)
    assert code == 0
    return out.read_bytes(), json.loads(out.with_suffix(".summary.json").read_text())


def test_experiment_byte_identical(tmp_path):
    a, sa = experiment_csv(CONFIGS / "doubling_small.toml", tmp_path, name="a.csv")
    b, _ = experiment_csv(CONFIGS / "doubling_small.toml", tmp_path, name="b.csv")
    c, _ = experiment_csv(CONFIGS / "doubling_small.json", tmp_path, name="c.csv")
    d, _ = experiment_csv(CONFIGS / "doubling_small.toml", tmp_path, workers=3, name="d.csv")
    assert a == b == c == d
    assert len(a.decode().splitlines()) == 1 + 4 * 20
    assert set(sa) == {"expansion", "contraction", "relaxed-contraction", "fixed-solution"}


def test_t_sweep_rows(tmp_path):
    data, summary = experiment_csv(CONFIGS / "t_sweep.toml", tmp_path)
    lines = data.decode().splitlines()
    assert lines[0] == "check,seed,t,eps,alpha,pass,worst_ratio,runtime_ms"
    assert len(lines) == 1 + 2 * 4 * 25
    assert sorted(summary["contraction"]["by_t"], key=int) == ["4", "8", "16", "32"]


def test_stats_csv(tmp_path):
    out = tmp_path / "s.csv"
    code, _ = run("stats", "--t", 4, 8, "--eps", 0.25, "--trials", 1000, "--out", out)
    rows = out.read_text().splitlines()
    assert code == 0 and rows[0] == "t,eps,estimate,stderr,bound" and len(rows) == 3
    code, text = run("stats", "--t", 4, 8, "--eps", 0.25, "--trials", 1000)
    assert text == out.read_text()


@pytest.mark.skipif(shutil.which("jlmedoids") is None, reason="console script not installed")
def test_console_script(basis8):
    res = subprocess.run(["jlmedoids", "ddim", "--input", str(basis8)], capture_output=True, text=True)
    assert res.returncode == 0 and float(res.stdout) == 3.0


def test_module_entry_point_usage_error():
    res = subprocess.run([sys.executable, "-m", "jlmedoids.cli", "ddim"], capture_output=True, text=True)
    assert res.returncode == 2
