from __future__ import annotations

import json
from pathlib import Path

import pytest

from srpolymer.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path: Path, name: str, text: str) -> Path:
    p = tmp_path / name
    p.write_text(text)
    return p


SMALL_MC = """
[experiment]
kind = msd-scan
seed = 3
name = small

[model]
alpha = 1.5
beta = 1.0
h = 0.3,0.1
n = 4, 8, 16

[mcmc]
n_sweeps = 3000
burn_in = 200
n_replicas = 2
"""


def csv_bytes(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv")) if not p.name.startswith("summary")}


def test_oracle_suite_exit_zero(tmp_path):
    assert main(["run", str(CONFIGS / "oracle_suite.ini"), "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert "oracle_suite.csv" in manifest["outputs"]


def test_alpha_below_one_rejected(tmp_path, capsys):
    cfg = write(tmp_path, "bad.ini", """
[experiment]
kind = gamma-fit
seed = 0

[model]
alpha = 0.9
beta = 1.0
h = 0,0
n = 8, 16, 32

[mcmc]
n_sweeps = 2000
burn_in = 100

[gamma-fit]
coupling_sum_check = yes
""")
    assert main(["run", str(cfg), "--out", str(tmp_path / "bad")]) == 2
    assert "alpha > 1" in capsys.readouterr().err
    assert not (tmp_path / "bad").exists()


@pytest.mark.parametrize("text", [
    "[experiment]\nkind = nope\nseed = 0\n[model]\nbeta = 1\nn = 2\n",
    "[experiment]\nkind = enumerate\nseed = 0\n[model]\nalpha = 1.5\nbeta = 1\nh = 0,0\nn = 11\n",
    "[experiment]\nkind = enumerate\nseed = 0\n[model]\nalpha = 1.5\nbeta = -1\nh = 0,0\nn = 3\n",
    "[experiment]\nkind = msd-scan\nseed = 0\n[model]\nalpha = 1.5\nbeta = 1\nh = 0,0\nn = 3\n",
])
def test_validation_errors(tmp_path, text):
    assert main(["run", str(write(tmp_path, "c.ini", text)), "--out", str(tmp_path / "x")]) == 2


def test_exact_run_is_byte_identical(tmp_path):
    cfg = str(CONFIGS / "enumerate.ini")
    assert main(["run", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", cfg, "--out", str(tmp_path / "b")]) == 0
    a, b = csv_bytes(tmp_path / "a"), csv_bytes(tmp_path / "b")
    assert a and a == b


def test_mc_run_is_byte_identical(tmp_path):
    cfg = str(write(tmp_path, "mc.ini", SMALL_MC))
    for out in ("a", "b"):
        assert main(["run", cfg, "--threads", "2", "--out", str(tmp_path / out)]) in (0, 3)
    assert csv_bytes(tmp_path / "a") == csv_bytes(tmp_path / "b")
    assert main(["run", cfg, "--threads", "2", "--seed", "4", "--out", str(tmp_path / "c")]) in (0, 3)
    assert csv_bytes(tmp_path / "a") != csv_bytes(tmp_path / "c")


def test_csv_header_carries_config_hash(tmp_path):
    assert main(["run", str(CONFIGS / "enumerate.ini"), "--out", str(tmp_path / "a")]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    first = (tmp_path / "a" / "enumerate.csv").read_text().splitlines()[0]
    assert first == f"# config_hash={manifest['config_hash']}"
    assert (tmp_path / "a" / "config.ini").is_file()


def test_default_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SRPOLYMER_OUT", str(tmp_path / "root"))
    assert main(["run", str(CONFIGS / "enumerate.ini")]) == 0
    runs = list((tmp_path / "root").iterdir())
    assert len(runs) == 1 and runs[0].name.startswith("enumerate-")


def test_report(tmp_path, capsys):
    out = tmp_path / "g"
    cfg = write(tmp_path, "g.ini", SMALL_MC.replace("msd-scan", "gamma-fit"))
    assert main(["run", str(cfg), "--out", str(out)]) in (0, 3)
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "gamma_hat" in text and "regime" in text
    assert (out / "summary.txt").is_file() and (out / "summary.csv").is_file()


def test_report_empty_dir(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["report", str(tmp_path / "empty")]) == 2


def test_report_corrupt_manifest(tmp_path):
    d = tmp_path / "bad"
    d.mkdir()
    (d / "manifest.json").write_text("{not json")
    assert main(["report", str(d)]) == 2


def test_threads_must_be_positive(tmp_path):
    assert main(["run", str(CONFIGS / "enumerate.ini"), "--threads", "0", "--out", str(tmp_path / "z")]) == 2
