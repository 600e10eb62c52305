import json
import shutil
import subprocess
import sys
from importlib import resources

import jsonschema
import numpy as np
import pytest

from dualsvd.cli import run_cli
from dualsvd.io import parse_container, read_matrix_csv, serialize_container
from dualsvd.matrix import DualMatrix
from dualsvd.testing import random_feasible


def _schema(name):
    return json.loads(resources.files("dualsvd").joinpath(f"schemas/{name}.schema.json").read_text())


def _validate(path, name):
    payload = json.loads(path.read_text())
    jsonschema.validate(payload, _schema(name))
    return payload


@pytest.fixture
def feasible(tmp_path, rng):
    a = random_feasible(rng, 6, 4, sigma=[3.0, 2.0, 1.0])
    serialize_container(a, tmp_path / "a")
    return a, tmp_path / "a"


@pytest.fixture
def infeasible(tmp_path):
    a = DualMatrix(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 1.0]]))
    serialize_container(a, tmp_path / "bad")
    return tmp_path / "bad"


SCENE = ["--grid", "12x16", "--standing", "2,13,1,0.31415926535897931,2",
         "--traveling", "8,3,8,12,1,0.6283185307179586,1.5", "--frames", "41"]


def test_cdsvd_writes_factors(tmp_path, feasible):
    a, path = feasible
    assert run_cli(["cdsvd", "--input", str(path), "--output", str(tmp_path / "out")]) == 0
    payload = _validate(tmp_path / "out" / "cdsvd.json", "cdsvd")
    assert payload["rank"] == 3
    assert payload["config"]["command"] == "cdsvd"
    u = parse_container(tmp_path / "out" / "U")
    s = parse_container(tmp_path / "out" / "Sigma")
    v = parse_container(tmp_path / "out" / "V")
    from dualsvd.matrix import conj_transpose, dmat_mul
    back = dmat_mul(dmat_mul(u, s), conj_transpose(v))
    np.testing.assert_allclose(back.standard, a.standard, atol=1e-12)
    np.testing.assert_allclose(back.infinitesimal, a.infinitesimal, atol=1e-12)


def test_cdsvd_normalize_gauge(tmp_path, feasible):
    _, path = feasible
    assert run_cli(["cdsvd", "--input", str(path), "--output", str(tmp_path / "g"), "--normalize-gauge"]) == 0


def test_cdsvd_missing_input_exit_3(tmp_path, capsys):
    assert run_cli(["cdsvd", "--input", str(tmp_path / "missing"), "--output", str(tmp_path / "o")]) == 3
    assert "missing" in capsys.readouterr().err


def test_malformed_container_exit_3(tmp_path):
    (tmp_path / "m.standard.csv").write_text("1,oops\n")
    (tmp_path / "m.infinitesimal.csv").write_text("1,2\n")
    assert run_cli(["cdsvd", "--input", str(tmp_path / "m"), "--output", str(tmp_path / "o")]) == 3


@pytest.mark.parametrize("cmd", ["cdsvd", "pinv"])
def test_infeasible_exit_2_prints_residual(tmp_path, infeasible, capsys, cmd):
    code = run_cli([cmd, "--input", str(infeasible), "--output", str(tmp_path / "o")])
    assert code == 2
    out = capsys.readouterr().out
    assert "existence residual 1 " in out


def test_usage_errors_exit_1(tmp_path, feasible, capsys):
    _, path = feasible
    assert run_cli([]) == 1
    assert run_cli(["lowrank", "--input", str(path)]) == 1
    assert run_cli(["lowrank", "--input", str(path), "-k", "9", "--output", str(tmp_path / "l")]) == 1
    assert run_cli(["cdsvd", "--input", str(path), "--output", str(tmp_path / "o"), "--tol-group", "-1"]) == 1
    assert run_cli(["simulate", "--grid", "4x4", "--frames", "5", "--output", str(tmp_path / "s.csv")]) == 1
    assert run_cli(["simulate", "--grid", "4x4", "--standing", "9,9,1,1,1", "--frames", "5",
                    "--output", str(tmp_path / "s.csv")]) == 1
    capsys.readouterr()


def test_thread_env_validation(monkeypatch, tmp_path, feasible):
    _, path = feasible
    monkeypatch.setenv("DUALSVD_THREADS", "bogus")
    assert run_cli(["cdsvd", "--input", str(path), "--output", str(tmp_path / "o")]) == 1
    monkeypatch.setenv("DUALSVD_THREADS", "1")
    assert run_cli(["cdsvd", "--input", str(path), "--output", str(tmp_path / "o")]) == 0


def test_help_exit_0(capsys):
    assert run_cli(["--help"]) == 0
    text = capsys.readouterr().out
    for sub in ("cdsvd", "lowrank", "pinv", "simulate", "waves"):
        assert sub in text
    assert run_cli(["waves", "detect", "--help"]) == 0
    assert "--tau-pair" in capsys.readouterr().out


def test_console_script_help():
    exe = shutil.which("dualsvd")
    cmd = [exe] if exe else [sys.executable, "-m", "dualsvd.cli"]
    proc = subprocess.run(cmd + ["--help"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "usage" in proc.stdout


def test_lowrank_and_pinv_reports(tmp_path, feasible):
    a, path = feasible
    assert run_cli(["lowrank", "--input", str(path), "-k", "2", "--output", str(tmp_path / "low")]) == 0
    rep = _validate(tmp_path / "low.json", "lowrank")
    assert rep["k"] == 2
    assert parse_container(tmp_path / "low").shape == a.shape
    assert run_cli(["pinv", "--input", str(path), "--output", str(tmp_path / "pi")]) == 0
    rep = _validate(tmp_path / "pi.json", "pinv")
    assert max(rep["penrose_residuals"].values()) <= 1e-10
    assert parse_container(tmp_path / "pi").shape == (4, 6)


def test_simulate_is_deterministic(tmp_path):
    args = SCENE + ["--noise-snr", "4", "--seed", "7"]
    assert run_cli(["simulate", *args, "--output", str(tmp_path / "r1.csv")]) == 0
    assert run_cli(["simulate", *args, "--output", str(tmp_path / "r2.csv")]) == 0
    assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()
    j1 = _validate(tmp_path / "r1.json", "simulate")
    j2 = _validate(tmp_path / "r2.json", "simulate")
    j1["config"]["flags"].pop("output")
    j2["config"]["flags"].pop("output")
    assert j1 == j2 and j1["config"]["seed"] == 7
    assert run_cli(["simulate", *SCENE, "--noise-snr", "4", "--seed", "8", "--output", str(tmp_path / "r3.csv")]) == 0
    assert (tmp_path / "r3.csv").read_bytes() != (tmp_path / "r1.csv").read_bytes()


def test_simulate_container_output(tmp_path):
    assert run_cli(["simulate", *SCENE, "--derive", "one-sided-2nd", "--output", str(tmp_path / "sim")]) == 0
    a = parse_container(tmp_path / "sim")
    assert a.shape == (12 * 16, 39)
    _validate(tmp_path / "sim.json", "simulate")


def test_waves_detect_and_movie(tmp_path, capsys):
    assert run_cli(["simulate", *SCENE, "--output", str(tmp_path / "series.csv")]) == 0
    code = run_cli(["waves", "detect", "--input", str(tmp_path / "series.csv"), "-K", "3", "--grid", "12x16",
                    "--report", str(tmp_path / "det.json")])
    assert code == 0
    rep = _validate(tmp_path / "det.json", "waves_detect")
    assert sorted(rep["classification"]) == ["standing", "traveling", "traveling"]
    pair = rep["pairs"][0]
    assert pair["alpha"] * pair["beta"] < 0
    peaks = sorted(map(tuple, rep["traveling_peaks"][0]["peaks"]))
    assert peaks == [(8, 3), (8, 12)]
    assert rep["standing_peaks"][0]["peak"] == [2, 13]

    code = run_cli(["waves", "detect", "--input", str(tmp_path / "series.csv"), "-K", "3",
                    "--report", str(tmp_path / "det2.json"),
                    "--extract-pair", f"{pair['x']},{pair['y']}", "--movie", str(tmp_path / "movie")])
    assert code == 0
    movie = read_matrix_csv(tmp_path / "movie.csv")
    assert movie.shape == (192, 40)
    _validate(tmp_path / "det2.json", "waves_detect")
    capsys.readouterr()


def test_waves_detect_grid_mismatch(tmp_path):
    assert run_cli(["simulate", *SCENE, "--output", str(tmp_path / "series.csv")]) == 0
    assert run_cli(["waves", "detect", "--input", str(tmp_path / "series.csv"), "--grid", "5x5",
                    "--report", str(tmp_path / "d.json")]) == 1
    assert run_cli(["waves", "detect", "--input", str(tmp_path / "series.csv"),
                    "--report", str(tmp_path / "d.json"), "--movie", str(tmp_path / "m")]) == 1


def test_waves_rank_report(tmp_path):
    assert run_cli(["simulate", *SCENE, "--output", str(tmp_path / "series.csv")]) == 0
    assert run_cli(["waves", "rank", "--input", str(tmp_path / "series.csv"), "--true-rank", "3",
                    "--report", str(tmp_path / "rank.json")]) == 0
    rep = _validate(tmp_path / "rank.json", "waves_rank")
    assert rep["estimated_rank"] == 3 and rep["true_rank"] == 3


def test_waves_detect_near_degenerate_pair_needs_grouping(tmp_path):
    # the standing bump overlaps one traveling bump and splits the pair's equal singular values
    scene = [a.replace("2,13,1,", "3,4,1,") for a in SCENE]
    assert run_cli(["simulate", *scene, "--output", str(tmp_path / "s.csv")]) == 0
    base = ["waves", "detect", "--input", str(tmp_path / "s.csv"), "-K", "3", "--grid", "12x16"]
    assert run_cli(base + ["--report", str(tmp_path / "d1.json")]) == 0
    assert "standing" not in json.loads((tmp_path / "d1.json").read_text())["classification"]
    assert run_cli(base + ["--tol-group", "1e-5", "--report", str(tmp_path / "d2.json")]) == 0
    rep = json.loads((tmp_path / "d2.json").read_text())
    assert sorted(rep["classification"]) == ["standing", "traveling", "traveling"]
    assert sorted(map(tuple, rep["traveling_peaks"][0]["peaks"])) == [(8, 3), (8, 12)]
