import contextlib
import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nmlclust.cli import main
from nmlclust.complexity import HyperParams, rnml_codelength_gmm
from nmlclust.exponential_family import GammaModel, nml_codelength
from nmlclust.gaussian import DomainParams, nml_codelength_gaussian
from nmlclust.harness import fmt
from nmlclust.selection import EMConfig, select_k

SIX = "-5\n-5.2\n-4.8\n5\n5.2\n4.8\n"


@pytest.fixture
def six(tmp_path):
    p = tmp_path / "six.csv"
    p.write_text(SIX)
    return p


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_codelength_gamma_zero(tmp_path, capsys):
    p = tmp_path / "one.csv"
    p.write_text("1\n")
    code, out, _ = run(capsys, "codelength", "--family", "gamma", "--k", 1, "--theta-min", 1, "--theta-max", 2.718281828, p)
    assert code == 0
    value, unit = out.split()
    assert unit == "nats" and abs(float(value)) <= 1e-9
    assert value == fmt(nml_codelength(GammaModel(1, 1, 2.718281828), [1.0]))


def test_codelength_bits_and_header(tmp_path, capsys):
    p = tmp_path / "g.csv"
    p.write_text("x,y\n0,1\n2,0\n1,3\n-1,2\n")
    x = np.array([[0, 1], [2, 0], [1, 3], [-1, 2]], dtype=float)
    code, out, _ = run(capsys, "codelength", "--family", "gaussian", "--R", 10, "--lambda-min", "0.1", "--header", "--bits", p)
    assert code == 0
    expected = nml_codelength_gaussian(x, DomainParams(10, [0.1, 0.1])) / math.log(2)
    assert out.split() == [fmt(expected), "bits"]


def test_codelength_gmm_rnml_matches_library(six, tmp_path, capsys):
    z = tmp_path / "z.csv"
    z.write_text("1\n1\n1\n2\n2\n2\n")
    code, out, _ = run(capsys, "codelength", "--family", "gmm-rnml", "--labels", z, "--K", 2, "--gamma-ratio", math.e**2, six)
    assert code == 0
    x = np.loadtxt(six)
    assert out.split()[0] == fmt(rnml_codelength_gmm(x, np.array([1, 1, 1, 2, 2, 2]), 2, HyperParams.from_ratio(math.e**2)))
    code, out, _ = run(capsys, "codelength", "--family", "gmm-nml", "--labels", z, "--K", 2, "--R", 30, "--lambda-min", 0.01, six)
    assert code == 0 and float(out.split()[0]) == pytest.approx(10.978431831918577, abs=1e-7)


def test_select_k_writes_report(six, tmp_path, capsys):
    report = tmp_path / "report.csv"
    manifest = tmp_path / "run.json"
    code, out, _ = run(capsys, "select-k", six, "--k-range", "1..3", "--seed", 1, "--restarts", 5, "--report", report, "--manifest", manifest)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines == ["RNML: K=2", "NML: K=2", "AIC: K=2", "BIC: K=2"]
    rows = list(csv.DictReader(report.open()))
    assert len(rows) == 12 and set(rows[0]) == {"K", "criterion", "score", "chosen"}
    lib = select_k(np.loadtxt(six), (1, 2, 3), config=EMConfig(seed=1, n_restarts=5))
    for row in rows:
        assert row["score"] == fmt(lib.scores[row["criterion"]][int(row["K"])])
    meta = json.loads(manifest.read_text())
    assert meta["seed"] == 1 and meta["k_range"] == [1, 2, 3] and meta["gamma"]["R2"] == 1e4


def test_select_k_repeatable(six, tmp_path, capsys):
    outs = []
    for name in ("a.csv", "b.csv"):
        run(capsys, "select-k", six, "--k-range", "1,2", "--seed", 7, "--report", tmp_path / name)
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_cluster_command(six, tmp_path, capsys):
    out_path = tmp_path / "z.csv"
    code, out, _ = run(capsys, "cluster", six, "--K", 2, "--seed", 5, "--out", out_path)
    assert code == 0 and "log-likelihood" in out
    labels = [int(v) for v in out_path.read_text().split()[1:]]
    assert labels[:3] == [labels[0]] * 3 and labels[3:] == [3 - labels[0]] * 3


@pytest.mark.parametrize(
    "argv,status",
    [
        (["codelength", "--family", "gamma", "--k", "1", "--theta-min", "1", "--theta-max", "2", "missing.csv"], 3),
        (["codelength", "--family", "gamma", "--k", "1", "--theta-min", "5", "--theta-max", "9", "DATA"], 4),
        (["codelength", "--family", "gaussian", "--R", "10", "--lambda-min", "100", "DATA"], 4),
        (["codelength", "--family", "gamma", "--k", "1", "DATA"], 6),
        (["codelength", "--family", "gmm-rnml", "--labels", "DATA", "--K", "2", "DATA"], 3),
        (["cluster", "DATA", "--K", "5", "--seed", "1"], 5),
        (["select-k", "DATA", "--k-range", "1..2", "--seed", "1", "--criteria", "MDL"], 6),
        (["select-k", "DATA", "--k-range", "1..2"], 2),
        (["select-k", "DATA", "--k-range", "0..2", "--seed", "1"], 2),
        (["cluster", "DATA", "--K", "2", "--seed", "1", "--bogus"], 2),
        (["codelength", "--family", "poisson", "DATA"], 2),
    ],
)
def test_exit_statuses(six, capsys, argv, status):
    argv = [str(six) if a == "DATA" else a for a in argv]
    with pytest.raises(SystemExit) if status == 2 else contextlib.nullcontext():
        code = main(argv)
        assert code == status
    if status == 2:
        return
    err = capsys.readouterr().err
    assert len(err.strip().splitlines()) == 1


def test_usage_error_status_via_subprocess(six):
    r = subprocess.run([sys.executable, "-m", "nmlclust.cli", "cluster", str(six), "--K", "2", "--seed", "1", "--bogus"], capture_output=True, text=True)
    assert r.returncode == 2
    r = subprocess.run([sys.executable, "-m", "nmlclust.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "exit status" in r.stdout and "6 configuration error" in r.stdout


def test_missing_file_leaves_no_output(tmp_path, capsys):
    report = tmp_path / "report.csv"
    code, _, err = run(capsys, "select-k", tmp_path / "nope.csv", "--k-range", "1..2", "--seed", 1, "--report", report)
    assert code == 3 and "not found" in err
    assert not report.exists()


def test_sweep_commands(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"seed": 2, "m_list": [1], "k_true_list": [2], "n_list": [60, 90], "trials": 2, "restarts": 2, "k_extra": 1, "thetas": [100, 1e6]}))
    code, out, _ = run(capsys, "sweep", cfg, "--out-dir", tmp_path / "s")
    assert code == 0 and "least n" in out
    for name in ("accuracy.csv", "least_n.csv", "theta_sweep.csv", "manifest.json"):
        assert (tmp_path / "s" / name).exists()
    assert json.loads((tmp_path / "s" / "manifest.json").read_text())["seed"] == 2
    code, _, _ = run(capsys, "theta-sweep", cfg, "--out-dir", tmp_path / "t")
    assert code == 0
    assert (tmp_path / "t" / "theta_sweep.csv").read_bytes() == (tmp_path / "s" / "theta_sweep.csv").read_bytes()
    code, _, _ = run(capsys, "sweep", cfg, "--out-dir", tmp_path / "u", "--seed", 99)
    assert json.loads((tmp_path / "u" / "manifest.json").read_text())["seed"] == 99


def test_sweep_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"seed": 1, "colour": "red"}))
    code, _, err = run(capsys, "sweep", cfg, "--out-dir", tmp_path / "o")
    assert code == 6 and "colour" in err
    assert not (tmp_path / "o").exists()
    cfg.write_text(json.dumps({"seed": 1}))
    code, _, _ = run(capsys, "theta-sweep", cfg, "--out-dir", tmp_path / "o")
    assert code == 6
