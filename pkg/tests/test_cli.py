import json
import subprocess
import sys
from pathlib import Path

import pytest
from numpy.testing import assert_allclose

from tlbee.cli import main
from tlbee.harness import read_calibration_records, read_records

DATA = Path(__file__).parent / "data"
ORACLE = json.loads((DATA / "d1_oracle.json").read_text())
EST = ["estimate", "--target", str(DATA / "d1_target.csv"), "--source", str(DATA / "d1_source.csv"),
       "--hyper", str(DATA / "d1_hyper.toml")]


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    lines = [json.loads(s) for s in out.out.splitlines() if s.strip()]
    return code, lines, out.err


def test_specfun_values(capsys):
    code, (res,), _ = _run(capsys, ["specfun", "1f1", "--a", "3", "--b", "4", "--tau", "0.5", "--d", "5"])
    assert code == 0
    assert_allclose(res["value"], 6.587238, rtol=1e-6)
    code, (res,), _ = _run(capsys, ["specfun", "2f1", "--a", "3", "--b", "4", "--c", "6",
                                    "--tau", "0", "--d", "3", "--method", "laplace"])
    assert code == 0 and res["value"] == 1.0
    code, (res,), _ = _run(capsys, ["specfun", "mvgamma", "--a", "4.0", "--d", "3"])
    assert code == 0


def test_specfun_domain_error_exits_2(capsys):
    code, _, err = _run(capsys, ["specfun", "2f1", "--a", "3", "--b", "4", "--c", "6", "--tau", "1.0", "--d", "2"])
    assert code == 2 and "error" in err


def test_estimate_matches_quadrature_oracle(capsys):
    code, out, _ = _run(capsys, EST + ["--classifier", "lda", "--estimators", "tl-bee,target-bee",
                                       "--N", "2000", "--seed", "3"])
    assert code == 0
    tl, tb = out
    assert_allclose(tl["estimate"], ORACLE["target_bee_lda"], rtol=1e-10)
    # alpha = 0 in the fixture: transfer and target-only coincide
    assert tl["estimate"] == tb["estimate"]


def test_estimate_without_control_variate_is_close(capsys):
    code, (res,), _ = _run(capsys, EST + ["--estimators", "target-bee", "--no-control-variate",
                                          "--N", "20000", "--seed", "1"])
    assert code == 0
    assert_allclose(res["per_class"], ORACLE["class_errors"], atol=6e-3)


def test_constant_classifier(capsys):
    code, (res,), _ = _run(capsys, EST + ["--classifier", "constant1", "--N", "50", "--seed", "0"])
    assert code == 0 and res["estimate"] == 0.5


def test_baselines(capsys):
    code, out, _ = _run(capsys, EST + ["--estimators", "resub,loo,cv,boot", "--boot-B", "10", "--seed", "0"])
    assert code == 0 and [o["estimator"] for o in out] == ["resub", "loo", "cv", "boot"]
    assert all(0 <= o["estimate"] <= 1 for o in out)


def test_estimate_usage_errors(capsys):
    assert main(EST + ["--N", "50"]) == 2  # missing seed
    assert main(["estimate", "--target", str(DATA / "d1_target.csv"), "--seed", "1"]) == 2
    assert main(EST[:3] + ["--estimators", "tl-bee", "--hyper", str(DATA / "d1_hyper.toml"), "--seed", "1"]) == 2
    assert main(["estimate", "--target", "/nonexistent.csv", "--estimators", "resub", "--seed", "1"]) == 2
    with pytest.raises(SystemExit):
        main(EST + ["--estimators", "magic", "--seed", "1"])
    capsys.readouterr()


CFG = """[experiment]
experiment = "fixed"
d = 2
alphas = [0.5]
n_s = [10]
n_t = [5]
N_p = 1
N_d = 3
N = 40
n_test_per_theta = 40
n_test_true = 2000
n_test = 500
"""


def test_simulate_one_cell_is_reproducible(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CFG)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code, (res,), _ = _run(capsys, ["simulate", "--config", str(cfg), "--seed", "7", "--threads", "1", "--out", str(a)])
    assert code == 0 and res["records"] == 1
    assert main(["--seed", "7", "--threads", "1", "simulate", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    (rec,) = read_records(a)
    assert rec.seed == 7 and rec.alpha == 0.5
    assert Path(str(a) + ".meta.json").exists()


def test_simulate_requires_seed_and_config(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CFG)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    with pytest.raises(SystemExit):
        main(["simulate", "--seed", "1"])
    cfg.write_text(CFG + "unknown_key = 1\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "x.csv")]) == 2
    capsys.readouterr()


def test_calibrate_partial_exit(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(CFG.replace("N_p = 1", "N_p = 2") + "tau = 0.5\ncalib_tol = 0.0001\n")
    out = tmp_path / "cal.csv"
    code, (res,), _ = _run(capsys, ["calibrate", "--config", str(cfg), "--seed", "0", "--threads", "1",
                                    "--out", str(out)])
    assert code == 3 and res["converged"] < res["total"]
    assert len(read_calibration_records(out)) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "tlbee", "specfun", "incbeta", "--x", "0.5", "--a", "2", "--b", "2"],
                       capture_output=True, text=True, check=True)
    assert_allclose(json.loads(r.stdout)["value"], 0.5)
