import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tlbee._rng import make_rng
from tlbee.errors import CalibrationError, ConfigError, DataFormatError
from tlbee.harness import (
    CalibrationRecord,
    ExperimentConfig,
    MseRecord,
    RnaSeqConfig,
    calibrate_bayes_error,
    calibrate_prior,
    ingest_rnaseq_csv,
    load_experiment_config,
    load_hyper,
    load_rnaseq_config,
    mse_minimizing_alpha,
    read_calibration_records,
    read_records,
    run_experiment,
    run_rnaseq_alpha_sweep,
    write_calibration_records,
    write_records,
    write_standin_csvs,
)
from tlbee.harness.rnaseq import rnaseq_hyper
from tlbee.harness.sweeps import _fixed_task, draw_prior_instance, key_of
from tlbee.model import synthetic_hyper

SMALL = dict(d=2, N_p=2, N_d=3, N=40, n_test_per_theta=40, n_test_true=2000, n_test=500,
             alphas=(0.1, 0.9), n_s=(10, 30), n_t=(5,), seed=11)


# --------------------------------------------------------------------------- config


def test_config_defaults_and_validation():
    cfg = ExperimentConfig()
    assert cfg.estimators == ("bee",) and cfg.nu == 22
    assert ExperimentConfig(experiment="obtl").classifier == "obtl"
    assert set(ExperimentConfig(experiment="obtl").estimators) == {"resub", "cv", "loo", "boot", "bee"}
    for bad in (dict(tau=0.0), dict(tau=0.6), dict(alphas=(1.0,)), dict(alphas=()),
                dict(nu=3.0), dict(N_p=0), dict(experiment="nope"), dict(estimators=("magic",)),
                dict(loop_order="sideways")):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)


def test_load_experiment_toml(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('[experiment]\nexperiment = "fixed"\nd = 3\nalphas = [0.5]\nn_s = [10, 20]\nseed = 4\n')
    cfg = load_experiment_config(p, N_p=1)
    assert (cfg.d, cfg.alphas, cfg.n_s, cfg.seed, cfg.N_p) == (3, (0.5,), (10, 20), 4, 1)
    p.write_text("[experiment]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="bogus"):
        load_experiment_config(p)
    p.write_text("[experiment\n")
    with pytest.raises(ConfigError):
        load_experiment_config(p)
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / "missing.toml")


def test_load_hyper_forms(tmp_path):
    p = tmp_path / "h.toml"
    p.write_text("[hyper]\nnu = 6.0\nkappa_t = 2.0\nkappa_s = 3.0\nm_t = [0.0, 0.0]\n"
                 "m_s = [1.0, 1.0]\nk_t = 1.0\nk_s = 0.5\nalpha = 0.4\n")
    h = load_hyper(p)
    assert h.d == 2
    assert_allclose(h.M_ts[0], 0.4 * np.sqrt(0.5) * np.eye(2))
    p.write_text("[hyper]\nnu = 6.0\n")
    with pytest.raises(ConfigError, match="missing"):
        load_hyper(p)
    p.write_text("[other]\n")
    with pytest.raises(ConfigError):
        load_hyper(p)


def test_rnaseq_config_resolves_paths(tmp_path):
    write_standin_csvs(tmp_path / "t.csv", tmp_path / "s.csv", make_rng(0), n_target=20, n_source=20)
    p = tmp_path / "r.toml"
    p.write_text('[rnaseq]\ntarget_csv = "t.csv"\nsource_csv = "s.csv"\nreplicates = 2\n')
    cfg = load_rnaseq_config(p)
    assert cfg.replicates == 2 and str(cfg.target_csv).startswith(str(tmp_path))
    p.write_text('[rnaseq]\ntarget_csv = "nope.csv"\nsource_csv = "s.csv"\n')
    with pytest.raises(ConfigError):
        load_rnaseq_config(p)


# --------------------------------------------------------------------------- calibration


def _calib_inputs(d=2, seed=0):
    h = synthetic_hyper(d, 0.0, theta=0.0)
    rng = make_rng(seed)
    Lam = [np.eye(d) * rng.uniform(10, 30) for _ in (0, 1)]
    z = [rng.standard_normal(d) for _ in (0, 1)]
    return h, Lam, z


def test_calibration_hits_target():
    h, Lam, z = _calib_inputs()
    res = calibrate_bayes_error(h, Lam, z, 0.2, tol=0.005, rng=make_rng(1), n_test=2000)
    assert abs(res.error - 0.2) <= 0.005 and res.theta > 0
    assert res.iterations >= 2
    assert_allclose(res.target[1].Lam, Lam[1])


def test_calibration_reports_unreachable_target():
    h, Lam, z = _calib_inputs()
    Lam = [Lam[0], 4 * Lam[0]]
    with pytest.raises(CalibrationError) as info:
        calibrate_bayes_error(h, Lam, z, 0.5, tol=0.005, rng=make_rng(1))
    assert info.value.best_error < 0.5 and info.value.best_theta == 0.0
    with pytest.raises(ValueError):
        calibrate_bayes_error(h, Lam, z, 0.0, rng=make_rng(1))


def test_calibrate_prior_is_deterministic():
    cfg = ExperimentConfig(**SMALL)
    a, b = calibrate_prior(cfg, (0,)), calibrate_prior(cfg, (0,))
    assert a.theta == b.theta and a.error == b.error


# --------------------------------------------------------------------------- sweeps


def test_sweep_shape_and_order():
    recs = run_experiment(ExperimentConfig(**SMALL))
    assert len(recs) == 4
    assert [(r.n_s, r.alpha) for r in recs] == [(10, 0.1), (10, 0.9), (30, 0.1), (30, 0.9)]
    for r in recs:
        assert r.n_reps == 6 and r.mse >= 0 and r.runtime_s == ""
        assert r.flags.startswith("skipped_calibrations=0")


def test_sweep_determinism_and_threads(tmp_path):
    a = run_experiment(ExperimentConfig(**SMALL))
    b = run_experiment(ExperimentConfig(**{**SMALL, "threads": 2}))
    write_records(a, tmp_path / "a.csv")
    write_records(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cells_do_not_depend_on_which_are_enabled():
    full = {(r.alpha, r.n_s): r.mse for r in run_experiment(ExperimentConfig(**SMALL))}
    part = run_experiment(ExperimentConfig(**{**SMALL, "alphas": (0.9,), "n_s": (30,)}))
    assert len(part) == 1 and part[0].mse == full[(0.9, 30)]


def test_cell_outer_loop_order_runs():
    recs = run_experiment(ExperimentConfig(**{**SMALL, "loop_order": "cell_outer", "n_s": (10,)}))
    assert len(recs) == 2 and all(r.n_reps == 6 for r in recs)


def test_mislabeled_routing():
    # the source sample must reach the estimator as target data
    cfg = ExperimentConfig(**{**SMALL, "experiment": "flipped", "mislabeled": True, "alphas": (0.5,),
                              "n_s": (7,), "n_t": (5,), "N_d": 1})
    prior = draw_prior_instance(cfg, (0,), cfg.alphas)
    import tlbee.harness.sweeps as sw
    seen = []
    orig = sw.prepare_bee

    def spy(clf, data_t, hyper, bcfg, rng):
        seen.append((data_t.domain, tuple(data_t.counts())))
        return orig(clf, data_t, hyper, bcfg, rng)

    sw.prepare_bee = spy
    try:
        _fixed_task((cfg, prior, cfg.n_s, 5, 0))
    finally:
        sw.prepare_bee = orig
    assert seen == [("target", (7, 7))]


def test_flipped_sweep_sets_flag():
    recs = run_experiment(ExperimentConfig(**{**SMALL, "experiment": "flipped", "N_p": 1, "n_s": (10,)}))
    assert all(r.experiment == "flipped" for r in recs)


def test_all_calibrations_failing_raises():
    with pytest.raises(CalibrationError):
        run_experiment(ExperimentConfig(**{**SMALL, "tau": 0.5, "N_p": 1, "calib_tol": 1e-4}))


def test_obtl_comparison_small():
    cfg = ExperimentConfig(**{**SMALL, "experiment": "obtl", "N_p": 1, "N_d": 2, "alphas": (0.9,),
                              "n_s": (20,), "boot_B": 5})
    recs = run_experiment(cfg)
    assert [r.estimator for r in recs] == list(cfg.estimators)
    assert all(r.classifier == "obtl" for r in recs)


def test_key_of():
    assert key_of(0.95) != key_of(0.9) and key_of(-0.5) >= 0


# --------------------------------------------------------------------------- records


def test_records_round_trip(tmp_path):
    recs = [MseRecord("fixed", 2, 0.5, 10, 5, 0.2, "qda", "bee", 0.001, 1e-4, 100, 0, "", "x=1"),
            MseRecord("rnaseq", 3, 0.9, 20, 5, math.nan, "qda", "bee", 0.002, 0.0, 1, 1, "", "")]
    p = write_records(recs, tmp_path / "out" / "r.csv", {"note": 1})
    back = read_records(p)
    assert back[0] == recs[0]
    assert math.isnan(back[1].tau) and back[1].mse == 0.002
    assert (tmp_path / "out" / "r.csv.meta.json").exists()
    with pytest.raises(ValueError):
        MseRecord("fixed", 2, 0.5, 10, 5, 0.2, "qda", "bee", -1.0, 0.0, 1, 0, "", "")


def test_empty_records_write_header_only(tmp_path):
    p = write_records([], tmp_path / "e.csv")
    assert p.read_text().count("\n") == 1
    assert read_records(p) == []


def test_calibration_records_round_trip(tmp_path):
    recs = [CalibrationRecord(0, 2, 0.2, True, 0.31, 0.201, 7, 3, ""),
            CalibrationRecord(1, 2, 0.2, False, 0.0, 0.15, 1, 3, "unreachable")]
    p = write_calibration_records(recs, tmp_path / "c.csv")
    assert read_calibration_records(p) == recs


# --------------------------------------------------------------------------- expression data


def _write_csv(path, rows, header="g1,g2,label"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_ingestion_standardizes_and_is_idempotent(tmp_path):
    write_standin_csvs(tmp_path / "t.csv", tmp_path / "s.csv", make_rng(3), n_target=30, n_source=40)
    cfg = RnaSeqConfig(target_csv=str(tmp_path / "t.csv"), source_csv=str(tmp_path / "s.csv"))
    a, b = ingest_rnaseq_csv(cfg), ingest_rnaseq_csv(cfg)
    np.testing.assert_array_equal(a.target.points, b.target.points)
    for ds in a:
        assert_allclose(ds.points.mean(0), 0, atol=1e-12)
        assert_allclose(ds.points.std(0), 1, rtol=1e-12)
    assert a.features == ("g1", "g2", "g3") and a.source.domain == "source"


def test_ingestion_errors(tmp_path):
    good = _write_csv(tmp_path / "s.csv", ["1,2,0", "2,1,1", "3,5,case", "0,1,control"])
    bad_cases = {
        "zero": (["1,2,0", "1,3,1", "1,4,0"], "zero-variance"),
        "cells": (["1,2,0", "1,1"], "cells"),
        "label": (["1,2,0", "1,3,maybe"], "label"),
        "value": (["1,2,0", "x,3,1"], "g1"),
        "class": (["1,2,0", "2,3,0"], "no rows"),
    }
    for name, (rows, msg) in bad_cases.items():
        t = _write_csv(tmp_path / f"{name}.csv", rows)
        with pytest.raises(DataFormatError, match=msg):
            ingest_rnaseq_csv(RnaSeqConfig(target_csv=str(t), source_csv=str(good)))
    with pytest.raises(DataFormatError, match="missing feature"):
        ingest_rnaseq_csv(RnaSeqConfig(target_csv=str(good), source_csv=str(good), features=("g9",)))


def test_rnaseq_hyper_from_data(tmp_path):
    write_standin_csvs(tmp_path / "t.csv", tmp_path / "s.csv", make_rng(1), d=2, n_target=12, n_source=9)
    data = ingest_rnaseq_csv(RnaSeqConfig(target_csv=str(tmp_path / "t.csv"), source_csv=str(tmp_path / "s.csv")))
    h = rnaseq_hyper(data.target, data.source, 0.7, 30.0)
    assert h.kappa_t.tolist() == [12, 12] and h.kappa_s.tolist() == [9, 9]
    assert_allclose(h.M_t[0], np.eye(2) / 30)
    assert_allclose(h.m_t[0], h.m_t[1])


def test_rnaseq_sweep_small(tmp_path):
    write_standin_csvs(tmp_path / "t.csv", tmp_path / "s.csv", make_rng(2), n_target=20, n_source=30)
    cfg = RnaSeqConfig(target_csv=str(tmp_path / "t.csv"), source_csv=str(tmp_path / "s.csv"),
                       n_t=5, n_s=(10,), alphas=(0.1, 0.9), replicates=3, n_perm=2, N=40,
                       n_test_per_theta=40, seed=0)
    recs = run_rnaseq_alpha_sweep(cfg)
    assert len(recs) == 2 and all(r.n_reps == 6 for r in recs)
    assert mse_minimizing_alpha(recs) in (0.1, 0.9)
    assert [r.mse for r in recs] == [r.mse for r in run_rnaseq_alpha_sweep(cfg)]
    with pytest.raises(DataFormatError):
        run_rnaseq_alpha_sweep(RnaSeqConfig(**{**cfg.__dict__, "n_t": 20}))
