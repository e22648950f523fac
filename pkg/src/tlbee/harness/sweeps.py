"""Synthetic MSE sweeps over (alpha, n_s, n_t) with outer prior replicates."""

import logging
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .._rng import make_rng
from ..classifiers import (
    fixed_rule,
    lda_from_params,
    obtl_rule,
    qda_from_params,
    true_error,
)
from ..errors import CalibrationError
from ..estimators import BeeConfig, baseline_estimates, finish_bee, prepare_bee
from ..model import (
    SOURCE,
    TARGET,
    DomainClassParams,
    bartlett_factor,
    generate_dataset,
    mean_from_noise,
    synthetic_hyper,
    wishart_from_factor,
)
from .calibration import calibrate_bayes_error
from .records import MseRecord

log = logging.getLogger(__name__)

# stream identifiers for make_rng(seed, stream, ...)
PRIOR, CALIB, TRUTH, TARGET_DATA, SOURCE_DATA, BEE, BASELINE = range(1, 8)


def key_of(x):
    """Non-negative integer key for a sweep coordinate (handles signed floats)."""
    return int(round((float(x) + 1.0) * 1e9))


def pmap(fn, tasks, threads=1):
    """Ordered map, in-process or over a process pool."""
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=int(threads)) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


@dataclass(frozen=True)
class PriorInstance:
    """One calibrated draw of the true parameters for a set of ``alpha`` values.

    The target block of ``L(alpha) A A^T L(alpha)^T`` does not depend on
    ``alpha``, so all ``alpha`` share the target parameters, the
    calibration and the fixed classifier; only source parameters differ.
    """

    key: tuple
    theta: float
    calib_error: float
    calib_iterations: int
    target: tuple
    sources: dict
    hypers: dict
    clf: object
    true_error: float


def _hyper(cfg, alpha, theta):
    return synthetic_hyper(cfg.d, alpha, theta=theta, nu=cfg.nu, kappa=cfg.kappa,
                           k_t=cfg.k_t, k_s=cfg.k_s, source_offset=cfg.source_offset,
                           flip_source=cfg.flip_source, c=cfg.c)


def _prior_noise(cfg, key):
    d = cfg.d
    rng = make_rng(cfg.seed, PRIOR, *key)
    A = [bartlett_factor(cfg.nu, 2 * d, rng) for _ in (0, 1)]
    z_t = [rng.standard_normal(d) for _ in (0, 1)]
    z_s = [rng.standard_normal(d) for _ in (0, 1)]
    return A, z_t, z_s


def calibrate_prior(cfg, key):
    """Draw the target precisions of prior replicate ``key`` and calibrate to ``cfg.tau``.

    Returns
    -------
    CalibrationResult

    Raises
    ------
    CalibrationError
    """
    d = cfg.d
    A, z_t, _ = _prior_noise(cfg, key)
    base = _hyper(cfg, 0.0, 0.0)
    Lam_t = [wishart_from_factor(base.scale_matrix(y), A[y])[:d, :d] for y in (0, 1)]
    return calibrate_bayes_error(base, Lam_t, z_t, cfg.tau, cfg.calib_tol,
                                 make_rng(cfg.seed, CALIB, *key), cfg.n_test, cfg.calib_max_iter)


def draw_prior_instance(cfg, key, alphas):
    """Draw precisions and mean noise, calibrate to ``cfg.tau``, build the sources.

    Raises
    ------
    CalibrationError
        Propagated from the calibration.
    """
    d = cfg.d
    A, _, z_s = _prior_noise(cfg, key)
    cal = calibrate_prior(cfg, key)
    sources, hypers = {}, {}
    for alpha in alphas:
        hyper = _hyper(cfg, alpha, cal.theta)
        src = []
        for y in (0, 1):
            Lam_s = wishart_from_factor(hyper.scale_matrix(y), A[y])[d:, d:]
            src.append(DomainClassParams(mean_from_noise(hyper.m_s[y], hyper.kappa_s[y], Lam_s, z_s[y]), Lam_s))
        sources[alpha] = tuple(src)
        hypers[alpha] = hyper
    clf, err = None, float("nan")
    if cfg.classifier in ("qda", "lda"):
        make = qda_from_params if cfg.classifier == "qda" else lda_from_params
        clf = make(*cal.target)
        err = true_error(clf, *cal.target, c=cfg.c, n_test=cfg.n_test_true,
                         rng=make_rng(cfg.seed, TRUTH, *key))[0]
    return PriorInstance(tuple(key), cal.theta, cal.error, cal.iterations, cal.target,
                         sources, hypers, clf, float(err))


def _units(cfg):
    """Prior-draw units: ``(key, alphas, n_s list, n_t list)``."""
    units = []
    for p in range(cfg.N_p):
        if cfg.loop_order == "prior_outer":
            units.append(((p,), cfg.alphas, cfg.n_s, cfg.n_t))
        else:
            for n_t in cfg.n_t:
                for n_s in cfg.n_s:
                    for a in cfg.alphas:
                        units.append(((p, key_of(a), n_s, n_t), (a,), (n_s,), (n_t,)))
    return units


def _prior_task(args):
    cfg, unit = args
    key, alphas = unit[0], unit[1]
    try:
        return draw_prior_instance(cfg, key, alphas), None
    except CalibrationError as exc:
        return None, str(exc)


def _bee_cfg(cfg):
    return BeeConfig(N=cfg.N, n_test_per_theta=cfg.n_test_per_theta,
                     use_control_variate=cfg.use_control_variate, c=cfg.c)


def _baselines(cfg, rule, data_t, rng):
    names = [e for e in cfg.estimators if e != "bee"]
    if not names:
        return {}
    est = baseline_estimates(rule, data_t, rng, k=cfg.cv_k, reps=cfg.cv_reps, B=cfg.boot_B)
    return {n: est[n] for n in names}


def _fixed_task(args):
    """All cells of one (prior, n_t, replicate); BEE draws reused across alpha and n_s."""
    cfg, prior, n_s_list, n_t, r = args
    bcfg = _bee_cfg(cfg)
    pk = prior.key
    t0, t1 = prior.target
    data_t = generate_dataset(t0, t1, n_t, n_t, make_rng(cfg.seed, TARGET_DATA, *pk, n_t, r))
    rule = fixed_rule(prior.clf)
    out = []
    prep = None
    base = None
    for n_s in n_s_list:
        for alpha in prior.hypers:
            hyper = prior.hypers[alpha]
            s0, s1 = prior.sources[alpha]
            # same source noise for every alpha: common random numbers
            data_s = generate_dataset(s0, s1, n_s, n_s,
                                      make_rng(cfg.seed, SOURCE_DATA, *pk, n_t, n_s, r), SOURCE)
            if cfg.mislabeled:
                slot_t, slot_s = data_s.with_domain(TARGET), data_t.with_domain(SOURCE)
                rng_b = make_rng(cfg.seed, BEE, *pk, n_t, n_s, key_of(alpha), r)
                p = prepare_bee(prior.clf, slot_t, hyper, bcfg, rng_b) if "bee" in cfg.estimators else None
                b = _baselines(cfg, rule, slot_t, make_rng(cfg.seed, BASELINE, *pk, n_t, n_s, key_of(alpha), r))
            else:
                slot_t, slot_s = data_t, data_s
                if prep is None and "bee" in cfg.estimators:
                    prep = prepare_bee(prior.clf, slot_t, hyper, bcfg, make_rng(cfg.seed, BEE, *pk, n_t, r))
                if base is None:
                    base = _baselines(cfg, rule, slot_t, make_rng(cfg.seed, BASELINE, *pk, n_t, r))
                p, b = prep, base
            ests = dict(b)
            flags = ()
            if p is not None:
                res = finish_bee(p, slot_s, hyper, bcfg)
                ests["bee"] = res.estimate
                flags = res.flags
            for name in cfg.estimators:
                out.append((alpha, n_s, n_t, name, (ests[name] - prior.true_error) ** 2,
                            any("clipped" in f for f in flags) and name == "bee"))
    return out


def _obtl_task(args):
    """One replicate of every cell: trained OBTL rule, its MC true error, all estimators."""
    cfg, prior, n_s_list, n_t, r = args
    bcfg = _bee_cfg(cfg)
    pk = prior.key
    t0, t1 = prior.target
    data_t = generate_dataset(t0, t1, n_t, n_t, make_rng(cfg.seed, TARGET_DATA, *pk, n_t, r))
    out = []
    for n_s in n_s_list:
        for alpha in prior.hypers:
            hyper = prior.hypers[alpha]
            s0, s1 = prior.sources[alpha]
            data_s = generate_dataset(s0, s1, n_s, n_s,
                                      make_rng(cfg.seed, SOURCE_DATA, *pk, n_t, n_s, r), SOURCE)
            cell = (*pk, n_t, n_s, key_of(alpha), r)
            rule = obtl_rule(hyper, data_s)
            clf = rule(data_t)
            truth = true_error(clf, t0, t1, c=cfg.c, n_test=cfg.n_test_true,
                               rng=make_rng(cfg.seed, TRUTH, *cell))[0]
            ests = _baselines(cfg, rule, data_t, make_rng(cfg.seed, BASELINE, *cell))
            clipped = False
            if "bee" in cfg.estimators:
                prep = prepare_bee(clf, data_t, hyper, bcfg, make_rng(cfg.seed, BEE, *cell))
                res = finish_bee(prep, data_s, hyper, bcfg)
                ests["bee"] = res.estimate
                clipped = any("clipped" in f for f in res.flags)
            for name in cfg.estimators:
                out.append((alpha, n_s, n_t, name, (ests[name] - truth) ** 2,
                            clipped and name == "bee"))
    return out


def _run(cfg, task_fn):
    t_start = time.perf_counter()
    units = _units(cfg)
    priors = pmap(_prior_task, [(cfg, u) for u in units], cfg.threads)
    skipped = defaultdict(int)
    tasks = []
    for unit, (prior, err) in zip(units, priors):
        if prior is None:
            log.warning("calibration failed for prior %s: %s", unit[0], err)
            for n_t in unit[3]:
                for n_s in unit[2]:
                    for a in unit[1]:
                        skipped[(a, n_s, n_t)] += 1
            continue
        log.info("prior %s: theta=%.4g calibrated error=%.4f true error=%.4f",
                 unit[0], prior.theta, prior.calib_error, prior.true_error)
        for n_t in unit[3]:
            for r in range(cfg.N_d):
                tasks.append((cfg, prior, unit[2], n_t, r))
    if not tasks:
        raise CalibrationError(f"all {len(units)} prior calibrations failed")
    log.info("running %d replicate tasks on %d worker(s)", len(tasks), cfg.threads)
    results = pmap(task_fn, tasks, cfg.threads)
    sq, clips = defaultdict(list), defaultdict(int)
    for chunk in results:
        for alpha, n_s, n_t, name, s, clipped in chunk:
            sq[(alpha, n_s, n_t, name)].append(s)
            clips[(alpha, n_s, n_t, name)] += int(clipped)
    elapsed = time.perf_counter() - t_start
    records = []
    for n_t in cfg.n_t:
        for n_s in cfg.n_s:
            for alpha in cfg.alphas:
                for name in cfg.estimators:
                    vals = np.asarray(sq.get((alpha, n_s, n_t, name), []))
                    if vals.size == 0:
                        continue
                    flags = [f"skipped_calibrations={skipped[(alpha, n_s, n_t)]}"]
                    if clips[(alpha, n_s, n_t, name)]:
                        flags.append(f"clipped={clips[(alpha, n_s, n_t, name)]}")
                    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
                    records.append(MseRecord(
                        cfg.experiment, cfg.d, float(alpha), int(n_s), int(n_t), float(cfg.tau),
                        cfg.classifier, name, float(vals.mean()), se, int(vals.size), int(cfg.seed),
                        f"{elapsed:.3f}" if cfg.record_runtime else "", ";".join(flags)))
    return records


def run_fixed_classifier_sweep(cfg):
    """MSE of the estimators for the true-parameter QDA or LDA rule.

    For each outer prior draw the target precisions are drawn, the mean
    offset is calibrated to the Bayes error ``cfg.tau`` and the classifier
    is fixed; each of ``cfg.N_d`` replicates then draws target and source
    data for every cell. Failed calibrations are skipped and counted in
    the records' ``flags``.
    """
    return _run(cfg, _fixed_task)


def run_flipped_means_sweep(cfg):
    """Fixed-classifier sweep with source class means swapped.

    With ``cfg.mislabeled`` the source sample is fed to the estimator as
    target data and the target sample as source data; nothing else changes.
    """
    if not cfg.flip_source:
        cfg = cfg.__class__(**{**cfg.to_dict(), "flip_source": True})
    return _run(cfg, _fixed_task)


def run_obtl_comparison(cfg):
    """OBTL rule trained per replicate, scored by TL-BEE and the resampling baselines."""
    if cfg.classifier != "obtl":
        raise ValueError("run_obtl_comparison needs classifier 'obtl'")
    return _run(cfg, _obtl_task)


def run_experiment(cfg):
    """Dispatch on ``cfg.experiment``."""
    if cfg.experiment == "obtl":
        return run_obtl_comparison(cfg)
    if cfg.experiment == "flipped":
        return run_flipped_means_sweep(cfg)
    return run_fixed_classifier_sweep(cfg)
