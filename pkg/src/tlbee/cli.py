"""Command-line interface.

Machine-readable results go to standard output (JSON for single values,
CSV files for sweeps); logs go to standard error. Exit codes: 0 success,
2 validation error, 3 partial failure.
"""

import argparse
import json
import logging
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from ._rng import make_rng
from .classifiers import constant_rule, lda_rule, obtl_rule, qda_rule
from .errors import (
    CalibrationError,
    ConfigError,
    ConvergenceWarning,
    DataFormatError,
    DegenerateClassifierError,
    DomainError,
    InsufficientDataError,
    NumericalFailure,
)
from .specfun import (
    TruncationPolicy,
    hyp1f1_laplace_ln,
    hyp1f1_series,
    hyp2f1_laplace_ln,
    hyp2f1_series,
    laplace_validity_flags,
    ln_mv_gamma,
    reg_inc_beta,
)

log = logging.getLogger("tlbee")

EXIT_OK, EXIT_VALIDATION, EXIT_PARTIAL = 0, 2, 3
VALIDATION_ERRORS = (ConfigError, DomainError, DataFormatError, InsufficientDataError,
                     DegenerateClassifierError)
CLASSIFIERS = ("qda", "lda", "obtl", "constant0", "constant1")
ESTIMATE_NAMES = ("tl-bee", "target-bee", "resub", "cv", "loo", "boot")
STREAMS = {"tl-bee": 100, "target-bee": 100, "resub": 101, "cv": 102, "loo": 103, "boot": 104}


class UsageError(Exception):
    """Invalid flag combination (exit code 2)."""


def _emit(obj):
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return None
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, np.generic):
            return clean(v.item())
        return v

    sys.stdout.write(json.dumps(clean(obj), sort_keys=True) + "\n")
    sys.stdout.flush()


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"'{args.command}' is stochastic: --seed is required")
    if args.seed < 0:
        raise UsageError("--seed must be a non-negative integer")
    return args.seed


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# specfun


def _spectrum(args):
    if args.eigs is not None:
        return np.asarray(args.eigs, dtype=float)
    if args.tau is None or args.d is None:
        raise UsageError("give the spectrum with --eigs or with --tau and --d")
    if args.d < 1:
        raise UsageError("--d must be >= 1")
    return np.full(args.d, args.tau)


def cmd_specfun(args):
    name, method = args.function, args.method
    out = {"function": name, "method": method, "achieved_tol": None, "validity_flags": []}
    if name == "incbeta":
        for flag in ("x", "a", "b"):
            if getattr(args, flag) is None:
                raise UsageError(f"incbeta needs --{flag}")
        v = reg_inc_beta(args.x, args.a, args.b)
        out.update(value=v, log_value=math.log(v) if v > 0 else -math.inf, method="exact")
    elif name == "mvgamma":
        if args.a is None or args.d is None:
            raise UsageError("mvgamma needs --a and --d")
        lv = ln_mv_gamma(args.d, args.a)
        out.update(value=math.exp(lv) if lv < 700 else math.inf, log_value=lv, method="exact")
    else:
        if args.a is None or args.b is None or (name == "2f1" and args.c is None):
            raise UsageError(f"{name} needs --a, --b" + (" and --c" if name == "2f1" else ""))
        x = _spectrum(args)
        if method == "series":
            trunc = TruncationPolicy(k_max=args.k_max, rel_tol=args.rel_tol)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ConvergenceWarning)
                res = (hyp1f1_series(args.a, args.b, x, trunc) if name == "1f1"
                       else hyp2f1_series(args.a, args.b, args.c, x, trunc))
            out.update(value=res.value, log_value=math.log(res.value) if res.value > 0 else None,
                       achieved_tol=res.achieved_tol, degree=res.degree, converged=res.converged)
            out["validity_flags"] = [str(w.message) for w in caught]
        else:
            lv = (hyp1f1_laplace_ln(args.a, args.b, x) if name == "1f1"
                  else hyp2f1_laplace_ln(args.a, args.b, args.c, x))
            out.update(value=math.exp(lv) if lv < 700 else math.inf, log_value=lv)
            kind = "1f1" if name == "1f1" else "2f1"
            out["validity_flags"] = list(laplace_validity_flags(kind, args.a, args.b, args.c, x.size))
    _emit(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate


def _rule(name, hyper, data_s):
    if name == "qda":
        return qda_rule
    if name == "lda":
        return lda_rule
    if name == "obtl":
        return obtl_rule(hyper, data_s)
    return constant_rule(int(name[-1]))


def cmd_estimate(args):
    from .estimators import BeeConfig, bootstrap632, cross_validation, loo, resubstitution
    from .estimators import target_bee, tl_bee
    from .harness import load_hyper, read_labeled_csv

    seed = _require_seed(args)
    features = tuple(f for f in (args.features or "").split(",") if f)
    data_t = read_labeled_csv(args.target, features)
    data_s = read_labeled_csv(args.source, features, domain="source") if args.source else None
    if data_s is not None and data_s.d != data_t.d:
        raise DataFormatError("target and source files have different feature counts")
    if args.hyper is None and any(e.endswith("bee") for e in args.estimators):
        raise UsageError("--hyper is required for the Bayesian estimators")
    hyper = load_hyper(args.hyper) if args.hyper else None
    if hyper is not None and hyper.d != data_t.d:
        raise ConfigError(f"hyperparameters have d={hyper.d}, data have d={data_t.d}")
    if args.classifier == "obtl" and hyper is None:
        raise UsageError("--classifier obtl needs --hyper")
    if "tl-bee" in args.estimators and data_s is None:
        raise UsageError("tl-bee needs --source (use target-bee without source data)")
    rule = _rule(args.classifier, hyper, data_s)
    clf = rule(data_t)
    cfg = BeeConfig(N=args.N, n_test_per_theta=args.n_test_per_theta,
                    use_control_variate=not args.no_control_variate,
                    c=hyper.c if hyper is not None else 0.5)
    for name in args.estimators:
        # both Bayesian estimators share a stream so they agree when alpha = 0
        rng = make_rng(seed, STREAMS[name])
        out = {"estimator": name, "classifier": args.classifier}
        if name == "tl-bee":
            out.update(tl_bee(clf, data_t, data_s, hyper, cfg, rng).as_dict())
        elif name == "target-bee":
            out.update(target_bee(clf, data_t, hyper, cfg, rng).as_dict())
        elif name == "resub":
            out["estimate"] = resubstitution(rule, data_t)
        elif name == "cv":
            out["estimate"] = cross_validation(rule, data_t, k=args.cv_k, reps=args.cv_reps, rng=rng)
        elif name == "loo":
            out["estimate"] = loo(rule, data_t)
        else:
            out["estimate"] = bootstrap632(rule, data_t, B=args.boot_B, rng=rng)
        _emit(out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweeps


def _threads(args, path, section):
    from .harness.config import read_toml

    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.threads
    if path and "threads" in read_toml(path).get(section, {}):
        return None
    return os.cpu_count() or 1


def _out_path(args, cfg):
    path = args.out or cfg.output
    if not path:
        raise UsageError("no output path: pass --out or set 'output' in the config")
    return path


def _meta(args, cfg, elapsed):
    meta = {"command": args.command, "config": cfg.to_dict()}
    if cfg.record_runtime:
        meta["elapsed_s"] = round(elapsed, 3)
    return meta


def cmd_simulate(args):
    from .harness import load_experiment_config, run_experiment, write_records

    seed = _require_seed(args)
    cfg = load_experiment_config(args.config, seed=seed,
                                 threads=_threads(args, args.config, "experiment"))
    out = _out_path(args, cfg)
    t0 = time.perf_counter()
    try:
        records = run_experiment(cfg)
    except CalibrationError as exc:
        log.error("%s", exc)
        _emit({"status": "failed", "error": str(exc), "records": 0})
        return EXIT_PARTIAL
    write_records(records, out, _meta(args, cfg, time.perf_counter() - t0))
    skipped = sum(int(r.flags.split("skipped_calibrations=")[1].split(";")[0])
                  for r in records if "skipped_calibrations=" in r.flags)
    status = "partial" if skipped else "ok"
    _emit({"status": status, "records": len(records), "out": str(out),
           "skipped_calibration_cells": skipped})
    if skipped:
        log.warning("%d cell-level calibration skips; see the flags column", skipped)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_calibrate(args):
    from .harness import CalibrationRecord, load_experiment_config, write_calibration_records
    from .harness.sweeps import calibrate_prior

    seed = _require_seed(args)
    cfg = load_experiment_config(args.config, seed=seed,
                                 threads=_threads(args, args.config, "experiment"))
    out = _out_path(args, cfg)
    t0 = time.perf_counter()
    rows = []
    for p in range(cfg.N_p):
        try:
            cal = calibrate_prior(cfg, (p,))
            rows.append(CalibrationRecord(p, cfg.d, cfg.tau, True, cal.theta, cal.error,
                                          cal.iterations, seed))
        except CalibrationError as exc:
            log.warning("prior %d: %s", p, exc)
            rows.append(CalibrationRecord(p, cfg.d, cfg.tau, False, float(exc.best_theta),
                                          float(exc.best_error), -1, seed, "calibration failed"))
    write_calibration_records(rows, out, _meta(args, cfg, time.perf_counter() - t0))
    ok = sum(r.converged for r in rows)
    _emit({"status": "ok" if ok == len(rows) else "partial", "converged": ok,
           "total": len(rows), "rate": ok / len(rows), "out": str(out)})
    return EXIT_OK if ok == len(rows) else EXIT_PARTIAL


def cmd_rnaseq(args):
    from .harness import load_rnaseq_config, run_rnaseq_alpha_sweep, write_records

    seed = _require_seed(args)
    cfg = load_rnaseq_config(args.config, seed=seed, threads=_threads(args, args.config, "rnaseq"))
    out = _out_path(args, cfg)
    t0 = time.perf_counter()
    records = run_rnaseq_alpha_sweep(cfg)
    write_records(records, out, _meta(args, cfg, time.perf_counter() - t0))
    _emit({"status": "ok", "records": len(records), "out": str(out)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p, suppress):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--seed", type=int, help="master seed (required for stochastic commands)",
                   **(kw or {"default": None}))
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)",
                   **(kw or {"default": None}))
    p.add_argument("--out", help="output CSV path for sweeps", **(kw or {"default": None}))
    p.add_argument("--config", help="TOML configuration file", **(kw or {"default": None}))
    p.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"),
                   **(kw or {"default": "INFO"}))


def build_parser():
    parser = argparse.ArgumentParser(prog="tlbee", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sp = sub.add_parser("specfun", help="evaluate a special function")
    _add_common(sp, suppress=True)
    sp.add_argument("function", choices=("1f1", "2f1", "incbeta", "mvgamma"))
    sp.add_argument("--a", type=float)
    sp.add_argument("--b", type=float)
    sp.add_argument("--c", type=float)
    sp.add_argument("--x", type=float, help="incbeta argument")
    sp.add_argument("--eigs", type=_floats, help="comma-separated spectrum")
    sp.add_argument("--tau", type=float, help="spectrum tau * I_d")
    sp.add_argument("--d", type=int)
    sp.add_argument("--method", choices=("series", "laplace"), default="series")
    sp.add_argument("--k-max", type=int, default=TruncationPolicy.k_max)
    sp.add_argument("--rel-tol", type=float, default=TruncationPolicy.rel_tol)
    sp.set_defaults(func=cmd_specfun)

    sp = sub.add_parser("estimate", help="error estimates for one dataset")
    _add_common(sp, suppress=True)
    sp.add_argument("--target", required=True, help="target CSV (features + label)")
    sp.add_argument("--source", help="source CSV")
    sp.add_argument("--hyper", help="TOML file with a [hyper] table")
    sp.add_argument("--features", help="comma-separated feature columns (default: all)")
    sp.add_argument("--classifier", choices=CLASSIFIERS, default="lda")
    sp.add_argument("--estimators", type=lambda s: [e for e in s.split(",") if e],
                    default=None, help=f"comma-separated subset of {','.join(ESTIMATE_NAMES)}")
    sp.add_argument("--N", type=int, default=1000, help="importance-sampling draws per class")
    sp.add_argument("--n-test-per-theta", type=int, default=1000)
    sp.add_argument("--no-control-variate", action="store_true")
    sp.add_argument("--cv-k", type=int, default=5)
    sp.add_argument("--cv-reps", type=int, default=1)
    sp.add_argument("--boot-B", type=int, default=100)
    sp.set_defaults(func=cmd_estimate)

    for name, fn, text in (("calibrate", cmd_calibrate, "Bayes-error calibration over prior draws"),
                           ("simulate", cmd_simulate, "synthetic MSE sweep"),
                           ("rnaseq", cmd_rnaseq, "RNA-seq alpha sweep")):
        sp = sub.add_parser(name, help=text)
        _add_common(sp, suppress=True)
        sp.set_defaults(func=fn)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "estimate":
        if args.estimators is None:
            args.estimators = ["tl-bee"] if args.source else ["target-bee"]
        bad = set(args.estimators) - set(ESTIMATE_NAMES)
        if bad:
            parser.error(f"unknown estimators {sorted(bad)}; choose from {ESTIMATE_NAMES}")
    if args.command in ("calibrate", "simulate", "rnaseq") and not args.config:
        parser.error(f"'{args.command}' needs --config")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tlbee: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except VALIDATION_ERRORS as exc:
        print(f"tlbee: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        print(f"tlbee: numerical failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
