"""RNA-seq ingestion and the relatedness (alpha) sweep on two-domain expression data."""

import csv
import logging
import time
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._rng import make_rng
from ..classifiers import qda_rule
from ..errors import DataFormatError
from ..estimators import BeeConfig, finish_bee, prepare_bee
from ..model import SOURCE, TARGET, JointHyper, LabeledDataset, build_scale_matrix
from .records import MseRecord
from .sweeps import pmap

log = logging.getLogger(__name__)

LABEL_COLUMN = "label"
_LABELS = {"0": 0, "1": 1, "control": 0, "case": 1}
SPLIT, PERM, BEE_RNA = 11, 12, 13


@dataclass(frozen=True)
class IngestedData:
    """Standardized datasets plus the per-feature moments removed from each domain."""

    target: LabeledDataset
    source: LabeledDataset
    features: tuple
    meta: dict

    def __iter__(self):
        return iter((self.target, self.source))


def read_labeled_csv(path, features=(), domain=TARGET):
    """Read a labeled CSV (feature columns plus ``label``) without rescaling."""
    data, _, _ = _read_table(path, tuple(features), domain, standardize=False)
    return data


def _read_table(path, features, domain, standardize=True):
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if LABEL_COLUMN not in header:
            raise DataFormatError(f"{path}: missing '{LABEL_COLUMN}' column")
        if not features:
            features = tuple(h for h in header if h != LABEL_COLUMN)
        missing = [f for f in features if f not in header]
        if missing:
            raise DataFormatError(f"{path}: missing feature column(s) {missing}")
        cols = [header.index(f) for f in features]
        li = header.index(LABEL_COLUMN)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            lab = row[li].strip().lower()
            if lab not in _LABELS:
                raise DataFormatError(
                    f"{path}: row {lineno}, column '{LABEL_COLUMN}': unknown label {row[li]!r}")
            vals = []
            for f, j in zip(features, cols):
                try:
                    v = float(row[j])
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {lineno}, column '{f}': non-numeric cell {row[j]!r}") from None
                if not np.isfinite(v):
                    raise DataFormatError(f"{path}: row {lineno}, column '{f}': non-finite value")
                vals.append(v)
            rows.append(vals)
            labels.append(_LABELS[lab])
    X = np.asarray(rows, dtype=float).reshape(-1, len(features))
    y = np.asarray(labels, dtype=int)
    for k in (0, 1):
        if not np.any(y == k):
            raise DataFormatError(f"{path}: class {'case' if k else 'control'} has no rows")
    if not standardize:
        return LabeledDataset(X, y, domain), tuple(features), {"path": str(path), "n": int(len(y))}
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    zero = [f for f, s in zip(features, scale) if not s > 0]
    if zero:
        raise DataFormatError(f"{path}: zero-variance feature column(s) {zero}")
    Z = (X - mean) / scale
    return LabeledDataset(Z, y, domain), tuple(features), {
        "path": str(path), "n": int(len(y)), "n_per_class": [int(np.sum(y == 0)), int(np.sum(y == 1))],
        "mean": mean.tolist(), "scale": scale.tolist()}


def ingest_rnaseq_csv(cfg):
    """Load target and source CSVs and standardize each feature per domain.

    Each file has a header with the feature columns and a ``label``
    column holding ``0/1`` or ``control/case`` (``case`` is class 1).
    Every feature is centered and scaled to unit (population) variance
    over both classes of its own file.

    Returns
    -------
    IngestedData
        Unpacks as ``(target, source)``; ``meta`` holds the removed moments.
    """
    target, feats, meta_t = _read_table(cfg.target_csv, tuple(cfg.features), TARGET)
    source, _, meta_s = _read_table(cfg.source_csv, feats, SOURCE)
    return IngestedData(target, source, feats, {"features": list(feats), "target": meta_t, "source": meta_s})


def rnaseq_hyper(data_t, data_s, alpha, nu, c=0.5):
    """Hyperparameters from the data: ``kappa_t = n_t``, ``kappa_s = n_s``, ``k_t = k_s = 1/nu``.

    ``n_t`` and ``n_s`` are per-class sizes; prior means are the average
    of the two class means in each domain, shared by both classes.
    """
    d = data_t.d
    n_t = min(data_t.counts())
    n_s = min(data_s.counts())
    m_t = 0.5 * (data_t.class_points(0).mean(0) + data_t.class_points(1).mean(0))
    m_s = 0.5 * (data_s.class_points(0).mean(0) + data_s.class_points(1).mean(0))
    M_t, M_s, M_ts = build_scale_matrix(1.0 / nu, 1.0 / nu, alpha, d)
    return JointHyper(nu=nu, kappa_t=n_t, kappa_s=n_s, m_t=m_t, m_s=m_s,
                      M_t=M_t, M_s=M_s, M_ts=M_ts, c=c, alpha=alpha)


def _split(data, n_per_class, rng):
    train, test = [], []
    for y in (0, 1):
        idx = np.flatnonzero(data.labels == y)
        if idx.size <= n_per_class:
            raise DataFormatError(
                f"class {y} has {idx.size} rows; need more than n_t={n_per_class} to leave a test set")
        perm = rng.permutation(idx)
        train.append(perm[:n_per_class])
        test.append(perm[n_per_class:])
    return data.subset(np.concatenate(train)), data.subset(np.concatenate(test))


def _pick(data, n_per_class, rng):
    idx = []
    for y in (0, 1):
        cls = np.flatnonzero(data.labels == y)
        if cls.size < n_per_class:
            raise DataFormatError(f"source class {y} has {cls.size} rows; n_s={n_per_class} requested")
        idx.append(rng.permutation(cls)[:n_per_class])
    return data.subset(np.concatenate(idx))


def _rna_task(args):
    cfg, target, source, r = args
    bcfg = BeeConfig(N=cfg.N, n_test_per_theta=cfg.n_test_per_theta,
                     use_control_variate=cfg.use_control_variate, c=cfg.c)
    train, test = _split(target, cfg.n_t, make_rng(cfg.seed, SPLIT, r))
    clf = qda_rule(train)
    e = [np.mean(clf.predict(test.class_points(y)) != y) for y in (0, 1)]
    truth = cfg.c * e[0] + (1 - cfg.c) * e[1]
    out = []
    prep = None
    for n_s in cfg.n_s:
        for j in range(cfg.n_perm):
            sub = _pick(source, n_s, make_rng(cfg.seed, PERM, r, n_s, j))
            for alpha in cfg.alphas:
                hyper = rnaseq_hyper(train, sub, alpha, cfg.nu, cfg.c)
                if prep is None:
                    # the importance density ignores alpha and the source subset
                    prep = prepare_bee(clf, train, hyper, bcfg, make_rng(cfg.seed, BEE_RNA, r))
                res = finish_bee(prep, sub, hyper, bcfg)
                out.append((alpha, n_s, (res.estimate - truth) ** 2))
    return out


def run_rnaseq_alpha_sweep(cfg, data=None):
    """MSE of TL-BEE for plug-in QDA over a grid of ``alpha`` and source sizes.

    Per replicate, ``cfg.n_t`` points per class are drawn as target
    training data and the rest of the target file is the test set; the
    test-set error of the trained QDA is the reference. For each source
    size, ``cfg.n_perm`` random source subsets are scored at every grid
    ``alpha``.
    """
    t_start = time.perf_counter()
    data = data or ingest_rnaseq_csv(cfg)
    target, source = data.target, data.source
    tasks = [(cfg, target, source, r) for r in range(cfg.replicates)]
    log.info("rnaseq sweep: %d replicates x %d source sizes x %d permutations x %d alphas",
             cfg.replicates, len(cfg.n_s), cfg.n_perm, len(cfg.alphas))
    sq = defaultdict(list)
    for chunk in pmap(_rna_task, tasks, cfg.threads):
        for alpha, n_s, s in chunk:
            sq[(alpha, n_s)].append(s)
    elapsed = time.perf_counter() - t_start
    records = []
    for n_s in cfg.n_s:
        for alpha in cfg.alphas:
            vals = np.asarray(sq[(alpha, n_s)])
            records.append(MseRecord(
                "rnaseq", target.d, float(alpha), int(n_s), int(cfg.n_t), float("nan"), "qda", "bee",
                float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0,
                int(vals.size), int(cfg.seed), f"{elapsed:.3f}" if cfg.record_runtime else "", ""))
    return records


def mse_minimizing_alpha(records, n_s=None):
    """Grid ``alpha`` with the smallest MSE (pooled over source sizes unless ``n_s`` is given)."""
    by_alpha = defaultdict(list)
    for r in records:
        if n_s is None or r.n_s == n_s:
            by_alpha[r.alpha].append(r.mse)
    return min(by_alpha, key=lambda a: np.mean(by_alpha[a]))


def write_standin_csvs(target_path, source_path, rng, d=3, alpha=0.9, nu=30.0, theta=1.0,
                       kappa=10.0, n_target=100, n_source=100, features=None):
    """Write a two-domain stand-in for expression data drawn from the joint model.

    Precisions come from the joint Wishart with ``k_t = k_s = 1/nu``
    and correlation ``alpha``; means are ``N(m, (kappa Lam)^{-1})``
    around ``m^0 = 0`` and ``m^1 = theta 1`` in both domains.

    Returns
    -------
    GenerativeInstance
    """
    from ..model import generate_dataset, sample_generative_instance

    features = list(features or [f"g{i + 1}" for i in range(d)])
    M_t, M_s, M_ts = build_scale_matrix(1.0 / nu, 1.0 / nu, alpha, d)
    m = np.stack([np.zeros(d), np.full(d, float(theta))])
    hyper = JointHyper(nu=nu, kappa_t=kappa, kappa_s=kappa, m_t=m, m_s=m,
                       M_t=M_t, M_s=M_s, M_ts=M_ts, alpha=alpha)
    inst = sample_generative_instance(hyper, rng)
    for path, params, n, dom in ((target_path, inst.target, n_target, TARGET),
                                 (source_path, inst.source, n_source, SOURCE)):
        ds = generate_dataset(*params, n, n, rng, dom)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(features + [LABEL_COLUMN])
            for x, y in zip(ds.points, ds.labels):
                w.writerow([repr(float(v)) for v in x] + ["case" if y else "control"])
    return inst


__all__ = [
    "IngestedData",
    "ingest_rnaseq_csv",
    "read_labeled_csv",
    "rnaseq_hyper",
    "run_rnaseq_alpha_sweep",
    "mse_minimizing_alpha",
    "write_standin_csvs",
]
