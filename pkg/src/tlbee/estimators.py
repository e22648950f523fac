"""Error estimators: transfer-learning BEE, target-only BEE and resampling baselines."""

from dataclasses import dataclass, field

import numpy as np

from .classifiers import (
    Classifier,
    ConstantClassifier,
    LinearClassifier,
    lda_from_sample,
    linear_true_error,
    mc_class_errors,
)
from .errors import DegenerateClassifierError, InsufficientDataError
from .posterior import (
    compute_stats,
    lemma1_params,
    log_weight,
    require_class_counts,
    sample_phi,
    theorem1_params,
)
from .specfun import reg_inc_beta


@dataclass(frozen=True)
class BeeConfig:
    """Settings of the Bayesian error estimators.

    Attributes
    ----------
    N : int
        Importance-sampling draws per class.
    n_test_per_theta : int
        Monte-Carlo test points per draw and class for non-linear rules.
    use_control_variate : bool
        Apply the sample-LDA control variate when it can be built.
    c : float
        Class-0 prior probability.
    hyp_method : {"laplace", "series"}
        Evaluation of the hypergeometric terms in the weights.
    """

    N: int = 1000
    n_test_per_theta: int = 1000
    use_control_variate: bool = True
    c: float = 0.5
    hyp_method: str = "laplace"

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.n_test_per_theta < 1:
            raise ValueError("n_test_per_theta must be >= 1")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError("c must lie in [0, 1]")


@dataclass(frozen=True)
class BeeResult:
    """Estimate with per-class diagnostics."""

    estimate: float
    per_class: tuple
    beta_hat: tuple
    cv_correlation: tuple
    ess: tuple
    flags: tuple = field(default_factory=tuple)

    def as_dict(self):
        return {
            "estimate": self.estimate,
            "per_class": list(self.per_class),
            "beta_hat": list(self.beta_hat),
            "cv_correlation": list(self.cv_correlation),
            "ess": list(self.ess),
            "flags": list(self.flags),
        }


def class_error_given_theta(clf, theta, y, cfg, rng):
    """Class-``y`` true error of ``clf`` at each parameter draw.

    Linear rules use the exact Gaussian error; others are scored on
    ``cfg.n_test_per_theta`` simulated points per draw.
    """
    if isinstance(clf, LinearClassifier):
        return linear_true_error(clf, theta, y)
    if isinstance(clf, ConstantClassifier):
        n = len(theta) if hasattr(theta, "__len__") else 1
        out = np.full(n, float(clf.label != y))
        return float(out[0]) if not hasattr(theta, "__len__") else out
    out = mc_class_errors(clf, theta, y, cfg.n_test_per_theta, rng)
    return out if hasattr(theta, "__len__") else float(out[0])


def cv_expectation(phi, g, y):
    """Expectation of the control variate under the importance density.

    For the linear rule ``g`` the class-``y`` error at ``(mu, Lam)`` is
    ``Phi((-1)^y g(mu) / sqrt(a' Lam^{-1} a))``; its mean under the
    Gaussian-Wishart ``phi`` is

        1/2 + sgn(A)/2 * I(A^2 / (A^2 + a' M_tn^{-1} a); 1/2, (dof - d + 1)/2)

    with ``A = (-1)^y g(m_tn) sqrt(kappa_tn / (1 + kappa_tn))``.
    """
    a = np.asarray(g.a, dtype=float)
    if not np.any(a != 0):
        raise DegenerateClassifierError("control-variate direction is zero")
    gm = float(g.discriminant(phi.m_tn[None])[0])
    A = (1 if y == 0 else -1) * gm * np.sqrt(phi.kappa_tn / (1 + phi.kappa_tn))
    if A == 0:
        return 0.5
    q = float(a @ phi.M_tn_inv @ a)
    x = A * A / (A * A + q)
    return 0.5 + 0.5 * np.sign(A) * reg_inc_beta(x, 0.5, (phi.dof - phi.d + 1) / 2)


def _combine(eps, lw, V=None, delta=None):
    """Self-normalized IS estimate with optional control-variate correction.

    The coefficient regresses ``w (eps - estimate)``, the linearized error
    of the self-normalized mean, on ``V``; with uniform weights this is the
    usual ``cov(zeta, V) / var(V)``. The reported correlation is
    ``corr(zeta, V)``.

    Returns estimate, beta, correlation, ess.
    """
    w = np.exp(lw - np.max(lw))
    ess = float(w.sum() ** 2 / np.sum(w * w))
    if np.all(eps == eps[0]):
        # a constant error needs no weighting or correction
        return float(eps[0]), 0.0, float("nan"), ess
    zeta = eps * (w / w.mean())
    est = float(zeta.mean())
    if V is None:
        return est, 0.0, float("nan"), ess
    dv = V - V.mean()
    var = float(dv @ dv)
    if var <= 0:
        return est, 0.0, float("nan"), ess
    beta = float(((w / w.mean()) * (eps - est)) @ dv) / var
    dz = zeta - est
    zz = float(dz @ dz)
    corr = float(dz @ dv) / np.sqrt(var * zz) if zz > 0 else float("nan")
    return est - beta * (float(V.mean()) - delta), beta, float(corr), ess


def _control_variate(data_t, d):
    stats = [compute_stats(data_t.class_points(y), d) for y in (0, 1)]
    try:
        return lda_from_sample(*stats), None
    except (InsufficientDataError, DegenerateClassifierError) as exc:
        return None, f"control variate disabled: {exc}"


@dataclass(frozen=True)
class PreparedBee:
    """Proposal draws and their errors, reusable across source data and ``alpha``.

    The importance density depends on the target data and the target
    hyperparameters only, so one set of draws serves every source
    dataset and every relatedness level sharing those.
    """

    stats_t: tuple
    phis: tuple
    draws: tuple
    eps: tuple
    V: tuple
    delta: tuple
    flags: tuple


def prepare_bee(rule_or_clf, data_t, hyper, cfg=None, rng=None):
    """Draw from the importance density and score the classifier on each draw."""
    cfg = cfg or BeeConfig()
    clf = rule_or_clf if isinstance(rule_or_clf, Classifier) else rule_or_clf(data_t)
    require_class_counts(data_t)
    d = data_t.d
    flags = []
    g = None
    if cfg.use_control_variate:
        g, note = _control_variate(data_t, d)
        if note:
            flags.append(note)
    stats_t, phis, draws, eps, Vs, deltas = [], [], [], [], [], []
    for y in (0, 1):
        st = compute_stats(data_t.class_points(y), d)
        phi = lemma1_params(hyper, y, st)
        dr = sample_phi(phi, cfg.N, rng)
        stats_t.append(st)
        phis.append(phi)
        draws.append(dr)
        eps.append(np.asarray(class_error_given_theta(clf, dr, y, cfg, rng), dtype=float))
        if g is not None:
            Vs.append(linear_true_error(g, dr, y))
            deltas.append(cv_expectation(phi, g, y))
        else:
            Vs.append(None)
            deltas.append(None)
    return PreparedBee(tuple(stats_t), tuple(phis), tuple(draws), tuple(eps),
                       tuple(Vs), tuple(deltas), tuple(flags))


def finish_bee(prep, data_s, hyper, cfg=None, transfer=True):
    """Weight the prepared draws for a source dataset and combine the classes."""
    cfg = cfg or BeeConfig()
    flags = list(prep.flags)
    per_class, betas, corrs, esss = [], [], [], []
    for y in (0, 1):
        st, phi = prep.stats_t[y], prep.phis[y]
        d = st.d
        if transfer:
            ss = (compute_stats(data_s.class_points(y), d) if data_s is not None
                  else compute_stats(np.zeros((0, d)), d))
            post = theorem1_params(hyper, y, st, ss)
            if not (np.array_equal(post.m_tn, phi.m_tn) and post.kappa_tn == phi.kappa_tn):
                raise ValueError("hyperparameters differ from those used to prepare the draws")
            lw = log_weight(prep.draws[y], post, method=cfg.hyp_method)
        else:
            lw = np.zeros(len(prep.draws[y]))
        if prep.V[y] is not None:
            est, beta, corr, ess = _combine(prep.eps[y], lw, prep.V[y], prep.delta[y])
        else:
            est, beta, corr, ess = _combine(prep.eps[y], lw)
        if not 0.0 <= est <= 1.0:
            flags.append(f"class {y} estimate {est:.4g} clipped to [0, 1]")
            est = min(1.0, max(0.0, est))
        per_class.append(float(est))
        betas.append(float(beta))
        corrs.append(float(corr))
        esss.append(float(ess))
    estimate = cfg.c * per_class[0] + (1 - cfg.c) * per_class[1]
    return BeeResult(float(estimate), tuple(per_class), tuple(betas), tuple(corrs),
                     tuple(esss), tuple(flags))


def _bee(clf, data_t, data_s, hyper, cfg, rng, transfer):
    prep = prepare_bee(clf, data_t, hyper, cfg, rng)
    return finish_bee(prep, data_s, hyper, cfg, transfer)


def tl_bee(rule_or_clf, data_t, data_s, hyper, cfg=None, rng=None):
    """Transfer-learning Bayesian MMSE error estimate.

    Parameters
    ----------
    rule_or_clf : Classifier or callable
        A trained classifier, or a rule mapping the target dataset to one.
    data_t, data_s : LabeledDataset
        Target and source data; ``data_s`` may be ``None`` (no source).
    hyper : JointHyper
    cfg : BeeConfig, optional
    rng : numpy.random.Generator

    Returns
    -------
    BeeResult
    """
    return _bee(rule_or_clf, data_t, data_s, hyper, cfg or BeeConfig(), rng, transfer=True)


def target_bee(rule_or_clf, data_t, hyper, cfg=None, rng=None):
    """Target-only Bayesian MMSE error estimate (plain Monte Carlo over ``Phi*``)."""
    return _bee(rule_or_clf, data_t, None, hyper, cfg or BeeConfig(), rng, transfer=False)


# ---------------------------------------------------------------------------
# Resampling baselines


def _error_rate(clf, data):
    return float(np.mean(clf.predict(data.points) != data.labels))


def resubstitution(rule, data_t):
    """Apparent error of the rule on its own training data."""
    if len(data_t) == 0:
        raise InsufficientDataError("resubstitution needs a non-empty training set")
    return _error_rate(rule(data_t), data_t)


def _stratified_folds(labels, k, rng):
    order = []
    for y in (0, 1):
        idx = np.flatnonzero(labels == y)
        order.append(idx[rng.permutation(idx.size)] if rng is not None else idx)
    order = np.concatenate(order)
    fold = np.empty(labels.size, dtype=int)
    fold[order] = np.arange(labels.size) % k
    return fold


def _held_out_errors(rule, data_t, fold, k):
    wrong = 0
    for f in range(k):
        test = fold == f
        if not np.any(test):
            continue
        train = data_t.subset(np.flatnonzero(~test))
        if np.any(train.counts() == 0):
            raise InsufficientDataError(f"fold {f} leaves a class without training points")
        try:
            clf = rule(train)
        except InsufficientDataError as exc:
            raise InsufficientDataError(f"fold {f} training set too small: {exc}") from exc
        wrong += int(np.sum(clf.predict(data_t.points[test]) != data_t.labels[test]))
    return wrong / len(data_t)


def cross_validation(rule, data_t, k=5, reps=1, rng=None):
    """Stratified ``k``-fold cross-validation averaged over ``reps`` partitions."""
    n = len(data_t)
    if not 2 <= k <= n:
        raise InsufficientDataError(f"need 2 <= k <= n = {n}, got k={k}")
    errs = [_held_out_errors(rule, data_t, _stratified_folds(data_t.labels, k, rng), k)
            for _ in range(reps)]
    return float(np.mean(errs))


def loo(rule, data_t):
    """Leave-one-out error."""
    n = len(data_t)
    if n < 2:
        raise InsufficientDataError("leave-one-out needs at least 2 points")
    return _held_out_errors(rule, data_t, np.arange(n), n)


def bootstrap632(rule, data_t, B=100, rng=None, max_retries=100):
    """0.632 bootstrap: ``0.368 resub + 0.632 eps0``.

    ``eps0`` averages, over ``B`` resamples with replacement, the error on
    the points left out of each resample. Resamples missing a class or
    leaving no point out are redrawn.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    n = len(data_t)
    if n == 0:
        raise InsufficientDataError("bootstrap needs a non-empty training set")
    errs = []
    for _ in range(B):
        for _attempt in range(max_retries):
            idx = rng.integers(0, n, size=n)
            oob = np.setdiff1d(np.arange(n), idx)
            if oob.size and np.all(np.bincount(data_t.labels[idx], minlength=2) > 0):
                break
        else:
            raise InsufficientDataError(f"no valid bootstrap resample in {max_retries} draws")
        clf = rule(data_t.subset(idx))
        errs.append(float(np.mean(clf.predict(data_t.points[oob]) != data_t.labels[oob])))
    return 0.368 * resubstitution(rule, data_t) + 0.632 * float(np.mean(errs))


ESTIMATOR_NAMES = ("resub", "cv", "loo", "boot", "bee")


def baseline_estimates(rule, data_t, rng, k=5, reps=1, B=100):
    """All four resampling baselines on the same training data."""
    return {
        "resub": resubstitution(rule, data_t),
        "cv": cross_validation(rule, data_t, k=min(k, len(data_t)), reps=reps, rng=rng),
        "loo": loo(rule, data_t),
        "boot": bootstrap632(rule, data_t, B=B, rng=rng),
    }
