"""Binary classifiers and their true errors under Gaussian class models.

Every classifier exposes ``discriminant(X)``; the predicted label is 1
where the discriminant is strictly positive and 0 otherwise, so exact
ties go to class 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClassifierError, InsufficientDataError
from .model import DomainClassParams, LabeledDataset, ParamBatch
from .posterior import compute_stats, theorem1_params
from .specfun import hyp2f1_laplace_ln, ln_mv_gamma, std_normal_cdf


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, d) if x.size == d else x[:, None]
    return x


class Classifier:
    """Common interface."""

    d: int

    def discriminant(self, X):
        raise NotImplementedError

    def predict(self, X):
        """Labels in {0, 1}; a single point gives a scalar label."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1 and X.size == self.d
        out = (self.discriminant(_as_points(X, self.d)) > 0).astype(int)
        return int(out[0]) if single else out


@dataclass(frozen=True)
class LinearClassifier(Classifier):
    """``g(x) = a^T x + b``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if not np.all(np.isfinite(a)) or not np.any(a != 0):
            raise DegenerateClassifierError("linear direction must be finite and non-zero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def d(self):
        return self.a.size

    def discriminant(self, X):
        return _as_points(X, self.d) @ self.a + self.b


@dataclass(frozen=True)
class QuadraticClassifier(Classifier):
    """``g(x) = x^T A x + b^T x + c``."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))
        object.__setattr__(self, "c", float(self.c))

    @property
    def d(self):
        return self.b.size

    def discriminant(self, X):
        X = _as_points(X, self.d)
        return np.einsum("...i,ij,...j->...", X, self.A, X) + X @ self.b + self.c


@dataclass(frozen=True)
class ConstantClassifier(Classifier):
    """Always predicts ``label``."""

    label: int
    d: int = 1

    def discriminant(self, X):
        X = _as_points(X, self.d)
        return np.full(X.shape[:-1], 1.0 if self.label == 1 else -1.0)


# ---------------------------------------------------------------------------
# Constructors


def qda_from_params(theta0, theta1):
    """Bayes-optimal quadratic rule for two Gaussians with equal priors.

    ``A = -(Lam1 - Lam0)/2``, ``b = Lam1 mu1 - Lam0 mu0`` and
    ``c = -(mu1' Lam1 mu1 - mu0' Lam0 mu0)/2 - log(|Lam0| / |Lam1|)/2``.
    """
    L0, L1 = theta0.Lam, theta1.Lam
    m0, m1 = theta0.mu, theta1.mu
    _, ld0 = np.linalg.slogdet(L0)
    _, ld1 = np.linalg.slogdet(L1)
    A = -0.5 * (L1 - L0)
    b = L1 @ m1 - L0 @ m0
    c = -0.5 * (m1 @ L1 @ m1 - m0 @ L0 @ m0) - 0.5 * (ld0 - ld1)
    return QuadraticClassifier(A, b, c)


def qda_from_sample(stats0, stats1):
    """Plug-in QDA from per-class sample means and covariances ``S/(n-1)``."""
    thetas = []
    for st in (stats0, stats1):
        if st.n < st.d + 1:
            raise InsufficientDataError(
                f"sample QDA needs at least d+1 = {st.d + 1} points per class, got {st.n}")
        cov = st.S / (st.n - 1)
        try:
            Lam = np.linalg.inv(cov)
            np.linalg.cholesky(Lam)
        except np.linalg.LinAlgError as exc:
            raise DegenerateClassifierError("sample covariance is singular") from exc
        thetas.append(DomainClassParams(st.xbar, Lam))
    return qda_from_params(*thetas)


def lda_from_params(theta0, theta1):
    """LDA rule with the averaged covariance ``S = (Lam0^{-1} + Lam1^{-1}) / 2``."""
    S = 0.5 * (np.linalg.inv(theta0.Lam) + np.linalg.inv(theta1.Lam))
    try:
        a = np.linalg.solve(S, theta1.mu - theta0.mu)
    except np.linalg.LinAlgError as exc:
        raise DegenerateClassifierError("averaged covariance is singular") from exc
    b = -0.5 * a @ (theta1.mu + theta0.mu)
    return LinearClassifier(a, b)


def lda_from_sample(stats0, stats1):
    """Sample LDA with pooled covariance ``(S0 + S1) / (n0 + n1 - 2)``.

    The offset includes ``log(n1 / n0)``.
    """
    n0, n1 = stats0.n, stats1.n
    d = stats0.d
    if n0 < 1 or n1 < 1:
        raise InsufficientDataError("sample LDA needs at least one point per class")
    if n0 + n1 < d + 2:
        raise InsufficientDataError(
            f"sample LDA needs N_t >= d + 2 = {d + 2} points, got {n0 + n1}")
    pooled = (stats0.S + stats1.S) / (n0 + n1 - 2)
    if np.linalg.matrix_rank(pooled) < d:
        raise DegenerateClassifierError(
            f"pooled covariance is singular; need more than {n0 + n1} points in general position")
    a = np.linalg.solve(pooled, stats1.xbar - stats0.xbar)
    b = -0.5 * a @ (stats1.xbar + stats0.xbar) + np.log(n1 / n0)
    return LinearClassifier(a, b)


@dataclass(frozen=True)
class ObtlClassifier(Classifier):
    """Argmax of the effective class-conditional densities.

    Attributes
    ----------
    posts : tuple of TargetPosterior
        One posterior per class.
    """

    posts: tuple

    @property
    def d(self):
        return self.posts[0].d

    def log_density(self, X, y):
        """Log effective density of class ``y`` at the rows of ``X``."""
        return obtl_log_density(self, X, y)

    def discriminant(self, X):
        X = _as_points(X, self.d)
        return self.log_density(X, 1) - self.log_density(X, 0)


def obtl_from_data(hyper, data_t, data_s=None):
    """Train the OBTL classifier on target and (optional) source data."""
    d = data_t.d
    posts = []
    for y in (0, 1):
        st = compute_stats(data_t.class_points(y), d)
        ss = compute_stats(data_s.class_points(y), d) if data_s is not None else compute_stats(np.zeros((0, d)), d)
        posts.append(theorem1_params(hyper, y, st, ss))
    return ObtlClassifier(tuple(posts))


def obtl_log_density(clf, X, y):
    """Log of the effective class-conditional density of the OBTL rule.

    With ``kappa_x = kappa_tn + 1`` and
    ``T_x^{-1} = T_t^{-1} + kappa_tn/(kappa_tn+1) (m_tn - x)(m_tn - x)^T``:

        log O = -d/2 log pi + d/2 log(kappa_tn/kappa_x)
                + log Gamma_d((nu+n_t+1)/2) - log Gamma_d((nu+n_t)/2)
                + (nu+n_t+1)/2 log|T_x| - (nu+n_t)/2 log|T_t|
                + log 2F1(a, (nu+n_t+1)/2; nu/2; T_s F T_x F^T)
                - log 2F1(a, (nu+n_t)/2; nu/2; T_s F T_t F^T)

    with ``a = (nu+n_s)/2``. Rank-one updates give ``|T_x|`` and ``T_x``.
    """
    p = clf.posts[y]
    d = p.d
    X = _as_points(X, d)
    shape = X.shape[:-1]
    X = X.reshape(-1, d)
    dof = p.nu + p.n_t
    s = p.kappa_tn / (p.kappa_tn + 1.0)
    v = p.m_tn - X
    Tv = v @ p.T_t
    q = np.einsum("ni,ni->n", Tv, v)
    denom = 1.0 + s * q
    _, ld_t = np.linalg.slogdet(p.T_t)
    ld_x = ld_t - np.log(denom)
    out = (-0.5 * d * np.log(np.pi) + 0.5 * d * np.log(s)
           + ln_mv_gamma(d, (dof + 1) / 2) - ln_mv_gamma(d, dof / 2)
           + 0.5 * (dof + 1) * ld_x - 0.5 * dof * ld_t)
    if p.coupled:
        a = (p.nu + p.n_s) / 2
        Ls = np.linalg.cholesky(p.T_s)
        G = p.F.T @ Ls
        base = G.T @ p.T_t @ G
        u = Tv @ G
        Xx = base[None] - (s / denom)[:, None, None] * u[:, :, None] * u[:, None, :]
        eig_x = np.linalg.eigvalsh(0.5 * (Xx + np.swapaxes(Xx, -1, -2)))
        eig_t = np.linalg.eigvalsh(0.5 * (base + base.T))
        out = (out + hyp2f1_laplace_ln(a, (dof + 1) / 2, p.nu / 2, eig_x)
               - hyp2f1_laplace_ln(a, dof / 2, p.nu / 2, eig_t))
    return out.reshape(shape)


def predict(clf, x):
    """Predicted label(s); exact ties go to class 0."""
    return clf.predict(x)


# ---------------------------------------------------------------------------
# True errors


def linear_true_error(clf, theta, y):
    """Exact class-``y`` error of a linear rule under ``N(mu, Lam^{-1})``.

    ``theta`` may be a :class:`ParamBatch`, in which case an array is returned.
    """
    if not np.any(clf.a != 0):
        raise DegenerateClassifierError("linear direction is zero")
    mu = np.asarray(theta.mu, dtype=float)
    Lam = np.asarray(theta.Lam, dtype=float)
    g = mu @ clf.a + clf.b
    sol = np.linalg.solve(Lam, np.broadcast_to(clf.a, mu.shape)[..., None])[..., 0]
    sd = np.sqrt(np.einsum("...i,i->...", sol, clf.a))
    z = (g if y == 0 else -g) / sd
    out = std_normal_cdf(z)
    return float(out) if np.ndim(out) == 0 else out


def _whitening(Lam):
    """``W`` with ``W W^T = Lam^{-1}`` (batched): ``W = L^{-T}`` for ``Lam = L L^T``."""
    L = np.linalg.cholesky(Lam)
    eye = np.broadcast_to(np.eye(Lam.shape[-1]), Lam.shape)
    return np.swapaxes(np.linalg.solve(L, eye), -1, -2)


def mc_class_errors(clf, batch, y, n_test, rng, chunk_points=2_000_000):
    """Monte-Carlo class-``y`` error for each parameter draw in ``batch``.

    Draws ``n_test`` points from each ``N(mu_i, Lam_i^{-1})`` and returns
    the misclassified fraction per draw.
    """
    if isinstance(batch, DomainClassParams):
        batch = ParamBatch(batch.mu[None], batch.Lam[None])
    N, d = batch.mu.shape
    if isinstance(clf, ConstantClassifier):
        return np.full(N, float(clf.label != y))
    out = np.empty(N)
    step = max(1, chunk_points // max(1, n_test))
    for start in range(0, N, step):
        sl = slice(start, min(N, start + step))
        W = _whitening(batch.Lam[sl])
        Z = rng.standard_normal((W.shape[0], n_test, d))
        Xs = batch.mu[sl, None, :] + Z @ np.swapaxes(W, -1, -2)
        pred = clf.discriminant(Xs.reshape(-1, d)).reshape(W.shape[0], n_test) > 0
        out[sl] = np.mean(pred != bool(y), axis=1)
    return out


def mc_true_error(clf, theta0, theta1, c=0.5, n_test=1000, rng=None):
    """Test-set error ``(eps, eps0, eps1)`` with ``n_test`` fresh points per class."""
    if n_test < 1:
        raise InsufficientDataError("n_test must be >= 1")
    e0 = float(mc_class_errors(clf, theta0, 0, n_test, rng)[0])
    e1 = float(mc_class_errors(clf, theta1, 1, n_test, rng)[0])
    return c * e0 + (1 - c) * e1, e0, e1


def true_error(clf, theta0, theta1, c=0.5, n_test=1000, rng=None):
    """Analytic error for linear and constant rules, otherwise Monte Carlo."""
    if isinstance(clf, LinearClassifier):
        e0, e1 = linear_true_error(clf, theta0, 0), linear_true_error(clf, theta1, 1)
        return c * e0 + (1 - c) * e1, e0, e1
    if isinstance(clf, ConstantClassifier):
        e0, e1 = float(clf.label != 0), float(clf.label != 1)
        return c * e0 + (1 - c) * e1, e0, e1
    return mc_true_error(clf, theta0, theta1, c, n_test, rng)


# ---------------------------------------------------------------------------
# Trainable rules


def lda_rule(data):
    """Sample-LDA training rule."""
    d = data.d
    return lda_from_sample(compute_stats(data.class_points(0), d), compute_stats(data.class_points(1), d))


def qda_rule(data):
    """Plug-in QDA training rule."""
    d = data.d
    return qda_from_sample(compute_stats(data.class_points(0), d), compute_stats(data.class_points(1), d))


def constant_rule(label, d=1):
    """Rule that ignores its data."""
    def rule(data):
        return ConstantClassifier(label, data.d if isinstance(data, LabeledDataset) else d)
    return rule


def fixed_rule(clf):
    """Rule returning a pre-built classifier regardless of the data."""
    def rule(data):
        return clf
    return rule


def obtl_rule(hyper, data_s):
    """OBTL training rule with source data and hyperparameters held fixed."""
    def rule(data):
        return obtl_from_data(hyper, data, data_s)
    return rule
