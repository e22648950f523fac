"""Target-parameter posteriors and importance weights.

The target posterior given both domains' data is not a standard family;
it is sampled by importance sampling from the target-only
Gaussian-Wishart posterior ``Phi*``. Both densities share the same
Gaussian factor for the mean, so the likelihood ratio depends on the
precision only.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DomainError, InsufficientDataError
from .model import ParamBatch, sample_wishart
from .specfun import (
    hyp1f1_laplace_ln,
    hyp1f1_series,
    hyp2f1_laplace_ln,
    hyp2f1_series,
    scalar_series_batch,
    TruncationPolicy,
)


@dataclass(frozen=True)
class ClassStats:
    """Sample size, mean and scatter matrix ``sum (x - xbar)(x - xbar)^T``."""

    n: int
    xbar: np.ndarray
    S: np.ndarray

    @property
    def empty(self):
        return self.n == 0

    @property
    def d(self):
        return self.S.shape[0]


def compute_stats(data, d=None):
    """Sufficient statistics of an ``(n, d)`` block of points.

    An empty block gives ``n = 0``, a zero scatter and a zero mean that
    must not be used (check :attr:`ClassStats.empty`).
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if d in (None, 1) else x.reshape(-1, d)
    n, dim = x.shape
    if n == 0:
        dim = d if d is not None else dim
        return ClassStats(0, np.zeros(dim), np.zeros((dim, dim)))
    xbar = x.mean(axis=0)
    r = x - xbar
    S = r.T @ r
    return ClassStats(n, xbar, 0.5 * (S + S.T))


def _inv_spd(A, what):
    try:
        cf = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"{what} is numerically singular or not positive definite") from exc
    inv = cho_solve(cf, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)


def _logdet_spd(A, what):
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"{what} is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _shrinkage(kappa, stats, m):
    if stats.n == 0:
        return np.zeros_like(stats.S)
    v = m - stats.xbar
    return kappa * stats.n / (kappa + stats.n) * np.outer(v, v)


def _posterior_mean(kappa, stats, m):
    if stats.n == 0:
        return np.asarray(m, dtype=float).copy()
    return (kappa * m + stats.n * stats.xbar) / (kappa + stats.n)


@dataclass(frozen=True)
class ImportanceDensity:
    """Target-only Gaussian-Wishart posterior: ``Lambda ~ W(M_tn, dof)``,
    ``mu | Lambda ~ N(m_tn, (kappa_tn Lambda)^{-1})``."""

    kappa_tn: float
    m_tn: np.ndarray
    M_tn: np.ndarray
    M_tn_inv: np.ndarray
    dof: float

    @property
    def d(self):
        return self.m_tn.size


@dataclass(frozen=True)
class TargetPosterior:
    """Parameters of the target posterior given target and source data.

    ``F = C^{-1} M_ts^T M_t^{-1}`` and ``C = M_s - M_ts^T M_t^{-1} M_ts``.
    With these, ``M_t^{-1} + F^T C F`` and ``C^{-1}`` are the diagonal
    blocks of the inverse joint scale matrix.
    """

    kappa_tn: float
    m_tn: np.ndarray
    T_t: np.ndarray
    T_t_inv: np.ndarray
    T_s: np.ndarray
    T_s_inv: np.ndarray
    F: np.ndarray
    C: np.ndarray
    FtCF: np.ndarray
    nu: float
    n_t: int
    n_s: int

    @property
    def d(self):
        return self.m_tn.size

    @property
    def coupled(self):
        return bool(np.any(self.F != 0.0))


def lemma1_params(hyper, y, stats_t):
    """Target-only posterior ``Phi*`` for class ``y``."""
    kappa, m = hyper.kappa_t[y], hyper.m_t[y]
    M_t_inv = _inv_spd(hyper.M_t[y], "M_t")
    M_tn_inv = M_t_inv + stats_t.S + _shrinkage(kappa, stats_t, m)
    M_tn_inv = 0.5 * (M_tn_inv + M_tn_inv.T)
    return ImportanceDensity(
        kappa_tn=float(kappa + stats_t.n),
        m_tn=_posterior_mean(kappa, stats_t, m),
        M_tn=_inv_spd(M_tn_inv, "M_tn^{-1}"),
        M_tn_inv=M_tn_inv,
        dof=float(hyper.nu[y] + stats_t.n),
    )


def theorem1_params(hyper, y, stats_t, stats_s):
    """Target posterior parameters for class ``y`` given both domains."""
    M_t, M_s, M_ts = hyper.M_t[y], hyper.M_s[y], hyper.M_ts[y]
    M_t_inv = _inv_spd(M_t, "M_t")
    C = M_s - M_ts.T @ M_t_inv @ M_ts
    C = 0.5 * (C + C.T)
    C_inv = _inv_spd(C, "Schur complement C")
    F = C_inv @ M_ts.T @ M_t_inv
    FtCF = F.T @ C @ F
    FtCF = 0.5 * (FtCF + FtCF.T)
    phi = lemma1_params(hyper, y, stats_t)
    T_t_inv = phi.M_tn_inv + FtCF
    T_s_inv = C_inv + stats_s.S + _shrinkage(hyper.kappa_s[y], stats_s, hyper.m_s[y])
    T_s_inv = 0.5 * (T_s_inv + T_s_inv.T)
    return TargetPosterior(
        kappa_tn=phi.kappa_tn,
        m_tn=phi.m_tn,
        T_t=_inv_spd(T_t_inv, "T_t^{-1}"),
        T_t_inv=T_t_inv,
        T_s=_inv_spd(T_s_inv, "T_s^{-1}"),
        T_s_inv=T_s_inv,
        F=F,
        C=C,
        FtCF=FtCF,
        nu=float(hyper.nu[y]),
        n_t=int(stats_t.n),
        n_s=int(stats_s.n),
    )


def sample_phi(phi, N, rng):
    """``N`` exact draws from the importance density."""
    if N < 1:
        raise DomainError("N must be >= 1")
    Lam = sample_wishart(phi.M_tn, phi.dof, rng, size=N)
    L = np.linalg.cholesky(phi.kappa_tn * Lam)
    z = rng.standard_normal((N, phi.d))
    mu = phi.m_tn + np.linalg.solve(np.swapaxes(L, -1, -2), z[..., None])[..., 0]
    return ParamBatch(mu, Lam)


def _sym_eigs(G, Lam):
    """Eigenvalues of ``G^T Lam G`` for a batch of symmetric ``Lam``."""
    X = np.swapaxes(G, -1, -2) @ Lam @ G
    return np.linalg.eigvalsh(0.5 * (X + np.swapaxes(X, -1, -2)))


def hyp_arguments(post, Lam):
    """Spectra of the 1F1 argument (per draw) and of the 2F1 argument.

    ``1/2 F Lam F^T T_s`` and ``T_s F T_t F^T`` are evaluated through the
    similar symmetric forms ``1/2 L_s^T F Lam F^T L_s`` and
    ``L_s^T F T_t F^T L_s`` with ``T_s = L_s L_s^T``.
    """
    Ls = np.linalg.cholesky(post.T_s)
    G = post.F.T @ Ls
    x1 = 0.5 * _sym_eigs(G, Lam)
    x2 = _sym_eigs(G, post.T_t)
    return x1, x2


def log_weight_constant(post, method="laplace", trunc=None):
    """Draw-independent part of the log importance weight."""
    if not post.coupled:
        return 0.0
    half_dof = (post.nu + post.n_t) / 2
    a = (post.nu + post.n_s) / 2
    ld = (_logdet_spd(post.T_t_inv, "T_t^{-1}")
          - _logdet_spd(post.T_t_inv - post.FtCF, "M_tn^{-1}"))
    _, x2 = hyp_arguments(post, np.zeros((post.d, post.d)))
    if method == "laplace":
        l2 = hyp2f1_laplace_ln(a, half_dof, post.nu / 2, x2)
    elif method == "series":
        l2 = np.log(hyp2f1_series(a, half_dof, post.nu / 2, x2,
                                  trunc or TruncationPolicy(200, 1e-13)).value)
    else:
        raise ValueError(f"unknown method {method!r}")
    return half_dof * ld - l2


def log_weight(theta, post, phi=None, method="laplace", trunc=None):
    """Log likelihood ratio ``log pi*(theta) - log Phi*(theta)``.

    Parameters
    ----------
    theta : DomainClassParams or ParamBatch or ndarray
        Draw(s); only the precision enters. An ndarray is read as a stack
        of precisions of shape (N, d, d) or a single (d, d) matrix.
    post : TargetPosterior
    phi : ImportanceDensity, optional
        Accepted for symmetry with the proposal; the ratio is computed
        from ``post`` alone since ``T_t^{-1} - M_tn^{-1} = F^T C F``.
    method : {"laplace", "series"}
        Evaluation of the hypergeometric terms. ``"series"`` is exact but
        slow and intended for small validation problems.

    Returns
    -------
    float or ndarray
        Exactly zero when the domains are decoupled (``F = 0``).
    """
    Lam = theta.Lam if hasattr(theta, "Lam") else np.asarray(theta, dtype=float)
    single = Lam.ndim == 2
    Lam = Lam[None] if single else Lam
    if phi is not None and not np.allclose(phi.M_tn_inv + post.FtCF, post.T_t_inv):
        raise DomainError("importance density does not match the target posterior")
    if not post.coupled:
        out = np.zeros(Lam.shape[0])
        return float(out[0]) if single else out
    a = (post.nu + post.n_s) / 2
    b = post.nu / 2
    trace_term = -0.5 * np.einsum("ij,nji->n", post.FtCF, Lam)
    x1, _ = hyp_arguments(post, Lam)
    if method == "laplace":
        l1 = hyp1f1_laplace_ln(a, b, x1)
    elif method == "series":
        pol = trunc or TruncationPolicy(400, 1e-14)
        if post.d == 1:
            vals, _ = scalar_series_batch((a,), (b,), x1[:, 0], pol)
            l1 = np.log(vals)
        else:
            l1 = np.array([np.log(hyp1f1_series(a, b, row, pol).value) for row in x1])
    else:
        raise ValueError(f"unknown method {method!r}")
    out = trace_term + l1 + log_weight_constant(post, method, trunc)
    return float(out[0]) if single else out


def require_class_counts(data_t, minimum=1):
    """Raise unless each class has at least ``minimum`` target points."""
    counts = data_t.counts()
    if np.any(counts < minimum):
        raise InsufficientDataError(
            f"need at least {minimum} target point(s) per class, got {counts.tolist()}")
