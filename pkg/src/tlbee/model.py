"""Two-domain Gaussian-Wishart generative model.

For each class ``y`` the target and source precisions are the diagonal
blocks of a single ``2d x 2d`` Wishart draw, which couples the domains
through the off-diagonal scale block ``M_ts``. Means are Gaussian given
the precision, and observations are Gaussian given ``(mu, Lambda)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

TARGET = "target"
SOURCE = "source"


def _chol(mat, what="matrix"):
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"{what} is not positive definite") from exc


@dataclass(frozen=True)
class DomainClassParams:
    """Mean and precision of one class in one domain."""

    mu: np.ndarray
    Lam: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        Lam = np.atleast_2d(np.asarray(self.Lam, dtype=float))
        if Lam.shape != (mu.size, mu.size):
            raise DomainError(f"precision shape {Lam.shape} does not match mean of length {mu.size}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Lam", Lam)

    @property
    def d(self):
        return self.mu.size

    @property
    def cov(self):
        return np.linalg.inv(self.Lam)


@dataclass(frozen=True)
class ParamBatch:
    """A batch of ``N`` parameter draws, ``mu`` (N, d) and ``Lam`` (N, d, d)."""

    mu: np.ndarray
    Lam: np.ndarray

    def __len__(self):
        return self.mu.shape[0]

    def __getitem__(self, i):
        return DomainClassParams(self.mu[i], self.Lam[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass(frozen=True)
class LabeledDataset:
    """Labeled points from one domain."""

    points: np.ndarray
    labels: np.ndarray
    domain: str = TARGET

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        lab = np.asarray(self.labels).astype(int).ravel()
        if pts.shape[0] != lab.size:
            raise DomainError(f"{pts.shape[0]} points but {lab.size} labels")
        if not np.all(np.isfinite(pts)):
            raise DomainError("dataset contains non-finite entries")
        if np.any((lab != 0) & (lab != 1)):
            raise DomainError("labels must be 0 or 1")
        if self.domain not in (TARGET, SOURCE):
            raise DomainError(f"unknown domain tag {self.domain!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    @property
    def d(self):
        return self.points.shape[1]

    def __len__(self):
        return self.labels.size

    def class_points(self, y):
        return self.points[self.labels == y]

    def counts(self):
        return np.array([np.sum(self.labels == 0), np.sum(self.labels == 1)])

    def subset(self, idx):
        idx = np.asarray(idx)
        return LabeledDataset(self.points[idx], self.labels[idx], self.domain)

    def with_domain(self, domain):
        return LabeledDataset(self.points, self.labels, domain)

    @classmethod
    def from_classes(cls, x0, x1, domain=TARGET):
        x0 = np.atleast_2d(x0)
        x1 = np.atleast_2d(x1)
        pts = np.vstack([x0, x1])
        lab = np.r_[np.zeros(len(x0), int), np.ones(len(x1), int)]
        return cls(pts, lab, domain)

    @classmethod
    def empty(cls, d, domain=SOURCE):
        return cls(np.zeros((0, d)), np.zeros(0, int), domain)


@dataclass(frozen=True)
class JointHyper:
    """Hyperparameters of the two-domain model, one slot per class.

    Attributes
    ----------
    nu : ndarray, shape (2,)
        Wishart degrees of freedom per class, ``nu >= 2d``.
    kappa_t, kappa_s : ndarray, shape (2,)
        Mean-precision scalars.
    m_t, m_s : ndarray, shape (2, d)
        Prior means.
    M_t, M_s, M_ts : ndarray, shape (2, d, d)
        Blocks of the joint scale matrix.
    c : float
        Class-0 prior probability.
    """

    nu: np.ndarray
    kappa_t: np.ndarray
    kappa_s: np.ndarray
    m_t: np.ndarray
    m_s: np.ndarray
    M_t: np.ndarray
    M_s: np.ndarray
    M_ts: np.ndarray
    c: float = 0.5
    alpha: float = field(default=float("nan"), compare=False)

    def __post_init__(self):
        m_t = np.asarray(self.m_t, dtype=float)
        d = m_t.shape[-1]

        def per_class(v, shape):
            v = np.asarray(v, dtype=float)
            return np.broadcast_to(v, (2,) + shape).copy()

        object.__setattr__(self, "nu", per_class(self.nu, ()))
        object.__setattr__(self, "kappa_t", per_class(self.kappa_t, ()))
        object.__setattr__(self, "kappa_s", per_class(self.kappa_s, ()))
        object.__setattr__(self, "m_t", per_class(m_t, (d,)))
        object.__setattr__(self, "m_s", per_class(self.m_s, (d,)))
        for name in ("M_t", "M_s", "M_ts"):
            object.__setattr__(self, name, per_class(getattr(self, name), (d, d)))
        if np.any(self.nu < 2 * d):
            raise DomainError(f"nu must be >= 2d = {2 * d}")
        if np.any(self.kappa_t <= 0) or np.any(self.kappa_s <= 0):
            raise DomainError("kappa values must be positive")
        if not 0.0 <= self.c <= 1.0:
            raise DomainError("class prior c must lie in [0, 1]")
        for y in (0, 1):
            _chol(self.scale_matrix(y), f"joint scale matrix of class {y}")

    @property
    def d(self):
        return self.m_t.shape[-1]

    def scale_matrix(self, y):
        """Assembled ``2d x 2d`` scale matrix of class ``y``."""
        return np.block([[self.M_t[y], self.M_ts[y]], [self.M_ts[y].T, self.M_s[y]]])

    def replace(self, **changes):
        fields = {k: getattr(self, k) for k in
                  ("nu", "kappa_t", "kappa_s", "m_t", "m_s", "M_t", "M_s", "M_ts", "c", "alpha")}
        fields.update(changes)
        return JointHyper(**fields)

    def decoupled(self):
        """Copy with ``M_ts = 0``."""
        return self.replace(M_ts=np.zeros_like(self.M_ts), alpha=0.0)


def build_scale_matrix(k_t, k_s, alpha, d):
    """Scale blocks ``(k_t I, k_s I, alpha sqrt(k_t k_s) I)``.

    Raises
    ------
    DomainError
        If ``|alpha| >= 1`` or a scale is not positive.
    """
    if k_t <= 0 or k_s <= 0:
        raise DomainError("k_t and k_s must be positive")
    if not abs(alpha) < 1:
        raise DomainError(f"|alpha| must be < 1, got {alpha}")
    eye = np.eye(d)
    M_t, M_s, M_ts = k_t * eye, k_s * eye, alpha * np.sqrt(k_t * k_s) * eye
    _chol(np.block([[M_t, M_ts], [M_ts.T, M_s]]), "joint scale matrix")
    return M_t, M_s, M_ts


def synthetic_hyper(d, alpha, theta=0.0, nu=None, kappa=100.0, k_t=1.0, k_s=1.0,
                    source_offset=10.0, flip_source=False, c=0.5):
    """Hyperparameters of the synthetic studies.

    Defaults: ``nu = d + 20``, ``kappa_t = kappa_s = 100``, ``m_t^0 = 0``,
    ``m_t^1 = theta 1``, ``m_s^y = m_t^y + source_offset 1`` (or
    ``m_t^{1-y}`` when ``flip_source``) and ``k_t = k_s = 1``.
    """
    nu = d + 20 if nu is None else nu
    M_t, M_s, M_ts = build_scale_matrix(k_t, k_s, alpha, d)
    m_t = np.stack([np.zeros(d), np.full(d, float(theta))])
    m_s = m_t[::-1].copy() if flip_source else m_t + source_offset
    return JointHyper(nu=nu, kappa_t=kappa, kappa_s=kappa, m_t=m_t, m_s=m_s,
                      M_t=M_t, M_s=M_s, M_ts=M_ts, c=c, alpha=alpha)


def bartlett_factor(dof, p, rng, size=None):
    """Lower-triangular Bartlett factors ``A`` with ``A A^T ~ W_p(I, dof)``."""
    if not dof > p - 1:
        raise DomainError(f"Wishart dof must exceed p-1 = {p - 1}")
    n = 1 if size is None else int(size)
    A = np.zeros((n, p, p))
    A[:, np.arange(p), np.arange(p)] = np.sqrt(rng.chisquare(dof - np.arange(p), size=(n, p)))
    il = np.tril_indices(p, -1)
    A[:, il[0], il[1]] = rng.standard_normal((n, len(il[0])))
    return A[0] if size is None else A


def wishart_from_factor(scale, A):
    """``L A A^T L^T`` with ``L = chol(scale)``; maps Bartlett factors to ``W(scale, dof)``."""
    L = _chol(np.asarray(scale, dtype=float), "Wishart scale")
    LA = L @ A
    W = LA @ np.swapaxes(LA, -1, -2)
    return 0.5 * (W + np.swapaxes(W, -1, -2))


def sample_wishart(scale, dof, rng, size=None):
    """Wishart draws by the Bartlett decomposition.

    Parameters
    ----------
    scale : ndarray, shape (p, p)
    dof : float
        Degrees of freedom, ``dof > p - 1``.
    rng : numpy.random.Generator
    size : int, optional
        Number of draws. ``None`` returns a single matrix.
    """
    scale = np.asarray(scale, dtype=float)
    _chol(scale, "Wishart scale")
    return wishart_from_factor(scale, bartlett_factor(dof, scale.shape[0], rng, size))


def sample_joint_precisions(M, nu, rng, size=None):
    """Draw ``Lambda ~ W_2d(M, nu)`` and return its diagonal blocks."""
    M = np.asarray(M, dtype=float)
    d = M.shape[0] // 2
    if M.shape != (2 * d, 2 * d):
        raise DomainError("joint scale matrix must be 2d x 2d")
    W = sample_wishart(M, nu, rng, size)
    return W[..., :d, :d].copy(), W[..., d:, d:].copy()


def mean_from_noise(m, kappa, Lam, z):
    """Map standard normals ``z`` to ``N(m, (kappa Lam)^{-1})`` draws.

    ``Lam`` may be a single matrix or a batch matching ``z``'s leading axis.
    """
    L = _chol(kappa * np.asarray(Lam, dtype=float), "precision")
    # x = m + L^{-T} z has covariance (L L^T)^{-1}
    Lt = np.swapaxes(L, -1, -2)
    return np.asarray(m, dtype=float) + np.linalg.solve(Lt, np.asarray(z)[..., None])[..., 0]


def sample_mean(m, kappa, Lam, rng, size=None):
    """Draw ``mu ~ N(m, (kappa Lam)^{-1})``.

    With a batched ``Lam`` of shape (N, d, d) one mean per matrix is drawn.
    """
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    Lam = np.asarray(Lam, dtype=float)
    d = Lam.shape[-1]
    if Lam.ndim == 3:
        z = rng.standard_normal((Lam.shape[0], d))
    else:
        z = rng.standard_normal(d if size is None else (int(size), d))
    return mean_from_noise(m, kappa, Lam, z)


def generate_class_data(theta, n, rng):
    """``n`` i.i.d. draws from ``N(theta.mu, theta.Lam^{-1})``."""
    if n < 0:
        raise DomainError("n must be non-negative")
    z = rng.standard_normal((int(n), theta.d))
    L = _chol(theta.Lam, "precision")
    return theta.mu + np.linalg.solve(L.T, z.T).T


def generate_dataset(theta0, theta1, n0, n1, rng, domain=TARGET):
    """Labeled dataset with ``n0`` class-0 and ``n1`` class-1 points."""
    x0 = generate_class_data(theta0, n0, rng)
    x1 = generate_class_data(theta1, n1, rng)
    return LabeledDataset.from_classes(x0, x1, domain)


@dataclass(frozen=True)
class GenerativeInstance:
    """True parameters of both classes in both domains."""

    target: tuple
    source: tuple


def sample_generative_instance(hyper, rng):
    """Draw ``(mu, Lambda)`` for both classes and both domains from the prior."""
    target, source = [], []
    for y in (0, 1):
        Lt, Ls = sample_joint_precisions(hyper.scale_matrix(y), hyper.nu[y], rng)
        mu_t = sample_mean(hyper.m_t[y], hyper.kappa_t[y], Lt, rng)
        mu_s = sample_mean(hyper.m_s[y], hyper.kappa_s[y], Ls, rng)
        target.append(DomainClassParams(mu_t, Lt))
        source.append(DomainClassParams(mu_s, Ls))
    return GenerativeInstance(tuple(target), tuple(source))
