"""Hypergeometric functions of a symmetric matrix argument.

Two evaluation paths are provided:

* truncated zonal-polynomial series (exact up to a reported tail
  tolerance), intended for validation and small arguments;
* calibrated Laplace approximations in log space, vectorized over a
  batch of spectra, used wherever likelihood ratios are formed.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from ..errors import ConvergenceWarning, DomainError, NumericalFailure
from .zonal import _JackEvaluator, _log_abs_pochhammer, _zonal_from_jack, partitions


@dataclass(frozen=True)
class TruncationPolicy:
    """Stopping rule for the zonal series.

    Attributes
    ----------
    k_max : int
        Largest total degree summed.
    rel_tol : float
        Stop once the estimated remaining tail is below ``rel_tol`` times
        the running sum.
    """

    k_max: int = 30
    rel_tol: float = 1e-9

    def __post_init__(self):
        if self.k_max < 1:
            raise DomainError("k_max must be >= 1")
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")


@dataclass(frozen=True)
class SeriesResult:
    """Value of a truncated series together with its stopping diagnostics.

    ``partial_sums[k]`` is the sum through total degree ``k``.
    """

    value: float
    achieved_tol: float
    converged: bool
    degree: int
    partial_sums: tuple = ()

    def __float__(self):
        return float(self.value)


def _spectrum(eigs):
    x = np.atleast_1d(np.asarray(eigs, dtype=float))
    if x.ndim != 1 or x.size == 0:
        raise DomainError("spectrum must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(x)):
        raise DomainError("spectrum must be finite")
    return x


def _check_2f1_spectrum(x):
    if np.max(np.abs(x)) >= 1.0:
        raise DomainError(f"2F1 requires max|eig| < 1, got {np.max(np.abs(x)):.6g}")


@lru_cache(maxsize=256)
def _partition_array(k, d):
    parts = partitions(k, d)
    arr = np.zeros((len(parts), d), dtype=float)
    for r, p in enumerate(parts):
        arr[r, :len(p)] = p
    return parts, arr


def _log_poch_batch(a, arr):
    """log|(a)_kappa| and sign for each row of a padded partition array."""
    d = arr.shape[1]
    shifts = a - 0.5 * np.arange(d)
    if np.all(shifts > 0):
        return np.sum(gammaln(shifts + arr) - gammaln(shifts), axis=1), np.ones(len(arr))
    logs = np.empty(len(arr))
    signs = np.empty(len(arr))
    for r, row in enumerate(arr):
        kappa = tuple(int(v) for v in row if v > 0)
        logs[r], signs[r] = _log_abs_pochhammer(a, kappa)
    return logs, signs


def _log_zonal_identity_batch(arr):
    """log C_kappa(I_m) for each row of a padded partition array (m = width)."""
    n_rows, m = arr.shape
    k = arr[0].sum()
    out = np.full(n_rows, 2 * k * np.log(2.0) + gammaln(k + 1))
    lp, _ = _log_poch_batch(m / 2.0, arr)
    out += lp
    p = np.count_nonzero(arr, axis=1)
    for i in range(m):
        active_i = p > i
        out -= np.where(active_i, gammaln(np.where(active_i, 2 * arr[:, i] + p - i, 1.0)), 0.0)
        for j in range(i + 1, m):
            active = p > j
            diff = 2 * arr[:, i] - 2 * arr[:, j] - i + j
            out += np.where(active, np.log(np.where(active, diff, 1.0)), 0.0)
    return out


def _degree_terms(numer, denom, x, k, jack):
    """Sum over partitions of k of prod(numer)_kappa / prod(denom)_kappa C_kappa(X)/k!."""
    d = x.size
    parts, arr = _partition_array(k, d)
    logc = np.zeros(len(arr))
    sign = np.ones(len(arr))
    for a in numer:
        lp, sp = _log_poch_batch(a, arr)
        logc += lp
        sign *= sp
    for b in denom:
        lp, sp = _log_poch_batch(b, arr)
        if np.any(sp == 0):
            raise DomainError(f"denominator parameter {b} hits a pole of the series")
        logc -= lp
        sign *= sp
    logc -= gammaln(k + 1)
    if jack is None:
        # equal eigenvalues: C_kappa(tau I) = tau^k C_kappa(I)
        tau = x[0]
        if tau == 0.0:
            return 0.0
        lz = _log_zonal_identity_batch(arr) + k * np.log(abs(tau))
        s = sign * (np.sign(tau) ** k)
        return float(np.sum(s * np.exp(logc + lz)))
    total = 0.0
    for r, kappa in enumerate(parts):
        if sign[r] == 0:
            continue
        total += sign[r] * np.exp(logc[r]) * _zonal_from_jack(kappa, jack(kappa))
    return float(total)


def _series(numer, denom, eigs, trunc):
    trunc = trunc or TruncationPolicy()
    x = _spectrum(eigs)
    nz = x[x != 0.0]
    if nz.size == 0:
        return SeriesResult(1.0, 0.0, True, 0, (1.0,))
    equal = np.all(nz == nz[0])
    jack = None if equal else _JackEvaluator(nz)
    total = 1.0
    sums = [total]
    prev = None
    achieved = np.inf
    converged = False
    k = 0
    small_run = 0
    for k in range(1, trunc.k_max + 1):
        try:
            s = _degree_terms(numer, denom, nz, k, jack)
        except OverflowError as exc:
            raise NumericalFailure(
                f"series term of degree {k} overflows; the spectrum is too large "
                "for summation (use the Laplace form)") from exc
        total += s
        sums.append(total)
        if not np.isfinite(total):
            raise NumericalFailure(f"series partial sum is not finite at degree {k}")
        scale = abs(total) if total != 0 else 1.0
        ratio = abs(s) / abs(prev) if prev not in (None, 0.0) else np.inf
        if np.isfinite(ratio) and ratio < 1.0:
            tail = abs(s) * ratio / (1.0 - ratio)
        else:
            tail = abs(s)
        achieved = tail / scale
        prev = s
        small_run = small_run + 1 if achieved <= trunc.rel_tol else 0
        if small_run >= 2:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"series not converged at k_max={trunc.k_max}: tail estimate {achieved:.3g}",
            ConvergenceWarning, stacklevel=3)
    return SeriesResult(float(total), float(achieved), converged, k, tuple(sums))


def scalar_series_batch(numer, denom, x, trunc=None):
    """Scalar ``pFq`` series summed elementwise over an array of arguments.

    This is the ``d = 1`` case of the matrix series, vectorized for
    validation runs over many draws.

    Returns
    -------
    values : ndarray
    converged : bool
    """
    trunc = trunc or TruncationPolicy()
    x = np.asarray(x, dtype=float)
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(trunc.k_max):
        fac = np.prod([a + k for a in numer]) / np.prod([b + k for b in denom]) / (k + 1)
        with np.errstate(over="ignore", invalid="ignore"):
            term = term * fac * x
            total = total + term
        if not np.all(np.isfinite(total)):
            raise NumericalFailure(f"scalar series overflows at degree {k + 1}")
        if k >= 1 and np.all(np.abs(term) <= trunc.rel_tol * np.abs(total)):
            return total, True
    return total, False


def hyp1f1_series(a, b, eigs, trunc=None):
    """Confluent hypergeometric function ``1F1(a; b; X)`` by zonal series.

    Parameters
    ----------
    a, b : float
        Parameters; ``b`` must avoid the poles of ``(b)_kappa``.
    eigs : array_like
        Spectrum of the symmetric argument ``X``.
    trunc : TruncationPolicy, optional

    Returns
    -------
    SeriesResult
    """
    return _series((a,), (b,), eigs, trunc)


def hyp2f1_series(a, b, c, eigs, trunc=None):
    """Gauss hypergeometric function ``2F1(a, b; c; X)`` by zonal series.

    Requires ``max|eig| < 1``.
    """
    x = _spectrum(eigs)
    _check_2f1_spectrum(x)
    return _series((a, b), (c,), x, trunc)


# ---------------------------------------------------------------------------
# Calibrated Laplace approximations


def laplace_validity_flags(kind, a, b, c=None, d=1):
    """Notes on whether the integral representation behind a Laplace form holds.

    Returns a list of short strings, empty when the representation is valid.
    """
    flags = []
    upper = b if kind == "1f1" else c
    label = "b" if kind == "1f1" else "c"
    if a <= (d - 1) / 2:
        flags.append("a<=(d-1)/2: integral representation invalid")
    if upper - a <= (d - 1) / 2:
        flags.append(f"{label}-a<=(d-1)/2: integral representation invalid")
    return flags


def _batch_spectrum(eigs):
    x = np.asarray(eigs, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if not np.all(np.isfinite(x)):
        raise DomainError("spectrum must be finite")
    return x


def _log_pos(v, what):
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise NumericalFailure(f"Laplace approximation failed: non-positive {what}")
    return np.log(v)


def _pair_sum_log(T):
    d = T.shape[-1]
    iu = np.triu_indices(d)
    return np.sum(_log_pos(T[..., iu[0], iu[1]], "curvature term"), axis=-1)


def hyp1f1_laplace_ln(a, b, eigs):
    """Log of the calibrated Laplace approximation to ``1F1(a; b; X)``.

    Parameters
    ----------
    a, b : float
    eigs : array_like, shape (..., d)
        One or more spectra; the last axis holds the eigenvalues.

    Returns
    -------
    float or ndarray
        Log value, exactly 0 at ``X = 0``.

    Raises
    ------
    NumericalFailure
        If a factor of the approximation is non-positive.

    Notes
    -----
    With ``y_i = 2a / (b - x_i + sqrt((x_i - b)^2 + 4 a x_i))``

        log 1F1 ~ d b log b - d(d+1)/4 log b - 1/2 log R
                  + sum_i [a log(y_i/a) + (b-a) log((1-y_i)/(b-a)) + x_i y_i]

    and ``R = prod_{i<=j} [y_i y_j / a + (1-y_i)(1-y_j)/(b-a)]``. When
    ``b == a`` the exact identity ``1F1(a; a; X) = etr(X)`` is used.
    """
    x = _batch_spectrum(eigs)
    scalar = np.ndim(eigs) <= 1
    x2 = x.reshape(-1, x.shape[-1])
    out = np.zeros(x2.shape[0])
    active = np.any(x2 != 0.0, axis=-1)
    if np.any(active):
        xa = x2[active]
        if b == a:
            out[active] = np.sum(xa, axis=-1)
        else:
            d = xa.shape[-1]
            y = 2 * a / (b - xa + np.sqrt((xa - b) ** 2 + 4 * a * xa))
            ln_u = _log_pos(y / a, "y/a")
            ln_v = _log_pos((1 - y) / (b - a), "(1-y)/(b-a)")
            s = np.sum(a * ln_u + (b - a) * ln_v + xa * y, axis=-1)
            T = (y[:, :, None] * y[:, None, :] / a
                 + (1 - y)[:, :, None] * (1 - y)[:, None, :] / (b - a))
            lr = _pair_sum_log(T)
            out[active] = d * b * np.log(b) - d * (d + 1) / 4 * np.log(b) - 0.5 * lr + s
    out = out.reshape(x.shape[:-1])
    return float(out) if scalar else out


def hyp2f1_laplace_ln(a, b, c, eigs):
    """Log of the calibrated Laplace approximation to ``2F1(a, b; c; X)``.

    Parameters
    ----------
    a, b, c : float
    eigs : array_like, shape (..., d)
        Spectra with ``max|eig| < 1``.

    Returns
    -------
    float or ndarray

    Notes
    -----
    ``y_i`` is the stationary point of
    ``g(y) = -a log y - (c-a) log(1-y) + b log(1 - x_i y)``, i.e. the root of
    ``x(c-b) y^2 - (c + (a-b)x) y + a = 0`` taken in rationalized form
    ``y = 2a / (p + sqrt(p^2 - 4 a x (c-b)))`` with ``p = c + (a-b)x``.
    The cases ``c == a`` and ``c == b`` use the exact determinant identities.
    """
    x = _batch_spectrum(eigs)
    scalar = np.ndim(eigs) <= 1
    x2 = x.reshape(-1, x.shape[-1])
    if np.any(np.abs(x2) >= 1.0):
        raise DomainError(f"2F1 requires max|eig| < 1, got {np.max(np.abs(x2)):.6g}")
    out = np.zeros(x2.shape[0])
    active = np.any(x2 != 0.0, axis=-1)
    if np.any(active):
        xa = x2[active]
        if c == a:
            out[active] = -b * np.sum(np.log1p(-xa), axis=-1)
        elif c == b:
            out[active] = -a * np.sum(np.log1p(-xa), axis=-1)
        else:
            d = xa.shape[-1]
            p = c + (a - b) * xa
            disc = p ** 2 - 4 * a * xa * (c - b)
            if np.any(disc < 0):
                raise NumericalFailure("Laplace approximation failed: complex stationary point")
            y = 2 * a / (p + np.sqrt(disc))
            ln_u = _log_pos(y / a, "y/a")
            ln_v = _log_pos((1 - y) / (c - a), "(1-y)/(c-a)")
            ln_w = _log_pos(1 - xa * y, "1-x*y")
            s = np.sum(a * ln_u + (c - a) * ln_v - b * ln_w, axis=-1)
            q = xa * y * (1 - y) / (1 - xa * y)
            T = (y[:, :, None] * y[:, None, :] / a
                 + (1 - y)[:, :, None] * (1 - y)[:, None, :] / (c - a)
                 - b * q[:, :, None] * q[:, None, :] / (a * (c - a)))
            lr = _pair_sum_log(T)
            out[active] = d * c * np.log(c) - d * (d + 1) / 4 * np.log(c) - 0.5 * lr + s
    out = out.reshape(x.shape[:-1])
    return float(out) if scalar else out
