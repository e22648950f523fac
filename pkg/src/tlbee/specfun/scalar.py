"""Scalar special functions used by the estimator."""

import numpy as np
from scipy import special

from ..errors import DomainError


def ln_mv_gamma(d, a):
    """Natural log of the multivariate gamma function ``Gamma_d(a)``.

    ``Gamma_d(a) = pi^{d(d-1)/4} prod_{i=1}^{d} Gamma(a - (i-1)/2)``.

    Parameters
    ----------
    d : int
        Dimension, ``d >= 1``.
    a : float or array_like
        Argument(s), each ``> (d-1)/2``.
    """
    if int(d) != d or d < 1:
        raise DomainError(f"d must be a positive integer, got {d}")
    d = int(d)
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr <= (d - 1) / 2):
        raise DomainError(f"ln_mv_gamma requires a > (d-1)/2 = {(d - 1) / 2}")
    shifts = 0.5 * np.arange(d)
    out = d * (d - 1) / 4 * np.log(np.pi) + np.sum(
        special.gammaln(a_arr[..., None] - shifts), axis=-1)
    return float(out) if out.ndim == 0 else out


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta function ``I(x; a, b)``.

    Thin wrapper over :func:`scipy.special.betainc` with explicit domain checks.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x_arr)) or np.any((x_arr < 0) | (x_arr > 1)):
        raise DomainError("reg_inc_beta requires 0 <= x <= 1")
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise DomainError("reg_inc_beta requires a > 0 and b > 0")
    out = special.betainc(a, b, x_arr)
    return float(out) if np.ndim(out) == 0 else out


def std_normal_cdf(z):
    """Standard normal distribution function."""
    out = special.ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out
