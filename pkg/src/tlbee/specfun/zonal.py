"""Integer partitions, generalized Pochhammer symbols and zonal polynomials.

Zonal polynomials are obtained from Jack polynomials with parameter
``alpha = 2`` through the branching recursion over horizontal strips,

    J_k(x_1..x_n) = sum_mu J_mu(x_1..x_{n-1}) x_n^{|k|-|mu|} beta_{k mu},

and normalized so that ``sum_{k |- K} C_k(X) = (tr X)^K``.
"""

from functools import lru_cache
from itertools import product
from math import factorial, lgamma

import numpy as np

from ..errors import DomainError

ALPHA = 2.0
MAX_DEGREE = 120


@lru_cache(maxsize=None)
def partitions(k, max_parts=None):
    """All partitions of ``k`` with at most ``max_parts`` parts.

    Parameters
    ----------
    k : int
        Weight of the partitions.
    max_parts : int, optional
        Upper bound on the number of parts. ``None`` means no bound.

    Returns
    -------
    tuple of tuple of int
        Non-increasing tuples, in reverse lexicographic order. ``k = 0``
        yields the single empty partition.
    """
    if k < 0:
        raise DomainError("partition weight must be non-negative")
    limit = k if max_parts is None else min(k, max_parts)
    out = []

    def rec(remaining, largest, prefix):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        if len(prefix) == limit:
            return
        for part in range(min(remaining, largest), 0, -1):
            prefix.append(part)
            rec(remaining - part, part, prefix)
            prefix.pop()

    rec(k, k, [])
    return tuple(out)


def _check_partition(kappa, d=None):
    kappa = tuple(int(p) for p in kappa)
    if any(p <= 0 for p in kappa):
        raise DomainError(f"partition parts must be positive: {kappa}")
    if any(kappa[i] < kappa[i + 1] for i in range(len(kappa) - 1)):
        raise DomainError(f"partition must be non-increasing: {kappa}")
    if d is not None and len(kappa) > d:
        raise DomainError(f"partition {kappa} has more than d={d} parts")
    return kappa


def _conjugate(kappa):
    if not kappa:
        return ()
    return tuple(sum(1 for p in kappa if p > j) for j in range(kappa[0]))


def gen_pochhammer(a, kappa, d=None):
    """Generalized Pochhammer symbol ``(a)_kappa = prod_i (a - (i-1)/2)_{k_i}``.

    Examples
    --------
    >>> gen_pochhammer(3.0, (2, 1))
    30.0
    """
    kappa = _check_partition(kappa, d)
    out = 1.0
    for i, k in enumerate(kappa):
        shift = a - 0.5 * i
        for j in range(k):
            out *= shift + j
    return float(out)


def _log_abs_pochhammer(a, kappa):
    """log|(a)_kappa| and its sign; sign 0 when a factor vanishes."""
    logv, sign = 0.0, 1.0
    for i, k in enumerate(kappa):
        vals = (a - 0.5 * i) + np.arange(k)
        if np.any(vals == 0):
            return -np.inf, 0.0
        logv += float(np.sum(np.log(np.abs(vals))))
        if np.count_nonzero(vals < 0) % 2:
            sign = -sign
    return logv, sign


def _hooks(kappa):
    """Upper and lower hook lengths of every box, alpha = 2."""
    conj = _conjugate(kappa)
    upper, lower = {}, {}
    for i, ki in enumerate(kappa, start=1):
        for j in range(1, ki + 1):
            leg = conj[j - 1] - i
            arm = ki - j
            upper[i, j] = leg + ALPHA * (arm + 1)
            lower[i, j] = leg + 1 + ALPHA * arm
    return upper, lower


@lru_cache(maxsize=None)
def _j_norm(kappa):
    upper, lower = _hooks(kappa)
    return float(np.prod([upper[b] * lower[b] for b in upper])) if kappa else 1.0


@lru_cache(maxsize=None)
def _beta(kappa, mu):
    """Branching coefficient for the horizontal strip kappa / mu."""
    ck, cm = _conjugate(kappa), _conjugate(mu)
    cm = cm + (0,) * (len(ck) - len(cm))
    up_k, lo_k = _hooks(kappa)
    up_m, lo_m = _hooks(mu)
    num, den = 1.0, 1.0
    for (i, j) in up_k:
        num *= up_k[i, j] if ck[j - 1] == cm[j - 1] else lo_k[i, j]
    for (i, j) in up_m:
        den *= up_m[i, j] if ck[j - 1] == cm[j - 1] else lo_m[i, j]
    return num / den


@lru_cache(maxsize=None)
def _strips(kappa):
    """Partitions mu with kappa / mu a horizontal strip."""
    ranges = [range(kappa[i + 1] if i + 1 < len(kappa) else 0, kappa[i] + 1)
              for i in range(len(kappa))]
    out = []
    for mu in product(*ranges):
        out.append(tuple(p for p in mu if p > 0))
    return tuple(out)


class _JackEvaluator:
    """Memoized Jack polynomials J_kappa at one fixed spectrum."""

    def __init__(self, x):
        self.x = tuple(float(v) for v in x)
        self.memo = {}

    def __call__(self, kappa, n=None):
        n = len(self.x) if n is None else n
        if not kappa:
            return 1.0
        if len(kappa) > n:
            return 0.0
        key = (kappa, n)
        if key in self.memo:
            return self.memo[key]
        xn = self.x[n - 1]
        if n == 1:
            k = kappa[0]
            val = xn ** k * float(np.prod(1.0 + ALPHA * np.arange(k)))
        else:
            weight = sum(kappa)
            val = 0.0
            for mu in _strips(kappa):
                if len(mu) > n - 1:
                    continue
                power = weight - sum(mu)
                if power and xn == 0.0:
                    continue
                val += self(mu, n - 1) * xn ** power * _beta(kappa, mu)
        self.memo[key] = val
        return val


def _zonal_from_jack(kappa, jack_value):
    k = sum(kappa)
    return ALPHA ** k * factorial(k) / _j_norm(kappa) * jack_value


def zonal(kappa, eigs, _evaluator=None):
    """Zonal polynomial ``C_kappa`` evaluated at a spectrum.

    Parameters
    ----------
    kappa : sequence of int
        Partition (non-increasing positive parts).
    eigs : array_like
        Eigenvalues of the symmetric matrix argument.

    Returns
    -------
    float
    """
    x = np.atleast_1d(np.asarray(eigs, dtype=float))
    kappa = _check_partition(kappa, len(x))
    if sum(kappa) > MAX_DEGREE:
        raise DomainError(f"zonal polynomials supported up to degree {MAX_DEGREE}")
    if not np.all(np.isfinite(x)):
        raise DomainError("spectrum must be finite")
    ev = _evaluator if _evaluator is not None else _JackEvaluator(x)
    return _zonal_from_jack(kappa, ev(kappa))


def log_zonal_identity(kappa, m):
    """log C_kappa(I_m), closed form.

    Uses ``C_k(I_m) / k! = 4^k (m/2)_k prod_{i<j<=p}(2k_i - 2k_j - i + j)
    / prod_{i<=p}(2k_i + p - i)!`` with ``p`` the number of parts.
    """
    kappa = _check_partition(kappa, m)
    k = sum(kappa)
    if k == 0:
        return 0.0
    p = len(kappa)
    logv = 2 * k * np.log(2.0) + lgamma(k + 1)
    lp, sign = _log_abs_pochhammer(m / 2.0, kappa)
    if sign <= 0:
        raise DomainError("non-positive Pochhammer symbol at identity")
    logv += lp
    for i in range(p):
        for j in range(i + 1, p):
            logv += np.log(2 * kappa[i] - 2 * kappa[j] - i + j)
        logv -= lgamma(2 * kappa[i] + p - i)
    return float(logv)
