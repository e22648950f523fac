"""Bayes-error calibration by bisection over the class-1 mean offset."""

from dataclasses import dataclass

import numpy as np

from ..classifiers import _whitening, qda_from_params
from ..errors import CalibrationError
from ..model import DomainClassParams, mean_from_noise


@dataclass(frozen=True)
class CalibrationResult:
    """Calibrated offset ``theta`` and the target parameters it produces.

    ``error`` is the Bayes (true-parameter QDA) error measured on the
    calibration test set; ``iterations`` counts error evaluations.
    """

    theta: float
    error: float
    target: tuple
    iterations: int


def _target_params(hyper, theta, Lam_t, z_t):
    out = []
    for y in (0, 1):
        m = hyper.m_t[y] if y == 0 else np.full(hyper.d, float(theta))
        mu = mean_from_noise(m, hyper.kappa_t[y], Lam_t[y], z_t[y])
        out.append(DomainClassParams(mu, Lam_t[y]))
    return tuple(out)


def calibrate_bayes_error(hyper_template, Lam_t, z_t, tau, tol=0.005, rng=None,
                          n_test=1000, max_iter=50):
    """Find the offset ``theta`` (``m_t^1 = theta 1``) giving Bayes error ``tau``.

    The precisions ``Lam_t`` and the standard-normal mean noise ``z_t``
    are held fixed, as are the standard-normal test points, so the
    measured error is a deterministic, nearly monotone function of
    ``theta``. The bracket ``[0, hi]`` is validated first, with ``hi``
    doubled from 1 until the error drops to ``tau``.

    Parameters
    ----------
    hyper_template : JointHyper
        Supplies ``m_t^0``, ``kappa_t`` and the class prior ``c``.
    Lam_t, z_t : sequence of 2 arrays
        Target precisions ``(d, d)`` and mean noise ``(d,)`` per class.
    tau : float
        Target Bayes error in ``(0, 0.5]``.
    tol : float
        Accept when ``|error - tau| <= tol``.
    rng : numpy.random.Generator
        Source of the ``n_test`` per-class test normals.
    max_iter : int
        Cap on bisection steps.

    Raises
    ------
    CalibrationError
        If ``tau`` is not bracketed or the cap is reached; carries the
        closest error and its offset.
    """
    if not 0 < tau <= 0.5:
        raise ValueError("tau must lie in (0, 0.5]")
    d, c = hyper_template.d, hyper_template.c
    Z = [rng.standard_normal((int(n_test), d)) for _ in (0, 1)]
    W = [_whitening(np.asarray(L, dtype=float)) for L in Lam_t]
    evals = []

    def error(theta):
        params = _target_params(hyper_template, theta, Lam_t, z_t)
        clf = qda_from_params(*params)
        e = [np.mean((clf.discriminant(params[y].mu + Z[y] @ W[y].T) > 0) != bool(y))
             for y in (0, 1)]
        err = float(c * e[0] + (1 - c) * e[1])
        evals.append((abs(err - tau), theta, err, params))
        return err

    def done(err):
        return abs(err - tau) <= tol

    def result():
        _, theta, err, params = min(evals, key=lambda t: t[0])
        return CalibrationResult(float(theta), err, params, len(evals))

    def fail(msg):
        _, theta, err, _ = min(evals, key=lambda t: t[0])
        raise CalibrationError(f"{msg}; best error {err:.4f} at theta={theta:.4g}", err, theta)

    e0 = error(0.0)
    if done(e0):
        return result()
    if e0 < tau:
        fail(f"tau={tau} is not achievable: error at theta=0 is already {e0:.4f}")
    lo, hi = 0.0, 1.0
    while error(hi) > tau:
        if done(evals[-1][2]):
            return result()
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            fail("error does not fall to tau as theta grows")
    if done(evals[-1][2]):
        return result()
    for _ in range(int(max_iter)):
        mid = 0.5 * (lo + hi)
        e = error(mid)
        if done(e):
            return result()
        if e > tau:
            lo = mid
        else:
            hi = mid
    fail(f"bisection did not reach |error - {tau}| <= {tol} within {max_iter} steps")
