"""Inverse-probability-weighted local linear regression, density pilot and bandwidth rules."""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernel as kernel_mod
from .errors import (
    BandwidthFallbackWarning,
    DegenerateSupportError,
    InvalidBandwidthError,
    SingularWindowError,
)

logger = logging.getLogger(__name__)

_TRIM = 0.1
_ROT_CONSTANT = 2.0362  # quartic kernel, local linear, mean estimation
_ROT_DEGREE = 4
_SILVERMAN_FACTOR = 0.9
_IQR_SCALE = 1.34
_MIN_ROT_CASES = 10
_DET_RTOL = 1e-12
_NEGLIGIBLE = 1e-20
_CHUNK_ENTRIES = 2000000


@dataclass(frozen=True)
class EvalInterval:
    """Observed covariate range [a_hat, b_hat] and trimmed band interval [a0, b0]."""

    a_hat: float
    b_hat: float
    a0: float
    b0: float

    @property
    def length(self):
        return self.b0 - self.a0


@dataclass(frozen=True)
class FitConfig:
    kernel: kernel_mod.KernelSpec
    h: float
    h_f: float
    rho: float = 0.25

    def __post_init__(self):
        if not self.h > 0:
            raise InvalidBandwidthError("FitConfig.h must be positive, got {0}".format(self.h))
        if not self.h_f > 0:
            raise InvalidBandwidthError("FitConfig.h_f must be positive, got {0}".format(self.h_f))
        if not self.rho > 0.2:
            raise ValueError("FitConfig.rho must exceed 1/5, got {0}".format(self.rho))

    @classmethod
    def fromSample(cls, sample, kernel=None, rho=0.25):
        """Bandwidths by the rule-of-thumb recipe: h = h_rot log^-rho n, h_f by Silverman."""
        kernel = kernel if kernel is not None else kernel_mod.quarticKernel()
        h_rot = rotBandwidth(sample)
        h = scbBandwidth(h_rot, sample.n, rho)
        h_f = silvermanBandwidth(sample)
        logger.debug("> fromSample: n={0}, h_rot={1:.5g}, h={2:.5g}, h_f={3:.5g}".format(sample.n, h_rot, h, h_f))
        return cls(kernel=kernel, h=h, h_f=h_f, rho=rho)


@dataclass(frozen=True)
class LocalFit:
    """Grid evaluation of the weighted local linear estimator."""

    x: np.ndarray
    m_hat: np.ndarray
    count: np.ndarray
    valid: np.ndarray


def observedRange(sample):
    """Complete-case range and the 0.9/0.1 trimmed interval."""
    xc = sample.x_complete
    if len(np.unique(xc)) < 2:
        raise DegenerateSupportError("fewer than 2 distinct complete-case x values")
    a_hat = float(np.min(xc))
    b_hat = float(np.max(xc))
    a0 = (1.0 - _TRIM) * a_hat + _TRIM * b_hat
    b0 = (1.0 - _TRIM) * b_hat + _TRIM * a_hat
    return EvalInterval(a_hat=a_hat, b_hat=b_hat, a0=a0, b0=b0)


def _isNegligible(value, scale):
    return value <= _NEGLIGIBLE * scale


def rotBandwidth(sample):
    """Fan-Gijbels rule-of-thumb bandwidth from a global quartic pilot on complete cases."""
    xc = sample.x_complete
    yc = sample.y_complete
    n_complete = len(xc)
    if n_complete < _MIN_ROT_CASES:
        raise ValueError("rule-of-thumb bandwidth needs at least {0} complete cases".format(_MIN_ROT_CASES))
    interval = observedRange(sample)
    span = interval.b_hat - interval.a_hat

    pilot = np.polynomial.Polynomial.fit(xc, yc, _ROT_DEGREE)
    residuals = yc - pilot(xc)
    sigma2 = float(np.sum(residuals ** 2)) / (n_complete - (_ROT_DEGREE + 1))
    curvature = float(np.sum(pilot.deriv(2)(xc) ** 2))

    spread = float(np.sum((yc - yc.mean()) ** 2)) / n_complete
    if _isNegligible(sigma2, spread) or _isNegligible(curvature * span ** 4, n_complete * spread):
        fallback = span * n_complete ** (-0.2)
        warnings.warn(
            "rule-of-thumb pilot is degenerate (sigma2={0:.3g}, curvature={1:.3g}); "
            "using (b-a) n^-1/5 = {2:.6g}".format(sigma2, curvature, fallback),
            BandwidthFallbackWarning)
        return fallback

    return _ROT_CONSTANT * (sigma2 * span / curvature) ** 0.2


def scbBandwidth(h_rot, n, rho=0.25):
    """Undersmoothed band bandwidth h_rot * log(n)^-rho."""
    if not h_rot > 0:
        raise InvalidBandwidthError("h_rot must be positive, got {0}".format(h_rot))
    if n < 3:
        raise ValueError("n must be at least 3, got {0}".format(n))
    if not rho > 0.2:
        raise ValueError("rho must exceed 1/5, got {0}".format(rho))
    return h_rot * np.log(n) ** (-rho)


def silvermanBandwidth(sample):
    """0.9 min(sd, IQR/1.34) n^-1/5 over complete-case x."""
    xc = sample.x_complete
    if len(xc) < _MIN_ROT_CASES:
        raise ValueError("Silverman bandwidth needs at least {0} complete cases".format(_MIN_ROT_CASES))
    sd = float(np.std(xc, ddof=1))
    q75, q25 = np.percentile(xc, [75, 25])
    spread = min(sd, (q75 - q25) / _IQR_SCALE)
    if not spread > 0:
        spread = sd
    if not spread > 0:
        raise DegenerateSupportError("complete-case x has zero spread")
    return _SILVERMAN_FACTOR * spread * len(xc) ** (-0.2)


def _chunks(size, n_points):
    step = max(1, _CHUNK_ENTRIES // max(n_points, 1))
    for start in range(0, size, step):
        yield slice(start, min(start + step, size))


def _completeArrays(sample, pi_hat):
    pi_hat = np.asarray(pi_hat, dtype=np.float64)
    if pi_hat.shape != (sample.n,):
        raise ValueError("pi_hat must be aligned with the sample records")
    mask = sample.complete
    return sample.x[mask], sample.y[mask], pi_hat[mask]


def localSums(x_eval, xc, yc, weights, h, kernel):
    """Kernel-weighted moment sums at each evaluation point.

    Returns S0, S1, S2, T0, T1 and in-window counts, with
    S_j = sum w K_h(X - x)(X - x)^j and T_j = sum w K_h(X - x)(X - x)^j Y.
    """
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=np.float64))
    sums = np.zeros((6, len(x_eval)))
    for part in _chunks(len(x_eval), len(xc)):
        offsets = xc[np.newaxis, :] - x_eval[part, np.newaxis]
        k = kernel.eval(offsets / h) / h
        kw = k * weights
        kwd = kw * offsets
        sums[0, part] = kw.sum(axis=1)
        sums[1, part] = kwd.sum(axis=1)
        sums[2, part] = (kwd * offsets).sum(axis=1)
        sums[3, part] = (kw * yc).sum(axis=1)
        sums[4, part] = (kwd * yc).sum(axis=1)
        sums[5, part] = np.count_nonzero(k, axis=1)
    return sums


def _solveLocal(sums):
    s0, s1, s2, t0, t1, count = sums
    det = s0 * s2 - s1 * s1
    valid = (count >= 2) & (np.abs(det) > _DET_RTOL * np.abs(s0 * s2))
    with np.errstate(divide="ignore", invalid="ignore"):
        m_hat = np.where(valid, (s2 * t0 - s1 * t1) / det, np.nan)
    return m_hat, count.astype(np.int64), valid


def wllFitGrid(sample, pi_hat, x_eval, config):
    """Weighted local linear estimates m_hat(x, pi_hat) at every point of x_eval."""
    xc, yc, pc = _completeArrays(sample, pi_hat)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=np.float64))
    sums = localSums(x_eval, xc, yc, 1.0 / pc, config.h, config.kernel)
    m_hat, count, valid = _solveLocal(sums)
    return LocalFit(x=x_eval, m_hat=m_hat, count=count, valid=valid)


def wllFit(sample, pi_hat, x, config):
    """m_hat(x, pi_hat): intercept of the (delta/pi_hat) K_h weighted linear fit at x."""
    fit = wllFitGrid(sample, pi_hat, [x], config)
    if not fit.valid[0]:
        raise SingularWindowError(float(x), int(fit.count[0]))
    return float(fit.m_hat[0])


def densityGrid(sample, pi_hat, x_eval, h_f, kernel):
    """Inverse-probability-weighted kernel density at every point of x_eval."""
    if not h_f > 0:
        raise InvalidBandwidthError("h_f must be positive, got {0}".format(h_f))
    xc, _, pc = _completeArrays(sample, pi_hat)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=np.float64))
    weights = 1.0 / pc
    density = np.zeros(len(x_eval))
    for part in _chunks(len(x_eval), len(xc)):
        k = kernel.eval((xc[np.newaxis, :] - x_eval[part, np.newaxis]) / h_f) / h_f
        density[part] = (k * weights).sum(axis=1)
    return density / sample.n


def densityEstimate(sample, pi_hat, x, h_f, kernel):
    """f_hat_X(x) = n^-1 sum (delta/pi_hat) K_hf(X - x)."""
    return float(densityGrid(sample, pi_hat, [x], h_f, kernel)[0])
