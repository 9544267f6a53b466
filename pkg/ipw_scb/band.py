"""Variance estimation, extreme-value constants and simultaneous confidence bands."""

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import regress
from .errors import (
    CoverageInfeasibleError,
    DegenerateSupportError,
    DensityFloorError,
    InvalidBandwidthError,
)
from .selection import predictPi

logger = logging.getLogger(__name__)

_DEFAULT_GRID_SIZE = 401
_MAX_FAILED_FRACTION = 0.05
_RESIDUAL_RTOL = 1e-12
_DET_RTOL = 1e-12


@dataclass(frozen=True)
class VarianceValue:
    d_hat: float
    empty_window: bool
    positive: bool


@dataclass(frozen=True, eq=False)
class BandEstimate:
    """Band m_hat +- (nh)^-1/2 r^1/2 d_hat^1/2 (b_h + q/a_h) over an equally spaced grid.

    Grid points with valid=False (singular or empty windows) carry NaN limits
    and are left out of coverage and sup statistics.
    """

    grid: np.ndarray
    m_hat: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    d_hat: np.ndarray
    valid: np.ndarray
    h: float
    n: int
    r_n: float
    a_h: float
    b_h: float
    alpha: float
    q_alpha: float
    interval: regress.EvalInterval
    complete_case: bool = False

    @property
    def failed_indices(self):
        return np.flatnonzero(~self.valid)

    @property
    def half_width(self):
        return 0.5 * (self.upper - self.lower)

    @property
    def level(self):
        return 1.0 - self.alpha

    def width(self):
        """Average band length over valid grid points."""
        return float(np.mean((self.upper - self.lower)[self.valid]))

    def covers(self, values, atol=0.0):
        """True when values lie inside the band at every valid grid point."""
        values = np.asarray(values, dtype=np.float64)
        inside = (self.lower - atol <= values) & (values <= self.upper + atol)
        return bool(np.all(inside[self.valid]))

    def relevel(self, alpha):
        """Same estimates and constants, limits rebuilt at another error probability."""
        q_alpha = gumbelQuantile(alpha)
        half = _halfWidth(self.d_hat, self.n, self.h, self.r_n, self.a_h, self.b_h, q_alpha)
        half = np.where(self.valid, half, np.nan)
        return dataclasses.replace(
            self, alpha=alpha, q_alpha=q_alpha, lower=self.m_hat - half, upper=self.m_hat + half)

    def toFrame(self):
        return pd.DataFrame({
            "x": self.grid,
            "m_hat": self.m_hat,
            "lower": self.lower,
            "upper": self.upper,
            "d_hat": self.d_hat,
            "valid": self.valid.astype(int)})

    def constants(self):
        return {
            "h": self.h,
            "n": self.n,
            "r_n": self.r_n,
            "a_h": self.a_h,
            "b_h": self.b_h,
            "alpha": self.alpha,
            "q_alpha": self.q_alpha,
            "a0": self.interval.a0,
            "b0": self.interval.b0}


@dataclass(frozen=True)
class NullTestResult:
    sup_stat: float
    t_star: float
    pvalue: float
    min_cover_level: float
    excluded: int = 0


def criticalConstants(h, a0, b0, kernel):
    """a_h = sqrt(-2 log(h/(b0-a0))), b_h = a_h + log(C(K)/(4 pi^2))/(2 a_h)."""
    length = b0 - a0
    if not 0 < h < length:
        raise InvalidBandwidthError(
            "bandwidth {0:.6g} must lie in (0, b0-a0={1:.6g})".format(h, length))
    a_h = float(np.sqrt(-2.0 * np.log(h / length)))
    b_h = a_h + 0.5 / a_h * float(np.log(kernel.cee / (4.0 * np.pi ** 2)))
    return a_h, b_h


def gumbelQuantile(alpha):
    """q_alpha solving exp(-2 exp(-q)) = 1 - alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1), got {0}".format(alpha))
    return float(-np.log(-0.5 * np.log1p(-alpha)))


def gumbelCdf(t):
    """Limit law exp(-2 exp(-t)) of the standardized maximal deviation."""
    return np.exp(-2.0 * np.exp(-np.asarray(t, dtype=np.float64)))


def _halfWidth(d_hat, n, h, r_n, a_h, b_h, q_alpha):
    return (n * h) ** -0.5 * r_n ** 0.5 * np.sqrt(d_hat) * (b_h + q_alpha / a_h)


def residuals(sample, pi_hat, config):
    """Complete-case residuals Y - m_hat(X, pi_hat) aligned with records (NaN elsewhere).

    Residuals whose local fit is singular are NaN and drop out of d_hat.
    """
    xc = sample.x_complete
    fit = regress.wllFitGrid(sample, pi_hat, xc, config)
    eps = sample.y_complete - fit.m_hat
    scale = float(np.max(np.abs(sample.y_complete)))
    # Rounding-level residuals are exact zeros
    eps = np.where(np.abs(eps) <= _RESIDUAL_RTOL * scale, 0.0, eps)
    out = np.full(sample.n, np.nan)
    out[sample.complete] = eps
    return out


def varianceGrid(sample, pi_hat, resid, f_values, x_eval, h, kernel):
    """d_hat(x) = h / (n_complete f_hat^2) sum (delta/pi_hat^2) K_h^2(X - x) eps^2 on a grid.

    Returns the values and a mask of empty windows (where d_hat is 0).
    """
    if not h > 0:
        raise InvalidBandwidthError("h must be positive, got {0}".format(h))
    mask = sample.complete
    xc = sample.x[mask]
    pc = np.asarray(pi_hat, dtype=np.float64)[mask]
    eps2 = np.nan_to_num(np.asarray(resid, dtype=np.float64)[mask] ** 2, nan=0.0)
    weights = eps2 / (pc * pc)
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=np.float64))
    f_values = np.atleast_1d(np.asarray(f_values, dtype=np.float64))

    total = np.zeros(len(x_eval))
    count = np.zeros(len(x_eval), dtype=np.int64)
    for part in regress._chunks(len(x_eval), len(xc)):
        k = kernel.eval((xc[np.newaxis, :] - x_eval[part, np.newaxis]) / h) / h
        total[part] = (k * k * weights).sum(axis=1)
        count[part] = np.count_nonzero(k, axis=1)

    empty = count == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        d_hat = np.where(empty | (f_values <= 0), 0.0, h * total / (sample.n_complete * f_values ** 2))
    return d_hat, empty


def varianceEstimate(sample, pi_hat, resid, f_hat, x, h, kernel):
    """d_hat(x) at a single point; f_hat is a callable density estimate."""
    f_value = float(f_hat(x))
    if not f_value > 0:
        raise DensityFloorError(float(x))
    d_hat, empty = varianceGrid(sample, pi_hat, resid, [f_value], [x], h, kernel)
    value = float(d_hat[0])
    return VarianceValue(d_hat=value, empty_window=bool(empty[0]), positive=value > 0)


def bandFromWeights(sample, pi_hat, config, interval, grid_size=_DEFAULT_GRID_SIZE, alpha=0.05,
                    complete_case=False):
    """Assemble the band from given selection probabilities aligned with records."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2, got {0}".format(grid_size))
    q_alpha = gumbelQuantile(alpha)
    a_h, b_h = criticalConstants(config.h, interval.a0, interval.b0, config.kernel)
    grid = interval.a0 + (interval.b0 - interval.a0) * np.arange(grid_size) / (grid_size - 1)

    fit = regress.wllFitGrid(sample, pi_hat, grid, config)
    f_values = regress.densityGrid(sample, pi_hat, grid, config.h_f, config.kernel)
    resid = residuals(sample, pi_hat, config)
    d_hat, empty = varianceGrid(sample, pi_hat, resid, f_values, grid, config.h, config.kernel)

    valid = fit.valid & (f_values > 0) & ~empty
    failed = np.flatnonzero(~valid)
    if len(failed) > _MAX_FAILED_FRACTION * grid_size:
        raise CoverageInfeasibleError(failed, grid_size)
    if len(failed):
        logger.info("> buildBand: {0} grid points excluded (indices {1})".format(
            len(failed), failed.tolist()))

    half = _halfWidth(d_hat, sample.n, config.h, sample.r_n, a_h, b_h, q_alpha)
    half = np.where(valid, half, np.nan)
    m_hat = np.where(valid, fit.m_hat, np.nan)
    return BandEstimate(
        grid=grid,
        m_hat=m_hat,
        lower=m_hat - half,
        upper=m_hat + half,
        d_hat=np.where(valid, d_hat, np.nan),
        valid=valid,
        h=config.h,
        n=sample.n,
        r_n=sample.r_n,
        a_h=a_h,
        b_h=b_h,
        alpha=alpha,
        q_alpha=q_alpha,
        interval=interval,
        complete_case=complete_case)


def buildBand(sample, selection_model, config, interval, grid_size=_DEFAULT_GRID_SIZE, alpha=0.05):
    """Inverse-selection-weighted simultaneous confidence band for m over [a0, b0]."""
    pi_hat = np.where(sample.complete, predictPi(selection_model, sample.y), 1.0)
    return bandFromWeights(sample, pi_hat, config, interval, grid_size, alpha)


def completeCaseBand(sample, config, interval, grid_size=_DEFAULT_GRID_SIZE, alpha=0.05):
    """Band from the complete cases alone, ignoring the missing covariates (SCB-CC).

    Bandwidths are recomputed on the complete subsample with n replaced by n_complete.
    """
    cc = sample.completeCaseSample()
    cc_config = regress.FitConfig.fromSample(cc, kernel=config.kernel, rho=config.rho)
    return bandFromWeights(cc, np.ones(cc.n), cc_config, interval, grid_size, alpha, complete_case=True)


def nullHypothesisTest(band, null_values):
    """Sup-deviation test of H0: m = m0 over the band grid."""
    null_values = np.asarray(null_values, dtype=np.float64)
    if null_values.shape != band.grid.shape:
        raise ValueError("null_values must be aligned with the band grid")
    if not np.all(np.isfinite(null_values)):
        raise ValueError("null_values must be finite")

    usable = band.valid & (np.nan_to_num(band.d_hat, nan=0.0) > 0)
    excluded = int(np.count_nonzero(~usable))
    if usable.any():
        scale = np.sqrt(band.n * band.h / band.r_n)
        deviation = scale * np.abs(band.m_hat[usable] - null_values[usable]) / np.sqrt(band.d_hat[usable])
        sup_stat = float(np.max(deviation))
    else:
        sup_stat = 0.0

    t_star = band.a_h * (sup_stat - band.b_h)
    pvalue = float(np.clip(-np.expm1(-2.0 * np.exp(-t_star)), 0.0, 1.0))
    return NullTestResult(
        sup_stat=sup_stat, t_star=t_star, pvalue=pvalue, min_cover_level=1.0 - pvalue, excluded=excluded)


def weightedLinearFit(x, y, weights):
    """Closed-form weighted least squares line; returns (intercept, slope)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    total = np.sum(weights)
    x_bar = np.sum(weights * x) / total
    y_bar = np.sum(weights * y) / total
    dx = x - x_bar
    sxx = np.sum(weights * dx * dx)
    if not sxx > _DET_RTOL * total * (np.max(np.abs(x)) ** 2 + 1.0):
        raise DegenerateSupportError("weighted design is singular; need 2 distinct x values")
    slope = np.sum(weights * dx * (y - y_bar)) / sxx
    return float(y_bar - slope * x_bar), float(slope)


def weightedLinearNull(sample, selection_model):
    """Linear null m0(x) = a + bx fitted by inverse-selection-weighted least squares."""
    mask = sample.complete
    weights = 1.0 / predictPi(selection_model, sample.y[mask])
    return weightedLinearFit(sample.x[mask], sample.y[mask], weights)
