"""Parametric selection-probability models pi(y, alpha) fitted by maximum likelihood."""

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import special, stats

from .errors import BinCollapseWarning, DegenerateResponseError, SeparationError

logger = logging.getLogger(__name__)

_MIN_OBSERVATIONS = 10
_MAX_ITERATIONS = 100
_GRADIENT_TOL = 1e-8
_MAX_HALVINGS = 30
_SEPARATION_NORM = 30.0
_DEFAULT_FLOOR = 0.01
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class Family(Enum):
    LOGIT = 1
    PROBIT = 2


@dataclass(frozen=True)
class SelectionModel:
    """Fitted binary model P(delta = 1 | Y = y) = link(alpha0 + alpha1*y)."""

    family: Family
    alpha: tuple
    floor: float = _DEFAULT_FLOOR
    converged: bool = True
    iterations: int = 0
    loglik: float = float("nan")
    loglik_trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not isinstance(self.family, Family):
            raise TypeError("SelectionModel.family must be a Family.")
        if len(self.alpha) != 2:
            raise TypeError("SelectionModel.alpha must be an (intercept, slope) pair.")
        if not 0.0 < self.floor < 1.0:
            raise ValueError("SelectionModel.floor must lie in (0, 1).")


@dataclass(frozen=True)
class HosmerLemeshowResult:
    statistic: float
    dof: int
    pvalue: float
    groups: int
    collapsed: bool = False


def _linkProbability(family, eta):
    if family == Family.LOGIT:
        return special.expit(eta)
    return special.ndtr(eta)


def _logLikelihood(family, eta, delta):
    if family == Family.LOGIT:
        return float(np.sum(
            -delta * np.logaddexp(0.0, -eta) - (1.0 - delta) * np.logaddexp(0.0, eta)))
    return float(np.sum(
        delta * special.log_ndtr(eta) + (1.0 - delta) * special.log_ndtr(-eta)))


def _scoreAndHessian(family, design, eta, delta):
    """Return gradient and Hessian of the log-likelihood in alpha."""
    if family == Family.LOGIT:
        p = special.expit(eta)
        score = delta - p
        curvature = p * (1.0 - p)
    else:
        q = 2.0 * delta - 1.0
        z = q * eta
        # Inverse Mills ratio phi(z)/Phi(z), computed in logs for stability
        mills = np.exp(-0.5 * z * z - _LOG_SQRT_2PI - special.log_ndtr(z))
        score = q * mills
        curvature = mills * (mills + z)
    gradient = design.T @ score
    hessian = -(design.T * curvature) @ design
    return gradient, hessian


def _checkInputs(y, delta):
    y = np.asarray(y, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if y.ndim != 1 or y.shape != delta.shape:
        raise ValueError("y and delta must be 1D arrays of equal length.")
    if len(y) < _MIN_OBSERVATIONS:
        raise ValueError("at least {0} observations are required.".format(_MIN_OBSERVATIONS))
    if not np.all((delta == 0) | (delta == 1)):
        raise ValueError("delta must contain only 0 and 1.")
    return y, delta


def fitSelection(family, y, delta, floor=_DEFAULT_FLOOR):
    """Fit pi(y, alpha) by Newton iterations with step halving."""
    y, delta = _checkInputs(y, delta)
    if np.all(delta == 1) or np.all(delta == 0):
        raise DegenerateResponseError("delta is constant; selection model is not identified")

    design = np.column_stack([np.ones_like(y), y])
    alpha = np.zeros(2)
    eta = design @ alpha
    loglik = _logLikelihood(family, eta, delta)
    trace = [loglik]
    iterations = 0

    while iterations < _MAX_ITERATIONS:
        gradient, hessian = _scoreAndHessian(family, design, eta, delta)
        if np.linalg.norm(gradient) <= _GRADIENT_TOL:
            break
        step = np.linalg.solve(-hessian, gradient)

        # Halve the Newton step until the likelihood does not decrease
        t = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            candidate = alpha + t * step
            eta_candidate = design @ candidate
            loglik_candidate = _logLikelihood(family, eta_candidate, delta)
            if loglik_candidate >= loglik:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            logger.debug("> fitSelection: step halving exhausted at iteration {0}".format(iterations))
            break

        alpha, eta, loglik = candidate, eta_candidate, loglik_candidate
        trace.append(loglik)
        iterations += 1
        if np.linalg.norm(alpha) > _SEPARATION_NORM:
            raise SeparationError(
                "coefficient norm {0:.3g} exceeds {1}; data appear separated".format(
                    np.linalg.norm(alpha), _SEPARATION_NORM))

    gradient, _ = _scoreAndHessian(family, design, eta, delta)
    converged = bool(np.linalg.norm(gradient) <= _GRADIENT_TOL)
    if not converged:
        logger.warning("> fitSelection: no convergence after {0} iterations (|grad|={1:.3g})".format(
            iterations, np.linalg.norm(gradient)))

    return SelectionModel(
        family=family,
        alpha=(float(alpha[0]), float(alpha[1])),
        floor=floor,
        converged=converged,
        iterations=iterations,
        loglik=loglik,
        loglik_trace=tuple(trace))


def logLikelihood(model, y, delta):
    """Unclamped log-likelihood of the model on (y, delta)."""
    y, delta = _checkInputs(y, delta)
    return _logLikelihood(model.family, model.alpha[0] + model.alpha[1] * y, delta)


def predictPi(model, y):
    """Selection probability at y, clamped below by the model floor."""
    eta = model.alpha[0] + model.alpha[1] * np.asarray(y, dtype=np.float64)
    pi = np.maximum(model.floor, _linkProbability(model.family, eta))
    if np.ndim(pi) == 0:
        return float(pi)
    return pi


def _mergeBins(observed, expected, counts, i):
    """Merge bin i into its right neighbour (left for the last bin)."""
    j = i + 1 if i + 1 < len(counts) else i - 1
    lo, hi = min(i, j), max(i, j)
    observed[lo] += observed[hi]
    expected[lo] += expected[hi]
    counts[lo] += counts[hi]
    del observed[hi], expected[hi], counts[hi]


def hosmerLemeshow(model, y, delta, groups=10):
    """Hosmer-Lemeshow goodness of fit test over groups of fitted probability."""
    if groups < 3:
        raise ValueError("Hosmer-Lemeshow needs at least 3 groups.")
    y = np.asarray(y, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if y.shape != delta.shape:
        raise ValueError("y and delta must have equal length.")
    if len(y) < groups:
        raise ValueError("need at least as many observations as groups.")

    fitted = predictPi(model, y)
    order = np.argsort(fitted, kind="mergesort")
    observed, expected, counts = [], [], []
    for members in np.array_split(order, groups):
        observed.append(float(np.sum(delta[members])))
        expected.append(float(np.sum(fitted[members])))
        counts.append(len(members))

    collapsed = False
    while True:
        bad = [i for i in range(len(counts))
               if expected[i] * (1.0 - expected[i] / counts[i]) <= 0.0]
        if not bad or len(counts) < 2:
            break
        _mergeBins(observed, expected, counts, bad[0])
        collapsed = True

    if collapsed:
        warnings.warn(
            "Hosmer-Lemeshow bins merged to {0} groups".format(len(counts)), BinCollapseWarning)
    if len(counts) < 3:
        raise DegenerateResponseError("too few distinct fitted probabilities for Hosmer-Lemeshow")

    observed = np.array(observed)
    expected = np.array(expected)
    counts = np.array(counts, dtype=np.float64)
    statistic = float(np.sum((observed - expected) ** 2 / (expected * (1.0 - expected / counts))))
    dof = len(counts) - 2
    pvalue = float(stats.chi2.sf(statistic, dof))
    return HosmerLemeshowResult(
        statistic=statistic, dof=dof, pvalue=pvalue, groups=len(counts), collapsed=collapsed)
