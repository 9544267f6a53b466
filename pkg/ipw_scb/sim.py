"""Monte Carlo coverage studies of the weighted band against the complete-case band."""

import functools
import logging
import multiprocessing
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd
from scipy import integrate, special

from . import band as band_mod
from . import regress
from .config import Case, Mechanism
from .errors import BandError, FitError, ScenarioError
from .kernel import quarticKernel
from .observed import ObservedSample
from .selection import fitSelection

logger = logging.getLogger(__name__)

_MAX_FAILED_FRACTION = 0.1
_X_LOW = -1.0
_X_HIGH = 1.0
_Z_LIMIT = 10.0
_UNIFORM_BITS = 53


class ReplicationStatus(Enum):
    DONE = 1
    FAILED = 2


def trueMean(case, x):
    """Mean function of the design: sin(pi x) for cases 1-2, exp(-6x^3/5) for cases 3-4."""
    x = np.asarray(x, dtype=np.float64)
    if case in (Case.CASE1, Case.CASE2):
        return np.sin(np.pi * x)
    return np.exp(-1.2 * x ** 3)


def errorSd(case, x):
    """sigma(x): 1 for cases 1 and 3, 2 exp(x)/(exp(x)+1) for cases 2 and 4."""
    x = np.asarray(x, dtype=np.float64)
    if case in (Case.CASE1, Case.CASE3):
        return np.ones_like(x)
    return 2.0 * special.expit(x)


def selectionProbability(mechanism, params, y):
    """True P(delta = 1 | Y = y) under the generating mechanism."""
    eta = params[0] + params[1] * np.asarray(y, dtype=np.float64)
    if mechanism == Mechanism.PROBIT:
        return special.ndtr(eta)
    return np.minimum(special.expit(eta), mechanism.cap)


def replicationRng(base_seed, rep_index):
    """Counter-based stream that depends only on (base_seed, rep_index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([base_seed, rep_index])))


def _openUniform(rng, size):
    # Midpoints of a 2^-53 lattice, strictly inside (0, 1)
    k = rng.integers(0, 1 << _UNIFORM_BITS, size=size, dtype=np.int64)
    return (k + 0.5) / float(1 << _UNIFORM_BITS)


def generate(scenario, rep_index):
    """Draw replication rep_index of the scenario as an observed sample."""
    if not 0 <= rep_index < scenario.replications:
        raise ValueError("rep_index must lie in [0, {0}), got {1}".format(scenario.replications, rep_index))
    rng = replicationRng(scenario.base_seed, rep_index)
    n = scenario.n
    x = _X_LOW + (_X_HIGH - _X_LOW) * _openUniform(rng, n)
    eps = errorSd(scenario.case, x) * special.ndtri(_openUniform(rng, n))
    y = trueMean(scenario.case, x) + eps
    pi = selectionProbability(scenario.mechanism, scenario.params, y)
    delta = (_openUniform(rng, n) < pi).astype(np.int8)
    return ObservedSample(delta=delta, x=np.where(delta == 1, x, np.nan), y=y)


def selectedProbabilityFor(case, selection):
    """P(delta = 1) for a selection curve y -> pi(y), by nested quadrature over x and the error."""
    def inner(x):
        m = float(trueMean(case, x))
        sd = float(errorSd(case, x))
        value, _ = integrate.quad(
            lambda z: _normalPdf(z) * selection(m + sd * z), -_Z_LIMIT, _Z_LIMIT)
        return value
    total, _ = integrate.quad(inner, _X_LOW, _X_HIGH)
    return total / (_X_HIGH - _X_LOW)


@functools.lru_cache(maxsize=None)
def selectedProbability(case, mechanism, params):
    """P(delta = 1) under the design."""
    return selectedProbabilityFor(case, functools.partial(selectionProbability, mechanism, params))


def _normalPdf(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


def oracleVarianceFor(case, selection, x, kernel=None, p_selected=None):
    """Population d(x) = lam(K) E[eps^2/pi(Y) | X=x] / (P(delta=1) f_X(x)) for any selection curve."""
    kernel = kernel if kernel is not None else quarticKernel()
    if p_selected is None:
        p_selected = selectedProbabilityFor(case, selection)
    density = 1.0 / (_X_HIGH - _X_LOW)

    def single(point):
        m = float(trueMean(case, point))
        sd = float(errorSd(case, point))
        value, _ = integrate.quad(
            lambda z: (sd * z) ** 2 * _normalPdf(z) / selection(m + sd * z), -_Z_LIMIT, _Z_LIMIT)
        return kernel.lam * value / (p_selected * density)

    x = np.asarray(x, dtype=np.float64)
    values = np.array([single(point) for point in np.atleast_1d(x)])
    if x.ndim == 0:
        return float(values[0])
    return values


def oracleVariance(case, mechanism, params, x, kernel=None):
    """Population d(x) for a generating mechanism."""
    params = tuple(float(p) for p in params)
    return oracleVarianceFor(
        case, functools.partial(selectionProbability, mechanism, params), x, kernel,
        p_selected=selectedProbability(case, mechanism, params))


@dataclass(frozen=True)
class ReplicationRecord:
    rep_index: int
    status: ReplicationStatus
    covered: tuple = ()
    width: tuple = ()
    cc_covered: tuple = ()
    cc_width: tuple = ()
    message: str = ""


@dataclass(frozen=True)
class CoverageReport:
    """Coverage frequency and average width per level for the weighted and complete-case bands."""

    scenario: object
    levels: tuple
    coverage: tuple
    width: tuple
    cc_coverage: tuple
    cc_width: tuple
    failures: int
    completed: int

    def toDict(self):
        return {
            "scenario": self.scenario.toDict(),
            "failures": self.failures,
            "completed": self.completed,
            "levels": [
                {"alpha": alpha,
                 "level": _levelLabel(alpha),
                 "scb_coverage": self.coverage[i],
                 "scb_width": self.width[i],
                 "cc_coverage": self.cc_coverage[i],
                 "cc_width": self.cc_width[i]}
                for i, alpha in enumerate(self.levels)]}


def _levelLabel(alpha):
    return "{0:g}".format(round(1.0 - alpha, 10))


def replicationBands(scenario, rep_index):
    """Sample, weighted band and complete-case band of one replication at the first level."""
    sample = generate(scenario, rep_index)
    model = fitSelection(scenario.mechanism.working_family, sample.y, sample.delta, floor=scenario.pi_floor)
    interval = regress.observedRange(sample)
    config = regress.FitConfig.fromSample(sample, rho=scenario.rho)
    alpha = scenario.alpha_levels[0]
    scb = band_mod.buildBand(sample, model, config, interval, scenario.grid_size, alpha)
    cc = band_mod.completeCaseBand(sample, config, interval, scenario.grid_size, alpha)
    return sample, scb, cc


def replicate(scenario, rep_index):
    """Run one replication; fit and band failures are recorded, not raised."""
    try:
        _, scb, cc = replicationBands(scenario, rep_index)
    except (FitError, BandError) as err:
        logger.debug("> replicate: {0} rep {1} failed: {2}".format(scenario.label, rep_index, err))
        return ReplicationRecord(rep_index=rep_index, status=ReplicationStatus.FAILED, message=str(err))

    truth = trueMean(scenario.case, scb.grid)
    covered, width, cc_covered, cc_width = [], [], [], []
    for alpha in scenario.alpha_levels:
        leveled = scb.relevel(alpha)
        cc_leveled = cc.relevel(alpha)
        covered.append(leveled.covers(truth))
        width.append(leveled.width())
        cc_covered.append(cc_leveled.covers(truth))
        cc_width.append(cc_leveled.width())
    return ReplicationRecord(
        rep_index=rep_index,
        status=ReplicationStatus.DONE,
        covered=tuple(covered),
        width=tuple(width),
        cc_covered=tuple(cc_covered),
        cc_width=tuple(cc_width))


def runScenario(scenario, n_processes=multiprocessing.cpu_count()):
    """Replicate the scenario and aggregate coverage and width per level."""
    logger.info("> runScenario: {0}, {1} replications".format(scenario.label, scenario.replications))
    rep_ids = range(scenario.replications)
    if n_processes > 1 and scenario.replications > 1:
        with multiprocessing.Pool(n_processes) as pool:
            records = pool.map(functools.partial(replicate, scenario), rep_ids)
    else:
        records = [replicate(scenario, i) for i in rep_ids]

    done = [r for r in records if r.status == ReplicationStatus.DONE]
    failures = len(records) - len(done)
    if failures:
        logger.info("> runScenario: {0} failed replications: {1}".format(
            failures, [r.rep_index for r in records if r.status == ReplicationStatus.FAILED]))
    if failures > _MAX_FAILED_FRACTION * scenario.replications:
        raise ScenarioError(failures, scenario.replications)

    covered = np.array([r.covered for r in done], dtype=np.float64)
    width = np.array([r.width for r in done])
    cc_covered = np.array([r.cc_covered for r in done], dtype=np.float64)
    cc_width = np.array([r.cc_width for r in done])
    report = CoverageReport(
        scenario=scenario,
        levels=tuple(scenario.alpha_levels),
        coverage=tuple(float(v) for v in covered.mean(axis=0)),
        width=tuple(float(v) for v in width.mean(axis=0)),
        cc_coverage=tuple(float(v) for v in cc_covered.mean(axis=0)),
        cc_width=tuple(float(v) for v in cc_width.mean(axis=0)),
        failures=failures,
        completed=len(done))
    for i, alpha in enumerate(report.levels):
        logger.info("> runScenario: {0} level {1}: SCB {2:.3f}({3:.3f}), SCB-CC {4:.3f}({5:.3f})".format(
            scenario.label, _levelLabel(alpha), report.coverage[i], report.width[i],
            report.cc_coverage[i], report.cc_width[i]))
    return report


def _cell(coverage, width):
    return "{0:.3f}({1:.3f})".format(coverage, width)


def tableFrame(reports):
    """One row per (scenario, level) with "coverage(width)" cells."""
    if not reports:
        raise ValueError("emitTable needs at least one report")
    rows = []
    for report in reports:
        scenario = report.scenario
        for i, alpha in enumerate(report.levels):
            rows.append({
                "scenario": scenario.label,
                "case": scenario.case.value,
                "mechanism": scenario.mechanism.name.lower(),
                "params": "({0:g},{1:g})".format(*scenario.params),
                "n": scenario.n,
                "level": _levelLabel(alpha),
                "SCB": _cell(report.coverage[i], report.width[i]),
                "SCB-CC": _cell(report.cc_coverage[i], report.cc_width[i]),
                "failures": report.failures})
    return pd.DataFrame(rows)


def emitTable(reports, format="csv"):
    """Render reports as CSV or markdown text."""
    frame = tableFrame(reports)
    if format == "csv":
        return frame.to_csv(index=False)
    if format == "markdown":
        return frame.to_markdown(index=False, disable_numparse=True) + "\n"
    raise ValueError("format must be 'csv' or 'markdown', got {0!r}".format(format))


def plotData(scenario, rep_index=0):
    """Grid, true mean, estimates and limits of one replication for external plotting."""
    _, scb, cc = replicationBands(scenario, rep_index)
    frame = pd.DataFrame({
        "x": scb.grid,
        "m_true": trueMean(scenario.case, scb.grid),
        "m_hat": scb.m_hat,
        "m_hat_cc": cc.m_hat})
    for alpha in scenario.alpha_levels:
        label = _levelLabel(alpha)
        leveled = scb.relevel(alpha)
        cc_leveled = cc.relevel(alpha)
        frame["lower_" + label] = leveled.lower
        frame["upper_" + label] = leveled.upper
        frame["lower_cc_" + label] = cc_leveled.lower
        frame["upper_cc_" + label] = cc_leveled.upper
    return frame
