import numpy as np
import pytest

from ipw_scb import regress, sim
from ipw_scb.config import Case, Mechanism, Scenario
from ipw_scb.kernel import quarticKernel
from ipw_scb.observed import ObservedSample
from ipw_scb.selection import Family, SelectionModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def kernel():
    return quarticKernel()


def makeScenario(case=Case.CASE1, mechanism=Mechanism.LOGIT, params=(1.8, 1.0), n=400, **kwargs):
    return Scenario(case=case, mechanism=mechanism, params=params, n=n, **kwargs)


@pytest.fixture
def case1Sample():
    """Case 1 sample of size 400 under the logistic mechanism (1.8, 1)."""
    return sim.generate(makeScenario(replications=1, base_seed=7), 0)


@pytest.fixture
def affineSample(rng):
    """Noiseless y = 1.5 - 0.8 x with y-dependent missingness."""
    n = 300
    x = rng.uniform(-1.0, 1.0, n)
    y = 1.5 - 0.8 * x
    delta = (rng.uniform(size=n) < 0.3 + 0.4 * (y > 1.5)).astype(np.int8)
    delta[:10] = 1
    return ObservedSample(delta=delta, x=x, y=y)


@pytest.fixture
def logitModel():
    return SelectionModel(family=Family.LOGIT, alpha=(0.3, 0.7))


@pytest.fixture
def fixedConfig(kernel):
    return regress.FitConfig(kernel=kernel, h=0.3, h_f=0.25)


@pytest.fixture
def scenarioFactory():
    return makeScenario
