import numpy as np
import pytest
from scipy import special

from ipw_scb.errors import BinCollapseWarning, DegenerateResponseError, SeparationError
from ipw_scb.selection import (
    Family,
    SelectionModel,
    fitSelection,
    hosmerLemeshow,
    logLikelihood,
    predictPi,
)


def _draw(rng, family, alpha, n=5000):
    y = rng.normal(size=n)
    eta = alpha[0] + alpha[1] * y
    p = special.expit(eta) if family == Family.LOGIT else special.ndtr(eta)
    return y, (rng.uniform(size=n) < p).astype(np.int8)


class TestFitSelection:
    @pytest.mark.parametrize("family", [Family.LOGIT, Family.PROBIT])
    def test_recovers_parameters(self, rng, family):
        y, delta = _draw(rng, family, (0.5, 1.0))
        model = fitSelection(family, y, delta)
        assert model.converged
        assert model.family == family
        np.testing.assert_allclose(model.alpha, (0.5, 1.0), atol=0.15)

    def test_loglik_trace_is_nondecreasing(self, rng):
        y, delta = _draw(rng, Family.PROBIT, (-0.3, 1.5))
        model = fitSelection(Family.PROBIT, y, delta)
        assert np.all(np.diff(model.loglik_trace) >= 0)
        assert model.loglik == pytest.approx(logLikelihood(model, y, delta))

    def test_score_vanishes_at_fit(self, rng):
        y, delta = _draw(rng, Family.LOGIT, (1.0, -0.5))
        model = fitSelection(Family.LOGIT, y, delta)
        p = special.expit(model.alpha[0] + model.alpha[1] * y)
        assert abs(np.sum(delta - p)) < 1e-6
        assert abs(np.sum((delta - p) * y)) < 1e-6

    def test_constant_delta(self, rng):
        y = rng.normal(size=50)
        with pytest.raises(DegenerateResponseError):
            fitSelection(Family.LOGIT, y, np.ones(50))

    def test_separated_data(self):
        y = np.linspace(-1.0, 1.0, 200)
        with pytest.raises(SeparationError):
            fitSelection(Family.LOGIT, y, (y > 0).astype(int))

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            fitSelection(Family.LOGIT, np.zeros(5), np.ones(5))
        with pytest.raises(ValueError):
            fitSelection(Family.LOGIT, np.zeros(20), np.full(20, 2))

    @pytest.mark.parametrize("family", [Family.LOGIT, Family.PROBIT])
    def test_sign_flip_symmetry(self, rng, family):
        y, delta = _draw(rng, family, (0.4, 0.8))
        model = fitSelection(family, y, delta)
        flipped = fitSelection(family, -y, delta)
        np.testing.assert_allclose(flipped.alpha, (model.alpha[0], -model.alpha[1]), atol=1e-6)
        assert flipped.loglik == pytest.approx(model.loglik, rel=1e-10)

    def test_row_order_does_not_matter(self, rng):
        y, delta = _draw(rng, Family.LOGIT, (0.5, 1.0))
        order = rng.permutation(len(y))
        model = fitSelection(Family.LOGIT, y, delta)
        shuffled = fitSelection(Family.LOGIT, y[order], delta[order])
        np.testing.assert_allclose(shuffled.alpha, model.alpha, rtol=1e-8, atol=1e-10)

    @pytest.mark.slow
    def test_root_n_error_decay(self):
        truth = np.array([0.5, 1.0])
        errors = {}
        for n in (1000, 4000, 16000):
            runs = []
            for seed in range(20):
                y, delta = _draw(np.random.default_rng([n, seed]), Family.LOGIT, truth, n=n)
                runs.append(np.linalg.norm(np.array(fitSelection(Family.LOGIT, y, delta).alpha) - truth))
            errors[n] = np.median(runs)
        # quadrupling n halves the error
        assert 0.3 <= errors[4000] / errors[1000] <= 0.8
        assert 0.3 <= errors[16000] / errors[4000] <= 0.8


class TestPredictPi:
    def test_floor(self):
        model = SelectionModel(family=Family.LOGIT, alpha=(-20.0, 0.0))
        assert predictPi(model, 3.0) == 0.01
        assert isinstance(predictPi(model, 3.0), float)

    def test_matches_link(self, logitModel):
        y = np.array([-1.0, 0.0, 2.0])
        np.testing.assert_allclose(predictPi(logitModel, y), special.expit(0.3 + 0.7 * y))

    def test_model_validation(self):
        with pytest.raises(TypeError):
            SelectionModel(family="logit", alpha=(0.0, 1.0))
        with pytest.raises(ValueError):
            SelectionModel(family=Family.LOGIT, alpha=(0.0, 1.0), floor=0.0)

    def test_permutation_equivariant(self, rng, logitModel):
        y = rng.normal(scale=3.0, size=500)
        order = rng.permutation(500)
        np.testing.assert_array_equal(predictPi(logitModel, y[order]), predictPi(logitModel, y)[order])


class TestHosmerLemeshow:
    def test_correct_model_is_not_rejected(self, rng):
        y, delta = _draw(rng, Family.LOGIT, (0.5, 1.0))
        model = fitSelection(Family.LOGIT, y, delta)
        result = hosmerLemeshow(model, y, delta)
        assert result.dof == 8
        assert result.groups == 10
        assert 0.001 < result.pvalue <= 1.0

    def test_pvalue_is_upper_chi_square_tail(self, rng):
        y = rng.normal(size=5000)
        delta = (rng.uniform(size=5000) < special.expit(1.0 - 1.5 * y * y)).astype(int)
        result = hosmerLemeshow(fitSelection(Family.LOGIT, y, delta), y, delta)
        assert result.pvalue == pytest.approx(
            special.gammaincc(result.dof / 2.0, result.statistic / 2.0), rel=1e-10, abs=1e-300)

    def test_wrong_model_is_rejected(self, rng):
        y = rng.normal(size=5000)
        delta = (rng.uniform(size=5000) < special.expit(2.0 - 3.0 * y * y)).astype(int)
        model = fitSelection(Family.LOGIT, y, delta)
        assert hosmerLemeshow(model, y, delta).pvalue < 0.01

    @pytest.mark.slow
    def test_null_rejection_rate(self):
        rejected = 0
        for seed in range(200):
            y, delta = _draw(np.random.default_rng([5000, seed]), Family.LOGIT, (0.5, 1.0))
            model = fitSelection(Family.LOGIT, y, delta)
            rejected += hosmerLemeshow(model, y, delta).pvalue < 0.01
        assert rejected / 200 <= 0.03

    def test_saturated_bins_are_merged(self):
        y = np.concatenate([np.full(30, -50.0), np.full(30, 50.0)])
        delta = np.concatenate([np.zeros(30), np.ones(30)])
        model = SelectionModel(family=Family.LOGIT, alpha=(0.0, 1.0))
        with pytest.warns(BinCollapseWarning):
            result = hosmerLemeshow(model, y, delta)
        assert result.collapsed
        assert 3 <= result.groups < 10
        assert result.dof == result.groups - 2

    def test_all_bins_saturated(self):
        y = np.full(40, 50.0)
        delta = np.ones(40)
        delta[0] = 0
        model = SelectionModel(family=Family.LOGIT, alpha=(0.0, 1.0))
        with pytest.warns(BinCollapseWarning):
            with pytest.raises(DegenerateResponseError):
                hosmerLemeshow(model, y, delta)

    def test_group_count(self, logitModel):
        with pytest.raises(ValueError):
            hosmerLemeshow(logitModel, np.zeros(20), np.ones(20), groups=2)
