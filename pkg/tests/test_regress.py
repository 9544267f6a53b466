import numpy as np
import pytest
from scipy import integrate

from ipw_scb import regress
from ipw_scb.errors import (
    BandwidthFallbackWarning,
    DegenerateSupportError,
    InvalidBandwidthError,
    SingularWindowError,
)
from ipw_scb.observed import ObservedSample


def _noisySample(rng, n=500, scale=1.0):
    x = rng.uniform(-1.0, 1.0, n)
    y = np.sin(np.pi * x) + 0.3 * rng.normal(size=n)
    delta = (rng.uniform(size=n) < 0.8).astype(np.int8)
    return ObservedSample(delta=delta, x=scale * x, y=y)


class TestObservedRange:
    def test_trimmed_interval(self):
        sample = ObservedSample(delta=[1, 1, 0, 1], x=[0.0, 2.0, 9.0, 1.0], y=[0, 0, 0, 0])
        interval = regress.observedRange(sample)
        assert (interval.a_hat, interval.b_hat) == (0.0, 2.0)
        assert interval.a0 == pytest.approx(0.2)
        assert interval.b0 == pytest.approx(1.8)
        assert interval.length == pytest.approx(1.6)

    def test_single_value(self):
        sample = ObservedSample(delta=[1, 1], x=[0.5, 0.5], y=[0, 1])
        with pytest.raises(DegenerateSupportError):
            regress.observedRange(sample)


class TestBandwidths:
    def test_rot_scales_with_x(self, rng):
        sample = _noisySample(rng)
        scaled = ObservedSample(delta=sample.delta, x=10.0 * sample.x, y=sample.y)
        assert regress.rotBandwidth(scaled) == pytest.approx(10.0 * regress.rotBandwidth(sample), rel=1e-8)

    def test_rot_falls_back_on_linear_data(self, rng):
        x = rng.uniform(0.0, 2.0, 100)
        sample = ObservedSample(delta=np.ones(100), x=x, y=1.0 + 2.0 * x)
        with pytest.warns(BandwidthFallbackWarning):
            h = regress.rotBandwidth(sample)
        assert h == pytest.approx((x.max() - x.min()) * 100 ** -0.2)

    def test_rot_needs_complete_cases(self):
        sample = ObservedSample(delta=[1] * 5, x=np.arange(5.0), y=np.arange(5.0))
        with pytest.raises(ValueError):
            regress.rotBandwidth(sample)

    def test_scb_bandwidth(self):
        assert regress.scbBandwidth(0.4, 400) == pytest.approx(0.4 * np.log(400) ** -0.25)
        assert regress.scbBandwidth(0.4, 400, rho=0.5) < regress.scbBandwidth(0.4, 400)
        with pytest.raises(ValueError):
            regress.scbBandwidth(0.4, 400, rho=0.2)
        with pytest.raises(InvalidBandwidthError):
            regress.scbBandwidth(0.0, 400)

    def test_silverman(self, rng):
        sample = _noisySample(rng)
        xc = sample.x_complete
        q75, q25 = np.percentile(xc, [75, 25])
        expected = 0.9 * min(np.std(xc, ddof=1), (q75 - q25) / 1.34) * len(xc) ** -0.2
        assert regress.silvermanBandwidth(sample) == pytest.approx(expected)

    def test_silverman_zero_spread(self):
        sample = ObservedSample(delta=np.ones(12), x=np.full(12, 3.0), y=np.arange(12.0))
        with pytest.raises(DegenerateSupportError):
            regress.silvermanBandwidth(sample)

    def test_config_from_sample(self, rng):
        sample = _noisySample(rng)
        config = regress.FitConfig.fromSample(sample)
        assert config.h == pytest.approx(regress.scbBandwidth(regress.rotBandwidth(sample), sample.n))
        assert config.h_f == pytest.approx(regress.silvermanBandwidth(sample))

    def test_config_validation(self, kernel):
        with pytest.raises(InvalidBandwidthError):
            regress.FitConfig(kernel=kernel, h=0.0, h_f=0.1)
        with pytest.raises(ValueError):
            regress.FitConfig(kernel=kernel, h=0.1, h_f=0.1, rho=0.1)


class TestLocalLinear:
    def test_affine_reproduction(self, affineSample, fixedConfig, rng):
        pi_hat = rng.uniform(0.2, 1.0, affineSample.n)
        interval = regress.observedRange(affineSample)
        grid = np.linspace(interval.a0, interval.b0, 101)
        fit = regress.wllFitGrid(affineSample, pi_hat, grid, fixedConfig)
        assert fit.valid.all()
        np.testing.assert_allclose(fit.m_hat, 1.5 - 0.8 * grid, atol=1e-10)

    def test_single_point_matches_grid(self, affineSample, fixedConfig):
        pi_hat = np.full(affineSample.n, 0.5)
        grid = np.array([-0.3, 0.0, 0.4])
        fit = regress.wllFitGrid(affineSample, pi_hat, grid, fixedConfig)
        for x, value in zip(grid, fit.m_hat):
            assert regress.wllFit(affineSample, pi_hat, x, fixedConfig) == pytest.approx(value, abs=1e-14)

    def test_weights_cancel_when_constant(self, rng, fixedConfig):
        sample = _noisySample(rng)
        grid = np.linspace(-0.5, 0.5, 21)
        one = regress.wllFitGrid(sample, np.ones(sample.n), grid, fixedConfig)
        half = regress.wllFitGrid(sample, np.full(sample.n, 0.5), grid, fixedConfig)
        np.testing.assert_allclose(one.m_hat, half.m_hat, rtol=1e-12, atol=1e-13)

    def test_record_order_is_irrelevant(self, rng, fixedConfig):
        sample = _noisySample(rng)
        pi_hat = rng.uniform(0.3, 1.0, sample.n)
        order = rng.permutation(sample.n)
        shuffled = ObservedSample(delta=sample.delta[order], x=sample.x[order], y=sample.y[order])
        grid = np.linspace(-0.8, 0.8, 41)
        a = regress.wllFitGrid(sample, pi_hat, grid, fixedConfig)
        b = regress.wllFitGrid(shuffled, pi_hat[order], grid, fixedConfig)
        np.testing.assert_allclose(a.m_hat, b.m_hat, rtol=1e-12, atol=1e-13)

    def test_complete_data_is_ordinary_local_linear(self, rng, fixedConfig):
        n = 400
        x = rng.uniform(-1.0, 1.0, n)
        y = np.sin(np.pi * x) + 0.3 * rng.normal(size=n)
        sample = ObservedSample(delta=np.ones(n), x=x, y=y)
        grid = np.linspace(-0.8, 0.8, 33)
        fit = regress.wllFitGrid(sample, np.ones(n), grid, fixedConfig)

        expected = []
        for point in grid:
            root_k = np.sqrt(fixedConfig.kernel.eval((x - point) / fixedConfig.h))
            design = np.column_stack([np.ones(n), x - point]) * root_k[:, np.newaxis]
            coef = np.linalg.lstsq(design, y * root_k, rcond=None)[0]
            expected.append(coef[0])
        np.testing.assert_allclose(fit.m_hat, expected, rtol=0, atol=1e-12)

    def test_singular_window(self, kernel):
        sample = ObservedSample(delta=np.ones(12), x=np.arange(12.0), y=np.arange(12.0) ** 2)
        config = regress.FitConfig(kernel=kernel, h=0.4, h_f=1.0)
        with pytest.raises(SingularWindowError) as info:
            regress.wllFit(sample, np.ones(12), 3.0, config)
        assert info.value.count == 1
        fit = regress.wllFitGrid(sample, np.ones(12), [3.0, 3.5], config)
        assert not fit.valid.any()
        assert np.isnan(fit.m_hat).all()

    def test_misaligned_weights(self, affineSample, fixedConfig):
        with pytest.raises(ValueError):
            regress.wllFitGrid(affineSample, np.ones(3), [0.0], fixedConfig)


class TestDensity:
    def test_integrates_to_one_when_complete(self, rng, kernel):
        x = rng.uniform(0.0, 1.0, 2000)
        sample = ObservedSample(delta=np.ones(2000), x=x, y=x)
        grid = np.linspace(-0.5, 1.5, 4001)
        f = regress.densityGrid(sample, np.ones(2000), grid, 0.1, kernel)
        assert integrate.trapezoid(f, grid) == pytest.approx(1.0, abs=1e-4)
        assert np.all(f >= 0)

    def test_weighted_mass(self, rng, kernel):
        sample = _noisySample(rng)
        pi_hat = rng.uniform(0.5, 1.0, sample.n)
        grid = np.linspace(-2.0, 2.0, 8001)
        f = regress.densityGrid(sample, pi_hat, grid, 0.2, kernel)
        expected = np.sum(sample.delta / pi_hat) / sample.n
        assert integrate.trapezoid(f, grid) == pytest.approx(expected, rel=1e-4)

    def test_point_matches_grid(self, rng, kernel):
        sample = _noisySample(rng)
        pi_hat = np.full(sample.n, 0.8)
        f = regress.densityGrid(sample, pi_hat, [0.1], 0.2, kernel)[0]
        assert regress.densityEstimate(sample, pi_hat, 0.1, 0.2, kernel) == pytest.approx(f)

    def test_rejects_bad_bandwidth(self, affineSample, kernel):
        with pytest.raises(InvalidBandwidthError):
            regress.densityEstimate(affineSample, np.ones(affineSample.n), 0.0, 0.0, kernel)
