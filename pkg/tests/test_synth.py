import numpy as np
import pytest

from parcs import (
    RngSpec,
    StepModelSpec,
    UnknownScenarioError,
    ValidationError,
    autocorrelation,
    deterministic_mean,
    generate,
    ma_lag1_autocorrelation,
    scenario,
    scenario_names,
)
from parcs.synth import POISSON


class TestStepModelSpec:
    def test_cps_must_be_increasing_and_interior(self):
        with pytest.raises(ValidationError):
            StepModelSpec(T=10, baseline=0.0, cps=(5, 5), weights=[[1], [1]])
        with pytest.raises(ValidationError):
            StepModelSpec(T=10, baseline=0.0, cps=(1,), weights=[[1]])
        with pytest.raises(ValidationError):
            StepModelSpec(T=10, baseline=0.0, cps=(10,), weights=[[1]])

    def test_sigma_positive_for_gaussian(self):
        with pytest.raises(ValidationError):
            StepModelSpec(T=10, baseline=0.0, cps=(), sigma=0.0)

    def test_poisson_negative_rate_rejected(self):
        with pytest.raises(ValidationError, match="negative"):
            StepModelSpec(T=10, baseline=1.0, cps=(4,), weights=[[-2.0]], noise_kind=POISSON)


class TestDeterministicMean:
    def test_single_unit_step(self):
        spec = StepModelSpec(T=6, baseline=0.0, cps=(3,), weights=[[1.0]])
        assert np.array_equal(deterministic_mean(spec).values[:, 0], [0, 0, 0, 1, 1, 1])

    def test_two_step_hand_sum(self):
        spec = StepModelSpec(T=6, baseline=0.0, cps=(2, 4), weights=[[1.0], [2.0]])
        assert np.array_equal(deterministic_mean(spec).values[:, 0], [0, 0, 1, 1, 3, 3])

    def test_no_cps_constant(self):
        spec = StepModelSpec(T=4, baseline=5.0, cps=())
        assert np.array_equal(deterministic_mean(spec).values[:, 0], [5, 5, 5, 5])


class TestGenerate:
    def test_vanishing_noise_limit(self):
        spec = StepModelSpec(T=50, baseline=0.0, cps=(20,), weights=[[1.0]], sigma=1e-12)
        out = generate(spec, RngSpec(5))
        mean = deterministic_mean(spec)
        assert np.abs(out.values - mean.values).max() < 1e-9

    def test_reproducible_bit_identical(self):
        spec = scenario("two-cp-1")
        a = generate(spec, RngSpec(123, stream_id=4))
        b = generate(spec, RngSpec(123, stream_id=4))
        assert np.array_equal(a.values, b.values)
        c = generate(spec, RngSpec(123, stream_id=5))
        assert not np.array_equal(a.values, c.values)

    def test_unit_innovation_variance(self):
        # sample variance of (output - mean) pooled over 10^5 draws in [0.98, 1.02]
        spec = StepModelSpec(T=100, baseline=0.0, cps=(20,), weights=[[1.0]], sigma=1.0)
        mean = deterministic_mean(spec).values[:, 0]
        pooled = np.concatenate(
            [generate(spec, RngSpec(11, stream_id=r)).values[:, 0] - mean for r in range(1000)]
        )
        assert 0.98 <= pooled.var() <= 1.02

    def test_ma2_lag1_autocorrelation_matches_closed_form(self):
        sigma = 0.7
        kappa = (-0.5 / sigma, 0.4 / sigma)
        # closed form for an MA(2): rho_1 = k1 (1 + k2) / (1 + k1^2 + k2^2) = -11/18 here
        expected = ma_lag1_autocorrelation(kappa)
        assert expected == pytest.approx(-11 / 18, rel=1e-12)
        assert expected < 0
        spec = StepModelSpec(T=2000, baseline=0.0, cps=(), ma_coeffs=kappa, sigma=sigma)
        acorrs = [
            autocorrelation(generate(spec, RngSpec(21, stream_id=r)).values[:, 0], 1)
            for r in range(50)
        ]
        assert np.mean(acorrs) == pytest.approx(expected, abs=0.02)

    def test_white_noise_lag1_near_zero(self):
        T = 2000
        spec = StepModelSpec(T=T, baseline=0.0, cps=(), sigma=1.0)
        r = autocorrelation(generate(spec, RngSpec(31)).values[:, 0], 1)
        assert abs(r) < 4 / np.sqrt(T)

    def test_no_cp_series_is_stationary(self):
        T = 10_000
        spec = StepModelSpec(T=T, baseline=0.0, cps=(), sigma=1.0)
        x = generate(spec, RngSpec(41)).values[:, 0]
        half_sd = 1.0 / np.sqrt(T / 2)
        assert abs(x[: T // 2].mean() - x[T // 2 :].mean()) < 5 * half_sd

    def test_poisson_integer_nonnegative(self):
        spec = scenario("poisson-9")
        out = generate(spec, RngSpec(51)).values
        assert np.all(out >= 0)
        assert np.array_equal(out, np.round(out))

    def test_covariates_use_decoupled_streams(self):
        # first covariate of an N=9 scenario matches a univariate spec sharing its stream
        spec9 = scenario("multivariate-9")
        single = StepModelSpec(
            T=spec9.T, baseline=spec9.baseline[0], cps=spec9.cps,
            weights=spec9.weights[:, :1], sigma=spec9.sigma,
        )
        a = generate(spec9, RngSpec(61, stream_id=3)).values[:, 0]
        b = generate(single, RngSpec(61, stream_id=3)).values[:, 0]
        assert np.array_equal(a, b)


class TestScenarios:
    def test_registry_lists_all(self):
        assert set(scenario_names()) == {
            "amoc-grid", "ma2-amoc", "two-cp-1", "two-cp-2", "two-cp-3",
            "ma2-two-cp", "multivariate-9", "poisson-9",
        }

    def test_unknown_name_lists_presets(self):
        with pytest.raises(UnknownScenarioError, match="two-cp-1"):
            scenario("nope")

    def test_two_cp_presets(self):
        s1 = scenario("two-cp-1")
        assert (s1.T, s1.cps, s1.sigma) == (100, (20, 60), 1.0)
        assert np.array_equal(s1.weights[:, 0], [1, 2])
        assert np.array_equal(scenario("two-cp-2").weights[:, 0], [2, -1])
        assert np.array_equal(scenario("two-cp-3").weights[:, 0], [2, 1])

    def test_multivariate_nine(self):
        s = scenario("multivariate-9", w0=1.0)
        assert s.N == 9 and s.cps == (20, 60)
        assert np.array_equal(s.baseline, [0, 0, 0, 2, 2, 2, 0, 1, 2])
        assert np.array_equal(s.weights[0], [1, 2, 2, -2, 0, 0, 0, 0, 0])
        assert np.array_equal(s.weights[1], [2, 1, -1, 0, 1, -1, 0, 0, 0])
        half = scenario("multivariate-9", w0=0.5)
        assert np.array_equal(half.weights, 0.5 * s.weights)

    def test_poisson_nine(self):
        s = scenario("poisson-9")
        assert s.noise_kind == POISSON
        assert np.array_equal(s.baseline, [1, 1, 1, 3, 3, 3, 1, 2, 1])

    def test_ma2_coefficients_scale_with_sigma(self):
        s = scenario("ma2-two-cp", sigma=0.7)
        assert s.ma_coeffs == pytest.approx((-0.5 / 0.7, 0.4 / 0.7))
        assert np.array_equal(s.weights[:, 0], [2, -1])

    def test_amoc_overrides(self):
        s = scenario("amoc-grid", sigma=0.4, c=20)
        assert s.cps == (20,) and s.sigma == 0.4
        assert np.array_equal(s.weights, [[1.0]])
        # relative CP placement under T override
        assert scenario("two-cp-1", T=50).cps == (10, 30)
