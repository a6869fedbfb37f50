"""Variational machinery: KL, reparameterization, the MC ELBO, and training."""

import math
import warnings

import numpy as np
import pytest

from irtkit.data import dataset_from_arrays
from irtkit.models import RaschParams
from irtkit.optim import TrainingDiverged, nll
from irtkit.models import ModelSpec
from irtkit.vi import (
    GaussianVariational,
    VIConfig,
    VIParams,
    elbo_finite_diff_check,
    elbo_mc,
    inv_softplus,
    kl_gaussian,
    predict_prob_vi,
    reparameterize,
    train_vi,
)

from oracles import exact_elbo_rasch_vi, expected_sigmoid, log_evidence_rasch, mc_kl_estimate


def _tiny_data():
    s_idx = np.array([0, 0, 0, 1, 1, 1])
    q_idx = np.array([0, 1, 2, 0, 1, 2])
    y = np.array([1, 0, 1, 0, 0, 1])
    return dataset_from_arrays(s_idx, q_idx, y, class_of=np.zeros(2, dtype=np.int64))


def _rasch_vi_params(mu, sigma, easiness):
    mu = np.asarray(mu, dtype=np.float64)
    return VIParams("rasch-vi", ability_mu=mu,
                    ability_rho=np.asarray(inv_softplus(np.asarray(sigma, dtype=np.float64))),
                    easiness=np.asarray(easiness, dtype=np.float64))


class TestKlGaussian:
    def test_identical_distributions(self):
        assert kl_gaussian(0.0, 1.0, 0.0, 1.0) == 0.0

    def test_unit_mean_shift(self):
        assert kl_gaussian(1.0, 1.0, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_narrow_posterior(self):
        assert kl_gaussian(0.0, 0.5, 0.0, 1.0) == pytest.approx(0.3181471805599453, abs=1e-15)

    def test_against_monte_carlo(self):
        est, se = mc_kl_estimate(0.0, 0.5, 10**6, seed=0)
        assert abs(kl_gaussian(0.0, 0.5, 0.0, 1.0) - est) <= 3 * se

    def test_nonnegative_and_zero_only_at_equality(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            mu1, mu2 = rng.normal(size=2)
            s1, s2 = rng.uniform(0.1, 3.0, size=2)
            val = kl_gaussian(mu1, s1, mu2, s2)
            assert val >= 0.0
            if (mu1, s1) != (mu2, s2):
                assert val > 0.0

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            kl_gaussian(0.0, 0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            kl_gaussian(0.0, 1.0, 0.0, -2.0)


class TestReparameterize:
    def test_zero_noise_returns_mean(self):
        v = GaussianVariational.from_moments(0.7, 1.3)
        assert reparameterize(v, 0.0) == 0.7

    def test_arithmetic(self):
        v = GaussianVariational.from_moments(0.3, 2.0)
        assert reparameterize(v, 1.5) == pytest.approx(3.3, abs=1e-12)

    def test_law_of_large_numbers(self):
        v = GaussianVariational.from_moments(0.25, 0.9)
        eps = np.random.default_rng(2).standard_normal(10**6)
        sample_mean = float(np.mean(v.mu + v.sigma * eps))
        assert abs(sample_mean - 0.25) <= 3 * 0.9 / 1e3

    def test_sigma_transform_roundtrip(self):
        for sigma in (1e-3, 0.1, 0.8, 1.0, 5.0, 40.0):
            v = GaussianVariational.from_moments(0.0, sigma)
            assert v.sigma == pytest.approx(sigma, rel=1e-12)


class TestElboMc:
    def test_empty_dataset_with_prior_posteriors_is_exactly_zero(self):
        data = dataset_from_arrays([], [], [], class_of=np.zeros(2, dtype=np.int64),
                                   question_ids=("q0",))
        params = _rasch_vi_params([0.0, 0.0], [1.0, 1.0], [0.0])
        assert elbo_mc(params, data, M=4, seed=0) == 0.0

    def test_degenerate_variance_matches_point_nll(self):
        data = _tiny_data()
        mu = np.array([0.4, -0.7])
        easiness = np.array([0.1, -0.3, 0.6])
        params = _rasch_vi_params(mu, [1e-9, 1e-9], easiness)
        kl_sum = sum(kl_gaussian(m, 1e-9, 0.0, 1.0) for m in mu)
        point_nll = nll(ModelSpec("rasch"), RaschParams(mu, easiness), data)
        assert elbo_mc(params, data, M=3, seed=1) + kl_sum == pytest.approx(-point_nll, abs=1e-6)

    def test_matches_quadrature_within_mc_error(self):
        data = _tiny_data()
        params = _rasch_vi_params([0.3, -0.4], [0.9, 0.7], [0.2, -0.5, 0.1])
        exact = exact_elbo_rasch_vi(params, data)
        est = elbo_mc(params, data, M=10**5, seed=3)
        # standard error of the M-sample mean, scaled from repeated small runs
        small = [elbo_mc(params, data, M=100, seed=s) for s in range(100, 200)]
        se = float(np.std(small, ddof=1)) / math.sqrt(10**5 / 100)
        assert abs(est - exact) <= 3 * se

    def test_unbiased_across_seeds_at_m1(self):
        data = _tiny_data()
        params = _rasch_vi_params([0.5, -0.2], [1.1, 0.6], [0.3, 0.0, -0.4])
        exact = exact_elbo_rasch_vi(params, data)
        ests = np.array([elbo_mc(params, data, M=1, seed=s) for s in range(200)])
        se = float(np.std(ests, ddof=1)) / math.sqrt(len(ests))
        assert abs(float(np.mean(ests)) - exact) <= 4 * se

    def test_deterministic_given_seed(self):
        data = _tiny_data()
        params = _rasch_vi_params([0.3, -0.4], [0.9, 0.7], [0.2, -0.5, 0.1])
        assert elbo_mc(params, data, M=7, seed=11) == elbo_mc(params, data, M=7, seed=11)


class TestElboGradients:
    def _class_data(self):
        s_idx = np.array([0, 0, 1, 1, 2, 2])
        q_idx = np.array([0, 1, 0, 1, 0, 1])
        y = np.array([1, 0, 0, 1, 1, 1])
        return dataset_from_arrays(s_idx, q_idx, y, class_of=np.array([0, 1, 0]),
                                   class_ids=("c0", "c1"))

    def test_rasch_vi_gradient_matches_common_random_number_differences(self):
        params = _rasch_vi_params([0.3, -0.4], [0.9, 0.7], [0.2, -0.5, 0.1])
        assert elbo_finite_diff_check(params, _tiny_data(), M=5, seed=7) < 1e-4

    def test_interaction_vi_gradient(self):
        rng = np.random.default_rng(8)
        params = VIParams(
            "interaction-vi",
            ability_mu=rng.normal(size=3), ability_rho=np.full(3, 0.2),
            easiness=rng.normal(size=2), demand=rng.normal(size=(2, 2)),
            skill_mu=rng.normal(size=(3, 2)), skill_rho=np.full((3, 2), -0.1),
        )
        assert elbo_finite_diff_check(params, self._class_data(), M=4, seed=9) < 1e-4

    def test_class_interaction_vi_gradient(self):
        rng = np.random.default_rng(10)
        params = VIParams(
            "class-interaction-vi",
            ability_mu=rng.normal(size=3), ability_rho=np.full(3, 0.3),
            easiness=rng.normal(size=2), demand=rng.normal(size=(2, 1)),
            class_skill_mu=rng.normal(size=(2, 1)), class_skill_rho=np.full((2, 1), 0.1),
        )
        assert elbo_finite_diff_check(params, self._class_data(), M=4, seed=11) < 1e-4


class TestTrainVi:
    def test_no_observations_converges_to_prior(self):
        data = dataset_from_arrays([], [], [], class_of=np.zeros(3, dtype=np.int64),
                                   question_ids=("q0",))
        cfg = VIConfig(samples=1, sigma_init=0.8, learning_rate=0.05, epochs=2000, seed=0)
        params, _ = train_vi("rasch-vi", data, cfg)
        np.testing.assert_allclose(params.ability_mu, 0.0, atol=1e-2)
        np.testing.assert_allclose(params.ability_sigma, 1.0, atol=1e-2)

    def test_interaction_vi_with_zero_dims_matches_rasch_vi_trace(self):
        data = _tiny_data()
        cfg = VIConfig(samples=3, sigma_init=0.8, learning_rate=0.05, epochs=40, seed=4)
        _, rasch_report = train_vi("rasch-vi", data, cfg)
        _, inter_report = train_vi("interaction-vi", data, cfg, dims=0)
        assert rasch_report.nll_trace == inter_report.nll_trace

    def test_converged_elbo_stays_below_log_evidence(self):
        data = _tiny_data()
        cfg = VIConfig(samples=8, sigma_init=0.8, learning_rate=0.05, epochs=3000, seed=0)
        params, _ = train_vi("rasch-vi", data, cfg)
        quad_elbo = exact_elbo_rasch_vi(params, data)
        evidence = log_evidence_rasch(params.easiness, data)
        assert quad_elbo <= evidence
        assert evidence - quad_elbo < 0.5

    def test_warm_start_takes_point_estimates(self):
        data = _tiny_data()
        point = RaschParams(np.array([0.9, -1.1]), np.array([0.2, 0.3, -0.8]))
        cfg = VIConfig(samples=2, sigma_init=0.8, epochs=0, seed=0, warm_start=point)
        params, report = train_vi("rasch-vi", data, cfg)
        np.testing.assert_array_equal(params.ability_mu, point.ability)
        np.testing.assert_array_equal(params.easiness, point.easiness)
        np.testing.assert_allclose(params.ability_sigma, 0.8, rtol=1e-12)
        assert report.epochs_run == 0

    def test_warm_start_shape_mismatch(self):
        data = _tiny_data()
        bad = RaschParams(np.zeros(5), np.zeros(3))
        cfg = VIConfig(samples=2, epochs=1, warm_start=bad)
        with pytest.raises(ValueError, match="warm-start shape mismatch"):
            train_vi("rasch-vi", data, cfg)

    def test_wrong_family_warm_start_rejected(self):
        data = _tiny_data()
        point = RaschParams(np.zeros(2), np.zeros(3))
        cfg = VIConfig(samples=2, epochs=1, warm_start=point)
        with pytest.raises(ValueError, match="warm-start"):
            train_vi("class-interaction-vi", data, cfg, dims=1)

    def test_deterministic_given_seed(self):
        data = _tiny_data()
        cfg = VIConfig(samples=3, learning_rate=0.03, epochs=25, seed=9)
        a, ra = train_vi("rasch-vi", data, cfg)
        b, rb = train_vi("rasch-vi", data, cfg)
        assert np.array_equal(a.ability_mu, b.ability_mu)
        assert ra.nll_trace == rb.nll_trace

    def test_divergence_raises(self):
        data = _tiny_data()
        cfg = VIConfig(samples=2, learning_rate=1e12, epochs=50, seed=0)
        with pytest.raises(TrainingDiverged):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                train_vi("rasch-vi", data, cfg)


class TestPredictProbVi:
    def test_degenerate_variance_agrees_with_point_model(self):
        params = _rasch_vi_params([0.8], [1e-9], [0.4])
        plug = predict_prob_vi(params, 0, 0, mode="plugin-mean")
        mc = predict_prob_vi(params, 0, 0, mode="monte-carlo", M=500, seed=0)
        point = 1.0 / (1.0 + math.exp(-1.2))
        assert plug == pytest.approx(point, abs=1e-12)
        assert mc == pytest.approx(point, abs=1e-7)

    def test_symmetric_posterior_tends_to_half(self):
        params = _rasch_vi_params([0.0], [1.0], [0.0])
        mc = predict_prob_vi(params, 0, 0, mode="monte-carlo", M=2 * 10**5, seed=1)
        assert abs(mc - 0.5) < 2e-3

    def test_monte_carlo_matches_quadrature(self):
        params = _rasch_vi_params([1.0], [1.0], [0.0])
        mc = predict_prob_vi(params, 0, 0, mode="monte-carlo", M=10**6, seed=3)
        exact = expected_sigmoid(1.0, 1.0)
        se = math.sqrt(0.05 / 10**6)  # var of sigmoid(Z) is below 0.05 here
        assert abs(mc - exact) <= 3 * se

    def test_unknown_mode_rejected(self):
        params = _rasch_vi_params([0.0], [1.0], [0.0])
        with pytest.raises(ValueError):
            predict_prob_vi(params, 0, 0, mode="exact")
