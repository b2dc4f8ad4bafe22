"""Synthetic data generators."""

import numpy as np
import pytest

from copulamp.simulate import (
    funnel_quantile,
    gen_additive_spline,
    gen_diffusion,
    gen_funnel,
    gen_gamma_iid,
)


class TestAdditiveSpline:
    def test_no_signal_is_pure_noise(self):
        ds, truth = gen_additive_spline(4000, J=5, signal_count=0, sigma2=0.5, seed=1)
        assert np.all(truth.theta == 0)
        assert abs(np.mean(ds.y)) <= 0.05
        assert np.var(ds.y) == pytest.approx(0.5, rel=0.1)

    def test_zero_noise_deterministic_given_x(self):
        ds, truth = gen_additive_spline(50, J=4, signal_count=2, sigma2=0.0, seed=2)
        expected = np.array([truth.conditional_mean(row) for row in ds.x])
        assert np.allclose(ds.y, expected, atol=1e-12)

    def test_variance_grows_with_signal_count(self):
        variances = {}
        for phi in (1, 3, 10):
            vals = [
                np.var(gen_additive_spline(200, J=30, signal_count=phi, seed=s)[0].y)
                for s in range(30)
            ]
            variances[phi] = np.mean(vals)
        assert variances[1] < variances[3] < variances[10]

    def test_features_in_range(self):
        ds, _ = gen_additive_spline(100, J=30, signal_count=1, seed=3)
        assert ds.x.shape == (100, 30)
        assert np.all((ds.x >= -2.5) & (ds.x <= 2.5))

    def test_deterministic_per_seed(self):
        a, _ = gen_additive_spline(20, J=3, signal_count=1, seed=9)
        b, _ = gen_additive_spline(20, J=3, signal_count=1, seed=9)
        assert np.array_equal(a.y, b.y)

    def test_quantile_truth(self):
        _, truth = gen_additive_spline(10, J=2, signal_count=1, sigma2=0.25, seed=4)
        x = np.zeros(2)
        med = truth.conditional_quantile(x, 0.5)
        assert med == pytest.approx(truth.conditional_mean(x), abs=1e-12)


class TestFunnel:
    def test_variance_vanishes_at_origin(self):
        ds = gen_funnel(10_000, seed=5)
        low = ds.y[ds.x[:, 0] < 0.05]
        assert low.size > 50
        assert np.std(low) < 0.1

    def test_conditional_mean_midpoint(self):
        ds = gen_funnel(40_000, seed=6)
        sel = np.abs(ds.x[:, 0] - 0.5) < 0.02
        assert np.mean(ds.y[sel]) == pytest.approx(np.sin(1.5), abs=0.05)

    def test_x_bounds(self):
        ds = gen_funnel(1000, seed=7)
        assert np.all((ds.x >= 0.0) & (ds.x <= 1.0))

    def test_quantile_formula(self):
        # mpmath oracle: sin(2.4) + 0.8 * Phi^-1(0.9) = 1.70070443299
        assert funnel_quantile(0.8, 0.9) == pytest.approx(1.70070443299, abs=1e-9)
        assert funnel_quantile(0.5, 0.5) == pytest.approx(0.997494986604, abs=1e-9)


class TestDiffusion:
    def test_output_normalized(self):
        ds = gen_diffusion(500, seed=8)
        assert ds.y.min() == 0.0 and ds.y.max() == 1.0

    def test_inputs_centered(self):
        ds = gen_diffusion(500, seed=9)
        assert np.all((ds.x >= -2.5 - 1e-9) & (ds.x <= 2.5 + 1e-9))

    def test_noise_grows_quadratically(self):
        _, info = gen_diffusion(10_000, seed=10, return_details=True)
        resid = info["y_raw"] - info["signal"]
        x = info["x_raw"]
        lo_sd = np.std(resid[x < np.quantile(x, 0.1)])
        hi_sd = np.std(resid[x > np.quantile(x, 0.9)])
        assert hi_sd / lo_sd > 2.0

    def test_three_branches_used(self):
        _, info = gen_diffusion(1000, seed=11, return_details=True)
        assert set(np.unique(info["branch"])) == {0, 1, 2}


class TestGamma:
    def test_moments(self):
        ys = gen_gamma_iid(1_000_000, seed=12)
        assert np.mean(ys) == pytest.approx(4.0, abs=0.02)
        assert np.var(ys) == pytest.approx(8.0, abs=0.1)

    def test_positive(self):
        assert np.all(gen_gamma_iid(10_000, seed=13) > 0)

    def test_default_matches_reference_experiment(self):
        ys = gen_gamma_iid(seed=14)
        assert ys.shape == (25,)
