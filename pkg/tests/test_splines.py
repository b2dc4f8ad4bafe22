"""Conjugate additive spline model and its exact credible intervals."""

import numpy as np
import pytest

from copulamp import rng as crng
from copulamp.simulate import gen_additive_spline
from copulamp.sources import Dataset
from copulamp.splines import (
    OptimalModel,
    SplineClampWarning,
    SplineModelSpec,
    bspline_basis,
    conjugate_posterior,
    design_matrix,
    make_knots,
    optimal_ci,
)

KNOTS = make_knots(-2.5, 2.5, 20, 3)


class TestBasis:
    def test_partition_of_unity(self):
        for x in np.linspace(-2.5, 2.5, 101):
            b = bspline_basis(x, KNOTS, 3)
            assert abs(b.sum() - 1.0) <= 1e-12
            assert np.all(b >= 0)

    def test_left_boundary_first_entry(self):
        b = bspline_basis(-2.5, KNOTS, 3)
        assert b[0] == pytest.approx(1.0, abs=1e-14)
        assert np.all(b[1:] == 0)

    def test_right_boundary_last_entry(self):
        b = bspline_basis(2.5, KNOTS, 3)
        assert b[-1] == pytest.approx(1.0, abs=1e-14)
        assert np.all(b[:-1] == 0)

    def test_degree_zero_indicator(self):
        knots = make_knots(0.0, 1.0, 4, 0)
        b = bspline_basis(0.3, knots, 0)
        assert np.array_equal(b, [0.0, 1.0, 0.0, 0.0])

    def test_clamp_warns(self):
        with pytest.warns(SplineClampWarning):
            b = bspline_basis(3.7, KNOTS, 3)
        assert b[-1] == pytest.approx(1.0, abs=1e-14)

    def test_knot_count(self):
        assert KNOTS.size == 20 + 3 + 1
        with pytest.raises(ValueError):
            make_knots(0, 1, 2, 3)


class TestConjugatePosterior:
    def test_no_data_returns_prior(self):
        mean, cov = conjugate_posterior(np.empty((0, 5)), np.empty(0), 0.5)
        assert np.array_equal(mean, np.zeros(5))
        assert np.array_equal(cov, np.eye(5))

    def test_identity_design_closed_form(self):
        n = 6
        mean, cov = conjugate_posterior(np.eye(n), 2.0 * np.ones(n), 1.0)
        assert np.allclose(mean, np.ones(n), atol=1e-12)
        assert np.allclose(cov, np.eye(n) / 2.0, atol=1e-12)

    def test_matches_dense_inverse_oracle(self):
        gen = crng.stream(42, 0)
        design = gen.normal(size=(50, 20))
        y = gen.normal(size=50)
        sigma2 = 0.5
        mean, cov = conjugate_posterior(design, y, sigma2)
        cov_oracle = np.linalg.inv(design.T @ design / sigma2 + np.eye(20))
        mean_oracle = cov_oracle @ design.T @ y / sigma2
        assert np.max(np.abs(cov - cov_oracle)) <= 1e-8
        assert np.max(np.abs(mean - mean_oracle)) <= 1e-8

    def test_posterior_spd(self):
        gen = crng.stream(43, 0)
        design = gen.normal(size=(30, 12))
        _, cov = conjugate_posterior(design, gen.normal(size=30), 0.5)
        assert np.allclose(cov, cov.T)
        assert np.min(np.linalg.eigvalsh(cov)) > 0

    def test_huge_noise_returns_prior(self):
        gen = crng.stream(44, 0)
        design = gen.normal(size=(40, 8))
        mean, cov = conjugate_posterior(design, gen.normal(size=40), 1e9)
        assert np.max(np.abs(mean)) < 1e-3
        assert np.max(np.abs(cov - np.eye(8))) < 1e-3


class TestOptimalModel:
    def fit_small(self, n=80, seed=0):
        ds, truth = gen_additive_spline(n, J=3, signal_count=1, seed=seed)
        spec = SplineModelSpec(knot_ranges=[(-2.5, 2.5)] * 3)
        return OptimalModel(spec).fit(ds), truth

    def test_zero_level_degenerate(self):
        model, _ = self.fit_small()
        lo, hi = model.component_ci(0, 0.5, 0.0)
        assert lo == hi

    def test_interval_contains_mean(self):
        model, _ = self.fit_small()
        mu, _ = model.component_posterior(0, 0.5)
        lo, hi = optimal_ci(model, 0, 0.5, 0.9)
        assert lo < mu < hi

    def test_prior_doubling_doubles_squared_width(self):
        # at n=0 the posterior is the prior, so f(x) variance scales with it
        b = bspline_basis(0.3, KNOTS, 3)
        _, cov1 = conjugate_posterior(np.empty((0, b.size)), np.empty(0), 0.5, prior_var=1.0)
        _, cov2 = conjugate_posterior(np.empty((0, b.size)), np.empty(0), 0.5, prior_var=2.0)
        w1 = b @ cov1 @ b
        w2 = b @ cov2 @ b
        assert w2 == pytest.approx(2.0 * w1, rel=1e-12)

    def test_unfitted_raises(self):
        with pytest.raises(RuntimeError):
            OptimalModel().component_ci(0, 0.0, 0.9)

    def test_coverage_smoke(self):
        # small version of the calibration experiment: nominal-ish coverage
        hits = trials = 0
        probes = np.linspace(-2.5, 2.5, 10)
        for rep in range(5):
            ds, truth = gen_additive_spline(150, J=5, signal_count=1, seed=100 + rep)
            spec = SplineModelSpec(knot_ranges=[(-2.5, 2.5)] * 5)
            model = OptimalModel(spec).fit(ds)
            for x in probes:
                lo, hi = model.component_ci(0, float(x), 0.9)
                hits += lo <= truth.f(0, float(x)) <= hi
                trials += 1
        assert hits / trials >= 0.7

    def test_design_matrix_shape(self):
        gen = crng.stream(45, 0)
        x = gen.uniform(-2.5, 2.5, size=(7, 2))
        d = design_matrix(x, [KNOTS, KNOTS], 3)
        assert d.shape == (7, 40)
        assert np.allclose(d.sum(axis=1), 2.0, atol=1e-12)

    def test_knot_range_count_checked(self):
        ds = Dataset(np.zeros(10) + 0.1 * np.arange(10), crng.stream(46, 0).random((10, 2)))
        with pytest.raises(ValueError, match="knot ranges"):
            OptimalModel(SplineModelSpec(knot_ranges=[(-1, 1)])).fit(ds)
