"""Normal CDF/quantile and Gaussian copula kernels.

Reference values were computed with mpmath at 40 digits before the
implementation existed (erf/erfinv-based) and are frozen here.
"""

import numpy as np
import pytest
from scipy.integrate import quad

from copulamp.normal import (
    CopulaBandwidth,
    copula_conditional_cdf,
    copula_density,
    std_normal_cdf,
    std_normal_quantile,
)

# (z, Phi(z)) pairs from the mpmath oracle
PHI_TABLE = [
    (-6.0, 9.86587645037698141e-10),
    (-3.0, 0.00134989803163009453),
    (-1.0, 0.158655253931457051),
    (-0.5, 0.308537538725986896),
    (0.0, 0.5),
    (0.33, 0.629300018940653521),
    (2.5, 0.993790334674223865),
    (5.0, 0.999999713348428121),
]

Z90 = 1.281551565544600467  # Phi^-1(0.9), mpmath


class TestStdNormalCdf:
    @pytest.mark.parametrize("z,expected", PHI_TABLE)
    def test_against_high_precision_oracle(self, z, expected):
        assert abs(std_normal_cdf(z) - expected) <= 1e-12

    def test_center(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_saturation(self):
        assert abs(std_normal_cdf(40.0) - 1.0) <= 1e-15

    def test_spec_quantile_point(self):
        assert abs(std_normal_cdf(1.281551565545) - 0.9) <= 1e-12

    def test_monotone(self):
        z = np.linspace(-8, 8, 4001)
        vals = std_normal_cdf(z)
        assert np.all(np.diff(vals) >= 0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            std_normal_cdf(np.nan)
        with pytest.raises(ValueError):
            std_normal_cdf(np.inf)


class TestStdNormalQuantile:
    def test_center(self):
        assert std_normal_quantile(0.5) == 0.0

    def test_p90_oracle(self):
        assert abs(std_normal_quantile(0.9) - Z90) <= 1e-9

    def test_p10_antisymmetric(self):
        assert abs(std_normal_quantile(0.1) + Z90) <= 1e-9

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.7])
    def test_domain(self, bad):
        with pytest.raises(ValueError):
            std_normal_quantile(bad)

    def test_round_trip_z_grid(self):
        z = np.arange(-6.0, 6.0 + 1e-9, 1e-3)
        back = std_normal_quantile(std_normal_cdf(z))
        assert np.max(np.abs(back - z)) <= 1e-8

    def test_round_trip_u_side(self):
        u = np.linspace(1e-6, 1 - 1e-6, 2001)
        assert np.max(np.abs(std_normal_cdf(std_normal_quantile(u)) - u)) <= 1e-9

    def test_monotone(self):
        u = np.linspace(1e-9, 1 - 1e-9, 2001)
        assert np.all(np.diff(std_normal_quantile(u)) > 0)


class TestCopulaBandwidth:
    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 1.5, np.nan])
    def test_boundaries_rejected(self, bad):
        with pytest.raises(ValueError):
            CopulaBandwidth(bad)

    def test_interior_accepted(self):
        assert CopulaBandwidth(0.5).rho == 0.5


class TestConditionalCdf:
    def test_rho_zero_limit_is_identity_in_u(self):
        for v in (0.1, 0.5, 0.77):
            assert abs(copula_conditional_cdf(0.3, v, 1e-12) - 0.3) <= 1e-9

    def test_center_fixed_point(self):
        assert copula_conditional_cdf(0.5, 0.5, 0.8) == 0.5

    def test_tail_value_oracle(self):
        # mpmath: H(0.9, 0.1, 0.8) = 0.999939638845295
        assert abs(copula_conditional_cdf(0.9, 0.1, 0.8) - 0.999939638845295) <= 1e-12
        assert abs(copula_conditional_cdf(0.9, 0.1, 0.8) - 0.999940) <= 1e-5

    def test_strictly_increasing_in_u(self):
        us = np.linspace(0.01, 0.99, 99)
        for v in (0.2, 0.5, 0.9):
            for rho in (0.1, 0.5, 0.9):
                vals = copula_conditional_cdf(us, np.full_like(us, v), rho)
                assert np.all(np.diff(vals) > 0)

    def test_output_in_open_interval(self):
        us = np.linspace(0.001, 0.999, 51)
        vals = copula_conditional_cdf(us, np.full_like(us, 0.32), 0.85)
        assert np.all((vals > 0) & (vals < 1))

    @pytest.mark.parametrize("rho", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("u0", [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99])
    def test_martingale_kernel_identity(self, u0, rho):
        # integral over v of H(u0, v) recovers u0: the mean-preservation
        # property behind every posterior update
        val, err = quad(lambda v: copula_conditional_cdf(u0, v, rho), 0, 1, limit=200)
        assert abs(val - u0) <= 1e-6


class TestCopulaDensity:
    def test_independence_limit(self):
        for u, v in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)]:
            assert abs(copula_density(u, v, 1e-12) - 1.0) <= 1e-9

    def test_center_prefactor(self):
        # both normal scores vanish; only 1/sqrt(1-rho^2) survives
        assert abs(copula_density(0.5, 0.5, 0.6) - 1.25) <= 1e-9

    def test_symmetry(self):
        assert copula_density(0.3, 0.8, 0.7) == pytest.approx(
            copula_density(0.8, 0.3, 0.7), abs=1e-14
        )

    @pytest.mark.parametrize("rho", [0.2, 0.8])
    @pytest.mark.parametrize("u", [0.1, 0.5, 0.9])
    def test_integrates_to_one(self, u, rho):
        val, err = quad(lambda v: copula_density(u, v, rho), 0, 1, limit=200)
        assert abs(val - 1.0) <= 1e-6
