"""Unit tests for the conjugate component families."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import gammaln

from mixexact.families import (
    DirichletMultinomial,
    GroupStat,
    NormalInverseGamma,
    PoissonGamma,
    check_observation,
    component_posterior_density,
    component_posterior_mean,
    conjugate_update,
    log_base_measure,
    log_partition_constant,
    observation_statistic,
    statistic_width,
    zero_statistic,
)


class TestGroupStat:
    def test_negative_count_rejected(self):
        with pytest.raises(ValueError):
            GroupStat(-1, (0,))

    def test_empty_group_must_be_zero(self):
        with pytest.raises(ValueError):
            GroupStat(0, (3,))

    def test_merged_adds_counts_and_totals(self):
        a = GroupStat(2, (3, 5))
        b = GroupStat(1, (1, 1))
        assert a.merged(b) == GroupStat(3, (4, 6))

    def test_merged_rejects_width_mismatch(self):
        with pytest.raises(ValueError):
            GroupStat(1, (1,)).merged(GroupStat(1, (1, 2)))


class TestPoissonGamma:
    @pytest.mark.parametrize("shape,rate", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (math.inf, 1.0)])
    def test_invalid_hyperparameters(self, shape, rate):
        with pytest.raises(ValueError):
            PoissonGamma(shape, rate)

    def test_update_adds_sum_to_shape_and_count_to_rate(self):
        post = conjugate_update(PoissonGamma(1.0, 1.0), GroupStat(2, (3,)))
        assert post == PoissonGamma(4.0, 3.0)

    def test_empty_update_is_identity(self):
        prior = PoissonGamma(1.5, 2.5)
        assert conjugate_update(prior, GroupStat(0, (0,))) is prior

    def test_log_partition_closed_form(self):
        # Gamma(3, 2): Gamma(3) / 2^3 = 2/8 = 1/4
        assert log_partition_constant(PoissonGamma(3.0, 2.0)) == pytest.approx(
            math.log(0.25), abs=1e-14
        )
        assert log_partition_constant(PoissonGamma(1.0, 1.0)) == 0.0

    def test_posterior_mean(self):
        assert component_posterior_mean(PoissonGamma(7.0, 3.0)) == (7.0 / 3.0,)

    def test_density_at_zero_for_unit_exponential(self):
        # Gamma(1,1) density at 0 is exactly 1
        assert component_posterior_density(PoissonGamma(1.0, 1.0), 0.0) == 1.0

    def test_density_matches_scipy(self):
        post = PoissonGamma(4.0, 3.0)
        for t in (0.1, 0.5, 1.0, 2.5):
            assert component_posterior_density(post, t) == pytest.approx(
                stats.gamma.pdf(t, 4.0, scale=1.0 / 3.0), rel=1e-14
            )

    def test_density_outside_support_is_zero(self):
        assert component_posterior_density(PoissonGamma(2.0, 1.0), -0.5) == 0.0


class TestDirichletMultinomial:
    def test_needs_two_categories(self):
        with pytest.raises(ValueError):
            DirichletMultinomial((1.0,))

    def test_positive_concentration_required(self):
        with pytest.raises(ValueError):
            DirichletMultinomial((1.0, 0.0))

    def test_update_adds_counts_per_category(self):
        post = conjugate_update(
            DirichletMultinomial((0.5, 0.5, 0.5)), GroupStat(2, (3, 1, 2))
        )
        assert post == DirichletMultinomial((3.5, 1.5, 2.5))

    def test_update_rejects_width_mismatch(self):
        with pytest.raises(ValueError):
            DirichletMultinomial((1.0, 1.0)).updated(GroupStat(1, (1, 0, 0)))

    def test_log_partition_closed_form(self):
        conc = (2.0, 3.0, 1.5)
        expected = sum(gammaln(b) for b in conc) - gammaln(sum(conc))
        assert log_partition_constant(DirichletMultinomial(conc)) == pytest.approx(
            float(expected), abs=1e-14
        )

    def test_posterior_mean_sums_to_one(self):
        mean = component_posterior_mean(DirichletMultinomial((2.0, 1.0, 5.0)))
        assert mean == pytest.approx((0.25, 0.125, 0.625), abs=1e-15)

    def test_category_marginal_is_uniform_for_flat_pair(self):
        # two categories, concentration (1,1): coordinate marginal is Beta(1,1)
        post = DirichletMultinomial((1.0, 1.0))
        for t in (0.1, 0.5, 0.9):
            assert component_posterior_density(post, t, category=0) == pytest.approx(1.0, abs=1e-14)

    def test_density_requires_category(self):
        with pytest.raises(ValueError):
            component_posterior_density(DirichletMultinomial((1.0, 1.0)), 0.5)

    def test_density_outside_unit_interval_is_zero(self):
        post = DirichletMultinomial((2.0, 3.0))
        assert component_posterior_density(post, 1.5, category=0) == 0.0
        assert component_posterior_density(post, -0.2, category=1) == 0.0


class TestNormalInverseGamma:
    def test_invalid_hyperparameters(self):
        with pytest.raises(ValueError):
            NormalInverseGamma(math.nan, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            NormalInverseGamma(0.0, 0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            NormalInverseGamma(0.0, 1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            NormalInverseGamma(0.0, 1.0, 1.0, 0.0)

    def test_update_matches_hand_computation(self):
        # prior (location 0, precision scale 2, shape 3, scale 4); group
        # {1, 2, 3}: n=3, T1=6, T2=14, xbar=2
        #   c'  = 2 + 3 = 5
        #   xi' = (2*0 + 6) / 5 = 1.2
        #   a'  = 3 + 3 = 6
        #   ss  = 14 - 36/3 = 2;  shift = 2*3/5 * (2-0)^2 = 4.8
        #   b'  = 4 + 2 + 4.8 = 10.8
        prior = NormalInverseGamma(0.0, 2.0, 3.0, 4.0)
        post = conjugate_update(prior, GroupStat(3, (6.0, 14.0)))
        assert post.location == pytest.approx(1.2, abs=1e-15)
        assert post.precision_scale == 5.0
        assert post.shape == 6.0
        assert post.scale == pytest.approx(10.8, abs=1e-12)

    def test_empty_update_is_identity(self):
        prior = NormalInverseGamma(1.0, 2.0, 3.0, 4.0)
        assert conjugate_update(prior, GroupStat(0, (0, 0))) is prior

    def test_update_never_produces_negative_scale(self):
        # single observation: T2 - T1^2/n cancels to 0 exactly up to float
        # noise; the clamp keeps the scale valid
        x = 0.1 + 0.2  # 0.30000000000000004
        post = NormalInverseGamma(0.0, 1.0, 1.0, 1.0).updated(GroupStat(1, (x, x * x)))
        assert post.scale >= 1.0

    def test_single_observation_update(self):
        # n=1 at x: c'=c+1, xi'=(c xi + x)/(c+1), a'=a+1,
        # b' = b + c/(c+1) (x - xi)^2
        c, xi, a, b, x = 2.0, 1.0, 3.0, 4.0, 2.5
        post = NormalInverseGamma(xi, c, a, b).updated(GroupStat(1, (x, x * x)))
        assert post.location == pytest.approx((c * xi + x) / (c + 1), abs=1e-15)
        assert post.scale == pytest.approx(b + c / (c + 1) * (x - xi) ** 2, abs=1e-12)

    def test_log_partition_matches_direct_formula(self):
        nig = NormalInverseGamma(0.5, 2.0, 3.0, 4.0)
        expected = (
            0.5 * math.log(2 * math.pi)
            - 0.5 * math.log(2.0)
            + float(gammaln(1.5))
            - 1.5 * math.log(2.0)
        )
        assert log_partition_constant(nig) == pytest.approx(expected, abs=1e-14)

    def test_location_marginal_is_student_t(self):
        nig = NormalInverseGamma(1.0, 2.0, 5.0, 3.0)
        scale = math.sqrt(3.0 / (5.0 * 2.0))
        for t in (-1.0, 0.5, 1.0, 2.0):
            assert component_posterior_density(nig, t) == pytest.approx(
                stats.t.pdf(t, 5.0, loc=1.0, scale=scale), rel=1e-14
            )

    def test_variance_marginal_is_inverse_gamma(self):
        nig = NormalInverseGamma(0.0, 1.0, 4.0, 6.0)
        for t in (0.5, 1.0, 3.0):
            assert np.exp(nig.variance_logpdf(t)) == pytest.approx(
                stats.invgamma.pdf(t, 2.0, scale=3.0), rel=1e-14
            )


class TestObservations:
    def test_poisson_accepts_nonnegative_ints(self):
        check_observation("poisson", 0)
        check_observation("poisson", 7)

    @pytest.mark.parametrize("bad", [-1, 1.5, "2", True, (1,)])
    def test_poisson_rejects(self, bad):
        with pytest.raises(ValueError):
            check_observation("poisson", bad)

    def test_multinomial_accepts_count_tuples(self):
        check_observation("multinomial", (3, 1, 0))
        check_observation("multinomial", (0, 1), categories=2)

    @pytest.mark.parametrize("bad", [(1,), (1, -1), (0, 0), (1.5, 2), 3])
    def test_multinomial_rejects(self, bad):
        with pytest.raises(ValueError):
            check_observation("multinomial", bad)

    def test_multinomial_category_count_enforced(self):
        with pytest.raises(ValueError):
            check_observation("multinomial", (1, 2), categories=3)

    def test_normal_accepts_reals(self):
        check_observation("normal", -0.5)
        check_observation("normal", 3)

    @pytest.mark.parametrize("bad", [math.inf, math.nan, "x", True])
    def test_normal_rejects(self, bad):
        with pytest.raises(ValueError):
            check_observation("normal", bad)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            check_observation("beta", 1)

    def test_statistic_widths(self):
        assert statistic_width("poisson") == 1
        assert statistic_width("multinomial", categories=4) == 4
        assert statistic_width("normal") == 2
        with pytest.raises(ValueError):
            statistic_width("multinomial")

    def test_observation_statistics(self):
        assert observation_statistic("poisson", 3) == GroupStat(1, (3,))
        assert observation_statistic("multinomial", (2, 0, 1)) == GroupStat(1, (2, 0, 1))
        # normal aggregates (x, x^2)
        assert observation_statistic("normal", 1.5) == GroupStat(1, (1.5, 2.25))

    def test_zero_statistics(self):
        assert zero_statistic("poisson") == GroupStat(0, (0,))
        assert zero_statistic("multinomial", categories=3) == GroupStat(0, (0, 0, 0))

    def test_log_base_measure(self):
        # Poisson h(x) = 1/x!
        assert log_base_measure("poisson", 4) == pytest.approx(-math.log(24), abs=1e-12)
        assert log_base_measure("poisson", 0) == 0.0
        # multinomial h(x) = d! / prod x_u!
        assert log_base_measure("multinomial", (2, 1, 1)) == pytest.approx(
            math.log(12), abs=1e-12
        )
        # normal h(x) = (2 pi)^(-1/2)
        assert log_base_measure("normal", 0.7) == pytest.approx(
            -0.5 * math.log(2 * math.pi), abs=1e-15
        )
