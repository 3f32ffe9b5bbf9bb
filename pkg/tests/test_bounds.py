import math

import numpy as np
import pytest

from riskbandits.bandit import log_bar
from riskbandits.bounds import (
    AuxBounds,
    InadmissibleCutoffError,
    MomentPrior,
    aux_bounds,
    bounded_cvar_bound,
    c_p_constant,
    cvar_magnitude_bound,
    empirical_cvar_dev_bound,
    empirical_mean_bound,
    minimal_admissible_cutoff,
    mob_cvar_bound,
    mob_cvar_threshold,
    mob_mean_bound,
    mob_mean_threshold,
    pareto_cvar_lower_bound,
    perturb_distribution,
    sr_mob_error_bound,
    sr_truncation_error_bound,
    truncated_cvar_bound,
    truncated_cvar_validity,
    truncated_mean_bound,
    truncated_mean_threshold,
    v_emp,
    var_magnitude_bound,
)
from riskbandits.distributions import Pareto, ground_truth

PRIOR = MomentPrior(2.0, 1.0, 1.0, 1.0)


def hand_v_emp(p, B, V, beta):
    return 2 ** (p - 1) * V / beta + 2**p * B / beta


def hand_n_star(p, B, beta, alpha, gap, xi1, xi2, q_m, q_c):
    parts = []
    if xi1 > 0:
        parts.append((12 * xi1 * B / gap) ** (1 / (q_m * min(p - 1, 1))))
    if xi2 > 0:
        parts.append((8 * xi2 * B / (beta * gap)) ** (1 / (q_c * (p - 1))))
        parts.append((B / min(alpha, beta)) ** (1 / (q_c * p)))
    return max(parts)


def hand_mob_threshold(p, B, V, beta, gap):
    vem = hand_v_emp(p, B, V, beta)
    first = (4320 * vem / (beta ** (p - 1) * gap**p) + 576 * vem * beta / (beta ** (p - 1) * B)) ** (
        1 / (p - 1)
    )
    mag = (B / beta) ** (1 / p)
    second = (math.log(24) / beta) * max(8.0, 8 * mag**2 / gap**2 + 2 * mag / gap)
    return max(first, second)


def hand_t_star(p, B, V, alpha, gap, xi1, xi2, q_m, q_c, arms):
    beta = 1 - alpha
    vem = hand_v_emp(p, B, V, beta)
    mag = (B / beta) ** (1 / p)
    parts = []
    if xi1 > 0:
        parts.append((576 * xi1 * V / gap) ** (1 / q_m))
    if xi2 > 0:
        parts.append((8 * math.log(24) / beta) ** (1 / q_c))
        parts.append(
            (
                4320 * xi2**p * 4**p * vem / (beta ** (p - 1) * gap**p)
                + 576 * vem * beta / (beta ** (p - 1) * B)
            )
            ** (1 / (q_c * (p - 1)))
        )
        parts.append(
            ((8 * math.log(24) / beta) * (128 * xi2**2 * mag**2 / gap**2 + 8 * xi2 * mag / gap))
            ** (1 / q_c)
        )
    return arms + arms * log_bar(arms) * max(parts)


class TestVemp:
    def test_direct_substitution(self):
        assert v_emp(PRIOR, 0.95) == pytest.approx(120.0, rel=1e-12)

    def test_vacuous_moments(self):
        assert v_emp(MomentPrior(2.0, 0.0, 0.0, 1.0), 0.95) == 0.0

    def test_nonincreasing_in_beta(self):
        values = [v_emp(PRIOR, alpha) for alpha in (0.5, 0.8, 0.9, 0.95, 0.99)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_prior_validation(self):
        with pytest.raises(ValueError):
            MomentPrior(2.5, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            MomentPrior(2.0, -1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            MomentPrior(2.0, 1.0, 1.0, 0.0)


class TestEmpiricalCvarBound:
    def test_vanishes_for_large_n(self):
        for side in ("lower", "upper"):
            assert empirical_cvar_dev_bound(PRIOR, 0.95, 10**12, side) < 1e-6

    def test_doubling_scales_polynomial_term(self):
        p = 1.7
        prior = MomentPrior(p, 1.0, 1.0, 1.0)
        n = 10**10  # exponential terms negligible
        ratio = empirical_cvar_dev_bound(prior, 0.9, 2 * n, "lower", clamped=False) / (
            empirical_cvar_dev_bound(prior, 0.9, n, "lower", clamped=False)
        )
        assert ratio == pytest.approx(2 ** -(p - 1.0), rel=1e-6)

    def test_clamped_to_unit_interval(self):
        assert empirical_cvar_dev_bound(PRIOR, 0.95, 1, "upper") == 1.0
        assert empirical_cvar_dev_bound(PRIOR, 0.95, 1, "upper", clamped=False) > 1.0

    def test_side_validated(self):
        with pytest.raises(ValueError):
            empirical_cvar_dev_bound(PRIOR, 0.95, 10, "sideways")


class TestParetoFloor:
    def test_doubling_identity(self):
        a = 1.5
        one = pareto_cvar_lower_bound(1.0, a, 0.95, 1.0, 1000, clamped=False)
        two = pareto_cvar_lower_bound(1.0, a, 0.95, 1.0, 2000, clamped=False)
        assert two / one == pytest.approx(2 ** -(a - 1.0), rel=1e-12)

    def test_vanishes_for_huge_deviation(self):
        assert pareto_cvar_lower_bound(1.0, 1.5, 0.95, 1e9, 100) < 1e-10

    def test_uses_the_pareto_cvar(self):
        truth = ground_truth(Pareto(1.0, 1.5), 0.95)
        expected = 0.05 * 1.0 / (1000**0.5 * (truth.cvar_alpha + 1.0) ** 1.5)
        got = pareto_cvar_lower_bound(1.0, 1.5, 0.95, 1.0, 1000, clamped=False)
        assert got == pytest.approx(expected, rel=1e-12)


class TestTruncatedCvarBound:
    def test_raw_value_at_unit_exponent(self):
        level, beta, dev = 3.0, 0.5, 2.0
        n = int(176 * level**2 / (beta * dev**2))
        raw = truncated_cvar_bound(level, 1 - beta, n, dev, clamped=False)
        assert raw == pytest.approx(6 * math.exp(-1), rel=1e-6)

    def test_zero_deviation_clamps(self):
        assert truncated_cvar_bound(3.0, 0.95, 100, 0.0, clamped=False) == 6.0
        assert truncated_cvar_bound(3.0, 0.95, 100, 0.0) == 1.0

    def test_validity_threshold(self):
        got = truncated_cvar_validity(PRIOR, 0.95, 0.5, 2.2)
        expected = max(2.2, (2 * 1.0 / (0.5 * 0.05)) ** 1.0)
        assert got == pytest.approx(expected, rel=1e-12)


class TestMedianOfBinsBounds:
    def test_bound_at_eight_bins(self):
        assert mob_cvar_bound(8 * 50, 50) == pytest.approx(math.exp(-1.0), rel=1e-12)
        assert mob_mean_bound(8 * 50, 50) == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_threshold_nonincreasing_in_deviation(self):
        values = [mob_cvar_threshold(PRIOR, 0.95, d) for d in (0.25, 0.5, 1.0, 2.0, 4.0)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_threshold_duplicate_oracle(self):
        got = mob_cvar_threshold(PRIOR, 0.95, 1.0)
        assert got == pytest.approx(hand_mob_threshold(2.0, 1.0, 1.0, 0.05, 1.0), rel=1e-12)

    def test_mean_threshold_branches(self):
        assert mob_mean_threshold(2.0, 1.0, 1.0) == pytest.approx(144.0, rel=1e-12)
        heavy = mob_mean_threshold(3.0, 1.0, 1.0)
        assert heavy == pytest.approx((4 * c_p_constant(3.0)) ** (1 / 1.5), rel=1e-12)

    def test_bin_size_validated(self):
        with pytest.raises(ValueError):
            mob_cvar_bound(10, 20)


class TestAuxBounds:
    def test_c_p_at_two(self):
        assert c_p_constant(2.0) == pytest.approx(36.0, rel=1e-12)

    def test_var_magnitude(self):
        assert var_magnitude_bound(2.0, 1.0, 0.5) == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_cvar_magnitude(self):
        assert cvar_magnitude_bound(2.0, 2.0, 0.95) == pytest.approx((2.0 / 0.05) ** 0.5, rel=1e-12)

    def test_bounded_cvar_zero_deviation(self):
        assert bounded_cvar_bound(0.0, 1.0, 0.95, 100, 0.0, clamped=False) == 6.0
        assert bounded_cvar_bound(0.0, 1.0, 0.95, 100, 0.0) == 1.0

    def test_empirical_mean_exponent_branches(self):
        light = empirical_mean_bound(3.0, 1.0, 100, 1.0, clamped=False)
        assert light == pytest.approx(c_p_constant(3.0) / 100**1.5, rel=1e-12)
        heavy = empirical_mean_bound(1.5, 1.0, 100, 1.0, clamped=False)
        assert heavy == pytest.approx(c_p_constant(1.5) / 100**0.5, rel=1e-12)

    def test_truncated_mean_threshold_branches(self):
        assert truncated_mean_threshold(1.5, 2.0, 0.5, 1.0) == pytest.approx(
            6.0 ** (1 / 0.25), rel=1e-12
        )
        assert truncated_mean_threshold(3.0, 2.0, 0.5, 1.0) == pytest.approx(36.0, rel=1e-12)

    def test_truncated_mean_bound_value(self):
        assert truncated_mean_bound(256, 0.5, 1.0, clamped=False) == pytest.approx(
            2 * math.exp(-4.0), rel=1e-12
        )

    def test_bundle_wires_the_prior(self):
        bundle = aux_bounds(PRIOR, 0.5)
        assert isinstance(bundle, AuxBounds)
        assert bundle.c_p == pytest.approx(36.0)
        assert bundle.var_magnitude == pytest.approx(math.sqrt(2.0))
        assert bundle.empirical_mean_bound(100, 1.0) == empirical_mean_bound(2.0, 1.0, 100, 1.0)
        assert bundle.bounded_cvar_bound(0.0, 2.0, 50, 0.5) == bounded_cvar_bound(
            0.0, 2.0, 0.5, 50, 0.5
        )


class TestDuplicateOracleGrid:
    def test_ten_point_agreement(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            p = float(rng.uniform(1.2, 2.0))
            B = float(rng.uniform(0.5, 5.0))
            V = float(rng.uniform(0.5, 5.0))
            alpha = float(rng.uniform(0.8, 0.99))
            gap = float(rng.uniform(0.2, 2.0))
            q_m = float(rng.uniform(0.2, 0.8))
            q_c = float(rng.uniform(0.1, 0.45))
            beta = 1 - alpha
            prior = MomentPrior(p, B, V, gap)
            assert v_emp(prior, alpha) == pytest.approx(hand_v_emp(p, B, V, beta), rel=1e-9)
            assert mob_cvar_threshold(prior, alpha, gap) == pytest.approx(
                hand_mob_threshold(p, B, V, beta, gap), rel=1e-9
            )
            sr = sr_truncation_error_bound(
                (gap,) * 9, prior, alpha, 1.0, 1.0, q_m, q_c, 10**6, 10
            )
            assert sr.n_star == pytest.approx(
                hand_n_star(p, B, beta, alpha, gap, 1.0, 1.0, q_m, q_c), rel=1e-9
            )
            mob = sr_mob_error_bound(prior, alpha, 1.0, 1.0, q_m, q_c, 10**6, 10, gap)
            assert mob.min_budget == pytest.approx(
                hand_t_star(p, B, V, alpha, gap, 1.0, 1.0, q_m, q_c, 10), rel=1e-9
            )


class TestSrTruncationBound:
    def test_pure_mean_objective_single_sum(self):
        gaps = (0.1, 0.2, 0.3)
        prior = MomentPrior(2.0, 1.0, 1.0, 0.1)
        res = sr_truncation_error_bound(gaps, prior, 0.95, 1.0, 0.0, 0.3, 0.2, 5000, 4)
        base = (5000 - 4) / log_bar(4)
        hand = sum(
            (4 + 1 - i) * 2 * math.exp(-(base ** 0.7) * gap / (16 * i**0.7))
            for i, gap in zip((2, 3, 4), gaps)
        )
        assert res.bound == pytest.approx(min(1.0, hand), rel=1e-9)
        assert res.min_budget == 4 + 4 * log_bar(4) * res.n_star

    def test_two_arms_two_terms(self):
        prior = MomentPrior(2.0, 1.0, 1.0, 0.5)
        res = sr_truncation_error_bound((0.5,), prior, 0.95, 1.0, 1.0, 0.3, 0.2, 4000, 2)
        base = (4000 - 2) / log_bar(2)
        mean_term = 2 * math.exp(-(base ** 0.7) * 0.5 / (16 * 2**0.7))
        cvar_term = 6 * math.exp(-(0.05 / 2464) * base ** 0.6 * 0.25 / 2**0.6)
        assert res.bound == pytest.approx(min(1.0, mean_term + cvar_term), rel=1e-9)

    def test_nonincreasing_beyond_min_budget(self):
        prior = MomentPrior(1.8, 1.0, 1.0, 0.3)
        res0 = sr_truncation_error_bound((0.3,) * 9, prior, 0.95, 1.0, 1.0, 0.4, 0.2, 10**5, 10)
        grid = [int(res0.min_budget * (1.1 + 0.4 * i)) for i in range(8)]
        values = [
            sr_truncation_error_bound((0.3,) * 9, prior, 0.95, 1.0, 1.0, 0.4, 0.2, t, 10).log_bound
            for t in grid
        ]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_log_bound_over_budget_power_converges(self):
        q = 0.3
        gap = 0.1
        prior = MomentPrior(2.0, 1.0, 1.0, gap)
        ratios = []
        for exponent in range(10, 21):
            t = 2**exponent
            res = sr_truncation_error_bound(
                (gap,) * 9, prior, 0.95, 1.0, 0.0, q, q / 2, t, 10
            )
            ratios.append(res.log_bound / t ** (1.0 - q))
        # slowest-decaying term: arm K with rate gap / (16 K^(1-q) log_bar(K)^(1-q))
        limit = -(gap / 16.0) / (10 * log_bar(10)) ** (1.0 - q)
        assert limit < 0
        assert all(a > b for a, b in zip(ratios, ratios[1:]))  # approaches from above
        assert all(r < 0 for r in ratios[-3:])
        assert abs(ratios[-1] - limit) < 0.15 * abs(limit)

    def test_input_validation(self):
        prior = MomentPrior(2.0, 1.0, 1.0, 0.1)
        with pytest.raises(ValueError, match="gap"):
            sr_truncation_error_bound((0.0, 0.1), prior, 0.95, 1.0, 0.0, 0.3, 0.2, 1000, 3)
        with pytest.raises(ValueError, match="nondecreasing"):
            sr_truncation_error_bound((0.2, 0.1), prior, 0.95, 1.0, 0.0, 0.3, 0.2, 1000, 3)
        with pytest.raises(ValueError, match="q_c"):
            sr_truncation_error_bound((0.1,), prior, 0.95, 0.0, 1.0, 0.3, 0.7, 1000, 2)


class TestSrMedianBound:
    def test_equal_exponents_symmetric_terms(self):
        prior = MomentPrior(2.0, 1.0, 1.0, 0.5)
        res = sr_mob_error_bound(prior, 0.95, 1.0, 1.0, 0.3, 0.3, 20000, 5, 0.5)
        hand = sum(
            2 * k * math.exp(-((20000 - 5) / (log_bar(5) * (5 + 1 - k))) ** 0.7 / 8)
            for k in range(1, 5)
        )
        assert res.bound == pytest.approx(min(1.0, hand), rel=1e-9)

    def test_bound_at_threshold_below_k_squared(self):
        prior = MomentPrior(2.0, 1.0, 1.0, 0.5)
        probe = sr_mob_error_bound(prior, 0.95, 1.0, 1.0, 0.5, 0.5, 10**6, 6, 0.5)
        res = sr_mob_error_bound(
            prior, 0.95, 1.0, 1.0, 0.5, 0.5, int(probe.min_budget) + 1, 6, 0.5
        )
        assert math.isfinite(res.log_bound)
        assert res.log_bound < 2 * math.log(6)

    def test_vanishes_at_huge_budget(self):
        prior = MomentPrior(2.0, 1.0, 1.0, 0.5)
        res = sr_mob_error_bound(prior, 0.95, 1.0, 1.0, 0.5, 0.5, 10**9, 6, 0.5)
        assert res.bound < 1e-12


class TestTailPerturbation:
    GRID = (100.0, 1000.0, 10000.0)

    def test_kl_below_proof_bound_and_decreasing(self):
        base = Pareto(1.0, 1.5)
        kls = []
        for cutoff in self.GRID:
            pert = perturb_distribution(base, cutoff, 1.5)
            assert 0.0 < pert.chi1 < 1.0
            kl = pert.kl_to_base()
            assert 0.0 <= kl <= pert.kl_proof_bound()
            kls.append(kl)
        assert all(a > b for a, b in zip(kls, kls[1:]))

    def test_mean_grows_without_bound(self):
        base = Pareto(1.0, 1.5)
        base_mean = ground_truth(base, 0.95).mean
        means = [
            perturb_distribution(base, cutoff, 1.5).objective_value(0.95, 1.0, 0.0)
            for cutoff in self.GRID
        ]
        assert all(a < b for a, b in zip(means, means[1:]))
        assert means[-1] > 10.0 * base_mean

    def test_objective_grows(self):
        base = Pareto(1.0, 1.5)
        objs = [
            perturb_distribution(base, cutoff, 1.5).objective_value(0.95, 0.0, 1.0)
            for cutoff in self.GRID
        ]
        assert all(a < b for a, b in zip(objs, objs[1:]))

    def test_inadmissible_cutoff_reports_minimum(self):
        base = Pareto(2.0, 1.5)
        with pytest.raises(InadmissibleCutoffError, match="minimal admissible"):
            perturb_distribution(base, 3.0, 1.5)
        minimal = minimal_admissible_cutoff(base, 1.5)
        assert minimal == pytest.approx(8.0, rel=1e-3)
