"""Tests for the recovery guarantees, the CRB and the probability bounds."""

import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chi2

from bsl.bounds import (
    adversarial_guarantee,
    chi_square_tail,
    chi_square_tail_bound,
    crb,
    crb_coherence_bound,
    event_b_failure_bound,
    event_b_probability,
    gaussian_guarantee,
    noiseless_condition,
    solve_alpha,
)
from bsl.coherence import coherence_profile
from bsl.dictgen import derive_seed, generate_dictionary, generate_signal, measure
from bsl.errors import ArgumentError, ConsistencyError, SingularityError, SolverError
from bsl.estimators import bomp, support_recovered
from bsl.models import (
    Algorithm,
    BlockedDictionary,
    CoherenceProfile,
    NoiseSpec,
    ProbabilityForm,
    SignalSpec,
)

# Row 1 of the table1 preset.
ROW = CoherenceProfile(mu=0.10, mu_block=0.026, nu=0.0, d=5, M=1200, L=3000)


def _profile(mu_block: float = 0.0, nu: float = 0.0, d: int = 2) -> CoherenceProfile:
    return CoherenceProfile(mu=None, mu_block=mu_block, nu=nu, d=d, M=50, L=100)


class TestNoiselessCondition:

    def test_bomp_ignores_amplitudes(self):
        holds, margin = noiseless_condition(ROW, 1, 1.0, 10.0, Algorithm.BOMP)
        assert holds
        assert margin == pytest.approx(0.87)

    def test_bth_scales_with_dynamic_range(self):
        holds, margin = noiseless_condition(ROW, 1, 1.0, 3.0, Algorithm.BTH)
        assert holds
        assert margin == pytest.approx(1 - 0.39)

    def test_printed_form_moves_ratio(self):
        profile = _profile(mu_block=0.05, nu=0.1, d=3)
        _, standard = noiseless_condition(profile, 2, 1.0, 2.0, Algorithm.BTH)
        _, printed = noiseless_condition(profile, 2, 1.0, 2.0, Algorithm.BTH, printed_form=True)
        assert standard == pytest.approx(1 - (0.2 + 0.45 * 2))
        assert printed == pytest.approx(1 - (0.2 * 2 + 0.45))

    def test_fails_for_large_k(self):
        holds, margin = noiseless_condition(ROW, 8, 1.0, 1.0, Algorithm.BOMP)
        assert not holds
        assert margin < 0

    def test_zero_xmin(self):
        assert noiseless_condition(ROW, 1, 0.0, 1.0, Algorithm.BTH) == (False, -math.inf)

    def test_scalar_algorithm_needs_scalar_profile(self):
        with pytest.raises(ArgumentError, match="as_scalar"):
            noiseless_condition(ROW, 1, 1.0, 1.0, Algorithm.OMP)
        assert noiseless_condition(ROW.as_scalar(), 5, 1.0, 1.0, Algorithm.OMP)[0]
        assert not noiseless_condition(ROW.as_scalar(), 6, 1.0, 1.0, Algorithm.OMP)[0]

    def test_no_guarantee_for_ml(self):
        with pytest.raises(ArgumentError, match="no guarantee"):
            noiseless_condition(ROW, 1, 1.0, 1.0, Algorithm.ML)

    def test_amplitude_order(self):
        with pytest.raises(ArgumentError, match="exceeds"):
            noiseless_condition(ROW, 1, 2.0, 1.0, Algorithm.BOMP)


class TestAdversarialGuarantee:

    def test_noiseless_limit(self):
        report = adversarial_guarantee(ROW, 1, 1.0, 1.0, 0.0, Algorithm.BOMP)
        assert report.condition_holds
        assert report.condition_margin == pytest.approx(0.87)
        assert report.error_bound == 0.0

    def test_error_bound(self):
        report = adversarial_guarantee(ROW, 2, 1.0, 1.0, 0.1, Algorithm.BOMP)
        assert report.condition_holds
        assert report.error_bound == pytest.approx(0.01 / (1 - 5 * 0.026))

    def test_large_noise_fails(self):
        report = adversarial_guarantee(ROW, 1, 1.0, 1.0, 0.5, Algorithm.BOMP)
        assert not report.condition_holds
        assert report.error_bound is None

    def test_boundary_is_strict(self):
        report = adversarial_guarantee(_profile(), 1, 1.0, 1.0, 0.5, Algorithm.BOMP)
        assert report.condition_margin == 0.0
        assert not report.condition_holds

    def test_thresholding_uses_largest_block(self):
        bomp_report = adversarial_guarantee(ROW, 2, 1.0, 2.0, 0.1, Algorithm.BOMP)
        bth_report = adversarial_guarantee(ROW, 2, 1.0, 2.0, 0.1, Algorithm.BTH)
        assert bth_report.condition_margin == pytest.approx(bomp_report.condition_margin - 3 * 5 * 0.026)

    def test_inconsistent_denominator(self, monkeypatch):
        monkeypatch.setattr("bsl.bounds._set_denominator", lambda profile, k: 0.0)
        with pytest.raises(ConsistencyError):
            adversarial_guarantee(ROW, 1, 1.0, 1.0, 0.0, Algorithm.BOMP)

    def test_negative_epsilon(self):
        with pytest.raises(ArgumentError):
            adversarial_guarantee(ROW, 1, 1.0, 1.0, -0.1, Algorithm.BOMP)


class TestCrb:

    def test_orthonormal_block(self, identity_dict):
        result = crb(identity_dict, [0], 2.0)
        assert result.trace == pytest.approx(2.0)
        assert result.bound == pytest.approx(4.0)
        assert result.unbiased_estimable

    def test_matches_dense_trace(self, small_dict):
        support = [1, 4, 6]
        DS = small_dict.entries[:, [2, 3, 8, 9, 12, 13]]
        expected = np.trace(np.linalg.inv(DS.T @ DS))
        assert crb(small_dict, support, 0.5).bound == pytest.approx(0.5 * expected, rel=1e-10)

    def test_smaller_support_has_no_bound(self, small_dict):
        result = crb(small_dict, [2], 1.0, k=3)
        assert not result.unbiased_estimable
        assert result.bound is None
        assert result.trace > 0

    def test_support_larger_than_k(self, small_dict):
        with pytest.raises(ArgumentError):
            crb(small_dict, [0, 1], 1.0, k=1)

    def test_empty_support(self, small_dict):
        with pytest.raises(ArgumentError):
            crb(small_dict, [], 1.0)

    def test_singular_support(self):
        D = BlockedDictionary(np.array([
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]), 2)
        with pytest.raises(SingularityError):
            crb(D, [0, 1], 1.0)

    def test_coherence_estimate_dominates(self, tall_dict, rng):
        profile = coherence_profile(tall_dict)
        ceiling = crb_coherence_bound(profile, 3, 1.0)
        assert ceiling is not None
        for _ in range(30):
            support = sorted(rng.choice(10, size=3, replace=False))
            assert crb(tall_dict, support, 1.0).bound <= ceiling + 1e-12

    def test_coherence_estimate_inapplicable(self):
        assert crb_coherence_bound(ROW, 10, 1.0) is None


class TestChiSquareTail:

    @pytest.mark.parametrize("t", [1.0, 1.5, 2.0, 3.0])
    def test_two_dimensions_is_exact(self, t):
        assert chi_square_tail_bound(2, t).tight_raw == pytest.approx(chi_square_tail(2, t), rel=1e-12)

    def test_bounds_ordering(self):
        for d in range(1, 11):
            for t in np.arange(1.0, 6.01, 0.5):
                bound = chi_square_tail_bound(d, t)
                assert chi_square_tail(d, t) <= bound.tight_raw * (1 + 1e-12)
                assert bound.tight_raw <= bound.loose_raw

    def test_clipped(self):
        bound = chi_square_tail_bound(10, 1.0)
        assert bound.tight_raw > 1.0
        assert bound.tight == 1.0
        assert bound.loose == 1.0

    def test_small_t(self):
        with pytest.raises(ArgumentError, match="t >= 1"):
            chi_square_tail_bound(3, 0.5)

    @pytest.mark.parametrize("d", [1, 3, 5])
    def test_exact_tail_matches_quadrature(self, d):
        t = 2.5
        expected, _ = integrate.quad(chi2.pdf, t * t, np.inf, args=(d,))
        assert chi_square_tail(d, t) == pytest.approx(expected, rel=1e-8)

    def test_exact_tail_at_zero(self):
        assert chi_square_tail(4, 0.0) == pytest.approx(1.0)


class TestEventBBound:

    def test_published_scale(self):
        assert event_b_failure_bound(6000, 5, 0.425) == pytest.approx(0.0101, rel=0.02)

    def test_per_block_form_carries_d(self):
        lemma = event_b_failure_bound(6000, 5, 0.6)
        theorem = event_b_failure_bound(6000, 5, 0.6, ProbabilityForm.THEOREM4)
        assert theorem == pytest.approx(5 * lemma, rel=1e-12)

    def test_scalar_closed_form(self):
        N, alpha = 6000, 1.3
        expected = 0.8 / (math.sqrt(2 * alpha * math.log(N)) * N ** (alpha - 1))
        assert event_b_failure_bound(N, 1, alpha) == pytest.approx(expected, rel=1e-12)

    def test_clip(self):
        floor = 1 / (2 * 5 * math.log(6000))
        assert event_b_failure_bound(6000, 5, floor) == 1.0
        assert event_b_failure_bound(6000, 5, floor, clip=False) > 1.0

    def test_below_floor(self):
        with pytest.raises(ArgumentError, match="admissible minimum"):
            event_b_failure_bound(6000, 5, 0.001)


class TestSolveAlpha:

    def test_meets_confidence_tightly(self):
        alpha = solve_alpha(6000, 5, 0.99)
        assert alpha == pytest.approx(0.425, abs=0.002)
        assert event_b_failure_bound(6000, 5, alpha) == pytest.approx(0.01, rel=1e-6)

    def test_monotone_in_confidence(self):
        alphas = [solve_alpha(6000, 5, c) for c in (0.5, 0.9, 0.99, 0.999)]
        assert alphas == sorted(alphas)

    def test_per_block_form_needs_larger_alpha(self):
        assert solve_alpha(6000, 5, 0.99, "theorem4") > solve_alpha(6000, 5, 0.99, "lemma5")

    def test_floor_already_enough(self):
        assert solve_alpha(2, 1, 0.02) == pytest.approx(1 / (2 * math.log(2)))

    def test_unreachable(self, monkeypatch):
        monkeypatch.setattr("bsl.bounds.ALPHA_UPPER", 0.5)
        with pytest.raises(SolverError, match="not reachable"):
            solve_alpha(6000, 5, 0.999999)

    @pytest.mark.parametrize("confidence", [0.0, 1.0, 1.5])
    def test_confidence_range(self, confidence):
        with pytest.raises(ArgumentError):
            solve_alpha(6000, 5, confidence)


class TestGaussianGuarantee:

    def test_published_row(self):
        report = gaussian_guarantee(ROW, 1, 1.0, 1.0, 0.0, 0.99, Algorithm.BOMP)
        assert report.alpha == pytest.approx(0.425, abs=0.002)
        assert report.error_bound_per_sigma2 == pytest.approx(36.97, rel=0.01)
        assert report.condition_holds
        assert report.error_bound == 0.0
        assert report.failure_probability_bound == pytest.approx(0.01, rel=1e-6)

    def test_trend_in_k(self):
        reports = [gaussian_guarantee(ROW, k, 1.0, 1.0, 0.0, 0.99, Algorithm.BOMP) for k in range(1, 5)]
        per_sigma2 = [r.error_bound_per_sigma2 for r in reports]
        sigma_max = [r.sigma_max for r in reports]
        assert per_sigma2 == sorted(per_sigma2)
        assert sigma_max == sorted(sigma_max, reverse=True)
        assert per_sigma2[1] == pytest.approx(97.7, rel=0.01)

    def test_unsatisfiable_row(self):
        report = gaussian_guarantee(ROW, 5, 1.0, 1.0, 0.0, 0.99, Algorithm.BOMP)
        assert not report.condition_holds
        assert report.sigma_max is None
        assert report.error_bound_per_sigma2 is None

    def test_sigma_max_is_the_threshold(self):
        sigma_max = gaussian_guarantee(ROW, 2, 1.0, 1.0, 0.0, 0.99, Algorithm.BOMP).sigma_max
        below = gaussian_guarantee(ROW, 2, 1.0, 1.0, 0.99 * sigma_max, 0.99, Algorithm.BOMP)
        above = gaussian_guarantee(ROW, 2, 1.0, 1.0, 1.01 * sigma_max, 0.99, Algorithm.BOMP)
        assert below.condition_holds
        assert below.error_bound == pytest.approx(below.error_bound_per_sigma2 * (0.99 * sigma_max) ** 2)
        assert not above.condition_holds
        assert above.error_bound is None

    def test_alternate_threshold(self):
        report = gaussian_guarantee(ROW, 1, 1.0, 1.0, 0.0, 0.99, Algorithm.BOMP)
        assert report.sigma_max_alternate == pytest.approx(report.sigma_max * math.sqrt(5))

    def test_scalar_view(self):
        scalar = ROW.as_scalar()
        report = gaussian_guarantee(scalar, 5, 1 / math.sqrt(5), 1 / math.sqrt(5), 0.0, 0.99, Algorithm.OMP)
        assert report.alpha > 1.0
        assert report.error_bound_per_sigma2 > 36.97

    @pytest.mark.parametrize("confidence, fraction, trials", [
        (0.9, 0.5, 2000),
        pytest.param(0.99, 0.5, 10000, marks=[pytest.mark.slow, pytest.mark.timeout(1200)]),
        pytest.param(0.99, 0.999, 10000, marks=[pytest.mark.slow, pytest.mark.timeout(1200)]),
    ])
    def test_recovery_below_threshold(self, confidence, fraction, trials):
        D = generate_dictionary(200, 10, 2, seed=21)
        profile = coherence_profile(D)
        reference = gaussian_guarantee(profile, 1, 1.0, 1.0, 0.0, confidence, Algorithm.BOMP)
        sigma = fraction * reference.sigma_max
        report = gaussian_guarantee(profile, 1, 1.0, 1.0, sigma, confidence, Algorithm.BOMP)
        assert report.condition_holds

        good = 0
        for trial in range(trials):
            x = generate_signal(SignalSpec(M=10, d=2, s=1, xmin_norm=1.0, xmax_norm=1.0,
                                           seed=derive_seed(4, 0, trial)))
            y = measure(D, x, NoiseSpec(sigma=sigma, seed=derive_seed(4, 1, trial)))
            result = bomp(D, y, 1)
            error = np.sum((result.estimate.values - x.values) ** 2)
            good += support_recovered(result, x) and error <= report.error_bound
        p = report.failure_probability_bound
        assert good / trials >= 1 - p - 3 * math.sqrt(p * (1 - p) / trials)


class TestScalarReduction:
    """d = 1 guarantees against their closed forms."""

    PROFILE = CoherenceProfile(mu=0.02, mu_block=0.02, nu=0.0, d=1, M=6000, L=3000)

    @pytest.mark.parametrize("k", [1, 3, 8])
    def test_omp_adversarial(self, k):
        mu, xmin, eps = 0.02, 1.0, 0.05
        report = adversarial_guarantee(self.PROFILE, k, xmin, 2.0, eps, Algorithm.OMP)
        assert report.condition_margin == pytest.approx((1 - (2 * k - 1) * mu) * xmin - 2 * eps, abs=1e-12)
        assert report.error_bound == pytest.approx(eps**2 / (1 - (k - 1) * mu), abs=1e-12)

    @pytest.mark.parametrize("k", [1, 3, 8])
    def test_thr_adversarial_uses_largest(self, k):
        mu, xmin, xmax, eps = 0.02, 1.0, 2.0, 0.05
        report = adversarial_guarantee(self.PROFILE, k, xmin, xmax, eps, Algorithm.THR)
        expected = xmin - (2 * k - 1) * mu * xmax - 2 * eps
        assert report.condition_margin == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 3, 8])
    def test_omp_gaussian(self, k):
        mu, xmin, sigma = 0.02, 1.0, 0.01
        report = gaussian_guarantee(self.PROFILE, k, xmin, xmin, sigma, 0.99, Algorithm.OMP)
        alpha, log_n = report.alpha, math.log(6000)
        head = (1 - (2 * k - 1) * mu) * xmin
        expected = head - 2 * sigma * math.sqrt(2 * alpha * log_n)
        assert report.condition_margin == pytest.approx(expected, abs=1e-12)
        assert report.error_bound_per_sigma2 == pytest.approx(
            2 * alpha * k * log_n / (1 - (k - 1) * mu) ** 2, abs=1e-12)
        assert report.sigma_max == pytest.approx(head / (2 * math.sqrt(2 * alpha * log_n)), abs=1e-12)
        assert report.sigma_max_alternate == pytest.approx(report.sigma_max, abs=1e-12)

    def test_failure_probability_closed_form(self):
        report = gaussian_guarantee(self.PROFILE, 1, 1.0, 1.0, 0.0, 0.99, Algorithm.OMP)
        alpha, N = report.alpha, 6000
        closed = 1 / (N ** (alpha - 1) * math.sqrt(math.pi * alpha * math.log(N)))
        # The general form carries 0.8 where the scalar one has 1/sqrt(pi/2).
        assert report.failure_probability_bound == pytest.approx(closed, rel=0.005)


class TestBoundDominance:

    def test_block_error_bound_never_exceeds_scalar(self):
        checked = 0
        for seed in range(40):
            L, M, d = [(60, 8, 3), (120, 12, 4), (200, 20, 2), (400, 30, 5)][seed % 4]
            profile = coherence_profile(generate_dictionary(L, M, d, seed=seed))
            for k in range(1, M + 1):
                block = 1 - (d - 1) * profile.nu - (k - 1) * d * profile.mu_block
                scalar = 1 - (k * d - 1) * profile.mu
                if scalar <= 0:
                    break
                assert block >= scalar - 1e-12
                eps = 0.1
                assert eps**2 / block <= eps**2 / scalar + 1e-12
                checked += 1
        assert checked > 0


class TestEventBProbability:

    def test_empirical_respects_bound(self, tall_dict):
        alpha = solve_alpha(tall_dict.N, 2, 0.9)
        empirical, lower = event_b_probability(tall_dict, 1.0, alpha, trials=4000, seed=3)
        assert lower == pytest.approx(0.9, rel=1e-6)
        assert empirical >= lower - 0.02

    def test_deterministic(self, tall_dict):
        a = event_b_probability(tall_dict, 0.5, 1.0, trials=300, seed=8)
        b = event_b_probability(tall_dict, 0.5, 1.0, trials=300, seed=8)
        assert a == b

    def test_sigma_must_be_positive(self, tall_dict):
        with pytest.raises(ArgumentError):
            event_b_probability(tall_dict, 0.0, 1.0, trials=10, seed=0)
