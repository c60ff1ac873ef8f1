"""Closed-form recovery guarantees, the Cramer-Rao bound and the probability bounds behind them.

log is the natural logarithm throughout. The Gaussian guarantees use the
noise threshold tau^2 = 2 alpha d sigma^2 (1 + (d-1) nu) log N.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable, Optional

import numpy as np
from scipy import optimize
from scipy.special import gammaincc, gammaln

from .coherence import sub_coherence
from .dictgen import Stream, stream_rng
from .errors import ArgumentError, ConsistencyError, SolverError
from .linalg import restricted_gram_inverse
from .models import (
    Algorithm,
    BlockedDictionary,
    ChiSquareTailBound,
    CoherenceProfile,
    CrbResult,
    GuaranteeReport,
    NoiseModel,
    ProbabilityForm,
    parse_choice,
)

logger = logging.getLogger(__name__)

ALPHA_UPPER = 1e3
ALPHA_RTOL = 1e-10
# Monte Carlo noise draws formed per pass in event_b_probability.
EVENT_B_CHUNK = 256

# Algorithms sharing the BTH condition (largest block in the interference term).
_THRESHOLDING = (Algorithm.BTH, Algorithm.THR)


def _check_algorithm(profile: CoherenceProfile, algo) -> Algorithm:
    algo = parse_choice(Algorithm, algo)
    if algo in (Algorithm.BTH, Algorithm.BOMP):
        return algo
    if algo.is_scalar:
        if profile.d != 1:
            raise ArgumentError(
                f"{algo.value} guarantees need a d = 1 profile; use profile.as_scalar() first"
            )
        return algo
    raise ArgumentError(f"no guarantee is available for the {algo.value} estimator")


def _check_amplitudes(k: int, xmin: float, xmax: float):
    if k < 1:
        raise ArgumentError(f"k must be at least 1, got {k}")
    if xmin < 0 or xmax < 0:
        raise ArgumentError("xmin and xmax must be nonnegative")
    if xmin > xmax:
        raise ArgumentError(f"xmin={xmin} exceeds xmax={xmax}")


def _set_denominator(profile: CoherenceProfile, k: int) -> float:
    """1 - (d-1)nu - (k-1)d mu_B, the lower eigenvalue estimate for any k blocks."""
    d = profile.d
    return 1.0 - (d - 1) * profile.nu - (k - 1) * d * profile.mu_block


def _interference(profile: CoherenceProfile, k: int, xmin: float, xmax: float, algo: Algorithm) -> float:
    x_star = xmax if algo in _THRESHOLDING else xmin
    return (2 * k - 1) * profile.d * profile.mu_block * x_star


def noiseless_condition(
    profile: CoherenceProfile,
    k: int,
    xmin: float,
    xmax: float,
    algo,
    printed_form: bool = False,
) -> tuple[bool, float]:
    """Exact-recovery condition without noise, returned as (holds, 1 - lhs).

    BOMP: (d-1)nu + (2k-1)d mu_B < 1, independent of the amplitudes.
    BTH: (d-1)nu + (2k-1)d mu_B xmax/xmin < 1, the adversarial condition at
    eps = 0. printed_form=True moves the amplitude ratio onto the nu term
    instead, (d-1)nu xmax/xmin + (2k-1)d mu_B < 1.
    """
    algo = _check_algorithm(profile, algo)
    _check_amplitudes(k, xmin, xmax)
    d = profile.d
    within = (d - 1) * profile.nu
    across = (2 * k - 1) * d * profile.mu_block

    if algo in _THRESHOLDING:
        if xmin == 0:
            return False, -math.inf
        ratio = xmax / xmin
        value = within * ratio + across if printed_form else within + across * ratio
    else:
        value = within + across
    return value < 1.0, 1.0 - value


def adversarial_guarantee(
    profile: CoherenceProfile,
    k: int,
    xmin: float,
    xmax: float,
    epsilon: float,
    algo,
) -> GuaranteeReport:
    """Support recovery and squared-error bound under noise with ||w|| <= epsilon.

    The condition is (1-(d-1)nu) xmin > 2 eps sqrt(1+(d-1)nu) + (2k-1)d mu_B x*
    with x* = xmax for thresholding and xmin for BOMP. When it holds every
    support element is found and ||x_hat - x||^2 <= eps^2 / (1-(d-1)nu-(k-1)d mu_B).
    """
    algo = _check_algorithm(profile, algo)
    _check_amplitudes(k, xmin, xmax)
    if epsilon < 0:
        raise ArgumentError(f"epsilon must be nonnegative, got {epsilon}")

    nu_term = (profile.d - 1) * profile.nu
    lhs = (1.0 - nu_term) * xmin
    rhs = 2.0 * epsilon * math.sqrt(1.0 + nu_term) + _interference(profile, k, xmin, xmax, algo)
    holds = lhs > rhs
    report = GuaranteeReport(
        algorithm=algo,
        noise_model=NoiseModel.ADVERSARIAL,
        condition_holds=holds,
        condition_margin=lhs - rhs,
    )
    if holds:
        denominator = _set_denominator(profile, k)
        if denominator <= 0:
            raise ConsistencyError(
                f"adversarial condition holds but 1-(d-1)nu-(k-1)d mu_B = {denominator:.6g} is not positive"
            )
        report.error_bound = epsilon**2 / denominator
    return report


def crb(
    D: BlockedDictionary,
    support: Iterable[int],
    sigma2: float,
    k: Optional[int] = None,
) -> CrbResult:
    """sigma^2 Tr((D_S^T D_S)^{-1}) on the support S.

    The bound only applies to estimators unbiased over k-sparse vectors when
    |S| = k; for |S| < k no such finite-variance estimator exists and bound
    is left unset. k defaults to |S|.
    """
    support = tuple(sorted(int(i) for i in support))
    if not support:
        raise ArgumentError("the CRB needs a non-empty support")
    if sigma2 < 0:
        raise ArgumentError(f"noise variance must be nonnegative, got {sigma2}")
    if k is None:
        k = len(support)
    if len(support) > k:
        raise ArgumentError(f"support has {len(support)} blocks, more than k = {k}")

    trace = float(np.trace(restricted_gram_inverse(D, support)))
    estimable = len(support) == k
    return CrbResult(
        support=support,
        trace=trace,
        unbiased_estimable=estimable,
        bound=sigma2 * trace if estimable else None,
    )


def crb_coherence_bound(profile: CoherenceProfile, k: int, sigma2: float) -> Optional[float]:
    """k d sigma^2 / (1-(d-1)nu-(k-1)d mu_B): an upper estimate of the CRB for any k blocks."""
    denominator = _set_denominator(profile, k)
    if denominator <= 0:
        return None
    return k * profile.d * sigma2 / denominator


def _double_factorial(n: int) -> int:
    # Empty product for n <= 0, so (-1)!! = 0!! = 1.
    return math.prod(range(n, 0, -2))


def chi_square_tail_bound(d: int, t: float) -> ChiSquareTailBound:
    """Upper bounds on Pr{||u||^2 >= t^2} for u ~ N(0, I_d), valid for t >= 1.

    tight = (d-2)!! ceil(d/2) / (2^(d/2-1) Gamma(d/2)) t^(d-2) e^(-t^2/2);
    loose = 0.8 d t^(d-2) e^(-t^2/2). Evaluated in log space.
    """
    if d < 1:
        raise ArgumentError(f"dimension must be positive, got {d}")
    if t < 1:
        raise ArgumentError(f"the chi-square tail bound holds for t >= 1 only, got t={t}")

    shape = (d - 2) * math.log(t) - t * t / 2.0
    log_tight = (
        math.log(_double_factorial(d - 2))
        + math.log(math.ceil(d / 2))
        - (d / 2.0 - 1.0) * math.log(2.0)
        - gammaln(d / 2.0)
        + shape
    )
    tight_raw = math.exp(log_tight)
    loose_raw = math.exp(math.log(0.8 * d) + shape)
    return ChiSquareTailBound(
        tight=min(1.0, tight_raw),
        loose=min(1.0, loose_raw),
        tight_raw=tight_raw,
        loose_raw=loose_raw,
    )


def chi_square_tail(d: int, t: float) -> float:
    """Exact Pr{||u||^2 >= t^2} for u ~ N(0, I_d)."""
    if d < 1:
        raise ArgumentError(f"dimension must be positive, got {d}")
    if t < 0:
        raise ArgumentError(f"t must be nonnegative, got {t}")
    return float(gammaincc(d / 2.0, t * t / 2.0))


def _alpha_floor(N: int, d: int) -> float:
    return 1.0 / (2.0 * d * math.log(N))


def _log_failure_bound(N: int, d: int, alpha: float, form: ProbabilityForm) -> float:
    log_n = math.log(N)
    value = (
        math.log(0.8)
        + (d / 2.0 - 1.0) * math.log(2.0 * alpha * d * log_n)
        - (alpha * d - 1.0) * log_n
    )
    if form is ProbabilityForm.THEOREM4:
        value += math.log(d)
    return value


def event_b_failure_bound(
    N: int,
    d: int,
    alpha: float,
    form=ProbabilityForm.LEMMA5,
    clip: bool = True,
) -> float:
    """Upper bound on the probability that some block correlation with the noise exceeds tau.

    lemma5: 0.8 (2 alpha d log N)^(d/2-1) / N^(alpha d - 1). theorem4 carries
    an extra factor d.
    """
    form = parse_choice(ProbabilityForm, form)
    if N < 2 or d < 1:
        raise ArgumentError(f"need N >= 2 and d >= 1, got N={N}, d={d}")
    floor = _alpha_floor(N, d)
    if alpha < floor * (1.0 - 1e-12):
        raise ArgumentError(f"alpha={alpha} is below the admissible minimum 1/(2d log N) = {floor:.6g}")
    value = math.exp(min(_log_failure_bound(N, d, alpha, form), 700.0))
    return min(1.0, value) if clip else value


def solve_alpha(N: int, d: int, confidence: float, form=ProbabilityForm.LEMMA5) -> float:
    """Smallest alpha whose event-B failure bound is at most 1 - confidence.

    The bound rises until alpha = (d-2)/(2d log N) and falls afterwards, so the
    search bisects on the falling branch up to alpha = 1e3.
    """
    form = parse_choice(ProbabilityForm, form)
    if not 0 < confidence < 1:
        raise ArgumentError(f"confidence must lie in (0, 1), got {confidence}")
    if N < 2 or d < 1:
        raise ArgumentError(f"need N >= 2 and d >= 1, got N={N}, d={d}")

    log_target = math.log1p(-confidence)
    floor = _alpha_floor(N, d)
    if _log_failure_bound(N, d, floor, form) <= log_target:
        logger.debug("alpha floor %.6g already meets confidence %s", floor, confidence)
        return floor

    start = max(floor, (d - 2) / (2.0 * d * math.log(N)))

    def excess(alpha: float) -> float:
        return _log_failure_bound(N, d, alpha, form) - log_target

    if excess(ALPHA_UPPER) > 0:
        raise SolverError(
            f"confidence {confidence} is not reachable for N={N}, d={d} with alpha <= {ALPHA_UPPER:g}"
        )
    if excess(start) <= 0:
        return start

    logger.debug("bisecting alpha on [%.6g, %g] for confidence %s", start, ALPHA_UPPER, confidence)
    alpha = optimize.bisect(excess, start, ALPHA_UPPER, xtol=1e-14, rtol=ALPHA_RTOL)
    logger.debug("alpha = %.12g", alpha)
    return float(alpha)


def gaussian_guarantee(
    profile: CoherenceProfile,
    k: int,
    xmin: float,
    xmax: float,
    sigma: float,
    confidence: float,
    algo,
    form=ProbabilityForm.LEMMA5,
) -> GuaranteeReport:
    """Support recovery and squared-error bound under white Gaussian noise of deviation sigma.

    alpha is the smallest value reaching the requested confidence. The
    condition is (1-(d-1)nu) xmin - (2k-1)d mu_B x* >= 2 sigma sqrt(2 alpha d
    (1+(d-1)nu) log N); when it holds, with probability at least
    1 - failure_probability_bound,
    ||x_hat - x||^2 <= 2 alpha (1+(d-1)nu) d k sigma^2 log N / (1-(d-1)nu-(k-1)d mu_B)^2.
    """
    algo = _check_algorithm(profile, algo)
    _check_amplitudes(k, xmin, xmax)
    form = parse_choice(ProbabilityForm, form)
    if sigma < 0:
        raise ArgumentError(f"sigma must be nonnegative, got {sigma}")

    d, N = profile.d, profile.N
    log_n = math.log(N)
    alpha = solve_alpha(N, d, confidence, form)
    spread = 1.0 + (d - 1) * profile.nu

    lhs = (1.0 - (d - 1) * profile.nu) * xmin - _interference(profile, k, xmin, xmax, algo)
    noise_factor = 2.0 * math.sqrt(2.0 * alpha * d * spread * log_n)
    rhs = sigma * noise_factor
    holds = lhs > 0 and lhs >= rhs

    raw = event_b_failure_bound(N, d, alpha, form, clip=False)
    report = GuaranteeReport(
        algorithm=algo,
        noise_model=NoiseModel.GAUSSIAN,
        condition_holds=holds,
        condition_margin=lhs - rhs,
        alpha=alpha,
        failure_probability_bound=min(1.0, raw),
        failure_probability_raw=raw,
    )
    if lhs <= 0:
        return report

    denominator = _set_denominator(profile, k)
    if denominator <= 0:
        raise ConsistencyError(
            f"Gaussian condition is satisfiable but 1-(d-1)nu-(k-1)d mu_B = {denominator:.6g} is not positive"
        )
    report.error_bound_per_sigma2 = 2.0 * alpha * spread * d * k * log_n / denominator**2
    report.sigma_max = lhs / noise_factor
    report.sigma_max_alternate = lhs / (2.0 * math.sqrt(2.0 * alpha * spread * log_n))
    if holds:
        report.error_bound = report.error_bound_per_sigma2 * sigma**2
    return report


def event_b_probability(
    D: BlockedDictionary,
    sigma: float,
    alpha: float,
    trials: int,
    seed: int,
    form=ProbabilityForm.LEMMA5,
) -> tuple[float, float]:
    """Monte Carlo estimate of Pr{max_i ||D[i]^T w|| <= tau} for w ~ N(0, sigma^2 I).

    Returns (empirical probability, 1 - event_b_failure_bound), so the first
    should not fall below the second beyond sampling error.
    """
    if sigma <= 0:
        raise ArgumentError(f"sigma must be positive, got {sigma}")
    if trials < 1:
        raise ArgumentError("trials must be at least 1")

    L, N, M, d = D.L, D.N, D.num_blocks, D.block_size
    lower = 1.0 - event_b_failure_bound(N, d, alpha, form)
    nu = sub_coherence(D)
    tau = math.sqrt(2.0 * alpha * d * sigma**2 * (1.0 + (d - 1) * nu) * math.log(N))

    rng = stream_rng(seed, Stream.NOISE)
    inside = 0
    for start in range(0, trials, EVENT_B_CHUNK):
        count = min(EVENT_B_CHUNK, trials - start)
        W = sigma * rng.standard_normal((L, count))
        correlations = np.linalg.norm((D.entries.T @ W).reshape(M, d, count), axis=1)
        inside += int(np.count_nonzero(correlations.max(axis=0) <= tau))
    return inside / trials, lower
