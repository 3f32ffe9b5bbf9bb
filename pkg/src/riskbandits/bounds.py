"""Closed-form deviation bounds, their validity thresholds, and constants.

Everything here is plain arithmetic on a moment prior (an order p in (1, 2],
a raw p-th moment bound and a centered p-th moment bound).  Probability
bounds are clamped to [0, 1] because the raw expressions exceed one for
small sample sizes; thresholds are returned unclamped.  The tail
perturbation at the end builds, for any heavy-tailed base distribution, a
nearby distribution (small KL divergence) with an arbitrarily large
mean/CVaR objective, which is the mechanism that prevents uniformly
exponential error decay for budget-constrained arm identification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy.special import logsumexp

from .bandit import log_bar
from .distributions import (
    ArmDistribution,
    Constant,
    TailInflated,
    _lower_support,
    _quad,
    _tail_quad,
    ground_truth,
)

__all__ = [
    "MomentPrior",
    "InadmissibleCutoffError",
    "v_emp",
    "empirical_cvar_dev_bound",
    "pareto_cvar_lower_bound",
    "truncated_cvar_bound",
    "truncated_cvar_validity",
    "mob_cvar_bound",
    "mob_cvar_threshold",
    "mob_mean_bound",
    "mob_mean_threshold",
    "c_p_constant",
    "var_magnitude_bound",
    "cvar_magnitude_bound",
    "empirical_mean_bound",
    "truncated_mean_bound",
    "truncated_mean_threshold",
    "bounded_cvar_bound",
    "AuxBounds",
    "aux_bounds",
    "SrTruncationBound",
    "sr_truncation_error_bound",
    "SrMedianBound",
    "sr_mob_error_bound",
    "TailPerturbation",
    "perturb_distribution",
    "minimal_admissible_cutoff",
]


class InadmissibleCutoffError(ValueError):
    """The requested tail-perturbation cutoff does not yield a distribution."""


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _beta(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 1.0 - alpha


@dataclass(frozen=True)
class MomentPrior:
    """Moment assumptions an algorithm or bound is allowed to use.

    ``moment_order`` is the order p of the controlled absolute moments,
    ``raw_bound`` dominates E|X|^p, ``centered_bound`` dominates
    E|X - E[X]|^p, and ``deviation`` is the gap or deviation scale the
    bound is evaluated at.
    """

    moment_order: float
    raw_bound: float
    centered_bound: float
    deviation: float

    def __post_init__(self) -> None:
        if not 1.0 < self.moment_order <= 2.0:
            raise ValueError("moment_order must lie in (1, 2]")
        # zero bounds describe the degenerate always-zero loss and keep the
        # vacuous-moments case expressible
        if self.raw_bound < 0:
            raise ValueError("raw_bound must be nonnegative")
        if self.centered_bound < 0:
            raise ValueError("centered_bound must be nonnegative")
        if not self.deviation > 0:
            raise ValueError("deviation must be positive")


def _ratio(num: float, den: float) -> float:
    """num / den with the 0/0 limit taken as 0 (vacuous-moment degeneracies)."""
    return 0.0 if num == 0.0 else num / den


def v_emp(prior: MomentPrior, alpha: float) -> float:
    """Centered moment bound for the conditional distribution beyond the VaR:
    2^(p-1) V / beta + 2^p B / beta."""
    beta = _beta(alpha)
    p = prior.moment_order
    return 2.0 ** (p - 1.0) * prior.centered_bound / beta + 2.0**p * prior.raw_bound / beta


def empirical_cvar_dev_bound(
    prior: MomentPrior, alpha: float, n: int, side: str, clamped: bool = True
) -> float:
    """Deviation bound for the order-statistic CVaR estimator at prior.deviation.

    The lower side is a polynomial term 180 Vemp / ((n beta)^(p-1) Delta^p)
    plus one exponential; the upper side carries a 360-weighted polynomial
    term, a second polynomial term and two exponentials.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    beta = _beta(alpha)
    p, b_raw, d = prior.moment_order, prior.raw_bound, prior.deviation
    vem = v_emp(prior, alpha)
    nb = n * beta
    poly = vem / (nb ** (p - 1.0) * d**p)
    if side == "lower":
        ratio = math.inf if b_raw == 0 else d * d * beta ** (2.0 / p) / b_raw ** (2.0 / p)
        expo = math.exp(-(nb / 8.0) * min(1.0, ratio))
        raw = 180.0 * poly + expo
        return _clamp01(raw) if clamped else raw
    if side == "upper":
        tail1 = math.exp(
            -(n * beta ** (1.0 + 2.0 / p) * d * d)
            / (8.0 * b_raw ** (2.0 / p) + 2.0 * d * (b_raw * beta) ** (1.0 / p))
        ) if b_raw > 0 else 0.0
        tail2 = math.exp(-nb / 8.0)
        extra = _ratio(72.0 * vem * beta, nb ** (p - 1.0) * b_raw)
        raw = 360.0 * poly + extra + tail1 + tail2
        return _clamp01(raw) if clamped else raw
    raise ValueError("side must be 'lower' or 'upper'")


def pareto_cvar_lower_bound(
    scale: float, shape: float, alpha: float, deviation: float, n: int, clamped: bool = True
) -> float:
    """Leading-order floor on P(upward CVaR deviation >= deviation) for a
    power-law loss: beta * scale^a / (n^(a-1) (cvar + deviation)^a).

    The omitted correction term vanishes faster than n^-(a-1).
    """
    if not shape > 1:
        raise ValueError("shape must be > 1")
    beta = _beta(alpha)
    var = scale * beta ** (-1.0 / shape)
    cvar = shape * var / (shape - 1.0)
    raw = beta * scale**shape / (n ** (shape - 1.0) * (cvar + deviation) ** shape)
    return _clamp01(raw) if clamped else raw


def truncated_cvar_bound(
    level: float, alpha: float, n: int, deviation: float, clamped: bool = True
) -> float:
    """Deviation bound 6 exp(-n beta Delta^2 / (176 b^2)) for the clipping CVaR estimator."""
    if not level > 0:
        raise ValueError("truncation level must be positive")
    beta = _beta(alpha)
    raw = 6.0 * math.exp(-n * beta * deviation * deviation / (176.0 * level * level))
    return _clamp01(raw) if clamped else raw


def truncated_cvar_validity(
    prior: MomentPrior, alpha: float, deviation: float, var_magnitude: float
) -> float:
    """Smallest clipping level at which the truncated-CVaR bound applies:
    max(|VaR|, (2B / (Delta beta))^(1/(p-1)))."""
    beta = _beta(alpha)
    p = prior.moment_order
    return max(
        abs(var_magnitude),
        (2.0 * prior.raw_bound / (deviation * beta)) ** (1.0 / (p - 1.0)),
    )


def mob_cvar_bound(n: int, bin_size: int, clamped: bool = True) -> float:
    """Deviation bound exp(-n / (8 N)) for the median of per-bin CVaR estimates."""
    if not 1 <= bin_size <= n:
        raise ValueError("need 1 <= bin_size <= n")
    raw = math.exp(-n / (8.0 * bin_size))
    return _clamp01(raw) if clamped else raw


def mob_cvar_threshold(prior: MomentPrior, alpha: float, deviation: float) -> float:
    """Minimum per-bin sample count N* for the median-of-CVaR bound to hold."""
    beta = _beta(alpha)
    p, b_raw = prior.moment_order, prior.raw_bound
    vem = v_emp(prior, alpha)
    poly = (
        4320.0 * vem / (beta ** (p - 1.0) * deviation**p)
        + _ratio(576.0 * vem * beta, beta ** (p - 1.0) * b_raw)
    ) ** (1.0 / (p - 1.0))
    mag = (b_raw / beta) ** (1.0 / p)
    chern = (math.log(24.0) / beta) * max(
        8.0, 8.0 * mag * mag / (deviation * deviation) + 2.0 * mag / deviation
    )
    return max(poly, chern)


def mob_mean_bound(n: int, bin_size: int, clamped: bool = True) -> float:
    """Deviation bound exp(-n / (8 N)) for the median of per-bin means."""
    return mob_cvar_bound(n, bin_size, clamped)


def mob_mean_threshold(moment_order: float, centered_bound: float, deviation: float) -> float:
    """Minimum bin size for the median-of-means bound: (144 V / Delta^p)^(1/(p-1))
    when p <= 2, and the C_p form (4 C_p V / Delta^p)^(1/min(p-1, p/2)) above."""
    p = moment_order
    if not p > 1:
        raise ValueError("moment_order must be > 1")
    if p <= 2.0:
        return (144.0 * centered_bound / deviation**p) ** (1.0 / (p - 1.0))
    c_p = c_p_constant(p)
    return (4.0 * c_p * centered_bound / deviation**p) ** (1.0 / min(p - 1.0, p / 2.0))


def c_p_constant(moment_order: float) -> float:
    """The moment constant (3 sqrt(2))^p p^(p/2) from the empirical-mean bound."""
    p = moment_order
    return (3.0 * math.sqrt(2.0)) ** p * p ** (p / 2.0)


def var_magnitude_bound(moment_order: float, raw_bound: float, alpha: float) -> float:
    """|VaR| <= (B / min(alpha, beta))^(1/p) for any loss with E|X|^p <= B."""
    beta = _beta(alpha)
    return (raw_bound / min(alpha, beta)) ** (1.0 / moment_order)


def cvar_magnitude_bound(moment_order: float, raw_bound: float, alpha: float) -> float:
    """CVaR <= (B / beta)^(1/p); the same expression also dominates E|X|."""
    beta = _beta(alpha)
    return (raw_bound / beta) ** (1.0 / moment_order)


def empirical_mean_bound(
    moment_order: float, centered_bound: float, n: int, deviation: float, clamped: bool = True
) -> float:
    """Two-sided deviation bound C_p V / (n^(p-1) Delta^p) for the sample mean;
    the exponent improves to n^(p/2) when p > 2."""
    p = moment_order
    expo = p - 1.0 if p <= 2.0 else p / 2.0
    raw = c_p_constant(p) * centered_bound / (n**expo * deviation**p)
    return _clamp01(raw) if clamped else raw


def truncated_mean_bound(n: int, q: float, deviation: float, clamped: bool = True) -> float:
    """Deviation bound 2 exp(-n^(1-q) Delta / 4) for the zeroing mean estimator
    run with truncation level n^q."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    raw = 2.0 * math.exp(-(n ** (1.0 - q)) * deviation / 4.0)
    return _clamp01(raw) if clamped else raw


def truncated_mean_threshold(
    moment_order: float, raw_bound: float, q: float, deviation: float
) -> float:
    """Smallest n past which the truncated-mean bound applies: (3B/Delta)^(1/(q min(p-1,1)))."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    expo = min(moment_order - 1.0, 1.0)
    return (3.0 * raw_bound / deviation) ** (1.0 / (q * expo))


def bounded_cvar_bound(
    support_lo: float,
    support_hi: float,
    alpha: float,
    n: int,
    deviation: float,
    clamped: bool = True,
) -> float:
    """Deviation bound 6 exp(-(1/11) n beta (Delta / (hi - lo))^2) for the
    empirical CVaR of a loss supported on [lo, hi]."""
    if not support_hi > support_lo:
        raise ValueError("support must have positive width")
    beta = _beta(alpha)
    width = support_hi - support_lo
    raw = 6.0 * math.exp(-n * beta * (deviation / width) ** 2 / 11.0)
    return _clamp01(raw) if clamped else raw


@dataclass(frozen=True)
class AuxBounds:
    """Bundle of the auxiliary constants and bounds derived from one prior."""

    c_p: float
    var_magnitude: float
    cvar_magnitude: float
    empirical_mean_bound: Callable[[int, float], float]
    truncated_mean_bound: Callable[[int, float, float], float]
    bounded_cvar_bound: Callable[[float, float, int, float], float]


def aux_bounds(prior: MomentPrior, alpha: float) -> AuxBounds:
    p, b_raw, v_cent = prior.moment_order, prior.raw_bound, prior.centered_bound
    return AuxBounds(
        c_p=c_p_constant(p),
        var_magnitude=var_magnitude_bound(p, b_raw, alpha),
        cvar_magnitude=cvar_magnitude_bound(p, b_raw, alpha),
        empirical_mean_bound=lambda n, d: empirical_mean_bound(p, v_cent, n, d),
        truncated_mean_bound=lambda n, q, d: truncated_mean_bound(n, q, d),
        bounded_cvar_bound=lambda lo, hi, n, d: bounded_cvar_bound(lo, hi, alpha, n, d),
    )


# ---------------------------------------------------------------------------
# whole-algorithm error bounds


def _check_qs(xi1: float, xi2: float, q_m: float, q_c: float, cvar_cap: float) -> None:
    if xi1 < 0 or xi2 < 0 or xi1 + xi2 <= 0:
        raise ValueError("weights must be nonnegative with a positive sum")
    if xi1 > 0 and not 0.0 < q_m < 1.0:
        raise ValueError("q_m must lie in (0, 1)")
    if xi2 > 0 and not 0.0 < q_c < cvar_cap:
        raise ValueError(f"q_c must lie in (0, {cvar_cap})")


@dataclass(frozen=True)
class SrTruncationBound:
    """Error-probability bound for successive rejects with truncation estimators."""

    bound: float
    log_bound: float
    n_star: float
    min_budget: float


def sr_truncation_error_bound(
    gaps: tuple[float, ...],
    prior: MomentPrior,
    alpha: float,
    xi1: float,
    xi2: float,
    q_m: float,
    q_c: float,
    budget: int,
    arm_count: int,
) -> SrTruncationBound:
    """Theorem-level bound for the truncation-based successive-rejects run.

    ``gaps`` are the ordered suboptimality gaps Delta[2] <= ... <= Delta[K].
    A weight of zero removes that objective's sum and validity terms
    entirely.  Valid for budgets above ``min_budget``.
    """
    _check_qs(xi1, xi2, q_m, q_c, 0.5)
    k = arm_count
    if len(gaps) != k - 1:
        raise ValueError(f"expected {k - 1} gaps for {k} arms")
    if any(a > b for a, b in zip(gaps, gaps[1:])):
        raise ValueError("gaps must be nondecreasing")
    if not gaps[0] > 0:
        raise ValueError("the smallest gap must be positive (identifiable instance)")
    if budget <= k:
        raise ValueError("budget must exceed the arm count")
    beta = _beta(alpha)
    p, b_raw = prior.moment_order, prior.raw_bound
    norm = log_bar(k)
    base = (budget - k) / norm
    logs: list[float] = []
    for idx, gap in enumerate(gaps, start=2):
        count = k + 1 - idx
        if xi1 > 0:
            expo = -(base ** (1.0 - q_m)) * gap / (16.0 * xi1 * idx ** (1.0 - q_m))
            logs.append(math.log(2.0 * count) + expo)
        if xi2 > 0:
            expo = (
                -(beta / (2464.0 * xi2 * xi2))
                * base ** (1.0 - 2.0 * q_c)
                * gap
                * gap
                / idx ** (1.0 - 2.0 * q_c)
            )
            logs.append(math.log(6.0 * count) + expo)
    log_bound = float(logsumexp(logs))
    thresholds = []
    if xi1 > 0:
        thresholds.append(
            (12.0 * xi1 * b_raw / gaps[0]) ** (1.0 / (q_m * min(p - 1.0, 1.0)))
        )
    if xi2 > 0:
        thresholds.append((8.0 * xi2 * b_raw / (beta * gaps[0])) ** (1.0 / (q_c * (p - 1.0))))
        thresholds.append((b_raw / min(alpha, beta)) ** (1.0 / (q_c * p)))
    n_star = max(thresholds)
    return SrTruncationBound(
        bound=_clamp01(math.exp(min(log_bound, 0.0))),
        log_bound=log_bound,
        n_star=n_star,
        min_budget=k + k * norm * n_star,
    )


@dataclass(frozen=True)
class SrMedianBound:
    """Error-probability bound for successive rejects with median-of-bins estimators."""

    bound: float
    log_bound: float
    min_budget: float


def sr_mob_error_bound(
    prior: MomentPrior,
    alpha: float,
    xi1: float,
    xi2: float,
    q_m: float,
    q_c: float,
    budget: int,
    arm_count: int,
    smallest_gap: float,
) -> SrMedianBound:
    """Theorem-level bound for the median-of-bins successive-rejects run.

    The bound itself is gap-free (a double sum of exp(-(1/8) n_k^(1-q))
    terms); the gap enters only through the sufficient budget threshold.
    """
    _check_qs(xi1, xi2, q_m, q_c, 1.0)
    k = arm_count
    if k < 2:
        raise ValueError("need at least two arms")
    if not smallest_gap > 0:
        raise ValueError("smallest_gap must be positive")
    if budget <= k:
        raise ValueError("budget must exceed the arm count")
    beta = _beta(alpha)
    p, b_raw, v_cent = prior.moment_order, prior.raw_bound, prior.centered_bound
    norm = log_bar(k)
    logs: list[float] = []
    for phase in range(1, k):
        base = (budget - k) / (norm * (k + 1 - phase))
        if xi1 > 0:
            logs.append(math.log(phase) - base ** (1.0 - q_m) / 8.0)
        if xi2 > 0:
            logs.append(math.log(phase) - base ** (1.0 - q_c) / 8.0)
    log_bound = float(logsumexp(logs))
    vem = v_emp(prior, alpha)
    thresholds = []
    if xi1 > 0:
        thresholds.append((576.0 * xi1 * v_cent / smallest_gap) ** (1.0 / q_m))
    if xi2 > 0:
        mag = cvar_magnitude_bound(p, b_raw, alpha)
        thresholds.append((8.0 * math.log(24.0) / beta) ** (1.0 / q_c))
        thresholds.append(
            (
                4320.0 * xi2**p * 4.0**p * vem / (beta ** (p - 1.0) * smallest_gap**p)
                + _ratio(576.0 * vem * beta, beta ** (p - 1.0) * b_raw)
            )
            ** (1.0 / (q_c * (p - 1.0)))
        )
        thresholds.append(
            (
                (8.0 * math.log(24.0) / beta)
                * (
                    128.0 * xi2 * xi2 * mag * mag / (smallest_gap * smallest_gap)
                    + 8.0 * xi2 * mag / smallest_gap
                )
            )
            ** (1.0 / q_c)
        )
    return SrMedianBound(
        bound=_clamp01(math.exp(min(log_bound, 0.0))),
        log_bound=log_bound,
        min_budget=k + k * norm * max(thresholds),
    )


# ---------------------------------------------------------------------------
# nearby heavy-tailed alternative (the impossibility mechanism)


@dataclass(frozen=True)
class TailPerturbation:
    """A tail-inflated alternative to a base distribution, with diagnostics."""

    distribution: TailInflated

    @property
    def base(self) -> ArmDistribution:
        return self.distribution.base

    @property
    def chi1(self) -> float:
        return self.distribution.chi1

    def kl_to_base(self) -> float:
        """KL(G, F) by quadrature of the base density over the two regions;
        the density ratio is chi1 below the cutoff and the tail scale above."""
        dist = self.distribution
        scale = dist.tail_scale
        mass_below = _quad(lambda x: float(dist.base.pdf(x)), _lower_support(dist.base), dist.cutoff)
        mass_above = _tail_quad(lambda x: float(dist.base.pdf(x)), dist.cutoff)
        return dist.chi1 * math.log(dist.chi1) * mass_below + scale * math.log(scale) * mass_above

    def kl_proof_bound(self) -> float:
        """Closed-form dominating expression b^(p-1/2) (p-1/2) log(b) sf(b)."""
        dist = self.distribution
        return (
            dist.tail_scale
            * (dist.index - 0.5)
            * math.log(dist.cutoff)
            * float(dist.base.sf(dist.cutoff))
        )

    def objective_value(self, alpha: float, xi1: float, xi2: float) -> float:
        """xi1 * mean + xi2 * CVaR of the perturbed distribution, by quadrature."""
        truth = ground_truth(self.distribution, alpha)
        return truth.objective(xi1, xi2)


def minimal_admissible_cutoff(base: ArmDistribution, index: float) -> float:
    """Smallest cutoff (up to 1e-6 relative) at which the tail reweighting is valid."""
    if isinstance(base, (Constant, TailInflated)):
        raise InadmissibleCutoffError("base must be a continuous family")

    def admissible(b: float) -> bool:
        cdf = float(base.cdf(b))
        if not 0.0 < cdf < 1.0 or b <= 1.0:
            return False
        scale = b ** (index - 0.5)
        chi1 = (1.0 - scale * float(base.sf(b))) / cdf
        return 0.0 < chi1 < 1.0

    lo, hi = 1.0, 2.0
    while not admissible(hi):
        lo, hi = hi, hi * 2.0
        if hi > 1e15:
            raise InadmissibleCutoffError(
                f"no admissible cutoff below 1e15 for index {index}"
            )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if admissible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def perturb_distribution(base: ArmDistribution, cutoff: float, index: float) -> TailPerturbation:
    """Build the tail-inflated alternative, or report the minimal valid cutoff."""
    try:
        dist = TailInflated(base, cutoff, index)
    except ValueError as exc:
        minimal = minimal_admissible_cutoff(base, index)
        raise InadmissibleCutoffError(
            f"cutoff {cutoff} inadmissible ({exc}); minimal admissible cutoff is about {minimal:.6g}"
        ) from exc
    return TailPerturbation(dist)
