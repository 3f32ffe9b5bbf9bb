"""Point estimators for the mean and CVaR of a loss sample.

Three families: plain empirical averages, truncation-based estimators, and
median-of-bins estimators.  The two truncation semantics are deliberately
different: the CVaR estimator clips samples to [-b, b], while the mean
estimator zeroes samples with |x| > b.  ``estimate`` dispatches through an
:class:`EstimatorSpec`, growing the truncation level or bin size with the
per-arm sample count.

Order-statistic indices use a 1e-9 absolute guard so that ``n * beta`` that
is mathematically integral never straddles a floor/ceil boundary through
floating-point noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EstimatorSpec",
    "empirical_cvar",
    "truncated_cvar",
    "truncated_mean",
    "median_of_means",
    "median_of_cvars",
    "estimate",
]

_INDEX_GUARD = 1e-9


def _floor_count(x: float) -> int:
    return int(math.floor(x + _INDEX_GUARD))


def _ceil_count(x: float) -> int:
    return int(math.ceil(x - _INDEX_GUARD))


def _as_batch(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("samples must be a nonempty one-dimensional sequence")
    return x


def _check_alpha(alpha: float) -> float:
    if alpha is None or not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return 1.0 - alpha


def _lower_median(values: np.ndarray) -> float:
    k = values.size
    return float(np.partition(values, (k - 1) // 2)[(k - 1) // 2])


def _cvar_rows(x: np.ndarray, alpha: float) -> np.ndarray:
    """Empirical CVaR along the last axis; shared by the scalar and batch paths.

    Selection runs through one partition call per lane: the element landing
    at position n-j is exactly the j-th largest order statistic, and the
    unordered block above it holds the rest of the tail.  The scalar and
    batch entry points share this code, so their results are bit-identical.
    """
    beta = _check_alpha(alpha)
    n = x.shape[-1]
    nbeta = n * beta
    j = max(1, _ceil_count(nbeta))
    m = _floor_count(nbeta)
    if j >= n:
        top = x.min(axis=-1)
        block_sum = x.sum(axis=-1)
    else:
        part = np.partition(x, n - j, axis=-1)
        top = part[..., n - j]
        block_sum = part[..., n - j :].sum(axis=-1)
    if m == 0:
        return top + 0.0
    if m < j:
        block_sum = block_sum - top
    # when n*beta is integral (m == j) divide by the exact integer, not the
    # floating product, so hand-computable cases come out exact
    divisor = float(m) if m == j else nbeta
    return top + (block_sum - m * top) / divisor


def empirical_cvar(samples, alpha: float) -> float:
    """Order-statistic CVaR estimate at confidence level ``alpha``.

    With X_[1] >= ... >= X_[n] the decreasing order statistics and
    beta = 1 - alpha, this evaluates
    X_[ceil(n beta)] + (1 / (n beta)) * sum_{i<=floor(n beta)} (X_[i] - X_[ceil(n beta)]).
    """
    x = _as_batch(samples)
    return float(_cvar_rows(x[None, :], alpha)[0])


def truncated_cvar(samples, alpha: float, b: float) -> float:
    """Empirical CVaR of the samples clipped to [-b, b]."""
    if not b > 0:
        raise ValueError("truncation level b must be positive")
    return empirical_cvar(np.clip(_as_batch(samples), -b, b), alpha)


def truncated_mean(samples, b: float) -> float:
    """Mean with samples of magnitude above ``b`` zeroed; divisor stays n."""
    if not b > 0:
        raise ValueError("truncation level b must be positive")
    x = _as_batch(samples)
    return float(np.where(np.abs(x) <= b, x, 0.0).sum()) / x.size


def _bins(samples, bin_size: int) -> np.ndarray:
    x = _as_batch(samples)
    if bin_size < 1:
        raise ValueError("bin_size must be >= 1")
    k = x.size // bin_size
    if k < 1:
        raise ValueError(f"need at least one full bin: n={x.size} < bin_size={bin_size}")
    return x[: k * bin_size].reshape(k, bin_size)


def median_of_means(samples, bin_size: int) -> float:
    """Lower median of per-bin means over consecutive disjoint bins.

    Trailing samples that do not fill a bin are discarded; an even bin
    count uses the lower-middle order statistic so the estimate is always
    a realized bin value.
    """
    return _lower_median(_bins(samples, bin_size).mean(axis=1))

def median_of_cvars(samples, alpha: float, bin_size: int) -> float:
    """Lower median of per-bin empirical CVaR estimates."""
    groups = _bins(samples, bin_size)
    return _lower_median(_cvar_rows(groups, alpha))


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run for one target, plus its growth schedule.

    The effective truncation level is ``prior_offset + n**q`` and the
    effective bin size is ``max(1, floor(prior_offset + n**q))`` where n is
    the per-arm sample count of the current phase.  ``q=None`` freezes the
    schedule at ``prior_offset`` (the fully specialized variant).
    """

    target: str
    kind: str
    q: float | None = None
    prior_offset: float = 0.0
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.target not in ("mean", "cvar"):
            raise ValueError("target must be 'mean' or 'cvar'")
        if self.kind not in ("empirical", "truncated", "median_of_bins"):
            raise ValueError("kind must be 'empirical', 'truncated' or 'median_of_bins'")
        if self.prior_offset < 0:
            raise ValueError("prior_offset must be nonnegative")
        if self.target == "cvar":
            _check_alpha(self.alpha)
        if self.kind == "empirical":
            if self.q is not None or self.prior_offset:
                raise ValueError("empirical estimators take no schedule parameters")
            return
        if self.q is None:
            if not self.prior_offset > 0:
                raise ValueError("a schedule needs q, a positive prior_offset, or both")
            return
        hi = 0.5 if (self.kind == "truncated" and self.target == "cvar") else 1.0
        if not 0.0 < self.q < hi:
            raise ValueError(f"q must lie in (0, {hi}) for a {self.kind} {self.target} estimator")

    def truncation_level(self, n: int) -> float:
        return self.prior_offset + (float(n) ** self.q if self.q is not None else 0.0)

    def bin_size(self, n: int) -> int:
        return max(1, _floor_count(self.truncation_level(n)))


def estimate(spec: EstimatorSpec, samples, n: int | None = None) -> float:
    """Run the estimator described by ``spec`` on one batch.

    ``n`` is the per-arm pull count the schedule is evaluated on; it
    defaults to the batch size and must match it inside a bandit run.
    """
    x = _as_batch(samples)
    count = x.size if n is None else int(n)
    if spec.kind == "empirical":
        if spec.target == "mean":
            return float(x.mean())
        return empirical_cvar(x, spec.alpha)
    if spec.kind == "truncated":
        level = spec.truncation_level(count)
        if spec.target == "mean":
            return truncated_mean(x, level)
        return truncated_cvar(x, spec.alpha, level)
    size = spec.bin_size(count)
    if spec.target == "mean":
        return median_of_means(x, size)
    return median_of_cvars(x, spec.alpha, size)


# ---------------------------------------------------------------------------
# row-vectorized form (one estimate per row), used by the Monte Carlo harness


def estimate_rows(spec: EstimatorSpec, batches: np.ndarray) -> np.ndarray:
    """Vectorized ``estimate`` over a (batches, n) array; matches the scalar path."""
    x = np.asarray(batches, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("batches must be a nonempty two-dimensional array")
    n = x.shape[1]
    if spec.kind == "empirical":
        return x.mean(axis=1) if spec.target == "mean" else _cvar_rows(x, spec.alpha)
    if spec.kind == "truncated":
        level = spec.truncation_level(n)
        if spec.target == "mean":
            return np.where(np.abs(x) <= level, x, 0.0).sum(axis=1) / n
        return _cvar_rows(np.clip(x, -level, level), spec.alpha)
    size = spec.bin_size(n)
    k = n // size
    if k < 1:
        raise ValueError(f"need at least one full bin: n={n} < bin_size={size}")
    grouped = x[:, : k * size].reshape(x.shape[0], k, size)
    if spec.target == "mean":
        per_bin = grouped.mean(axis=2)
    else:
        per_bin = _cvar_rows(grouped, spec.alpha)
    return np.partition(per_bin, (k - 1) // 2, axis=1)[:, (k - 1) // 2]
