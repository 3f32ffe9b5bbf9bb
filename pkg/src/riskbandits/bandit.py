"""Risk-aware generalized successive rejects over a fixed pull budget.

A run proceeds in K-1 phases driven by a nondecreasing pull schedule
n_1 <= ... <= n_{K-1}: in phase k every surviving arm is brought up to n_k
pulls, all surviving arms are re-estimated on their full n_k samples, and
the arm with the worst (largest) estimated objective is rejected.  The
classical successive-rejects sizing, sequential halving, and uniform
exploration are all instances of this schedule family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

from .distributions import ArmDistribution, GroundTruth, SampleStream, ground_truth
from .estimators import EstimatorSpec, estimate
from .seeding import derive_seed

__all__ = [
    "RiskObjective",
    "PhaseSchedule",
    "BanditInstance",
    "PhaseRecord",
    "RunResult",
    "InfeasibleBudgetError",
    "log_bar",
    "sr_schedule",
    "halving_schedule",
    "uniform_schedule",
    "make_schedule",
    "run_ra_gsr",
]

SCHEDULE_KINDS = ("sr", "halving", "uniform")


class InfeasibleBudgetError(ValueError):
    """The pull budget is too small to run the requested schedule."""


@dataclass(frozen=True)
class RiskObjective:
    """Linear mean/CVaR tradeoff: obj = xi1 * E[X] + xi2 * CVaR_alpha(X)."""

    alpha: float
    xi1: float
    xi2: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.xi1 < 0 or self.xi2 < 0:
            raise ValueError("weights must be nonnegative")
        if self.xi1 + self.xi2 <= 0:
            raise ValueError("at least one weight must be positive")

    def of(self, truth: GroundTruth) -> float:
        return truth.objective(self.xi1, self.xi2)


@dataclass(frozen=True)
class PhaseSchedule:
    """Cumulative per-arm pull counts n_1 <= ... <= n_{K-1}."""

    pulls: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.pulls:
            raise ValueError("schedule needs at least one phase")
        if any(int(n) != n or n < 1 for n in self.pulls):
            raise ValueError("pull counts must be positive integers")
        if any(a > b for a, b in zip(self.pulls, self.pulls[1:])):
            raise ValueError("pull counts must be nondecreasing")

    @property
    def arm_count(self) -> int:
        return len(self.pulls) + 1

    @property
    def budget_required(self) -> int:
        """Total pulls consumed: sum of n_1..n_{K-2} plus twice n_{K-1}."""
        return sum(self.pulls[:-1]) + 2 * self.pulls[-1]

    def check_budget(self, budget: int) -> None:
        if self.budget_required > budget:
            raise InfeasibleBudgetError(
                f"schedule needs {self.budget_required} pulls but budget is {budget}"
            )


def log_bar(arm_count: int) -> float:
    """The half-plus-harmonic normalizer 1/2 + sum_{i=2..K} 1/i."""
    if arm_count < 2:
        raise ValueError("need at least two arms")
    return 0.5 + sum(1.0 / i for i in range(2, arm_count + 1))


def sr_schedule(arm_count: int, budget: int) -> PhaseSchedule:
    """Classical successive-rejects sizing n_k = ceil((T-K) / ((K+1-k) log_bar(K))).

    The ceiling still respects the budget because the rounding slack across
    K-1 phases is at most K.
    """
    if budget <= arm_count:
        raise InfeasibleBudgetError(f"budget {budget} cannot fund K={arm_count} arms")
    norm = log_bar(arm_count)
    pulls = tuple(
        math.ceil((budget - arm_count) / (norm * (arm_count + 1 - k)))
        for k in range(1, arm_count)
    )
    schedule = PhaseSchedule(pulls)
    schedule.check_budget(budget)
    return schedule


def halving_schedule(arm_count: int, budget: int) -> PhaseSchedule:
    """Sequential halving expressed as repeated cumulative pull counts.

    Each of ceil(log2 K) rounds gives floor(T / (survivors * rounds)) fresh
    pulls to every surviving arm, then drops the worse half.
    """
    if budget < arm_count:
        raise InfeasibleBudgetError(f"budget {budget} cannot fund K={arm_count} arms")
    rounds = max(1, math.ceil(math.log2(arm_count)))
    pulls: list[int] = []
    surviving = arm_count
    cumulative = 0
    while surviving > 1:
        fresh = budget // (surviving * rounds)
        if fresh < 1:
            raise InfeasibleBudgetError(
                f"budget {budget} gives zero pulls per arm in a {surviving}-arm round"
            )
        cumulative += fresh
        nxt = math.ceil(surviving / 2)
        pulls.extend([cumulative] * (surviving - nxt))
        surviving = nxt
    schedule = PhaseSchedule(tuple(pulls))
    schedule.check_budget(budget)
    return schedule


def uniform_schedule(arm_count: int, budget: int) -> PhaseSchedule:
    """Uniform exploration: every phase at floor(T / K) pulls per arm."""
    if arm_count < 2:
        raise ValueError("need at least two arms")
    per_arm = budget // arm_count
    if per_arm < 1:
        raise InfeasibleBudgetError(f"budget {budget} cannot fund K={arm_count} arms")
    return PhaseSchedule((per_arm,) * (arm_count - 1))


def make_schedule(kind: str, arm_count: int, budget: int) -> PhaseSchedule:
    if kind == "sr":
        return sr_schedule(arm_count, budget)
    if kind == "halving":
        return halving_schedule(arm_count, budget)
    if kind == "uniform":
        return uniform_schedule(arm_count, budget)
    raise ValueError(f"unknown schedule kind '{kind}' (expected one of {SCHEDULE_KINDS})")


@dataclass(frozen=True)
class BanditInstance:
    """A tuple of arm distributions plus the objective that ranks them."""

    arms: tuple[ArmDistribution, ...]
    objective: RiskObjective

    def __post_init__(self) -> None:
        if len(self.arms) < 2:
            raise ValueError("an instance needs at least two arms")

    @cached_property
    def truths(self) -> tuple[GroundTruth, ...]:
        return tuple(ground_truth(arm, self.objective.alpha) for arm in self.arms)

    @cached_property
    def objectives(self) -> tuple[float, ...]:
        return tuple(self.objective.of(t) for t in self.truths)

    @cached_property
    def optimal_arm(self) -> int:
        return min(range(len(self.arms)), key=self.objectives.__getitem__)

    @cached_property
    def gaps(self) -> tuple[float, ...]:
        """Sorted suboptimality gaps Delta[2] <= ... <= Delta[K]."""
        ordered = sorted(self.objectives)
        return tuple(v - ordered[0] for v in ordered[1:])

    @property
    def identifiable(self) -> bool:
        return self.gaps[0] > 0.0


@dataclass(frozen=True)
class PhaseRecord:
    """One phase of a run: who survived, what they scored, who was rejected."""

    phase: int
    pulls: int
    survivors: tuple[int, ...]
    estimates: tuple[float, ...]
    rejected: int

    def to_line(self) -> str:
        scored = ",".join(f"{arm}:{est!r}" for arm, est in zip(self.survivors, self.estimates))
        return (
            f"phase={self.phase} pulls={self.pulls} "
            f"survivors={','.join(map(str, self.survivors))} "
            f"estimates={scored} rejected={self.rejected}"
        )


@dataclass(frozen=True)
class RunResult:
    selected: int
    total_pulls: int
    phases: tuple[PhaseRecord, ...]

    def audit_lines(self) -> list[str]:
        lines = [p.to_line() for p in self.phases]
        lines.append(f"selected={self.selected} total_pulls={self.total_pulls}")
        return lines


def run_ra_gsr(
    instance: BanditInstance,
    schedule: PhaseSchedule,
    mean_spec: EstimatorSpec | None,
    cvar_spec: EstimatorSpec | None,
    seed: int,
) -> RunResult:
    """One seeded run of risk-aware generalized successive rejects.

    Each arm draws from its own stream keyed by ``derive_seed(seed, arm)``,
    so the sample path of an arm does not depend on when other arms are
    rejected.  Estimates are recomputed from scratch on all n_k samples each
    phase because the estimator schedules depend on n_k.  Ties at rejection
    drop the largest arm index.
    """
    k_arms = len(instance.arms)
    if schedule.arm_count != k_arms:
        raise ValueError(f"schedule is for {schedule.arm_count} arms, instance has {k_arms}")
    obj = instance.objective
    if obj.xi1 > 0:
        if mean_spec is None or mean_spec.target != "mean":
            raise ValueError("a mean-targeted estimator spec is required when xi1 > 0")
    if obj.xi2 > 0:
        if cvar_spec is None or cvar_spec.target != "cvar":
            raise ValueError("a cvar-targeted estimator spec is required when xi2 > 0")
        if cvar_spec.alpha != obj.alpha:
            raise ValueError(
                f"estimator alpha {cvar_spec.alpha} must match objective alpha {obj.alpha}"
            )

    streams = [SampleStream(arm, derive_seed(seed, i)) for i, arm in enumerate(instance.arms)]
    survivors = list(range(k_arms))
    phases: list[PhaseRecord] = []
    total = 0
    previous = 0
    for phase, pulls in enumerate(schedule.pulls, start=1):
        total += (pulls - previous) * len(survivors)
        scores = []
        for arm in survivors:
            batch = streams[arm].take(pulls)
            value = 0.0
            if obj.xi1 > 0:
                value += obj.xi1 * estimate(mean_spec, batch, pulls)
            if obj.xi2 > 0:
                value += obj.xi2 * estimate(cvar_spec, batch, pulls)
            if math.isnan(value):
                raise ArithmeticError(f"estimate for arm {arm} is NaN in phase {phase}")
            scores.append(value)
        worst = max(range(len(survivors)), key=lambda i: (scores[i], survivors[i]))
        rejected = survivors[worst]
        phases.append(
            PhaseRecord(phase, pulls, tuple(survivors), tuple(scores), rejected)
        )
        survivors.pop(worst)
        previous = pulls
    return RunResult(survivors[0], total, tuple(phases))
