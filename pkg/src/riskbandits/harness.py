"""Monte Carlo experiment engine for error-probability estimation.

Seed discipline: the stream for (budget T, trial, arm) is keyed by
``derive_seed(derive_seed(master_seed, T, trial), arm)``, so results are
independent of execution order and of how trials are split across worker
processes.  Error counts aggregate by integer addition, which makes the
parallel and sequential paths byte-identical.
"""

from __future__ import annotations

import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from . import bounds as bnd
from .bandit import (
    BanditInstance,
    InfeasibleBudgetError,
    RiskObjective,
    SCHEDULE_KINDS,
    make_schedule,
    run_ra_gsr,
)
from .distributions import (
    ArmDistribution,
    ConfigError,
    Constant,
    Exponential,
    Lomax,
    Pareto,
    TailInflated,
    batch_draws,
    centered_moment,
    clipped_cvar,
    from_config,
    ground_truth,
    raw_moment,
    solve_mean_for_cvar,
)
from .estimators import EstimatorSpec, estimate_rows
from .seeding import derive_seed, philox_stream

__all__ = [
    "wilson_interval",
    "ErrorRateEstimate",
    "BudgetScaledSpec",
    "ExperimentConfig",
    "SweepResult",
    "run_sweep",
    "builtin_instances",
    "estimator_family",
    "default_configs",
    "specialized_truncation_level",
    "FRAGILITY_TRUE_PRIOR",
    "FRAGILITY_NOISY_PRIOR",
    "ConcentrationCheck",
    "validate_concentration",
    "oracle_prior",
    "CSV_COLUMNS",
    "sweep_rows",
    "write_csv",
    "parse_experiment_file",
]

DEFAULT_SEED = 1729
DEFAULT_TRIALS = 5000
PAPER_SCALE_TRIALS = 50000
DEFAULT_CI_LEVEL = 0.999

# draws generated per chunk while validating concentration bounds; fixed so
# that chunking never changes the sampled values
_CHUNK_DRAWS = 4_000_000


def wilson_interval(errors: int, trials: int, ci_level: float = DEFAULT_CI_LEVEL) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; well behaved near zero."""
    if trials < 1 or not 0 <= errors <= trials:
        raise ValueError("need 0 <= errors <= trials with trials >= 1")
    if not 0.0 < ci_level < 1.0:
        raise ValueError("ci_level must lie in (0, 1)")
    z = float(ndtri(0.5 + ci_level / 2.0))
    phat = errors / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class ErrorRateEstimate:
    """Monte Carlo error probability at one budget, with its confidence interval."""

    budget: int
    errors: int
    trials: int
    p_hat: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class BudgetScaledSpec:
    """An estimator whose truncation offset grows with the total budget.

    Resolves to a plain spec per budget: offset' = offset + T**budget_power.
    This is how noisy prior information is made robust, clipping at the
    specialized level plus a slowly growing term.
    """

    base: EstimatorSpec
    budget_power: float

    def __post_init__(self) -> None:
        if not 0.0 < self.budget_power < 1.0:
            raise ValueError("budget_power must lie in (0, 1)")

    def resolve(self, budget: int) -> EstimatorSpec:
        return replace(
            self.base, prior_offset=self.base.prior_offset + float(budget) ** self.budget_power
        )


def _resolve(spec, budget: int) -> EstimatorSpec | None:
    if isinstance(spec, BudgetScaledSpec):
        return spec.resolve(budget)
    return spec


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one error-probability sweep needs, seeds included."""

    instance: BanditInstance
    schedule_kind: str
    mean_spec: "EstimatorSpec | BudgetScaledSpec | None"
    cvar_spec: "EstimatorSpec | BudgetScaledSpec | None"
    budgets: tuple[int, ...]
    trials: int = DEFAULT_TRIALS
    master_seed: int = DEFAULT_SEED
    ci_level: float = DEFAULT_CI_LEVEL
    instance_name: str = "custom"
    estimator_label: str = "custom"

    def __post_init__(self) -> None:
        if self.schedule_kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule_kind must be one of {SCHEDULE_KINDS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.budgets:
            raise ValueError("budgets must be nonempty")
        if any(a >= b for a, b in zip(self.budgets, self.budgets[1:])):
            raise ValueError("budgets must be strictly ascending")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")
        if not self.instance.identifiable:
            raise ValueError("instance has a zero smallest gap; error probability is ill-defined")


def _count_block(
    instance: BanditInstance,
    schedule,
    mean_spec: EstimatorSpec | None,
    cvar_spec: EstimatorSpec | None,
    master_seed: int,
    budget: int,
    start: int,
    stop: int,
) -> int:
    optimal = instance.optimal_arm
    errors = 0
    for trial in range(start, stop):
        run_seed = derive_seed(master_seed, budget, trial)
        result = run_ra_gsr(instance, schedule, mean_spec, cvar_spec, run_seed)
        errors += result.selected != optimal
    return errors


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    estimates: tuple[ErrorRateEstimate, ...]
    skipped: tuple[tuple[int, str], ...]


def run_sweep(
    config: ExperimentConfig,
    workers: int = 1,
    progress: Callable[[str], None] | None = None,
) -> SweepResult:
    """Estimate the error probability at every budget in the config.

    Infeasible (budget, schedule) pairs are reported in ``skipped`` rather
    than aborting the sweep.  The worker count changes wall time only, never
    results.
    """
    estimates: list[ErrorRateEstimate] = []
    skipped: list[tuple[int, str]] = []
    k = len(config.instance.arms)
    for budget in config.budgets:
        try:
            schedule = make_schedule(config.schedule_kind, k, budget)
        except InfeasibleBudgetError as exc:
            skipped.append((budget, str(exc)))
            continue
        mean_spec = _resolve(config.mean_spec, budget)
        cvar_spec = _resolve(config.cvar_spec, budget)
        blocks = _trial_blocks(config.trials, workers)
        if workers <= 1 or len(blocks) == 1:
            errors = sum(
                _count_block(
                    config.instance, schedule, mean_spec, cvar_spec,
                    config.master_seed, budget, lo, hi,
                )
                for lo, hi in blocks
            )
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(
                        _count_block,
                        config.instance, schedule, mean_spec, cvar_spec,
                        config.master_seed, budget, lo, hi,
                    )
                    for lo, hi in blocks
                ]
                errors = sum(f.result() for f in futures)
        lo_ci, hi_ci = wilson_interval(errors, config.trials, config.ci_level)
        estimates.append(
            ErrorRateEstimate(budget, errors, config.trials, errors / config.trials, lo_ci, hi_ci)
        )
        if progress is not None:
            progress(
                f"{config.instance_name} {config.estimator_label} T={budget}: "
                f"{errors}/{config.trials} errors (p_hat={errors / config.trials:.4g})"
            )
    return SweepResult(config, tuple(estimates), tuple(skipped))


def _trial_blocks(trials: int, workers: int) -> list[tuple[int, int]]:
    if workers <= 1:
        return [(0, trials)]
    per = max(1, math.ceil(trials / (workers * 4)))
    return [(lo, min(lo + per, trials)) for lo in range(0, trials, per)]


# ---------------------------------------------------------------------------
# builtin instances and estimator families

_ALPHA = 0.95


def builtin_instances() -> dict[str, BanditInstance]:
    """The named experiment instances, ten arms each, CVaR level 0.95.

    Mean-targeted instances put one arm slightly below the rest; the
    CVaR-targeted ones match arms by CVaR value with means solved
    numerically.  The mixed instance has a light-tailed optimal arm among
    heavy-tailed decoys, which is the fragile case for clipping bias.
    """
    mean_obj = RiskObjective(_ALPHA, 1.0, 0.0)
    cvar_obj = RiskObjective(_ALPHA, 0.0, 1.0)
    exp_285 = solve_mean_for_cvar("exponential", 2.85, _ALPHA)
    exp_300 = solve_mean_for_cvar("exponential", 3.00, _ALPHA)
    exp_255 = solve_mean_for_cvar("exponential", 2.55, _ALPHA)
    lom2_255 = solve_mean_for_cvar("lomax", 2.55, _ALPHA, shape=2.0)
    lom2_300 = solve_mean_for_cvar("lomax", 3.00, _ALPHA, shape=2.0)
    lom275_255 = solve_mean_for_cvar("lomax", 2.55, _ALPHA, shape=2.75)
    return {
        "exponential-mean": BanditInstance(
            (Exponential(0.97),) + (Exponential(1.0),) * 9, mean_obj
        ),
        "exponential-cvar": BanditInstance((exp_285,) + (exp_300,) * 9, cvar_obj),
        "lomax-mean": BanditInstance((Lomax(0.9, 1.8),) + (Lomax(1.0, 1.8),) * 9, mean_obj),
        "lomax-cvar": BanditInstance((lom2_255,) + (lom2_300,) * 9, cvar_obj),
        "mixed-cvar": BanditInstance((exp_255,) + (exp_300,) * 4 + (lom2_300,) * 5, cvar_obj),
        "combination-reward": BanditInstance(
            (Lomax(0.85, 2.0),) + (Lomax(1.0, 2.75),) * 9, RiskObjective(_ALPHA, 0.9, 0.1)
        ),
        "combination-risk": BanditInstance(
            (lom275_255,) + (lom2_300,) * 9, RiskObjective(_ALPHA, 0.1, 0.9)
        ),
    }


# priors used by the specialized algorithms on the mixed instance: the first
# reflects valid moment assumptions, the second is the slightly perturbed
# version that breaks them
FRAGILITY_TRUE_PRIOR = {"moment_order": 1.9, "raw_bound": 0.057, "gap": 0.45}
FRAGILITY_NOISY_PRIOR = {"moment_order": 2.0, "raw_bound": 0.05, "gap": 0.6}


def specialized_truncation_level(
    moment_order: float, raw_bound: float, gap: float, alpha: float = _ALPHA
) -> float:
    """Clipping level (4B / (beta Delta))^(1/(p-1)) that a specialized
    algorithm derives from assumed moment bounds."""
    return (4.0 * raw_bound / ((1.0 - alpha) * gap)) ** (1.0 / (moment_order - 1.0))


def estimator_family(
    label: str, alpha: float = _ALPHA, q_mean: float = 0.3, q_cvar: float = 0.3
):
    """(mean_spec, cvar_spec) presets for the standard families.

    ``empirical``, ``truncated`` and ``median-of-bins`` grow their schedule
    with the per-arm sample count; ``specialized-true`` and
    ``specialized-noisy`` clip at a fixed level derived from (possibly
    wrong) moment priors; ``robust-noisy`` adds a T**0.3 term to the noisy
    level.
    """
    if label == "empirical":
        return (
            EstimatorSpec("mean", "empirical"),
            EstimatorSpec("cvar", "empirical", alpha=alpha),
        )
    if label == "truncated":
        return (
            EstimatorSpec("mean", "truncated", q=q_mean),
            EstimatorSpec("cvar", "truncated", q=q_cvar, alpha=alpha),
        )
    if label == "median-of-bins":
        return (
            EstimatorSpec("mean", "median_of_bins", q=q_mean),
            EstimatorSpec("cvar", "median_of_bins", q=q_cvar, alpha=alpha),
        )
    if label in ("specialized-true", "specialized-noisy", "robust-noisy"):
        prior = FRAGILITY_TRUE_PRIOR if label == "specialized-true" else FRAGILITY_NOISY_PRIOR
        level = specialized_truncation_level(
            prior["moment_order"], prior["raw_bound"], prior["gap"], alpha
        )
        cvar = EstimatorSpec("cvar", "truncated", q=None, prior_offset=level, alpha=alpha)
        if label == "robust-noisy":
            cvar = BudgetScaledSpec(cvar, 0.3)
        return (EstimatorSpec("mean", "truncated", q=None, prior_offset=level), cvar)
    raise ValueError(f"unknown estimator family '{label}'")


DEFAULT_BUDGETS: dict[str, tuple[int, ...]] = {
    "exponential-mean": (4000, 8000, 14000, 20000),
    "exponential-cvar": (8000, 16000, 32000, 48000),
    "lomax-mean": (2000, 5000, 10000, 20000),
    "lomax-cvar": (2000, 5000, 10000, 20000),
    "mixed-cvar": (1000, 2000, 4000, 8000),
    "combination-reward": (2000, 5000, 10000, 20000),
    "combination-risk": (2000, 5000, 10000, 20000),
}

DEFAULT_FAMILIES: dict[str, tuple[str, ...]] = {
    "mixed-cvar": ("specialized-true", "specialized-noisy", "robust-noisy"),
}
_STANDARD_FAMILIES = ("empirical", "truncated", "median-of-bins")


def default_configs(
    instance_name: str,
    trials: int = DEFAULT_TRIALS,
    budgets: Sequence[int] | None = None,
    master_seed: int = DEFAULT_SEED,
    schedule_kind: str = "sr",
) -> list[ExperimentConfig]:
    """One config per default estimator family for a builtin instance."""
    catalog = builtin_instances()
    if instance_name not in catalog:
        raise ConfigError(
            f"instance: unknown name '{instance_name}' (known: {', '.join(sorted(catalog))})"
        )
    instance = catalog[instance_name]
    grid = tuple(budgets) if budgets else DEFAULT_BUDGETS[instance_name]
    labels = DEFAULT_FAMILIES.get(instance_name, _STANDARD_FAMILIES)
    configs = []
    for label in labels:
        mean_spec, cvar_spec = estimator_family(label, instance.objective.alpha)
        configs.append(
            ExperimentConfig(
                instance=instance,
                schedule_kind=schedule_kind,
                mean_spec=mean_spec,
                cvar_spec=cvar_spec,
                budgets=grid,
                trials=trials,
                master_seed=master_seed,
                instance_name=instance_name,
                estimator_label=label,
            )
        )
    return configs


# ---------------------------------------------------------------------------
# concentration-bound validation

BOUND_SELECTORS = (
    "empirical_cvar_lower",
    "empirical_cvar_upper",
    "empirical_cvar_abs",
    "truncated_cvar",
    "mob_cvar",
    "empirical_mean",
    "truncated_mean",
    "mob_mean",
    "bounded_cvar",
    "pareto_cvar_floor",
)


@dataclass(frozen=True)
class ConcentrationCheck:
    """One grid point of a bound validation run."""

    n: int
    frequency: float
    ci_low: float
    ci_high: float
    bound: float
    applicable: bool
    passed: bool
    note: str = ""


def oracle_prior(dist: ArmDistribution, moment_order: float, deviation: float) -> bnd.MomentPrior:
    """Moment prior computed from the distribution itself by quadrature."""
    return bnd.MomentPrior(
        moment_order,
        raw_moment(dist, moment_order),
        centered_moment(dist, moment_order),
        deviation,
    )


def _support_floor(dist: ArmDistribution) -> float:
    if isinstance(dist, (Exponential, Lomax)):
        return 0.0
    if isinstance(dist, Pareto):
        return dist.scale
    if isinstance(dist, TailInflated):
        return _support_floor(dist.base)
    if isinstance(dist, Constant):
        return dist.value
    return -math.inf


def _deviation_frequencies(
    dist: ArmDistribution,
    points: "list[tuple[int, EstimatorSpec, Callable[[np.ndarray], np.ndarray]]]",
    batches: int,
    seed: int,
) -> list[int]:
    """Deviation-event counts for several (n, spec, event) points at once.

    One sample pool is drawn per chunk at the largest n and the points
    consume prefixes of it, so a grid costs one generation pass.  Chunk
    geometry is a fixed function of the grid, keeping counts reproducible.
    """
    n_max = max(n for n, _, _ in points)
    rows = max(1, _CHUNK_DRAWS // n_max)
    hits = [0] * len(points)
    done = 0
    chunk = 0
    while done < batches:
        take = min(rows, batches - done)
        rng = philox_stream(derive_seed(seed, n_max, chunk))
        pool = batch_draws(dist, rng, (take, n_max))
        for i, (n, spec, event) in enumerate(points):
            hits[i] += int(event(estimate_rows(spec, pool[:, :n])).sum())
        done += take
        chunk += 1
    return hits


def validate_concentration(
    dist: ArmDistribution,
    spec: EstimatorSpec,
    bound_name: str,
    n_grid: Sequence[int],
    deviation: float,
    batches: int,
    seed: int,
    prior: bnd.MomentPrior | None = None,
    ci_level: float = DEFAULT_CI_LEVEL,
) -> list[ConcentrationCheck]:
    """Empirical deviation frequencies against a named closed-form bound.

    For upper bounds a point passes when the Wilson upper end of the
    frequency interval stays below the clamped bound; the power-law floor
    selector passes when the raw frequency reaches half the floor (the
    documented allowance for its omitted correction term).  Points where a
    validity threshold fails are marked not applicable and skipped.
    """
    if bound_name not in BOUND_SELECTORS:
        raise ValueError(f"unknown bound '{bound_name}' (expected one of {BOUND_SELECTORS})")
    if prior is None and bound_name != "pareto_cvar_floor":
        raise ValueError(f"bound '{bound_name}' needs a moment prior")
    if prior is not None:
        prior = replace(prior, deviation=deviation)
    alpha = spec.alpha
    truth = ground_truth(dist, alpha) if alpha is not None else ground_truth(dist, 0.5)

    def two_sided(target):
        return lambda est: np.abs(est - target) >= deviation

    def upward(target):
        return lambda est: est >= target + deviation

    def downward(target):
        return lambda est: est <= target - deviation

    staged: list[tuple[int, float, bool, str, Callable]] = []
    for n in n_grid:
        n = int(n)
        applicable = True
        note = ""
        level = spec.truncation_level(n) if spec.kind == "truncated" else None
        bin_size = spec.bin_size(n) if spec.kind == "median_of_bins" else None
        target = truth.cvar_alpha if spec.target == "cvar" else truth.mean
        event = two_sided(target)

        if bound_name in ("empirical_cvar_lower", "empirical_cvar_upper", "empirical_cvar_abs"):
            if bound_name == "empirical_cvar_lower":
                bound = bnd.empirical_cvar_dev_bound(prior, alpha, n, "lower")
                event = downward(target)
            elif bound_name == "empirical_cvar_upper":
                bound = bnd.empirical_cvar_dev_bound(prior, alpha, n, "upper")
                event = upward(target)
            else:
                bound = min(
                    1.0,
                    bnd.empirical_cvar_dev_bound(prior, alpha, n, "lower")
                    + bnd.empirical_cvar_dev_bound(prior, alpha, n, "upper"),
                )
        elif bound_name == "truncated_cvar":
            threshold = bnd.truncated_cvar_validity(prior, alpha, deviation, truth.var_alpha)
            applicable = level > threshold
            note = f"level={level:.6g} threshold={threshold:.6g}"
            bound = bnd.truncated_cvar_bound(level, alpha, n, deviation)
        elif bound_name == "mob_cvar":
            threshold = bnd.mob_cvar_threshold(prior, alpha, deviation)
            applicable = bin_size >= threshold
            note = f"bin_size={bin_size} threshold={threshold:.6g}"
            bound = bnd.mob_cvar_bound(n, bin_size)
        elif bound_name == "empirical_mean":
            bound = bnd.empirical_mean_bound(
                prior.moment_order, prior.centered_bound, n, deviation
            )
        elif bound_name == "truncated_mean":
            if spec.q is None or spec.prior_offset:
                raise ValueError("truncated_mean validation needs a pure n**q schedule")
            threshold = bnd.truncated_mean_threshold(
                prior.moment_order, prior.raw_bound, spec.q, deviation
            )
            applicable = n > threshold
            note = f"threshold={threshold:.6g}"
            bound = bnd.truncated_mean_bound(n, spec.q, deviation)
        elif bound_name == "mob_mean":
            threshold = bnd.mob_mean_threshold(prior.moment_order, prior.centered_bound, deviation)
            applicable = bin_size >= threshold
            note = f"bin_size={bin_size} threshold={threshold:.6g}"
            bound = bnd.mob_mean_bound(n, bin_size)
        elif bound_name == "bounded_cvar":
            if spec.kind != "truncated" or spec.target != "cvar":
                raise ValueError("bounded_cvar validation needs a truncated cvar spec")
            target = clipped_cvar(dist, alpha, level)
            lo = max(-level, _support_floor(dist))
            bound = bnd.bounded_cvar_bound(lo, level, alpha, n, deviation)
            event = two_sided(target)
        else:  # pareto_cvar_floor
            if not isinstance(dist, Pareto):
                raise ValueError("pareto_cvar_floor applies to Pareto losses only")
            bound = bnd.pareto_cvar_lower_bound(dist.scale, dist.shape, alpha, deviation, n)
            event = upward(target)
        staged.append((n, bound, applicable, note, event))

    live = [(n, spec, event) for n, _, applicable, _, event in staged if applicable]
    counts = iter(_deviation_frequencies(dist, live, batches, seed) if live else [])
    out: list[ConcentrationCheck] = []
    for n, bound, applicable, note, _ in staged:
        if not applicable:
            out.append(
                ConcentrationCheck(n, math.nan, math.nan, math.nan, bound, False, False, note)
            )
            continue
        hits = next(counts)
        freq = hits / batches
        lo_ci, hi_ci = wilson_interval(hits, batches, ci_level)
        if bound_name == "pareto_cvar_floor":
            passed = freq >= 0.5 * bound
        else:
            passed = hi_ci <= bound
        out.append(ConcentrationCheck(n, freq, lo_ci, hi_ci, bound, True, passed, note))
    return out


# ---------------------------------------------------------------------------
# CSV interface

CSV_COLUMNS = (
    "instance",
    "schedule",
    "estimator",
    "q_m",
    "q_c",
    "T",
    "trials",
    "errors",
    "p_hat",
    "ci_low",
    "ci_high",
)


def _fmt(x: float) -> str:
    return repr(float(x))


def _spec_q(spec) -> str:
    if isinstance(spec, BudgetScaledSpec):
        spec = spec.base
    if spec is None or spec.kind == "empirical" or spec.q is None:
        return ""
    return _fmt(spec.q)


def sweep_rows(result: SweepResult) -> list[dict[str, str]]:
    """Flatten a sweep into CSV-ready rows, one per budget."""
    cfg = result.config
    rows = []
    for est in result.estimates:
        rows.append(
            {
                "instance": cfg.instance_name,
                "schedule": cfg.schedule_kind,
                "estimator": cfg.estimator_label,
                "q_m": _spec_q(cfg.mean_spec),
                "q_c": _spec_q(cfg.cvar_spec),
                "T": str(est.budget),
                "trials": str(est.trials),
                "errors": str(est.errors),
                "p_hat": _fmt(est.p_hat),
                "ci_low": _fmt(est.ci_low),
                "ci_high": _fmt(est.ci_high),
            }
        )
    return rows


def write_csv(path: str, rows: list[dict[str, str]]) -> None:
    """Write rows atomically (temp file + rename) in the documented schema."""
    text = ",".join(CSV_COLUMNS) + "\n"
    for row in rows:
        text += ",".join(row[col] for col in CSV_COLUMNS) + "\n"
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# experiment config files


def _need(data: dict, field: str, path: str):
    if field not in data:
        raise ConfigError(f"{path}.{field}: missing")
    return data[field]


def _build_spec(entry: dict, target: str, alpha: float, path: str):
    kind = _need(entry, "kind", path)
    if kind not in ("empirical", "truncated", "median_of_bins"):
        raise ConfigError(f"{path}.kind: unknown estimator kind '{kind}'")
    prefix = "q_mean" if target == "mean" else "q_cvar"
    offset_key = "mean_offset" if target == "mean" else "cvar_offset"
    power_key = "mean_budget_power" if target == "mean" else "cvar_budget_power"
    q = entry.get(prefix)
    offset = float(entry.get(offset_key, 0.0))
    power = entry.get(power_key)
    try:
        spec = EstimatorSpec(
            target,
            kind,
            q=None if q is None else float(q),
            prior_offset=offset,
            alpha=alpha if target == "cvar" else None,
        )
        if power is not None:
            return BudgetScaledSpec(spec, float(power))
        return spec
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_experiment_file(data: dict) -> list[ExperimentConfig]:
    """Parse a loaded YAML/JSON experiment config into one config per estimator.

    Errors carry the offending field path, e.g. ``arms[2].shape``.
    """
    if not isinstance(data, dict):
        raise ConfigError("config: expected a mapping at the top level")
    inst_entry = _need(data, "instance", "config")
    if isinstance(inst_entry, str):
        catalog = builtin_instances()
        if inst_entry not in catalog:
            raise ConfigError(
                f"config.instance: unknown name '{inst_entry}' (known: {', '.join(sorted(catalog))})"
            )
        instance = catalog[inst_entry]
        name = inst_entry
    else:
        if not isinstance(inst_entry, dict):
            raise ConfigError("config.instance: expected a builtin name or a mapping")
        obj = _need(inst_entry, "objective", "instance")
        for field in ("alpha", "xi1", "xi2"):
            _need(obj, field, "instance.objective")
        try:
            objective = RiskObjective(
                float(obj["alpha"]), float(obj["xi1"]), float(obj["xi2"])
            )
        except ValueError as exc:
            raise ConfigError(f"instance.objective: {exc}") from exc
        arm_entries = _need(inst_entry, "arms", "instance")
        if not isinstance(arm_entries, list) or len(arm_entries) < 2:
            raise ConfigError("instance.arms: need a list of at least two arms")
        arms = tuple(
            from_config(entry, path=f"instance.arms[{i}]") for i, entry in enumerate(arm_entries)
        )
        instance = BanditInstance(arms, objective)
        name = str(inst_entry.get("name", "custom"))
    schedule_kind = str(data.get("schedule", "sr"))
    trials = int(data.get("trials", DEFAULT_TRIALS))
    seed = int(data.get("seed", DEFAULT_SEED))
    ci_level = float(data.get("ci_level", DEFAULT_CI_LEVEL))
    budgets_entry = data.get("budgets")
    if budgets_entry is None:
        if name not in DEFAULT_BUDGETS:
            raise ConfigError("config.budgets: missing (required for custom instances)")
        budgets = DEFAULT_BUDGETS[name]
    else:
        if not isinstance(budgets_entry, list) or not budgets_entry:
            raise ConfigError("config.budgets: expected a nonempty list of integers")
        budgets = tuple(int(b) for b in budgets_entry)
    est_entries = data.get("estimators")
    configs: list[ExperimentConfig] = []
    if est_entries is None:
        labels = DEFAULT_FAMILIES.get(name, _STANDARD_FAMILIES)
        est_entries = [{"label": lab} for lab in labels]
        for entry in est_entries:
            mean_spec, cvar_spec = estimator_family(entry["label"], instance.objective.alpha)
            configs.append(
                ExperimentConfig(
                    instance, schedule_kind, mean_spec, cvar_spec, budgets,
                    trials, seed, ci_level, name, entry["label"],
                )
            )
        return configs
    if not isinstance(est_entries, list) or not est_entries:
        raise ConfigError("config.estimators: expected a nonempty list")
    for i, entry in enumerate(est_entries):
        path = f"estimators[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: expected a mapping")
        label = str(entry.get("label", entry.get("kind", f"estimator-{i}")))
        if set(entry) <= {"label"} or (
            "kind" not in entry and label in _STANDARD_FAMILIES + (
                "specialized-true", "specialized-noisy", "robust-noisy",
            )
        ):
            mean_spec, cvar_spec = estimator_family(label, instance.objective.alpha)
        else:
            mean_spec = _build_spec(entry, "mean", instance.objective.alpha, path)
            cvar_spec = _build_spec(entry, "cvar", instance.objective.alpha, path)
        try:
            configs.append(
                ExperimentConfig(
                    instance, schedule_kind, mean_spec, cvar_spec, budgets,
                    trials, seed, ci_level, name, label,
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return configs
