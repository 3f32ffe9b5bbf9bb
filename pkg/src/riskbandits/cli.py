"""Command-line surface: experiments, bound tables, and validation runs.

Every subcommand is deterministic given its flags; the seed defaults to the
documented constant 1729 rather than wall-clock time, so repeated
invocations produce byte-identical output files.
"""

from __future__ import annotations

import sys

import click
import yaml

from . import bounds as bnd
from .distributions import ConfigError, QuadratureError, from_config
from .estimators import EstimatorSpec
from .harness import (
    BOUND_SELECTORS,
    DEFAULT_CI_LEVEL,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    PAPER_SCALE_TRIALS,
    builtin_instances,
    default_configs,
    oracle_prior,
    parse_experiment_file,
    run_sweep,
    sweep_rows,
    validate_concentration,
    write_csv,
)

_FAIL = click.ClickException


def _parse_inline(text: str, label: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise _FAIL(f"{label}: not valid YAML/JSON ({exc})")
    if not isinstance(data, dict):
        raise _FAIL(f"{label}: expected a mapping")
    return data


def _ints(text: str, label: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise _FAIL(f"{label}: expected comma-separated integers")
    if not values:
        raise _FAIL(f"{label}: empty list")
    return values


@click.group()
def main() -> None:
    """Risk-aware fixed-budget best-arm identification toolkit."""


@main.command("list-instances")
def list_instances() -> None:
    """Print the builtin instances with their ground-truth objectives."""
    for name, instance in builtin_instances().items():
        objs = instance.objectives
        gap = instance.gaps[0]
        click.echo(
            f"{name}: K={len(instance.arms)} alpha={instance.objective.alpha} "
            f"xi=({instance.objective.xi1},{instance.objective.xi2}) "
            f"optimal_obj={min(objs):.6g} gap={gap:.6g}"
        )


@main.command("run-experiment")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--instance", "instance_name", type=str, default=None, help="Builtin instance name.")
@click.option("--trials", type=int, default=None, help=f"Trials per budget (default {DEFAULT_TRIALS}).")
@click.option("--budgets", type=str, default=None, help="Comma-separated budget grid.")
@click.option("--schedule", type=click.Choice(["sr", "halving", "uniform"]), default="sr")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@click.option("--paper-scale", is_flag=True, help=f"Use {PAPER_SCALE_TRIALS} trials per budget.")
def run_experiment(config_path, instance_name, trials, budgets, schedule, seed, workers, out_path, paper_scale):
    """Run error-probability sweeps and write one CSV row per (estimator, T)."""
    if (config_path is None) == (instance_name is None):
        raise _FAIL("provide exactly one of --config or --instance")
    if paper_scale:
        trials = PAPER_SCALE_TRIALS
    try:
        if config_path is not None:
            with open(config_path) as handle:
                data = yaml.safe_load(handle)
            if trials is not None:
                data = dict(data or {}, trials=trials)
            if budgets is not None:
                data = dict(data, budgets=list(_ints(budgets, "--budgets")))
            configs = parse_experiment_file(data)
        else:
            configs = default_configs(
                instance_name,
                trials=trials or DEFAULT_TRIALS,
                budgets=_ints(budgets, "--budgets") if budgets else None,
                master_seed=seed,
                schedule_kind=schedule,
            )
    except (ConfigError, ValueError) as exc:
        raise _FAIL(str(exc))
    rows = []
    for config in configs:
        result = run_sweep(config, workers=workers, progress=click.echo)
        for budget, reason in result.skipped:
            click.echo(f"skipped T={budget}: {reason}")
        rows.extend(sweep_rows(result))
    write_csv(out_path, rows)
    click.echo(f"wrote {len(rows)} rows to {out_path}")


@main.command("compute-bounds")
@click.option("--moment-order", "-p", type=float, required=True)
@click.option("--raw-bound", "-B", type=float, required=True)
@click.option("--centered-bound", "-V", type=float, required=True)
@click.option("--delta", type=float, required=True, help="Deviation or smallest gap.")
@click.option("--alpha", type=float, default=0.95, show_default=True)
@click.option("--n", type=int, default=10000, show_default=True, help="Sample count per arm.")
@click.option("--q-mean", type=float, default=0.3, show_default=True)
@click.option("--q-cvar", type=float, default=0.3, show_default=True)
@click.option("--arms", type=int, default=10, show_default=True)
@click.option("--budget", "-T", type=int, default=10000, show_default=True)
@click.option("--xi1", type=float, default=0.0, show_default=True)
@click.option("--xi2", type=float, default=1.0, show_default=True)
def compute_bounds(moment_order, raw_bound, centered_bound, delta, alpha, n, q_mean, q_cvar, arms, budget, xi1, xi2):
    """Print every bound and validity threshold as CSV (name,value,threshold)."""
    try:
        prior = bnd.MomentPrior(moment_order, raw_bound, centered_bound, delta)
    except ValueError as exc:
        raise _FAIL(str(exc))
    level = float(n) ** q_cvar
    bin_cvar = max(1, int(float(n) ** q_cvar))
    bin_mean = max(1, int(float(n) ** q_mean))
    var_mag = bnd.var_magnitude_bound(moment_order, raw_bound, alpha)
    rows = [
        ("v_emp", bnd.v_emp(prior, alpha), ""),
        ("c_p", bnd.c_p_constant(moment_order), ""),
        ("var_magnitude", var_mag, ""),
        ("cvar_magnitude", bnd.cvar_magnitude_bound(moment_order, raw_bound, alpha), ""),
        ("empirical_cvar_lower", bnd.empirical_cvar_dev_bound(prior, alpha, n, "lower"), ""),
        ("empirical_cvar_upper", bnd.empirical_cvar_dev_bound(prior, alpha, n, "upper"), ""),
        (
            "truncated_cvar",
            bnd.truncated_cvar_bound(level, alpha, n, delta),
            bnd.truncated_cvar_validity(prior, alpha, delta, var_mag),
        ),
        ("mob_cvar", bnd.mob_cvar_bound(n, bin_cvar), bnd.mob_cvar_threshold(prior, alpha, delta)),
        ("empirical_mean", bnd.empirical_mean_bound(moment_order, centered_bound, n, delta), ""),
        (
            "truncated_mean",
            bnd.truncated_mean_bound(n, q_mean, delta),
            bnd.truncated_mean_threshold(moment_order, raw_bound, q_mean, delta),
        ),
        ("mob_mean", bnd.mob_mean_bound(n, bin_mean), bnd.mob_mean_threshold(moment_order, centered_bound, delta)),
    ]
    if xi1 + xi2 > 0:
        try:
            gaps = (delta,) * (arms - 1)
            tr = bnd.sr_truncation_error_bound(
                gaps, prior, alpha, xi1, xi2, q_mean, min(q_cvar, 0.499), budget, arms
            )
            rows.append(("sr_truncation", tr.bound, tr.min_budget))
            mob = bnd.sr_mob_error_bound(prior, alpha, xi1, xi2, q_mean, q_cvar, budget, arms, delta)
            rows.append(("sr_median_of_bins", mob.bound, mob.min_budget))
        except ValueError as exc:
            raise _FAIL(str(exc))
    click.echo("name,value,validity_threshold")
    for name, value, threshold in rows:
        thr = "" if threshold == "" else repr(float(threshold))
        click.echo(f"{name},{value!r},{thr}")


@main.command("validate-concentration")
@click.option("--dist", "dist_text", type=str, required=True, help="Inline YAML, e.g. '{kind: exponential, mean: 1}'.")
@click.option("--estimator", type=click.Choice(["empirical", "truncated", "median_of_bins"]), required=True)
@click.option("--target", type=click.Choice(["mean", "cvar"]), required=True)
@click.option("--bound", type=click.Choice(list(BOUND_SELECTORS)), required=True)
@click.option("--n-grid", type=str, required=True, help="Comma-separated sample counts.")
@click.option("--delta", type=float, required=True)
@click.option("--batches", type=int, default=100000, show_default=True)
@click.option("--alpha", type=float, default=0.95, show_default=True)
@click.option("--q", type=float, default=None)
@click.option("--offset", type=float, default=0.0, show_default=True)
@click.option("--moment-order", "-p", type=float, default=None, help="Prior order; oracle moments via quadrature.")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
def validate_concentration_cmd(dist_text, estimator, target, bound, n_grid, delta, batches, alpha, q, offset, moment_order, seed):
    """Compare empirical deviation frequencies against a closed-form bound."""
    try:
        dist = from_config(_parse_inline(dist_text, "--dist"), path="dist")
        spec = EstimatorSpec(
            target,
            estimator,
            q=q,
            prior_offset=offset,
            alpha=alpha if target == "cvar" else None,
        )
        prior = None
        if moment_order is not None:
            prior = oracle_prior(dist, moment_order, delta)
        checks = validate_concentration(
            dist, spec, bound, _ints(n_grid, "--n-grid"), delta, batches, seed, prior
        )
    except (ConfigError, QuadratureError, ValueError) as exc:
        raise _FAIL(str(exc))
    click.echo("n,frequency,ci_low,ci_high,bound,applicable,passed,note")
    failed = False
    for c in checks:
        click.echo(
            f"{c.n},{c.frequency!r},{c.ci_low!r},{c.ci_high!r},{c.bound!r},"
            f"{c.applicable},{c.passed},{c.note}"
        )
        failed = failed or (c.applicable and not c.passed)
    if failed:
        raise _FAIL("at least one applicable grid point violated its bound")


@main.command("demo-lower-bound")
@click.option("--base", "base_text", type=str, default="{kind: pareto, scale: 1.0, shape: 1.5}", show_default=True)
@click.option("--cutoffs", type=str, default="10,100,1000", show_default=True)
@click.option("--index", type=float, default=None, help="Tail index; defaults to the base shape.")
@click.option("--alpha", type=float, default=0.95, show_default=True)
@click.option("--xi1", type=float, default=0.0, show_default=True)
@click.option("--xi2", type=float, default=1.0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def demo_lower_bound(base_text, cutoffs, index, alpha, xi1, xi2, out_path):
    """Tabulate the nearby heavy-tailed alternative: KL shrinks, objective blows up."""
    try:
        base = from_config(_parse_inline(base_text, "--base"), path="base")
    except ConfigError as exc:
        raise _FAIL(str(exc))
    if index is None:
        index = getattr(base, "shape", None)
        if index is None:
            raise _FAIL("--index is required when the base has no shape parameter")
    lines = ["cutoff,admissible,chi1,kl,kl_proof_bound,objective,note"]
    for cutoff in _ints(cutoffs, "--cutoffs"):
        try:
            pert = bnd.perturb_distribution(base, float(cutoff), float(index))
        except bnd.InadmissibleCutoffError as exc:
            lines.append(f"{cutoff},False,,,,,{exc}")
            continue
        try:
            kl = pert.kl_to_base()
            obj = pert.objective_value(alpha, xi1, xi2)
        except QuadratureError as exc:
            raise _FAIL(str(exc))
        lines.append(
            f"{cutoff},True,{pert.chi1!r},{kl!r},{pert.kl_proof_bound()!r},{obj!r},"
        )
    text = "\n".join(lines) + "\n"
    if out_path is None:
        click.echo(text, nl=False)
    else:
        with open(out_path, "w") as handle:
            handle.write(text)
        click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    sys.exit(main())
