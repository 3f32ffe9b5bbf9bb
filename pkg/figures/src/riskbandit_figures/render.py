"""Render probability-of-error figures from experiment CSV files.

The input contract is the experiment engine's CSV schema (one row per
estimator/budget pair); this script only plots what is in the file and
never recomputes statistics.  Curves are drawn on a log-scaled error axis
with one series per estimator label; confidence bands appear only where
the interval is wide enough to be visible (width above 0.5% absolute).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# the experiment engine's documented CSV schema
REQUIRED_COLUMNS = (
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

CI_BAND_MIN_WIDTH = 0.005


class SchemaError(ValueError):
    """The CSV does not match the experiment schema; the message names the problem column(s)."""


@dataclass(frozen=True)
class FigureRecipe:
    """One figure: an instance's curves, grouped by estimator label."""

    name: str
    instance: str
    series: tuple[str, ...]
    title: str
    ci_bands: bool = True
    log_y: bool = True


RECIPES = {
    recipe.name: recipe
    for recipe in (
        FigureRecipe(
            "exponential-mean",
            "exponential-mean",
            ("empirical", "truncated", "median-of-bins"),
            "Exponential arms, mean objective",
        ),
        FigureRecipe(
            "exponential-cvar",
            "exponential-cvar",
            ("empirical", "truncated", "median-of-bins"),
            "Exponential arms, CVaR objective",
        ),
        FigureRecipe(
            "lomax-mean",
            "lomax-mean",
            ("empirical", "truncated", "median-of-bins"),
            "Lomax arms, mean objective",
        ),
        FigureRecipe(
            "lomax-cvar",
            "lomax-cvar",
            ("empirical", "truncated", "median-of-bins"),
            "Lomax arms, CVaR objective",
        ),
        FigureRecipe(
            "fragility",
            "mixed-cvar",
            ("specialized-true", "specialized-noisy", "robust-noisy"),
            "Mixed arms: fixed clipping levels vs the robust variant",
        ),
        FigureRecipe(
            "combination-reward",
            "combination-reward",
            ("empirical", "truncated", "median-of-bins"),
            "Lomax arms, 0.9*mean + 0.1*CVaR objective",
        ),
        FigureRecipe(
            "combination-risk",
            "combination-risk",
            ("empirical", "truncated", "median-of-bins"),
            "Lomax arms, 0.1*mean + 0.9*CVaR objective",
        ),
    )
}

_STYLES = ["o-", "s--", "d-.", "^:", "v-", "x--"]


@dataclass
class LoadedRows:
    rows: list[dict] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)


def load_rows(paths: list[str]) -> LoadedRows:
    """Read and type the CSV rows; schema problems name the missing columns."""
    loaded = LoadedRows()
    for path in paths:
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                raise SchemaError(f"{path}: empty file, no header row")
            missing = [col for col in REQUIRED_COLUMNS if col not in reader.fieldnames]
            if missing:
                raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
            count = 0
            for line_no, raw in enumerate(reader, start=2):
                try:
                    loaded.rows.append(
                        {
                            "instance": raw["instance"],
                            "estimator": raw["estimator"],
                            "T": int(raw["T"]),
                            "p_hat": float(raw["p_hat"]),
                            "ci_low": float(raw["ci_low"]),
                            "ci_high": float(raw["ci_high"]),
                        }
                    )
                except ValueError as exc:
                    raise SchemaError(f"{path}:{line_no}: bad numeric value ({exc})") from exc
                count += 1
            if count == 0:
                raise SchemaError(f"{path}: no data rows")
    return loaded


def render(recipe: FigureRecipe, loaded: LoadedRows, out_dir: str) -> str:
    """Draw one recipe to ``<out_dir>/<name>.png`` and return the path."""
    by_series: dict[str, list[dict]] = {label: [] for label in recipe.series}
    for row in loaded.rows:
        if row["instance"] == recipe.instance and row["estimator"] in by_series:
            by_series[row["estimator"]].append(row)
    absent = [label for label, rows in by_series.items() if not rows]
    if absent:
        raise SchemaError(
            f"recipe '{recipe.name}': no rows for series {', '.join(absent)} "
            f"(instance '{recipe.instance}')"
        )

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    for style, label in zip(_STYLES, recipe.series):
        rows = sorted(by_series[label], key=lambda r: r["T"])
        if recipe.log_y:
            kept = [r for r in rows if r["p_hat"] > 0.0]
            if len(kept) < len(rows):
                loaded.notices.append(
                    f"{recipe.name}/{label}: dropped {len(rows) - len(kept)} zero "
                    f"error-rate row(s) for the log axis"
                )
            rows = kept
        if not rows:
            raise SchemaError(
                f"recipe '{recipe.name}': series '{label}' has no positive rows to plot"
            )
        budgets = [r["T"] for r in rows]
        rates = [r["p_hat"] for r in rows]
        ax.plot(budgets, rates, style, label=label, markersize=4)
        if recipe.ci_bands:
            visible = [r for r in rows if r["ci_high"] - r["ci_low"] > CI_BAND_MIN_WIDTH]
            if visible:
                ax.fill_between(
                    [r["T"] for r in visible],
                    [max(r["ci_low"], 1e-12) for r in visible],
                    [r["ci_high"] for r in visible],
                    alpha=0.15,
                )
    if recipe.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("budget T")
    ax.set_ylabel("probability of error")
    ax.set_title(recipe.title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, f"{recipe.name}.png")
    fig.savefig(out_path, metadata={"Software": None})
    plt.close(fig)
    return out_path


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        description="Render probability-of-error figures from experiment CSVs."
    )
    parser.add_argument("csv_paths", nargs="+", help="experiment CSV files")
    parser.add_argument(
        "--recipe",
        default="all",
        help=f"recipe name or 'all' (known: {', '.join(sorted(RECIPES))})",
    )
    parser.add_argument("--out-dir", default="figures-out")
    parser.add_argument("--no-ci-bands", action="store_true")
    args = parser.parse_args(argv)

    if args.recipe != "all" and args.recipe not in RECIPES:
        parser.error(f"unknown recipe '{args.recipe}' (known: {', '.join(sorted(RECIPES))})")
    try:
        loaded = load_rows(args.csv_paths)
        names = sorted(RECIPES) if args.recipe == "all" else [args.recipe]
        instances = {row["instance"] for row in loaded.rows}
        rendered = []
        for name in names:
            recipe = RECIPES[name]
            if args.recipe == "all" and recipe.instance not in instances:
                continue
            if args.no_ci_bands:
                recipe = FigureRecipe(
                    recipe.name, recipe.instance, recipe.series, recipe.title, False, recipe.log_y
                )
            rendered.append(render(recipe, loaded, args.out_dir))
        if not rendered:
            print("no recipes matched the instances present in the CSVs", file=sys.stderr)
            return 1
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for notice in loaded.notices:
        print(f"notice: {notice}", file=sys.stderr)
    for path in rendered:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
