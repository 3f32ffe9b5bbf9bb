"""Figure rendering for risk-aware bandit experiment CSVs."""

from .render import RECIPES, FigureRecipe, LoadedRows, SchemaError, load_rows, render

__all__ = ["RECIPES", "FigureRecipe", "LoadedRows", "SchemaError", "load_rows", "render"]
