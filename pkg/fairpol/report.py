"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Frontier summaries.

Key features:
- Read and validate frontier CSV files
- Seed median / min / max per epsilon
- Spearman trend of the constraint in epsilon
- Markdown tables via tabulate

Usage:
- Use `read_frontier()` then `summarize_frontier()` and `frontier_markdown()`.
"""

import math

import numpy as np
import pandas as pd
from scipy.stats import spearmanr
from tabulate import tabulate

from .errors import SchemaError
from .pipeline import FRONTIER_COLUMNS


def format_epsilon(epsilon):
    return "∞" if math.isinf(epsilon) else f"{epsilon:g}"


def read_frontier(path):
    """
    Read a frontier CSV.

    Raises:
        SchemaError: Wrong header, no rows or non-numeric values.
    """
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{path} is empty") from e
    except pd.errors.ParserError as e:
        raise SchemaError(f"cannot parse {path}: {e}") from e
    if list(frame.columns) != FRONTIER_COLUMNS:
        raise SchemaError(f"{path}: expected columns {FRONTIER_COLUMNS}, got {list(frame.columns)}")
    if frame.empty:
        raise SchemaError(f"{path} has no rows")
    required = [c for c in FRONTIER_COLUMNS if c != "constraint_true"]
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if numeric[required].isna().any().any():
        raise SchemaError(f"{path}: non-numeric or missing values")
    return numeric


def summarize_frontier(frame):
    """
    Seed median, min and max of utility and constraint per epsilon.

    Returns:
        pd.DataFrame: One row per epsilon, sorted.
    """
    grouped = frame.groupby("epsilon", sort=True)
    summary = pd.DataFrame({
        "runs": grouped["seed"].count(),
        "utility_median": grouped["utility"].median(),
        "utility_min": grouped["utility"].min(),
        "utility_max": grouped["utility"].max(),
        "utility_s0": grouped["utility_s0"].median(),
        "utility_s1": grouped["utility_s1"].median(),
        "constraint_median": grouped["constraint"].median(),
        "constraint_min": grouped["constraint"].min(),
        "constraint_max": grouped["constraint"].max(),
        "constraint_true_median": grouped["constraint_true"].median(),
    })
    return summary.reset_index()


def constraint_trend(frame, column="constraint"):
    """Spearman correlation between epsilon and the seed-median of column (nan if undefined)."""
    medians = frame.groupby("epsilon", sort=True)[column].median().dropna()
    if medians.size < 2 or medians.nunique() < 2:
        return float("nan")
    return float(spearmanr(medians.index.to_numpy(), medians.to_numpy()).correlation)


def frontier_markdown(summary):
    table = summary.copy()
    table["epsilon"] = [format_epsilon(e) for e in table["epsilon"]]
    return tabulate(table, headers="keys", tablefmt="pipe", showindex=False, floatfmt=".4g")


def baselines_markdown(frame):
    return tabulate(frame, headers="keys", tablefmt="pipe", showindex=False, floatfmt=".4g", missingval="")


def frontier_report(frame, baselines=None):
    """Markdown report: the summary table, the constraint trends and optional baselines."""
    lines = ["## Frontier", "", frontier_markdown(summarize_frontier(frame)), ""]
    lines.append(f"Spearman(epsilon, constraint) = {constraint_trend(frame):.3f}")
    if frame["constraint_true"].notna().any():
        lines.append(f"Spearman(epsilon, constraint_true) = {constraint_trend(frame, 'constraint_true'):.3f}")
    utility = frame.groupby("epsilon")["utility"].median()
    spread = (utility.max() - utility.min()) / abs(utility.mean()) if utility.mean() else np.nan
    lines.append(f"Relative utility spread across epsilon = {spread:.3%}")
    if baselines is not None:
        lines += ["", "## Baselines", "", baselines_markdown(baselines)]
    return "\n".join(lines) + "\n"
