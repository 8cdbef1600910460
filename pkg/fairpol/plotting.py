"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Static SVG charts.

Key features:
- Frontier chart: epsilon on the x-axis, seed-median utility and constraint
  with min-max bands
- Action histogram chart: recommended actions by group

Usage:
- Use `plot_frontier()` for a frontier CSV and `plot_histogram()` for a histogram CSV.
"""

import logging
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .report import format_epsilon, summarize_frontier

GROUP_COLORS = {0: "deepskyblue", 1: "tomato"}
METRIC_COLORS = {"utility": "forestgreen", "constraint": "orchid", "constraint_true": "gold"}


def _save_svg(fig, out_path):
    directory = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(directory, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "fairpol", "svg.fonttype": "path"}):
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_frontier(frame, out_path):
    """
    Render a frontier as an SVG.

    The x positions are the sorted epsilon values labelled as such (inf as
    the infinity sign); utility uses the left axis, constraint values the right.

    Args:
        frame (pd.DataFrame): Frontier rows.
        out_path (str): Destination SVG path.
    """
    summary = summarize_frontier(frame)
    x = np.arange(len(summary))

    fig, ax = plt.subplots(1, figsize=(8, 4.5))
    ax.plot(x, summary["utility_median"], marker="o", color=METRIC_COLORS["utility"], label="utility")
    ax.fill_between(x, summary["utility_min"], summary["utility_max"], color=METRIC_COLORS["utility"], alpha=0.2)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("utility")
    ax.set_xticks(x)
    ax.set_xticklabels([format_epsilon(e) for e in summary["epsilon"]])

    twin = ax.twinx()
    twin.plot(x, summary["constraint_median"], marker="s", color=METRIC_COLORS["constraint"], label="constraint")
    twin.fill_between(x, summary["constraint_min"], summary["constraint_max"],
                      color=METRIC_COLORS["constraint"], alpha=0.2)
    if summary["constraint_true_median"].notna().any():
        twin.plot(x, summary["constraint_true_median"], marker="^", linestyle="--",
                  color=METRIC_COLORS["constraint_true"], label="constraint (true)")
    twin.set_ylabel("constraint")

    handles = ax.get_legend_handles_labels()[0] + twin.get_legend_handles_labels()[0]
    ax.legend(handles=handles, loc="upper left")
    fig.tight_layout()
    _save_svg(fig, out_path)
    logging.info(f"Frontier chart with {len(summary)} epsilon values saved to {out_path}")


def plot_histogram(hist, out_path):
    """
    Render an action histogram (bin_lo, bin_hi, count_s0, count_s1) as an SVG.
    """
    fig, ax = plt.subplots(1, figsize=(6, 4))
    widths = (hist["bin_hi"] - hist["bin_lo"]).to_numpy()
    for grp, offset in ((0, 0.0), (1, 0.5)):
        ax.bar(hist["bin_lo"] + offset * widths, hist[f"count_s{grp}"], width=0.5 * widths, align="edge",
               color=GROUP_COLORS[grp], label=f"s={grp}")
    ax.set_xlabel("recommended action")
    ax.set_ylabel("count")
    ax.legend(loc="upper right")
    fig.tight_layout()
    _save_svg(fig, out_path)
    logging.info(f"Action histogram saved to {out_path}")
