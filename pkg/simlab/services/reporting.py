"""
Rendering of Monte Carlo metrics: a plain-text table and an SVG figure with one
panel each for bias², variance and coverage against ε.
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

PANELS = (
    ("bias2", "Bias squared"),
    ("variance", "Variance"),
    ("coverage", "Coverage"),
)
NOMINAL_COVERAGE = 0.95


def format_metrics_table(summary):
    """Fixed-width text table of a ``summarize_by_epsilon`` frame."""
    columns = [
        "epsilon",
        "estimator",
        "replications",
        "failures",
        "bias2",
        "bias2_mc_se",
        "variance",
        "variance_mc_se",
        "coverage",
        "coverage_mc_se",
        "mean_se",
    ]
    return summary[columns].to_string(
        index=False,
        float_format=lambda value: f"{value:.6f}",
    )


def render_metrics_figure(summary, path):
    """Write the bias² / variance / coverage small multiples as SVG.

    Parameters
    ----------
    summary : pandas.DataFrame
        Output of ``summarize_by_epsilon``
    path : str or Path
        Destination ``.svg`` file

    Returns
    -------
    Path
        The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, axes = plt.subplots(1, len(PANELS), figsize=(15, 4.5))

    for ax, (column, title) in zip(axes, PANELS):
        for estimator, rows in summary.groupby("estimator", sort=False):
            rows = rows.sort_values("epsilon")
            ax.errorbar(
                rows["epsilon"],
                rows[column],
                yerr=rows[f"{column}_mc_se"].fillna(0.0),
                marker="o",
                markersize=4,
                capsize=2,
                label=estimator,
            )
        if column == "coverage":
            ax.axhline(NOMINAL_COVERAGE, color="grey", linestyle="--", linewidth=1)
        ax.set_xlabel("epsilon")
        ax.set_title(title)
        ax.grid(alpha=0.3)

    handles, labels = axes[0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower center", ncol=min(len(labels), 5), fontsize=8)
    fig.tight_layout(rect=(0, 0.12, 1, 1))
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info(f"Metrics figure written to {path}")
    return path
