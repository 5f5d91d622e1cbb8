"""
Monte Carlo performance metrics of each estimator: bias², variance, coverage and
mean standard error, each with its own Monte Carlo standard error.
"""

import numpy as np
import pandas as pd

from simlab.exceptions import InsufficientRowsError


class McMetrics:
    """Performance of one estimator over the successful replications of a run.

    Parameters
    ----------
    estimator : str
        Estimator name
    replications : int
        Successful replications summarized
    failures : int
        Replications where the estimator failed
    values : dict
        ``bias2``, ``variance``, ``coverage`` and ``mean_se`` with their ``*_mc_se``
    """

    FIELDS = (
        "bias2",
        "bias2_mc_se",
        "variance",
        "variance_mc_se",
        "coverage",
        "coverage_mc_se",
        "mean_se",
        "mean_se_mc_se",
    )

    def __init__(self, estimator, replications, failures, values, epsilon=None):
        self.estimator = estimator
        self.replications = int(replications)
        self.failures = int(failures)
        self.epsilon = epsilon
        for name in self.FIELDS:
            setattr(self, name, float(values[name]))

    def to_dict(self):
        return {
            "estimator": self.estimator,
            "epsilon": self.epsilon,
            "replications": self.replications,
            "failures": self.failures,
            **{name: getattr(self, name) for name in self.FIELDS},
        }

    def __repr__(self):
        return (
            f"McMetrics({self.estimator!r}, bias2={self.bias2:.3g}, "
            f"variance={self.variance:.3g}, coverage={self.coverage:.3f})"
        )


def jackknife_variance_se(values):
    """Jackknife standard error of the sample variance; NaN below three values."""
    count = values.shape[0]
    if count < 3:
        return float("nan")
    mean = values.mean()
    squares = np.sum((values - mean) ** 2)
    # Leave-one-out sums of squares without refitting.
    leave_one_out = (squares - (values - mean) ** 2 * count / (count - 1)) / (count - 2)
    spread = np.sum((leave_one_out - leave_one_out.mean()) ** 2)
    return float(np.sqrt((count - 1) / count * spread))


def estimator_metrics(estimates, lower, upper, se, truth):
    """Metrics of one estimator from its successful replications.

    Values are sorted first so that the result does not depend on row order.

    Raises
    ------
    InsufficientRowsError
        With fewer than two replications
    """
    order = np.lexsort((se, upper, lower, estimates))
    estimates, lower, upper, se = estimates[order], lower[order], upper[order], se[order]
    count = estimates.shape[0]
    if count < 2:
        raise InsufficientRowsError(
            f"Need at least 2 successful replications, got {count}"
        )

    bias = estimates.mean() - truth
    spread = estimates.std(ddof=1)
    covered = ((lower <= truth) & (truth <= upper)).astype(float)
    coverage = covered.mean()
    return {
        "bias2": bias**2,
        "bias2_mc_se": 2.0 * abs(bias) * spread / np.sqrt(count),
        "variance": spread**2,
        "variance_mc_se": jackknife_variance_se(estimates),
        "coverage": coverage,
        "coverage_mc_se": np.sqrt(coverage * (1.0 - coverage) / count),
        "mean_se": se.mean(),
        "mean_se_mc_se": se.std(ddof=1) / np.sqrt(count),
    }


def summarize_metrics(results, truth):
    """McMetrics of every estimator in a results table.

    Parameters
    ----------
    results : pandas.DataFrame
        Results rows of one scenario (a single ε)
    truth : float
        True ATE

    Returns
    -------
    dict
        Estimator name to McMetrics, in order of first appearance

    Raises
    ------
    InsufficientRowsError
        If some estimator has fewer than two successful rows
    """
    if results.empty:
        raise InsufficientRowsError("The results table is empty")
    epsilons = results["epsilon"].dropna().unique()
    epsilon = float(epsilons[0]) if len(epsilons) == 1 else None
    metrics = {}
    for estimator, rows in results.groupby("estimator", sort=False):
        failed = rows["failed"].astype(bool)
        succeeded = rows[~failed]
        try:
            values = estimator_metrics(
                succeeded["estimate"].to_numpy(dtype=float),
                succeeded["ci_lo"].to_numpy(dtype=float),
                succeeded["ci_hi"].to_numpy(dtype=float),
                succeeded["se"].to_numpy(dtype=float),
                truth,
            )
        except InsufficientRowsError as exc:
            raise InsufficientRowsError(
                f"{estimator}: {exc.message}",
                details={"estimator": estimator, "failures": int(failed.sum())},
            ) from exc
        metrics[estimator] = McMetrics(
            estimator, len(succeeded), int(failed.sum()), values, epsilon
        )
    return metrics


def summarize_by_epsilon(results, truth):
    """Metrics table with one row per (ε, estimator) of a results table."""
    rows = []
    for epsilon, group in results.groupby("epsilon", sort=True):
        for metrics in summarize_metrics(group, truth).values():
            row = metrics.to_dict()
            row["epsilon"] = float(epsilon)
            rows.append(row)
    columns = ["epsilon", "estimator", "replications", "failures", *McMetrics.FIELDS]
    return pd.DataFrame(rows, columns=columns)
