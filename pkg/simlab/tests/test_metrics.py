import numpy as np
import pandas as pd
import pytest

from fusion.reports import EstimateReport, failure_row
from simlab.exceptions import InsufficientRowsError
from simlab.services.metrics import (
    McMetrics,
    estimator_metrics,
    jackknife_variance_se,
    summarize_by_epsilon,
    summarize_metrics,
)
from simlab.services.monte_carlo import results_frame


def results_table(estimates, estimator="eco_ate_all", epsilon=0.5, se=0.1, truth=1.0):
    rows = [
        EstimateReport(estimator, value, se).to_row(epsilon, 7, replicate, truth)
        for replicate, value in enumerate(estimates)
    ]
    return results_frame(rows, [estimator])


class TestEstimatorMetrics:
    """Test the Monte Carlo metrics of one estimator."""

    def test_all_estimates_at_truth(self):
        """Test zero bias and variance with full coverage."""
        values = estimator_metrics(
            np.ones(5), np.full(5, 0.8), np.full(5, 1.2), np.full(5, 0.1), 1.0
        )

        assert values["bias2"] == 0.0
        assert values["variance"] == 0.0
        assert values["variance_mc_se"] == 0.0
        assert values["coverage"] == 1.0
        assert values["coverage_mc_se"] == 0.0
        assert values["mean_se"] == pytest.approx(0.1)

    def test_known_values(self):
        """Test bias², variance and coverage on a small table."""
        estimates = np.array([0.9, 1.1, 1.3, 1.5])
        lower, upper = estimates - 0.25, estimates + 0.25

        values = estimator_metrics(estimates, lower, upper, np.full(4, 0.1), 1.0)

        assert values["bias2"] == pytest.approx(0.2**2)
        assert values["variance"] == pytest.approx(np.var(estimates, ddof=1))
        assert values["coverage"] == pytest.approx(0.5)
        spread = np.std(estimates, ddof=1)
        assert values["bias2_mc_se"] == pytest.approx(2 * 0.2 * spread / 2.0)

    def test_row_order_is_irrelevant(self):
        """Test that permuting replications gives identical metrics."""
        rng = np.random.default_rng(4)
        estimates = rng.normal(1.0, 0.1, size=50)
        se = rng.uniform(0.05, 0.15, size=50)
        order = rng.permutation(50)

        first = estimator_metrics(estimates, estimates - se, estimates + se, se, 1.0)
        second = estimator_metrics(
            estimates[order],
            (estimates - se)[order],
            (estimates + se)[order],
            se[order],
            1.0,
        )

        assert first == second

    def test_single_replication(self):
        """Test that one replication is not enough."""
        with pytest.raises(InsufficientRowsError):
            estimator_metrics(np.ones(1), np.zeros(1), np.full(1, 2.0), np.ones(1), 1.0)

    def test_nominal_coverage(self):
        """Test coverage near 0.95 for normal estimates with 1.96σ half-widths."""
        estimates = np.random.default_rng(8).normal(1.0, 0.1, size=4000)

        values = estimator_metrics(
            estimates, estimates - 0.196, estimates + 0.196, np.full(4000, 0.1), 1.0
        )

        assert values["coverage"] == pytest.approx(0.95, abs=4 * values["coverage_mc_se"])


class TestJackknife:
    """Test the jackknife standard error of the variance."""

    def test_matches_explicit_leave_one_out(self):
        """Test the closed form against refitting without each value."""
        values = np.random.default_rng(2).normal(size=12)
        leave_one_out = np.array(
            [np.var(np.delete(values, index), ddof=1) for index in range(12)]
        )
        expected = np.sqrt(11 / 12 * np.sum((leave_one_out - leave_one_out.mean()) ** 2))

        assert jackknife_variance_se(values) == pytest.approx(expected)

    def test_too_few_values(self):
        """Test NaN below three values."""
        assert np.isnan(jackknife_variance_se(np.array([1.0, 2.0])))


class TestSummaries:
    """Test metrics over results tables."""

    def test_failures_are_counted(self):
        """Test that failed rows are excluded and counted."""
        results = results_table([0.9, 1.0, 1.1])
        failed = failure_row("eco_ate_all", "singular", 0.5, 7, 3)
        results = results_frame(results.to_dict("records") + [failed], ["eco_ate_all"])

        metrics = summarize_metrics(results, 1.0)["eco_ate_all"]

        assert isinstance(metrics, McMetrics)
        assert metrics.replications == 3
        assert metrics.failures == 1
        assert metrics.epsilon == 0.5
        assert metrics.bias2 == pytest.approx(0.0, abs=1e-20)

    def test_estimator_without_successes(self):
        """Test that an estimator with one success names itself in the error."""
        results = results_table([1.0], estimator="oracle")

        with pytest.raises(InsufficientRowsError) as error:
            summarize_metrics(results, 1.0)

        assert error.value.details["estimator"] == "oracle"

    def test_empty_table(self):
        """Test that an empty table has no metrics."""
        with pytest.raises(InsufficientRowsError):
            summarize_metrics(results_frame([], ["oracle"]), 1.0)

    def test_by_epsilon(self):
        """Test one row per epsilon and estimator."""
        results = pd.concat(
            [
                results_table([0.9, 1.1, 1.0], epsilon=0.0),
                results_table([1.2, 1.4, 1.3], epsilon=1.1),
            ],
            ignore_index=True,
        )

        summary = summarize_by_epsilon(results, 1.0)

        assert summary["epsilon"].tolist() == [0.0, 1.1]
        assert summary["estimator"].tolist() == ["eco_ate_all", "eco_ate_all"]
        assert summary.loc[1, "bias2"] == pytest.approx(0.09)
        assert summary["coverage"].between(0.0, 1.0).all()
