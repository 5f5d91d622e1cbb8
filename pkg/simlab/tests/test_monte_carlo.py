from unittest.mock import patch

import pandas as pd
import pytest

from fusion.config import EstimationConfig
from fusion.reports import RESULT_COLUMNS
from simlab.enums import EstimatorName, ExecutorKind
from simlab.exceptions import SimulationError
from simlab.factories import SimScenarioFactory
from simlab.services.monte_carlo import (
    ESTIMATOR_RUNNERS,
    results_frame,
    run_monte_carlo,
    run_replication,
)


class TestRunReplication:
    """Test one replication of a scenario."""

    def setup_method(self):
        """Set up a small scenario with every estimator."""
        self.config = EstimationConfig()
        self.scenario = SimScenarioFactory(
            n=150, estimators=list(EstimatorName.values), seed=12
        )

    def test_one_row_per_estimator(self):
        """Test that every estimator reports on the same draw."""
        rows = run_replication(self.scenario, 0, self.config)

        assert [row["estimator"] for row in rows] == list(EstimatorName.values)
        assert all(row["replicate"] == 0 and row["seed"] == 12 for row in rows)
        assert set(rows[0]) == set(RESULT_COLUMNS)

    def test_every_estimator_has_a_runner(self):
        """Test that the runner table covers the estimator names."""
        assert set(ESTIMATOR_RUNNERS) == set(EstimatorName.values)

    def test_sampling_failure_gives_failure_rows(self):
        """Test that an invalid shape fails every estimator without raising."""
        scenario = self.scenario.replace(epsilon=4.5)

        rows = run_replication(scenario, 0, self.config)

        assert all(row["failed"] == 1 for row in rows)
        assert "Gamma shape" in rows[0]["error"]

    def test_estimator_failure_is_isolated(self):
        """Test that one failing estimator leaves the others intact."""
        failing = dict(ESTIMATOR_RUNNERS)
        failing[EstimatorName.ORACLE] = lambda *args: 1 / 0

        with patch.dict("simlab.services.monte_carlo.ESTIMATOR_RUNNERS", failing):
            rows = run_replication(self.scenario, 0, self.config)

        by_name = {row["estimator"]: row for row in rows}
        assert by_name["oracle"]["failed"] == 1
        assert by_name["oracle"]["estimate"] is None
        assert by_name["target_only"]["failed"] == 0


class TestRunMonteCarlo:
    """Test the Monte Carlo driver."""

    def setup_method(self):
        """Set up a fast two-estimator scenario."""
        self.config = EstimationConfig()
        self.scenario = SimScenarioFactory(n=100, replications=4, seed=21)

    def test_results_table(self):
        """Test the shape and ordering of the results table."""
        results = run_monte_carlo(self.scenario, workers=1, config=self.config)

        assert list(results.columns) == RESULT_COLUMNS
        assert len(results) == 8
        assert results["replicate"].tolist() == [0, 0, 1, 1, 2, 2, 3, 3]
        assert results["estimator"].tolist()[:2] == ["target_only", "eco_ate_all"]

    def test_worker_count_does_not_change_results(self):
        """Test that a thread pool reproduces the serial table."""
        serial = run_monte_carlo(self.scenario, workers=1, config=self.config)

        parallel = run_monte_carlo(
            self.scenario, workers=2, executor=ExecutorKind.THREAD, config=self.config
        )

        pd.testing.assert_frame_equal(serial, parallel)

    def test_scenario_weighting_overrides_config(self):
        """Test that a scenario's fusion weighting reaches the estimators."""
        scenario = self.scenario.replace(fusion_weighting="size", replications=1)

        with patch("simlab.services.monte_carlo.run_replication") as mock_replication:
            mock_replication.return_value = []
            run_monte_carlo(scenario, workers=1, config=self.config)

        config = mock_replication.call_args[0][2]
        assert config.fusion_weighting == "size"

    def test_invalid_replication_count(self):
        """Test that zero replications are rejected."""
        with pytest.raises(SimulationError):
            run_monte_carlo(self.scenario, replications=0, config=self.config)


class TestResultsFrame:
    """Test the canonical ordering of results rows."""

    def test_sorted_by_epsilon_replicate_and_estimator_order(self):
        """Test the ordering whatever order rows arrive in."""
        keys = {"seed": 1, "failed": 0}
        rows = [
            {"estimator": "naive", "epsilon": 1.0, "replicate": 0, **keys},
            {"estimator": "oracle", "epsilon": 0.0, "replicate": 1, **keys},
            {"estimator": "naive", "epsilon": 0.0, "replicate": 1, **keys},
        ]

        results = results_frame(rows, ["naive", "oracle"])

        assert results["epsilon"].tolist() == [0.0, 0.0, 1.0]
        assert results["estimator"].tolist() == ["naive", "oracle", "naive"]
        assert results["error"].tolist() == ["", "", ""]
