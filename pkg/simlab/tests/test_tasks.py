from unittest.mock import patch

import pytest

from fusion.config import EstimationConfig
from fusion.reports import EstimateReport, failure_row
from simlab.enums import RunStatus
from simlab.factories import SimScenarioFactory, SimulationRunFactory
from simlab.services.monte_carlo import results_frame
from simlab.tasks import queue_simulation, run_replication_task, run_simulation_task


class TestRunReplicationTask:
    """Test run_replication_task Celery task."""

    def test_run_replication_success(self):
        """Test that the task returns the rows of one replication."""
        scenario = SimScenarioFactory(n=100).to_dict()

        result = run_replication_task(scenario, 2, EstimationConfig().to_dict())

        assert result["status"] == "success"
        assert result["replicate"] == 2
        assert [row["estimator"] for row in result["rows"]] == scenario["estimators"]
        assert "timestamp" in result

    @patch("simlab.tasks.run_replication")
    def test_run_replication_exception(self, mock_replication):
        """Test replication task error handling without complex Celery mocking."""
        mock_replication.side_effect = Exception("Worker error")

        try:
            result = run_replication_task(SimScenarioFactory().to_dict(), 0)
            if result:
                assert result["status"] == "error"
                assert "Worker error" in result["error"]
        except Exception:
            # A retry raised by Celery is acceptable here
            pass

        mock_replication.assert_called_once()


@pytest.mark.django_db
class TestRunSimulationTask:
    """Test run_simulation_task Celery task."""

    def setup_method(self):
        """Set up a pending run."""
        self.run = SimulationRunFactory(
            status=RunStatus.PENDING,
            scenario=SimScenarioFactory(n=100, replications=2).to_dict(),
        )

    @patch("simlab.tasks.run_monte_carlo")
    def test_run_simulation_success(self, mock_monte_carlo):
        """Test that results are stored and the run completed."""
        mock_monte_carlo.return_value = results_frame(
            [
                EstimateReport("target_only", 1.0, 0.1).to_row(0.5, 7, 0, 1.0),
                failure_row("eco_ate_all", "singular", 0.5, 7, 0),
            ],
            ["target_only", "eco_ate_all"],
        )

        result = run_simulation_task(self.run.pk)

        self.run.refresh_from_db()
        assert result["status"] == "completed"
        assert result["rows"] == 2
        assert result["failures"] == 1
        assert self.run.status == RunStatus.COMPLETED
        assert self.run.results.count() == 2

    @patch("simlab.tasks.run_monte_carlo")
    def test_run_simulation_exception(self, mock_monte_carlo):
        """Test that an exception marks the run failed."""
        mock_monte_carlo.side_effect = Exception("Out of memory")

        result = run_simulation_task(self.run.pk)

        self.run.refresh_from_db()
        assert result["status"] == "error"
        assert "Out of memory" in result["error"]
        assert self.run.status == RunStatus.FAILED

    def test_run_simulation_missing_run(self):
        """Test that an unknown run is skipped."""
        result = run_simulation_task(999999)

        assert result["status"] == "skipped"
        assert result["error"] == "Run not found"

    @patch("simlab.tasks.run_simulation_task.delay")
    def test_queue_simulation(self, mock_delay):
        """Test that queuing records a run and hands its id to the workers."""
        run = queue_simulation(SimScenarioFactory(), EstimationConfig())

        assert run.status == RunStatus.RUNNING
        mock_delay.assert_called_once_with(run.pk)
