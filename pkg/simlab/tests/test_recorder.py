import pandas as pd
import pytest

from fusion.config import EstimationConfig
from fusion.reports import EstimateReport, failure_row
from simlab.enums import RunStatus
from simlab.exceptions import SimulationError
from simlab.factories import (
    ReplicationResultFactory,
    SimScenarioFactory,
    SimulationRunFactory,
)
from simlab.models import ReplicationResult
from simlab.services.monte_carlo import results_frame
from simlab.services.recorder import (
    fail_run,
    load_run_results,
    read_results_table,
    record_run,
    start_run,
    write_results_table,
)


def sample_results():
    rows = [
        EstimateReport("target_only", 1.02, 0.1, []).to_row(0.5, 7, 0, 1.0),
        EstimateReport("eco_ate_all", 0.97, 0.05, ["1", "2", "3"]).to_row(0.5, 7, 0, 1.0),
        EstimateReport("target_only", 0.88, 0.1, []).to_row(0.5, 7, 1, 1.0),
        failure_row("eco_ate_all", "no convergence", 0.5, 7, 1),
    ]
    return results_frame(rows, ["target_only", "eco_ate_all"])


class TestResultsTable:
    """Test results tables on disk."""

    def test_write_then_read(self, tmp_path):
        """Test that a written table reads back unchanged."""
        results = sample_results()
        path = write_results_table(results, tmp_path / "out" / "results.csv")

        restored = read_results_table(path)

        pd.testing.assert_frame_equal(restored, results)

    def test_not_a_results_table(self, tmp_path):
        """Test that a file without the results columns is rejected."""
        path = tmp_path / "other.csv"
        path.write_text("estimator,estimate\nnaive,1.0\n")

        with pytest.raises(SimulationError) as error:
            read_results_table(path)

        assert "epsilon" in error.value.details["missing"]


@pytest.mark.django_db
class TestRecordedRuns:
    """Test simulation runs stored in the database."""

    def setup_method(self):
        """Set up a scenario and its estimation settings."""
        self.scenario = SimScenarioFactory()
        self.config = EstimationConfig()

    def test_record_and_load(self):
        """Test that a recorded run reproduces its results table."""
        results = sample_results()

        run = record_run(self.scenario, self.config, results)

        run.refresh_from_db()
        assert run.status == RunStatus.COMPLETED
        assert run.replications == 2
        assert run.failure_count == 1
        assert run.scenario == self.scenario.to_dict()
        assert ReplicationResult.objects.filter(run=run).count() == 4
        loaded = load_run_results(run.pk)
        pd.testing.assert_frame_equal(
            loaded.sort_values(["replicate", "estimator"]).reset_index(drop=True),
            results.sort_values(["replicate", "estimator"]).reset_index(drop=True),
            check_dtype=False,
        )

    def test_start_run(self):
        """Test that a started run is running with a build id."""
        run = start_run(self.scenario, self.config)

        assert run.status == RunStatus.RUNNING
        assert run.estimation == self.config.to_dict()
        assert run.build_id

    def test_fail_run(self):
        """Test that a failed run keeps its error."""
        run = start_run(self.scenario, self.config)

        fail_run(run, RuntimeError("worker lost"))

        run.refresh_from_db()
        assert run.status == RunStatus.FAILED
        assert run.error == "worker lost"
        assert run.duration_seconds is not None

    def test_missing_run(self):
        """Test that loading an unknown run fails."""
        with pytest.raises(SimulationError):
            load_run_results(999999)

    def test_unfinished_run(self):
        """Test that a running run has no results to load."""
        run = SimulationRunFactory(status=RunStatus.RUNNING)

        with pytest.raises(SimulationError):
            load_run_results(run.pk)

    def test_factory_results(self):
        """Test loading results created by the factories."""
        run = SimulationRunFactory()
        ReplicationResultFactory.create_batch(3, run=run)

        results = load_run_results(run.pk)

        assert len(results) == 3
        assert results["covered"].tolist() == [1.0, 1.0, 1.0]
        assert str(run) == f"Run {run.pk} (epsilon=0.5, completed)"
