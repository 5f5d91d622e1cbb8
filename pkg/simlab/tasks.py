import logging

from django.utils import timezone

# Optional import for Celery
try:
    from celery import shared_task
except ImportError:
    # Fallback for when Celery is not installed
    def shared_task(bind=False, max_retries=3, default_retry_delay=300):
        def decorator(func):
            func.request = None  # Mock request object
            return func

        return decorator


from fusion.config import EstimationConfig
from simlab.models import SimulationRun
from simlab.services import (
    SimScenario,
    fail_run,
    finish_run,
    run_monte_carlo,
    run_replication,
    start_run,
)

logger = logging.getLogger(__name__)


@shared_task(bind=True, max_retries=3, default_retry_delay=60)
def run_replication_task(self, scenario, replicate, estimation=None):
    """Celery task computing the results rows of one replication.

    Parameters
    ----------
    self : celery.Task
        Celery task instance for retry functionality
    scenario : dict
        ``SimScenario.to_dict()`` of the scenario
    replicate : int
        Replication index
    estimation : dict, optional
        ``EstimationConfig.to_dict()``; the configured settings when omitted

    Returns
    -------
    dict
        Dictionary containing task result information with keys:
        - status: 'success' or 'error'
        - replicate: the replication index
        - rows: results rows, one per estimator
        - timestamp: ISO formatted timestamp
        - error: Error message if applicable
    """
    try:
        scn = SimScenario.from_dict(scenario)
        if estimation:
            config = EstimationConfig(**estimation)
        else:
            config = EstimationConfig.from_settings()
        rows = run_replication(scn, replicate, config)
        logger.info(f"Replication {replicate} of {scn} produced {len(rows)} rows")
        return {
            "status": "success",
            "replicate": replicate,
            "rows": rows,
            "timestamp": timezone.now().isoformat(),
        }

    except Exception as exc:
        logger.error(f"Error in run_replication_task: {str(exc)}")

        if self.request.retries < self.max_retries:
            logger.info(f"Retrying run_replication_task for replicate {replicate}")
            raise self.retry(exc=exc, countdown=10 * (2**self.request.retries))

        return {
            "status": "error",
            "replicate": replicate,
            "timestamp": timezone.now().isoformat(),
            "error": str(exc),
        }


@shared_task(bind=True, max_retries=1, default_retry_delay=300)
def run_simulation_task(self, run_id):
    """Celery task running a recorded simulation to completion.

    The run must exist with its scenario and estimation settings; results rows are
    stored on it and the run is marked completed or failed.

    Parameters
    ----------
    self : celery.Task
        Celery task instance for retry functionality
    run_id : int
        ID of the SimulationRun to execute

    Returns
    -------
    dict
        Dictionary containing task result information with keys:
        - status: 'completed', 'skipped' or 'error'
        - run_id: ID of the processed run
        - rows: number of results rows stored
        - failures: number of failed estimator runs
        - timestamp: ISO formatted timestamp
        - error: Error message if applicable
    """
    try:
        run = SimulationRun.objects.get(pk=run_id)
    except SimulationRun.DoesNotExist:
        logger.warning(f"Simulation run {run_id} does not exist")
        return {
            "status": "skipped",
            "run_id": run_id,
            "timestamp": timezone.now().isoformat(),
            "error": "Run not found",
        }

    try:
        scn = SimScenario.from_dict(run.scenario)
        config = EstimationConfig(**run.estimation) if run.estimation else None
        results = run_monte_carlo(scn, config=config)
        finish_run(run, results)
        logger.info(f"Simulation run {run_id} completed with {len(results)} rows")
        return {
            "status": "completed",
            "run_id": run_id,
            "rows": len(results),
            "failures": run.failure_count,
            "timestamp": timezone.now().isoformat(),
        }

    except Exception as exc:
        logger.error(f"Error in run_simulation_task for run {run_id}: {str(exc)}")
        fail_run(run, exc)
        return {
            "status": "error",
            "run_id": run_id,
            "timestamp": timezone.now().isoformat(),
            "error": str(exc),
        }


def queue_simulation(scenario, config):
    """Record a SimulationRun and hand it to the worker queue."""
    run = start_run(scenario, config)
    run_simulation_task.delay(run.pk)
    logger.info(f"Queued simulation run {run.pk} for {scenario}")
    return run
