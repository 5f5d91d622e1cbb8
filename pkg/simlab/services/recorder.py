"""
Results tables on disk and recorded simulation runs in the database.
"""

import logging
from pathlib import Path

import pandas as pd

from django.db import transaction
from django.utils import timezone

from eco_ate.version import build_identifier
from fusion.reports import RESULT_COLUMNS
from simlab.enums import RunStatus
from simlab.exceptions import SimulationError
from simlab.models import ReplicationResult, SimulationRun
from simlab.services.monte_carlo import results_frame

logger = logging.getLogger(__name__)


def write_results_table(results, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results.to_csv(path, index=False, columns=RESULT_COLUMNS)
    logger.info(f"Results table with {len(results)} rows written to {path}")
    return path


def read_results_table(path):
    """Read a results table written by ``write_results_table``.

    Raises
    ------
    SimulationError
        If the file lacks a results column
    """
    results = pd.read_csv(path, dtype={"sources_used": str, "error": str})
    missing = [column for column in RESULT_COLUMNS if column not in results.columns]
    if missing:
        raise SimulationError(
            f"{path} is not a results table (missing column '{missing[0]}')",
            details={"missing": missing},
        )
    estimators = list(dict.fromkeys(results["estimator"]))
    return results_frame(results[RESULT_COLUMNS].to_dict("records"), estimators)


def start_run(scenario, config):
    """Create a running SimulationRun for a scenario and its estimation settings."""
    return SimulationRun.objects.create(
        scenario=scenario.to_dict(),
        estimation=config.to_dict(),
        status=RunStatus.RUNNING,
        build_id=build_identifier(),
        started_at=timezone.now(),
    )


def _optional(value):
    return None if pd.isna(value) else value


@transaction.atomic
def finish_run(run, results):
    """Store every results row on ``run`` and mark it completed."""
    ReplicationResult.objects.bulk_create(
        [
            ReplicationResult(
                run=run,
                estimator=row["estimator"],
                epsilon=row["epsilon"],
                seed=row["seed"],
                replicate=row["replicate"],
                estimate=_optional(row["estimate"]),
                se=_optional(row["se"]),
                ci_lo=_optional(row["ci_lo"]),
                ci_hi=_optional(row["ci_hi"]),
                covered=None if pd.isna(row["covered"]) else bool(row["covered"]),
                sources_used=row["sources_used"] or "",
                failed=bool(row["failed"]),
                error=row["error"] or "",
            )
            for row in results.to_dict("records")
        ]
    )
    run.status = RunStatus.COMPLETED
    run.replications = int(results["replicate"].nunique())
    run.failure_count = int(results["failed"].sum())
    run.finished_at = timezone.now()
    run.save()
    logger.info(f"Recorded {len(results)} results rows on run {run.pk}")
    return run


def fail_run(run, error):
    run.status = RunStatus.FAILED
    run.error = str(error)
    run.finished_at = timezone.now()
    run.save()
    return run


def record_run(scenario, config, results):
    """Store a finished simulation and its results rows in one step."""
    return finish_run(start_run(scenario, config), results)


def load_run_results(run_id):
    """Results table of a recorded run.

    Raises
    ------
    SimulationError
        If the run does not exist or has not completed
    """
    try:
        run = SimulationRun.objects.get(pk=run_id)
    except SimulationRun.DoesNotExist as exc:
        raise SimulationError(f"No simulation run with id {run_id}") from exc
    if run.status != RunStatus.COMPLETED:
        raise SimulationError(f"Run {run_id} is {run.status}, not completed")
    rows = [
        {
            "estimator": result.estimator,
            "epsilon": result.epsilon,
            "seed": result.seed,
            "replicate": result.replicate,
            "estimate": result.estimate,
            "se": result.se,
            "ci_lo": result.ci_lo,
            "ci_hi": result.ci_hi,
            "covered": None if result.covered is None else int(result.covered),
            "sources_used": result.sources_used,
            "failed": int(result.failed),
            "error": result.error,
        }
        for result in run.results.all()
    ]
    estimators = run.scenario.get("estimators") or list(
        dict.fromkeys(row["estimator"] for row in rows)
    )
    return results_frame(rows, estimators)
