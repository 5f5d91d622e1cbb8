"""
Monte Carlo driver: every replication samples the scenario, runs the configured
estimators on the same draw and yields one results row per estimator.

Replications are independent (their random streams depend on the base seed and the
replication index only), so the results table is the same for any worker count.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor, as_completed

import numpy as np
import pandas as pd

import django
from django.conf import settings

from fusion.config import EstimationConfig
from fusion.estimators import (
    aipw_target_only,
    meta_ivw_sites,
    naive_fusion,
    oracle_pooled,
    run_eco_ate,
)
from fusion.reports import RESULT_COLUMNS, failure_row
from fusion.services.nuisance import TargetModels
from simlab.enums import EstimatorName, ExecutorKind
from simlab.exceptions import SimulationError
from simlab.services.scenario import (
    SOURCE_ESTIMATORS,
    SimScenario,
    sample_scenario,
    true_basis,
    true_values,
)

logger = logging.getLogger(__name__)

FLOAT_COLUMNS = ["epsilon", "estimate", "se", "ci_lo", "ci_hi", "covered"]
INTEGER_COLUMNS = ["seed", "replicate", "failed"]


def _single_source(name):
    def run(target, sources, datasets, config, target_models):
        chosen = [pair for pair in sources if pair[0].site_id == SOURCE_ESTIMATORS[name]]
        return run_eco_ate(target, chosen, config, target_models, estimator=name)

    return run


def _all_sources(target, sources, datasets, config, target_models):
    return run_eco_ate(
        target, sources, config, target_models, estimator=EstimatorName.ECO_ATE_ALL
    )


def _all_sources_overparam(target, sources, datasets, config, target_models):
    enlarged = [
        (data, true_basis(data.site_id, overparametrized=True)) for data in datasets
    ]
    return run_eco_ate(
        target,
        enlarged,
        config,
        target_models,
        estimator=EstimatorName.ECO_ATE_ALL_OVERPARAM,
    )


ESTIMATOR_RUNNERS = {
    EstimatorName.TARGET_ONLY: lambda target, sources, datasets, config, models: (
        aipw_target_only(target, config, models)
    ),
    EstimatorName.NAIVE: lambda target, sources, datasets, config, models: (
        naive_fusion(target, sources, config, models)
    ),
    EstimatorName.ECO_ATE_1: _single_source(EstimatorName.ECO_ATE_1),
    EstimatorName.ECO_ATE_2: _single_source(EstimatorName.ECO_ATE_2),
    EstimatorName.ECO_ATE_3: _single_source(EstimatorName.ECO_ATE_3),
    EstimatorName.ECO_ATE_ALL: _all_sources,
    EstimatorName.ECO_ATE_ALL_OVERPARAM: _all_sources_overparam,
    EstimatorName.ORACLE: lambda target, sources, datasets, config, models: (
        oracle_pooled(target, sources, config, models)
    ),
    EstimatorName.META_IVW: lambda target, sources, datasets, config, models: (
        meta_ivw_sites([target] + datasets, config)
    ),
}


def run_replication(scn, replicate, config):
    """Results rows of every configured estimator on one replication.

    Sampling and estimation failures become failure rows; nothing raises.

    Parameters
    ----------
    scn : SimScenario
        Scenario to sample
    replicate : int
        Replication index
    config : EstimationConfig
        Estimation settings shared by every estimator

    Returns
    -------
    list of dict
        One row per estimator in ``scn.estimators`` order
    """
    truth, _ = true_values(scn)
    row_keys = {"epsilon": scn.epsilon, "seed": scn.seed, "replicate": int(replicate)}
    try:
        datasets = sample_scenario(scn, replicate)
        target, datasets = datasets[0], datasets[1:]
        target_models = TargetModels(target, config)
    except Exception as exc:
        logger.error(f"Replication {replicate} failed before estimation: {exc}")
        return [failure_row(name, exc, **row_keys) for name in scn.estimators]

    sources = [
        (data, true_basis(data.site_id, scn.overparametrized)) for data in datasets
    ]
    rows = []
    for name in scn.estimators:
        try:
            runner = ESTIMATOR_RUNNERS[name]
            report = runner(target, sources, datasets, config, target_models)
        except Exception as exc:
            logger.warning(f"Replication {replicate}: {name} failed ({exc})")
            rows.append(failure_row(name, exc, **row_keys))
            continue
        row = report.to_row(scn.epsilon, scn.seed, replicate, truth)
        row["estimator"] = name
        rows.append(row)
    return rows


def _init_worker():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "eco_ate.settings")
    django.setup()


def _replication_batch(args):
    """Run a batch of replications in a worker.

    Module level so that ``ProcessPoolExecutor`` can pickle it; the scenario and the
    estimation settings travel as plain dictionaries.
    """
    scenario, estimation, replicates = args
    scn = SimScenario.from_dict(scenario)
    config = EstimationConfig(**estimation)
    rows = []
    for replicate in replicates:
        rows.extend(run_replication(scn, replicate, config))
    return rows


def results_frame(rows, estimators):
    """Results table sorted by ε and replication, then by estimator order."""
    results = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    for column in FLOAT_COLUMNS:
        results[column] = pd.to_numeric(results[column], errors="coerce").astype(float)
    for column in INTEGER_COLUMNS:
        results[column] = results[column].astype(int)
    results["sources_used"] = results["sources_used"].fillna("").astype(str)
    results["error"] = results["error"].fillna("").astype(str)
    order = {name: position for position, name in enumerate(estimators)}
    results["_order"] = results["estimator"].map(order)
    results = results.sort_values(["epsilon", "replicate", "_order"], kind="mergesort")
    return results.drop(columns="_order").reset_index(drop=True)


def _configured_workers():
    return int(getattr(settings, "ECO_ATE", {}).get("MC_WORKERS", 1))


def run_monte_carlo(
    scn, replications=None, workers=None, executor=ExecutorKind.PROCESS, config=None
):
    """Run the scenario's estimators over many replications.

    Parameters
    ----------
    scn : SimScenario
        Scenario to simulate
    replications : int, optional
        Number of replications; defaults to ``scn.replications``
    workers : int, optional
        Parallel workers; defaults to ``ECO_ATE["MC_WORKERS"]``
    executor : str
        ``process`` or ``thread`` pool when ``workers > 1``
    config : EstimationConfig, optional
        Estimation settings; the scenario's fusion weighting overrides them

    Returns
    -------
    pandas.DataFrame
        One row per estimator and replication with the ``RESULT_COLUMNS``

    Raises
    ------
    SimulationError
        If ``replications`` is below 1
    """
    config = config or EstimationConfig.from_settings()
    if scn.fusion_weighting:
        config = config.replace(fusion_weighting=scn.fusion_weighting)
    replications = scn.replications if replications is None else int(replications)
    if replications < 1:
        raise SimulationError("replications must be at least 1")
    workers = max(int(workers or _configured_workers()), 1)
    executor = ExecutorKind(executor)

    scenario, estimation = scn.to_dict(), config.to_dict()
    replicates = np.arange(replications)
    logger.info(
        f"Simulating {scn} over {replications} replications with {workers} "
        f"{executor.value} worker(s)"
    )

    if workers == 1:
        rows = _replication_batch((scenario, estimation, replicates.tolist()))
    else:
        chunks = np.array_split(replicates, min(workers * 4, replications))
        if executor == ExecutorKind.PROCESS:
            pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker)
        else:
            pool = ThreadPoolExecutor(max_workers=workers)
        rows = []
        with pool:
            futures = [
                pool.submit(_replication_batch, (scenario, estimation, chunk.tolist()))
                for chunk in chunks
            ]
            for completed, future in enumerate(as_completed(futures), start=1):
                rows.extend(future.result())
                logger.debug(f"Batch {completed}/{len(futures)} done ({len(rows)} rows)")

    results = results_frame(rows, scn.estimators)
    failures = int(results["failed"].sum())
    if failures:
        logger.warning(f"{failures} of {len(results)} estimator runs failed")
    logger.info(f"Simulation of {scn} finished with {len(results)} rows")
    return results
