from pathlib import Path

import pandas as pd

from common.cli import EcoAteCommand, split_list
from common.exceptions import UsageError
from fusion.config import EstimationConfig
from simlab.enums import EstimatorName, ExecutorKind, Profile
from simlab.exceptions import InsufficientRowsError
from simlab.services import (
    EPSILON_GRID,
    TRUE_ATE,
    SimScenario,
    format_metrics_table,
    record_run,
    run_monte_carlo,
    summarize_by_epsilon,
    write_results_table,
)
from simlab.tasks import queue_simulation


class Command(EcoAteCommand):
    """Management command running Monte Carlo replications over an ε grid."""

    help = "Simulate the estimators on the three-source scenario over a grid of epsilon"
    command_name = "simulate"

    def add_command_arguments(self, parser):
        parser.add_argument(
            "--epsilon",
            type=float,
            action="append",
            help=f"Outcome-shift strength, repeatable (default {list(EPSILON_GRID)})",
        )
        parser.add_argument("--n", type=int, help="Records per site (profile default)")
        parser.add_argument("--reps", type=int, help="Replications per epsilon")
        parser.add_argument("--workers", type=int, help="Parallel workers")
        parser.add_argument(
            "--estimators",
            help=f"Comma-separated subset of {', '.join(EstimatorName.values)}",
        )
        parser.add_argument(
            "--overparam",
            action="store_true",
            default=None,
            help="Run every ECO-ATE variant with the enlarged weight bases",
        )
        parser.add_argument(
            "--profile",
            choices=Profile.values,
            help="desk: n=500 and 200 replications; full: n=2000 and 1000",
        )
        parser.add_argument("--output", help="Write the results table (CSV) to this file")
        parser.add_argument(
            "--record",
            action="store_true",
            default=None,
            help="Store the runs and their results rows in the database",
        )
        parser.add_argument("--executor", choices=ExecutorKind.values)
        parser.add_argument(
            "--async",
            dest="async_",
            action="store_true",
            default=None,
            help="Queue one recorded run per epsilon on the Celery workers and return",
        )

    def scenarios(self, config):
        epsilons = config.get("epsilon") or list(EPSILON_GRID)
        if not isinstance(epsilons, (list, tuple)):
            epsilons = [epsilons]
        estimators = split_list(config.estimators) or None
        unknown = [name for name in estimators or [] if name not in EstimatorName.values]
        if unknown:
            raise UsageError(
                f"Unknown estimator '{unknown[0]}' "
                f"(choose from {', '.join(EstimatorName.values)})"
            )
        return [
            SimScenario.from_profile(
                config.get("profile", Profile.DESK),
                epsilon,
                n=config.n,
                seed=config.get("seed", 0),
                estimators=estimators,
                overparametrized=config.get("overparam", False),
                fusion_weighting=config.fusion_weighting,
                replications=config.reps,
            )
            for epsilon in epsilons
        ]

    def run(self, config):
        estimation = EstimationConfig.from_settings(**config.estimation_overrides())
        scenarios = self.scenarios(config)

        if config.async_:
            for scenario in scenarios:
                run = queue_simulation(scenario, estimation)
                self.stdout.write(f"Queued run {run.pk} for {scenario}")
            return

        frames = []
        for scenario in scenarios:
            results = run_monte_carlo(
                scenario,
                workers=config.workers,
                executor=config.get("executor", ExecutorKind.PROCESS),
                config=estimation,
            )
            if config.record:
                run = record_run(scenario, estimation, results)
                message = f"Recorded run {run.pk} for {scenario}"
                self.stdout.write(self.style.SUCCESS(message))
            frames.append(results)

        results = pd.concat(frames, ignore_index=True)
        if config.output:
            write_results_table(results, Path(config.output))
            self.stdout.write(self.style.SUCCESS(f"Results written to {config.output}"))
        try:
            summary = summarize_by_epsilon(results, TRUE_ATE)
        except InsufficientRowsError as exc:
            self.stdout.write(self.style.WARNING(f"No metrics: {exc}"))
            return
        self.stdout.write(format_metrics_table(summary))
