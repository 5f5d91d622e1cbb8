import json
from pathlib import Path

from common.cli import EcoAteCommand, split_list
from common.exceptions import UsageError
from fusion.config import EstimationConfig
from fusion.datasets import TARGET_SITE, read_site_table
from fusion.estimators import (
    aipw_target_only,
    meta_ivw_sites,
    naive_fusion,
    oracle_pooled,
    run_eco_ate,
)
from fusion.management.options import source_bases
from fusion.services.nuisance import TargetModels

ESTIMATORS = ("eco_ate", "target_only", "naive", "oracle", "meta_ivw")


class Command(EcoAteCommand):
    """Management command running the estimators on one table per site."""

    help = "Estimate the target ATE from one target table and any number of source tables"
    command_name = "estimate"

    def add_command_arguments(self, parser):
        parser.add_argument("--target", help="Target site table (columns y, a, x1..xd)")
        parser.add_argument(
            "--source",
            action="append",
            help="Source site table; repeat for every source (ids 1, 2, ... in order)",
        )
        parser.add_argument(
            "--xi",
            action="append",
            help="Weight basis, e.g. 'a*log(y)' or 'x1*log(y);x1*a*log(y)'; "
            "once for all sources or once per source ('none' for no outcome shift)",
        )
        parser.add_argument(
            "--estimators",
            help=f"Comma-separated subset of {', '.join(ESTIMATORS)} (default: eco_ate)",
        )
        parser.add_argument("--output", help="Write the reports as JSON to this file")

    def run(self, config):
        estimators = split_list(config.get("estimators", "eco_ate"))
        unknown = [name for name in estimators if name not in ESTIMATORS]
        if unknown:
            raise UsageError(
                f"Unknown estimator '{unknown[0]}' (choose from {', '.join(ESTIMATORS)})"
            )

        target = read_site_table(config.target, TARGET_SITE)
        datasets = [
            read_site_table(path, str(index))
            for index, path in enumerate(config.get("source", []), start=1)
        ]
        bases = source_bases(config.get("xi"), len(datasets), target.dimension)
        sources = list(zip(datasets, bases))
        settings = EstimationConfig.from_settings(**config.estimation_overrides())
        target_models = TargetModels(target, settings)

        runners = {
            "eco_ate": lambda: run_eco_ate(target, sources, settings, target_models),
            "target_only": lambda: aipw_target_only(target, settings, target_models),
            "naive": lambda: naive_fusion(target, sources, settings, target_models),
            "oracle": lambda: oracle_pooled(target, sources, settings, target_models),
            "meta_ivw": lambda: meta_ivw_sites([target] + datasets, settings),
        }
        reports = []
        for name in estimators:
            report = runners[name]()
            reports.append(report)
            self.stdout.write(str(report))

        if config.output:
            payload = [report.to_dict() for report in reports]
            Path(config.output).write_text(
                json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
            )
            self.stdout.write(self.style.SUCCESS(f"Reports written to {config.output}"))
