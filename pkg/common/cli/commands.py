"""
Base management command of the toolkit: shared estimation flags, effective-config
logging and the stable exit codes (0 success, 1 estimation failure, 2 usage error).
"""

import json
import logging

from django.core.management.base import BaseCommand, CommandError

from common.cli.config import parse_config
from common.exceptions import ConfigurationError, EcoAteError, UsageError
from eco_ate.version import build_identifier

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG, 3: logging.DEBUG}


class EcoAteCommand(BaseCommand):
    """Command with a ``RunConfig`` and mapped exit codes.

    Subclasses set ``command_name``, add their flags in ``add_command_arguments`` and
    implement ``run(config)``.
    """

    command_name = None

    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON file with option values (flags win)")
        parser.add_argument("--seed", type=int, help="Base random seed")
        parser.add_argument("--sieve-degree", type=int, help="Polynomial sieve degree")
        parser.add_argument("--ridge", type=float, help="Ridge penalty of the sieve fits")
        parser.add_argument("--propensity-clamp", type=float, help="Propensity clamp c")
        parser.add_argument(
            "--kernel-bandwidth", type=float, help="Kernel bandwidth (default: Silverman)"
        )
        parser.add_argument(
            "--fusion-weighting",
            choices=["uniform", "size"],
            help="Site weights of the fused estimate",
        )
        parser.add_argument(
            "--source-policy",
            choices=["exclude", "abort"],
            help="Handling of failing or silent sources",
        )
        parser.add_argument(
            "--score-centering",
            choices=["kernel", "broadcast"],
            help="Estimator of E[xi | a, x, S=s] in the efficient score",
        )
        parser.add_argument(
            "--beta-method",
            choices=["moments", "likelihood"],
            help="Outcome-shift estimating equation of the oracle",
        )
        parser.add_argument(
            "--round-timeout", type=float, help="Seconds per protocol round"
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run(self, config):
        raise NotImplementedError

    def configure_logging(self, verbosity):
        level = LOG_LEVELS.get(verbosity, logging.INFO)
        for name in ("common", "fusion", "simlab", "eco_ate"):
            logging.getLogger(name).setLevel(level)

    def handle(self, *args, **options):
        self.configure_logging(options.get("verbosity", 1))
        try:
            config = parse_config(self.command_name, options)
        except (UsageError, ConfigurationError) as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc

        effective = json.dumps(config.to_dict(), sort_keys=True, default=str)
        logger.info(f"Effective configuration: {effective}")
        logger.info(f"Build {build_identifier()}, seed {config.seed}")
        try:
            self.run(config)
        except (UsageError, ConfigurationError) as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc
        except (EcoAteError, ValueError, OSError) as exc:
            logger.error(f"{self.command_name} failed: {exc}")
            raise CommandError(
                f"{self.command_name} failed: {exc}", returncode=EXIT_FAILURE
            ) from exc
