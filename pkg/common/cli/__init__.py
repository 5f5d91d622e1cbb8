"""
Command-line support shared by the management commands.
"""

from common.cli.commands import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, EcoAteCommand
from common.cli.config import RunConfig, parse_config, split_list

__all__ = [
    "EXIT_FAILURE",
    "EXIT_OK",
    "EXIT_USAGE",
    "EcoAteCommand",
    "RunConfig",
    "parse_config",
    "split_list",
]
