"""
Effective run configuration of a command: config file values overridden by flags.
"""

import json
from pathlib import Path

from common.exceptions import ConfigurationError, UsageError

COMMANDS = ("simulate", "fed-run", "estimate", "report")

# Keys shared by every command; estimation keys map onto EstimationConfig fields.
ESTIMATION_KEYS = (
    "sieve_degree",
    "ridge",
    "propensity_clamp",
    "kernel_bandwidth",
    "fusion_weighting",
    "source_policy",
    "score_centering",
    "beta_method",
    "round_timeout",
)
COMMON_KEYS = ("seed", "verbosity", "config") + ESTIMATION_KEYS

COMMAND_KEYS = {
    "simulate": (
        "epsilon",
        "n",
        "reps",
        "workers",
        "estimators",
        "overparam",
        "profile",
        "output",
        "record",
        "executor",
        "async_",
    ),
    "fed-run": (
        "role",
        "dir",
        "data",
        "xi",
        "site_id",
        "target_id",
        "sources",
        "source",
        "output",
    ),
    "estimate": ("target", "source", "xi", "estimators", "output"),
    "report": ("results", "run_id", "truth", "output", "figure"),
}


def _load_file(path):
    path = Path(path)
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigurationError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigurationError(f"Config file {path} must hold a JSON object")
    return {str(key).replace("-", "_"): value for key, value in values.items()}


class RunConfig:
    """Validated settings of one command invocation.

    Parameters
    ----------
    command : str
        One of ``simulate``, ``fed-run``, ``estimate``, ``report``
    values : dict
        Effective values keyed by option name (dashes replaced by underscores)
    """

    def __init__(self, command, values):
        if command not in COMMANDS:
            raise UsageError(f"Unknown command '{command}'")
        allowed = set(COMMON_KEYS) | set(COMMAND_KEYS[command])
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise ConfigurationError(
                f"Unknown key '{unknown[0]}' for command {command}",
                details={"unknown": unknown},
            )
        self.command = command
        self.values = dict(values)

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        if name in COMMON_KEYS or any(name in keys for keys in COMMAND_KEYS.values()):
            return None
        raise AttributeError(name)

    def get(self, name, default=None):
        value = self.values.get(name)
        return default if value is None else value

    def estimation_overrides(self):
        """EstimationConfig overrides given on the command line or in the file."""
        return {
            key: self.values[key]
            for key in ESTIMATION_KEYS
            if self.values.get(key) is not None
        }

    def to_dict(self):
        return {"command": self.command, **self.values}

    def __repr__(self):
        return f"RunConfig({self.command!r}, {self.values})"


def _require(config, *names):
    missing = [name for name in names if config.get(name) in (None, [], "")]
    if missing:
        raise UsageError(
            f"{config.command}: missing required option --{missing[0].replace('_', '-')}"
        )


def _validate(config):
    if config.command == "report":
        if (config.get("results") is None) == (config.get("run_id") is None):
            raise UsageError("report: give exactly one of a results table or --run-id")
        if config.get("truth") is None:
            raise UsageError("report: missing required option --truth")
    elif config.command == "estimate":
        _require(config, "target")
        sources = config.get("source", [])
        xi = config.get("xi", [])
        if xi and len(xi) not in (1, len(sources)):
            raise UsageError(
                f"estimate: --xi given {len(xi)} times for {len(sources)} sources "
                "(give it once for all sources or once per source)"
            )
    elif config.command == "fed-run":
        _require(config, "role", "dir")
        role = config.get("role")
        if role == "target":
            _require(config, "data", "sources")
        elif role == "source":
            _require(config, "data", "site_id")
        elif role == "all":
            _require(config, "data", "source")
        else:
            raise UsageError(f"fed-run: unknown role '{role}'")
    elif config.command == "simulate":
        if config.get("n") is not None and config.get("n") < 50:
            raise ConfigurationError("simulate: 'n' must be at least 50")
        if config.get("reps") is not None and config.get("reps") < 1:
            raise ConfigurationError("simulate: 'reps' must be at least 1")
    return config


def parse_config(command, options):
    """Merge a config file with command-line options into a ``RunConfig``.

    Parameters
    ----------
    command : str
        Command name
    options : dict
        Parsed command-line options; ``None`` means "not given". ``config`` names an
        optional JSON file whose values the given options override.

    Returns
    -------
    RunConfig
        Validated effective configuration

    Raises
    ------
    ConfigurationError
        On unreadable files, unknown keys or invalid values
    UsageError
        On missing or conflicting options
    """
    allowed = set(COMMON_KEYS) | set(COMMAND_KEYS[command])
    flags = {key: value for key, value in options.items() if key in allowed}
    values = {}
    if flags.get("config"):
        values.update(_load_file(flags["config"]))
    values.update({key: value for key, value in flags.items() if value is not None})
    return _validate(RunConfig(command, values))


def split_list(value):
    """Comma-separated option (or a list from a config file) to a list of strings."""
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(item) for item in value]
    return [part.strip() for part in str(value).split(",") if part.strip()]
