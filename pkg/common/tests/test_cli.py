import json

import pytest

from django.core.management import call_command
from django.core.management.base import CommandError

from common.cli import EXIT_FAILURE, EXIT_USAGE, RunConfig, parse_config, split_list
from common.exceptions import ConfigurationError, UsageError
from eco_ate.cli import main


class TestParseConfig:
    """Test merging of config files and command-line options."""

    def test_flag_overrides_file(self, tmp_path):
        """Test that a flag value wins over the config file value."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"n": 2000, "reps": 10}))

        config = parse_config("simulate", {"config": str(path), "n": 500, "reps": None})

        assert config.n == 500
        assert config.reps == 10

    def test_dashed_file_keys(self, tmp_path):
        """Test that dashed keys in the file map to option names."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"sieve-degree": 2}))

        config = parse_config("estimate", {"config": str(path), "target": "t.csv"})

        assert config.sieve_degree == 2
        assert config.estimation_overrides() == {"sieve_degree": 2}

    def test_unknown_key_in_file(self, tmp_path):
        """Test that a key no command accepts is a configuration error."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"bandwith": 0.3}))

        with pytest.raises(ConfigurationError) as error:
            parse_config("simulate", {"config": str(path)})

        assert error.value.details == {"unknown": ["bandwith"]}

    def test_key_of_another_command(self):
        """Test that an option of another command is rejected."""
        with pytest.raises(ConfigurationError):
            RunConfig("report", {"epsilon": [0.5]})

    def test_invalid_json(self, tmp_path):
        """Test that an unparsable file is a configuration error."""
        path = tmp_path / "run.json"
        path.write_text("{n: 5")

        with pytest.raises(ConfigurationError):
            parse_config("simulate", {"config": str(path)})

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file is a configuration error."""
        with pytest.raises(ConfigurationError):
            parse_config("simulate", {"config": str(tmp_path / "absent.json")})

    def test_small_sample_rejected(self):
        """Test that simulate refuses n below 50."""
        with pytest.raises(ConfigurationError):
            parse_config("simulate", {"n": 20})

    @pytest.mark.parametrize(
        "options",
        [
            {"truth": 1.0},
            {"results": "r.csv", "run_id": 3, "truth": 1.0},
        ],
    )
    def test_report_needs_exactly_one_source(self, options):
        """Test that report takes a results table or a run id, not both or neither."""
        with pytest.raises(UsageError):
            parse_config("report", options)

    def test_estimate_xi_count(self):
        """Test that --xi must be given once or once per source."""
        options = {
            "target": "t.csv",
            "source": ["a.csv", "b.csv", "c.csv"],
            "xi": ["1", "2"],
        }

        with pytest.raises(UsageError):
            parse_config("estimate", options)

    @pytest.mark.parametrize(
        "options",
        [
            {"role": "target", "dir": "run"},
            {"role": "source", "dir": "run", "data": "s.csv"},
            {"role": "hub", "dir": "run"},
        ],
    )
    def test_fed_run_role_requirements(self, options):
        """Test the per-role required options of fed-run."""
        with pytest.raises(UsageError):
            parse_config("fed-run", options)

    def test_unset_option_reads_as_none(self):
        """Test that a known but unset option reads as None."""
        config = parse_config("report", {"results": "r.csv", "truth": 1.0})

        assert config.figure is None
        assert config.get("output", "default.txt") == "default.txt"


class TestSplitList:
    """Test comma-separated list options."""

    @pytest.mark.parametrize(
        "value, expected",
        [
            (None, []),
            ("naive, oracle", ["naive", "oracle"]),
            ("eco_ate_all,", ["eco_ate_all"]),
            (["naive", "oracle"], ["naive", "oracle"]),
        ],
    )
    def test_split(self, value, expected):
        """Test strings and lists from config files."""
        assert split_list(value) == expected


class TestExitCodes:
    """Test exit codes of the management commands."""

    def test_usage_error_exit_code(self):
        """Test that a usage error ends with exit code 2."""
        with pytest.raises(CommandError) as error:
            call_command("report", "--truth", "1.0")

        assert error.value.returncode == EXIT_USAGE

    def test_unknown_estimator_exit_code(self, tmp_path):
        """Test that an unknown estimator name is a usage error."""
        with pytest.raises(CommandError) as error:
            call_command("simulate", "--epsilon", "0.5", "--estimators", "magic")

        assert error.value.returncode == EXIT_USAGE

    def test_failure_exit_code(self, tmp_path):
        """Test that a failing run ends with exit code 1."""
        with pytest.raises(CommandError) as error:
            call_command("report", str(tmp_path / "missing.csv"), "--truth", "1.0")

        assert error.value.returncode == EXIT_FAILURE


class TestEntryPoint:
    """Test the eco-ate entry point."""

    def test_no_arguments(self, capsys):
        """Test that no command prints usage and exits with 2."""
        with pytest.raises(SystemExit) as error:
            main([])

        assert error.value.code == 2
        assert "usage: eco-ate" in capsys.readouterr().out

    def test_help(self, capsys):
        """Test that --help exits cleanly."""
        with pytest.raises(SystemExit) as error:
            main(["--help"])

        assert error.value.code == 0

    def test_unknown_command(self, capsys):
        """Test that an unknown command exits with 2."""
        with pytest.raises(SystemExit) as error:
            main(["train"])

        assert error.value.code == 2
        assert "unknown command 'train'" in capsys.readouterr().err
