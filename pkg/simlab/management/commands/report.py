from pathlib import Path

from django.conf import settings

from common.cli import EcoAteCommand
from simlab.services import (
    format_metrics_table,
    load_run_results,
    read_results_table,
    render_metrics_figure,
    summarize_by_epsilon,
)


class Command(EcoAteCommand):
    """Management command turning a results table into metrics and a figure."""

    help = "Summarize Monte Carlo results: bias, variance and coverage per epsilon"
    command_name = "report"

    def add_command_arguments(self, parser):
        parser.add_argument(
            "results", nargs="?", help="Results table (CSV) from simulate"
        )
        parser.add_argument("--run-id", type=int, help="Recorded simulation run instead")
        parser.add_argument("--truth", type=float, help="True ATE of the scenario")
        parser.add_argument("--output", help="Write the metrics table to this file")
        parser.add_argument(
            "--figure",
            help="SVG destination (default: next to the results table, or in the "
            "results directory for a recorded run)",
        )

    def figure_path(self, config):
        if config.figure:
            return Path(config.figure)
        if config.results:
            return Path(config.results).with_suffix(".svg")
        return Path(settings.ECO_ATE["RESULTS_DIR"]) / f"run-{config.run_id}.svg"

    def run(self, config):
        if config.results:
            results = read_results_table(config.results)
        else:
            results = load_run_results(config.run_id)
        summary = summarize_by_epsilon(results, config.truth)

        table = format_metrics_table(summary)
        self.stdout.write(table)
        if config.output:
            Path(config.output).write_text(table + "\n", encoding="utf-8")
            message = f"Metrics table written to {config.output}"
            self.stdout.write(self.style.SUCCESS(message))
        figure = render_metrics_figure(summary, self.figure_path(config))
        self.stdout.write(self.style.SUCCESS(f"Figure written to {figure}"))
