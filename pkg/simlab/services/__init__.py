"""
Services module for simlab app.
"""

from simlab.services.metrics import McMetrics, summarize_by_epsilon, summarize_metrics
from simlab.services.monte_carlo import (
    ESTIMATOR_RUNNERS,
    results_frame,
    run_monte_carlo,
    run_replication,
)
from simlab.services.recorder import (
    fail_run,
    finish_run,
    load_run_results,
    read_results_table,
    record_run,
    start_run,
    write_results_table,
)
from simlab.services.reporting import format_metrics_table, render_metrics_figure
from simlab.services.scenario import (
    EPSILON_GRID,
    PROFILES,
    TRUE_ATE,
    SimScenario,
    overparam_basis,
    sample_scenario,
    true_basis,
    true_values,
)

__all__ = [
    "EPSILON_GRID",
    "ESTIMATOR_RUNNERS",
    "PROFILES",
    "TRUE_ATE",
    "McMetrics",
    "SimScenario",
    "fail_run",
    "finish_run",
    "format_metrics_table",
    "load_run_results",
    "overparam_basis",
    "read_results_table",
    "record_run",
    "render_metrics_figure",
    "results_frame",
    "run_monte_carlo",
    "run_replication",
    "sample_scenario",
    "start_run",
    "summarize_by_epsilon",
    "summarize_metrics",
    "true_basis",
    "true_values",
    "write_results_table",
]
