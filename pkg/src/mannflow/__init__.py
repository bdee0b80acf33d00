"""Averaged (Mann) fixed-point iteration on [0,1] with perturbations.

Subpackages: maps (self-maps of the unit interval), schedules (step
sizes, error models, convergence hypothesis checks), discrete (the
iterator), continuous (the ODE analogue), diagnostics (tail estimates),
bench (Monte Carlo iteration-count grids), cli (command line).
"""

__version__ = "0.1.0"

from .maps import (ScalarMap, benchmark_map, constant_map,
                   enumerate_fixed_points, eval_benchmark_map, get_map,
                   identity_map, load_knots, piecewise_linear_map, residual,
                   unique_fixed_point_map)
from .schedules import (ErrorModel, HypothesisReport, ThetaSchedule,
                        classic_mann_schedule, constant_schedule,
                        custom_schedule, deterministic_error, error_at,
                        power_schedule, theta_at, theta_at_time,
                        uniform_decay, validate_hypotheses, zero_error)
from .discrete import (StoppingRule, Trajectory, mann_step, project_unit,
                       run, write_trajectory_csv)
from .continuous import (ContinuousTrajectory, closed_form_linear, integrate,
                         vector_field, write_flow_csv)
from .diagnostics import (TailSummary, classify_limit, step_diff_sup,
                          summarize_tail, tail_interval)
from .bench import (BenchCell, BenchReport, bisection_count, bisection_run,
                    format_tables, reproduce_tables, run_cell,
                    write_report_csv)

__all__ = [
    "ScalarMap", "benchmark_map", "constant_map", "enumerate_fixed_points",
    "eval_benchmark_map", "get_map", "identity_map", "load_knots",
    "piecewise_linear_map", "residual", "unique_fixed_point_map",
    "ErrorModel", "HypothesisReport", "ThetaSchedule",
    "classic_mann_schedule", "constant_schedule", "custom_schedule",
    "deterministic_error", "error_at", "power_schedule", "theta_at",
    "theta_at_time", "uniform_decay", "validate_hypotheses", "zero_error",
    "StoppingRule", "Trajectory", "mann_step", "project_unit", "run",
    "write_trajectory_csv",
    "ContinuousTrajectory", "closed_form_linear", "integrate",
    "vector_field", "write_flow_csv",
    "TailSummary", "classify_limit", "step_diff_sup", "summarize_tail",
    "tail_interval",
    "BenchCell", "BenchReport", "bisection_count", "bisection_run",
    "format_tables", "reproduce_tables", "run_cell", "write_report_csv",
]
