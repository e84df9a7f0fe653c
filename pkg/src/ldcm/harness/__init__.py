"""Run configuration, diagnostics, convergence studies and the command line."""
from .config import PRESETS, RegridSchedule, RunConfig, config_from_dict, load_config, preset
from .diagnostics import (
    DiagnosticFields,
    constraint_diagnostics,
    richardson_rate,
    sampled_difference,
)
from .run import RunError, RunResult, converge, rate_table, run

__all__ = [
    "PRESETS",
    "RegridSchedule",
    "RunConfig",
    "config_from_dict",
    "load_config",
    "preset",
    "DiagnosticFields",
    "constraint_diagnostics",
    "richardson_rate",
    "sampled_difference",
    "RunError",
    "RunResult",
    "converge",
    "rate_table",
    "run",
]
