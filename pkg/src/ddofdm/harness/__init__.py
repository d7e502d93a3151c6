"""Monte Carlo experiment driver and command-line interface."""

from .config import ExperimentConfig, load_config, parse_config, pilot_overhead
from .experiments import (
    CurvePoint,
    emit_csv,
    read_csv,
    run_ber_experiment,
    run_doppler_sweep,
    run_experiment,
    run_mse_experiment,
)

__all__ = [
    "CurvePoint",
    "ExperimentConfig",
    "emit_csv",
    "load_config",
    "parse_config",
    "pilot_overhead",
    "read_csv",
    "run_ber_experiment",
    "run_doppler_sweep",
    "run_experiment",
    "run_mse_experiment",
]
