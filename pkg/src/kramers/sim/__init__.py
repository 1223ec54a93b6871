"""Monte Carlo simulation of the diffusion."""
from .backend import available_backends, default_backend
from .engine import (EnsembleResult, SimConfig, TrajectoryRecord, WellSet, default_dt, hitting_time,
                     in_well, mean_ci, run_ensemble, step_em, trace_process)

__all__ = [
    "available_backends", "default_backend", "EnsembleResult", "SimConfig", "TrajectoryRecord",
    "WellSet", "default_dt", "hitting_time", "in_well", "mean_ci", "run_ensemble", "step_em",
    "trace_process",
]
