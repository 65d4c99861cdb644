"""Simulation and optimization of MIS-assisted multi-user MIMO downlinks."""

from .harness import Scheme, SweepAxis, SweepSpec, TrialResult, run_sweep, run_trial
from .metrics import per_user_mmse, sum_rate, user_metrics
from .model import ChannelSet, ConfigError, SimConfig, apply_csi_error, generate_channels, split_power
from .oovamp import oovamp_run, oovamp_step
from .optimizer import Solution, optimize
from .projectors import ConstraintMode, project_reactive, project_unimodular

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "ConfigError", "ConstraintMode", "Scheme", "SimConfig", "Solution",
    "SweepAxis", "SweepSpec", "TrialResult", "apply_csi_error", "generate_channels",
    "oovamp_run", "oovamp_step", "optimize", "per_user_mmse", "project_reactive",
    "project_unimodular", "run_sweep", "run_trial", "split_power", "sum_rate", "user_metrics",
]
