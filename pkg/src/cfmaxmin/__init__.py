"""Uplink cell-free massive MIMO simulator with alternating max-min SINR optimization."""

from .combining import EffectiveStats, SinrReport, estimate_effective_stats, se_from_sinr
from .geometry import Layout, NetworkConfig, generate_layout
from .harness import DropResult, ExperimentSpec, run_drop, run_experiment
from .optimizer import GpCoefficients, IterationTrace, alternating_maxmin, solve_power_subproblem, solve_weight_subproblem

__version__ = "0.1.0"

__all__ = [
    "DropResult",
    "EffectiveStats",
    "ExperimentSpec",
    "GpCoefficients",
    "IterationTrace",
    "Layout",
    "NetworkConfig",
    "SinrReport",
    "alternating_maxmin",
    "estimate_effective_stats",
    "generate_layout",
    "run_drop",
    "run_experiment",
    "se_from_sinr",
    "solve_power_subproblem",
    "solve_weight_subproblem",
]
