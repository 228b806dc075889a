"""Satisficing bandit algorithms and their Monte-Carlo experiment harness."""

from .env import (
    FiniteArms,
    LinearDemandPricing,
    LipschitzBump,
    Parabola1D,
    RegretSummary,
    RunTrace,
    best_mean,
    load_instance,
    mean_reward,
    pull,
    summarize,
)
from .oracles import OracleParams, new_session, oracle_params
from .select import SelectConfig, lcb, run_select, schedule
from .select_lite import (
    LiteConfig,
    lite_lcb,
    lite_radius_constant,
    lite_schedule,
    run_select_lite,
)
from .select_lite_plus import run_select_lite_plus
from .harness import ExperimentSpec, PRESETS, calibrate_pricing, run_experiment

__all__ = [
    "FiniteArms", "LinearDemandPricing", "LipschitzBump", "Parabola1D",
    "RegretSummary", "RunTrace", "best_mean", "load_instance", "mean_reward",
    "pull", "summarize",
    "OracleParams", "new_session", "oracle_params",
    "SelectConfig", "lcb", "run_select", "schedule",
    "LiteConfig", "lite_lcb", "lite_radius_constant", "lite_schedule",
    "run_select_lite", "run_select_lite_plus",
    "ExperimentSpec", "PRESETS", "calibrate_pricing", "run_experiment",
]
