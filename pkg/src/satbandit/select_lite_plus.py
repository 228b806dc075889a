"""Light-tailed variant for finite arm sets that reuses oracle history.

Forced sampling is dropped entirely: the candidate of round i is the arm the
oracle pulled most frequently (ties to the lowest index), its in-round pull
count tau_i and reward sum seed the LCB test directly, and the radius doubles
the tail exponent term: sqrt((2*k^zeta + D) / (tau_i + k)).  The round
schedule stays geometric.  A most-pulled arm has tau_i >= floor(t_i / K) by
pigeonhole, so the test starts from a usefully tight interval without paying
for dedicated samples.

The radius denominator counts the candidate's own pulls (tau_i + k); the
doubled k^zeta term compensates for reusing adaptively collected history.
"""
from __future__ import annotations

import numpy as np

from .env import FiniteArms, RewardModel
from .oracles import OracleConfigError
from .select import RunResult, run_rounds, schedule
from .select_lite import LiteConfig


def lite_plus_radius(n0, ks, zeta: float, D: float):
    """Vectorized doubled-exponent radius sqrt((2*k^zeta + D) / (n0 + k))."""
    ks = np.asarray(ks, dtype=float)
    return np.sqrt((2.0 * ks ** zeta + D) / (n0 + ks))


def run_select_lite_plus(model: RewardModel, cfg: LiteConfig, rng=None,
                         trace=True) -> RunResult:
    """One episode of the history-reusing finite-armed variant."""
    if not isinstance(model, FiniteArms):
        raise OracleConfigError("this variant is defined for finite arm sets only")
    D = cfg.radius_constant
    return run_rounds(
        model, cfg, rng,
        schedule_fn=lambda i: schedule(i, cfg.params, cfg.gamma_scale),
        radius_fn=lambda n0, ks: lite_plus_radius(n0, ks, cfg.zeta, D),
        most_pulled=True,
        use_forced=False,
        trace=trace,
    )
