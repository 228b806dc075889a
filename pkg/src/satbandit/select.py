"""Round-based satisficing search: oracle-driven candidate identification,
forced sampling, and lower-confidence-bound testing.

Each round i (1) runs a learning oracle for t_i steps and samples a candidate
arm uniformly from its trajectory, (2) force-pulls the candidate T_i times,
and (3) keeps pulling it while the LCB of its mean stays at or above the
satisficing level S.  The round schedule shrinks gamma_i geometrically;
t_i = ceil(gamma_i^(-1/(1-alpha))) and T_i = ceil(gamma_i^(-2)) follow from
the oracle's regret exponent alpha.  A non-satisficing candidate fails the LCB
test within one extra pull in expectation, so rounds cycle until a satisficing
candidate survives the test indefinitely.

The module also hosts the generic round engine reused by the light-tailed
variants, plus the ablation switches (drop any one of the three steps) and the
gamma_scale multiplier used by the schedule-robustness experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import (
    FORCED_SAMPLE,
    LCB_TEST,
    ORACLE_STEP,
    RewardModel,
    RunTrace,
    TraceStep,
    random_arm,
)
from .oracles import OracleParams, new_session

FULL = "full"
SKIP_STEP1 = "skip_step1"
SKIP_STEP2 = "skip_step2"
SKIP_STEP3 = "skip_step3"
ABLATIONS = (FULL, SKIP_STEP1, SKIP_STEP2, SKIP_STEP3)


@dataclass
class SelectConfig:
    """Knobs for one satisficing-search episode.

    ``params`` supplies the oracle regret exponent alpha driving the round
    schedule; ``gamma_scale`` multiplies every gamma_i; ``fresh_oracle``
    controls whether each round restarts the learning oracle from scratch or
    keeps one session learning across rounds.
    """

    S: float
    params: OracleParams
    horizon: int
    oracle_kind: str
    gamma_scale: float = 1.0
    ablation: str = FULL
    seed: int | None = None
    fresh_oracle: bool = True
    oracle_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.gamma_scale <= 0:
            raise ValueError("gamma_scale must be > 0")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"unknown ablation {self.ablation!r}")


_PHASE_CAP = 1 << 62  # longer than any horizon; the runner truncates phases


def _snap_ceil(x: float) -> int:
    # Ceiling with a 1e-9 relative snap so exact powers survive float round-off.
    if x >= _PHASE_CAP:
        return _PHASE_CAP
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def schedule(i: int, params: OracleParams, gamma_scale: float = 1.0):
    """Round-i schedule (gamma_i, t_i, T_i) with gamma_i = scale * 2^(-i(1-a)/a)."""
    if i < 1:
        raise ValueError("round index starts at 1")
    a = params.alpha
    gamma = gamma_scale * 2.0 ** (-i * (1.0 - a) / a)
    t_i = _snap_ceil(gamma ** (-1.0 / (1.0 - a)))
    big_t = _snap_ceil(gamma ** -2.0)
    return gamma, t_i, big_t


def lcb(r_tot: float, n: int) -> float:
    """Empirical mean of n pulls minus the radius sqrt(4*log(n)/n)."""
    if n < 1:
        raise ValueError("lcb needs at least one sample")
    return r_tot / n - math.sqrt(4.0 * math.log(n) / n)


def _select_radius(n0, ks):
    n = n0 + ks
    return np.sqrt(4.0 * np.log(n) / n)


@dataclass
class RoundRecord:
    index: int
    gamma: float
    oracle_plan: int
    forced_plan: int
    oracle_steps: int
    forced_steps: int
    test_steps: int
    candidate: object
    reward_total: float
    ended_by_exit: bool


@dataclass
class RunResult:
    """One simulated episode: optional full trace plus online regret totals."""

    trace: RunTrace | None
    rounds: list
    satisficing_regret: float
    standard_regret: float
    horizon: int

    @property
    def rounds_used(self) -> int:
        return len(self.rounds)


class _Recorder:
    """Accumulates step counts, regrets, and (optionally) the full trace."""

    def __init__(self, model, S, horizon, want_trace):
        self.model = model
        self.S = S
        self.horizon = horizon
        _, self.best = model.best()
        self.total = 0
        self.sat = 0.0
        self.std = 0.0
        self._means: dict = {}
        self.steps = [] if want_trace else None

    def mean(self, arm):
        mu = self._means.get(arm)
        if mu is None:
            mu = self._means[arm] = self.model.mean(arm)
        return mu

    def add(self, arm, y, mu, phase, round_i):
        self.total += 1
        d = self.S - mu
        if d > 0:
            self.sat += d
        self.std += self.best - mu
        if self.steps is not None:
            self.steps.append(TraceStep(self.total, arm, float(y), phase, round_i))

    def add_block(self, arm, ys, mu, phase, round_i):
        b = len(ys)
        if b == 0:
            return
        d = self.S - mu
        if d > 0:
            self.sat += d * b
        self.std += (self.best - mu) * b
        if self.steps is not None:
            t0 = self.total
            self.steps.extend(
                TraceStep(t0 + j + 1, arm, float(ys[j]), phase, round_i)
                for j in range(b))
        self.total += b

    def result(self, rounds) -> RunResult:
        trace = RunTrace(self.steps, self.horizon) if self.steps is not None else None
        return RunResult(trace, rounds, self.sat, self.std, self.horizon)


def _oracle_phase(rec, model, sess, n1, rng, round_i):
    if n1 <= 0:
        return
    noise = rng.standard_normal(n1)
    for j in range(n1):
        arm = sess.select_arm()
        mu = rec.mean(arm)
        y = mu + model.noise_scale(arm) * noise[j]
        sess.observe(y)
        rec.add(arm, y, mu, ORACLE_STEP, round_i)


def _forced_phase(rec, model, cand, plan, rng, round_i):
    n2 = min(plan, rec.horizon - rec.total)
    mu = rec.mean(cand)
    scale = model.noise_scale(cand)
    ys = mu + scale * rng.standard_normal(n2)
    rec.add_block(cand, ys, mu, FORCED_SAMPLE, round_i)
    return n2, float(ys.sum())


def _lcb_test(rec, model, cand, S, n0, r_tot, radius_fn, rng, round_i):
    """The while-loop of Step 3.

    The guard is evaluated before every extra pull, starting at k = 0 from the
    n0 samples already collected.  With n0 == 0 (forced sampling skipped) the
    first pull is unconditional and the guard starts at k = 1.  Observations
    are drawn in growing blocks; unused draws in a block are discarded, which
    keeps trace and no-trace runs identical for a given generator state.
    Returns (k, r_tot, ended_by_exit).
    """
    mu = rec.mean(cand)
    scale = model.noise_scale(cand)
    k = 0
    if n0 == 0:
        if rec.total >= rec.horizon:
            return 0, r_tot, False
        y = mu + scale * float(rng.standard_normal())
        k = 1
        r_tot += y
        rec.add(cand, y, mu, LCB_TEST, round_i)
    elif r_tot / n0 - float(radius_fn(n0, 0)) < S:
        return 0, r_tot, True
    block = 16
    while True:
        if k > 0 and r_tot / (n0 + k) - float(radius_fn(n0, k)) < S:
            return k, r_tot, True
        b = min(block, rec.horizon - rec.total)
        if b <= 0:
            return k, r_tot, False
        ys = mu + scale * rng.standard_normal(b)
        csum = np.cumsum(ys)
        ks = k + 1 + np.arange(b)
        lcbs = (r_tot + csum) / (n0 + ks) - radius_fn(n0, ks)
        fail = np.nonzero(lcbs < S)[0]
        j = int(fail[0]) + 1 if fail.size else b
        rec.add_block(cand, ys[:j], mu, LCB_TEST, round_i)
        r_tot += float(csum[j - 1])
        k += j
        if fail.size:
            return k, r_tot, True
        block = min(block * 2, 4096)


def _most_pulled(traj):
    counts: dict = {}
    sums: dict = {}
    order: dict = {}
    for pos, (arm, y) in enumerate(traj):
        counts[arm] = counts.get(arm, 0) + 1
        sums[arm] = sums.get(arm, 0.0) + y
        order.setdefault(arm, pos)
    # most pulls first; ties broken toward the lowest arm index
    cand = min(counts, key=lambda a: (-counts[a], a))
    return cand, counts[cand], sums[cand]


def run_rounds(model, cfg, rng, schedule_fn, radius_fn, *,
               most_pulled=False, use_forced=True, trace=True) -> RunResult:
    """Generic round loop shared by the algorithm variants.

    ``schedule_fn(i)`` yields (gamma_i, t_i, T_i); ``radius_fn(n0, k)`` is the
    vectorized confidence radius of the LCB test after k extra pulls on top of
    n0 initial samples.  ``most_pulled`` switches the candidate rule from
    uniform-trajectory sampling to the most-frequently-pulled arm with reuse
    of its in-round observations; ``use_forced`` enables Step 2.  Phases are
    truncated at the horizon, which ends the episode mid-phase.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    rec = _Recorder(model, cfg.S, cfg.horizon, trace)
    rounds: list = []
    sess = None
    i = 0
    while rec.total < cfg.horizon:
        i += 1
        gamma, t_i, big_t = schedule_fn(i)
        n1 = 0
        cand = None
        n0 = 0
        r_tot = 0.0
        if cfg.ablation == SKIP_STEP1:
            cand = random_arm(model, rng)
        else:
            if cfg.fresh_oracle:
                sess = new_session(cfg.oracle_kind, model, max(t_i, 2), rng,
                                   **cfg.oracle_options)
            elif sess is None:
                sess = new_session(cfg.oracle_kind, model, max(cfg.horizon, 2), rng,
                                   **cfg.oracle_options)
            start = sess.steps_taken
            n1 = min(t_i, cfg.horizon - rec.total)
            _oracle_phase(rec, model, sess, n1, rng, i)
            traj = sess.trajectory[start:]
            if rec.total >= cfg.horizon:
                rounds.append(RoundRecord(i, gamma, t_i, big_t if use_forced else 0,
                                          n1, 0, 0, None, 0.0, False))
                break
            if most_pulled:
                cand, n0, r_tot = _most_pulled(traj)
            else:
                cand = traj[int(rng.integers(len(traj)))][0]
        forced_steps = 0
        truncated = False
        if use_forced and cfg.ablation != SKIP_STEP2 and not most_pulled:
            forced_steps, r_tot = _forced_phase(rec, model, cand, big_t, rng, i)
            n0 = forced_steps
            truncated = forced_steps < big_t
        r_before_test = r_tot
        k = 0
        exited = False
        if cfg.ablation != SKIP_STEP3 and not truncated:
            k, r_tot, exited = _lcb_test(rec, model, cand, cfg.S, n0, r_tot,
                                         radius_fn, rng, i)
        if not cfg.fresh_oracle and sess is not None:
            # a persistent learner conditions on every pull of the candidate;
            # reused in-session history (most_pulled) is already known to it
            if most_pulled:
                if k > 0:
                    sess.absorb(cand, r_tot - r_before_test, k)
            elif forced_steps + k > 0:
                sess.absorb(cand, r_tot, forced_steps + k)
        rounds.append(RoundRecord(i, gamma, t_i, big_t if use_forced else 0,
                                  n1, forced_steps, k, cand, r_tot, exited))
    return rec.result(rounds)


def run_select(model: RewardModel, cfg: SelectConfig, rng=None, trace=True) -> RunResult:
    """Run one episode of the full three-step algorithm (or an ablated variant)."""
    return run_rounds(
        model, cfg, rng,
        schedule_fn=lambda i: schedule(i, cfg.params, cfg.gamma_scale),
        radius_fn=_select_radius,
        trace=trace,
    )
