"""Bandit environments: reward models, noisy observations, and regret accounting.

A reward model pairs an arm space with a closed-form mean-reward function and
Gaussian observation noise.  Every model is immutable, so a single instance can
be shared across concurrently running replications; randomness always comes
from a caller-supplied generator.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

Arm = Union[int, float, tuple]

# Phase labels recorded in run traces.
ORACLE_STEP = "oracle_step"
FORCED_SAMPLE = "forced_sample"
LCB_TEST = "lcb_test"
PHASES = (ORACLE_STEP, FORCED_SAMPLE, LCB_TEST)


@dataclass(frozen=True)
class FiniteArms:
    """K-armed model: arm k pays ``means[k]`` plus N(0, noise_std^2) noise."""

    means: tuple
    noise_std: float = 1.0
    kind = "finite"

    def __post_init__(self):
        if len(self.means) == 0:
            raise ValueError("finite model needs at least one arm")
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))

    @property
    def n_arms(self) -> int:
        return len(self.means)

    def mean(self, arm) -> float:
        if not isinstance(arm, (int, np.integer)) or not 0 <= arm < self.n_arms:
            raise ValueError(f"arm {arm!r} not a valid index for {self.n_arms} arms")
        return self.means[arm]

    def noise_scale(self, arm) -> float:
        return self.noise_std

    def best(self):
        # ties broken toward the lowest index
        best_k = max(range(self.n_arms), key=lambda k: (self.means[k], -k))
        return best_k, self.means[best_k]

    def random_arm(self, rng) -> int:
        return int(rng.integers(self.n_arms))


@dataclass(frozen=True)
class Parabola1D:
    """Concave quadratic on an interval: r(x) = peak_value - curvature*(x - peak_x)^2."""

    peak_x: float
    peak_value: float
    curvature: float
    lo: float = 0.0
    hi: float = 1.0
    noise_std: float = 1.0
    kind = "concave1d"

    def __post_init__(self):
        if self.curvature < 0:
            raise ValueError("curvature must be >= 0 for a concave parabola")
        if not self.lo < self.hi:
            raise ValueError("empty domain")

    def mean(self, arm) -> float:
        x = float(arm)
        if not self.lo <= x <= self.hi:
            raise ValueError(f"arm {arm!r} outside domain [{self.lo}, {self.hi}]")
        return self.peak_value - self.curvature * (x - self.peak_x) ** 2

    def noise_scale(self, arm) -> float:
        return self.noise_std

    def best(self):
        x = min(max(self.peak_x, self.lo), self.hi)
        return x, self.mean(x)

    def random_arm(self, rng) -> float:
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class LipschitzBump:
    """Capped Gaussian bump on a box: r(x) = min(cap, height*exp(-rate*||x-center||_2^2)).

    ``lipschitz`` stores the declared Lipschitz constant (sup-norm sense) of the
    instance; it is a design constant of the instance definition, consumed by
    oracles that need a smoothness scale.
    """

    center: tuple
    height: float = 3.0
    rate: float = 100.0
    cap: float = 1.0
    lo: float = 0.0
    hi: float = 1.0
    lipschitz: float = 26.0
    noise_std: float = 1.0
    kind = "lipschitz"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    def mean(self, arm) -> float:
        x = arm if isinstance(arm, tuple) else (float(arm),)
        if len(x) != self.dim:
            raise ValueError(f"arm {arm!r} has wrong dimension (want {self.dim})")
        if any(not self.lo <= xi <= self.hi for xi in x):
            raise ValueError(f"arm {arm!r} outside box [{self.lo}, {self.hi}]^{self.dim}")
        d2 = sum((xi - ci) ** 2 for xi, ci in zip(x, self.center))
        return min(self.cap, self.height * math.exp(-self.rate * d2))

    def noise_scale(self, arm) -> float:
        return self.noise_std

    def best(self):
        return self.center, min(self.cap, self.height)

    def random_arm(self, rng) -> tuple:
        return tuple(float(v) for v in rng.uniform(self.lo, self.hi, size=self.dim))


@dataclass(frozen=True)
class LinearDemandPricing:
    """Dynamic pricing with linear demand: posting price p sells g - h*p + eps units.

    The observed reward is the revenue p*(g - h*p + eps) with eps ~ N(0,
    demand_noise_std^2), so the revenue noise scale is p*demand_noise_std.
    Mean revenue is p*(g - h*p).  Revenue is in model units and may exceed 1.
    """

    g: float
    h: float
    p_lo: float = 0.0
    p_hi: float = 4.0
    demand_noise_std: float = 1.0
    kind = "pricing"

    def mean(self, arm) -> float:
        p = float(arm)
        if not self.p_lo <= p <= self.p_hi:
            raise ValueError(f"price {arm!r} outside [{self.p_lo}, {self.p_hi}]")
        return p * (self.g - self.h * p)

    def noise_scale(self, arm) -> float:
        return abs(float(arm)) * self.demand_noise_std

    def best(self):
        p = min(max(self.g / (2.0 * self.h), self.p_lo), self.p_hi)
        return p, self.mean(p)

    def random_arm(self, rng) -> float:
        return float(rng.uniform(self.p_lo, self.p_hi))


RewardModel = Union[FiniteArms, Parabola1D, LipschitzBump, LinearDemandPricing]


def mean_reward(model: RewardModel, arm: Arm) -> float:
    """Exact mean reward of ``arm`` (closed form, no noise)."""
    return model.mean(arm)


def pull(model: RewardModel, arm: Arm, rng) -> float:
    """One noisy observation of ``arm``."""
    scale = model.noise_scale(arm)
    mu = model.mean(arm)
    if scale == 0.0:
        return mu
    return mu + scale * rng.standard_normal()


def pull_block(model: RewardModel, arm: Arm, n: int, rng) -> np.ndarray:
    """``n`` noisy observations of a fixed arm as one vectorized draw."""
    mu = model.mean(arm)
    scale = model.noise_scale(arm)
    if scale == 0.0:
        return np.full(n, mu)
    return mu + scale * rng.standard_normal(n)


def best_mean(model: RewardModel):
    """The maximizing arm and its mean reward, (A*, r(A*))."""
    return model.best()


def grid_best(model: RewardModel, step: float = 1e-5):
    """Grid-search argmax for 1-D models; deterministic tie-break toward the
    smaller coordinate.  Used as a cross-check for the closed-form optimum."""
    if isinstance(model, Parabola1D):
        lo, hi = model.lo, model.hi
    elif isinstance(model, LinearDemandPricing):
        lo, hi = model.p_lo, model.p_hi
    else:
        raise ValueError(f"grid_best supports 1-D models, not {model.kind}")
    xs = np.arange(lo, hi + step / 2, step)
    vals = np.array([model.mean(float(x)) for x in xs])
    j = int(np.argmax(vals))
    return float(xs[j]), float(vals[j])


def random_arm(model: RewardModel, rng) -> Arm:
    return model.random_arm(rng)


def satisficing_gap(model: RewardModel, S: float, probe_step: float = 1e-3):
    """Smallest deficit S - r(A) among arms strictly below S.

    Exact for finite models.  Continuum models have continuous means, so the
    gap is reported as 0 whenever grid probing at ``probe_step`` finds
    adjacent points straddling S (means approach S from below); otherwise
    None (no sub-threshold arm detected at the probe resolution).
    """
    if isinstance(model, FiniteArms):
        deficits = [S - m for m in model.means if m < S]
        return min(deficits) if deficits else None
    if isinstance(model, (Parabola1D, LinearDemandPricing)):
        lo, hi = ((model.lo, model.hi) if isinstance(model, Parabola1D)
                  else (model.p_lo, model.p_hi))
        xs = np.arange(lo, hi + probe_step / 2, probe_step)
        vals = np.array([model.mean(float(x)) for x in xs])
        straddle = _adjacent_straddle(vals, S)
    else:
        axis = np.arange(model.lo, model.hi + probe_step / 2, probe_step)
        grids = np.meshgrid(*([axis] * model.dim), indexing="ij")
        d2 = sum((g - c) ** 2 for g, c in zip(grids, model.center))
        vals = np.minimum(model.cap, model.height * np.exp(-model.rate * d2))
        straddle = any(_adjacent_straddle(vals, S, axis=ax)
                       for ax in range(model.dim))
    if straddle:
        return 0.0
    return None


def _adjacent_straddle(vals: np.ndarray, S: float, axis: int = 0) -> bool:
    lo = np.take(vals, range(vals.shape[axis] - 1), axis=axis)
    hi = np.take(vals, range(1, vals.shape[axis]), axis=axis)
    return bool((((lo < S) & (hi >= S)) | ((hi < S) & (lo >= S))).any())


# ---------------------------------------------------------------------------
# Run traces and regret summaries
# ---------------------------------------------------------------------------

@dataclass
class TraceStep:
    t: int
    arm: Arm
    reward: float
    phase: str
    round_index: int


@dataclass
class RunTrace:
    steps: list
    horizon: int

    def validate(self) -> None:
        if len(self.steps) != self.horizon:
            raise ValueError(f"trace has {len(self.steps)} steps, horizon {self.horizon}")
        prev_round = 0
        for j, s in enumerate(self.steps, start=1):
            if s.t != j:
                raise ValueError(f"step index {s.t} at position {j}")
            if s.round_index < prev_round:
                raise ValueError("round indices must be non-decreasing")
            if s.phase not in PHASES:
                raise ValueError(f"unknown phase {s.phase!r}")
            prev_round = s.round_index


@dataclass
class RoundBreakdown:
    round_index: int
    satisficing_regret: float
    oracle_steps: int
    forced_steps: int
    test_steps: int


@dataclass
class RegretSummary:
    satisficing_regret: float
    standard_regret: float
    per_round: list
    S: float
    best_mean: float
    exceeding_gap: float
    satisficing_gap: float | None = None


def summarize(model: RewardModel, trace: RunTrace, S: float) -> RegretSummary:
    """Both regret notions of a trace, with a per-round decomposition.

    Satisficing regret sums max(S - r(A_t), 0); standard regret is
    T*r(A*) - sum_t r(A_t).  The exceeding gap r(A*) - S may be negative when
    no arm meets the threshold.
    """
    _, star = model.best()
    mean_cache: dict = {}
    rounds: dict = {}
    sat = 0.0
    tot_mean = 0.0
    for s in trace.steps:
        mu = mean_cache.get(s.arm)
        if mu is None:
            mu = model.mean(s.arm)
            mean_cache[s.arm] = mu
        tot_mean += mu
        deficit = S - mu
        r = rounds.get(s.round_index)
        if r is None:
            r = rounds[s.round_index] = RoundBreakdown(s.round_index, 0.0, 0, 0, 0)
        if deficit > 0:
            sat += deficit
            r.satisficing_regret += deficit
        if s.phase == ORACLE_STEP:
            r.oracle_steps += 1
        elif s.phase == FORCED_SAMPLE:
            r.forced_steps += 1
        else:
            r.test_steps += 1
    per_round = [rounds[i] for i in sorted(rounds)]
    return RegretSummary(
        satisficing_regret=sat,
        standard_regret=trace.horizon * star - tot_mean,
        per_round=per_round,
        S=S,
        best_mean=star,
        exceeding_gap=star - S,
        satisficing_gap=satisficing_gap(model, S),
    )


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------

_MODEL_KINDS = {
    "finite": FiniteArms,
    "concave1d": Parabola1D,
    "lipschitz": LipschitzBump,
    "pricing": LinearDemandPricing,
}


def model_from_dict(d: dict) -> RewardModel:
    """Build a reward model from a JSON-shaped dict (see README for fields)."""
    d = dict(d)
    kind = d.pop("kind")
    try:
        cls = _MODEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}") from None
    for key in ("means", "center"):
        if key in d and isinstance(d[key], list):
            d[key] = tuple(d[key])
    return cls(**d)


def model_to_dict(model: RewardModel) -> dict:
    d = {"kind": model.kind}
    for f in model.__dataclass_fields__:
        v = getattr(model, f)
        d[f] = list(v) if isinstance(v, tuple) else v
    return d


def load_instance(path):
    """Read an instance file: the model fields plus the satisficing level S."""
    with open(Path(path)) as fh:
        d = json.load(fh)
    S = d.pop("S")
    return model_from_dict(d), float(S)
