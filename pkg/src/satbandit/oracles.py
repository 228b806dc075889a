"""Standard-regret learning oracles behind a uniform session interface.

Each oracle is a sequential learner for one problem class, run for a fixed
horizon through ``select_arm()`` / ``observe()`` pairs.  A session records its
full arm-pull trajectory, which the round-based algorithms sample candidates
from.  ``oracle_params`` exports the (C1, alpha, beta) constants of each
oracle's expected-regret bound C1 * t^alpha * log(t)^beta; only alpha feeds the
round schedules, C1 and beta are declarative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import (
    FiniteArms,
    LinearDemandPricing,
    LipschitzBump,
    Parabola1D,
    RewardModel,
)


class OracleConfigError(ValueError):
    """Oracle/model pairing or horizon is invalid."""


class SessionProtocolError(RuntimeError):
    """select_arm/observe called out of order or past the horizon."""


@dataclass(frozen=True)
class OracleParams:
    """Constants of a sublinear expected-regret bound C1 * t^alpha * log(t)^beta."""

    c1: float
    alpha: float
    beta: float

    def __post_init__(self):
        if self.c1 < 1.0:
            raise ValueError("c1 must be >= 1")
        if not 0.5 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [1/2, 1)")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class TailCapability:
    """Optional declaration that an oracle's regret distribution is light-tailed.

    ``k_exponent`` and ``t_exponent`` document the K- and t-powers of the
    oracle's expected-regret bound in that regime; nothing at runtime computes
    with them.  None of the built-in oracles declare this capability.
    """

    k_exponent: float
    t_exponent: float


class OracleSession:
    """One run of a learner over a fixed horizon, with protocol checks.

    Exactly one ``observe`` must follow each ``select_arm``; sessions refuse
    steps beyond their horizon.  ``trajectory`` holds (arm, observed reward)
    pairs in play order.
    """

    tail_capability: TailCapability | None = None

    def __init__(self, horizon: int, rng):
        if horizon < 2:
            raise OracleConfigError(f"oracle horizon must be >= 2, got {horizon}")
        self.horizon = int(horizon)
        self.rng = rng
        self.trajectory: list = []
        self._pending = None

    @property
    def steps_taken(self) -> int:
        return len(self.trajectory)

    def select_arm(self):
        if self._pending is not None:
            raise SessionProtocolError("observe() must follow the previous select_arm()")
        if self.steps_taken >= self.horizon:
            raise SessionProtocolError("session horizon exhausted")
        arm = self._choose()
        self._pending = arm
        return arm

    def observe(self, reward: float) -> None:
        if self._pending is None:
            raise SessionProtocolError("observe() without a preceding select_arm()")
        arm = self._pending
        self._pending = None
        self.trajectory.append((arm, float(reward)))
        self._update(arm, float(reward))

    def _choose(self):
        raise NotImplementedError

    def _update(self, arm, reward: float) -> None:
        raise NotImplementedError

    def absorb(self, arm, reward_sum: float, count: int) -> None:
        """Fold observations collected outside the session into the learner
        state, without touching the trajectory or the step budget.

        Used by persistent sessions so the learner conditions on every pull of
        an arm, not only on its own.  Oracles without a meaningful way to
        ingest off-policy data ignore the call.
        """


def _ucb_bonus_scale(step: int) -> float:
    # exploration scale 2*log(1 + t*log(t)^2) of the index at step t
    lt = math.log(step) if step > 1 else 0.0
    return 2.0 * math.log(1.0 + step * lt * lt)


class FiniteUCBSession(OracleSession):
    """UCB over K arms: one initialization pull each, then argmax of
    mean + sqrt(2*log(1 + t*log(t)^2) / n); ties go to the lowest index."""

    def __init__(self, n_arms: int, horizon: int, rng):
        super().__init__(horizon, rng)
        self.n_arms = int(n_arms)
        self.counts = np.zeros(self.n_arms)
        self.sums = np.zeros(self.n_arms)

    def current_indexes(self):
        """Index values for the upcoming step, or None during the init sweep."""
        if self.steps_taken < self.n_arms:
            return None
        scale = _ucb_bonus_scale(self.steps_taken + 1)
        return self.sums / self.counts + np.sqrt(scale / self.counts)

    def _choose(self) -> int:
        if self.steps_taken < self.n_arms:
            return self.steps_taken
        return int(np.argmax(self.current_indexes()))

    def _update(self, arm, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward

    def absorb(self, arm, reward_sum: float, count: int) -> None:
        self.counts[arm] += count
        self.sums[arm] += reward_sum


class GaussianThompsonSession(OracleSession):
    """Thompson sampling with a N(0,1) prior and unit-variance observations.

    Posterior of arm k after n pulls summing to s is N(s/(n+1), 1/(n+1)).  All
    posterior draws come from a block pre-drawn at construction so a session
    is bit-for-bit reproducible from its generator state.  Scalar state keeps
    the per-step cost low for the small arm counts this oracle is used with.
    """

    def __init__(self, n_arms: int, horizon: int, rng):
        super().__init__(horizon, rng)
        self.n_arms = int(n_arms)
        self.counts = [0] * self.n_arms
        self.sums = [0.0] * self.n_arms
        self._z = rng.standard_normal(self.horizon * self.n_arms).tolist()

    def _choose(self) -> int:
        z = self._z
        base = len(self.trajectory) * self.n_arms
        best = -math.inf
        pick = 0
        for k in range(self.n_arms):
            w = 1.0 / (self.counts[k] + 1.0)
            s = self.sums[k] * w + math.sqrt(w) * z[base + k]
            if s > best:
                best = s
                pick = k
        return pick

    def _update(self, arm, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward

    def absorb(self, arm, reward_sum: float, count: int) -> None:
        self.counts[arm] += count
        self.sums[arm] += reward_sum


def grid_side(t: int, dim: int, scale: float) -> int:
    """Per-axis cell count of the uniform discretization for a session of
    length t: ceil((scale^2 * t / log(max(t, 3)))^(1/(dim+2)))."""
    v = (scale * scale * t / math.log(max(t, 3))) ** (1.0 / (dim + 2))
    return max(1, math.ceil(v))


class UniformGridUCBSession(OracleSession):
    """Continuum-armed UCB: discretize the box into m^d cells and run the
    finite UCB index on the cell centers.

    ``grid_scale`` sets the smoothness scale of the discretization rule; it
    defaults to the instance's declared Lipschitz constant but is exposed as a
    hyperparameter because the rule's rate is unchanged by constant rescaling.
    """

    def __init__(self, dim: int, horizon: int, rng, lo=0.0, hi=1.0, grid_scale=1.0):
        super().__init__(horizon, rng)
        self.dim = int(dim)
        self.m = grid_side(self.horizon, self.dim, grid_scale)
        axis = (lo + (hi - lo) * (2 * np.arange(self.m) + 1) / (2 * self.m))
        if self.dim == 1:
            centers = [float(x) for x in axis]
        else:
            grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
            centers = [tuple(float(g.ravel()[j]) for g in grids)
                       for j in range(self.m ** self.dim)]
        self.centers = centers
        self.n_cells = len(centers)
        self.counts = np.zeros(self.n_cells)
        self.sums = np.zeros(self.n_cells)
        self._cell_of = {c: j for j, c in enumerate(centers)}
        self._last_cell = None

    def _choose(self):
        if self.steps_taken < self.n_cells:
            cell = self.steps_taken
        else:
            scale = _ucb_bonus_scale(self.steps_taken + 1)
            cell = int(np.argmax(self.sums / self.counts + np.sqrt(scale / self.counts)))
        self._last_cell = cell
        return self.centers[cell]

    def _update(self, arm, reward: float) -> None:
        self.counts[self._last_cell] += 1
        self.sums[self._last_cell] += reward

    def absorb(self, arm, reward_sum: float, count: int) -> None:
        cell = self._cell_of.get(arm)
        if cell is not None:
            self.counts[cell] += count
            self.sums[cell] += reward_sum


class EpochTrisectionSession(OracleSession):
    """Noisy trisection for 1-D concave rewards.

    Keeps a working interval [l, r]; each epoch pulls the three interior
    points l + w/4, l + w/2, l + 3w/4 in round robin until the confidence
    intervals (radius sqrt(2*log(horizon)/n)) certify one endpoint probe worse
    than another probe, then discards the quarter adjacent to the certified
    loser and starts a fresh epoch.  Concavity guarantees the discarded
    quarter cannot contain the maximizer.
    """

    def __init__(self, horizon: int, rng, lo=0.0, hi=1.0):
        super().__init__(horizon, rng)
        self.lo = float(lo)
        self.hi = float(hi)
        self._log_h = math.log(self.horizon)
        self._start_epoch(self.lo, self.hi)

    def _start_epoch(self, l: float, r: float) -> None:
        self.l, self.r = l, r
        w = r - l
        self.probes = (l + w / 4, l + w / 2, l + 3 * w / 4)
        self.e_counts = [0, 0, 0]
        self.e_sums = [0.0, 0.0, 0.0]
        self._last_probe = None

    def _radius(self, n: int) -> float:
        return math.sqrt(2.0 * self._log_h / n)

    def _choose(self) -> float:
        j = min(range(3), key=lambda q: (self.e_counts[q], q))
        self._last_probe = j
        return self.probes[j]

    def _update(self, arm, reward: float) -> None:
        j = self._last_probe
        self.e_counts[j] += 1
        self.e_sums[j] += reward
        if min(self.e_counts) == 0:
            return
        means = [self.e_sums[q] / self.e_counts[q] for q in range(3)]
        rads = [self._radius(self.e_counts[q]) for q in range(3)]
        others_lo = max(means[1] - rads[1], means[2] - rads[2])
        if means[0] + rads[0] < others_lo:
            self._start_epoch(self.probes[0], self.r)
        else:
            others_lo = max(means[0] - rads[0], means[1] - rads[1])
            if means[2] + rads[2] < others_lo:
                self._start_epoch(self.l, self.probes[2])


class PricingLinUCBSession(OracleSession):
    """Optimistic pricing over a linear demand model.

    Mean revenue is linear in theta = (g, h) through features phi(p) =
    (p, -p^2).  The session keeps a ridge-regression estimate (regularization
    ``reg``) over a uniform price grid and posts the price maximizing
    phi(p)'theta_hat + width * ||phi(p)||_{V^-1}, width = sqrt(2*log(t)) + 1.
    """

    def __init__(self, horizon: int, rng, p_lo=0.0, p_hi=4.0, n_grid=401, reg=1.0):
        super().__init__(horizon, rng)
        prices = np.linspace(p_lo, p_hi, n_grid)
        self.prices = prices
        self.phi = np.column_stack([prices, -prices ** 2])
        self.v = reg * np.eye(2)
        self.b = np.zeros(2)
        self._vinv = np.linalg.inv(self.v)
        self._last_idx = None

    def _choose(self) -> float:
        theta = self._vinv @ self.b
        width = math.sqrt(2.0 * math.log(max(self.steps_taken + 1, 1))) + 1.0
        conf = np.sqrt(np.einsum("ij,jk,ik->i", self.phi, self._vinv, self.phi))
        idx = int(np.argmax(self.phi @ theta + width * conf))
        self._last_idx = idx
        return float(self.prices[idx])

    def _update(self, arm, reward: float) -> None:
        p = float(arm)
        self._ingest(np.array([p, -p * p]), reward, 1)

    def absorb(self, arm, reward_sum: float, count: int) -> None:
        p = float(arm)
        self._ingest(np.array([p, -p * p]), reward_sum, count)

    def _ingest(self, f: np.ndarray, reward_sum: float, count: int) -> None:
        self.v += count * np.outer(f, f)
        self.b += reward_sum * f
        a, b_, c, d = self.v[0, 0], self.v[0, 1], self.v[1, 0], self.v[1, 1]
        det = a * d - b_ * c
        self._vinv = np.array([[d, -b_], [-c, a]]) / det


UCB = "ucb"
THOMPSON = "thompson"
GRID_UCB = "grid_ucb"
TRISECTION = "trisection"
LINUCB = "linucb"
ORACLE_KINDS = (UCB, THOMPSON, GRID_UCB, TRISECTION, LINUCB)

_COMPAT = {
    UCB: FiniteArms,
    THOMPSON: FiniteArms,
    GRID_UCB: LipschitzBump,
    TRISECTION: Parabola1D,
    LINUCB: LinearDemandPricing,
}


def default_oracle(model: RewardModel) -> str:
    for kind, cls in _COMPAT.items():
        if isinstance(model, cls):
            return THOMPSON if kind == UCB else kind
    raise OracleConfigError(f"no oracle for model kind {model.kind!r}")


def new_session(oracle_kind: str, model: RewardModel, horizon: int, rng,
                **options) -> OracleSession:
    """Fresh oracle session for ``model``'s structural class.

    Sessions see only the model's structure (arm counts, domains, smoothness
    constants), never its mean rewards.  Raises OracleConfigError for an
    incompatible pairing or a horizon below 2.
    """
    want = _COMPAT.get(oracle_kind)
    if want is None:
        raise OracleConfigError(f"unknown oracle kind {oracle_kind!r}")
    if not isinstance(model, want):
        raise OracleConfigError(
            f"oracle {oracle_kind!r} requires a {want.__name__} model, got {model.kind!r}")
    if oracle_kind == UCB:
        return FiniteUCBSession(model.n_arms, horizon, rng, **options)
    if oracle_kind == THOMPSON:
        return GaussianThompsonSession(model.n_arms, horizon, rng, **options)
    if oracle_kind == GRID_UCB:
        options.setdefault("grid_scale", model.lipschitz)
        return UniformGridUCBSession(model.dim, horizon, rng,
                                     lo=model.lo, hi=model.hi, **options)
    if oracle_kind == TRISECTION:
        return EpochTrisectionSession(horizon, rng, lo=model.lo, hi=model.hi)
    return PricingLinUCBSession(horizon, rng, p_lo=model.p_lo, p_hi=model.p_hi,
                                **options)


def oracle_params(oracle_kind: str, model: RewardModel, c1_linucb: float = 1.0) -> OracleParams:
    """Regret-bound constants (C1, alpha, beta) of each oracle.

    Finite UCB gets C1 = 11*sqrt(K), alpha = beta = 1/2; Thompson sampling
    reuses the finite-armed constants since its bound is of the same order.
    The 1-D trisection oracle carries C1 = 108/log(4/3), alpha = 1/2,
    beta = 3/2.  The uniform-grid oracle gets C1 = 12*L^(d/(d+2)),
    alpha = (d+1)/(d+2), beta = 1/2.  The pricing oracle uses alpha = 1/2,
    beta = 1 with a configurable C1.
    """
    if oracle_kind in (UCB, THOMPSON):
        if not isinstance(model, FiniteArms):
            raise OracleConfigError("finite-armed oracle constants need a finite model")
        return OracleParams(11.0 * math.sqrt(model.n_arms), 0.5, 0.5)
    if oracle_kind == TRISECTION:
        return OracleParams(108.0 / math.log(4.0 / 3.0), 0.5, 1.5)
    if oracle_kind == GRID_UCB:
        d = model.dim
        return OracleParams(12.0 * model.lipschitz ** (d / (d + 2)),
                            (d + 1) / (d + 2), 0.5)
    if oracle_kind == LINUCB:
        return OracleParams(max(1.0, c1_linucb), 0.5, 1.0)
    raise OracleConfigError(f"unknown oracle kind {oracle_kind!r}")
