import json
import math

import numpy as np
import pytest

from satbandit.env import (
    FiniteArms,
    LinearDemandPricing,
    LipschitzBump,
    Parabola1D,
    RunTrace,
    TraceStep,
    ORACLE_STEP,
    FORCED_SAMPLE,
    LCB_TEST,
    best_mean,
    grid_best,
    load_instance,
    mean_reward,
    model_from_dict,
    model_to_dict,
    pull,
    pull_block,
    satisficing_gap,
    summarize,
)

KARM = FiniteArms((0.6, 0.7, 0.8, 1.0))
PARABOLA = Parabola1D(peak_x=0.25, peak_value=1.0, curvature=16.0)
BUMP = LipschitzBump(center=(0.5, 0.7), lipschitz=3 * math.exp(-0.5) * math.sqrt(200))
PRICING = LinearDemandPricing(g=32724 / 4100, h=7678 / 4100)


def _trace(arms, model=KARM, phase=FORCED_SAMPLE):
    steps = [TraceStep(t + 1, a, model.mean(a), phase, 1) for t, a in enumerate(arms)]
    return RunTrace(steps, len(arms))


def test_mean_reward_examples():
    assert mean_reward(KARM, 3) == 1.0
    assert mean_reward(PARABOLA, 0.25) == 1.0
    assert mean_reward(BUMP, (0.5, 0.7)) == 1.0
    # closed form evaluated through integer arithmetic: 2*(32724 - 2*7678)/4100
    expect = 2 * (32724 - 2 * 7678) / 4100
    assert mean_reward(PRICING, 2.0) == pytest.approx(expect, rel=1e-15)
    assert expect == pytest.approx(8.47219512195122, abs=1e-11)


def test_mean_reward_domain_errors():
    with pytest.raises(ValueError):
        mean_reward(KARM, 4)
    with pytest.raises(ValueError):
        mean_reward(KARM, -1)
    with pytest.raises(ValueError):
        mean_reward(PARABOLA, 1.5)
    with pytest.raises(ValueError):
        mean_reward(BUMP, (0.5, 1.2))
    with pytest.raises(ValueError):
        mean_reward(BUMP, (0.5,))
    with pytest.raises(ValueError):
        mean_reward(PRICING, 4.5)


def test_pull_zero_noise_is_exact():
    rng = np.random.default_rng(0)
    model = FiniteArms((0.3, 0.9), noise_std=0.0)
    assert pull(model, 1, rng) == 0.9
    # zero price annihilates both mean and noise
    assert pull(PRICING, 0.0, rng) == 0.0


def test_pull_sample_mean_close():
    rng = np.random.default_rng(1)
    model = FiniteArms((0.5,))
    ys = pull_block(model, 0, 100_000, rng)
    assert abs(ys.mean() - 0.5) < 0.02


@pytest.mark.parametrize("model,arm", [
    (KARM, 2),
    (PARABOLA, 0.4),
    (BUMP, (0.45, 0.72)),
    (PRICING, 2.5),
])
def test_pull_matches_mean_every_kind(model, arm):
    rng = np.random.default_rng(7)
    n = 100_000
    ys = pull_block(model, arm, n, rng)
    tol = 4.0 * model.noise_scale(arm) / math.sqrt(n)
    assert abs(ys.mean() - model.mean(arm)) <= tol
    # scalar pull agrees in distribution scale
    one = np.array([pull(model, arm, rng) for _ in range(2000)])
    assert abs(one.mean() - model.mean(arm)) <= 4.0 * model.noise_scale(arm) / math.sqrt(2000)


def test_best_mean():
    arm, val = best_mean(KARM)
    assert (arm, val) == (3, 1.0)
    arm, val = best_mean(Parabola1D(peak_x=0.25, peak_value=1.0, curvature=16.0))
    assert (arm, val) == (0.25, 1.0)
    arm, val = best_mean(BUMP)
    assert arm == (0.5, 0.7) and val == 1.0
    # ties broken toward the lowest index
    assert best_mean(FiniteArms((0.4, 0.9, 0.9)))[0] == 1


def test_best_mean_pricing_matches_grid():
    arm, val = best_mean(PRICING)
    g_arm, g_val = grid_best(PRICING, step=1e-5)
    assert abs(val - g_val) <= 1e-6
    assert abs(arm - g_arm) <= 1e-4
    assert val == pytest.approx(8.5043, abs=1e-3)
    assert arm == pytest.approx(2.1310, abs=1e-3)


def test_best_mean_parabola_matches_grid():
    _, val = best_mean(PARABOLA)
    _, g_val = grid_best(PARABOLA, step=1e-5)
    assert abs(val - g_val) <= 1e-6


def test_summarize_examples():
    # pulling only the best arm with S below it: both regrets vanish
    tr = _trace([3] * 10)
    s = summarize(KARM, tr, 0.9)
    assert s.satisficing_regret == 0.0
    assert s.standard_regret == 0.0

    tr = _trace([0, 3])
    s = summarize(KARM, tr, 0.93)
    assert s.satisficing_regret == pytest.approx(0.33)
    assert s.standard_regret == pytest.approx(0.4)
    assert s.exceeding_gap == pytest.approx(0.07)

    # S above every arm: the max never clips
    tr = _trace([0, 1, 2, 3])
    s = summarize(KARM, tr, 1.5)
    assert s.satisficing_regret == pytest.approx(sum(1.5 - m for m in KARM.means))


def test_summarize_per_round_and_phases():
    steps = [
        TraceStep(1, 0, 0.0, ORACLE_STEP, 1),
        TraceStep(2, 3, 0.0, FORCED_SAMPLE, 1),
        TraceStep(3, 3, 0.0, LCB_TEST, 1),
        TraceStep(4, 1, 0.0, ORACLE_STEP, 2),
    ]
    s = summarize(KARM, RunTrace(steps, 4), 0.93)
    assert [r.round_index for r in s.per_round] == [1, 2]
    r1, r2 = s.per_round
    assert (r1.oracle_steps, r1.forced_steps, r1.test_steps) == (1, 1, 1)
    assert (r2.oracle_steps, r2.forced_steps, r2.test_steps) == (1, 0, 0)
    assert r1.satisficing_regret == pytest.approx(0.33)
    assert r2.satisficing_regret == pytest.approx(0.23)


def test_regret_inequality_property():
    rng = np.random.default_rng(3)
    _, star = KARM.best()
    for S in (0.1, 0.65, 0.93, 1.2):
        for _ in range(20):
            arms = list(rng.integers(0, 4, size=50))
            s = summarize(KARM, _trace(arms), S)
            assert s.satisficing_regret >= -1e-12
            bound = s.standard_regret - 50 * (star - S)
            assert s.satisficing_regret >= max(0.0, bound) - 1e-9
    # S at or below the worst arm: satisficing regret is identically zero
    s = summarize(KARM, _trace(list(rng.integers(0, 4, size=100))), 0.6)
    assert s.satisficing_regret == 0.0


def test_satisficing_gap():
    assert satisficing_gap(KARM, 0.93) == pytest.approx(0.13)
    assert satisficing_gap(KARM, 0.5) is None
    # continuum models: gap reported as 0 when means approach S from below
    assert satisficing_gap(PARABOLA, 0.3) == 0.0
    assert satisficing_gap(BUMP, 0.5) == 0.0
    s = summarize(KARM, _trace([0]), 0.93)
    assert s.satisficing_gap == pytest.approx(0.13)


def test_lipschitz_pair_property():
    rng = np.random.default_rng(11)
    L = BUMP.lipschitz
    for _ in range(2000):
        x = tuple(rng.uniform(0, 1, size=2))
        y = tuple(rng.uniform(0, 1, size=2))
        dist = max(abs(a - b) for a, b in zip(x, y))
        assert abs(BUMP.mean(x) - BUMP.mean(y)) <= L * dist + 1e-12


def test_trace_validation():
    tr = _trace([0, 1, 2])
    tr.validate()
    bad = RunTrace(tr.steps, 5)
    with pytest.raises(ValueError):
        bad.validate()
    steps = [TraceStep(1, 0, 0.0, ORACLE_STEP, 2), TraceStep(2, 0, 0.0, ORACLE_STEP, 1)]
    with pytest.raises(ValueError):
        RunTrace(steps, 2).validate()


def test_model_json_roundtrip(tmp_path):
    for model in (KARM, PARABOLA, BUMP, PRICING):
        again = model_from_dict(model_to_dict(model))
        assert again == model
    d = model_to_dict(KARM)
    d["S"] = 0.93
    path = tmp_path / "instance.json"
    path.write_text(json.dumps(d))
    model, S = load_instance(path)
    assert model == KARM and S == 0.93
    with pytest.raises(ValueError):
        model_from_dict({"kind": "nope"})
