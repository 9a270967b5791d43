import numpy as np
import pytest

from lochar.experiments import (
    TrialResult,
    budget_plan,
    engineered_unitary,
    matched_plans,
    mean_errors,
    run_trial,
    scattershot_trial,
    sign_errors,
)
from lochar.model import canonicalize
from lochar.simulator import _herald_pattern_probs, scattershot_settings


def test_sign_errors_counts_up_to_conjugation():
    t = np.array([[0, 0, 0], [0, 1.0, -2.0], [0, 0.5, 3.1]])
    assert sign_errors(t, t) == 0
    assert sign_errors(-t, t) == 0
    h = t.copy()
    h[1, 2] *= -1
    assert sign_errors(h, t) == 1
    # 3.1 lies within the margin of pi, so its sign is not scored
    h = t.copy()
    h[2, 2] *= -1
    assert sign_errors(h, t) == 0


def test_budget_plan_ratio():
    plan = budget_plan(3, 0, 1e4)
    assert plan.pairs_per_delay == 1e4
    assert plan.photons_per_run == 1e6


@pytest.mark.parametrize("theta22", [0.01, 1.0, -0.5])
def test_engineered_unitary(theta22):
    U = engineered_unitary(5, theta22, seed=0)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(5), atol=1e-10)
    rep = canonicalize(U, fix_conjugation=False)
    assert rep.theta[1, 1] == pytest.approx(theta22, abs=1e-9)


def test_matched_plans_event_counts():
    plan_s, plan_d = matched_plans(3, seed=0, budget=1e6, herald_prob=0.1)
    assert plan_d.herald_prob is None
    cfg = scattershot_settings(plan_s, 1e6)
    _, pair = _herald_pattern_probs(plan_s.herald_prob)
    assert plan_d.pairs_per_delay == pytest.approx(cfg.pulses_per_setting * np.mean(list(pair.values())))
    np.testing.assert_array_equal(plan_s.rep.alpha, plan_d.rep.alpha)


def test_scattershot_trial_runs():
    res_s, res_d, acc = scattershot_trial(3, seed=0, budget=1e6)
    assert not res_s.failed and not res_d.failed
    assert res_s.distance < 1.0 and res_d.distance < 1.0
    assert acc["retained"] + acc["discarded"] == acc["total_events"]


def test_run_trial_noiseless():
    plan = budget_plan(4, 0, 1e4, spectrum="gaussian", jitter=0.0, noise=False, tau0=0.0)
    res = run_trial(plan)
    assert res.distance < 1e-5
    assert res.sign_errors == 0


def test_mean_errors_skips_failures():
    trials = [TrialResult(0, 1.0, 0), TrialResult(1, 3.0, 0), TrialResult(2, float("nan"), -1)]
    out = mean_errors({"x": {1e3: trials}})
    mean, se, failed = out["x"][1e3]
    assert mean == 2.0
    assert se == pytest.approx(np.std([1.0, 3.0], ddof=1) / np.sqrt(2))
    assert failed == 1
