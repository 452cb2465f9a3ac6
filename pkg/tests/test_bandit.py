import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bril.bandit import SQRT2, BanditState, run_adaptation, run_bandit, select, update
from bril.errors import ContractError
from bril.microbuild_env import EnvConfig
from bril.policy_net import init_policy


def _opts(k):
    return [np.array([float(i), 0.0]) for i in range(k)]


def test_first_pulls_in_index_order():
    b = BanditState(_opts(4))
    picks = []
    for _ in range(4):
        j = select(b)
        picks.append(j)
        update(b, j, 0.0)
    assert picks == [0, 1, 2, 3]


def test_hand_evaluated_scores():
    b = BanditState(_opts(2), C=1.0)
    update(b, 0, 1.0)
    update(b, 1, 0.0)
    bonus = math.sqrt(2 * math.log(2))
    assert b.scores() == pytest.approx([1 + bonus, bonus], abs=1e-15)
    assert select(b) == 0


def test_identical_history_lowest_index():
    b = BanditState(_opts(3))
    for j in range(3):
        update(b, j, 0.5)
    assert select(b) == 0


def test_running_mean_and_isolation():
    b = BanditState(_opts(2))
    update(b, 1, 0.25)
    for r in (1, 0, 1):
        update(b, 0, r)
    assert b.means[0] == 2 / 3
    assert (b.counts[1], b.means[1]) == (1, 0.25)


@given(st.lists(st.tuples(st.integers(0, 4), st.floats(0, 1)), max_size=1000))
def test_counts_sum_to_t(history):
    b = BanditState(_opts(5))
    for j, r in history:
        update(b, j, r)
    assert sum(b.counts) == b.t == len(history)


@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from([0.0, 1.0])), min_size=4, max_size=60))
def test_select_is_never_strictly_dominated(history):
    b = BanditState(_opts(4))
    for j in range(4):
        update(b, j, history[j][1])
    for j, r in history[4:]:
        update(b, j, r)
    s = b.scores()
    assert s[select(b)] == max(s)


def test_c_zero_is_greedy():
    b = BanditState(_opts(3), C=0.0)
    script = {0: [0, 0, 1], 1: [1, 1, 0], 2: [0, 1, 0]}
    pos = {j: 0 for j in script}

    def pull(j, _):
        r = script[j][pos[j] % 3]
        pos[j] += 1
        return r

    log = run_bandit(b, pull, 3)
    assert [row[1] for row in log.rows] == [0, 1, 2]
    # means now (0, 1, 0): greedy keeps picking arm 1 while it pays
    assert select(b) == 1
    update(b, 1, 1.0)
    assert select(b) == 1


@pytest.mark.parametrize("r", [-0.1, 1.5, float("nan")])
def test_return_out_of_range(r):
    with pytest.raises(ContractError):
        update(BanditState(_opts(2)), 0, r)


def test_bad_construction():
    with pytest.raises(ContractError):
        BanditState([])
    with pytest.raises(ContractError):
        BanditState(_opts(2), C=-1.0)


def test_bernoulli_best_arm_dominates():
    p = (0.8, 0.4, 0.3, 0.1)
    shares = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        log = run_bandit(BanditState(_opts(4), SQRT2), lambda j, _: float(rng.random() < p[j]), 1000)
        shares.append(log.plays()[0] / 1000)
    assert np.median(shares) > 0.6


def test_run_adaptation_accounting():
    cfg = EnvConfig(max_ticks=40)
    pol = init_policy(cfg.state_dim + 2, cfg.action_count, 0, behavior_dim=2, hidden=(16,))
    log = run_adaptation(pol, _opts(4), 30, cfg, seed=1)
    assert sum(log.plays()) == 30
    assert [r[1] for r in log.rows[:4]] == [0, 1, 2, 3]
    assert log.to_csv().splitlines()[1] == "episode,option,return,mean_0,mean_1,mean_2,mean_3"
    again = run_adaptation(pol, _opts(4), 30, cfg, seed=1)
    assert again.rows == log.rows


def test_run_adaptation_needs_bril():
    cfg = EnvConfig()
    with pytest.raises(ContractError):
        run_adaptation(init_policy(cfg.state_dim, cfg.action_count, 0, hidden=(4,)), _opts(2), 1, cfg)
