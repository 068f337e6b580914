import math
from dataclasses import dataclass

import numpy as np
import pytest

from oracles import brute_expectimax
from safemix.agent import (
    COLUMNS,
    EXPLORE,
    MENTOR_BRANCHES,
    OPTIMIZE,
    ROLLOUT,
    SAFETY,
    AgentState,
    RunTrace,
    Setup,
    Streams,
    run_episode,
    schedule_eta,
    schedule_horizon,
    step,
)
from safemix.config import RunConfig
from safemix.histories import Step
from safemix.mentors import library_set
from safemix.planning import RootValues, SafetyDecision


def test_schedule_eta_examples():
    assert schedule_eta(1) == 1.0
    assert schedule_eta(8) == pytest.approx(0.5, abs=1e-15)
    assert schedule_eta(1000) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        schedule_eta(0)


def test_schedule_horizon_examples():
    assert schedule_horizon(1, 0.9) == 1
    assert schedule_horizon(7, 5 / 6) == 2
    assert schedule_horizon(20, 0.5) == 1
    with pytest.raises(ValueError):
        schedule_horizon(5, 1.0)


def test_initial_state_sigma_zero():
    s = AgentState()
    assert s.t == 1 and s.sigma == 0
    assert AgentState(4, 2, 1).sigma == (2, 1)


class FixedDraw:
    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


class StubPlanner:
    def __init__(self, value, action=1):
        self.value = value
        self.action = action
        self.calls = 0

    def safety_check(self, m):
        self.calls += 1
        q = ((self.value - 0.1,) * 3, (self.value,) * 3)
        return SafetyDecision(self.value <= -1, False, RootValues(4, q, self.action))


def streams(u_trigger, seed=0):
    s = Streams.from_seed(seed)
    return Streams(FixedDraw(u_trigger), s.mentor, s.environment, s.policy)


MENTORS = library_set("bandit2", ["good", "mediocre"], ["1/2", "1/2"])


def hist(n):
    return [Step(0, 0, 1.0)] * n


def test_rollout_in_progress_uses_mentor():
    st = AgentState(t=50, rollout_steps=2, active_mentor=1)
    a, new, rec = step(st, hist(49), None, MENTORS, StubPlanner(0.5, 0), streams(0.99), 0.9)
    assert a == 1 and new.rollout_steps == 1 and rec.branch == ROLLOUT and new.active_mentor == 1


def test_safety_branch_when_value_low():
    st = AgentState(t=50)
    a, new, rec = step(st, hist(49), None, MENTORS, StubPlanner(-2.0), streams(0.99), 0.9)
    assert rec.branch == SAFETY and a == 0  # default mentor pulls arm 0
    assert new.rollout_steps == 0 and rec.triggered


def test_optimize_branch_when_value_high():
    st = AgentState(t=50)
    a, new, rec = step(st, hist(49), None, MENTORS, StubPlanner(0.5, 1), streams(0.99), 0.9)
    assert rec.branch == OPTIMIZE and a == 1 and new.sigma == 0


def test_random_rollout_overrides_safety():
    st = AgentState(t=50)
    a, new, rec = step(st, hist(49), None, MENTORS, StubPlanner(-2.0), streams(0.0), 0.9)
    assert rec.branch == EXPLORE
    assert new.rollout_steps == schedule_horizon(50, 0.9) - 1


def test_history_length_checked():
    with pytest.raises(ValueError):
        step(AgentState(t=3), hist(1), None, MENTORS, StubPlanner(0.5), streams(0.99), 0.9)


def bandit_config(**kw):
    base = dict(suite="bandit2", budget=8, L=9, T=300, record_novelty=False, predicates=[], regret_grid=[])
    base.update(kw)
    return RunConfig(**base)


def test_empty_run():
    assert run_episode(bandit_config(T=0), 0).rows == []


def test_same_seed_identical_text():
    c = bandit_config(T=200, record_novelty=True, novelty_budget=10)
    assert run_episode(c, 3).to_text() == run_episode(c, 3).to_text()
    assert run_episode(c, 3).to_text() != run_episode(c, 4).to_text()


def test_trace_round_trip():
    c = bandit_config(T=50, record_novelty=True, novelty_budget=10)
    tr = run_episode(c, 1)
    back = RunTrace.from_text(tr.to_text())
    assert back.seed == 1 and back.config == tr.config and back.w_mu == tr.w_mu
    assert back.to_text() == tr.to_text()
    assert tr.to_text().splitlines()[-51] == "\t".join(COLUMNS)


def test_branch_accounting_and_blocks():
    c = bandit_config(T=2000)
    tr = run_episode(c, 2)
    counts = tr.branch_counts()
    assert counts[OPTIMIZE] + sum(counts[b] for b in MENTOR_BRANCHES) == 2000
    rows = tr.rows
    t = 0
    while t < len(rows):
        if rows[t][1] == EXPLORE:
            length = schedule_horizon(rows[t][0], c.gamma)
            block = rows[t:t + length]
            assert all(r[1] in (EXPLORE, ROLLOUT) for r in block[:1])
            assert all(r[1] == ROLLOUT for r in block[1:])
            assert [r[5] for r in block] == list(range(length - 1, length - 1 - len(block), -1))
            assert len({r[6] for r in block}) == 1
            t += len(block)
            if t < len(rows):
                assert rows[t][1] not in (ROLLOUT,)
        else:
            assert rows[t][1] != ROLLOUT
            t += 1


def test_safety_direction_in_traces():
    c = RunConfig(suite="trap-corridor", mentors=["good", "cautious"], budget=12, L=2**19, gamma=0.5, T=100,
                  novelty_budget=12, regret_grid=[], predicates=[])
    for seed in range(5):
        tr = run_episode(c, seed)
        for r in tr.rows:
            if r[8] <= -1:  # certified upper bound at or below -1
                assert r[1] in MENTOR_BRANCHES


def test_degenerate_case_matches_mu_optimal():
    """No exploration, no hells, only mu: the agent plays mu's optimal actions."""
    c = RunConfig(suite="delayed-chain", mentors=["good"], mentor_weights=["1"], eta="off", T=30, gamma=0.9,
                  horizon=6, horizon_cap=6, tolerance=10.0, record_novelty=False, predicates=[], regret_grid=[])
    setup = Setup.build(c)
    mc = setup.model_class
    mu = mc.mu
    # drop the rival so the mixture is mu alone
    from safemix.environments import ModelClass

    setup.model_class = ModelClass(mc.suite, [mu], [0.0], 0, 0, ())
    tr = run_episode(c, 0, setup)
    s = mu.initial_state()
    for r in tr.rows:
        _, a = brute_expectimax([(1.0, mu, s)], 0.9, 6, 2)
        assert r[2] == a and r[1] == OPTIMIZE
        s = mu.advance(s, r[2], r[3], r[4])


def test_uniform_and_mentor_policies():
    c = bandit_config(policy="uniform", T=400)
    acts = [r[2] for r in run_episode(c, 0).rows]
    assert 150 < sum(acts) < 250
    c = bandit_config(policy="mentor:mediocre", T=50)
    assert {r[2] for r in run_episode(c, 0).rows} == {1}


def test_streams_are_independent():
    a = Streams.from_seed(5)
    b = Streams.from_seed(5)
    b.mentor.random(size=100)  # consuming one stream leaves the others alone
    assert a.trigger.random() == b.trigger.random()
    assert a.environment.random() == b.environment.random()
