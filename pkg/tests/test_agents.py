import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from bossraid.agents import (
    DeadAgent, HeuristicPolicy, compute_rewards, make_policy, observation_labels,
    observation_size, observe, pt_hr_decide, pt_rd_decide,
)
from bossraid.content import RewardCoefficients
from bossraid.engine import Event, init_episode, step
from bossraid.engine.layout import (
    BACKWARD, CSKILL, CREM, CTGT, EXECUTE_BASE, FACE, FORWARD, MOVE_LEFT, MOVE_RIGHT, X, Y,
)
from bossraid.rng import CounterRNG, derive_key


def place(state, i, x, y, face=None):
    state.ch[i, X], state.ch[i, Y] = x, y
    if face is not None:
        state.ch[i, FACE] = face


def facing_boss(state, i):
    bx, by = state.position(state.boss_id)
    x, y = state.position(i)
    state.ch[i, FACE] = math.atan2(by - y, bx - x)


class TestObserve:
    def test_size_and_labels(self, scenario):
        o = observe(init_episode(scenario, 0), 0)
        assert o.shape == (observation_size(3),) == (len(observation_labels(3)),)

    def test_fresh_state(self, scenario):
        labels = observation_labels(3)
        o = dict(zip(labels, observe(init_episode(scenario, 0), 1)))
        assert o["self.hp"] == o["mate0.hp"] == o["boss.hp"] == 1.0
        assert all(o[f"self.cooldown{k}"] == 0.0 for k in range(3))
        assert all(o[f"proj{q}.live"] == 0.0 for q in range(8))

    def test_boss_at_same_position(self, scenario):
        s = init_episode(scenario, 0)
        place(s, 0, 0.0, 0.0)
        o = dict(zip(observation_labels(3), observe(s, 0)))
        assert (o["boss.x"], o["boss.y"]) == (0.0, 0.0)

    def test_scaled_range(self, scenario):
        s = init_episode(scenario.with_player_param("range", 10.5), 0)
        o = dict(zip(observation_labels(3), observe(s, 0)))
        assert o["skill0.range"] == 0.5

    def test_dead_agent(self, scenario):
        s = init_episode(scenario, 0)
        s.ch[2, 9] = 0.0
        with pytest.raises(DeadAgent):
            observe(s, 2)

    def test_pure(self, scenario):
        s = init_episode(scenario, 4)
        before = s.fingerprint()
        a, b = observe(s, 0), observe(s, 0)
        assert np.array_equal(a, b) and s.fingerprint() == before

    @given(st.integers(0, 10**6))
    def test_bounded(self, scenario, seed):
        s = init_episode(scenario, seed)
        pol = HeuristicPolicy()
        for _ in range(60):
            step(s, [pol(s, i, s.rng) for i in range(3)], inplace=True)
        for i in s.living_players():
            o = observe(s, i)
            assert np.all(np.abs(o) <= 1.0 + 1e-12)


class TestHeuristic:
    def setup_state(self, scenario, d):
        s = init_episode(scenario, 0)
        place(s, 0, 0.0, -d)
        facing_boss(s, 0)
        return s

    def test_far_approaches(self, scenario):
        s = self.setup_state(scenario, 15.0)
        assert pt_hr_decide(s, 0, CounterRNG(1)) == FORWARD

    def test_in_range_idle_attacks(self, scenario):
        s = self.setup_state(scenario, 8.0)
        assert pt_hr_decide(s, 0, CounterRNG(1)) == EXECUTE_BASE

    def test_casting_no_skill(self, scenario):
        s = self.setup_state(scenario, 8.0)
        s.ch[0, CSKILL], s.ch[0, CREM], s.ch[0, CTGT] = 0, 0.3, 3
        assert pt_hr_decide(s, 0, CounterRNG(1)) < EXECUTE_BASE

    def test_too_close_backs_off(self, scenario):
        s = self.setup_state(scenario, 3.0)
        s.charges[0, 0] = 0
        assert pt_hr_decide(s, 0, CounterRNG(1)) == BACKWARD

    def test_band_orbits_both_ways(self, scenario):
        s = self.setup_state(scenario, 9.5)
        s.charges[0, 0] = 0
        seen = {pt_hr_decide(s, 0, CounterRNG(derive_key(k))) for k in range(40)}
        assert seen == {MOVE_LEFT, MOVE_RIGHT}

    @given(st.integers(0, 10**6))
    def test_never_casts_when_unable(self, scenario, seed):
        s = init_episode(scenario, seed)
        pol = HeuristicPolicy()
        while not s.done and s.tick < 400:
            acts = []
            for i in range(3):
                a = pol(s, i, s.rng) if s.alive(i) else 0
                if a >= EXECUTE_BASE:
                    assert s.casting(i) is None
                    assert s.charges[i, a - EXECUTE_BASE] >= 1
                acts.append(a)
            r = step(s, acts, inplace=True)
            assert not [e for e in r.events if e.kind == "rejected_action" and e.actor < 3]


class TestRandom:
    def test_uniform_chi_square(self):
        rng = CounterRNG(derive_key(2024))
        counts = np.bincount([pt_rd_decide(rng, 8) for _ in range(80_000)], minlength=8)
        sigma = math.sqrt(80_000 * (1 / 8) * (7 / 8))
        assert np.all(np.abs(counts - 10_000) <= 3 * sigma)
        assert stats.chisquare(counts).pvalue > 0.001

    def test_uniform_large_sample(self):
        rng = CounterRNG(derive_key(7))
        counts = np.bincount([pt_rd_decide(rng, 8) for _ in range(100_000)], minlength=8)
        assert stats.chisquare(counts).pvalue > 0.001

    def test_single_action(self):
        rng = CounterRNG(1)
        assert {pt_rd_decide(rng, 1) for _ in range(50)} == {0}

    def test_reproducible(self):
        a, b = CounterRNG(9), CounterRNG(9)
        assert [pt_rd_decide(a, 8) for _ in range(30)] == [pt_rd_decide(b, 8) for _ in range(30)]

    def test_make_policy(self):
        assert make_policy("random").kind == "random"
        with pytest.raises(ValueError):
            make_policy("mapoca")


def ev(kind, actor, dmg, target=3):
    return Event(1, kind, actor, target, dmg, 0.0)


class TestRewards:
    def test_normal(self):
        r = compute_rewards([ev("hit", 0, 40.0)], False, False, 3)
        assert r.per_agent() == {0: 0.4, 1: 0.0, 2: 0.0}

    def test_back_attack(self):
        r = compute_rewards([ev("back_attack_hit", 1, 40.0)], False, False, 3)
        assert r.per_agent()[1] == 0.48

    def test_quiet_tick(self):
        r = compute_rewards([], False, False, 3)
        assert r.per_agent() == {0: 0.0, 1: 0.0, 2: 0.0} and r.group_reward == 0.0

    def test_group_only_on_win(self):
        assert compute_rewards([], True, True, 3).group_reward == 1.0
        assert compute_rewards([], True, False, 3).group_reward == 0.0

    def test_damage_to_players_ignored(self):
        r = compute_rewards([ev("hit", 3, 25.0, target=0)], False, False, 3)
        assert r.per_agent() == {0: 0.0, 1: 0.0, 2: 0.0}

    def test_custom_coefficients(self):
        r = compute_rewards([ev("hit", 0, 10.0)], True, True, 3, RewardCoefficients(0.1, 0.2, 5.0))
        assert r.per_agent()[0] == 1.0 and r.group_reward == 5.0


def test_published_observation_spec_matches_labels():
    from pathlib import Path

    doc = (Path(__file__).parent.parent / "docs" / "observation_spec.md").read_text()
    rows = [line.split("`")[1] for line in doc.splitlines() if line.startswith("| ") and line[2].isdigit()]
    assert rows == observation_labels(3)
