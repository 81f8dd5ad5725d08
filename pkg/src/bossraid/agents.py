"""Playtesting agents, observations and reward accounting.

Observation layout (all components in [-1, 1]); ``T = players - 1`` teammate
slots, ``S = 3`` skill slots, ``Q = 8`` projectile slots::

    character block (13): alive, x, y, cos(facing), sin(facing), vx, vy, hp,
                          mp, cooldown[S], casting
    self     : block, position relative to the arena centre / R
    teammate : block x T, ascending agent id, position relative to self / 2R
    boss     : block, position relative to self / 2R
    projectile (5) x Q: live, dx, dy (relative to self / 2R), speed / 50, hostile
    skill (4) x S: owned, scaled range, scaled damage coefficient, scaled cast time

Dead or missing slots are all zeros. See docs/observation_spec.md for the index
table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .content import ParamBounds, RewardCoefficients
from .engine import kernels as K
from .engine.core import CombatState, Event
from .engine.layout import (
    ALIVE, CSKILL, EXECUTE_BASE, FACE, HP, MAX_SKILLS, MAXHP, MAXMP, MP, NSK,
    P_LIVE, P_ORDER, P_SPEED, P_SRC, P_X, P_Y, S_CAST, S_COEF, S_COOL, S_RANGE,
    VX, VY, X, Y,
)
from .rng import CounterRNG

MAX_PROJECTILE_SLOTS = 8
MAX_SPEED = 2.0  # upper bound of movement_speed
MAX_PROJECTILE_SPEED = 50.0
CHAR_BLOCK = 8 + MAX_SKILLS + 2
PROJ_BLOCK = 5
SKILL_BLOCK = 4


class DeadAgent(ValueError):
    def __init__(self, agent: int):
        self.agent = agent
        super().__init__(f"agent {agent} is dead")


def observation_size(n_players: int) -> int:
    return CHAR_BLOCK * (n_players + 1) + PROJ_BLOCK * MAX_PROJECTILE_SLOTS + SKILL_BLOCK * MAX_SKILLS


def observation_labels(n_players: int) -> list[str]:
    """Name of every observation component, in order."""
    block = ["alive", "x", "y", "cos_facing", "sin_facing", "vx", "vy", "hp", "mp"]
    block += [f"cooldown{k}" for k in range(MAX_SKILLS)] + ["casting"]
    labels = [f"self.{b}" for b in block]
    for t in range(n_players - 1):
        labels += [f"mate{t}.{b}" for b in block]
    labels += [f"boss.{b}" for b in block]
    for q in range(MAX_PROJECTILE_SLOTS):
        labels += [f"proj{q}.{f}" for f in ("live", "dx", "dy", "speed", "hostile")]
    for k in range(MAX_SKILLS):
        labels += [f"skill{k}.{f}" for f in ("owned", "range", "damage", "cast_time")]
    return labels


def _char_block(state: CombatState, j: int, origin: tuple[float, float], scale: float) -> list[float]:
    ch = state.ch
    if not ch[j, ALIVE]:
        return [0.0] * CHAR_BLOCK
    n_sk = int(ch[j, NSK])
    cds = []
    for k in range(MAX_SKILLS):
        ct = state.sk[j, k, S_COOL]
        cds.append(min(state.cool[j, k] / ct, 1.0) if k < n_sk and ct > 0 else 0.0)
    return [
        1.0,
        (ch[j, X] - origin[0]) / scale,
        (ch[j, Y] - origin[1]) / scale,
        float(np.cos(ch[j, FACE])),
        float(np.sin(ch[j, FACE])),
        float(np.clip(ch[j, VX] / MAX_SPEED, -1.0, 1.0)),
        float(np.clip(ch[j, VY] / MAX_SPEED, -1.0, 1.0)),
        ch[j, HP] / ch[j, MAXHP] if ch[j, MAXHP] > 0 else 0.0,
        ch[j, MP] / ch[j, MAXMP] if ch[j, MAXMP] > 0 else 0.0,
        *cds,
        1.0 if ch[j, CSKILL] >= 0 else 0.0,
    ]


def _scaled(v: float, lo: float, hi: float) -> float:
    return 0.0 if hi == lo else float(np.clip((v - lo) / (hi - lo), 0.0, 1.0))


def observe(state: CombatState, agent: int, bounds: ParamBounds | None = None) -> np.ndarray:
    """Fixed-length observation vector for a living player agent."""
    if not 0 <= agent < state.n_players or not state.ch[agent, ALIVE]:
        raise DeadAgent(agent)
    bounds = bounds or ParamBounds()
    R = state.scenario.arena_radius
    me = (float(state.ch[agent, X]), float(state.ch[agent, Y]))
    obs = _char_block(state, agent, (0.0, 0.0), R)
    for j in range(state.n_players):
        if j != agent:
            obs += _char_block(state, j, me, 2 * R)
    obs += _char_block(state, state.boss_id, me, 2 * R)

    proj = state.proj
    live = [j for j in range(proj.shape[0]) if proj[j, P_LIVE]]
    live.sort(key=lambda j: proj[j, P_ORDER])
    live = live[-MAX_PROJECTILE_SLOTS:]  # overflow drops the oldest
    for q in range(MAX_PROJECTILE_SLOTS):
        if q < len(live):
            j = live[q]
            obs += [
                1.0,
                (proj[j, P_X] - me[0]) / (2 * R),
                (proj[j, P_Y] - me[1]) / (2 * R),
                min(proj[j, P_SPEED] / MAX_PROJECTILE_SPEED, 1.0),
                1.0 if int(proj[j, P_SRC]) == state.boss_id else 0.0,
            ]
        else:
            obs += [0.0] * PROJ_BLOCK

    n_sk = int(state.ch[agent, NSK])
    for k in range(MAX_SKILLS):
        if k < n_sk:
            s = state.sk[agent, k]
            obs += [
                1.0,
                _scaled(s[S_RANGE], *bounds.range),
                _scaled(s[S_COEF], *bounds.coefficient),
                _scaled(s[S_CAST], *bounds.cast_time),
            ]
        else:
            obs += [0.0] * SKILL_BLOCK
    return np.asarray(obs, dtype=np.float64)


# --------------------------------------------------------------------------
# policies


def pt_hr_decide(state: CombatState, agent: int, rng: CounterRNG) -> int:
    c = state.compiled
    return int(K.pt_hr_kernel(c.cfg, state.ch, state.sk, state.charges, agent, rng.state))


def pt_rd_decide(rng: CounterRNG, action_count: int) -> int:
    if action_count < 1:
        raise ValueError("action_count must be >= 1")
    return rng.integers(action_count)


def action_count(state: CombatState, agent: int) -> int:
    return EXECUTE_BASE + int(state.ch[agent, NSK])


class HeuristicPolicy:
    kind = "heuristic"

    def __call__(self, state: CombatState, agent: int, rng: CounterRNG) -> int:
        return pt_hr_decide(state, agent, rng)


class RandomPolicy:
    kind = "random"

    def __call__(self, state: CombatState, agent: int, rng: CounterRNG) -> int:
        return pt_rd_decide(rng, action_count(state, agent))


class StayPolicy:
    kind = "stay"

    def __call__(self, state: CombatState, agent: int, rng: CounterRNG) -> int:
        return 0


POLICIES = {"heuristic": HeuristicPolicy, "random": RandomPolicy, "stay": StayPolicy}


def make_policy(name: str):
    try:
        return POLICIES[name]()
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; expected one of {sorted(POLICIES)}") from None


# --------------------------------------------------------------------------
# rewards


@dataclass
class RewardLedger:
    damage_reward: list[float]
    back_attack_reward: list[float]
    group_reward: float
    normal_damage: list[float] = field(default_factory=list)
    back_attack_damage: list[float] = field(default_factory=list)

    def per_agent(self) -> dict[int, float]:
        return {i: d + b for i, (d, b) in enumerate(zip(self.damage_reward, self.back_attack_reward))}


def compute_rewards(events: Sequence[Event], done: bool, win: bool, n_players: int,
                    coefficients: RewardCoefficients | None = None) -> RewardLedger:
    """Rewards for one tick's events.

    Damage a player lands on the boss earns ``damage`` per point, back-attack
    damage earns ``back_attack`` per point, and the team shares ``group_win``
    on the tick the boss falls.
    """
    coef = coefficients or RewardCoefficients()
    normal = [0.0] * n_players
    back = [0.0] * n_players
    for e in events:
        if e.target != n_players or not 0 <= e.actor < n_players:
            continue
        if e.kind == "hit":
            normal[e.actor] += e.v1
        elif e.kind == "back_attack_hit":
            back[e.actor] += e.v1
    return RewardLedger(
        damage_reward=[coef.damage * d for d in normal],
        back_attack_reward=[coef.back_attack * d for d in back],
        group_reward=coef.group_win if (done and win) else 0.0,
        normal_damage=normal,
        back_attack_damage=back,
    )
