"""Python surface of the combat engine: episode setup, stepping, logs."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from ..content import ScenarioConfig, SkillSpec, StatBlock
from ..rng import CounterRNG, derive_key
from . import kernels as K
from .layout import (
    ALIVE, C_BACKHALF, C_BAND, C_BOSS, C_DT, C_MAXT, C_NPLAYERS, C_ORBIT,
    C_RADIUS, C_TURN, CREM, CSKILL, CTGT, EVENT_NAMES, F_CRIT, F_EVADED, F_PARRIED, FACE, HP, L_BACK,
    L_NORMAL, M_DONE, M_TICK, M_WIN, MAX_PROJ, MAX_SKILLS, MAXHP, MAXMP, MOVING,
    MP, N_CFG, N_CH, N_EV, N_LEDGER, N_META, N_PJ, N_SK, NSK, ORBIT_EPISODE,
    ORBIT_TICK, POLICY_HEURISTIC, POLICY_RANDOM, POLICY_STAY, S_ACTIVE, S_CAST,
    S_CHARGES, S_COEF, S_COOL, S_COST, S_ENEMY, S_MELEE, S_ONCAST, S_ONMOVE,
    S_PSPEED, S_RANGE, SPEED, SPOWER, APOWER, ARMOR, EVASION, PARRY, CRIT, HASTE,
    STAY, X, Y,
)

# Half-width (units) of the band just inside maximum skill range where the
# heuristic playtester strafes instead of retreating.
ORBIT_BAND = 1.0
SPAWN_RADIUS_FRACTION = 0.75

SAMPLING_COLUMNS = {
    "cool_time": S_COOL, "cast_time": S_CAST, "cost": S_COST, "range": S_RANGE,
    "coefficient": S_COEF, "projectile_speed": S_PSPEED, "charge": S_CHARGES,
}


class IllegalAction(ValueError):
    def __init__(self, agent: int, reason: str):
        self.agent = agent
        self.reason = reason
        super().__init__(f"agent {agent}: {reason}")


@dataclass(frozen=True)
class CompiledScenario:
    cfg: np.ndarray
    tmpl_ch: np.ndarray
    tmpl_sk: np.ndarray
    samp_cols: np.ndarray
    samp_vals: np.ndarray
    samp_lens: np.ndarray

    @property
    def n_players(self) -> int:
        return int(self.cfg[C_NPLAYERS])


def _fill_character(row: np.ndarray, skills_row: np.ndarray, stats: StatBlock,
                    skills: Sequence[SkillSpec], hp: float) -> None:
    row[HP] = row[MAXHP] = hp
    row[MP] = row[MAXMP] = stats.mana_point
    row[ALIVE] = 1.0 if hp > 0 else 0.0
    row[CSKILL] = row[CTGT] = -1.0
    row[SPEED] = stats.movement_speed
    row[SPOWER] = stats.spell_power
    row[APOWER] = stats.attack_power
    row[ARMOR] = stats.armor
    row[EVASION] = stats.evasion
    row[PARRY] = stats.parry
    row[CRIT] = stats.critical
    row[HASTE] = stats.haste
    row[NSK] = len(skills)
    for k, s in enumerate(skills):
        r = skills_row[k]
        r[S_COOL] = s.cool_time
        r[S_CAST] = s.cast_time
        r[S_COST] = s.cost
        r[S_RANGE] = s.range
        r[S_COEF] = s.coefficient
        r[S_PSPEED] = s.projectile_speed
        r[S_ONMOVE] = s.cast_on_moving
        r[S_ONCAST] = s.cast_on_casting
        r[S_CHARGES] = s.charge
        r[S_ENEMY] = s.affect_enemy
        r[S_ACTIVE] = s.trigger_type == "active"
        r[S_MELEE] = s.hit_type == "melee"


@lru_cache(maxsize=512)
def compile_scenario(scenario: ScenarioConfig) -> CompiledScenario:
    """Lower a validated scenario to the kernels' array layout."""
    n_players = len(scenario.players)
    n = n_players + 1
    boss = n_players
    cfg = np.zeros(N_CFG)
    cfg[C_RADIUS] = scenario.arena_radius
    cfg[C_DT] = scenario.tick_dt
    cfg[C_MAXT] = scenario.max_ticks
    cfg[C_TURN] = math.radians(scenario.turn_rate_deg) * scenario.tick_dt
    cfg[C_BACKHALF] = math.radians(scenario.back_attack_half_angle_deg)
    cfg[C_NPLAYERS] = n_players
    cfg[C_BOSS] = boss
    cfg[C_ORBIT] = ORBIT_EPISODE if scenario.orbit_resample == "episode" else ORBIT_TICK
    cfg[C_BAND] = ORBIT_BAND

    ch = np.zeros((n, N_CH))
    sk = np.zeros((n, MAX_SKILLS, N_SK))
    spawn = SPAWN_RADIUS_FRACTION * scenario.arena_radius
    for i, p in enumerate(scenario.players):
        _fill_character(ch[i], sk[i], p.stats, p.skills, float(p.stats.health_point))
        ang = math.pi / 2 + 2 * math.pi * i / n_players
        ch[i, X] = spawn * math.cos(ang)
        ch[i, Y] = spawn * math.sin(ang)
        ch[i, FACE] = K.wrap_angle(ang + math.pi)
    _fill_character(ch[boss], sk[boss], scenario.boss.stats, scenario.boss.skills, scenario.boss_max_hp)

    m = len(scenario.content_sampling)
    width = max((len(v) for _, v in scenario.content_sampling), default=1)
    cols = np.zeros(m, dtype=np.int64)
    vals = np.zeros((m, width))
    lens = np.zeros(m, dtype=np.int64)
    for j, (name, values) in enumerate(scenario.content_sampling):
        cols[j] = SAMPLING_COLUMNS[name]
        vals[j, : len(values)] = values
        lens[j] = len(values)
    for a in (cfg, ch, sk, cols, vals, lens):
        a.setflags(write=False)
    return CompiledScenario(cfg, ch, sk, cols, vals, lens)


@dataclass
class CombatState:
    """Snapshot of one arena. Arrays follow :mod:`bossraid.engine.layout`."""

    scenario: ScenarioConfig
    ch: np.ndarray
    sk: np.ndarray
    cool: np.ndarray
    charges: np.ndarray
    proj: np.ndarray
    meta: np.ndarray
    rng: CounterRNG
    ledger: np.ndarray

    @property
    def compiled(self) -> CompiledScenario:
        return compile_scenario(self.scenario)

    @property
    def n_players(self) -> int:
        return len(self.scenario.players)

    @property
    def boss_id(self) -> int:
        return self.n_players

    @property
    def tick(self) -> int:
        return int(self.meta[M_TICK])

    @property
    def done(self) -> bool:
        return bool(self.meta[M_DONE])

    @property
    def win(self) -> bool:
        return bool(self.meta[M_WIN])

    def position(self, i: int) -> tuple[float, float]:
        return float(self.ch[i, X]), float(self.ch[i, Y])

    def facing(self, i: int) -> float:
        return float(self.ch[i, FACE])

    def hp(self, i: int) -> float:
        return float(self.ch[i, HP])

    def alive(self, i: int) -> bool:
        return bool(self.ch[i, ALIVE])

    def moving(self, i: int) -> bool:
        return bool(self.ch[i, MOVING])

    def casting(self, i: int) -> tuple[int, float] | None:
        k = int(self.ch[i, CSKILL])
        return None if k < 0 else (k, float(self.ch[i, CREM]))

    def cooldowns(self, i: int) -> np.ndarray:
        return self.cool[i, : int(self.ch[i, NSK])].copy()

    def living_players(self) -> list[int]:
        return [i for i in range(self.n_players) if self.ch[i, ALIVE]]

    def copy(self) -> "CombatState":
        return CombatState(
            self.scenario, self.ch.copy(), self.sk.copy(), self.cool.copy(),
            self.charges.copy(), self.proj.copy(), self.meta.copy(),
            self.rng.copy(), self.ledger.copy(),
        )

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for a in (self.ch, self.sk, self.cool, self.charges, self.proj, self.meta,
                  self.rng.state, self.ledger):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def init_episode(scenario: ScenarioConfig, seed: int) -> CombatState:
    """Fresh arena: boss at the centre, players evenly spaced on a ring facing it.

    Content sampling (if configured) draws from the episode stream here.
    """
    return init_from_key(scenario, derive_key(seed))


def init_from_key(scenario: ScenarioConfig, key: int) -> CombatState:
    c = compile_scenario(scenario)
    n = c.tmpl_ch.shape[0]
    rng = CounterRNG(key)
    state = CombatState(
        scenario,
        np.empty((n, N_CH)), np.empty((n, MAX_SKILLS, N_SK)),
        np.zeros((n, MAX_SKILLS)), np.zeros((n, MAX_SKILLS)),
        np.zeros((MAX_PROJ, N_PJ)), np.zeros(N_META), rng, np.zeros((n, N_LEDGER)),
    )
    K.init_kernel(c.tmpl_ch, c.tmpl_sk, c.samp_cols, c.samp_vals, c.samp_lens, c.n_players,
                  state.ch, state.sk, state.cool, state.charges, state.proj, state.meta,
                  rng.state, state.ledger)
    return state


class Event(NamedTuple):
    tick: int
    kind: str
    actor: int
    target: int
    v1: float
    v2: float

    def to_json(self) -> str:
        # fixed field order; floats via repr for exact round-trip
        return (
            f'{{"tick":{self.tick},"kind":"{self.kind}","actor":{self.actor},'
            f'"target":{self.target},"v1":{_num(self.v1)},"v2":{_num(self.v2)}}}'
        )


def _num(v: float) -> str:
    return repr(float(v)) if math.isfinite(v) else "null"


def _decode_events(buf: np.ndarray, n: int) -> list[Event]:
    return [
        Event(int(r[0]), EVENT_NAMES[int(r[1])], int(r[2]), int(r[3]), float(r[4]), float(r[5]))
        for r in buf[:n]
    ]


@dataclass
class StepResult:
    state: CombatState
    events: list[Event]
    rewards: dict[int, float]
    group_reward: float
    done: bool


def _event_capacity(n: int) -> int:
    return 6 * n + 3 * MAX_PROJ + 8


def boss_policy(state: CombatState) -> int:
    c = state.compiled
    return int(K.boss_policy_kernel(c.cfg, state.ch, state.sk, state.charges))


def step(state: CombatState, actions: Mapping[int, int] | Sequence[int],
         *, inplace: bool = False) -> StepResult:
    """Advance one tick. ``actions`` gives one command per player agent id.

    Missing or dead agents stay. Skill requests the rules forbid are turned
    into ``stay`` and logged as ``rejected_action``.
    """
    if not inplace:
        state = state.copy()
    n_players = state.n_players
    items = actions.items() if isinstance(actions, Mapping) else enumerate(actions)
    arr = np.zeros(n_players + 1, dtype=np.int64)
    for agent, a in items:
        if not isinstance(agent, (int, np.integer)) or not 0 <= int(agent) < n_players:
            raise IllegalAction(int(agent) if isinstance(agent, (int, np.integer)) else -1,
                                "unknown agent id")
        if isinstance(a, bool) or not isinstance(a, (int, np.integer)):
            raise IllegalAction(int(agent), f"action must be an integer, got {a!r}")
        arr[int(agent)] = int(a)
    arr[state.boss_id] = boss_policy(state)
    c = state.compiled
    buf = np.zeros((_event_capacity(n_players + 1), N_EV))
    ne = K.step_kernel(c.cfg, state.ch, state.sk, state.cool, state.charges, state.proj,
                       state.meta, state.rng.state, state.ledger, arr, buf, True)
    events = _decode_events(buf, ne)
    from ..agents import compute_rewards

    ledger = compute_rewards(events, state.done, state.win, n_players, state.scenario.reward_coefficients)
    return StepResult(state, events, ledger.per_agent(), ledger.group_reward, state.done)


@dataclass(frozen=True)
class DamageRoll:
    damage: float
    evaded: bool
    parried: bool
    crit: bool


def compute_damage(attacker: StatBlock, skill: SkillSpec, defender: StatBlock,
                   rng: CounterRNG) -> DamageRoll:
    """Resolve one hit. Draw order: evasion, parry, critical (always three draws)."""
    power = attacker.attack_power if skill.hit_type == "melee" else attacker.spell_power
    dmg, flags = K.roll_damage(float(power), skill.coefficient, float(attacker.critical),
                               float(defender.armor), float(defender.evasion),
                               float(defender.parry), rng.state)
    return DamageRoll(float(dmg), bool(flags & F_EVADED), bool(flags & F_PARRIED), bool(flags & F_CRIT))


def is_back_attack(attacker_position: Sequence[float], boss_position: Sequence[float],
                   boss_facing: float, half_angle_deg: float = 60.0) -> bool:
    return bool(K.is_back_kernel(float(attacker_position[0]), float(attacker_position[1]),
                                 float(boss_position[0]), float(boss_position[1]),
                                 float(boss_facing), math.radians(half_angle_deg)))


# --------------------------------------------------------------------------
# episodes

Policy = Callable[[CombatState, int, CounterRNG], int]


@dataclass
class EpisodeOutcome:
    win: bool
    duration_ticks: int
    total_damage_by_agent: list[float]
    back_attack_damage_by_agent: list[float]
    boss_final_hp: float
    position_trace: np.ndarray = field(repr=False)  # (ticks, players, 2); NaN once dead

    def to_dict(self) -> dict:
        return {
            "win": self.win,
            "duration_ticks": self.duration_ticks,
            "total_damage_by_agent": self.total_damage_by_agent,
            "back_attack_damage_by_agent": self.back_attack_damage_by_agent,
            "boss_final_hp": self.boss_final_hp,
        }


@dataclass
class EpisodeLog:
    seed: int
    events: list[Event]
    outcome: EpisodeOutcome

    def to_ndjson(self) -> bytes:
        return "".join(e.to_json() + "\n" for e in self.events).encode("utf-8")

    def sha256(self) -> str:
        return hashlib.sha256(self.to_ndjson()).hexdigest()

    @property
    def position_trace(self) -> np.ndarray:
        return self.outcome.position_trace


def run_episode(scenario: ScenarioConfig, policies: Mapping[int, Policy] | Policy,
                seed: int, *, key: int | None = None) -> tuple[EpisodeOutcome, EpisodeLog]:
    """Play one full episode with per-agent policies, recording every event.

    A single callable is used for every player. Policies are queried in agent
    order and draw from the episode stream, so this reproduces
    :func:`play_batch` exactly for the built-in policies. ``key`` overrides the
    stream key derived from ``seed`` (see :func:`play_keys`).
    """
    state = init_from_key(scenario, derive_key(seed) if key is None else key)
    n_players = state.n_players
    if callable(policies):
        policies = {i: policies for i in range(n_players)}
    missing = [i for i in range(n_players) if i not in policies]
    if missing:
        raise ValueError(f"no policy for agents {missing}")
    events: list[Event] = []
    trace = []
    actions = [STAY] * n_players
    while not state.done:
        for i in range(n_players):
            actions[i] = int(policies[i](state, i, state.rng)) if state.ch[i, ALIVE] else STAY
        res = step(state, actions, inplace=True)
        events.extend(res.events)
        pos = state.ch[:n_players, X:Y + 1].copy()
        pos[state.ch[:n_players, ALIVE] == 0] = np.nan
        trace.append(pos)
    if not events or events[-1].kind != "episode_end":
        # boss already dead at reset still takes one tick to report
        raise AssertionError("episode ended without an episode_end event")
    total = [float(state.ledger[i, L_NORMAL] + state.ledger[i, L_BACK]) for i in range(n_players)]
    back = [float(state.ledger[i, L_BACK]) for i in range(n_players)]
    outcome = EpisodeOutcome(
        win=state.win,
        duration_ticks=state.tick,
        total_damage_by_agent=total,
        back_attack_damage_by_agent=back,
        boss_final_hp=state.hp(state.boss_id),
        position_trace=np.array(trace).reshape(len(trace), n_players, 2),
    )
    return outcome, EpisodeLog(seed, events, outcome)


POLICY_KINDS = {"stay": POLICY_STAY, "heuristic": POLICY_HEURISTIC, "random": POLICY_RANDOM}


@dataclass
class BatchResult:
    wins: np.ndarray
    ticks: np.ndarray
    boss_hp: np.ndarray
    occupancy: np.ndarray


def episode_keys(seeds: Sequence[int]) -> np.ndarray:
    return np.array([derive_key(s) for s in seeds], dtype=np.uint64)


def play_keys(scenario: ScenarioConfig, policy: str, keys: np.ndarray,
              occupancy_resolution: int = 0) -> BatchResult:
    """Compiled fast path: one episode per stream key with a built-in team policy."""
    if policy not in POLICY_KINDS:
        raise ValueError(f"unknown policy {policy!r}; expected one of {sorted(POLICY_KINDS)}")
    c = compile_scenario(scenario)
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    n = len(keys)
    wins, ticks, boss_hp = np.zeros(n), np.zeros(n), np.zeros(n)
    occ = np.zeros((occupancy_resolution, occupancy_resolution))
    K.play_episodes(c.cfg, c.tmpl_ch, c.tmpl_sk, c.samp_cols, c.samp_vals, c.samp_lens,
                    keys, POLICY_KINDS[policy], occ, wins, ticks, boss_hp)
    return BatchResult(wins.astype(bool), ticks.astype(np.int64), boss_hp, occ)


def play_batch(scenario: ScenarioConfig, policy: str, seeds: Sequence[int],
               occupancy_resolution: int = 0) -> BatchResult:
    """One episode per seed; episode ``s`` is the same as ``run_episode(..., seed=s)``."""
    return play_keys(scenario, policy, episode_keys(seeds), occupancy_resolution)
