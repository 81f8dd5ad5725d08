"""Skill generators and the generator environment.

The environment state is the four balanced skill parameters scaled to the unit
cube. An action nudges each parameter by one of five levels, a fraction of its
bound span. The reward is the decrease in distance between the measured and the
target win rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Protocol, Sequence

import numpy as np

from .content import GEN_PARAMS, ParamBounds, ScenarioConfig, SkillSpec, scale_params
from .engine.core import play_keys
from .rng import CounterRNG, derive_key

DEFAULT_DELTA = 0.0008
DEFAULT_HORIZON = 50
DEFAULT_EVAL_EPISODES = 100
LEVELS = (-2, -1, 0, 1, 2)

# Heuristic generator step per parameter, in the direction that makes the game
# easier for the players. Order follows GEN_PARAMS.
EASIER_STEP = {"range": 1.5, "cool_time": -10.0, "cast_time": -0.33, "coefficient": 0.33}
# selection index -> parameter
HR_SELECTION = ("range", "cool_time", "cast_time", "coefficient")

# stream tags keep generator decisions and the two kinds of evaluation apart
STREAM_GENERATOR = 1
STREAM_IN_LOOP = 2
STREAM_FINAL = 3


@dataclass(frozen=True)
class GenState:
    cool_time: float
    range: float
    coefficient: float
    cast_time: float

    @classmethod
    def of(cls, skill: SkillSpec, bounds: ParamBounds) -> "GenState":
        return cls(*scale_params(skill, bounds))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.cool_time, self.range, self.coefficient, self.cast_time)


@dataclass(frozen=True)
class GenAction:
    """One delta level in {-2..2} per parameter, in GEN_PARAMS order."""

    levels: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.levels) != 4 or any(lv not in LEVELS for lv in self.levels):
            raise ValueError(f"levels must be four values in {LEVELS}, got {self.levels!r}")

    @classmethod
    def from_indices(cls, idx: Sequence[int]) -> "GenAction":
        """Branch indices 0..4 (as a discrete-action learner emits them)."""
        if len(idx) != 4 or any(not 0 <= int(i) <= 4 for i in idx):
            raise ValueError(f"indices must be four values in 0..4, got {idx!r}")
        return cls(tuple(int(i) - 2 for i in idx))  # type: ignore[arg-type]

    def indices(self) -> tuple[int, int, int, int]:
        return tuple(lv + 2 for lv in self.levels)  # type: ignore[return-value]


ZERO_ACTION = GenAction((0, 0, 0, 0))


def apply_action(skill: SkillSpec, action: GenAction, bounds: ParamBounds,
                 delta: float = DEFAULT_DELTA) -> SkillSpec:
    values = []
    for name, lv, (lo, hi) in zip(GEN_PARAMS, action.levels, bounds.as_pairs()):
        v = float(getattr(skill, name))
        if lv:
            v = min(max(v + lv * delta * (hi - lo), lo), hi)
        values.append(v)
    return skill.with_gen_values(values)


def random_skill(base: SkillSpec, bounds: ParamBounds, rng: CounterRNG) -> SkillSpec:
    """``base`` with its four balanced parameters drawn uniformly within bounds."""
    return base.with_gen_values([lo + rng.uniform() * (hi - lo) for lo, hi in bounds.as_pairs()])


# --------------------------------------------------------------------------
# evaluation


class Evaluator(Protocol):
    def __call__(self, skill: SkillSpec, key: tuple[int, ...]) -> float: ...


@dataclass(frozen=True)
class WinRateEvaluator:
    """Win rate of the player team when every player carries ``skill``.

    ``key`` names the evaluation (target, sample, step...) and is hashed with
    the master seed and the episode index into per-episode streams. With
    ``common_random_numbers`` the step component is dropped, so every step of a
    generator episode replays the same episode seeds.
    """

    scenario: ScenarioConfig
    episodes: int = DEFAULT_EVAL_EPISODES
    policy: str = "heuristic"
    master_seed: int = 0
    common_random_numbers: bool = False

    def keys(self, key: tuple[int, ...]) -> np.ndarray:
        if self.common_random_numbers and len(key) > 3:
            key = key[:3]
        return np.array([derive_key(self.master_seed, *key, e) for e in range(self.episodes)],
                        dtype=np.uint64)

    def __call__(self, skill: SkillSpec, key: tuple[int, ...]) -> float:
        res = play_keys(self.scenario.with_player_skill(skill), self.policy, self.keys(key))
        return float(res.wins.mean())


# --------------------------------------------------------------------------
# environment


@dataclass
class GenEpisode:
    target: float
    skill: SkillSpec
    win_rate: float
    distance: float
    t: int
    horizon: int
    bounds: ParamBounds
    key: tuple[int, ...] = ()
    rewards: list[float] = field(default_factory=list)
    initial_distance: float = 0.0

    @property
    def state(self) -> GenState:
        return GenState.of(self.skill, self.bounds)

    @property
    def done(self) -> bool:
        return self.t >= self.horizon


def gen_env_reset(bounds: ParamBounds, target: float, rng: CounterRNG, evaluator: Evaluator,
                  base_skill: SkillSpec, horizon: int = DEFAULT_HORIZON,
                  key: tuple[int, ...] = ()) -> GenEpisode:
    if not 0.0 <= target <= 1.0:
        raise ValueError(f"target win rate must lie in [0, 1], got {target}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    skill = random_skill(base_skill, bounds, rng)
    p = evaluator(skill, (*key, STREAM_IN_LOOP, 0))
    d = abs(target - p)
    return GenEpisode(target, skill, p, d, 0, horizon, bounds, key, [], d)


def gen_env_transition(ep: GenEpisode, skill: SkillSpec, evaluator: Evaluator) -> tuple[GenEpisode, float, bool]:
    """Install ``skill`` as the next step's content and re-measure it."""
    if ep.done:
        raise RuntimeError("episode already finished; reset first")
    t = ep.t + 1
    p = evaluator(skill, (*ep.key, STREAM_IN_LOOP, t))
    d = abs(ep.target - p)
    reward = ep.distance - d
    nxt = replace(ep, skill=skill, win_rate=p, distance=d, t=t, rewards=[*ep.rewards, reward])
    return nxt, reward, nxt.done


def gen_env_step(ep: GenEpisode, action: GenAction, evaluator: Evaluator,
                 delta: float = DEFAULT_DELTA) -> tuple[GenEpisode, float, bool]:
    return gen_env_transition(ep, apply_action(ep.skill, action, ep.bounds, delta), evaluator)


# --------------------------------------------------------------------------
# policies


def pcg_hr_decide(w_current: float, w_target: float, skill: SkillSpec, bounds: ParamBounds,
                  rng: CounterRNG) -> SkillSpec:
    """Change one randomly chosen parameter by a fixed step towards the target.

    A measured win rate below target makes the game easier, otherwise harder.
    """
    name = HR_SELECTION[rng.integers(4)]
    sign = 1.0 if w_current < w_target else -1.0
    lo, hi = getattr(bounds, name)
    v = min(max(float(getattr(skill, name)) + sign * EASIER_STEP[name], lo), hi)
    return replace(skill, **{name: v})


def pcg_rd_decide(rng: CounterRNG) -> GenAction:
    return GenAction(tuple(LEVELS[rng.integers(5)] for _ in range(4)))  # type: ignore[arg-type]


ExternalPolicy = Callable[[GenState, GenEpisode], GenAction]


@dataclass
class GeneratedSkill:
    target: float
    skill: SkillSpec
    in_loop_win_rate: float | None
    sample: int

    def record(self, bounds: ParamBounds, measured: float | None = None) -> dict:
        rec = {
            "sample": self.sample,
            "target": self.target,
            "in_loop_win_rate": self.in_loop_win_rate,
            "params": dict(zip(GEN_PARAMS, self.skill.gen_values())),
            "scaled": dict(zip(GEN_PARAMS, scale_params(self.skill, bounds))),
            "skill": self.skill.to_dict(),
        }
        if measured is not None:
            rec["measured_win_rate"] = measured
        return rec


GENERATORS = ("heuristic", "random", "external")


def generate_one(policy: str | ExternalPolicy, target: float, horizon: int, bounds: ParamBounds,
                 base_skill: SkillSpec, evaluator: Evaluator | None, master_seed: int,
                 key: tuple[int, ...], delta: float = DEFAULT_DELTA) -> GeneratedSkill:
    """Reset, run ``policy`` for ``horizon`` steps, return the final skill.

    The random generator never looks at the win rate, so it is rolled out on
    the parameters alone and the evaluator is not consulted. The heuristic
    needs the measured win rate before every decision.
    """
    rng = CounterRNG(derive_key(master_seed, *key, STREAM_GENERATOR))
    sample = key[-1] if key else 0
    if policy == "random":
        skill = random_skill(base_skill, bounds, rng)
        for _ in range(horizon):
            skill = apply_action(skill, pcg_rd_decide(rng), bounds, delta)
        return GeneratedSkill(target, skill, None, sample)
    if evaluator is None:
        raise ValueError(f"generator {policy!r} needs an evaluator")
    ep = gen_env_reset(bounds, target, rng, evaluator, base_skill, horizon, key)
    while not ep.done:
        if policy == "heuristic":
            ep, _, _ = gen_env_transition(ep, pcg_hr_decide(ep.win_rate, target, ep.skill, bounds, rng), evaluator)
        elif callable(policy):
            ep, _, _ = gen_env_step(ep, policy(ep.state, ep), evaluator, delta)
        else:
            raise ValueError(f"unknown generator {policy!r}; expected one of {GENERATORS}")
    return GeneratedSkill(target, ep.skill, ep.win_rate, sample)


def sample_skills(policy: str | ExternalPolicy, target: float, count: int, horizon: int,
                  master_seed: int, bounds: ParamBounds, base_skill: SkillSpec,
                  evaluator: Evaluator | None = None, target_index: int = 0,
                  delta: float = DEFAULT_DELTA) -> list[GeneratedSkill]:
    if count < 1:
        raise ValueError("count must be >= 1")
    return [
        generate_one(policy, target, horizon, bounds, base_skill, evaluator, master_seed,
                     (target_index, i), delta)
        for i in range(count)
    ]
