"""Balanceable content: character statistics, skills, classes and scenarios.

Every record is validated on construction from a raw mapping and is immutable
afterwards. Validation collects *all* problems before failing, so a designer
editing a scenario file sees every bad field at once.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from typing import Any, Mapping, Sequence

SCHEMA_VERSION = 1

MAGIC_SCHOOLS = (
    "physical", "fire", "frost", "arcane", "nature",
    "shadow", "holy", "lightning", "earth", "water",
)
TRIGGER_TYPES = ("active", "passive")
HIT_TYPES = ("melee", "skill")
TARGET_TYPES = ("target", "non_target", "region")

# Generated parameters, in GenState order.
GEN_PARAMS = ("cool_time", "range", "coefficient", "cast_time")


@dataclass(frozen=True)
class Issue:
    kind: str  # out_of_range | unknown_field | invalid_enum | invalid_type | missing | empty | parse
    path: str
    value: Any = None
    allowed: Any = None

    def __str__(self) -> str:
        if self.kind == "out_of_range":
            return f"{self.path}: {self.value!r} outside [{self.allowed[0]}, {self.allowed[1]}]"
        if self.kind == "invalid_enum":
            return f"{self.path}: {self.value!r} not one of {list(self.allowed)}"
        if self.kind == "unknown_field":
            return f"{self.path}: unknown field"
        if self.kind == "invalid_type":
            return f"{self.path}: expected {self.allowed}, got {self.value!r}"
        return f"{self.path}: {self.kind}" + (f" ({self.value})" if self.value is not None else "")


class ValidationError(ValueError):
    """Raised with the complete list of problems found in a document."""

    def __init__(self, issues: Sequence[Issue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class ParseError(ValidationError):
    pass


class OutOfUnitIntervalError(ValueError):
    def __init__(self, index: int, value: float):
        self.index = index
        super().__init__(f"component {index} ({GEN_PARAMS[index]}) = {value} outside [0, 1]")


class OutOfBoundsError(ValueError):
    def __init__(self, param: str, value: float, lo: float, hi: float):
        self.param = param
        super().__init__(f"{param}={value} outside bounds [{lo}, {hi}]")


# name -> (kind, lo, hi, default). kind is "int" or "real".
STAT_FIELDS: dict[str, tuple[str, float, float, float]] = {
    "health_point": ("int", 0, 1000, 100),
    "mana_point": ("int", 0, 100, 100),
    "spell_power": ("int", 0, 100, 50),
    "movement_speed": ("real", 1, 2, 2.0),
    "attack_power": ("int", 0, 100, 0),
    "attack_range": ("int", 1, 10, 1),
    "attack_speed": ("real", 1, 2, 1.0),
    "armor": ("int", 0, 100, 0),
    "evasion": ("int", 0, 100, 0),
    "parry": ("real", 0, 100, 0.0),
    "strength": ("int", 1, 100, 10),
    "agility": ("int", 1, 100, 10),
    "intelligence": ("int", 1, 100, 10),
    "critical": ("int", 0, 100, 0),
    "haste": ("int", 0, 100, 0),
    "versatility": ("int", 0, 100, 0),
    "mastery": ("int", 0, 100, 0),
}

SKILL_NUMERIC: dict[str, tuple[str, float, float, float]] = {
    "projectile_speed": ("real", 0, 50, 0.0),
    "cool_time": ("real", 0, 60, 1.0),
    "cast_time": ("real", 0, 2, 0.5),
    "cost": ("real", 0, 100, 0.0),
    "range": ("real", 1, 20, 10.0),
    "charge": ("int", 1, 3, 1),
    "coefficient": ("real", 0, 2, 0.75),
}
SKILL_ENUMS: dict[str, tuple[tuple[str, ...], str]] = {
    "trigger_type": (TRIGGER_TYPES, "active"),
    "magic_school": (MAGIC_SCHOOLS, "physical"),
    "hit_type": (HIT_TYPES, "skill"),
    "target_type": (TARGET_TYPES, "target"),
}
SKILL_FLAGS: dict[str, bool] = {
    "affect_ally": False,
    "affect_enemy": True,
    "cast_on_moving": False,
    "cast_on_casting": False,
    "cast_on_channeling": False,
}


@dataclass(frozen=True)
class StatBlock:
    health_point: int = 100
    mana_point: int = 100
    spell_power: int = 50
    movement_speed: float = 2.0
    attack_power: int = 0
    attack_range: int = 1
    attack_speed: float = 1.0
    armor: int = 0
    evasion: int = 0
    parry: float = 0.0
    strength: int = 10
    agility: int = 10
    intelligence: int = 10
    critical: int = 0
    haste: int = 0
    versatility: int = 0
    mastery: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SkillSpec:
    """One skill. ``trigger_type='passive'`` is representable but inert in the engine."""

    name: str = "skill"
    trigger_type: str = "active"
    magic_school: str = "physical"
    hit_type: str = "skill"
    target_type: str = "target"
    projectile_speed: float = 0.0
    affect_ally: bool = False
    affect_enemy: bool = True
    cool_time: float = 1.0
    cast_time: float = 0.5
    cost: float = 0.0
    range: float = 10.0
    charge: int = 1
    cast_on_moving: bool = False
    cast_on_casting: bool = False
    cast_on_channeling: bool = False
    coefficient: float = 0.75

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def gen_values(self) -> tuple[float, float, float, float]:
        return tuple(float(getattr(self, p)) for p in GEN_PARAMS)  # type: ignore[return-value]

    def with_gen_values(self, values: Sequence[float]) -> "SkillSpec":
        return replace(self, **dict(zip(GEN_PARAMS, (float(v) for v in values))))


@dataclass(frozen=True)
class ClassSpec:
    stats: StatBlock
    skills: tuple[SkillSpec, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"stats": self.stats.to_dict(), "skills": [s.to_dict() for s in self.skills]}


@dataclass(frozen=True)
class ParamBounds:
    """Per-parameter [min, max] for the four generated skill parameters.

    A degenerate interval (min == max) is allowed and pins the parameter.
    """

    cool_time: tuple[float, float] = (0.5, 60.0)
    range: tuple[float, float] = (1.0, 20.0)
    coefficient: tuple[float, float] = (0.5, 1.0)
    cast_time: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        issues = []
        for name in GEN_PARAMS:
            lo, hi = getattr(self, name)
            _, flo, fhi, _ = SKILL_NUMERIC[name]
            if not (flo <= lo <= hi <= fhi):
                issues.append(Issue("out_of_range", f"bounds.{name}", (lo, hi), (flo, fhi)))
        if issues:
            raise ValidationError(issues)

    def as_pairs(self) -> tuple[tuple[float, float], ...]:
        return tuple(getattr(self, p) for p in GEN_PARAMS)

    def to_dict(self) -> dict[str, list[float]]:
        return {p: list(getattr(self, p)) for p in GEN_PARAMS}


@dataclass(frozen=True)
class RewardCoefficients:
    damage: float = 0.01
    back_attack: float = 0.012
    group_win: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    arena_radius: float
    tick_dt: float
    episode_time_limit: float
    boss: ClassSpec
    boss_hp_multiplier: float
    players: tuple[ClassSpec, ...]
    content_sampling: tuple[tuple[str, tuple[float, ...]], ...] = ()
    reward_coefficients: RewardCoefficients = field(default_factory=RewardCoefficients)
    turn_rate_deg: float = 120.0
    back_attack_half_angle_deg: float = 60.0
    orbit_resample: str = "tick"  # "tick" | "episode"

    @property
    def boss_max_hp(self) -> float:
        return float(self.players[0].stats.health_point) * self.boss_hp_multiplier

    @property
    def max_ticks(self) -> int:
        ratio = self.episode_time_limit / self.tick_dt
        nearest = round(ratio)
        return int(nearest) if abs(ratio - nearest) < 1e-9 else math.ceil(ratio)

    def with_player_skill(self, skill: SkillSpec, slot: int = 0) -> "ScenarioConfig":
        """Copy with ``skill`` installed in ``slot`` of every player."""
        players = []
        for p in self.players:
            skills = list(p.skills)
            skills[slot] = skill
            players.append(ClassSpec(p.stats, tuple(skills)))
        return replace(self, players=tuple(players))

    def with_player_param(self, name: str, value: float) -> "ScenarioConfig":
        players = tuple(
            ClassSpec(p.stats, tuple(replace(s, **{name: value}) for s in p.skills))
            for p in self.players
        )
        return replace(self, players=players)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "arena_radius": self.arena_radius,
            "tick_dt": self.tick_dt,
            "episode_time_limit": self.episode_time_limit,
            "turn_rate_deg": self.turn_rate_deg,
            "back_attack_half_angle_deg": self.back_attack_half_angle_deg,
            "orbit_resample": self.orbit_resample,
            "boss": {**self.boss.to_dict(), "hp_multiplier": self.boss_hp_multiplier},
            "players": [p.to_dict() for p in self.players],
            "content_sampling": {k: list(v) for k, v in self.content_sampling} or None,
            "reward_coefficients": {
                "damage": self.reward_coefficients.damage,
                "back_attack": self.reward_coefficients.back_attack,
                "group_win": self.reward_coefficients.group_win,
            },
        }


# --------------------------------------------------------------------------
# validation


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_numeric(path: str, v: Any, kind: str, lo: float, hi: float, issues: list[Issue]):
    if not _is_number(v) or (isinstance(v, float) and not math.isfinite(v)):
        issues.append(Issue("invalid_type", path, v, "number"))
        return None
    if kind == "int":
        if isinstance(v, float):
            if not v.is_integer():
                issues.append(Issue("invalid_type", path, v, "integer"))
                return None
            v = int(v)
    else:
        v = float(v)
    if not (lo <= v <= hi):
        issues.append(Issue("out_of_range", path, v, (lo, hi)))
        return None
    return v


def _collect_stats(raw: Any, path: str, issues: list[Issue]) -> StatBlock | None:
    if not isinstance(raw, Mapping):
        issues.append(Issue("invalid_type", path or "stats", raw, "mapping"))
        return None
    n_before = len(issues)
    values = {}
    for key, v in raw.items():
        p = f"{path}.{key}" if path else str(key)
        if key not in STAT_FIELDS:
            issues.append(Issue("unknown_field", p, key))
            continue
        kind, lo, hi, _ = STAT_FIELDS[key]
        checked = _check_numeric(p, v, kind, lo, hi, issues)
        if checked is not None:
            values[key] = checked
    if len(issues) > n_before:
        return None
    return StatBlock(**values)


def _collect_skill(raw: Any, path: str, issues: list[Issue]) -> SkillSpec | None:
    if not isinstance(raw, Mapping):
        issues.append(Issue("invalid_type", path or "skill", raw, "mapping"))
        return None
    n_before = len(issues)
    values: dict[str, Any] = {}
    for key, v in raw.items():
        p = f"{path}.{key}" if path else str(key)
        if key == "name":
            if not isinstance(v, str):
                issues.append(Issue("invalid_type", p, v, "string"))
            else:
                values[key] = v
        elif key in SKILL_NUMERIC:
            kind, lo, hi, _ = SKILL_NUMERIC[key]
            checked = _check_numeric(p, v, kind, lo, hi, issues)
            if checked is not None:
                values[key] = checked
        elif key in SKILL_ENUMS:
            labels, _ = SKILL_ENUMS[key]
            if isinstance(v, str) and v in labels:
                values[key] = v
            elif _is_number(v) and float(v).is_integer() and 0 <= int(v) < len(labels):
                values[key] = labels[int(v)]
            else:
                issues.append(Issue("invalid_enum", p, v, labels))
        elif key in SKILL_FLAGS:
            if not isinstance(v, bool):
                issues.append(Issue("invalid_type", p, v, "boolean"))
            else:
                values[key] = v
        else:
            issues.append(Issue("unknown_field", p, key))
    if len(issues) > n_before:
        return None
    return SkillSpec(**values)


def validate_stat_block(raw: Mapping[str, Any]) -> StatBlock:
    """Range-check a stat mapping; missing fields take the benchmark defaults.

    Raises ValidationError listing every offending field.
    """
    issues: list[Issue] = []
    stats = _collect_stats(raw, "", issues)
    if issues:
        raise ValidationError(issues)
    return stats  # type: ignore[return-value]


def validate_skill(raw: Mapping[str, Any]) -> SkillSpec:
    issues: list[Issue] = []
    skill = _collect_skill(raw, "", issues)
    if issues:
        raise ValidationError(issues)
    return skill  # type: ignore[return-value]


def _collect_class(raw: Any, path: str, issues: list[Issue], extra: Sequence[str] = ()) -> ClassSpec | None:
    if not isinstance(raw, Mapping):
        issues.append(Issue("invalid_type", path, raw, "mapping"))
        return None
    n_before = len(issues)
    for key in raw:
        if key not in ("stats", "skills", *extra):
            issues.append(Issue("unknown_field", f"{path}.{key}", key))
    stats = _collect_stats(raw.get("stats", {}), f"{path}.stats", issues)
    raw_skills = raw.get("skills")
    skills = []
    if not isinstance(raw_skills, list) or not 1 <= len(raw_skills) <= 3:
        issues.append(Issue("invalid_type", f"{path}.skills", raw_skills, "list of 1..3 skills"))
    else:
        for i, s in enumerate(raw_skills):
            skills.append(_collect_skill(s, f"{path}.skills[{i}]", issues))
    if len(issues) > n_before:
        return None
    return ClassSpec(stats, tuple(skills))  # type: ignore[arg-type]


_SCENARIO_KEYS = {
    "schema_version", "name", "arena_radius", "tick_dt", "episode_time_limit",
    "turn_rate_deg", "back_attack_half_angle_deg", "orbit_resample", "boss",
    "players", "content_sampling", "reward_coefficients",
}


def scenario_from_dict(doc: Any) -> ScenarioConfig:
    """Validate a decoded scenario document."""
    issues: list[Issue] = []
    if not isinstance(doc, Mapping):
        raise ValidationError([Issue("invalid_type", "$", doc, "mapping")])
    for key in doc:
        if key not in _SCENARIO_KEYS:
            issues.append(Issue("unknown_field", str(key), key))
    if doc.get("schema_version") != SCHEMA_VERSION:
        issues.append(Issue("invalid_enum", "schema_version", doc.get("schema_version"), (SCHEMA_VERSION,)))

    def positive(key: str, default: float | None = None) -> float:
        v = doc.get(key, default)
        if v is None:
            issues.append(Issue("missing", key))
            return 1.0
        if not _is_number(v) or not math.isfinite(v) or v <= 0:
            issues.append(Issue("out_of_range", key, v, (0, math.inf)))
            return 1.0
        return float(v)

    radius = positive("arena_radius", 20.0)
    dt = positive("tick_dt", 0.05)
    limit = positive("episode_time_limit", 60.0)
    turn = positive("turn_rate_deg", 120.0)
    half = doc.get("back_attack_half_angle_deg", 60.0)
    if not _is_number(half) or not 0 <= half <= 180:
        issues.append(Issue("out_of_range", "back_attack_half_angle_deg", half, (0, 180)))
        half = 60.0
    orbit = doc.get("orbit_resample", "tick")
    if orbit not in ("tick", "episode"):
        issues.append(Issue("invalid_enum", "orbit_resample", orbit, ("tick", "episode")))

    boss_raw = doc.get("boss")
    boss = _collect_class(boss_raw, "boss", issues, extra=("hp_multiplier",))
    mult = boss_raw.get("hp_multiplier", 10.0) if isinstance(boss_raw, Mapping) else 10.0
    if not _is_number(mult) or mult < 0:
        issues.append(Issue("out_of_range", "boss.hp_multiplier", mult, (0, math.inf)))
        mult = 10.0

    players_raw = doc.get("players")
    players = []
    if not isinstance(players_raw, list) or not players_raw:
        issues.append(Issue("empty", "players", players_raw))
    else:
        for i, p in enumerate(players_raw):
            players.append(_collect_class(p, f"players[{i}]", issues))

    sampling = []
    samp_raw = doc.get("content_sampling") or {}
    if not isinstance(samp_raw, Mapping):
        issues.append(Issue("invalid_type", "content_sampling", samp_raw, "mapping"))
        samp_raw = {}
    for key, vals in samp_raw.items():
        p = f"content_sampling.{key}"
        if key not in SKILL_NUMERIC:
            issues.append(Issue("unknown_field", p, key))
            continue
        if not isinstance(vals, list) or not vals:
            issues.append(Issue("empty", p, vals))
            continue
        kind, lo, hi, _ = SKILL_NUMERIC[key]
        checked = [_check_numeric(f"{p}[{i}]", v, kind, lo, hi, issues) for i, v in enumerate(vals)]
        sampling.append((key, tuple(float(c) for c in checked if c is not None)))

    rc_raw = doc.get("reward_coefficients") or {}
    rc = RewardCoefficients()
    if isinstance(rc_raw, Mapping):
        vals = {}
        for key, v in rc_raw.items():
            if key not in ("damage", "back_attack", "group_win"):
                issues.append(Issue("unknown_field", f"reward_coefficients.{key}", key))
            elif not _is_number(v):
                issues.append(Issue("invalid_type", f"reward_coefficients.{key}", v, "number"))
            else:
                vals[key] = float(v)
        rc = RewardCoefficients(**vals)
    else:
        issues.append(Issue("invalid_type", "reward_coefficients", rc_raw, "mapping"))

    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        issues.append(Issue("invalid_type", "name", name, "string"))
    if issues:
        raise ValidationError(issues)
    return ScenarioConfig(
        name=name,
        arena_radius=radius,
        tick_dt=dt,
        episode_time_limit=limit,
        boss=boss,  # type: ignore[arg-type]
        boss_hp_multiplier=float(mult),
        players=tuple(players),  # type: ignore[arg-type]
        content_sampling=tuple(sampling),
        reward_coefficients=rc,
        turn_rate_deg=turn,
        back_attack_half_angle_deg=float(half),
        orbit_resample=orbit,
    )


def load_scenario(document: bytes | str) -> ScenarioConfig:
    """Parse and validate a UTF-8 JSON scenario document."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError([Issue("parse", f"byte {e.start}", str(e))]) from None
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ParseError([Issue("parse", f"line {e.lineno} column {e.colno}", e.msg)]) from None
    return scenario_from_dict(doc)


def bundled_scenario_text(name: str = "benchmark_default") -> str:
    return resources.files("bossraid.scenarios").joinpath(f"{name}.json").read_text("utf-8")


def benchmark_scenario(name: str = "benchmark_default") -> ScenarioConfig:
    return load_scenario(bundled_scenario_text(name))


def resolve_scenario(ref: str | None) -> ScenarioConfig:
    """A bundled scenario name or a path to a JSON document."""
    if ref is None:
        return benchmark_scenario()
    if ref.endswith(".json"):
        with open(ref, "rb") as fh:
            return load_scenario(fh.read())
    return benchmark_scenario(ref)


# --------------------------------------------------------------------------
# scaling between raw parameters and the generator's unit cube


def scale_params(skill: SkillSpec, bounds: ParamBounds) -> tuple[float, float, float, float]:
    out = []
    for name, (lo, hi) in zip(GEN_PARAMS, bounds.as_pairs()):
        v = float(getattr(skill, name))
        if not lo <= v <= hi:
            raise OutOfBoundsError(name, v, lo, hi)
        out.append(0.0 if hi == lo else (v - lo) / (hi - lo))
    return tuple(out)  # type: ignore[return-value]


def unscale_params(state: Sequence[float], bounds: ParamBounds) -> tuple[float, float, float, float]:
    if len(state) != 4:
        raise ValueError(f"expected 4 components, got {len(state)}")
    out = []
    for i, (s, (lo, hi)) in enumerate(zip(state, bounds.as_pairs())):
        if not 0.0 <= s <= 1.0:
            raise OutOfUnitIntervalError(i, s)
        out.append(lo + s * (hi - lo))
    return tuple(out)  # type: ignore[return-value]
